"""Non-optimized references: open-loop power control and time-domain PF."""

from dataclasses import dataclass

import numpy as np

from .errors import SchedulingError


@dataclass(frozen=True)
class OlpcParams:
    """Fractional path-loss compensation capped at the configured maximum."""

    p_max_dbm: float = 23.0
    p0_dbm: float = -81.0
    alpha: float = 0.9
    m_rb: int = 50

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError("alpha must lie in [0, 1]")
        if self.m_rb < 1:
            raise ValueError("m_rb must be >= 1")


def olpc_power_dbm(pl_db, params=OlpcParams()):
    """min(P_max, P0 + 10 log10(M_RB) + alpha * PL), vectorized over pl_db."""
    p = params.p0_dbm + 10.0 * np.log10(params.m_rb) + params.alpha * np.asarray(pl_db, dtype=float)
    return np.minimum(params.p_max_dbm, p)


@dataclass
class PfState:
    """Exponentially averaged per-UE rates for proportional-fair selection."""

    r_hist: np.ndarray
    forgetting: float = 0.01

    @classmethod
    def fresh(cls, n_ue, forgetting=0.01, eps=1e-3):
        return cls(r_hist=np.full(n_ue, eps, dtype=float), forgetting=forgetting)


def pf_select(instant_rates, state):
    """UE index with the largest instantaneous-to-average rate ratio.

    Ties break toward the lowest index.
    """
    rates = np.asarray(instant_rates, dtype=float)
    if rates.size == 0:
        raise SchedulingError("pf_select called with no candidate UEs")
    return int(np.argmax(rates / state.r_hist[:rates.size]))


def pf_update(state, served, achieved_rate):
    """Decay all averages; blend the served UE's achieved rate in."""
    beta = state.forgetting
    r = state.r_hist * (1.0 - beta)
    r[served] += beta * achieved_rate
    return PfState(r_hist=r, forgetting=beta)
