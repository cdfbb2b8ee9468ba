"""Radio channel model: path loss, shadowing, antenna patterns, TDL fading.

Produces the per-frequency-block linear gain tensor g[ue][cell][block] that
the optimization layer consumes.  Links are nearly line-of-sight at the
operating heights: a strong first tap carries almost all energy, so gains
are close to flat across the 9 MHz band (the optimizer exploits this).
"""

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class LargeScaleParams:
    """Distance-power law plus log-normal shadowing, in dB."""

    ple: float = 2.1
    pl_1m_db: float = 32.8
    shadow_std_db: float = 4.4

    def __post_init__(self):
        if self.ple <= 0 or self.shadow_std_db < 0:
            raise ConfigurationError("ple must be > 0 and shadow_std_db >= 0")


@dataclass(frozen=True)
class TdlProfile:
    """Tapped-delay-line profile; first tap Rician, the rest Rayleigh.

    tap_powers_db are total per-tap mean powers normalized to 0 dB overall.
    """

    tap_delays_s: tuple
    tap_powers_db: tuple
    rician_k_db: float = 15.0

    def __post_init__(self):
        d = np.asarray(self.tap_delays_s)
        if d[0] != 0.0 or np.any(np.diff(d) <= 0):
            raise ConfigurationError("tap delays must strictly increase from 0")
        p_lin = 10.0 ** (np.asarray(self.tap_powers_db) / 10.0)
        if abs(p_lin.sum() - 1.0) > 1e-9:
            raise ConfigurationError("tap powers must sum to unit total power")

    @property
    def tap_powers_linear(self):
        return 10.0 ** (np.asarray(self.tap_powers_db) / 10.0)


@dataclass(frozen=True)
class AntennaPattern:
    """Parabolic pattern with a front-to-back floor; elevation cut optional."""

    azimuth_hpbw_deg: float
    elevation_hpbw_deg: float | None
    max_gain_dbi: float
    front_to_back_db: float = 25.0


def default_sector_pattern():
    return AntennaPattern(azimuth_hpbw_deg=120.0, elevation_hpbw_deg=13.0,
                          max_gain_dbi=15.0, front_to_back_db=25.0)


def default_uav_pattern():
    return AntennaPattern(azimuth_hpbw_deg=60.0, elevation_hpbw_deg=None,
                          max_gain_dbi=8.0, front_to_back_db=25.0)


def default_tdl_profile(diffuse_rms_ns=100.0, n_taps=12, diffuse_share_db=-22.0,
                        decay_range_db=30.0, rician_k_db=15.0):
    """LoS-dominant profile: tap 0 plus an exponentially decaying diffuse tail.

    The diffuse tail spans ``decay_range_db`` and is spaced to the requested
    diffuse-part RMS delay spread; its total share is small enough that the
    gain stays within ~3 dB across 9 MHz (measured A2G channels show
    coherence bandwidths of 100 MHz and more).
    """
    n_diff = n_taps - 1
    steps = np.arange(n_diff)
    p_diff = 10.0 ** (-decay_range_db / (n_diff - 1) * steps / 10.0)
    p_diff /= p_diff.sum()
    delays_unit = 1.0 + steps
    mu = (p_diff * delays_unit).sum()
    sigma_unit = np.sqrt((p_diff * delays_unit ** 2).sum() - mu ** 2)
    spacing = diffuse_rms_ns * 1e-9 / sigma_unit
    share = 10.0 ** (diffuse_share_db / 10.0)
    powers = np.concatenate([[1.0 - share], share * p_diff])
    delays = np.concatenate([[0.0], delays_unit * spacing])
    return TdlProfile(tap_delays_s=tuple(delays),
                      tap_powers_db=tuple(10.0 * np.log10(powers)),
                      rician_k_db=rician_k_db)


def path_loss_db(distance_3d_m, params):
    """Log-distance path loss; distances below 1 m clamp to the intercept."""
    d = np.maximum(np.asarray(distance_3d_m, dtype=float), 1.0)
    return params.pl_1m_db + 10.0 * params.ple * np.log10(d)


def _wrap_deg(a):
    return (np.asarray(a, dtype=float) + 180.0) % 360.0 - 180.0


def pattern_gain_db(az_off_deg, el_off_deg, pattern):
    """Parabolic attenuation per axis, summed and floored at the backlobe."""
    att = 12.0 * (_wrap_deg(az_off_deg) / pattern.azimuth_hpbw_deg) ** 2
    if pattern.elevation_hpbw_deg is not None:
        att = att + 12.0 * (_wrap_deg(el_off_deg) / pattern.elevation_hpbw_deg) ** 2
    att = np.minimum(att, pattern.front_to_back_db)
    return pattern.max_gain_dbi - att


def _draw_taps(profile, rng, shape):
    """Complex tap draws of the given leading shape; vectorized."""
    powers = profile.tap_powers_linear
    n_taps = len(powers)
    k_lin = np.inf if np.isinf(profile.rician_k_db) else 10.0 ** (profile.rician_k_db / 10.0)
    normals = rng.normal(size=shape + (n_taps, 2))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=shape)
    taps = np.empty(shape + (n_taps,), dtype=complex)
    if np.isinf(k_lin):
        los_amp = np.sqrt(powers[0])
        diff0_std = 0.0
    else:
        los_amp = np.sqrt(powers[0] * k_lin / (k_lin + 1.0))
        diff0_std = np.sqrt(powers[0] / (k_lin + 1.0) / 2.0)
    taps[..., 0] = (los_amp * np.exp(1j * phases)
                    + diff0_std * (normals[..., 0, 0] + 1j * normals[..., 0, 1]))
    for l in range(1, n_taps):
        std = np.sqrt(powers[l] / 2.0)
        taps[..., l] = std * (normals[..., l, 0] + 1j * normals[..., l, 1])
    return taps


def realize_tdl(profile, rng_seed):
    """One statistical realization of the tapped-delay-line channel."""
    rng = np.random.default_rng(rng_seed)
    return _draw_taps(profile, rng, ())


def block_gains(taps, tap_delays_s, bandwidth_hz, s_blocks, grid_per_block=32):
    """|H(f)|^2 averaged over each of s_blocks equal sub-bands.

    ``taps`` may carry leading batch dimensions; delays are shared.
    """
    if s_blocks < 1:
        raise ConfigurationError("s_blocks must be >= 1")
    taps = np.asarray(taps)
    delays = np.asarray(tap_delays_s)
    n_pts = s_blocks * grid_per_block
    f = -bandwidth_hz / 2.0 + bandwidth_hz * (np.arange(n_pts) + 0.0) / n_pts
    steer = np.exp(-2j * np.pi * np.outer(delays, f))
    h = taps @ steer
    p = (h.real ** 2 + h.imag ** 2).reshape(taps.shape[:-1] + (s_blocks, grid_per_block))
    return p.mean(axis=-1)


@dataclass(frozen=True)
class ChannelGainTensor:
    """Linear power gains g[ue][cell][block] plus OLPC-visible serving loss."""

    g: np.ndarray                   # (n_ue, n_cells, s_blocks), linear
    cell_ids: np.ndarray            # (n_cells,) cell index of each column
    serving_col: np.ndarray         # (n_ue,) column of each UE's serving cell
    serving_loss_db: np.ndarray     # (n_ue,) large-scale link-budget loss

    @property
    def n_ue(self):
        return self.g.shape[0]

    @property
    def s_blocks(self):
        return self.g.shape[2]


def build_gain_tensor(layout, drop, large, tdl, patterns, s_blocks, rng_seed,
                      bandwidth_hz=9e6, cells=None, n_uav_beams=6):
    """Full gain tensor for a drop.

    patterns is (sector pattern, uav pattern).  The UAV picks its best of
    ``n_uav_beams`` evenly spaced beams toward the serving BS and keeps it
    for all links.  Shadowing and fading are independent per (ue, cell).
    """
    bs_pattern, uav_pattern = patterns
    if cells is None:
        cells = np.arange(layout.n_cells)
    cells = np.asarray(sorted(int(c) for c in cells), dtype=np.int64)
    col_of = {int(c): k for k, c in enumerate(cells)}
    missing = [int(c) for c in drop.serving_cell if int(c) not in col_of]
    if missing:
        raise ConfigurationError(f"serving cells {missing} not among tensor columns")
    n_ue = drop.n_ue
    n_c = len(cells)
    ue_xy = drop.positions[:, :2]
    ue_h = drop.positions[:, 2]
    site_xy = np.array([layout.cell_site(c) for c in cells])
    boresight = np.array([layout.cell_boresight(c) for c in cells])
    downtilt = np.array([layout.sectors[c][2] for c in cells])

    dx = ue_xy[:, 0, None] - site_xy[None, :, 0]
    dy = ue_xy[:, 1, None] - site_xy[None, :, 1]
    horiz = np.hypot(dx, dy)
    dz = ue_h[:, None] - layout.bs_height
    d3 = np.sqrt(horiz ** 2 + dz ** 2)

    az_bs_to_ue = np.rad2deg(np.arctan2(dy, dx))
    el_bs_to_ue = np.rad2deg(np.arctan2(dz, horiz))
    g_bs = pattern_gain_db(az_bs_to_ue - boresight[None, :],
                           el_bs_to_ue + downtilt[None, :], bs_pattern)

    az_ue_to_bs = np.rad2deg(np.arctan2(-dy, -dx))
    serving_col = np.array([col_of[int(c)] for c in drop.serving_cell], dtype=np.int64)
    az_serving = az_ue_to_bs[np.arange(n_ue), serving_col]
    beam_step = 360.0 / n_uav_beams
    beam_az = np.round(az_serving / beam_step) * beam_step
    g_uav = pattern_gain_db(az_ue_to_bs - beam_az[:, None], 0.0, uav_pattern)

    pl = path_loss_db(d3, large)
    rng = np.random.default_rng(rng_seed)
    shadow = rng.normal(0.0, large.shadow_std_db, size=(n_ue, n_c))
    taps = _draw_taps(tdl, rng, (n_ue, n_c))
    blocks = block_gains(taps, tdl.tap_delays_s, bandwidth_hz, s_blocks)

    ls_db = -pl - shadow + g_bs + g_uav
    g = 10.0 ** (ls_db[:, :, None] / 10.0) * blocks
    if not np.all(np.isfinite(g)) or np.any(g <= 0):
        raise ConfigurationError("gain tensor has non-positive or non-finite entries")
    serving_loss = -ls_db[np.arange(n_ue), serving_col]
    return ChannelGainTensor(g=g, cell_ids=cells, serving_col=serving_col,
                             serving_loss_db=serving_loss)


def gain_tensor_to_csv(tensor, path=None):
    """Dump as (ue, cell, block, gain_db) rows; importable for canned tests."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["i", "j", "s", "gain_db"])
    n_ue, n_c, s = tensor.g.shape
    for i in range(n_ue):
        for j in range(n_c):
            for b in range(s):
                w.writerow([i, int(tensor.cell_ids[j]), b,
                            f"{10.0 * np.log10(tensor.g[i, j, b]):.8f}"])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as f:
            f.write(text)
    return text


def gain_tensor_from_csv(text_or_path, serving_cells):
    """Rebuild a tensor from the CSV dump plus each UE's serving cell."""
    if "\n" not in str(text_or_path):
        with open(text_or_path) as f:
            text = f.read()
    else:
        text = text_or_path
    rows = list(csv.reader(io.StringIO(text)))[1:]
    data = np.array([[float(v) for v in r] for r in rows])
    ues = np.unique(data[:, 0].astype(int))
    cells = np.unique(data[:, 1].astype(int))
    blocks = np.unique(data[:, 2].astype(int))
    col_of = {c: k for k, c in enumerate(cells)}
    g = np.zeros((len(ues), len(cells), len(blocks)))
    for i, j, s, gdb in data:
        g[int(i), col_of[int(j)], int(s)] = 10.0 ** (gdb / 10.0)
    serving_cells = np.asarray(serving_cells, dtype=np.int64)
    serving_col = np.array([col_of[int(c)] for c in serving_cells], dtype=np.int64)
    band_db = 10.0 * np.log10(g.mean(axis=2))
    serving_loss = -band_db[np.arange(len(ues)), serving_col]
    return ChannelGainTensor(g=g, cell_ids=cells.astype(np.int64),
                             serving_col=serving_col, serving_loss_db=serving_loss)
