"""Sectored hexagonal network generation, UE drops and cell clustering.

Sites are placed on a triangular lattice (center-out spiral) with three
120-degree sectors per site.  All outputs are plain immutable data; every
function is deterministic given its arguments.
"""

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

SECTOR_BORESIGHTS_DEG = (0.0, 120.0, 240.0)


@dataclass(frozen=True)
class NetworkLayout:
    """Sites plus their sectors; one cell per sector."""

    sites: np.ndarray            # (n_sites, 2) positions in meters
    sectors: tuple               # (site index, boresight deg, downtilt deg) per cell
    bs_height: float
    isd: float

    @property
    def n_cells(self):
        return len(self.sectors)

    @property
    def n_sites(self):
        return len(self.sites)

    def cell_site(self, cell):
        return self.sites[self.sectors[cell][0]]

    def cell_boresight(self, cell):
        return self.sectors[cell][1]


@dataclass(frozen=True)
class UeDrop:
    """Dropped UE positions and their serving cells."""

    positions: np.ndarray        # (n_ue, 3) x, y, height in meters
    serving_cell: np.ndarray     # (n_ue,) cell index
    ue_height: float

    @property
    def n_ue(self):
        return len(self.serving_cell)


@dataclass(frozen=True)
class ClusterMap:
    """Disjoint cell-index sets covering all cells."""

    clusters: tuple              # tuple of tuples of cell indices

    @property
    def n_clusters(self):
        return len(self.clusters)


def _hex_spiral(n_sites, isd):
    """Center-out spiral of triangular-lattice points with spacing isd."""
    pts = [(0.0, 0.0)]
    ring = 1
    while len(pts) < n_sites:
        # start at ring * (cos 30, sin 30) axis and walk the 6 edges
        corner = np.array([isd * ring, 0.0])
        directions = [np.array([np.cos(np.deg2rad(60.0 * k + 120.0)),
                                np.sin(np.deg2rad(60.0 * k + 120.0))]) for k in range(6)]
        ring_pts = []
        pos = corner.copy()
        for d in directions:
            for _ in range(ring):
                ring_pts.append(pos.copy())
                pos = pos + isd * d
        # deterministic order: sort ring points by angle then radius
        ring_pts.sort(key=lambda p: (np.arctan2(p[1], p[0]) % (2 * np.pi), p[0], p[1]))
        pts.extend([tuple(p) for p in ring_pts])
        ring += 1
    return np.array(pts[:n_sites])


def build_layout(n_sites, isd, bs_height, downtilt_deg):
    """Hexagonal site grid with three sectors per site.

    16 sites at 2 km ISD reproduce the default 48-cell map.
    """
    if n_sites < 1:
        raise ConfigurationError(f"n_sites must be >= 1, got {n_sites}")
    if isd <= 0 or bs_height <= 0:
        raise ConfigurationError("isd and bs_height must be positive")
    sites = _hex_spiral(n_sites, float(isd))
    sectors = tuple((s, b, float(downtilt_deg))
                    for s in range(n_sites) for b in SECTOR_BORESIGHTS_DEG)
    return NetworkLayout(sites=sites, sectors=sectors,
                         bs_height=float(bs_height), isd=float(isd))


def drop_ues(layout, active_cells, ues_per_cell, rng_seed, ue_height=60.0):
    """Uniform random UE positions inside each active sector wedge.

    The wedge spans 120 degrees around the boresight out to the site's
    hexagon circumradius isd/sqrt(3).
    """
    active = sorted(int(c) for c in active_cells)
    if not active:
        raise ConfigurationError("active cell set is empty")
    if any(c < 0 or c >= layout.n_cells for c in active):
        raise ConfigurationError("active cell index out of range")
    if ues_per_cell < 1:
        raise ConfigurationError("ues_per_cell must be >= 1")
    rng = np.random.default_rng(rng_seed)
    radius = layout.isd / np.sqrt(3.0)
    positions = []
    serving = []
    for cell in active:
        site = layout.cell_site(cell)
        boresight = layout.cell_boresight(cell)
        for _ in range(ues_per_cell):
            r = radius * np.sqrt(rng.uniform())
            theta = np.deg2rad(boresight + rng.uniform(-60.0, 60.0))
            positions.append((site[0] + r * np.cos(theta),
                              site[1] + r * np.sin(theta),
                              ue_height))
            serving.append(cell)
    return UeDrop(positions=np.array(positions),
                  serving_cell=np.array(serving, dtype=np.int64),
                  ue_height=float(ue_height))


def co_site_clusters(layout):
    """One cluster per site (the three co-site sectors)."""
    clusters = {}
    for cell, (site, _, _) in enumerate(layout.sectors):
        clusters.setdefault(site, []).append(cell)
    return ClusterMap(clusters=tuple(tuple(clusters[s]) for s in sorted(clusters)))


def layout_to_csv(layout, drop=None, path=None):
    """Tabular dump (cell id, site x/y, boresight, UE x/y, height) for audits."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["cell_id", "site_x", "site_y", "boresight_deg",
                "ue_x", "ue_y", "ue_height"])
    by_cell = {}
    if drop is not None:
        for u in range(drop.n_ue):
            by_cell.setdefault(int(drop.serving_cell[u]), []).append(drop.positions[u])
    for cell in range(layout.n_cells):
        site = layout.cell_site(cell)
        base = [cell, f"{site[0]:.6f}", f"{site[1]:.6f}",
                f"{layout.cell_boresight(cell):.3f}"]
        ues = by_cell.get(cell, [])
        if not ues:
            w.writerow(base + ["", "", ""])
        for p in ues:
            w.writerow(base + [f"{p[0]:.6f}", f"{p[1]:.6f}", f"{p[2]:.3f}"])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as f:
            f.write(text)
    return text
