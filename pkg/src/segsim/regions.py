"""Exact measurement of monochromatic and almost-monochromatic square regions.

Regions are axis-aligned square neighborhoods (never arbitrary clusters).
For a cell c, r(c) is the largest radius rho <= floor((n-1)/2) whose
(2 rho + 1)^2 window at c is single-type; the monochromatic region of an
agent u has radius max{ r(c) : linf(u, c) <= r(c) }.  The almost
monochromatic region relaxes single-type to a minority/majority ratio of at
most exp(-N^eps), where N is the agent-neighborhood size of the state.

A connected-component statistic is also emitted as auxiliary data; it is a
cluster measure, not a square-region measure, and is labeled as such.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .grid import GridState, torus_window_ix
from .rng import STREAM_MEASURE, generator
from .unionfind import component_cells, label_grid_components


class _PaddedSAT:
    """Summed-area table over a wrap-padded +1 indicator grid.

    Supports per-center window sums with *vectorized, per-center* radii, the
    workhorse for the parallel binary search and the level sweeps.
    """

    def __init__(self, plus: np.ndarray, pad: int):
        self.n = plus.shape[0]
        self.pad = pad
        padded = np.pad(plus.astype(np.int64), pad, mode="wrap")
        sat = np.zeros((padded.shape[0] + 1, padded.shape[1] + 1), dtype=np.int64)
        np.cumsum(np.cumsum(padded, axis=0), axis=1, out=sat[1:, 1:])
        self.sat = sat

    def window(self, i, j, rho):
        """Sum over the (2*rho+1)^2 window centered at true coords (i, j)."""
        a = np.asarray(i) + self.pad - rho
        b = np.asarray(j) + self.pad - rho
        side = 2 * np.asarray(rho) + 1
        s = self.sat
        return s[a + side, b + side] - s[a, b + side] - s[a + side, b] + s[a, b]


def max_region_radius(n: int) -> int:
    """Radius cap floor((n-1)/2): a window never wraps onto itself."""
    return (n - 1) // 2


def center_radius_map(state: GridState) -> np.ndarray:
    """r(c) for every cell: largest rho whose window at c is single-type.

    Parallel binary search over all centers against a padded summed-area
    table; O(n^2 log n).
    """
    n = state.n
    R = max_region_radius(n)
    plus = state.types > 0
    sat = _PaddedSAT(plus, R)
    I = np.arange(n)[:, None] * np.ones(n, dtype=np.int64)[None, :]
    J = np.ones(n, dtype=np.int64)[:, None] * np.arange(n)[None, :]
    lo = np.zeros((n, n), dtype=np.int64)
    hi = np.full((n, n), R, dtype=np.int64)
    while True:
        active = lo < hi
        if not active.any():
            break
        mid = (lo + hi + 1) // 2
        counts = sat.window(I, J, mid)
        area = (2 * mid + 1) ** 2
        ok = np.where(plus, counts == area, counts == 0)
        lo = np.where(active & ok, mid, lo)
        hi = np.where(active & ~ok, mid - 1, hi)
    return lo.astype(np.int32)


def mono_region_of(state: GridState, u: tuple[int, int], r_map: Optional[np.ndarray] = None) -> tuple[int, int]:
    """(radius, size) of the largest single-type window containing u.

    Only centers within the global maximum of r(c) can qualify, so the
    search window is bounded by it.
    """
    n = state.n
    r = center_radius_map(state) if r_map is None else r_map
    rmax = int(r.max())
    ur, uc = u[0] % n, u[1] % n
    ix = torus_window_ix(n, ur, uc, rmax)
    sub = r[ix]
    d = np.arange(-rmax, rmax + 1)
    dist = np.maximum(np.abs(d)[:, None], np.abs(d)[None, :])
    radius = int(sub[sub >= dist].max())
    return radius, (2 * radius + 1) ** 2


def mono_radius_all(state: GridState, r_map: Optional[np.ndarray] = None) -> np.ndarray:
    """Exact monochromatic-region radius for every agent (optional exact mode).

    Threshold decomposition: process centers by descending r(c) and stamp
    each cell at most once, using per-row next-unstamped pointers.
    """
    n = state.n
    r = (center_radius_map(state) if r_map is None else r_map).astype(np.int64)
    M = np.full((n, n), -1, dtype=np.int32)
    nxt = np.tile(np.arange(n + 1, dtype=np.int64), (n, 1))

    def find(row_next, j):
        while row_next[j] != j:
            row_next[j] = row_next[row_next[j]]
            j = row_next[j]
        return j

    order = np.argsort(-r, axis=None, kind="stable")
    flat_r = r.ravel()
    for cell in order:
        rho = int(flat_r[cell])
        cr, cc = divmod(int(cell), n)
        if 2 * rho + 1 >= n:
            segments = [(0, n - 1)]
            rows = range(n)
        else:
            a0 = (cc - rho) % n
            L = 2 * rho + 1
            if a0 + L <= n:
                segments = [(a0, a0 + L - 1)]
            else:
                segments = [(a0, n - 1), (0, a0 + L - 1 - n)]
            rows = ((cr + d) % n for d in range(-rho, rho + 1))
        for rr in rows:
            row_next = nxt[rr]
            for a, b in segments:
                j = find(row_next, a)
                while j <= b:
                    M[rr, j] = rho
                    row_next[j] = j + 1
                    j = find(row_next, j + 1)
    return M


def largest_mono_region(state: GridState, type_: int, r_map: Optional[np.ndarray] = None):
    """((row, col), radius) of the max-radius single-type window among centers
    of the given type; ties broken row-major.  None if no agent of the type."""
    if type_ not in (-1, 1):
        raise ValueError("type_ must be +1 or -1")
    r = center_radius_map(state) if r_map is None else r_map
    mask = state.types == type_
    if not mask.any():
        return None
    masked = np.where(mask, r, -1)
    flat = int(np.argmax(masked))
    n = state.n
    return (flat // n, flat % n), int(masked.ravel()[flat])


def _qualify_grid(sat: _PaddedSAT, n: int, rho: int, threshold: float) -> np.ndarray:
    """Centers whose radius-rho window meets the minority/majority ratio bound."""
    I = np.arange(n)[:, None]
    J = np.arange(n)[None, :]
    counts = sat.window(I, J, rho)
    area = (2 * rho + 1) ** 2
    minority = np.minimum(counts, area - counts)
    majority = area - minority
    return minority <= threshold * majority


def almost_mono_radius_of(state: GridState, u: tuple[int, int], eps: float) -> tuple[int, int, float]:
    """(radius, size, minority_ratio) of the largest almost-monochromatic
    window containing u: minority/majority <= exp(-N^eps).

    Exact: scans radii descending, each with every candidate center.  The
    reported ratio is the minimum over qualifying windows at the maximal
    radius; zero minority reports 0.
    """
    if not 0.0 < eps < 0.5:
        raise ValueError(f"eps must be in (0, 1/2), got {eps}")
    n = state.n
    N = state.config.N
    threshold = math.exp(-(N**eps))
    R = max_region_radius(n)
    sat = _PaddedSAT(state.types > 0, R)
    ur, uc = u[0] % n, u[1] % n
    for rho in range(R, -1, -1):
        d = np.arange(-rho, rho + 1)
        I = (ur + d) % n
        J = (uc + d) % n
        counts = sat.window(I[:, None], J[None, :], rho)
        area = (2 * rho + 1) ** 2
        minority = np.minimum(counts, area - counts)
        majority = area - minority
        qual = minority <= threshold * majority
        if qual.any():
            ratio = float((minority[qual] / majority[qual]).min())
            return rho, area, ratio
    raise AssertionError("radius 0 always qualifies")  # pragma: no cover


def almost_mono_radius_map(
    state: GridState,
    eps: float,
    agent_mask: Optional[np.ndarray] = None,
    rho_max: Optional[int] = None,
) -> np.ndarray:
    """Almost-monochromatic radius for every agent (or the masked subset).

    Level sweep, radii descending: at each rho, qualifying centers are box-
    dilated by rho and unassigned covered agents receive rho.  O(n^2) per
    level.  Entries outside agent_mask may be left as -1.
    """
    if not 0.0 < eps < 0.5:
        raise ValueError(f"eps must be in (0, 1/2), got {eps}")
    n = state.n
    N = state.config.N
    threshold = math.exp(-(N**eps))
    R = max_region_radius(n) if rho_max is None else min(rho_max, max_region_radius(n))
    sat = _PaddedSAT(state.types > 0, R)
    out = np.full((n, n), -1, dtype=np.int32)
    for rho in range(R, -1, -1):
        qual = _qualify_grid(sat, n, rho, threshold)
        if not qual.any():
            continue
        if rho == 0:
            covered = qual
        else:
            qsat = _PaddedSAT(qual, rho)
            I = np.arange(n)[:, None]
            J = np.arange(n)[None, :]
            covered = qsat.window(I, J, rho) > 0
        newly = covered & (out < 0)
        out[newly] = rho
        if agent_mask is not None and bool((out[agent_mask] >= 0).all()):
            break
    return out


@dataclass
class RegionMeasure:
    """What to measure at the end of a run."""

    sample_size: int = 1024
    eps: float = 0.25


@dataclass
class RegionSummary:
    largest_plus: Optional[dict]
    largest_minus: Optional[dict]
    sample_size: int
    eps: float
    mean_M: Optional[float]
    stderr_M: Optional[float]
    mean_Mprime: Optional[float]
    stderr_Mprime: Optional[float]
    m_radius_histogram: dict
    components: Optional[dict]

    def to_dict(self) -> dict:
        return {
            "largest_plus": self.largest_plus,
            "largest_minus": self.largest_minus,
            "sample_size": self.sample_size,
            "eps": self.eps,
            "mean_M": self.mean_M,
            "stderr_M": self.stderr_M,
            "mean_Mprime": self.mean_Mprime,
            "stderr_Mprime": self.stderr_Mprime,
            "m_radius_histogram": self.m_radius_histogram,
            "components": self.components,
        }


def _mean_stderr(values: np.ndarray) -> tuple[float, float]:
    mean = float(values.mean())
    if values.size > 1:
        return mean, float(values.std(ddof=1) / math.sqrt(values.size))
    return mean, 0.0


def compute_region_summary(
    state: GridState,
    sample_size: int = 1024,
    eps: float = 0.25,
    seed: Optional[int] = None,
    exact: bool = False,
    include_components: bool = True,
) -> RegionSummary:
    """Region statistics of a quiescent state.

    Per-agent M and M' are evaluated on sample_size uniformly random agents
    plus the global argmax center (all-agents exact M is available via
    exact=True / mono_radius_all).  M values are region sizes (cell counts).
    """
    n = state.n
    r_map = center_radius_map(state)
    largest = {}
    for tname, tval in (("plus", 1), ("minus", -1)):
        hit = largest_mono_region(state, tval, r_map)
        largest[tname] = (
            None if hit is None else {"center": [int(hit[0][0]), int(hit[0][1])], "radius": hit[1]}
        )

    mean_M = stderr_M = mean_Mp = stderr_Mp = None
    hist: dict = {}
    k = min(sample_size, n * n)
    if k > 0:
        rng = generator(state.config.seed if seed is None else seed, STREAM_MEASURE)
        cells = rng.choice(n * n, size=k, replace=False)
        argmax_flat = int(np.argmax(r_map))
        if argmax_flat not in set(int(c) for c in cells):
            cells = np.concatenate([cells, [argmax_flat]])
        cells = cells.astype(np.int64)

        if exact:
            m_all = mono_radius_all(state, r_map)
            m_radii = m_all.ravel()[cells]
        else:
            m_radii = np.array(
                [mono_region_of(state, divmod(int(c), n), r_map)[0] for c in cells],
                dtype=np.int64,
            )
        agent_mask = np.zeros((n, n), dtype=bool)
        agent_mask.ravel()[cells] = True
        mp_map = almost_mono_radius_map(state, eps, agent_mask=agent_mask)
        mp_radii = mp_map.ravel()[cells]

        m_sizes = (2 * m_radii.astype(np.float64) + 1) ** 2
        mp_sizes = (2 * mp_radii.astype(np.float64) + 1) ** 2
        mean_M, stderr_M = _mean_stderr(m_sizes)
        mean_Mp, stderr_Mp = _mean_stderr(mp_sizes)
        vals, counts = np.unique(m_radii, return_counts=True)
        hist = {int(v): int(c) for v, c in zip(vals, counts)}

    components = None
    if include_components:
        components = {"note": "auxiliary cluster statistic (4-adjacent components), not a square-region measure"}
        for tname, tval in (("plus", 1), ("minus", -1)):
            mask = state.types == tval
            if not mask.any():
                components[f"largest_{tname}"] = 0
                continue
            labels = label_grid_components(mask, adjacency=4, torus=True)
            comps = component_cells(labels)
            components[f"largest_{tname}"] = max(len(v) for v in comps.values())

    return RegionSummary(
        largest_plus=largest["plus"],
        largest_minus=largest["minus"],
        sample_size=k,
        eps=eps,
        mean_M=mean_M,
        stderr_M=stderr_M,
        mean_Mprime=mean_Mp,
        stderr_Mprime=stderr_Mp,
        m_radius_histogram=hist,
        components=components,
    )
