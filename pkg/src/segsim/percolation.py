"""Site percolation and first-passage utilities on planar lattices.

Conventions (shared with the block-structure detectors): open paths and
circuits use 4-adjacency; blocking/dual structures use 8-adjacency.
Passage times attach i.i.d. nonnegative weights to *sites*, and the passage
time of a path is the sum over its vertices, both endpoints included.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra as _dijkstra

from .rng import STREAM_PERCOLATION, generator
from .unionfind import component_cells, label_grid_components


@dataclass
class SiteLattice:
    """Planar site lattice; True = open."""

    open: np.ndarray
    p: float
    seed: Optional[int] = None

    @classmethod
    def random(cls, dims: tuple[int, int], p: float, seed: int, key: tuple = ()) -> "SiteLattice":
        rng = generator(seed, STREAM_PERCOLATION, *key)
        return cls(open=rng.random(dims) < p, p=p, seed=seed)

    @property
    def dims(self) -> tuple[int, int]:
        return self.open.shape


@dataclass
class WeightLattice:
    """Planar lattice of i.i.d. nonnegative site weights."""

    weights: np.ndarray
    distribution: str
    mean: float
    seed: Optional[int] = None

    @classmethod
    def exponential(cls, dims: tuple[int, int], mean: float, seed: int, key: tuple = ()) -> "WeightLattice":
        rng = generator(seed, STREAM_PERCOLATION, *key)
        return cls(
            weights=rng.exponential(mean, dims),
            distribution="exponential",
            mean=mean,
            seed=seed,
        )

    @property
    def dims(self) -> tuple[int, int]:
        return self.weights.shape


_N4 = ((0, 1), (0, -1), (1, 0), (-1, 0))


def chemical_distance(lattice: SiteLattice, a: tuple[int, int], b: tuple[int, int]) -> Optional[int]:
    """Vertex count of the shortest open 4-adjacent path from a to b, or None.

    Fully open lattice: ||a-b||_1 + 1 vertices.
    """
    mask = lattice.open
    h, w = mask.shape
    ar, ac = a
    br, bc = b
    if not (0 <= ar < h and 0 <= ac < w and 0 <= br < h and 0 <= bc < w):
        raise ValueError("endpoints must lie in the lattice")
    if not (mask[ar, ac] and mask[br, bc]):
        return None
    if a == b:
        return 1
    dist = np.full((h, w), -1, dtype=np.int64)
    dist[ar, ac] = 1
    q = deque([(ar, ac)])
    while q:
        r, c = q.popleft()
        d = dist[r, c]
        for dr, dc in _N4:
            rr, cc = r + dr, c + dc
            if 0 <= rr < h and 0 <= cc < w and mask[rr, cc] and dist[rr, cc] < 0:
                if (rr, cc) == (br, bc):
                    return int(d + 1)
                dist[rr, cc] = d + 1
                q.append((rr, cc))
    return None


def fpp_min_passage_time(
    weights: WeightLattice,
    source_set: Iterable[tuple[int, int]],
    target_set: Iterable[tuple[int, int]],
) -> float:
    """Minimum over 4-adjacent paths of the summed site weights, exact for the
    given instance (Dijkstra through a virtual super-source)."""
    w = weights.weights
    h, wd = w.shape
    sources = [r * wd + c for r, c in source_set]
    targets = [r * wd + c for r, c in target_set]
    if not sources or not targets:
        raise ValueError("source and target sets must be nonempty")
    if set(sources) & set(targets):
        raise ValueError("source and target sets must be disjoint")

    flat = w.ravel()
    rows_list = []
    cols_list = []
    data_list = []
    ids = np.arange(h * wd).reshape(h, wd)
    for dr, dc in _N4:
        r0, r1 = max(0, -dr), min(h, h - dr)
        c0, c1 = max(0, -dc), min(wd, wd - dc)
        src = ids[r0:r1, c0:c1].ravel()
        dst = ids[r0 + dr : r1 + dr, c0 + dc : c1 + dc].ravel()
        rows_list.append(src)
        cols_list.append(dst)
        data_list.append(flat[dst])
    virtual = h * wd
    rows_list.append(np.full(len(sources), virtual, dtype=np.int64))
    cols_list.append(np.array(sources, dtype=np.int64))
    data_list.append(flat[np.array(sources, dtype=np.int64)])
    graph = csr_matrix(
        (np.concatenate(data_list), (np.concatenate(rows_list), np.concatenate(cols_list))),
        shape=(virtual + 1, virtual + 1),
    )
    dist = _dijkstra(graph, directed=True, indices=virtual)
    return float(dist[targets].min())


def cluster_radii(lattice: SiteLattice, origins: Optional[Sequence[tuple[int, int]]] = None) -> np.ndarray:
    """Cluster radius seen from each origin: max l1 distance reached within the
    origin's open 4-connected cluster; -1 for a closed origin.

    origins defaults to every cell, row-major.
    """
    mask = lattice.open
    h, w = mask.shape
    labels = label_grid_components(mask, adjacency=4, torus=False)
    comps = component_cells(labels)
    if origins is None:
        origin_flat = np.arange(h * w)
    else:
        origin_flat = np.array([r * w + c for r, c in origins], dtype=np.int64)
    radii = np.full(origin_flat.size, -1, dtype=np.int64)
    lab_flat = labels.ravel()
    for i, o in enumerate(origin_flat):
        lab = lab_flat[o]
        if lab < 0:
            continue
        cells = comps[int(lab)]
        orr, occ = divmod(int(o), w)
        rr = cells // w
        cc = cells % w
        radii[i] = int((np.abs(rr - orr) + np.abs(cc - occ)).max())
    return radii


def cluster_radius_tail(
    lattice_ensemble: Iterable[SiteLattice],
    ks: Sequence[int],
    origins_per_lattice: Optional[int] = None,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Empirical tail P(radius >= k) over all origins of an ensemble.

    Closed origins count toward the denominator (no open path at all), which
    matches the event "an open path from the origin reaches l1 distance k".
    Returns (radii, tail) with tail aligned to ks.
    """
    all_radii = []
    for i, lat in enumerate(lattice_ensemble):
        if origins_per_lattice is None:
            all_radii.append(cluster_radii(lat))
        else:
            h, w = lat.dims
            rng = generator(seed, STREAM_PERCOLATION, i)
            rs = rng.integers(0, h, origins_per_lattice)
            cs = rng.integers(0, w, origins_per_lattice)
            all_radii.append(cluster_radii(lat, list(zip(rs.tolist(), cs.tolist()))))
    radii = np.concatenate(all_radii)
    ks_arr = np.asarray(ks)
    tail = np.array([(radii >= k).mean() for k in ks_arr])
    return radii, tail


def fpp_time_to_distance(
    k: int, half_width: int, mean: float, seed: int, key: tuple = ()
) -> float:
    """Passage time from (half_width, 0) to (half_width, k) on a strip of
    2*half_width+1 rows with i.i.d. exponential site weights of the given
    mean.  Paths are confined to the strip (recorded by callers)."""
    wl = WeightLattice.exponential((2 * half_width + 1, k + 1), mean, seed, key)
    return fpp_min_passage_time(wl, [(half_width, 0)], [(half_width, k)])


# -- surrounding circuits (shared with the renormalized-block detectors) -----


def _annulus_crossing_blocked(mask: np.ndarray, center: tuple[int, int], r_in: int, r_out: int) -> bool:
    """True iff a closed 8-connected path inside the annulus joins the inner
    region to the outermost annulus layer (the dual obstruction to an open
    4-circuit surrounding the center)."""
    h, w = mask.shape
    cr, cc = center
    side = 2 * r_out + 1
    seen = np.zeros((side, side), dtype=bool)
    q = deque()
    # Seed with the inner region, regardless of openness.
    for dr in range(-r_in, r_in + 1):
        for dc in range(-r_in, r_in + 1):
            seen[dr + r_out, dc + r_out] = True
            q.append((dr, dc))
    while q:
        dr, dc = q.popleft()
        for er in (-1, 0, 1):
            for ec in (-1, 0, 1):
                if er == 0 and ec == 0:
                    continue
                nr, nc = dr + er, dc + ec
                if max(abs(nr), abs(nc)) > r_out:
                    continue
                if seen[nr + r_out, nc + r_out]:
                    continue
                if mask[cr + nr, cc + nc]:
                    continue  # open cells block the dual path
                if max(abs(nr), abs(nc)) == r_out:
                    return True
                seen[nr + r_out, nc + r_out] = True
                q.append((nr, nc))
    return False


def surrounding_circuit_exists(lattice: SiteLattice, center: tuple[int, int], r_inner: int, r_outer: int) -> bool:
    """True iff an open 4-connected circuit inside the annulus
    {r_inner < linf(x, center) <= r_outer} surrounds the center."""
    h, w = lattice.dims
    cr, cc = center
    if not (0 < r_inner < r_outer):
        raise ValueError("need 0 < r_inner < r_outer")
    if cr - r_outer < 0 or cc - r_outer < 0 or cr + r_outer >= h or cc + r_outer >= w:
        raise ValueError("annulus does not fit in the lattice")
    return not _annulus_crossing_blocked(lattice.open, center, r_inner, r_outer)


def _loop_winding(loop_rel: list[tuple[int, int]]) -> int:
    """Winding number of a closed 4-connected loop (relative coords) around
    the origin cell, by signed crossings of the half-line between rows -1 and
    0 at columns >= 1."""
    wind = 0
    for i in range(len(loop_rel)):
        r0, c0 = loop_rel[i]
        r1, c1 = loop_rel[(i + 1) % len(loop_rel)]
        if c0 == c1 and c0 >= 1:
            if r0 == -1 and r1 == 0:
                wind += 1
            elif r0 == 0 and r1 == -1:
                wind -= 1
    return wind


def cycle_winds_around(cycle: Sequence[tuple[int, int]], center: tuple[int, int]) -> bool:
    """Winding test: does the 4-connected cycle surround the center cell?"""
    rel = [(r - center[0], c - center[1]) for r, c in cycle]
    return _loop_winding(rel) != 0


def _wall_follow_cycle(mask: np.ndarray, center: tuple[int, int], r_in: int, r_out: int) -> list[tuple[int, int]]:
    """Fallback cycle extraction: trace the free-space contour around the
    dual blob W (inner region plus attached closed cells), then reduce the
    closed walk to a simple loop of nonzero winding."""
    cr, cc = center
    side = 2 * (r_out + 1) + 1
    off = r_out + 1
    W = np.zeros((side, side), dtype=bool)
    q = deque()
    for dr in range(-r_in, r_in + 1):
        for dc in range(-r_in, r_in + 1):
            W[dr + off, dc + off] = True
            q.append((dr, dc))
    while q:
        dr, dc = q.popleft()
        for er in (-1, 0, 1):
            for ec in (-1, 0, 1):
                if er == 0 and ec == 0:
                    continue
                nr, nc = dr + er, dc + ec
                if max(abs(nr), abs(nc)) > r_out or W[nr + off, nc + off]:
                    continue
                if not mask[cr + nr, cc + nc]:
                    W[nr + off, nc + off] = True
                    q.append((nr, nc))

    # Start just above the topmost W cell in the center column (outer face).
    col = off
    rows = np.nonzero(W[:, col])[0]
    start = (int(rows.min()) - 1, col)
    headings = ((0, 1), (1, 0), (0, -1), (-1, 0))  # E, S, W, N (right turns)

    def free(cell):
        r, c = cell
        return 0 <= r < side and 0 <= c < side and not W[r, c]

    pos = start
    h = 0  # east, wall (W) on the right (south)
    walk = [pos]
    first_move = None
    while True:
        for turn in (1, 0, 3, 2):  # right, straight, left, back
            nh = (h + turn) % 4
            nxt = (pos[0] + headings[nh][0], pos[1] + headings[nh][1])
            if free(nxt):
                break
        else:  # pragma: no cover - start always has a free neighbor
            raise RuntimeError("contour walker is trapped")
        if first_move is None:
            first_move = (pos, nh)
        elif (pos, nh) == first_move:
            break  # about to repeat the opening move: circumnavigation done
        pos, h = nxt, nh
        walk.append(pos)
        if len(walk) > 16 * side * side:  # defensive
            raise RuntimeError("contour trace failed to close")
    if len(walk) > 1 and walk[-1] == walk[0]:
        walk.pop()

    # Winding-preserving loop erasure -> simple cycle.
    rel_walk = [(r - off, c - off) for r, c in walk]
    stack: list[tuple[int, int]] = []
    index: dict[tuple[int, int], int] = {}
    for v in rel_walk + [rel_walk[0]]:
        if v in index:
            i = index[v]
            loop = stack[i:] + [v]
            if _loop_winding(loop) != 0:
                return [(r + cr, c + cc) for r, c in stack[i:]]
            for x in stack[i + 1 :]:
                del index[x]
            del stack[i + 1 :]
        else:
            index[v] = len(stack)
            stack.append(v)
    raise RuntimeError("contour walk had zero total winding")  # pragma: no cover


def surrounding_cycle(mask: np.ndarray, center: tuple[int, int], r_in: int, r_out: int) -> Optional[list[tuple[int, int]]]:
    """An ordered simple open 4-cycle inside the annulus surrounding center,
    or None.  Existence is decided by the closed-8-crossing duality; the
    cycle itself is the shortest one crossing the reference half-line once
    (breadth-first search per crossing column), with a contour-trace
    fallback for configurations the column search cannot close.
    """
    if _annulus_crossing_blocked(mask, center, r_in, r_out):
        return None
    cr, cc = center
    h, w = mask.shape

    def is_node(rel):
        r, c = rel
        d = max(abs(r), abs(c))
        if not (r_in < d <= r_out):
            return False
        return bool(mask[cr + r, cc + c])

    best: Optional[list[tuple[int, int]]] = None
    for c in range(r_in + 1, r_out + 1):
        if not (is_node((0, c)) and is_node((-1, c))):
            continue
        # BFS from (0, c) to (-1, c) avoiding every cut edge.
        startv = (0, c)
        goal = (-1, c)
        prev = {startv: None}
        q = deque([startv])
        found = False
        while q and not found:
            cur = q.popleft()
            for dr, dc in _N4:
                nxt = (cur[0] + dr, cur[1] + dc)
                if nxt in prev or not is_node(nxt):
                    continue
                # cut edges join rows -1 and 0 at columns > r_in
                if dc == 0 and cur[1] > r_in and {cur[0], nxt[0]} == {-1, 0}:
                    continue
                prev[nxt] = cur
                if nxt == goal:
                    found = True
                    break
                q.append(nxt)
        if found:
            path = [goal]
            while prev[path[-1]] is not None:
                path.append(prev[path[-1]])
            path.reverse()  # startv .. goal, closed by the cut edge
            if best is None or len(path) < len(best):
                best = path
    if best is not None:
        return [(r + cr, c + cc) for r, c in best]
    return _wall_follow_cycle(mask, center, r_in, r_out)
