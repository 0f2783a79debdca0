"""Union-find and grid component labeling."""

from __future__ import annotations

import numpy as np
from scipy import ndimage


class UnionFind:
    """Array-based union-find with path halving and union by size."""

    def __init__(self, size: int):
        self.parent = np.arange(size, dtype=np.int64)
        self.size = np.ones(size, dtype=np.int64)

    def find(self, x: int) -> int:
        p = self.parent
        while p[x] != x:
            p[x] = p[p[x]]
            x = p[x]
        return int(x)

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]


_STRUCT4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
_STRUCT8 = np.ones((3, 3), dtype=bool)


def label_grid_components(mask: np.ndarray, adjacency: int, torus: bool) -> np.ndarray:
    """Label connected components of True cells; -1 elsewhere.

    adjacency is 4 or 8; torus wraps edges.  Component labels are the
    row-major first flat index of the component, so the output is
    deterministic and independent of the labeling backend.
    """
    if adjacency not in (4, 8):
        raise ValueError("adjacency must be 4 or 8")
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    struct = _STRUCT4 if adjacency == 4 else _STRUCT8
    lab, num = ndimage.label(mask, structure=struct)
    out = np.full((h, w), -1, dtype=np.int64)
    if num == 0:
        return out

    root = np.arange(num + 1, dtype=np.int64)
    if torus:
        uf = UnionFind(num + 1)

        def seam(a_cells, b_cells):
            for (ra, ca), (rb, cb) in zip(a_cells, b_cells):
                if mask[ra, ca] and mask[rb, cb]:
                    uf.union(int(lab[ra, ca]), int(lab[rb, cb]))

        cols = range(w)
        rows = range(h)
        seam(((h - 1, c) for c in cols), ((0, c) for c in cols))
        seam(((r, w - 1) for r in rows), ((r, 0) for r in rows))
        if adjacency == 8:
            seam(((h - 1, c) for c in cols), ((0, (c + 1) % w) for c in cols))
            seam(((h - 1, c) for c in cols), ((0, (c - 1) % w) for c in cols))
            seam(((r, w - 1) for r in rows), (((r + 1) % h, 0) for r in rows))
            seam(((r, w - 1) for r in rows), (((r - 1) % h, 0) for r in rows))
        root = np.array([uf.find(i) for i in range(num + 1)], dtype=np.int64)

    flat_mask = mask.ravel()
    idx = np.nonzero(flat_mask)[0]
    groups = root[lab.ravel()[idx]]
    uniq, first = np.unique(groups, return_index=True)
    canon = np.zeros(num + 1, dtype=np.int64)
    canon[uniq] = idx[first]
    out.ravel()[idx] = canon[groups]
    return out


def component_cells(labels: np.ndarray) -> dict[int, np.ndarray]:
    """Map each component label to the flat indices of its cells (ascending)."""
    flat = labels.ravel()
    idx = np.nonzero(flat >= 0)[0]
    order = np.argsort(flat[idx], kind="stable")
    idx = idx[order]
    vals = flat[idx]
    comps: dict[int, np.ndarray] = {}
    if idx.size == 0:
        return comps
    bounds = np.nonzero(np.diff(vals))[0] + 1
    for chunk in np.split(idx, bounds):
        comps[int(flat[chunk[0]])] = chunk
    return comps
