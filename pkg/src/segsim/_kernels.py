"""Optional numba fast path for the flip loop.

The kernel consumes pre-drawn (uniform, exponential) batches and performs
exactly the same sequence of array mutations as the pure-python chunk
executor in dynamics.py: per flip, same_count updates over the window in
row-major order, then eligibility removals in row-major order, then
insertions in row-major order.  Bit-identical trajectories across the two
paths are asserted by the test suite.

Set SEGSIM_DISABLE_NUMBA=1 to force the python path.
"""

from __future__ import annotations

import os

import numpy as np

try:  # pragma: no cover - import guard
    import numba as _numba
except ImportError:  # pragma: no cover
    _numba = None


def numba_available() -> bool:
    if _numba is None:
        return False
    flag = os.environ.get("SEGSIM_DISABLE_NUMBA", "")
    return flag.strip().lower() not in {"1", "true", "yes", "on"}


# Chunk status codes shared with dynamics.py.
STATUS_BATCH_DONE = 0
STATUS_NO_ELIGIBLE = 1
STATUS_FLIP_LIMIT = 2
STATUS_TIME_LIMIT = 3


if _numba is not None:

    @_numba.njit(cache=True, nogil=True)
    def run_chunk(
        types,  # int8[n*n]
        sc,  # int32[n*n]
        elig_pos,  # int32[n*n]
        elig_cells,  # int64[n*n]
        m,  # int64 eligible count
        n,
        w,
        N,
        K,
        emax,  # eligibility upper bound on same_count
        phi,  # int64 Lyapunov value
        t,  # float64 continuous time
        flips,  # int64 flips so far
        max_flips,
        has_time_limit,
        max_time,
        u_batch,  # float64[B]
        e_batch,  # float64[B]
        rec_every,  # 0 = no trace
        rec_flip,
        rec_time,
        rec_phi,
        rec_m,
        audit_on,
        audit_cells,
        audit_pre,
    ):  # pragma: no cover - exercised via equality tests against the python path
        consumed = 0
        rec_count = 0
        audit_count = 0
        status = STATUS_BATCH_DONE
        B = u_batch.shape[0]
        while True:
            if m <= 0:
                status = STATUS_NO_ELIGIBLE
                break
            if flips >= max_flips:
                status = STATUS_FLIP_LIMIT
                break
            if consumed >= B:
                status = STATUS_BATCH_DONE
                break
            u = u_batch[consumed]
            e = e_batch[consumed]
            consumed += 1
            dt = e / m
            if has_time_limit and t + dt > max_time:
                t = max_time
                status = STATUS_TIME_LIMIT
                break
            t += dt
            j = int(u * m)
            cell = elig_cells[j]
            r0 = cell // n
            c0 = cell % n
            k = sc[cell]
            new_type = -types[cell]
            types[cell] = new_type
            phi += 2 * (N - 2 * k + 1)

            # Pass 1: same_count updates, row-major over the window.
            for dr in range(-w, w + 1):
                rr = (r0 + dr) % n
                base = rr * n
                for dc in range(-w, w + 1):
                    v = base + (c0 + dc) % n
                    if v == cell:
                        sc[v] = N - k + 1
                    elif types[v] == new_type:
                        sc[v] += 1
                    else:
                        sc[v] -= 1

            # Pass 2: eligibility removals, row-major.
            for dr in range(-w, w + 1):
                rr = (r0 + dr) % n
                base = rr * n
                for dc in range(-w, w + 1):
                    v = base + (c0 + dc) % n
                    pos = elig_pos[v]
                    if pos >= 0 and sc[v] > emax:
                        last = elig_cells[m - 1]
                        elig_cells[pos] = last
                        elig_pos[last] = pos
                        elig_pos[v] = -1
                        m -= 1

            # Pass 3: eligibility insertions, row-major.
            for dr in range(-w, w + 1):
                rr = (r0 + dr) % n
                base = rr * n
                for dc in range(-w, w + 1):
                    v = base + (c0 + dc) % n
                    if elig_pos[v] < 0 and sc[v] <= emax:
                        elig_pos[v] = np.int32(m)
                        elig_cells[m] = v
                        m += 1

            if audit_on:
                audit_cells[audit_count] = cell
                audit_pre[audit_count] = k
                audit_count += 1
            flips += 1
            if rec_every > 0 and flips % rec_every == 0:
                rec_flip[rec_count] = flips
                rec_time[rec_count] = t
                rec_phi[rec_count] = phi
                rec_m[rec_count] = m
                rec_count += 1
        return m, phi, t, flips, consumed, rec_count, audit_count, status

else:  # pragma: no cover
    run_chunk = None
