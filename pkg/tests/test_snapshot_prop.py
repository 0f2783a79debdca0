"""Property tests for the snapshot codec."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from segsim import GridConfig, new_random
from segsim.snapshot import snapshot_read, snapshot_write


@given(
    n=st.integers(5, 20),
    w=st.integers(1, 2),
    tau_num=st.integers(0, 20),
    p=st.floats(0.0, 1.0, allow_nan=False),
    seed=st.integers(0, 2**64 - 1),
)
@settings(max_examples=60, deadline=None)
def test_roundtrip_property(n, w, tau_num, p, seed):
    if n < 2 * w + 1:
        return
    cfg = GridConfig(
        n=n, w=w, tau_tilde=tau_num / 20.0, p=p, seed=seed, allow_small=True
    )
    state = new_random(cfg)
    blob = snapshot_write(state)
    back = snapshot_read(blob)
    assert np.array_equal(back.types, state.types)
    assert back.config.K == cfg.K
    assert back.config.seed == cfg.seed
    assert back.config.p == cfg.p
    assert snapshot_write(back) == blob
