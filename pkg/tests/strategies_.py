"""Hypothesis strategies shared by the test modules."""

import numpy as np
from hypothesis import strategies as st

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def gen(seed):
    return np.random.default_rng(seed)
