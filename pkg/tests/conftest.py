import sys
from pathlib import Path

import numpy as np
import pytest

# make tests/oracles.py importable regardless of invocation directory
sys.path.insert(0, str(Path(__file__).parent))

from emgscrub.signal_core import SEGMENT_LEN, Segment, SegmentKind


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def random_segment(rng):
    def _make(kind=SegmentKind.CLEAN_EEG, scale=1.0):
        return Segment(samples=scale * rng.standard_normal(SEGMENT_LEN), kind=kind)

    return _make
