import pytest

from rokhlindim.dynsys import make_cyclic


@pytest.fixture
def z12():
    return make_cyclic(12)


@pytest.fixture
def z24():
    return make_cyclic(24)


@pytest.fixture
def z64():
    return make_cyclic(64)


@pytest.fixture
def z32sq():
    return make_cyclic(32, 32)


@pytest.fixture
def tiling_family():
    """Normalized indicator towers of the exact tiling marker of a side"""
    from rokhlindim.markers import tiling_marker
    from rokhlindim.rokhlin import (
        cover_from_marker,
        indicator_towers,
        normalize_towers,
    )

    def build(sys, side):
        w = tiling_marker(sys, side)
        cover = cover_from_marker(sys, w.Z, w.n, w.translates)
        return normalize_towers(indicator_towers(sys, cover))

    return build
