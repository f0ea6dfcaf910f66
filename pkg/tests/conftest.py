"""Shared fixtures: small lattices reused across test modules."""

import numpy as np
import pytest

from wnfield import LatticeSpec, build_mode_table


@pytest.fixture(scope="session")
def table4():
    """dim=1, 4 sites, L=4: one pair (n=+-1) and two sc modes (n=0, 2)."""
    return build_mode_table(
        LatticeSpec(dim=1, sites_per_dim=4, box_length=4.0, mass=1.0))


@pytest.fixture(scope="session")
def table8():
    return build_mode_table(
        LatticeSpec(dim=1, sites_per_dim=8, box_length=8.0, mass=1.0))


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260817)
