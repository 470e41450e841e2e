"""Shared fixtures: the reference site spectrum, grids, and fitted processes."""

import numpy as np
import pytest

from seisbound import (
    PsdParams,
    SampleEnsemble,
    clough_penzien_psd,
    construct_mrip,
    construct_mrsip,
    synthesize_ensemble,
)

OMEGA_G = 5.0 * np.pi
ZETA_G = 0.6


@pytest.fixture(scope="session")
def site_params():
    return PsdParams(omega_g=OMEGA_G, zeta_g=ZETA_G)


@pytest.fixture(scope="session")
def cp_psd(site_params):
    return lambda w: clough_penzien_psd(w, site_params)


@pytest.fixture(scope="session")
def grid_10s():
    return np.round(np.arange(0.0, 10.0 + 0.025, 0.05), 12)


@pytest.fixture(scope="session")
def cp_ensemble(cp_psd, grid_10s):
    """20 stationary accelerograms on the 201-instant grid."""
    motions = synthesize_ensemble(cp_psd, grid_10s, 20, seed=42)
    return SampleEnsemble.from_motions(motions)


@pytest.fixture(scope="session")
def fitted_mrsip(cp_ensemble):
    return construct_mrsip(cp_ensemble)


@pytest.fixture(scope="session")
def fitted_mrip(cp_ensemble):
    return construct_mrip(cp_ensemble)
