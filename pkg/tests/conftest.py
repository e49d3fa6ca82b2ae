"""Session fixtures shared across the test modules.

The eigensolves on the refinement ladder, the two observer designs, and
the full simulation triple are by far the most expensive steps, so they
run once per session and every consumer reads the same frozen objects.
Fixtures must not be mutated by tests.
"""

import time

import pytest

from specobs import (
    ExchangerParams,
    ExperimentConfig,
    SpatialGrid,
    assemble_generator,
    design_observer,
    diagnostics,
    discrete_spectrum,
    run_error_experiment,
    unstable_modes,
)

RATES = (3.0, 5.0)
LADDER = (100, 200, 400)


@pytest.fixture(scope="session")
def params():
    """Default unit-parameter exchanger used throughout."""
    return ExchangerParams()


@pytest.fixture(scope="session")
def grid200():
    return SpatialGrid.uniform(200)


@pytest.fixture(scope="session")
def sweep(params):
    """(lambda_o, n) -> (Spectrum, unstable mode list) on the refinement ladder."""
    out = {}
    for n in LADDER:
        grid = SpatialGrid.uniform(n)
        for lam_o in RATES:
            gen = assemble_generator(params, grid, shift=lam_o)
            spectrum = discrete_spectrum(gen)
            out[(lam_o, n)] = (spectrum, unstable_modes(spectrum, params, lam_o))
    return out


@pytest.fixture(scope="session")
def designs200(params):
    """Full observer designs at the working resolution, keyed by rate."""
    return {
        lam_o: design_observer(params, SpatialGrid.uniform(200), lam_o)
        for lam_o in RATES
    }


@pytest.fixture(scope="session")
def designs400(params):
    return {
        lam_o: design_observer(params, SpatialGrid.uniform(400), lam_o)
        for lam_o in RATES
    }


@pytest.fixture(scope="session")
def sim_triple(designs200):
    """Direct run plus both observer runs at the default config.

    Returns ({tag: SimResult}, wall_seconds).  Observer results carry
    diagnostics.  Keys are "direct", 3.0 and 5.0.
    """
    config = ExperimentConfig()
    t0 = time.perf_counter()
    results = {"direct": run_error_experiment(config)}
    for lam_o in RATES:
        bundle = designs200[lam_o]
        res = run_error_experiment(config, bundle.gain)
        diagnostics(res, bundle.basis)
        results[lam_o] = res
    wall = time.perf_counter() - t0
    return results, wall
