"""Shared fixtures: model charts and fields built once per session."""

import numpy as np
import pytest

from curvpinch import charts, derdzinski, models


@pytest.fixture(scope="session")
def sphere4():
    spec = models.ModelSpec(kind="sphere", n=4, radius=1.0, name="sphere4")
    return spec, models.build_chart(spec)


@pytest.fixture(scope="session")
def product4():
    spec = models.ModelSpec(kind="product", n=4, name="product4")
    return spec, models.build_chart(spec)


@pytest.fixture(scope="session")
def warp_solution4():
    return derdzinski.solve(derdzinski.WarpODE(4, 6.0, 0.45))


@pytest.fixture(scope="session")
def warped4(warp_solution4):
    spec = models.ModelSpec(kind="warped", n=4, warp=warp_solution4, name="warped4")
    return spec, models.build_chart(spec)


@pytest.fixture(scope="session")
def conformal4():
    spec = models.ModelSpec(
        kind="conformal", n=4, phi=models._conformal_recipes(4)[1], name="conformal4"
    )
    return spec, models.build_chart(spec)


def diagonal_metric_fn(x):
    """Generic diagonal metric with unequal non-conformal factors (not CF)."""
    phis = np.array(
        [
            0.3 * np.sin(x[1]) + 0.1 * x[2] ** 2,
            0.2 * x[2] * x[3] + 0.15 * np.cos(x[0]),
            0.25 * np.sin(x[3] + 0.3) + 0.1 * x[0] * x[1],
            0.2 * x[0] ** 2 - 0.15 * np.sin(x[1]),
        ]
    )
    return np.diag(np.exp(2.0 * phis))


@pytest.fixture(scope="session")
def noncf4():
    """Negative control: finite-difference-only chart with nonzero Cotton tensor."""
    return charts.MetricChart(
        n=4,
        box=((-0.8, 0.8),) * 4,
        metric_fn=diagonal_metric_fn,
        fd_step=1e-3,
        name="noncf4",
    )


@pytest.fixture(scope="session")
def euclid4():
    return charts.MetricChart(
        n=4,
        box=((-1.0, 1.0),) * 4,
        metric_fn=lambda x: np.eye(4),
        fd_step=1e-3,
        name="euclid4",
    )


@pytest.fixture(scope="session")
def corpus_specs():
    return models.default_corpus()
