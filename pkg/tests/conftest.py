"""Shared pytest fixtures and configuration."""

import json
import logging
from pathlib import Path

import numpy as np
import pytest

from lowdim.graphs.graph import UndirectedGraph
from lowdim.graphs.io import save_graph_file
from lowdim.models.linear_gaussian import LinearGaussianSSM
from lowdim.models.simulation import simulate

# Five-vertex graph whose identity ordering needs one fill edge.
FIVE_VERTEX_EDGES = [(1, 3), (2, 3), (3, 5), (3, 4), (4, 5)]
# Six-vertex graph with the proper decomposition A={1}, S={2,3}, B={4,5,6}.
SIX_VERTEX_EDGES = [(1, 2), (1, 3), (3, 4), (4, 6), (4, 5), (2, 5), (3, 5), (5, 6)]


@pytest.fixture(autouse=True)
def reset_package_logger():
    """Undo the CLI logging setup so caplog sees package records."""
    yield
    logger = logging.getLogger("lowdim")
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    logger.setLevel(logging.NOTSET)
    logger.propagate = True


@pytest.fixture
def five_vertex_graph():
    """Graph 1-3, 2-3, 3-4, 3-5, 4-5."""
    return UndirectedGraph.from_edges(5, FIVE_VERTEX_EDGES)


@pytest.fixture
def six_vertex_graph():
    """Graph with a two-vertex separator {2, 3}."""
    return UndirectedGraph.from_edges(6, SIX_VERTEX_EDGES)


@pytest.fixture
def chain_graph():
    """Path 1-2-3-4."""
    return UndirectedGraph.from_edges(4, [(1, 2), (2, 3), (3, 4)])


@pytest.fixture
def graph_file(tmp_path):
    """Factory writing a graph to a file and returning its path."""

    def _write(graph, name="graph.txt"):
        path = tmp_path / name
        save_graph_file(graph, path)
        return path

    return _write


@pytest.fixture
def lg_model():
    """Stable two-dimensional linear-Gaussian model with scalar observations."""
    return LinearGaussianSSM.random_stable(2, 1, seed=3)


@pytest.fixture
def lg_observations(lg_model):
    """Twenty observations simulated from lg_model."""
    _, observations, _ = simulate(lg_model, 20, seed=11)
    return observations


@pytest.fixture
def scalar_model():
    """Scalar model with F = Q = H = R = 1."""
    return LinearGaussianSSM.from_params(
        {"F": 1.0, "Q": 1.0, "H": 1.0, "R": 1.0, "mu0": 0.0, "Gamma0": 1.0}
    )


def model_params(model: LinearGaussianSSM) -> dict:
    return {
        "F": model.F.tolist(),
        "Q": model.Q.tolist(),
        "H": model.H.tolist(),
        "R": model.R.tolist(),
        "mu0": model.mu0.tolist(),
        "Gamma0": model.Gamma0.tolist(),
    }


@pytest.fixture
def config_file(tmp_path):
    """Factory writing a JSON run configuration and returning its path."""

    def _write(data, name="config.json") -> Path:
        path = tmp_path / name
        with open(path, "w") as f:
            json.dump(data, f)
        return path

    return _write


@pytest.fixture
def lg_config(config_file, lg_model):
    """Run configuration holding lg_model."""
    return config_file(
        {
            "seed": 0,
            "model": {"kind": "linear-gaussian", "params": model_params(lg_model)},
        }
    )


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


@pytest.fixture
def lg_params(lg_model):
    """Parameter lists of lg_model as read from configuration."""
    return model_params(lg_model)
