"""Markov structure detection from mixed second derivatives of a log-density."""

import logging
from itertools import combinations
from typing import Optional

import numpy as np

from ..errors import ProbeError
from ..transport.density import LogDensity
from .graph import UndirectedGraph

logger = logging.getLogger(__name__)

DEFAULT_PROBES = 64
HESSIAN_STEP = 1e-3
RELATIVE_TOLERANCE = 1e-6


def _hessian_entry(
    logpi: LogDensity, x: np.ndarray, i: int, j: int, h: float
) -> np.ndarray:
    def shifted(si: float, sj: float) -> np.ndarray:
        y = x.copy()
        y[:, i] += si * h
        y[:, j] += sj * h
        return logpi.batch(y)

    if i == j:
        return (shifted(1, 0) - 2.0 * logpi.batch(x) + shifted(-1, 0)) / (h * h)
    return (shifted(1, 1) - shifted(1, -1) - shifted(-1, 1) + shifted(-1, -1)) / (
        4.0 * h * h
    )


def pairwise_imap(
    logpi: LogDensity,
    n: Optional[int] = None,
    probes: Optional[np.ndarray] = None,
    seed: int = 0,
    tolerance: float = RELATIVE_TOLERANCE,
) -> UndirectedGraph:
    """Estimate an I-map by testing which mixed partials of log pi vanish.

    Edge (i, j) is added when |d^2 log pi / dx_i dx_j| exceeds ``tolerance``
    times the largest absolute Hessian entry seen at any probe.

    Args:
        logpi: Log-density to probe.
        n: Dimension; defaults to ``logpi.dim``.
        probes: (m, n) probe points; defaults to 64 standard-normal draws.
        seed: Seed for the default probes.
        tolerance: Relative threshold.

    Returns:
        Graph on vertices 1..n.

    Raises:
        ProbeError: If log pi is not finite at some probe.
    """
    n = n or logpi.dim
    if probes is None:
        probes = np.random.default_rng(seed).standard_normal((DEFAULT_PROBES, n))
    probes = np.atleast_2d(np.asarray(probes, dtype=float))

    values = logpi.batch(probes)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise ProbeError(f"log-density is not finite at probe {bad[0]}", int(bad[0]))

    hessian = np.zeros((probes.shape[0], n, n))
    for i in range(n):
        for j in range(i, n):
            entry = _hessian_entry(logpi, probes, i, j, HESSIAN_STEP)
            hessian[:, i, j] = hessian[:, j, i] = entry
    if not np.all(np.isfinite(hessian)):
        bad_probe = int(np.argwhere(~np.isfinite(hessian))[0][0])
        raise ProbeError("non-finite Hessian entry", bad_probe)

    scale = float(np.max(np.abs(hessian))) or 1.0
    peak = np.max(np.abs(hessian), axis=0)
    edges = [
        (i + 1, j + 1)
        for i, j in combinations(range(n), 2)
        if peak[i, j] > tolerance * scale
    ]
    logger.debug("pairwise_imap found %d edges in dimension %d", len(edges), n)
    return UndirectedGraph.from_edges(n, edges)
