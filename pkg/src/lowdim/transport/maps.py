"""Monotone generalized triangular transport maps."""

import logging
from dataclasses import dataclass, replace
from typing import Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import legendre

from ..errors import EvaluationError, InversionError
from ..graphs.graph import SparsityPattern
from .base import TransportMap
from .basis import BasisFamily, BasisSet
from .rectifier import Rectifier, get_rectifier

logger = logging.getLogger(__name__)

QUADRATURE_ORDER = 16
MAX_DOUBLINGS = 60
INVERSION_TOLERANCE = 1e-10
MAX_ROOT_ITERATIONS = 200


def _legendre_rule(order: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = legendre.leggauss(order)
    return 0.5 * (nodes + 1.0), 0.5 * weights


GL_NODES, GL_WEIGHTS = _legendre_rule(QUADRATURE_ORDER)


@dataclass(frozen=True)
class MapComponent:
    """One component T^{sigma(k)} = a(x_off) + int_0^{x_diag} r(b(x_off, t)) dt.

    Attributes:
        output: Coordinate written by the component.
        inputs: Active coordinates; the last one is ``output`` itself.
        a_basis: Basis over the off-diagonal inputs.
        b_basis: Basis over (off-diagonal inputs, diagonal).
        a_coeffs: Coefficients of the offset expansion.
        b_coeffs: Coefficients of the integrand expansion.
    """

    output: int
    inputs: Tuple[int, ...]
    a_basis: BasisSet
    b_basis: BasisSet
    a_coeffs: np.ndarray
    b_coeffs: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "inputs", tuple(int(i) for i in self.inputs))
        object.__setattr__(self, "a_coeffs", np.asarray(self.a_coeffs, dtype=float))
        object.__setattr__(self, "b_coeffs", np.asarray(self.b_coeffs, dtype=float))
        if not self.inputs or self.inputs[-1] != self.output:
            raise ValueError("the last active input must be the component's output")
        if len(set(self.inputs)) != len(self.inputs):
            raise ValueError(f"repeated active inputs {self.inputs}")
        n_off = len(self.inputs) - 1
        if self.a_basis.n_vars != n_off or self.b_basis.n_vars != n_off + 1:
            raise ValueError("basis sizes do not match the active inputs")
        if self.a_coeffs.shape != (self.a_basis.size,):
            raise ValueError("a coefficients do not match the a basis")
        if self.b_coeffs.shape != (self.b_basis.size,):
            raise ValueError("b coefficients do not match the b basis")

    @property
    def off_diagonal(self) -> Tuple[int, ...]:
        return self.inputs[:-1]

    @property
    def n_coefficients(self) -> int:
        return self.a_basis.size + self.b_basis.size


class ComponentTerms(NamedTuple):
    """Per-component quantities needed by the variational objective."""

    value: np.ndarray
    log_slope: np.ndarray
    value_grad: np.ndarray
    log_slope_grad: np.ndarray


def _integrand_nodes(comp: MapComponent, xo: np.ndarray, xd: np.ndarray) -> np.ndarray:
    """Points (m, Q, d+1) at which b is evaluated for the Gauss-Legendre rule."""
    t = xd[:, None] * GL_NODES[None, :]
    off = np.broadcast_to(xo[:, None, :], (xo.shape[0], GL_NODES.size, xo.shape[1]))
    return np.concatenate([off, t[..., None]], axis=2)


def _relabel_components(
    components: Sequence[MapComponent], labels: Mapping[int, int]
) -> List[MapComponent]:
    return [
        replace(
            comp,
            output=labels[comp.output],
            inputs=tuple(labels[i] for i in comp.inputs),
        )
        for comp in components
    ]


def _check_finite(values: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(values)):
        raise EvaluationError(f"non-finite {what} during map evaluation")
    return values


class MonotoneTriangularMap(TransportMap):
    """Generalized triangular map with strictly increasing diagonal components.

    Components are stored in sigma-order; component k writes coordinate
    ``perm[k]`` and depends only on its active inputs, all taken from
    ``perm[:k+1]``. Coordinates are 0-based.
    """

    def __init__(
        self,
        dim: int,
        components: Sequence[MapComponent],
        rectifier: "Rectifier | str" = "shifted-square",
    ) -> None:
        self._dim = dim
        self.components: Tuple[MapComponent, ...] = tuple(components)
        self.rectifier = (
            get_rectifier(rectifier) if isinstance(rectifier, str) else rectifier
        )
        outputs = [c.output for c in self.components]
        if sorted(outputs) != list(range(dim)):
            raise ValueError(f"component outputs {outputs} are not a permutation")
        seen = set()
        for comp in self.components:
            seen.add(comp.output)
            if not set(comp.inputs) <= seen:
                raise ValueError(
                    f"component for coordinate {comp.output} uses later inputs "
                    f"{sorted(set(comp.inputs) - seen)}"
                )

    def __repr__(self) -> str:
        return (
            f"MonotoneTriangularMap(dim={self.dim}, perm={self.perm}, "
            f"rectifier={self.rectifier.name!r}, n_coefficients={self.n_coefficients})"
        )

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def perm(self) -> Tuple[int, ...]:
        return tuple(c.output for c in self.components)

    @property
    def n_coefficients(self) -> int:
        return sum(c.n_coefficients for c in self.components)

    @property
    def coefficients(self) -> np.ndarray:
        """All coefficients, component by component, a before b."""
        parts = []
        for comp in self.components:
            parts.extend([comp.a_coeffs, comp.b_coeffs])
        return np.concatenate(parts) if parts else np.zeros(0)

    def coefficient_slices(self) -> List[Tuple[slice, slice]]:
        slices = []
        start = 0
        for comp in self.components:
            a_end = start + comp.a_basis.size
            b_end = a_end + comp.b_basis.size
            slices.append((slice(start, a_end), slice(a_end, b_end)))
            start = b_end
        return slices

    def with_coefficients(self, coefficients: np.ndarray) -> "MonotoneTriangularMap":
        coefficients = np.asarray(coefficients, dtype=float)
        if coefficients.shape != (self.n_coefficients,):
            raise ValueError(
                f"expected {self.n_coefficients} coefficients, got {coefficients.shape}"
            )
        comps = [
            replace(comp, a_coeffs=coefficients[sa].copy(), b_coeffs=coefficients[sb].copy())
            for comp, (sa, sb) in zip(self.components, self.coefficient_slices())
        ]
        return MonotoneTriangularMap(self.dim, comps, self.rectifier)

    @classmethod
    def identity(
        cls,
        dim: int,
        degree: int = 1,
        perm: Optional[Sequence[int]] = None,
        active: Optional[Mapping[int, Sequence[int]]] = None,
        rectifier: str = "shifted-square",
        a_family: "BasisFamily | str" = BasisFamily.HERMITE,
        b_family: "BasisFamily | str" = BasisFamily.HERMITE_FUNCTION,
    ) -> "MonotoneTriangularMap":
        """Identity-initialized template.

        Args:
            dim: Dimension.
            degree: Total degree of the offset expansion; the integrand uses
                degree - 1, so degree 1 gives affine maps.
            perm: Component order (0-based coordinates); defaults to 0..dim-1.
            active: Off-diagonal inputs per output coordinate; defaults to
                every coordinate earlier in ``perm``.
            rectifier: ``shifted-square`` or ``exp``.
            a_family: Basis family of the offset.
            b_family: Basis family of the integrand.

        Returns:
            The identity map with the requested structure.
        """
        if degree < 1:
            raise ValueError("degree must be at least 1")
        perm = tuple(range(dim)) if perm is None else tuple(int(p) for p in perm)
        a_family = BasisFamily(a_family)
        b_family = BasisFamily(b_family)
        a_degree = 1 if a_family == BasisFamily.LINEAR else degree
        b_degree = 0 if b_family == BasisFamily.LINEAR else degree - 1
        rect = get_rectifier(rectifier)
        b0 = rect.inverse(1.0)

        components = []
        for k, out in enumerate(perm):
            if active is not None and out in active:
                earlier = set(perm[:k])
                off = tuple(int(j) for j in active[out])
                if not set(off) <= earlier:
                    raise ValueError(
                        f"active inputs {off} for coordinate {out} are not earlier in perm"
                    )
                off = tuple(sorted(off, key=perm.index))
            else:
                off = perm[:k]
            a_basis = BasisSet.total_degree(a_family, len(off), a_degree)
            b_basis = BasisSet.total_degree(b_family, len(off) + 1, b_degree)
            b_coeffs = np.zeros(b_basis.size)
            b_coeffs[0] = b0
            components.append(
                MapComponent(
                    out, off + (out,), a_basis, b_basis, np.zeros(a_basis.size), b_coeffs
                )
            )
        return cls(dim, components, rect)

    @classmethod
    def from_sparsity(
        cls,
        pattern: SparsityPattern,
        degree: int = 1,
        rectifier: str = "shifted-square",
        a_family: "BasisFamily | str" = BasisFamily.HERMITE,
        b_family: "BasisFamily | str" = BasisFamily.HERMITE_FUNCTION,
    ) -> "MonotoneTriangularMap":
        """Lower-triangular identity template honoring a 1-based sparsity pattern."""
        active = {
            k - 1: [j - 1 for j in pattern.active_inputs(k)[:-1]]
            for k in range(1, pattern.n + 1)
        }
        return cls.identity(
            pattern.n,
            degree,
            active=active,
            rectifier=rectifier,
            a_family=a_family,
            b_family=b_family,
        )

    # Evaluation

    def _parts(
        self, comp: MapComponent, x: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        xo = x[:, list(comp.off_diagonal)]
        xd = x[:, comp.output]
        _check_finite(comp.a_coeffs, "coefficient")
        _check_finite(comp.b_coeffs, "coefficient")
        return xo, xd, comp.a_basis.evaluate(xo) @ comp.a_coeffs

    def _integral(
        self, comp: MapComponent, xo: np.ndarray, xd: np.ndarray
    ) -> np.ndarray:
        b = comp.b_basis.evaluate(_integrand_nodes(comp, xo, xd)) @ comp.b_coeffs
        return xd * (self.rectifier(b) @ GL_WEIGHTS)

    def _diagonal_slope(
        self, comp: MapComponent, xo: np.ndarray, xd: np.ndarray
    ) -> np.ndarray:
        b = comp.b_basis.evaluate(np.concatenate([xo, xd[:, None]], axis=1))
        return self.rectifier(b @ comp.b_coeffs)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        batch, single = self._batch(x)
        out = np.empty_like(batch)
        for comp in self.components:
            xo, xd, a = self._parts(comp, batch)
            out[:, comp.output] = a + self._integral(comp, xo, xd)
        _check_finite(out, "map value")
        return out[0] if single else out

    def log_det_jacobian(self, x: np.ndarray) -> np.ndarray:
        batch, single = self._batch(x)
        total = np.zeros(batch.shape[0])
        for comp in self.components:
            xo, xd, _ = self._parts(comp, batch)
            total += np.log(self._diagonal_slope(comp, xo, xd))
        _check_finite(total, "log-determinant")
        return total[0] if single else total

    def diagonal_derivatives(self, x: np.ndarray) -> np.ndarray:
        """d T^{perm[k]} / d x_{perm[k]} for every component, shape (m, dim)."""
        batch, single = self._batch(x)
        out = np.empty_like(batch)
        for comp in self.components:
            xo, xd, _ = self._parts(comp, batch)
            out[:, comp.output] = self._diagonal_slope(comp, xo, xd)
        return out[0] if single else out

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        batch, single = self._batch(x)
        m = batch.shape[0]
        jac = np.zeros((m, self.dim, self.dim))
        for comp in self.components:
            xo = batch[:, list(comp.off_diagonal)]
            xd = batch[:, comp.output]
            if comp.off_diagonal:
                _, da = comp.a_basis.evaluate_with_gradient(xo)
                grad_a = np.einsum("mnj,n->mj", da, comp.a_coeffs)
                nodes = _integrand_nodes(comp, xo, xd)
                feats, dfeats = comp.b_basis.evaluate_with_gradient(nodes)
                b = feats @ comp.b_coeffs
                db = np.einsum("mqnj,n->mqj", dfeats[..., :-1], comp.b_coeffs)
                weighted = self.rectifier.derivative(b) * GL_WEIGHTS
                grad_int = xd[:, None] * np.einsum("mq,mqj->mj", weighted, db)
                jac[:, comp.output, list(comp.off_diagonal)] = grad_a + grad_int
            jac[:, comp.output, comp.output] = self._diagonal_slope(comp, xo, xd)
        _check_finite(jac, "Jacobian")
        return jac[0] if single else jac

    def component_terms(self, x: np.ndarray) -> List[ComponentTerms]:
        """Values, log-slopes and their coefficient gradients, in sigma-order."""
        batch, _ = self._batch(x)
        terms = []
        for comp in self.components:
            xo, xd, a = self._parts(comp, batch)
            a_feats = comp.a_basis.evaluate(xo)
            nodes = _integrand_nodes(comp, xo, xd)
            b_feats = comp.b_basis.evaluate(nodes)
            b = b_feats @ comp.b_coeffs
            integral = xd * (self.rectifier(b) @ GL_WEIGHTS)
            weighted = self.rectifier.derivative(b) * GL_WEIGHTS
            d_integral = xd[:, None] * np.einsum("mq,mqn->mn", weighted, b_feats)

            diag_feats = comp.b_basis.evaluate(np.concatenate([xo, xd[:, None]], axis=1))
            b_diag = diag_feats @ comp.b_coeffs
            slope = self.rectifier(b_diag)
            d_log_slope = (self.rectifier.derivative(b_diag) / slope)[:, None] * diag_feats

            value_grad = np.concatenate([a_feats, d_integral], axis=1)
            log_slope_grad = np.concatenate(
                [np.zeros_like(a_feats), d_log_slope], axis=1
            )
            terms.append(
                ComponentTerms(
                    _check_finite(a + integral, "map value"),
                    np.log(slope),
                    value_grad,
                    log_slope_grad,
                )
            )
        return terms

    # Inversion

    def invert(self, y: np.ndarray) -> np.ndarray:
        """Invert component by component in sigma-order.

        Each one-dimensional problem is bracketed by doubling away from zero
        and then solved by Newton steps safeguarded with bisection.

        Raises:
            InversionError: If a bracket cannot be found within 60 doublings or
                some point is still above tolerance after the root iterations.
        """
        batch, single = self._batch(y)
        x = np.zeros_like(batch)
        for comp in self.components:
            xo = x[:, list(comp.off_diagonal)]
            target = batch[:, comp.output] - comp.a_basis.evaluate(xo) @ comp.a_coeffs
            x[:, comp.output] = self._solve_component(comp, xo, target)
        logger.debug("inverted %d points through %d components", x.shape[0], self.dim)
        return x[0] if single else x

    def _solve_component(
        self, comp: MapComponent, xo: np.ndarray, target: np.ndarray
    ) -> np.ndarray:
        def residual(xi: np.ndarray, rows: np.ndarray) -> np.ndarray:
            return self._integral(comp, xo[rows], xi) - target[rows]

        # The integral vanishes at 0 and increases, so the root has the sign of target.
        m = target.shape[0]
        sign = np.sign(target)
        inner = np.zeros(m)
        outer = np.zeros(m)
        step = np.ones(m)
        open_rows = np.flatnonzero(sign != 0.0)
        for _ in range(MAX_DOUBLINGS):
            if open_rows.size == 0:
                break
            trial = sign[open_rows] * step[open_rows]
            reached = sign[open_rows] * residual(trial, open_rows) >= 0.0
            outer[open_rows[reached]] = trial[reached]
            inner[open_rows[~reached]] = trial[~reached]
            step[open_rows[~reached]] *= 2.0
            open_rows = open_rows[~reached]
        if open_rows.size:
            raise InversionError(
                f"could not bracket coordinate {comp.output} for {open_rows.size} "
                f"points within {MAX_DOUBLINGS} doublings"
            )

        lo = np.minimum(inner, outer)
        hi = np.maximum(inner, outer)
        xi = 0.5 * (lo + hi)
        rows = np.flatnonzero(sign != 0.0)
        for _ in range(MAX_ROOT_ITERATIONS):
            if rows.size == 0:
                break
            current = xi[rows]
            f = residual(current, rows)
            converged = np.abs(f) <= INVERSION_TOLERANCE
            below = f < 0.0
            lo[rows] = np.where(below, current, lo[rows])
            hi[rows] = np.where(below, hi[rows], current)
            newton = current - f / self._diagonal_slope(comp, xo[rows], current)
            inside = (newton > lo[rows]) & (newton < hi[rows])
            proposal = np.where(inside, newton, 0.5 * (lo[rows] + hi[rows]))
            xi[rows] = np.where(converged, current, proposal)
            collapsed = hi[rows] - lo[rows] <= 4.0 * np.finfo(float).eps * np.maximum(
                1.0, np.abs(current)
            )
            rows = rows[~(converged | collapsed)]
        if rows.size:
            raise InversionError(
                f"inversion of coordinate {comp.output} did not reach tolerance "
                f"{INVERSION_TOLERANCE:g} within {MAX_ROOT_ITERATIONS} iterations "
                f"at rows {rows.tolist()}"
            )
        return xi

    # Structure

    def relabel(self, labels: Mapping[int, int], dim: int) -> "MonotoneTriangularMap":
        """Same map with coordinate c renamed to labels[c]."""
        return MonotoneTriangularMap(
            dim, _relabel_components(self.components, labels), self.rectifier
        )

    def restrict(self, coords: Sequence[int]) -> "MonotoneTriangularMap":
        """Sub-map on ``coords``, whose components must only read ``coords``.

        Coordinate coords[i] becomes coordinate i of the result.
        """
        coords = [int(c) for c in coords]
        keep = set(coords)
        comps = [c for c in self.components if c.output in keep]
        for comp in comps:
            if not set(comp.inputs) <= keep:
                raise ValueError(
                    f"component {comp.output} reads {sorted(set(comp.inputs) - keep)} "
                    "outside the restricted coordinates"
                )
        labels = {c: i for i, c in enumerate(coords)}
        return MonotoneTriangularMap(
            len(coords), _relabel_components(comps, labels), self.rectifier
        )

    def to_lower_triangular(self) -> "MonotoneTriangularMap":
        """Lower-triangular map L with T(x) = Q^T L(Q x), (Q x)_k = x[perm[k]]."""
        labels = {c: k for k, c in enumerate(self.perm)}
        return self.relabel(labels, self.dim)

    def active_sets(self) -> Dict[int, Tuple[int, ...]]:
        return {comp.output: comp.inputs for comp in self.components}
