"""Conformal generalized Lagrange space over a chart: a base metric
gamma_ij(x) rescaled by exp(2 sigma(x,y)) with a direction-dependent log
factor sigma.

The nonlinear connection is N^i_j(x,y) = Gamma^i_{jk}(x) y^k (algebraic in
y, no differencing).  Horizontal derivatives follow the adapted frame
d/dx^i - N^j_i d/dy^j; vertical derivatives are plain fiber partials (the
linear connection behind the h-/v- covariant rules is fixed to the
Berwald-type pair (Gamma^i_{jk}, 0), recorded as ``V_CONNECTION``).

Direction-dependent quantities are evaluated one fiber vector at a time:
a "fibered" field is a callable ``y -> grid samples``, and fiber partials
are central differences with a relative step.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .riemann import RiemannPackage
from .tensor_core import (
    LO,
    ChartGrid,
    TensorField,
    fd_partial,
    scalar_field,
)

V_CONNECTION = "zero"  # vertical coefficients of the adapted linear connection

FIBER_STEP_SCALE = 1e-4


def fiber_step(y: np.ndarray, scale: float = FIBER_STEP_SCALE) -> float:
    """Relative central-difference step in the fiber: scale * (1 + |y|)."""
    return scale * (1.0 + float(np.linalg.norm(y)))


@dataclass(frozen=True)
class ConformalLagrangeSpace:
    """(chart, gamma, sigma): all curvature data of gamma plus the log
    conformal factor sigma(x, y) with optional analytic partials.

    ``sigma`` is vectorized over grid points at one constant fiber vector:
    ``sigma(points, y) -> scalars``.  When ``sigma_dx``/``sigma_dy`` are
    omitted the partials fall back to grid stencils (base) and central
    fiber differences (fiber).
    """

    base: RiemannPackage
    sigma: Callable[[np.ndarray, np.ndarray], np.ndarray]
    sigma_dx: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    sigma_dy: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    y_samples: tuple = ()
    fiber_step_scale: float = FIBER_STEP_SCALE

    @property
    def grid(self) -> ChartGrid:
        return self.base.grid

    @property
    def dim(self) -> int:
        return self.base.dim

    def sigma_field(self, y: np.ndarray) -> TensorField:
        pts = self.grid.points()
        return scalar_field(self.grid, np.asarray(self.sigma(pts, np.asarray(y, float)), float))

    def metric_values(self, y: np.ndarray) -> np.ndarray:
        """g_ij(x, y) = exp(2 sigma) gamma_ij(x) at every node, fixed fiber."""
        s = self.sigma_field(y).values
        return np.exp(2.0 * s)[..., None, None] * self.base.gamma.values

    def nonlinear_connection(self, y: np.ndarray) -> np.ndarray:
        """N^i_j = Gamma^i_{jk} y^k per node, shape (..., i, j)."""
        return np.einsum("...ijk,k->...ij", self.base.christoffel.values, np.asarray(y, float))


def conformal_space(base: RiemannPackage, sigma, sigma_dx=None, sigma_dy=None,
                    y_samples=(), fiber_step_scale=FIBER_STEP_SCALE) -> ConformalLagrangeSpace:
    y_samples = tuple(np.asarray(y, float) for y in y_samples)
    return ConformalLagrangeSpace(base, sigma, sigma_dx, sigma_dy, y_samples, fiber_step_scale)


def zero_sigma(points: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.zeros(points.shape[:-1])


# ---------------------------------------------------------------------------
# fibered fields and adapted derivatives
# ---------------------------------------------------------------------------


def fiber_partials(make_values: Callable[[np.ndarray], np.ndarray], y: np.ndarray,
                   dim: int, step_scale: float = FIBER_STEP_SCALE) -> np.ndarray:
    """Central fiber differences of a fibered field at constant fiber y.

    ``make_values(y)`` returns grid samples of any shape; the result stacks
    d(values)/dy^k along a new last axis.
    """
    y = np.asarray(y, float)
    h = fiber_step(y, step_scale)
    cols = []
    for k in range(dim):
        e = np.zeros(dim)
        e[k] = h
        cols.append((make_values(y + e) - make_values(y - e)) / (2 * h))
    return np.stack(cols, axis=-1)


def _grid_partials(field: TensorField) -> np.ndarray:
    return np.stack([fd_partial(field, k).values for k in range(field.grid.dim)], axis=-1)


def delta_derivative(F: Callable[[np.ndarray, np.ndarray], np.ndarray],
                     space: ConformalLagrangeSpace, y: np.ndarray) -> TensorField:
    """Horizontal derivative of a scalar on the tangent bundle along the
    adapted frame: dF/dx^i - N^j_i dF/dy^j, at one constant fiber."""
    y = np.asarray(y, float)
    pts = space.grid.points()
    sampled = scalar_field(space.grid, np.asarray(F(pts, y), float))
    dx = _grid_partials(sampled)                      # (..., i)
    dy = fiber_partials(lambda yy: np.asarray(F(pts, yy), float), y,
                        space.dim, space.fiber_step_scale)
    n_conn = space.nonlinear_connection(y)            # (..., j, i)
    vals = dx - np.einsum("...ji,...j->...i", n_conn, dy)
    return TensorField(space.grid, vals, (LO,))


def hv_covariant(X: Callable[[np.ndarray], np.ndarray],
                 space: ConformalLagrangeSpace, y: np.ndarray) -> tuple[TensorField, TensorField]:
    """h- and v-covariant derivatives of a fibered covector field.

    ``X(y)`` returns samples of shape (*grid, n).  Returns the pair
    (X_i|j horizontal, X_i|a vertical) as (0,2) fields:
    horizontal = delta X_i / dx^j - Gamma^m_{ij} X_m, vertical = dX_i/dy^a.
    """
    y = np.asarray(y, float)
    vals = np.asarray(X(y), float)
    h_part = _delta_covariant(lambda yy: np.asarray(X(yy), float), vals, space, y, n_slots=1)
    v_part = fiber_partials(lambda yy: np.asarray(X(yy), float), y, space.dim,
                            space.fiber_step_scale)
    return (TensorField(space.grid, h_part, (LO, LO)),
            TensorField(space.grid, v_part, (LO, LO)))


def hv_covariant_cov2(X: Callable[[np.ndarray], np.ndarray],
                      space: ConformalLagrangeSpace, y: np.ndarray) -> tuple[TensorField, TensorField]:
    """Same as :func:`hv_covariant` for fibered (0,2) tensors: one
    Christoffel correction per covariant slot, fiber partial for v."""
    y = np.asarray(y, float)
    vals = np.asarray(X(y), float)
    h_part = _delta_covariant(lambda yy: np.asarray(X(yy), float), vals, space, y, n_slots=2)
    v_part = fiber_partials(lambda yy: np.asarray(X(yy), float), y, space.dim,
                            space.fiber_step_scale)
    return (TensorField(space.grid, h_part, (LO, LO, LO)),
            TensorField(space.grid, v_part, (LO, LO, LO)))


def _delta_covariant(make_values, vals, space, y, n_slots: int) -> np.ndarray:
    """h-covariant derivative of a fibered all-covariant tensor:
    delta/dx^k of the components minus one Gamma-term per slot; the new
    derivative slot is appended last."""
    gd = space.grid.dim
    field = TensorField(space.grid, vals, (LO,) * n_slots)
    dx = _grid_partials(field)                                     # (*grid, *slots, k)
    dy = fiber_partials(make_values, y, space.dim, space.fiber_step_scale)
    dy_m_first = np.moveaxis(dy, -1, gd)                           # (*grid, m, *slots)
    slot_letters = "".join(chr(ord("A") + s) for s in range(n_slots))
    correction = np.einsum(
        f"...mk,...m{slot_letters}->...{slot_letters}k",
        space.nonlinear_connection(y), dy_m_first,
    )
    delta_vals = dx - correction
    gam = space.base.christoffel.values                            # (*grid, m, i, k)
    rest = slot_letters[1:]
    for slot in range(n_slots):
        x_m_first = np.moveaxis(vals, gd + slot, gd)               # (*grid, m, rest)
        term = np.einsum(f"...mik,...m{rest}->...i{rest}k", gam, x_m_first)
        delta_vals = delta_vals - np.moveaxis(term, gd, gd + slot)
    return delta_vals


# ---------------------------------------------------------------------------
# derivative blocks of the log conformal factor
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConformalFactorDerivatives:
    """First and second adapted derivatives of the log factor at one fiber:

    - ``grad_h``: horizontal derivative along the adapted frame
    - ``grad_v``: fiber partial
    - ``sq_h`` / ``sq_v``: squared lengths of the two gradients in gamma
    - ``hess_h``: horizontal Hessian-type block
      grad_h_i|j + grad_h_i grad_h_j - gamma_ij sq_h / 2
    - ``hess_v``: the vertical analogue with fiber partials
    - ``tr_h`` / ``tr_v``: gamma-traces of the two Hessian blocks
    """

    grad_h: TensorField
    grad_v: TensorField
    sq_h: TensorField
    hess_h: TensorField
    tr_h: TensorField
    sq_v: TensorField
    hess_v: TensorField
    tr_v: TensorField


def _sigma_grad_h_values(space: ConformalLagrangeSpace, y: np.ndarray) -> np.ndarray:
    """sigma_i = d sigma/dx^i - N^j_i sigma_dot_j at constant fiber."""
    pts = space.grid.points()
    if space.sigma_dx is not None:
        dx = np.asarray(space.sigma_dx(pts, y), float)
    else:
        dx = _grid_partials(space.sigma_field(y))
    dy = _sigma_grad_v_values(space, y)
    n_conn = space.nonlinear_connection(y)
    return dx - np.einsum("...ji,...j->...i", n_conn, dy)


def _sigma_grad_v_values(space: ConformalLagrangeSpace, y: np.ndarray) -> np.ndarray:
    pts = space.grid.points()
    if space.sigma_dy is not None:
        return np.asarray(space.sigma_dy(pts, y), float)
    return fiber_partials(lambda yy: np.asarray(space.sigma(pts, yy), float), y,
                          space.dim, space.fiber_step_scale)


def sigma_blocks(space: ConformalLagrangeSpace, y: np.ndarray) -> ConformalFactorDerivatives:
    """All derivative blocks of the log factor at one fiber vector."""
    y = np.asarray(y, float)
    grid = space.grid
    gamma = space.base.gamma.values
    gamma_inv = space.base.gamma_inv.values

    grad_h = _sigma_grad_h_values(space, y)
    grad_v = _sigma_grad_v_values(space, y)

    sq_h = np.einsum("...kl,...k,...l->...", gamma_inv, grad_h, grad_h)
    sq_v = np.einsum("...ab,...a,...b->...", gamma_inv, grad_v, grad_v)

    # horizontal covariant derivative of grad_h
    h_part = _delta_covariant(lambda yy: _sigma_grad_h_values(space, yy), grad_h,
                              space, y, n_slots=1)
    hess_h = h_part + grad_h[..., :, None] * grad_h[..., None, :] \
        - 0.5 * gamma * sq_h[..., None, None]

    # vertical derivative of grad_v (plain fiber partial, zero v-connection)
    v_part = fiber_partials(lambda yy: _sigma_grad_v_values(space, yy), y,
                            space.dim, space.fiber_step_scale)
    hess_v = v_part + grad_v[..., :, None] * grad_v[..., None, :] \
        - 0.5 * gamma * sq_v[..., None, None]

    tr_h = np.einsum("...ij,...ij->...", gamma_inv, hess_h)
    tr_v = np.einsum("...ab,...ab->...", gamma_inv, hess_v)

    return ConformalFactorDerivatives(
        grad_h=TensorField(grid, grad_h, (LO,)),
        grad_v=TensorField(grid, grad_v, (LO,)),
        sq_h=scalar_field(grid, sq_h),
        hess_h=TensorField(grid, hess_h, (LO, LO)),
        tr_h=scalar_field(grid, tr_h),
        sq_v=scalar_field(grid, sq_v),
        hess_v=TensorField(grid, hess_v, (LO, LO)),
        tr_v=scalar_field(grid, tr_v),
    )
