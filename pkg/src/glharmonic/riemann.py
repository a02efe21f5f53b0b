"""Riemannian machinery of a base metric sampled on a chart: Christoffel
symbols, curvature tensor, Ricci tensor and scalar curvature.

Index conventions.  The curvature tensor ``r^i_{jkl}`` is antisymmetric in
its last two slots and its overall sign is fixed so that the round sphere
has positive scalar curvature under the trace ``r_ij = r^k_{ijk}`` (upper
slot against the *last* lower slot).  Many texts trace against the middle
slot instead; ``ricci_convention="middle"`` flips to ``r_ij = r^k_{ikj}``,
which negates Ricci and scalar.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor_core import (
    LO,
    UP,
    ChartGrid,
    MetricField,
    TensorField,
    fd_partial,
    invert_metric,
    metric_field,
    scalar_field,
)


@dataclass(frozen=True)
class RiemannPackage:
    """All curvature data of one base metric, computed in a single pass."""

    gamma: MetricField
    gamma_inv: MetricField
    christoffel: TensorField   # Gamma^i_{jk}, slots (up, lo, lo)
    curvature: TensorField     # r^i_{jkl}, slots (up, lo, lo, lo)
    ricci: TensorField         # r_ij, slots (lo, lo)
    scalar: TensorField

    @property
    def grid(self) -> ChartGrid:
        return self.gamma.grid

    @property
    def dim(self) -> int:
        return self.gamma.slot_dims[0]

    def einstein_tensor(self) -> TensorField:
        """r_ij - r gamma_ij / 2 as a (0,2) field."""
        vals = self.ricci.values - 0.5 * self.scalar.values[..., None, None] * self.gamma.values
        return TensorField(self.grid, vals, (LO, LO))


def christoffel(gamma: MetricField, gamma_inv: MetricField | None = None) -> TensorField:
    """Christoffel symbols Gamma^i_{jk} of a metric, by finite differences.

    Gamma^i_{jk} = g^{im} (d_j g_{mk} + d_k g_{mj} - d_m g_{jk}) / 2.
    """
    if gamma_inv is None:
        gamma_inv = invert_metric(gamma)
    dg = _metric_partials(gamma)  # (..., m, k, j) = d_j gamma_{mk}
    term = (
        np.einsum("...mkj->...mjk", dg)   # d_j gamma_{mk}
        + dg                               # d_k gamma_{mj}
        - np.einsum("...jkm->...mjk", dg)  # d_m gamma_{jk}
    )
    vals = 0.5 * np.einsum("...im,...mjk->...ijk", gamma_inv.values, term)
    return TensorField(gamma.grid, vals, (UP, LO, LO))


def _metric_partials(gamma: MetricField) -> np.ndarray:
    """Stack d_j gamma_{mk} as (..., m, k, j)."""
    parts = [fd_partial(gamma, axis).values for axis in range(gamma.grid.dim)]
    return np.stack(parts, axis=-1)


def curvature_package(gamma: MetricField, ricci_convention: str = "last") -> RiemannPackage:
    """Full curvature data of a metric.

    r^i_{jkl} = d_l Gamma^i_{jk} - d_k Gamma^i_{jl}
                + Gamma^i_{ml} Gamma^m_{jk} - Gamma^i_{mk} Gamma^m_{jl},
    the sign chosen so the sphere comes out positive under the default
    trace r_ij = r^k_{ijk}.
    """
    if ricci_convention not in ("last", "middle"):
        raise ValueError(f"ricci_convention must be 'last' or 'middle', got {ricci_convention!r}")
    gamma_inv = invert_metric(gamma)
    gam = christoffel(gamma, gamma_inv)
    dgam = np.stack(
        [fd_partial(gam, axis).values for axis in range(gamma.grid.dim)], axis=-1
    )  # (..., i, j, k, l) = d_l Gamma^i_{jk}
    riem = (
        dgam
        - np.einsum("...ijlk->...ijkl", dgam)
        + np.einsum("...iml,...mjk->...ijkl", gam.values, gam.values)
        - np.einsum("...imk,...mjl->...ijkl", gam.values, gam.values)
    )
    curvature = TensorField(gamma.grid, riem, (UP, LO, LO, LO))
    if ricci_convention == "last":
        ricci_vals = np.einsum("...kijk->...ij", riem)
    else:
        ricci_vals = np.einsum("...kikj->...ij", riem)
    ricci = TensorField(gamma.grid, ricci_vals, (LO, LO))
    scalar_vals = np.einsum("...ij,...ij->...", gamma_inv.values, ricci_vals)
    return RiemannPackage(
        gamma=gamma,
        gamma_inv=gamma_inv,
        christoffel=gam,
        curvature=curvature,
        ricci=ricci,
        scalar=scalar_field(gamma.grid, scalar_vals),
    )


def sphere_metric(grid: ChartGrid, radius: float = 1.0) -> MetricField:
    """Round-sphere chart metric diag(R^2, R^2 sin^2 theta); the first grid
    axis is the polar angle (keep it away from the poles)."""
    pts = grid.points()
    theta = pts[..., 0]
    vals = np.zeros(grid.shape + (2, 2))
    vals[..., 0, 0] = radius**2
    vals[..., 1, 1] = (radius * np.sin(theta)) ** 2
    return metric_field(grid, vals)
