"""Field theory on a conformal generalized Lagrange space: the two
electromagnetic tensors built from the log factor's horizontal and
vertical gradients, cyclic Maxwell residuals, the deflection correction
t_ij, and the Einstein-type equations with their implied energy-momentum
components.

Every quantity is direction-dependent and is evaluated at one fiber
vector at a time; the h-/v- covariant derivatives come from gl_space
(Berwald-type rules).  The identities behind the first two cyclic
residuals involve the curvature convention of the riemann module; on
curved base metrics their magnitudes are reported rather than asserted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DivisionGuardError
from .gl_space import ConformalLagrangeSpace, hv_covariant_cov2, sigma_blocks
from .tensor_core import LO, TensorField

COV2 = (LO, LO)
COV3 = (LO, LO, LO)


@dataclass(frozen=True)
class ElectromagneticTensors:
    """Antisymmetric pair at one fiber vector: F from the horizontal
    gradient of the log factor, f from the vertical one."""

    F: TensorField
    f: TensorField
    y: np.ndarray


@dataclass(frozen=True)
class EinsteinSystem:
    """Left-hand sides of the two Einstein-type equations at one fiber,
    with the deflection correction and (for nonzero coupling K) the
    implied energy-momentum components."""

    h_lhs: TensorField
    v_lhs: TensorField
    t_field: TensorField
    K: float
    TH: TensorField | None
    TV: TensorField | None
    y: np.ndarray


def _em_values(space: ConformalLagrangeSpace, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    blocks = sigma_blocks(space, y)
    g = space.metric_values(y)
    gy = np.einsum("...ip,p->...i", g, y)
    gh = blocks.grad_h.values
    gv = blocks.grad_v.values
    F = gy[..., :, None] * gh[..., None, :] - gy[..., None, :] * gh[..., :, None]
    f = gy[..., :, None] * gv[..., None, :] - gy[..., None, :] * gv[..., :, None]
    return F, f


def em_tensors(space: ConformalLagrangeSpace, y: np.ndarray) -> ElectromagneticTensors:
    """F_ij = (g_ip s_j - g_jp s_i) y^p and f_ij = (g_ip sdot_j - g_jp
    sdot_i) y^p at one fiber vector."""
    y = np.asarray(y, float)
    F, f = _em_values(space, y)
    return ElectromagneticTensors(
        F=TensorField(space.grid, F, COV2),
        f=TensorField(space.grid, f, COV2),
        y=y,
    )


def _cyclic(vals: np.ndarray) -> np.ndarray:
    """Sum over cyclic permutations of the last three axes:
    X_ijk + X_jki + X_kij."""
    return (
        vals
        + np.einsum("...jki->...ijk", vals)
        + np.einsum("...kij->...ijk", vals)
    )


def maxwell_residuals(space: ConformalLagrangeSpace, y: np.ndarray
                      ) -> tuple[TensorField, TensorField, TensorField]:
    """The three cyclic Maxwell residuals at one fiber vector.

    residual1 = cyc F_ij|k  -  cyc g_ip r^h_{qjk} sdot_h y^p y^q
    residual2 = cyc F_ij[v_k]  +  cyc f_ij|k
    residual3 = cyc f_ij[v_k]

    where | is the h-covariant derivative and [v] the fiber partial.  The
    third vanishes identically in the continuum; the first two depend on
    the base curvature convention on curved charts.
    """
    y = np.asarray(y, float)
    grid = space.grid

    F_h, F_v = hv_covariant_cov2(lambda yy: _em_values(space, yy)[0], space, y)
    f_h, f_v = hv_covariant_cov2(lambda yy: _em_values(space, yy)[1], space, y)

    blocks = sigma_blocks(space, y)
    g = space.metric_values(y)
    gy = np.einsum("...ip,p->...i", g, y)          # g_ip y^p
    riem = space.base.curvature.values             # (..., h, q, j, k)
    curv = np.einsum("...hqjk,q,...h->...jk", riem, y, blocks.grad_v.values)
    curv_term = gy[..., :, None, None] * curv[..., None, :, :]

    res1 = _cyclic(F_h.values) - _cyclic(curv_term)
    res2 = _cyclic(F_v.values) + _cyclic(f_h.values)
    res3 = _cyclic(f_v.values)
    return (
        TensorField(grid, res1, COV3),
        TensorField(grid, res2, COV3),
        TensorField(grid, res3, COV3),
    )


def deflection_tensor(space: ConformalLagrangeSpace, y: np.ndarray,
                      return_terms: bool = False):
    """The sigma-dependent correction added to the Einstein tensor:

    t_ij = (n-2)(gamma_ij tr_h - hess_h_ij)
           + gamma_ij r_st y^s gamma^{tp} sdot_p
           + sdot_i r^a_{tja} y^t
           - gamma_is gamma^{ap} sdot_p r^s_{tja} y^t

    With ``return_terms`` the four addends come back separately for
    debugging.
    """
    y = np.asarray(y, float)
    blocks = sigma_blocks(space, y)
    base = space.base
    n = base.dim
    gamma = base.gamma.values
    gamma_inv = base.gamma_inv.values
    ricci = base.ricci.values          # r_st with the first-last trace
    riem = base.curvature.values       # (..., s, t, j, a)
    gv = blocks.grad_v.values
    gv_up = np.einsum("...ap,...p->...a", gamma_inv, gv)

    term1 = (n - 2) * (gamma * blocks.tr_h.values[..., None, None] - blocks.hess_h.values)
    scalar2 = np.einsum("...st,s,...t->...", ricci, y, gv_up)
    term2 = gamma * scalar2[..., None, None]
    ricci_y = np.einsum("...tj,t->...j", ricci, y)
    term3 = gv[..., :, None] * ricci_y[..., None, :]
    mixed = np.einsum("...stja,t,...a->...sj", riem, y, gv_up)
    term4 = -np.einsum("...is,...sj->...ij", gamma, mixed)

    total = TensorField(space.grid, term1 + term2 + term3 + term4, COV2)
    if return_terms:
        terms = {
            "trace_part": TensorField(space.grid, term1, COV2),
            "ricci_scalar_part": TensorField(space.grid, term2, COV2),
            "ricci_vector_part": TensorField(space.grid, term3, COV2),
            "curvature_mixed_part": TensorField(space.grid, term4, COV2),
        }
        return total, terms
    return total


def einstein_system(space: ConformalLagrangeSpace, K: float, y: np.ndarray,
                    energy_momentum: bool = True) -> EinsteinSystem:
    """Left-hand sides r_ij - r gamma_ij / 2 + t_ij (horizontal) and
    (2-n)(hess_v_ab - tr_v gamma_ab) (vertical) at one fiber; with a
    nonzero gravific constant the implied energy-momentum components are
    LHS / K."""
    y = np.asarray(y, float)
    base = space.base
    n = base.dim
    blocks = sigma_blocks(space, y)
    t_field = deflection_tensor(space, y)
    h_vals = base.ricci.values - 0.5 * base.scalar.values[..., None, None] * base.gamma.values \
        + t_field.values
    v_vals = (2.0 - n) * (blocks.hess_v.values - blocks.tr_v.values[..., None, None] * base.gamma.values)
    h_lhs = TensorField(space.grid, h_vals, COV2)
    v_lhs = TensorField(space.grid, v_vals, COV2)

    TH = TV = None
    if energy_momentum:
        if K == 0.0:
            raise DivisionGuardError(
                "energy-momentum components require a nonzero gravific constant")
        TH = TensorField(space.grid, h_vals / K, COV2)
        TV = TensorField(space.grid, v_vals / K, COV2)
    return EinsteinSystem(h_lhs=h_lhs, v_lhs=v_lhs, t_field=t_field, K=float(K),
                          TH=TH, TV=TV, y=y)
