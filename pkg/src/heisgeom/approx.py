"""Tangent approximation of Heisenberg diffeomorphisms.

In Heisenberg coordinates at m and phi(m) the differential of an
H-preserving map is block triangular; dropping the transverse column gives
the graded tangent map

    phi'_H(0) = diag(a00, A_par),

a fiberwise group isomorphism.  The approximation statement checked here:
the conjugated map has no purely horizontal quadratic terms in its
transverse component, and the graded rescalings t^-1 . conj(t.x) converge
to phi'_H(0) x at rate O(t), locally uniformly in the base point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coords import HeisenbergMap, heisenberg_map
from .fields import FrameError, HFrame
from .group import dilate, dilate_inv
from .jets import Jet, PolyMap
from .rates import RateReport, default_t_grid, fit_report, rate_fit  # noqa: F401  (re-exported surface)


class ApproxError(ValueError):
    """Map fails the structural requirements of the tangent approximation."""


@dataclass(frozen=True, eq=False)
class TangentMapH:
    """Graded block-diagonal part of a differential, in Heisenberg coordinates."""

    a00: float
    A_par: np.ndarray
    off_col: np.ndarray  # dropped transverse column of the full differential
    upper_residual: float  # |top-right block|, ~0 for H-preserving maps

    def __post_init__(self):
        A_par = np.asarray(self.A_par, dtype=float)
        object.__setattr__(self, "A_par", A_par)
        object.__setattr__(self, "off_col", np.asarray(self.off_col, dtype=float))
        if self.a00 == 0.0:
            raise ApproxError("transverse scalar a00 vanishes")
        if abs(np.linalg.det(A_par)) < 1e-12 * max(1.0, np.max(np.abs(A_par)) ** A_par.shape[0]):
            raise ApproxError("horizontal block A_par is singular")

    @property
    def d(self) -> int:
        return self.A_par.shape[0]

    def matrix(self) -> np.ndarray:
        out = np.zeros((self.d + 1, self.d + 1))
        out[0, 0] = self.a00
        out[1:, 1:] = self.A_par
        return out

    def apply(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.empty_like(X)
        out[..., 0] = self.a00 * X[..., 0]
        out[..., 1:] = X[..., 1:] @ self.A_par.T
        return out


def tangent_block_matrix(phi: PolyMap, hm_src: HeisenbergMap, hm_dst: HeisenbergMap, m) -> np.ndarray:
    """Full differential of eps' . phi . eps^-1 at 0: A'(phi m) Dphi(m) A(m)^-1."""
    return hm_dst.A @ phi.jacobian(np.asarray(m, dtype=float)) @ np.linalg.inv(hm_src.A)


def tangent_map_H(
    phi: PolyMap,
    frame_src: HFrame,
    frame_dst: HFrame,
    m,
    require_preserving: bool = True,
    preserve_tol: float = 1e-8,
) -> TangentMapH:
    """The graded tangent map of phi at m, frames normalized on both sides."""
    m = np.asarray(m, dtype=float)
    hm_src = heisenberg_map(frame_src, m)
    hm_dst = heisenberg_map(frame_dst, phi.eval(m))
    C = tangent_block_matrix(phi, hm_src, hm_dst, m)
    upper = float(np.max(np.abs(C[0, 1:]), initial=0.0))
    scale = max(1.0, float(np.max(np.abs(C))))
    if require_preserving and upper > preserve_tol * scale:
        raise ApproxError(f"map does not preserve H at {m}: top-row residual {upper:.3e}")
    return TangentMapH(float(C[0, 0]), C[1:, 1:].copy(), C[1:, 0].copy(), upper)


def conjugated_jets(
    phi: PolyMap,
    frame_src: HFrame,
    frame_dst: HFrame,
    m,
    order: int = 3,
) -> PolyMap:
    """Jets at 0 of eps'_{phi(m)} . phi . eps_m^-1, all factors exact polynomials."""
    m = np.asarray(m, dtype=float)
    hm_src = heisenberg_map(frame_src, m)
    hm_dst = heisenberg_map(frame_dst, phi.eval(m))
    inner = hm_src.inverse_polymap(order)
    mid = phi.with_order(order).compose(inner, exact=True)
    return hm_dst.as_polymap(order).compose(mid, exact=True)


def horizontal_quadratic(conj: PolyMap) -> np.ndarray:
    """Symmetric matrix c_jk of the x_j x_k terms (j, k >= 1) in the
    transverse component, normalized as second partial derivatives."""
    dim = conj.dim_in
    comp0 = conj.components[0]
    c = np.zeros((dim - 1, dim - 1))
    for j in range(1, dim):
        for k in range(j, dim):
            e = tuple((1 if i == j else 0) + (1 if i == k else 0) for i in range(dim))
            coeff = comp0.coefficient(e)
            if j == k:
                c[j - 1, j - 1] = 2.0 * coeff
            else:
                c[j - 1, k - 1] = coeff
                c[k - 1, j - 1] = coeff
    return c


@dataclass(frozen=True, eq=False)
class ExpansionReport:
    """Outcome of the two-sided diffeomorphism approximation check."""

    tangent: TangentMapH
    quad: np.ndarray
    quad_max: float
    quad_tol: float
    rate: RateReport

    @property
    def quad_ok(self) -> bool:
        return self.quad_max < self.quad_tol

    @property
    def passed(self) -> bool:
        return self.quad_ok and self.rate.passed


def displacement_map(phi: PolyMap, m, order: int | None = None) -> PolyMap:
    """z -> phi(m + z) - phi(m) as an exact polynomial map with zero constant."""
    m = np.asarray(m, dtype=float)
    if order is not None:
        phi = phi.with_order(order)
    out = []
    for comp in phi.components:
        shifted = comp.rebased(m)
        coeffs = shifted.coeffs.copy()
        coeffs[0] = 0.0
        out.append(Jet(shifted.space, coeffs, np.zeros(phi.dim_in)))
    return PolyMap(tuple(out))


def diffeo_expansion_check(
    phi: PolyMap,
    frame_src: HFrame,
    frame_dst: HFrame,
    m,
    t_grid=None,
    sample_half: float = 0.8,
    per_axis: int = 3,
    slope_min: float = 0.85,
    quad_tol: float = 1e-10,
    order: int = 3,
    zero_floor: float = 1e-10,
) -> ExpansionReport:
    """(a) symbolically: the transverse component has no horizontal quadratic
    terms; (b) numerically: sup over a sample box of the graded residual
    t^-1.(eps' . phi . eps^-1)(t.x) - phi'_H(0) x fits slope >= slope_min.

    The sweep works on exact closed-form maps in displacement coordinates
    around m and phi(m): this avoids large-minus-large cancellation, leaving
    float noise of order eps/t in the transverse slot, which the zero_floor
    (matching the library's 1e-10 exactness tolerances) absorbs for maps
    whose conjugation is exactly linear.
    """
    if t_grid is None:
        t_grid = default_t_grid()
    t_grid = np.asarray(t_grid, dtype=float)
    m = np.asarray(m, dtype=float)
    hm_src = heisenberg_map(frame_src, m)
    hm_dst = heisenberg_map(frame_dst, phi.eval(m))

    C = tangent_block_matrix(phi, hm_src, hm_dst, m)
    tangent = TangentMapH(float(C[0, 0]), C[1:, 1:].copy(), C[1:, 0].copy(), float(np.max(np.abs(C[0, 1:]))))

    conj = conjugated_jets(phi, frame_src, frame_dst, m, order=order)
    quad = horizontal_quadratic(conj)
    quad_max = float(np.max(np.abs(quad), initial=0.0))

    dim = frame_src.dim
    pts = np.stack(
        np.meshgrid(*[np.linspace(-sample_half, sample_half, per_axis)] * dim, indexing="ij"), axis=-1
    ).reshape(-1, dim)
    target = tangent.apply(pts)
    phi_disp = displacement_map(phi, m)
    residuals = []
    for t in t_grid:
        pre_disp = hm_src.inverse_displacement(dilate(t, pts))
        for p in pre_disp:
            if not frame_src.domain.contains(m + p):
                raise FrameError(f"sample leaves the source domain at t={t}; shrink the box")
        img_disp = phi_disp.eval_many(pre_disp)
        expr = dilate_inv(t, hm_dst.forward_from_displacement(img_disp))
        residuals.append(float(np.max(np.abs(expr - target))))
    rate = fit_report(t_grid, residuals, slope_min, zero_floor=zero_floor)
    return ExpansionReport(tangent, quad, quad_max, quad_tol, rate)
