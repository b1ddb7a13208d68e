"""Privileged and Heisenberg coordinates at a base point.

The privileged map at u is the affine normalization psi_u(x) = A(u)(x - u),
A(u) = (B(u)^t)^-1, which sends the frame at u to the coordinate frame at 0;
in these coordinates X_j = d_j + sum_k a_jk(x) d_k with a_jk(0) = 0 and the
matrix b_jk = d_k a_j0(0) carries all weight-graded information: the Levi
matrix is L = b^t - b and the quadratic shear

    phi_u(x) = (x_0 - 1/4 sum_jk (b_jk + b_kj) x_j x_k, x')

turns the privileged coordinates into Heisenberg coordinates eps_u =
phi_u . psi_u, in which the dilation limits of the frame fields are exactly
the left-invariant model fields X_j^m = d_j - 1/2 sum_k L_jk x_k d_0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import FrameError, HFrame, VectorField, bracket, pushforward_field
from .group import GradedShear, weight_vector
from .jets import Jet, PolyMap, jet_compose, jet_space
from .rates import RateReport, default_t_grid, fit_report


def frame_degree(frame: HFrame) -> int:
    return max(jet.degree() for f in frame.fields for jet in f.components.components)


@dataclass(frozen=True, eq=False)
class PrivilegedMap:
    """Affine normalization at u with the frame re-expressed in the new
    coordinates (components vanish at 0 up to the coordinate part)."""

    u: np.ndarray
    A: np.ndarray
    pushed: tuple  # VectorField per frame field, in privileged coordinates

    @property
    def dim(self) -> int:
        return self.u.size

    def forward(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (x - self.u) @ self.A.T

    def inverse(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return self.u + y @ np.linalg.inv(self.A).T

    def as_polymap(self, order: int) -> PolyMap:
        return PolyMap.affine(self.A, -self.A @ self.u, order)

    def inverse_polymap(self, order: int) -> PolyMap:
        Ainv = np.linalg.inv(self.A)
        return PolyMap.affine(Ainv, self.u, order)

    def b_matrix(self) -> np.ndarray:
        """b_jk = d_k a_j0(0), the linear transverse coefficients of the
        pushed horizontal fields."""
        d = self.dim - 1
        b = np.zeros((d, d))
        space = self.pushed[0].components.space
        for j in range(1, d + 1):
            comp0 = self.pushed[j].components.components[0]
            for k in range(1, d + 1):
                e = tuple(1 if i == k else 0 for i in range(self.dim))
                b[j - 1, k - 1] = comp0.coeffs[space.index[e]]
        return b


def privileged_map(frame: HFrame, u, order: int | None = None) -> PrivilegedMap:
    """Privileged coordinates at u; raises on a singular frame matrix."""
    u = np.asarray(u, dtype=float)
    if not frame.domain.contains(u):
        raise FrameError(f"base point {u} outside the frame domain")
    frame.check_invertible(u)
    if order is None:
        order = frame.order
    B = frame.matrix_at(u)
    A = np.linalg.inv(B.T)
    resid = np.max(np.abs(A @ B.T - np.eye(frame.dim)))
    if resid > 1e-10:
        raise FrameError(f"privileged normalization residual {resid:.3e}")

    inner = PolyMap.affine(B.T, u, order)  # psi_u^-1
    pushed = []
    for f in frame.fields:
        composed = f.components.with_order(order).compose(inner, exact=True)
        comps = []
        for i in range(frame.dim):
            acc = None
            for k in range(frame.dim):
                if A[i, k] == 0.0:
                    continue
                term = A[i, k] * composed.components[k]
                acc = term if acc is None else acc + term
            comps.append(acc if acc is not None else Jet.zero(composed.space))
        pushed.append(VectorField(PolyMap(tuple(comps))))

    for j, f in enumerate(pushed):
        delta = f(np.zeros(frame.dim))
        delta[j] -= 1.0
        if np.max(np.abs(delta)) > 1e-9:
            raise FrameError(f"pushed frame not normalized at 0 (field {j})")
    return PrivilegedMap(u, A, tuple(pushed))


def b_matrix(frame: HFrame, u) -> np.ndarray:
    """The d x d matrix b_jk = d_k a_j0(0) in privileged coordinates at u."""
    return privileged_map(frame, u).b_matrix()


@dataclass(frozen=True, eq=False)
class HeisenbergMap:
    """eps_u = phi_u . psi_u with exact closed-form inverse."""

    u: np.ndarray
    A: np.ndarray  # privileged linear part
    b: np.ndarray  # transverse linear coefficients at u

    @property
    def dim(self) -> int:
        return self.u.size

    @property
    def d(self) -> int:
        return self.dim - 1

    @property
    def levi(self) -> np.ndarray:
        return self.b.T - self.b

    @property
    def shear(self) -> GradedShear:
        return GradedShear(-(self.b + self.b.T) / 2)

    def forward(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.shear.apply((x - self.u) @ self.A.T)

    def inverse(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        y = self.shear.inverse().apply(w)
        return self.u + y @ np.linalg.inv(self.A).T

    def inverse_displacement(self, w) -> np.ndarray:
        """eps_u^-1(w) - u, computed without adding and re-subtracting u.

        Keeps the graded rescaling sweeps free of large-minus-large
        cancellation when w ~ t.X is small.
        """
        w = np.asarray(w, dtype=float)
        return self.shear.inverse().apply(w) @ np.linalg.inv(self.A).T

    def forward_from_displacement(self, disp) -> np.ndarray:
        """eps_u(u + disp) evaluated directly from the displacement."""
        disp = np.asarray(disp, dtype=float)
        return self.shear.apply(disp @ self.A.T)

    def as_polymap(self, order: int) -> PolyMap:
        psi = PolyMap.affine(self.A, -self.A @ self.u, order)
        return self.shear.as_polymap(order).compose(psi, exact=True)

    def inverse_polymap(self, order: int) -> PolyMap:
        Ainv = np.linalg.inv(self.A)
        psi_inv = PolyMap.affine(Ainv, self.u, order)
        return psi_inv.compose(self.shear.inverse().as_polymap(order), exact=True)

    def jacobian_at_u(self) -> np.ndarray:
        """eps_u'(u) = A: sends X_j(u) to the coordinate vector e_j."""
        return self.A

    def dilation_model_frame(self, order: int) -> tuple:
        """Privileged-coordinate dilation limits: X_j^(u) = d_j + sum b_jk x_k d_0."""
        return _linear_transverse_frame(self.b, order, sign=+1.0)

    def model_frame(self, order: int) -> tuple:
        """Left-invariant model fields X_j^m = d_j - 1/2 sum L_jk x_k d_0."""
        return _linear_transverse_frame(-0.5 * self.levi, order, sign=+1.0)

    def pushed_model_residual(self, order: int = 4) -> float:
        """Coefficient distance between phi_u-pushed dilation-limit fields and
        the model fields; zero by the graded-shear transport identity."""
        shear_pm = self.shear.as_polymap(order)
        shear_inv_pm = self.shear.inverse().as_polymap(order)
        want = self.model_frame(order)
        worst = 0.0
        for Xu, Xm in zip(self.dilation_model_frame(order), want):
            pushed = pushforward_field(shear_pm, shear_inv_pm, Xu, order=order)
            for got, ref in zip(pushed.components.components, Xm.components.components):
                worst = max(worst, float(np.max(np.abs(got.coeffs - ref.coeffs))))
        return worst


def _linear_transverse_frame(coef: np.ndarray, order: int, sign: float) -> tuple:
    """Fields d_0 and d_j + sign * sum_k coef_jk x_k d_0 as polynomial fields."""
    d = coef.shape[0]
    dim = d + 1
    s = jet_space(dim, order)
    zero = (0,) * dim
    fields = [VectorField(PolyMap(tuple(Jet.from_terms(s, {zero: 1.0} if i == 0 else {}) for i in range(dim))))]
    for j in range(1, dim):
        comps = []
        trans = {}
        for k in range(1, dim):
            if coef[j - 1, k - 1] != 0.0:
                e = tuple(1 if i == k else 0 for i in range(dim))
                trans[e] = sign * coef[j - 1, k - 1]
        for i in range(dim):
            if i == 0:
                comps.append(Jet.from_terms(s, trans))
            elif i == j:
                comps.append(Jet.from_terms(s, {zero: 1.0}))
            else:
                comps.append(Jet.zero(s))
        fields.append(VectorField(PolyMap(tuple(comps))))
    return tuple(fields)


def heisenberg_map(frame: HFrame, u) -> HeisenbergMap:
    """Heisenberg coordinates at u.

    The b matrix comes from the Jacobian identity b_jk = (A DX_j(u) B^t)_0k,
    which agrees with the degree-1 jet route of `b_matrix` (tested against
    it); this keeps the per-point construction cheap for the groupoid caches.
    """
    u = np.asarray(u, dtype=float)
    if not frame.domain.contains(u):
        raise FrameError(f"base point {u} outside the frame domain")
    frame.check_invertible(u)
    B = frame.matrix_at(u)
    A = np.linalg.inv(B.T)
    d = frame.d
    b = np.zeros((d, d))
    for j in range(1, d + 1):
        J = frame.fields[j].components.jacobian(u)
        b[j - 1, :] = (A @ J @ B.T)[0, 1:]
    return HeisenbergMap(u, A, b)


def graded_weight_violation(pm: PolyMap) -> float:
    """Largest coefficient breaking delta_t-equivariance.

    A polynomial map commutes with the graded dilations iff every monomial in
    component i has graded weight equal to the component weight.
    """
    w = weight_vector(pm.dim_in)
    worst = 0.0
    for i, comp in enumerate(pm.components):
        wi = w[i] if i < len(w) else 1.0
        weights = comp.space.exponents @ w
        bad = weights != wi
        if np.any(bad):
            worst = max(worst, float(np.max(np.abs(comp.coeffs[bad]))))
    return worst


@dataclass(frozen=True, eq=False)
class ModelField:
    """Leading dilation-homogeneous part of a vector field at a point,
    written over the model frame: coeffs are frame coordinates, weight is
    the rescaling exponent (2 when the field sticks out of H at the point)."""

    weight: int
    coeffs: np.ndarray
    levi: np.ndarray
    flagged: bool

    @property
    def dim(self) -> int:
        return self.coeffs.size

    def as_field(self, order: int) -> VectorField:
        frame_fields = _linear_transverse_frame(-0.5 * self.levi, order, sign=+1.0)
        dim = self.dim
        s = frame_fields[0].components.space
        acc = [Jet.zero(s) for _ in range(dim)]
        use = [self.coeffs[0]] + [0.0] * (dim - 1) if self.weight == 2 else [0.0] + list(self.coeffs[1:])
        for cj, f in zip(use, frame_fields):
            if cj == 0.0:
                continue
            acc = [a + cj * c for a, c in zip(acc, f.components.components)]
        return VectorField(PolyMap(tuple(acc)))


def model_field(X: VectorField, frame: HFrame, m, rel_threshold: float = 1e-9) -> ModelField:
    """Case split on the frame expansion a of X(m): weight 2 with coefficient
    a_0 when |a_0| clears the scale-aware threshold, else weight 1 with the
    horizontal coefficients; near-threshold inputs are flagged."""
    m = np.asarray(m, dtype=float)
    a = frame.expand(m, X(m))
    hm = heisenberg_map(frame, m)
    scale = float(np.linalg.norm(a))
    ratio = abs(a[0]) / scale if scale > 0 else 0.0
    weight = 2 if ratio > rel_threshold else 1
    flagged = bool(scale > 0 and rel_threshold / 10 < ratio < rel_threshold * 10)
    coeffs = np.zeros_like(a)
    if weight == 2:
        coeffs[0] = a[0]
    else:
        coeffs[1:] = a[1:]
    return ModelField(weight, coeffs, hm.levi, flagged)


def dilation_limit_check(
    X: VectorField,
    frame: HFrame,
    m,
    t_grid=None,
    sample_half: float = 0.8,
    per_axis: int = 3,
    slope_min: float = 0.85,
    order: int | None = None,
) -> RateReport:
    """Rescaled dilation pullback against the model field.

    In Heisenberg coordinates at m the residual field t^w delta_t^* X - X^m
    is evaluated over a sample box for each t; the sup norms must decay at
    least linearly in t (or vanish identically for exactly homogeneous
    fields).
    """
    if t_grid is None:
        t_grid = default_t_grid()
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(t_grid <= 0):
        raise ValueError("t grid must be positive")
    m = np.asarray(m, dtype=float)
    hm = heisenberg_map(frame, m)
    dim = frame.dim
    if order is None:
        order = max(frame.order, 2 * (max(jet.degree() for jet in X.components.components) + 1))
    fwd = hm.as_polymap(order)
    inv = hm.inverse_polymap(order)
    Xh = pushforward_field(fwd, inv, X, order=order)
    mf = model_field(X, frame, m)
    target = mf.as_field(order)

    space = Xh.components.space
    w = weight_vector(dim)
    mono_w = space.exponents @ w
    pts = np.stack(
        np.meshgrid(*[np.linspace(-sample_half, sample_half, per_axis)] * dim, indexing="ij"), axis=-1
    ).reshape(-1, dim)
    mono = np.prod(pts[:, None, :] ** space.exponents[None, :, :], axis=2)

    residuals = []
    for t in t_grid:
        worst = 0.0
        for i in range(dim):
            coeff = Xh.components.components[i].coeffs
            scaled = coeff * t ** (mf.weight + mono_w - w[i])
            diff = scaled - target.components.components[i].coeffs
            worst = max(worst, float(np.max(np.abs(mono @ diff))))
        residuals.append(worst)
    return fit_report(t_grid, residuals, slope_min)
