"""Polynomial vector fields, hyperplane frames and the Levi form matrix.

A frame is a list X_0, ..., X_d of vector fields on a box, with X_1, ..., X_d
spanning the distinguished hyperplane distribution H.  The Levi matrix at a
point m is read off the brackets: expanding [X_j, X_k](m) over the frame at m,
the X_0-coefficient is L_jk.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .jets import Jet, JetError, PolyMap, jet_compose, jet_mul


class FrameError(ValueError):
    """Singular frame matrix or out-of-domain request."""


@dataclass(frozen=True, eq=False)
class VectorField:
    """A vector field with polynomial components, X = sum_k comp_k(x) d/dx_k."""

    components: PolyMap

    def __post_init__(self):
        if self.components.dim_in != self.components.dim_out:
            raise JetError(
                f"vector field needs square component map, got "
                f"{self.components.dim_in}->{self.components.dim_out}"
            )

    @classmethod
    def from_jets(cls, jets) -> "VectorField":
        return cls(PolyMap(tuple(jets)))

    @classmethod
    def coordinate(cls, dim: int, i: int, order: int) -> "VectorField":
        s_comps = []
        ident = PolyMap.identity(dim, order)
        for k in range(dim):
            s_comps.append(Jet.constant(ident.space, 1.0 if k == i else 0.0))
        return cls(PolyMap(tuple(s_comps)))

    @property
    def dim(self) -> int:
        return self.components.dim_in

    @property
    def order(self) -> int:
        return self.components.order

    def __call__(self, x) -> np.ndarray:
        return self.components.eval(x)

    def eval_many(self, pts) -> np.ndarray:
        return self.components.eval_many(pts)

    def with_order(self, order: int) -> "VectorField":
        return VectorField(self.components.with_order(order))

    def __add__(self, other: "VectorField") -> "VectorField":
        return VectorField(
            PolyMap(tuple(a + b for a, b in zip(self.components.components, other.components.components)))
        )

    def __rmul__(self, scalar: float) -> "VectorField":
        return VectorField(PolyMap(tuple(float(scalar) * c for c in self.components.components)))

    def scaled_by_jet(self, f: Jet) -> "VectorField":
        """Pointwise scaling f(x) X(x)."""
        return VectorField(PolyMap(tuple(jet_mul(f, c) for c in self.components.components)))


def bracket(X: VectorField, Y: VectorField) -> VectorField:
    """Lie bracket [X, Y]^i = sum_j (X^j d_j Y^i - Y^j d_j X^i).

    Exact on polynomial inputs through total degree `order`; higher products
    are truncated.
    """
    if X.dim != Y.dim:
        raise JetError(f"bracket dimension mismatch: {X.dim} vs {Y.dim}")
    xc, yc = X.components.components, Y.components.components
    out = []
    for i in range(X.dim):
        acc = None
        for j in range(X.dim):
            term = jet_mul(xc[j], yc[i].partial(j)) - jet_mul(yc[j], xc[i].partial(j))
            acc = term if acc is None else acc + term
        out.append(acc)
    return VectorField(PolyMap(tuple(out)))


@dataclass(frozen=True)
class Box:
    """Axis-aligned box, the chart domain."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("box bounds must be matching vectors")
        if np.any(hi <= lo):
            raise ValueError("empty box")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.size

    def contains(self, x, tol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def shrunk(self, factor: float) -> "Box":
        c, h = self.center(), 0.5 * (self.hi - self.lo)
        return Box(c - factor * h, c + factor * h)

    def grid(self, per_axis: int = 5, limit: int | None = None) -> np.ndarray:
        """Deterministic interior product grid, optionally thinned to `limit`
        points by even striding (row-major order kept)."""
        fracs = (2 * np.arange(per_axis) + 1) / (2 * per_axis)
        axes = [self.lo[i] + fracs * (self.hi[i] - self.lo[i]) for i in range(self.dim)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)
        if limit is not None and len(pts) > limit:
            idx = np.linspace(0, len(pts) - 1, limit).round().astype(int)
            pts = pts[idx]
        return pts


@dataclass(frozen=True, eq=False)
class HFrame:
    """Frame X_0, ..., X_d over a box; X_1, ..., X_d span the hyperplane H."""

    fields: tuple
    domain: Box

    def __post_init__(self):
        fields = tuple(self.fields)
        if len(fields) < 2:
            raise FrameError("need at least X_0 and one horizontal field")
        dim = fields[0].dim
        if len(fields) != dim:
            raise FrameError(f"{len(fields)} fields for dimension {dim}; frame must have d+1 = dim fields")
        if self.domain.dim != dim:
            raise FrameError("domain dimension does not match the fields")
        object.__setattr__(self, "fields", fields)

    @property
    def dim(self) -> int:
        return len(self.fields)

    @property
    def d(self) -> int:
        return self.dim - 1

    @property
    def order(self) -> int:
        return self.fields[0].order

    def matrix_at(self, x) -> np.ndarray:
        """B(x): row j holds the components of X_j at x."""
        return np.stack([f(x) for f in self.fields], axis=0)

    def basis_at(self, x) -> np.ndarray:
        """Columns are the frame vectors at x (= B(x)^t)."""
        return self.matrix_at(x).T

    def check_invertible(self, x, rtol: float = 1e-8) -> float:
        B = self.matrix_at(x)
        det = np.linalg.det(B)
        scale = max(np.max(np.abs(B), initial=0.0), 1e-300)
        if abs(det) <= rtol * scale**self.dim:
            raise FrameError(f"frame matrix nearly singular at {np.asarray(x)}: det={det:.3e}")
        return det

    def expand(self, x, v) -> np.ndarray:
        """Coefficients of the vector v in the frame at x."""
        self.check_invertible(x)
        return np.linalg.solve(self.basis_at(x), np.asarray(v, dtype=float))

    def with_order(self, order: int) -> "HFrame":
        return HFrame(tuple(f.with_order(order) for f in self.fields), self.domain)

    def validate(self, per_axis: int = 5, limit: int = 200):
        """Determinant guard over a deterministic sample grid."""
        for x in self.domain.grid(per_axis, limit=limit):
            self.check_invertible(x)


@dataclass(frozen=True)
class StructureConstants:
    """Frame-relative Levi matrix L with L_jk the X_0-part of [X_j, X_k]."""

    L: np.ndarray
    atol: float = 1e-10

    def __post_init__(self):
        L = np.asarray(self.L, dtype=float)
        if L.ndim != 2 or L.shape[0] != L.shape[1]:
            raise ValueError("structure constants must form a square matrix")
        skew = np.max(np.abs(L + L.T), initial=0.0)
        if skew > self.atol:
            raise ValueError(f"Levi matrix not antisymmetric: |L + L^t| = {skew:.3e}")
        L.setflags(write=False)
        object.__setattr__(self, "L", L)

    @property
    def d(self) -> int:
        return self.L.shape[0]


class LeviForm:
    """Bracket fields of a frame, cached once, evaluated at many points."""

    def __init__(self, frame: HFrame):
        self.frame = frame
        d = frame.d
        self._brackets = {
            (j, k): bracket(frame.fields[j], frame.fields[k])
            for j, k in itertools.combinations(range(1, d + 1), 2)
        }

    def matrix(self, m) -> StructureConstants:
        frame = self.frame
        if not frame.domain.contains(m):
            raise FrameError(f"point {np.asarray(m)} outside the frame domain")
        basis = frame.basis_at(m)
        frame.check_invertible(m)
        d = frame.d
        L = np.zeros((d, d))
        for (j, k), br in self._brackets.items():
            omega = np.linalg.solve(basis, br(m))
            L[j - 1, k - 1] = omega[0]
            L[k - 1, j - 1] = -omega[0]
        return StructureConstants(L)

    def raw_matrix(self, m) -> np.ndarray:
        """L without the antisymmetry validation (both triangles solved
        independently; used by the antisymmetry check itself)."""
        frame = self.frame
        basis = frame.basis_at(m)
        d = frame.d
        L = np.zeros((d, d))
        for (j, k), br in self._brackets.items():
            v = br(m)
            L[j - 1, k - 1] = np.linalg.solve(basis, v)[0]
            L[k - 1, j - 1] = np.linalg.solve(basis, -v)[0]
        return L


def levi_matrix(frame: HFrame, m) -> StructureConstants:
    """The Levi matrix of the frame at m (see LeviForm for batch use)."""
    return LeviForm(frame).matrix(m)


def pushforward_field(fwd: PolyMap, inv: PolyMap, X: VectorField, order: int | None = None) -> VectorField:
    """Pushforward of X under the polynomial diffeomorphism fwd with exact
    polynomial inverse inv: (fwd_* X)(y) = fwd'(inv(y)) X(inv(y)).

    Exact when `order` is at least deg(inv) * (deg X + deg fwd - 1); callers
    lift the order accordingly.
    """
    if order is not None:
        fwd = fwd.with_order(order)
        inv = inv.with_order(order)
        X = X.with_order(order)
    dim = X.dim
    comps_inv = X.components.compose(inv, exact=True).components
    const = inv.constant()
    out = []
    for i in range(dim):
        acc = None
        for j in range(dim):
            dfij = fwd.components[i].partial(j)
            dfij_at = jet_compose(dfij.rebased(const), inv, exact=True)
            term = jet_mul(dfij_at, comps_inv[j])
            acc = term if acc is None else acc + term
        out.append(acc)
    return VectorField(PolyMap(tuple(out)))


@dataclass(frozen=True)
class PreservationReport:
    """Residuals of the hyperplane-preservation test for a map between frames."""

    max_residual: float
    residuals: np.ndarray
    tol: float

    @property
    def preserved(self) -> bool:
        return self.max_residual < self.tol


def pushforward_preserves_H(
    phi: PolyMap,
    frame_src: HFrame,
    frame_dst: HFrame,
    samples,
    tol: float = 1e-10,
) -> PreservationReport:
    """Check phi' maps H to H' over the samples.

    At each sample x the pushforwards phi'(x) X_j(x), j >= 1, are expanded in
    the target frame at phi(x); the relative X_0-component is the residual.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    res = np.zeros(len(samples))
    for idx, x in enumerate(samples):
        if not frame_src.domain.contains(x):
            raise FrameError(f"sample {x} outside the source domain")
        y = phi.eval(x)
        if not frame_dst.domain.contains(y):
            raise FrameError(f"image {y} of sample {x} outside the target domain")
        D = phi.jacobian(x)
        basis_dst = frame_dst.basis_at(y)
        worst = 0.0
        for j in range(1, frame_src.dim):
            omega = np.linalg.solve(basis_dst, D @ frame_src.fields[j](x))
            denom = np.linalg.norm(omega)
            if denom > 0:
                worst = max(worst, abs(omega[0]) / denom)
        res[idx] = worst
    return PreservationReport(float(res.max(initial=0.0)), res, tol)
