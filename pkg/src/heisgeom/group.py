"""The graded 2-step nilpotent tangent group of a Heisenberg manifold.

Elements live in R^(d+1) with the weight-2 slot first: dilations act by
t.(x_0, x') = (t^2 x_0, t x'), and the product twists the transverse slot by
half the Levi matrix:

    x . y = (x_0 + y_0 + 1/2 sum_jk L_jk x_j y_k,  x' + y').

The module also holds the auxiliary bilinear-law groups x_0 + y_0 +
sum_jk b_kj x_j y_k produced by coordinate normalizations, the graded shears
relating them, the homogeneous pseudo-norm and the fiber classification into
Heisenberg x abelian factors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import StructureConstants
from .jets import Jet, PolyMap, jet_space


def weight_vector(dim: int) -> np.ndarray:
    w = np.ones(dim)
    w[0] = 2.0
    return w


def dilate(t: float, x) -> np.ndarray:
    """Graded dilation t.x = (t^2 x_0, t x_1, ..., t x_d)."""
    x = np.asarray(x, dtype=float)
    return x * float(t) ** weight_vector(x.shape[-1])


def dilate_inv(t: float, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x * float(t) ** -weight_vector(x.shape[-1])


def pseudo_norm(x) -> np.ndarray | float:
    """Homogeneous gauge ||x|| = (x_0^2 + |x'|^4)^(1/4); ||t.x|| = |t| ||x||."""
    x = np.asarray(x, dtype=float)
    horiz = np.sum(x[..., 1:] ** 2, axis=-1)
    out = (x[..., 0] ** 2 + horiz**2) ** 0.25
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class TangentGroup:
    """Tangent group with frame-relative structure constants L."""

    constants: StructureConstants

    @classmethod
    def from_matrix(cls, L, atol: float = 1e-10) -> "TangentGroup":
        return cls(StructureConstants(np.asarray(L, dtype=float), atol))

    @property
    def L(self) -> np.ndarray:
        return self.constants.L

    @property
    def d(self) -> int:
        return self.constants.d

    @property
    def dim(self) -> int:
        return self.d + 1

    def identity(self) -> np.ndarray:
        return np.zeros(self.dim)

    def mul(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = x + y
        twist = 0.5 * np.einsum("...j,jk,...k->...", x[..., 1:], self.L, y[..., 1:])
        out[..., 0] += twist
        return out

    def inverse(self, x) -> np.ndarray:
        return -np.asarray(x, dtype=float)

    def commutator(self, x, y) -> np.ndarray:
        return self.mul(self.mul(x, y), self.mul(self.inverse(x), self.inverse(y)))


def bilinear_mul(b: np.ndarray, x, y) -> np.ndarray:
    """Product of the normalization group: x_0 + y_0 + sum_jk b_kj x_j y_k."""
    b = np.asarray(b, dtype=float)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = x + y
    out[..., 0] += np.einsum("...k,kj,...j->...", y[..., 1:], b, x[..., 1:])
    return out


@dataclass(frozen=True, eq=False)
class GradedShear:
    """x -> (x_0 + 1/2 sum_jk c_jk x_j x_k, x') with symmetric c.

    A graded group isomorphism carrying the bilinear law of b onto that of
    b + c.
    """

    c: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError("shear matrix must be square")
        if np.max(np.abs(c - c.T), initial=0.0) > 1e-12:
            raise ValueError("shear matrix must be symmetric")
        c.setflags(write=False)
        object.__setattr__(self, "c", c)

    @property
    def d(self) -> int:
        return self.c.shape[0]

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = x.copy()
        out[..., 0] += 0.5 * np.einsum("...j,jk,...k->...", x[..., 1:], self.c, x[..., 1:])
        return out

    def inverse(self) -> "GradedShear":
        return GradedShear(-self.c)

    def transport(self, b: np.ndarray) -> np.ndarray:
        """New bilinear coefficients after pushing the b-law through the shear."""
        return np.asarray(b, dtype=float) + self.c

    def as_polymap(self, order: int) -> PolyMap:
        dim = self.d + 1
        s = jet_space(dim, order)
        comps = [Jet.coordinate(s, 0)]
        for j in range(1, dim):
            for k in range(1, dim):
                cjk = self.c[j - 1, k - 1]
                if cjk != 0.0:
                    comps[0] = comps[0] + 0.5 * cjk * Jet.from_terms(
                        s, {tuple((1 if i == j else 0) + (1 if i == k else 0) for i in range(dim)): 1.0}
                    )
        comps.extend(Jet.coordinate(s, i) for i in range(1, dim))
        return PolyMap(tuple(comps))


def shear_homomorphism_residual(shear: GradedShear, b: np.ndarray, pairs) -> float:
    """max |shear(x .b y) - (shear x .b+c shear y)| over the sample pairs."""
    b = np.asarray(b, dtype=float)
    bc = shear.transport(b)
    worst = 0.0
    for x, y in pairs:
        lhs = shear.apply(bilinear_mul(b, x, y))
        rhs = bilinear_mul(bc, shear.apply(x), shear.apply(y))
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


def canonical_constants(d: int, n: int) -> np.ndarray:
    """Structure constants of H^(2n+1) x R^(d-2n) in its adapted frame."""
    L = np.zeros((d, d))
    for j in range(n):
        L[j, n + j] = -2.0
        L[n + j, j] = 2.0
    return L


@dataclass(frozen=True, eq=False)
class FiberClassification:
    """Rank, group type and adapted frame of one tangent-group fiber."""

    rank: int
    d: int
    label: str
    adapted: np.ndarray  # columns: X_1..X_n, X_{n+1}..X_{2n}, kernel basis
    singular_values: np.ndarray
    relation_residual: float
    flagged: bool

    @property
    def n(self) -> int:
        return self.rank // 2

    def relations(self, L: np.ndarray) -> np.ndarray:
        """Structure constants re-derived in the adapted frame."""
        return self.adapted.T @ np.asarray(L, dtype=float) @ self.adapted


def _orient(v: np.ndarray) -> np.ndarray:
    lead = np.argmax(np.abs(v))
    return -v if v[lead] < 0 else v


def classify_fiber(
    G: TangentGroup,
    metric: np.ndarray | None = None,
    rank_rtol: float = 1e-8,
    flag_band: float = 10.0,
) -> FiberClassification:
    """Classify the fiber as H^(2n+1) x R^(d-2n).

    Whitens the metric, pairs the antisymmetric form's planes through the
    eigendecomposition of -S^2, scales an adapted basis to the -2 relations
    and completes it with a metric-orthonormal kernel basis.  Near-threshold
    singular values set the `flagged` bit instead of being silently rounded.
    """
    d = G.d
    L = G.L
    if metric is None:
        metric = np.eye(d)
    metric = np.asarray(metric, dtype=float)
    if metric.shape != (d, d) or np.max(np.abs(metric - metric.T), initial=0.0) > 1e-10:
        raise ValueError("metric must be a symmetric d x d matrix")
    try:
        chol = np.linalg.cholesky(metric)
    except np.linalg.LinAlgError as exc:
        raise ValueError("metric must be positive definite") from exc

    chol_inv = np.linalg.inv(chol)
    S = chol_inv @ L @ chol_inv.T  # antisymmetric in whitened coordinates
    # rank threshold uses SVD singular values; sqrt of eigh eigenvalues of
    # -S^2 would smear exact zeros up to sqrt(eps) * sigma_max
    sigma = np.linalg.svd(S, compute_uv=False)
    sig_max = float(sigma.max(initial=0.0))
    thresh = rank_rtol * sig_max if sig_max > 0 else np.inf
    flagged = bool(np.any((sigma > thresh / flag_band) & (sigma < thresh * flag_band)))

    lam, V = np.linalg.eigh(-S @ S)
    pairs = []
    kernel = []
    used: list[np.ndarray] = []
    order = np.argsort(lam)[::-1]
    for idx in order:
        v = V[:, idx].copy()
        for q in used:
            v -= (q @ v) * q
        nv = np.linalg.norm(v)
        if nv < 0.5:  # direction already consumed as a pair partner
            continue
        v = _orient(v / nv)
        s = float(np.linalg.norm(S @ v))
        if s > thresh:
            q2 = -(S @ v) / s
            for q in used:
                q2 -= (q @ q2) * q
            q2 -= (v @ q2) * v
            q2 /= np.linalg.norm(q2)
            pairs.append((s, v, q2))
            used.extend([v, q2])
        else:
            kernel.append(v)
            used.append(v)

    rank = 2 * len(pairs)
    n = len(pairs)
    cols_first = [np.sqrt(2.0 / s) * q1 for s, q1, _ in pairs]
    cols_second = [-np.sqrt(2.0 / s) * q2 for s, _, q2 in pairs]
    cols = cols_first + cols_second + kernel
    adapted_white = np.stack(cols, axis=1) if cols else np.zeros((d, 0))
    adapted = chol_inv.T @ adapted_white

    if rank == 0:
        label = f"R{d + 1}"
    elif rank == d:
        label = f"H{d + 1}"
    else:
        label = f"H{2 * n + 1}xR{d - 2 * n}"

    rel = adapted.T @ L @ adapted
    resid = float(np.max(np.abs(rel - canonical_constants(d, n)), initial=0.0))
    if resid > 1e-6:
        raise ArithmeticError(f"adapted frame relations off by {resid:.3e}")
    return FiberClassification(rank, d, label, adapted, sigma, resid, flagged)
