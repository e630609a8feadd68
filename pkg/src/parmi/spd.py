"""Riemannian geometry of symmetric positive-definite (SPD) matrices.

Distance, geodesics and weighted Karcher means under the affine-invariant
metric.  Covariance matrices of EEG epochs are the intended payload: they are
compared by distance and averaged into class prototypes on the manifold
rather than entrywise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

SYMMETRY_TOL = 1e-9
# Relative eigenvalue floor: anything closer to singular than this is rejected
# at construction.  Regularization is the covariance estimator's job, not ours.
EIGENVALUE_FLOOR = 1e-12


class MeanConvergenceError(RuntimeError):
    """Karcher mean iteration exhausted its iteration budget.

    Carries the last iterate and the tangent-space residual so callers can
    inspect how close the iteration got.
    """

    def __init__(self, last: "SpdMatrix", residual: float, max_iter: int):
        super().__init__(
            f"mean iteration did not converge within {max_iter} iterations "
            f"(residual {residual:.3e})"
        )
        self.last = last
        self.residual = residual


@dataclass(frozen=True, eq=False)
class SpdMatrix:
    """A symmetric positive-definite matrix, e.g. a signal covariance in uV^2.

    Construction validates symmetry (max |a_ij - a_ji| <= 1e-9) and positive
    definiteness (smallest eigenvalue > 0 and not below the relative floor).
    The entries array is stored read-only.
    """

    entries: np.ndarray

    def __post_init__(self):
        a = np.array(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        skew = float(np.max(np.abs(a - a.T)))
        if skew > SYMMETRY_TOL:
            raise ValueError(
                f"matrix is not symmetric: max |a_ij - a_ji| = {skew:.3e}"
            )
        eigs = np.linalg.eigvalsh(a)
        smallest, largest = float(eigs[0]), float(eigs[-1])
        if smallest <= 0.0 or smallest < EIGENVALUE_FLOOR * largest:
            raise ValueError(
                "matrix is not positive definite: smallest eigenvalue "
                f"{smallest:.3e} (largest {largest:.3e})"
            )
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, SpdMatrix):
            return NotImplemented
        return self.entries.shape == other.entries.shape and bool(
            np.array_equal(self.entries, other.entries)
        )

    def __repr__(self) -> str:  # keep test failures readable
        return f"SpdMatrix(dim={self.dim})"

    def inverse(self) -> "SpdMatrix":
        w, v = np.linalg.eigh(self.entries)
        return SpdMatrix(_sym((v / w) @ v.T))


def _sym(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def _sqrt_and_invsqrt(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w, v = np.linalg.eigh(a)
    w = np.maximum(w, np.finfo(float).tiny)  # guard round-off at the floor
    s = np.sqrt(w)
    return (v * s) @ v.T, (v / s) @ v.T


def _check_same_dim(a: SpdMatrix, b: SpdMatrix) -> None:
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")


def riemannian_distance(a: SpdMatrix, b: SpdMatrix) -> float:
    """Affine-invariant distance ||log(A^(-1/2) B A^(-1/2))||_F.

    Symmetric, zero iff A == B, and invariant under congruence (A -> WAW^T)
    and inversion.
    """
    _check_same_dim(a, b)
    x, y = a.entries, b.entries
    if np.array_equal(x, y):
        return 0.0
    # Evaluate with the arguments in a canonical order so that
    # riemannian_distance(a, b) == riemannian_distance(b, a) bit-for-bit.
    if x.tobytes() > y.tobytes():
        x, y = y, x
    _, inv_sqrt = _sqrt_and_invsqrt(x)
    m = _sym(inv_sqrt @ y @ inv_sqrt)
    w = np.linalg.eigvalsh(m)
    w = np.maximum(w, np.finfo(float).tiny)
    return float(np.sqrt(np.sum(np.log(w) ** 2)))


def geodesic(a: SpdMatrix, b: SpdMatrix, t: float) -> SpdMatrix:
    """Point at parameter t on the geodesic from A (t=0) to B (t=1).

    Computes A^(1/2) (A^(-1/2) B A^(-1/2))^t A^(1/2).  Endpoints are returned
    exactly.
    """
    _check_same_dim(a, b)
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"geodesic parameter must be in [0, 1], got {t}")
    if t == 0.0:
        return a
    if t == 1.0:
        return b
    sqrt_a, inv_sqrt_a = _sqrt_and_invsqrt(a.entries)
    m = _sym(inv_sqrt_a @ b.entries @ inv_sqrt_a)
    w, v = np.linalg.eigh(m)
    w = np.maximum(w, np.finfo(float).tiny)
    m_t = (v * w**t) @ v.T
    return SpdMatrix(_sym(sqrt_a @ m_t @ sqrt_a))


def frechet_mean(
    ms: Sequence[SpdMatrix],
    weights: Sequence[float] | None = None,
    tol: float = 1e-8,
    max_iter: int = 50,
) -> SpdMatrix:
    """Weighted Karcher (Frechet) mean by iterated tangent-space averaging.

    Starting from the weighted arithmetic mean, repeats

        X <- X^(1/2) exp(sum_i w_i log(X^(-1/2) M_i X^(-1/2))) X^(1/2)

    until the Frobenius norm of the tangent average drops below `tol`.
    The step size is fixed at 1; covariance-scale inputs converge well inside
    the default budget.

    Raises MeanConvergenceError (carrying the last iterate and residual) if
    `max_iter` is exhausted.
    """
    if len(ms) == 0:
        raise ValueError("cannot average an empty set of matrices")
    dim = ms[0].dim
    for m in ms[1:]:
        if m.dim != dim:
            raise ValueError("matrices must share a dimension")
    if weights is None:
        w = np.full(len(ms), 1.0 / len(ms))
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != (len(ms),):
            raise ValueError("need one weight per matrix")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        total = w.sum()
        if total <= 0:
            raise ValueError("weights must sum to a positive value")
        w = w / total

    stack = np.stack([m.entries for m in ms])
    x = np.einsum("i,ijk->jk", w, stack)
    residual = np.inf
    for _ in range(max_iter):
        sqrt_x, inv_sqrt_x = _sqrt_and_invsqrt(x)
        tangent = np.zeros((dim, dim))
        for wi, mi in zip(w, stack):
            if wi == 0.0:
                continue
            ew, ev = np.linalg.eigh(_sym(inv_sqrt_x @ mi @ inv_sqrt_x))
            ew = np.maximum(ew, np.finfo(float).tiny)
            tangent += wi * ((ev * np.log(ew)) @ ev.T)
        tangent = _sym(tangent)
        residual = float(np.linalg.norm(tangent, "fro"))
        if residual < tol:
            return SpdMatrix(_sym(x))
        ew, ev = np.linalg.eigh(tangent)
        x = _sym(sqrt_x @ ((ev * np.exp(ew)) @ ev.T) @ sqrt_x)
    raise MeanConvergenceError(SpdMatrix(_sym(x)), residual, max_iter)


def random_spd(rng: np.random.Generator, dim: int, spread: float = 1.0) -> SpdMatrix:
    """Random SPD matrix with log-uniform-ish eigenvalues, for tests and demos."""
    q, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
    eigs = np.exp(rng.uniform(-spread, spread, size=dim))
    return SpdMatrix(_sym((q * eigs) @ q.T))
