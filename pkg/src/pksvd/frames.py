"""Frame-theoretic operations on dictionaries.

A dictionary is an n x m matrix (m >= n, full row rank) whose columns are
atoms. It acts as a synthesis operator; any matrix ``g`` with
``mat @ g.T = I`` is a dual (analysis) operator for it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadShape, RankDeficient, UniqueDual
from .matrix_core import as_matrix

# Relative singular-value floor below which a dictionary is not a frame.
_RANK_TOL = 1e-10

# Scale of the null-space perturbation used by random_dual. Large enough
# that a sampled dual is far from the canonical one in every direction.
_DUAL_PERTURBATION_SCALE = 10.0


@dataclass(frozen=True)
class Dictionary:
    """Full-row-rank n x m matrix with atoms as columns (m >= n)."""

    mat: np.ndarray

    def __post_init__(self):
        m = as_matrix(self.mat, "dictionary")
        if m.shape[1] < m.shape[0]:
            raise BadShape(
                f"dictionary must have at least as many atoms as rows, got {m.shape}"
            )
        svals = np.linalg.svd(m, compute_uv=False)
        if svals[-1] <= _RANK_TOL * svals[0]:
            raise RankDeficient(
                f"smallest singular value {svals[-1]:.3e} is below "
                f"{_RANK_TOL:g} * sigma_max; not a frame"
            )
        object.__setattr__(self, "mat", m)

    @property
    def n(self):
        return self.mat.shape[0]

    @property
    def m(self):
        return self.mat.shape[1]


@dataclass(frozen=True)
class FrameBounds:
    """Optimal frame bounds 0 < lower <= upper."""

    lower: float
    upper: float

    def __post_init__(self):
        if not (np.isfinite(self.lower) and np.isfinite(self.upper)):
            raise BadShape("frame bounds must be finite")
        if not (0.0 < self.lower <= self.upper):
            raise BadShape(f"need 0 < lower <= upper, got ({self.lower}, {self.upper})")

    @property
    def ratio(self):
        return self.upper / self.lower


def gram_operator(d: Dictionary):
    """Frame operator mat @ mat.T (n x n, symmetric positive definite)."""
    return d.mat @ d.mat.T


def frame_bounds(d: Dictionary) -> FrameBounds:
    """Extreme eigenvalues of the frame operator.

    Raises ``RankDeficient`` when the smallest eigenvalue is numerically
    zero relative to the largest (the columns do not span the space).
    """
    eig = np.linalg.eigvalsh(gram_operator(d))
    lo, hi = float(eig[0]), float(eig[-1])
    if lo <= 1e-12 * hi:
        raise RankDeficient(f"lowest frame-operator eigenvalue {lo:.3e} is numerically zero")
    return FrameBounds(lo, hi)


def canonical_dual(d: Dictionary) -> Dictionary:
    """Canonical dual: (mat @ mat.T)^{-1} @ mat.

    Satisfies mat @ dual.T = I; its kernel dual.T @ mat is the orthogonal
    projection onto the row space of ``mat``.
    """
    s = gram_operator(d)
    eig = np.linalg.eigvalsh(s)
    if eig[0] <= 1e-12 * eig[-1]:
        raise RankDeficient("frame operator is numerically singular")
    return Dictionary(np.linalg.solve(s, d.mat))


def random_dual(d: Dictionary, seed: int) -> Dictionary:
    """A seeded random dual distinct from the canonical one.

    Constructed as dual.T = canonical.T + P with the columns of P drawn
    from the null space of ``mat``, so mat @ dual.T = I by construction.
    """
    if d.m == d.n:
        raise UniqueDual("square frame has a unique dual")
    base = canonical_dual(d)
    _, _, vt = np.linalg.svd(d.mat)
    null_basis = vt[d.n:, :].T  # m x (m - n), orthonormal columns
    rng = np.random.default_rng(seed)
    coeffs = _DUAL_PERTURBATION_SCALE * rng.standard_normal((d.m - d.n, d.n))
    perturbation = null_basis @ coeffs  # m x n, columns in null(mat)
    return Dictionary(base.mat + perturbation.T)


def is_parseval(d: Dictionary, tol: float) -> bool:
    """True iff || mat @ mat.T - I ||_F <= tol."""
    n = d.n
    return bool(np.linalg.norm(gram_operator(d) - np.eye(n)) <= tol)


def overcomplete_dct(n: int, m: int) -> Dictionary:
    """Overcomplete separable DCT dictionary of shape n x m.

    Both n and m must be perfect squares. A 1-D cosine grid of shape
    sqrt(n) x sqrt(m) is built with entries cos(pi*i*j/sqrt(m)), its
    columns mean-removed (except the constant one) and normalized; the
    output is its Kronecker square with unit-norm atoms.
    """
    rn = int(round(np.sqrt(n)))
    rm = int(round(np.sqrt(m)))
    if rn * rn != n or rm * rm != m:
        raise BadShape(f"n and m must be perfect squares, got n={n}, m={m}")
    if m < n:
        raise BadShape(f"need m >= n, got n={n}, m={m}")
    i = np.arange(rn)[:, None]
    j = np.arange(rm)[None, :]
    d1 = np.cos(np.pi * i * j / rm)
    d1[:, 1:] -= d1[:, 1:].mean(axis=0, keepdims=True)
    d1 /= np.linalg.norm(d1, axis=0, keepdims=True)
    full = np.kron(d1, d1)
    full /= np.linalg.norm(full, axis=0, keepdims=True)
    return Dictionary(full)


def dct_dictionary(n: int, m: int) -> Dictionary:
    """DCT-based initial dictionary for arbitrary atom counts.

    When m is a perfect square this is exactly ``overcomplete_dct``;
    otherwise the next-larger square grid is built and the first m atoms
    kept (all unit norm either way).
    """
    rm = int(np.ceil(np.sqrt(m)))
    if rm * rm == m:
        return overcomplete_dct(n, m)
    full = overcomplete_dct(n, rm * rm)
    return Dictionary(full.mat[:, :m])


def atom_distance_histogram(d: Dictionary, e: Dictionary, bins: int):
    """Histogram of per-atom distances 1 - max_j |d_i . e_j| over [0, 1].

    Atoms of both dictionaries must be unit norm and live in the same
    dimension. Returns (counts, bin_edges) as ``numpy.histogram`` does.
    """
    if d.n != e.n:
        raise BadShape(f"dimension mismatch: {d.n} vs {e.n}")
    for which, dic in (("first", d), ("second", e)):
        norms = np.linalg.norm(dic.mat, axis=0)
        if not np.allclose(norms, 1.0, atol=1e-8):
            raise BadShape(f"{which} dictionary atoms must be unit norm")
    corr = np.abs(d.mat.T @ e.mat)
    dist = 1.0 - corr.max(axis=1)
    return np.histogram(np.clip(dist, 0.0, 1.0), bins=bins, range=(0.0, 1.0))
