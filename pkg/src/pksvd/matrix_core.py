"""Dense linear-algebra substrate.

Factorization-backed pseudo-inverse, a hand-rolled Kronecker product, and
two interchangeable Sylvester-equation solvers: a Schur-reduction path
(default, tractable) and a vec/Kronecker least-squares path kept as an
independent cross-check of the Schur route.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import BadShape, NearSingularSylvester

# Singular values below RCOND * sigma_max are treated as zero.
RCOND = 1e-12

# Relative residual allowed for a successful Sylvester solve.
SYLVESTER_RESIDUAL_TOL = 1e-9

# Condition estimate above which the Sylvester operator counts as singular.
SYLVESTER_COND_LIMIT = 1e12


def as_matrix(a, name="matrix"):
    """Validate and return ``a`` as a 2-D float64 array.

    Requires at least one row and one column and all entries finite.
    """
    m = np.asarray(a, dtype=float)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise BadShape(f"{name} must be 2-D and non-empty, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise BadShape(f"{name} contains non-finite entries")
    return m


def pseudo_inverse(mat):
    """Moore-Penrose pseudo-inverse with singular values below
    ``RCOND * sigma_max`` truncated."""
    m = as_matrix(mat)
    return np.linalg.pinv(m, rcond=RCOND)


def kron(a, b):
    """Kronecker product of two matrices.

    Built from broadcasting rather than delegated, so the vec-form
    Sylvester path below does not share code with any library solver.
    """
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    ra, ca = a.shape
    rb, cb = b.shape
    out = a[:, np.newaxis, :, np.newaxis] * b[np.newaxis, :, np.newaxis, :]
    return out.reshape(ra * rb, ca * cb)


def _sylvester_condition_estimate(a, b):
    """Estimate the conditioning of I (x) A + B^T (x) I.

    The operator's eigenvalues are all pairwise sums of the eigenvalues of
    ``a`` and ``b``; their max/min modulus ratio estimates the condition
    number without forming the nm x nm system.
    """
    eva = np.linalg.eigvals(a)
    evb = np.linalg.eigvals(b)
    sums = np.abs(eva[:, None] + evb[None, :])
    smallest = sums.min()
    if smallest == 0.0:
        return np.inf
    return sums.max() / smallest


def solve_sylvester(a, b, c, method="schur"):
    """Solve A @ beta + beta @ B = C for beta.

    ``method="schur"`` uses real Schur reduction (Bartels-Stewart);
    ``method="kron"`` assembles (I (x) A + B^T (x) I) vec(beta) = vec(C)
    and solves it by least squares. Both raise ``NearSingularSylvester``
    when the operator's condition estimate exceeds 1e12 or the residual
    check fails afterwards.
    """
    a = as_matrix(a, "A")
    b = as_matrix(b, "B")
    c = as_matrix(c, "C")
    n = a.shape[0]
    m = b.shape[0]
    if a.shape != (n, n) or b.shape != (m, m):
        raise BadShape("A and B must be square")
    if c.shape != (n, m):
        raise BadShape(f"C must be {n}x{m}, got {c.shape}")

    cond = _sylvester_condition_estimate(a, b)
    if not np.isfinite(cond) or cond > SYLVESTER_COND_LIMIT:
        raise NearSingularSylvester(
            f"spectra of A and -B nearly overlap (condition estimate {cond:.3e})"
        )

    if method == "schur":
        beta = scipy.linalg.solve_sylvester(a, b, c)
    elif method == "kron":
        op = kron(np.eye(m), a) + kron(b.T, np.eye(n))
        vec_c = c.reshape(-1, order="F")
        sol, *_ = np.linalg.lstsq(op, vec_c, rcond=None)
        beta = sol.reshape((n, m), order="F")
    else:
        raise ValueError(f"unknown method {method!r}; expected 'schur' or 'kron'")

    residual = np.linalg.norm(a @ beta + beta @ b - c)
    if residual > SYLVESTER_RESIDUAL_TOL * max(1.0, np.linalg.norm(c)):
        raise NearSingularSylvester(
            f"solution residual {residual:.3e} exceeds tolerance; "
            "spectra of A and -B likely overlap"
        )
    return beta
