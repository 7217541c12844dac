"""Baseline K-SVD dictionary learning.

Alternates per-column OMP sparse coding with atom-by-atom rank-1 SVD
updates of the restricted residual. Used both standalone and as the
initializer of the Parseval trainer. Per-block means are preserved: no
mean removal happens inside training.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .frames import Dictionary
from .matrix_core import as_matrix
from .sparse_solvers import omp

_OMP_RESIDUAL_TOL = 1e-12


@dataclass(frozen=True)
class KsvdConfig:
    """Training configuration: atom count, per-column budget, sweeps."""

    m: int
    k: int
    iters: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.m < 1 or self.k < 1 or self.iters < 0:
            raise ValueError("m, k must be >= 1 and iters >= 0")


def _canonical_sign(atom, row):
    """Flip so the atom's largest-magnitude entry is positive."""
    pivot = atom[np.argmax(np.abs(atom))]
    if pivot < 0:
        return -atom, -row
    return atom, row


def _code_columns(dict_mat, data, k, prev_codes):
    """Sparse-code every column, never worsening the previous codes.

    Fresh OMP codes are compared against a least-squares refit of each
    column's previous support; the better of the two is kept, so the
    coding stage cannot increase the data-fit objective.
    """
    d = Dictionary(dict_mat)
    m = dict_mat.shape[1]
    codes = np.zeros((m, data.shape[1]))
    for i in range(data.shape[1]):
        y = data[:, i]
        fresh = omp(d, y, k, _OMP_RESIDUAL_TOL).entries
        best = fresh
        best_err = np.linalg.norm(y - dict_mat @ fresh)
        if prev_codes is not None:
            support = np.flatnonzero(prev_codes[:, i])
            if support.size:
                sol, *_ = np.linalg.lstsq(dict_mat[:, support], y, rcond=None)
                refit = np.zeros(m)
                refit[support] = sol
                err = np.linalg.norm(y - dict_mat @ refit)
                if err < best_err:
                    best, best_err = refit, err
        codes[:, i] = best
    return codes


def _update_atoms(dict_mat, data, codes):
    """One pass of atom-wise rank-1 updates; unused atoms are replaced by
    the worst-represented training column."""
    dict_mat = dict_mat.copy()
    codes = codes.copy()
    taken = set()
    for j in range(dict_mat.shape[1]):
        used = np.flatnonzero(codes[j, :])
        if used.size == 0:
            errs = np.linalg.norm(data - dict_mat @ codes, axis=0)
            for worst in np.argsort(errs)[::-1]:
                if int(worst) not in taken:
                    break
            taken.add(int(worst))
            col = data[:, int(worst)]
            nrm = np.linalg.norm(col)
            if nrm > 0:
                dict_mat[:, j] = col / nrm
            continue
        restricted = (
            data[:, used]
            - dict_mat @ codes[:, used]
            + np.outer(dict_mat[:, j], codes[j, used])
        )
        u, s, vt = np.linalg.svd(restricted, full_matrices=False)
        atom, row = _canonical_sign(u[:, 0], s[0] * vt[0, :])
        dict_mat[:, j] = atom
        codes[j, used] = row
    return dict_mat, codes


def ksvd_train(data, cfg: KsvdConfig, init: Dictionary):
    """Train a dictionary on the columns of ``data``.

    ``init`` must be n x cfg.m with unit-norm atoms. Returns the learned
    ``Dictionary`` (unit-norm atoms) and the final codes matrix. The fit
    objective ||data - dict @ codes||_F^2 never increases across sweeps.
    """
    data = as_matrix(data, "data")
    n = data.shape[0]
    if init.mat.shape != (n, cfg.m):
        raise ValueError(f"init must be {n}x{cfg.m}, got {init.mat.shape}")
    if not np.allclose(np.linalg.norm(init.mat, axis=0), 1.0, atol=1e-8):
        raise ValueError("init atoms must be unit norm")
    if cfg.k > n:
        raise ValueError(f"budget k={cfg.k} exceeds signal dimension {n}")

    dict_mat = init.mat.copy()
    codes = None
    for _ in range(cfg.iters):
        codes = _code_columns(dict_mat, data, cfg.k, codes)
        dict_mat, codes = _update_atoms(dict_mat, data, codes)
    if codes is None:
        codes = _code_columns(dict_mat, data, cfg.k, None)
    return Dictionary(dict_mat), codes
