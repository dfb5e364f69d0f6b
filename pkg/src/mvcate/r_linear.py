"""Multi-level R-learner for CATE families linear in a fixed basis.

With residuals ``Ybar = Y - m(X)`` and ``Tbar[:, k] = 1{T = t_k} - r(t_k, X)``
the R-loss

    L(beta) = mean_i (Ybar_i - sum_k Tbar_ik * h(X_i)' beta_k)^2

is quadratic in the stacked ``beta = (beta_1, ..., beta_K)``. Writing
``G_i = (Tbar_i1 h_i, ..., Tbar_iK h_i)`` gives ``A = G'G / n`` and
``a = G'Ybar / n``; the (i, j) block of ``A`` is ``H' D_i D_j H / n``.
The loss is minimised by ``A^+ a`` (minimum-norm when ``A`` is singular).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base_learners.regressors import LinearBasisModel
from .core import BasisSpec, ObservationalSample, default_cate_basis


@dataclass(frozen=True)
class RLossSystem:
    A: np.ndarray  # (K p, K p)
    a: np.ndarray  # (K p,)
    y_resid: np.ndarray  # (n,)
    t_resid: np.ndarray  # (n, K)
    design: np.ndarray  # (n, p) basis matrix H
    n_inputs: int | None = None

    @classmethod
    def from_residuals(cls, y_resid, t_resid, design, n_inputs: int | None = None) -> "RLossSystem":
        y = np.asarray(y_resid, dtype=float).reshape(-1)
        T = np.asarray(t_resid, dtype=float)
        T = T.reshape(-1, 1) if T.ndim == 1 else T
        H = np.asarray(design, dtype=float)
        H = H.reshape(-1, 1) if H.ndim == 1 else H
        n = y.shape[0]
        if n < 1 or T.shape[0] != n or H.shape[0] != n:
            raise ValueError("residuals and design must share n >= 1 rows")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(T)) and np.all(np.isfinite(H))):
            raise ValueError("non-finite residuals or basis values")
        G = (T[:, :, None] * H[:, None, :]).reshape(n, -1)
        A = G.T @ G / n
        A = 0.5 * (A + A.T)
        a = G.T @ y / n
        return cls(A, a, y, T, H, n_inputs)

    @property
    def K(self) -> int:
        return self.t_resid.shape[1]

    @property
    def p(self) -> int:
        return self.design.shape[1]

    def block(self, i: int, j: int) -> np.ndarray:
        """Block (i, j) of ``A`` for 1-based level indices."""
        p = self.p
        return self.A[(i - 1) * p : i * p, (j - 1) * p : j * p]

    def _stack(self, beta) -> np.ndarray:
        return np.asarray(beta, dtype=float).reshape(self.K, self.p)

    def loss(self, beta) -> float:
        """R-loss evaluated directly from the residuals."""
        B = self._stack(beta)
        fitted = np.sum(self.t_resid * (self.design @ B.T), axis=1)
        return float(np.mean((self.y_resid - fitted) ** 2))

    def gradient(self, beta) -> np.ndarray:
        b = np.asarray(beta, dtype=float).reshape(-1)
        return 2.0 * (self.A @ b - self.a)


@dataclass(frozen=True)
class RSolution:
    beta: np.ndarray  # (K, p)
    rank: int
    eigenvalues: np.ndarray

    @property
    def dimension(self) -> int:
        return self.beta.size

    @property
    def identifiable(self) -> bool:
        return self.rank == self.dimension


def assemble(
    sample: ObservationalSample,
    m_hat,
    gps,
    basis: BasisSpec,
) -> RLossSystem:
    """Build the normal system from fitted ``m`` and (clipped) propensities.

    ``m_hat(X) -> (n,)`` and ``gps(X) -> (n, K+1)`` are callables.
    """
    X = sample.covariates
    y_resid = sample.outcome - np.asarray(m_hat(X), dtype=float)
    R = np.asarray(gps(X), dtype=float)
    onehot = sample.treatment_idx[:, None] == np.arange(1, sample.K + 1)[None, :]
    t_resid = onehot - R[:, 1:]
    return RLossSystem.from_residuals(y_resid, t_resid, basis(X), sample.d)


def solve_min_norm(system: RLossSystem, rcond: float = 1e-10) -> RSolution:
    """``A^+ a`` through the eigendecomposition of the symmetric ``A``.

    Eigenvalues at or below ``rcond * max_eigenvalue`` are treated as zero.
    """
    w, V = np.linalg.eigh(system.A)
    top = max(float(w.max(initial=0.0)), 0.0)
    keep = w > rcond * top if top > 0 else np.zeros_like(w, dtype=bool)
    inv = np.zeros_like(w)
    inv[keep] = 1.0 / w[keep]
    beta = V @ (inv * (V.T @ system.a))
    return RSolution(beta.reshape(system.K, system.p), int(keep.sum()), w)


def r_linear_cate(beta, basis: BasisSpec, n_inputs: int, tag: str = "RLin", diagnostics=None):
    """Per-level linear predictors ``h(x)' beta_k``."""
    from .meta_learners import CateEstimate

    B = np.asarray(beta, dtype=float)
    B = B.reshape(-1, basis.dimension)
    per_k = {k: LinearBasisModel(basis, B[k - 1].copy(), n_inputs) for k in range(1, B.shape[0] + 1)}
    return CateEstimate(per_k, tag, diagnostics=dict(diagnostics or {}))


def r_learner(
    sample: ObservationalSample,
    nuisances,
    basis: BasisSpec | None = None,
    *,
    equilibrate: bool = True,
):
    """Fit the linear R-learner from a nuisance set (uses its ``m`` and clipped GPS).

    With ``equilibrate`` the basis columns are rescaled to unit root mean
    square before solving and the coefficients mapped back, so the
    eigenvalue cutoff is not triggered by covariate units alone.
    """
    basis = basis or default_cate_basis(sample.d)
    scale = np.ones(basis.dimension)
    if equilibrate:
        rms = np.sqrt(np.mean(basis(sample.covariates) ** 2, axis=0))
        scale = np.where(rms > 0, rms, 1.0)
    scaled = BasisSpec(f"{basis.name}/rms", basis.dimension, lambda X: basis(X) / scale)
    system = assemble(sample, nuisances.observed_mean, nuisances.propensity, scaled)
    sol = solve_min_norm(system)
    diag = {"rank": sol.rank, "dimension": sol.dimension, "identifiable": sol.identifiable}
    return r_linear_cate(sol.beta / scale, basis, sample.d, diagnostics=diag)
