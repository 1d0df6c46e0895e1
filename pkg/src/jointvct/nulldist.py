"""Null distribution of Q and p-values.

Under H0, Q converges to sum_l (A_l' eps)^2 with eps ~ N(0, D), i.e. a
mixture sum_l lambda_l chi2_1 with lambda the eigenvalues of A D A'. Three
engines evaluate the tail: two-moment scaled chi-square, Davies inversion, and
perturbation draws of eps built from per-subject score contributions.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .datamodel import Dataset, InteractionMatrix
from .davies import qf
from .errors import DaviesError, DegenerateSpectrumError, RankDeficientError
from .glm import NullFit
from .vctest import StatVariant, Weights, kernel_columns

DAVIES_ACCURACY = 1e-6
DAVIES_LIMIT = 10_000
PVALUE_FLOOR = np.finfo(float).eps
EIGEN_REL_TOL = 1e-8


class DaviesFallbackWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class ProjectedKernel:
    """D = n^-1 U'WU with U = [X | V]; A = [-D_XV' D_XX^-1, I_m]."""

    d_mat: np.ndarray
    a_mat: np.ndarray
    m: int
    u_mat: np.ndarray

    @property
    def q(self) -> int:
        return self.d_mat.shape[0] - self.m

    def covariance(self) -> np.ndarray:
        cov = self.a_mat @ self.d_mat @ self.a_mat.T
        return 0.5 * (cov + cov.T)


@dataclass(frozen=True, eq=False)
class Spectrum:
    lambdas: np.ndarray

    @property
    def mean(self) -> float:
        return float(np.sum(self.lambdas))

    @property
    def variance(self) -> float:
        return 2.0 * float(np.sum(self.lambdas**2))


def projected_kernel(d: Dataset, c: InteractionMatrix, nf: NullFit, w: Weights,
                     v: StatVariant | str) -> ProjectedKernel:
    """Build D and A for the tested columns of variant ``v``.

    The null-model design stored in ``nf`` plays the role of X, so fits that
    include G or S (direct / indirect effect nulls) are projected out too.
    A ridge-fitted null adds its penalty to D_XX (intercept excluded).
    """
    vmat = kernel_columns(d, c, w, v)
    x = nf.design
    n = d.n
    q = x.shape[1]
    m = vmat.shape[1]
    u = np.column_stack([x, vmat])
    wt = nf.mu0 * (1.0 - nf.mu0)
    dmat = (u * wt[:, None]).T @ u / n
    dmat = 0.5 * (dmat + dmat.T)
    dxx = dmat[:q, :q].copy()
    if nf.ridge:
        dxx[np.arange(1, q), np.arange(1, q)] += nf.ridge / n
    dxv = dmat[:q, q:]
    try:
        proj = np.linalg.solve(dxx, dxv)
    except np.linalg.LinAlgError:
        raise RankDeficientError("D_XX is singular: covariates are collinear") from None
    if np.linalg.cond(dxx) > 1e12:
        raise RankDeficientError("D_XX is numerically singular: covariates are collinear")
    amat = np.hstack([-proj.T, np.eye(m)])
    return ProjectedKernel(dmat, amat, m, u)


def spectrum(pk: ProjectedKernel | np.ndarray, rel_tol: float = EIGEN_REL_TOL) -> Spectrum:
    """Eigenvalues of A D A' (or of a given symmetric matrix), descending,
    dropping those below ``rel_tol`` times the largest."""
    cov = pk.covariance() if isinstance(pk, ProjectedKernel) else np.asarray(pk, dtype=float)
    lam = np.linalg.eigvalsh(0.5 * (cov + cov.T))[::-1]
    if lam.size == 0 or lam[0] <= 0:
        raise DegenerateSpectrumError("all eigenvalues are non-positive; kernel is degenerate")
    return Spectrum(lam[lam >= rel_tol * lam[0]].copy())


def _lambdas(spec):
    return spec.lambdas if isinstance(spec, Spectrum) else np.asarray(spec, dtype=float)


def pvalue_satterthwaite(spec: Spectrum, q_obs: float) -> float:
    """Match mean and variance with kappa * chi2_nu."""
    lam = _lambdas(spec)
    mean = float(np.sum(lam))
    var = 2.0 * float(np.sum(lam**2))
    if mean <= 0 or var <= 0:
        raise DegenerateSpectrumError("scaled chi-square needs positive mean and variance")
    kappa = var / (2.0 * mean)
    nu = 2.0 * mean**2 / var
    return float(stats.chi2.sf(q_obs / kappa, nu))


def pvalue_davies(spec: Spectrum, q_obs: float, accuracy: float = DAVIES_ACCURACY,
                  lim: int = DAVIES_LIMIT) -> float:
    """P(sum lambda_l chi2_1 > q_obs) by characteristic-function inversion.

    Raises :class:`DaviesError` when the requested accuracy is not reached.
    """
    lam = _lambdas(spec)
    if lam.size == 0:
        raise DegenerateSpectrumError("empty spectrum")
    cdf, ifault, _ = qf(lam, q_obs, lim=lim, acc=accuracy)
    if ifault in (1, 3, 4) or not np.isfinite(cdf):
        raise DaviesError(f"Davies inversion failed (ifault={ifault})")
    return float(min(1.0, max(PVALUE_FLOOR, 1.0 - cdf)))


def pvalue_davies_or_fallback(spec: Spectrum, q_obs: float, accuracy: float = DAVIES_ACCURACY):
    """Returns ``(p, fell_back)``; on inversion failure uses the scaled chi-square."""
    try:
        return pvalue_davies(spec, q_obs, accuracy), False
    except DaviesError as exc:
        warnings.warn(f"{exc}; using scaled chi-square instead", DaviesFallbackWarning, stacklevel=2)
        return pvalue_satterthwaite(spec, q_obs), True


def standard_normal_noise(b: int, n: int, seed) -> np.ndarray:
    """The B x n multiplier matrix shared by every statistic of one analysis."""
    return np.random.default_rng(seed).standard_normal((b, n))


def perturbation_null_draws(pk: ProjectedKernel, d: Dataset, nf: NullFit, noise) -> np.ndarray:
    """Q(0) draws: eps_b = n^-1/2 sum_i U_i (y_i - mu_i) N_bi, draw = ||A eps_b||^2."""
    noise = np.asarray(noise, dtype=float)
    if noise.ndim != 2 or noise.shape[1] != d.n:
        raise ValueError(f"noise must be B x {d.n}")
    resid = d.y - nf.mu0
    contrib = pk.u_mat * resid[:, None]
    proj = contrib @ pk.a_mat.T / np.sqrt(d.n)
    z = noise @ proj
    return np.einsum("ij,ij->i", z, z)


def pvalue_perturbation(draws, q_obs: float) -> float:
    """Add-one tail frequency (1 + #{draws >= q_obs}) / (B + 1)."""
    draws = np.asarray(draws, dtype=float)
    if draws.size < 1:
        raise ValueError("need at least one draw")
    return (1.0 + float(np.count_nonzero(draws >= q_obs))) / (draws.size + 1.0)
