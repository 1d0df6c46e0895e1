"""Scores, variance-based weights and the quadratic statistics Q_S, Q_SG, Q_SGC.

With residuals r = y - mu0 the statistic is

    n * Q = a1 * r'SS'r + a2 * (G'r)^2 + a3 * r'CC'r = r' V V' r,

where V stacks sqrt(a1) S, sqrt(a2) G and sqrt(a3) C column-wise; variants
drop the blocks they do not test.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .datamodel import Dataset, InteractionMatrix
from .errors import WeightingError
from .glm import NullFit


class StatVariant(str, enum.Enum):
    S = "s"
    SG = "sg"
    SGC = "sgc"
    DE = "de"
    IE = "ie"

    @property
    def blocks(self) -> tuple[str, ...]:
        return _BLOCKS[self]


_BLOCKS = {
    StatVariant.S: ("s",),
    StatVariant.SG: ("s", "g"),
    StatVariant.SGC: ("s", "g", "c"),
    StatVariant.DE: ("s", "c"),
    StatVariant.IE: ("g", "c"),
}


class Weighting(str, enum.Enum):
    WEIGHTED = "weighted"
    UNWEIGHTED = "unweighted"


@dataclass(frozen=True)
class ScoreComponents:
    u_tau_s: float
    u_beta_g: float
    u_tau_i: float
    i_tau_s: float
    i_g: float
    i_tau_i: float


@dataclass(frozen=True)
class Weights:
    a1: float
    a2: float
    a3: float
    mode: Weighting

    def of(self, block: str) -> float:
        return {"s": self.a1, "g": self.a2, "c": self.a3}[block]


UNWEIGHTED = Weights(1.0, 1.0, 1.0, Weighting.UNWEIGHTED)


def _check_mu(mu):
    mu = np.asarray(mu, dtype=float)
    if np.any(mu <= 0) or np.any(mu >= 1):
        raise ValueError("fitted means must lie strictly inside (0, 1)")
    return mu


def k_diagonal(mu):
    """Fourth central moment minus squared variance of a Bernoulli(mu) residual."""
    mu = _check_mu(mu)
    return -4 * mu**4 + 8 * mu**3 - 5 * mu**2 + mu


def k_matrix(mu) -> np.ndarray:
    """The n x n matrix K: diagonal from :func:`k_diagonal`, off-diagonal
    ``2 * v_i * v_j`` with ``v = mu (1 - mu)``."""
    mu = _check_mu(mu)
    v = mu * (1 - mu)
    k = 2.0 * np.outer(v, v)
    np.fill_diagonal(k, k_diagonal(mu))
    return k


def variance_term(z, mu) -> float:
    """``1'(ZZ' o K o ZZ')1`` without forming any n x n matrix.

    Uses ``sum_ij (z_i.z_j)^2 v_i v_j = ||Z' diag(v) Z||_F^2`` and corrects the
    diagonal, so the cost is O(n k^2) for an n x k matrix Z.
    """
    z = np.asarray(z, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    mu = _check_mu(mu)
    v = mu * (1 - mu)
    gram = (z * v[:, None]).T @ z
    row_sq = np.einsum("ij,ij->i", z, z) ** 2
    total = 2.0 * float(np.sum(gram * gram)) + float(row_sq @ (k_diagonal(mu) - 2.0 * v * v))
    return max(total, 0.0)


def score_components(d: Dataset, c: InteractionMatrix, nf: NullFit) -> ScoreComponents:
    if not nf.converged:
        raise ValueError(f"null fit did not converge: {nf.message}")
    mu = nf.mu0
    r = d.y - mu
    st_r = d.s.T @ r
    ct_r = c.c.T @ r
    return ScoreComponents(
        u_tau_s=float(st_r @ st_r),
        u_beta_g=float(d.g @ r),
        u_tau_i=float(ct_r @ ct_r),
        i_tau_s=variance_term(d.s, mu),
        # constant expression has an identically zero score; treat as no information
        i_g=0.0 if np.ptp(d.g) == 0 else variance_term(d.g, mu),
        i_tau_i=variance_term(c.c, mu),
    )


def compute_weights(sc: ScoreComponents, mode: Weighting | str = Weighting.WEIGHTED) -> Weights:
    """Weights that give each score term unit variance relative to the SNP term.

    Weighted mode: a1 = 1, a2 = (I_G / I_tauS)^-1/2, a3 = (I_tauI / I_tauS)^-1/2.
    """
    mode = Weighting(mode)
    if mode is Weighting.UNWEIGHTED:
        return UNWEIGHTED
    if sc.i_tau_s <= 0:
        raise WeightingError("I_tauS is zero so weights are undefined; use unweighted mode")
    if sc.i_g <= 0:
        raise WeightingError("I_G is zero (constant expression?); use unweighted mode")
    if sc.i_tau_i <= 0:
        raise WeightingError("I_tauI is zero so weights are undefined; use unweighted mode")
    return Weights(
        1.0,
        float(np.sqrt(sc.i_tau_s / sc.i_g)),
        float(np.sqrt(sc.i_tau_s / sc.i_tau_i)),
        Weighting.WEIGHTED,
    )


def q_statistic(sc: ScoreComponents, w: Weights, v: StatVariant | str, n: int) -> float:
    v = StatVariant(v)
    if w.mode is Weighting.WEIGHTED and sc.i_tau_s <= 0:
        raise WeightingError("weighted statistic requested but I_tauS = 0; use unweighted mode")
    terms = {"s": w.a1 * sc.u_tau_s, "g": w.a2 * sc.u_beta_g**2, "c": w.a3 * sc.u_tau_i}
    return sum(terms[b] for b in v.blocks) / n


def kernel_columns(d: Dataset, c: InteractionMatrix, w: Weights, v: StatVariant | str) -> np.ndarray:
    """The n x m matrix V whose columns span the tested kernel."""
    blocks = {"s": d.s, "g": d.g[:, None], "c": c.c}
    v = StatVariant(v)
    return np.column_stack([np.sqrt(w.of(b)) * blocks[b] for b in v.blocks])
