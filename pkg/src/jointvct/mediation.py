"""Closed-form total, direct and indirect SNP effects on the log-odds scale,
and the SNP-only model induced by integrating out the expression residual.

All effect formulas assume a rare disease; results carry that flag.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .glm import MediationCoefficients

# Logistic-normal approximation constant: logit E[expit(a + b e)] ~ a / sqrt(1 + 0.35 b^2 var(e)).
ZEGER_CONSTANT = 0.35


@dataclass(frozen=True, eq=False)
class EffectDecomposition:
    te: float
    de: float
    ie: float
    s0: np.ndarray
    s1: np.ndarray
    x: np.ndarray
    rare_disease_approximation: bool = True


def _vectors(mc: MediationCoefficients, s0, s1, x):
    s0 = np.atleast_1d(np.asarray(s0, dtype=float))
    s1 = np.atleast_1d(np.asarray(s1, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    p, q = mc.beta_s.shape[0], mc.alpha.shape[0]
    if s0.shape != (p,) or s1.shape != (p,):
        raise ValueError(f"dosage contrasts must have length {p}")
    if x.shape != (q,):
        raise ValueError(f"covariate vector must have length {q}")
    return s0, s1, x


def direct_effect(mc: MediationCoefficients, s0, s1, x) -> float:
    s0, s1, x = _vectors(mc, s0, s1, x)
    ds = s1 - s0
    shift = x @ mc.phi + s0 @ mc.delta + mc.beta_g * mc.sigma2_g
    return float(ds @ (mc.beta_s + mc.gamma * shift)
                 + 0.5 * mc.sigma2_g * ((s1 + s0) @ mc.gamma) * (ds @ mc.gamma))


def indirect_effect(mc: MediationCoefficients, s0, s1, x) -> float:
    s0, s1, x = _vectors(mc, s0, s1, x)
    return float(((s1 - s0) @ mc.delta) * (mc.beta_g + s1 @ mc.gamma))


def total_effect(mc: MediationCoefficients, s0, s1, x) -> float:
    """Total effect evaluated directly, not as the sum of its parts."""
    s0, s1, x = _vectors(mc, s0, s1, x)
    ds = s1 - s0
    shift = x @ mc.phi + s0 @ mc.delta + mc.beta_g * mc.sigma2_g
    inner = mc.beta_s + mc.beta_g * mc.delta + mc.gamma * shift + mc.delta * (s1 @ mc.gamma)
    return float(ds @ inner + 0.5 * mc.sigma2_g * ((s1 + s0) @ mc.gamma) * (ds @ mc.gamma))


def effects(mc: MediationCoefficients, s0, s1, x=None) -> EffectDecomposition:
    """Decompose the effect of moving dosages from ``s0`` to ``s1``.

    ``x`` defaults to the sample covariate means recorded by the fit, or to
    the intercept-only reference (1, 0, ..., 0) for hand-built coefficients.
    """
    if x is None and mc.x_mean is not None:
        x = mc.x_mean
    elif x is None:
        x = np.zeros(mc.alpha.shape[0])
        x[0] = 1.0
    s0, s1, x = _vectors(mc, s0, s1, x)
    de = direct_effect(mc, s0, s1, x)
    ie = indirect_effect(mc, s0, s1, x)
    te = total_effect(mc, s0, s1, x)
    scale = max(1.0, abs(te), abs(de), abs(ie))
    if abs(te - (de + ie)) > 1e-12 * scale:
        raise ArithmeticError(f"TE {te!r} != DE + IE {de + ie!r}")
    return EffectDecomposition(te, de, ie, s0, s1, x)


def attenuation_factor(sigma2_g: float, slope: float) -> float:
    return float((1.0 + ZEGER_CONSTANT * sigma2_g * slope**2) ** -0.5)


def marginal_snp_coefficients(mc: MediationCoefficients):
    """Coefficients of the SNP-only logistic model implied by the full models.

    Returns ``(c, beta_star, alpha_star)`` with c = (1 + 0.35 sigma2_G beta_G^2)^-1/2,
    beta_star = c (beta_S + beta_G delta) and alpha_star = c (alpha + beta_G phi).
    Only valid without SNP-by-expression interaction.
    """
    if np.any(mc.gamma != 0):
        raise ValueError("marginal coefficients need gamma = 0; use marginal_snp_linpred")
    c = attenuation_factor(mc.sigma2_g, mc.beta_g)
    return c, c * (mc.beta_s + mc.beta_g * mc.delta), c * (mc.alpha + mc.beta_g * mc.phi)


def marginal_snp_linpred(mc: MediationCoefficients, s, x) -> float:
    """Induced logit P(Y=1 | S=s, X=x) allowing SNP-by-expression interaction."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    s_gamma = float(s @ mc.gamma)
    x_phi = float(x @ mc.phi)
    c_i = attenuation_factor(mc.sigma2_g, mc.beta_g + s_gamma)
    eta = (x @ (mc.alpha + mc.phi * mc.beta_g) + s @ (mc.beta_s + mc.delta * mc.beta_g)
           + x_phi * s_gamma + float(s @ mc.delta) * s_gamma)
    return float(c_i * eta)
