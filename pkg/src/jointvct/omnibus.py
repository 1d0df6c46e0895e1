"""Test orchestration: single-variant tests, the min-p omnibus test, and the
direct / indirect effect tests.

Every statistic of one analysis is perturbed with the same B x n matrix of
standard normal multipliers, so the joint null law of the three statistics is
preserved and the minimum p-value can be calibrated against its replicates.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .datamodel import Dataset, interaction_matrix
from .errors import RankDeficientError
from .glm import NullFit, fit_null_logistic
from .nulldist import (
    perturbation_null_draws,
    projected_kernel,
    pvalue_davies_or_fallback,
    pvalue_perturbation,
    pvalue_satterthwaite,
    spectrum,
    standard_normal_noise,
)
from .vctest import (
    UNWEIGHTED,
    StatVariant,
    Weighting,
    compute_weights,
    q_statistic,
    score_components,
)

DEFAULT_B = 1000
RIDGE_SCALE = 1e-4


class Engine(str, enum.Enum):
    SATTERTHWAITE = "satterthwaite"
    DAVIES = "davies"
    PERTURBATION = "perturbation"
    ALL = "all"

    def expand(self) -> tuple[Engine, ...]:
        if self is Engine.ALL:
            return (Engine.SATTERTHWAITE, Engine.DAVIES, Engine.PERTURBATION)
        return (self,)


@dataclass(frozen=True, eq=False)
class TestResult:
    statistic: float
    variant: StatVariant
    weighting: Weighting
    pvalues: dict
    lambdas: np.ndarray
    weights: tuple = (1.0, 1.0, 1.0)
    b: int | None = None
    davies_fallback: bool = False
    draws: np.ndarray | None = field(default=None, repr=False)

    __test__ = False  # not a pytest class


@dataclass(frozen=True, eq=False)
class OmnibusResult:
    p_s: float
    p_sg: float
    p_sgc: float
    p_min_observed: float
    p_omnibus: float
    b: int
    per_variant: tuple


def _engines(engine) -> tuple[Engine, ...]:
    if isinstance(engine, (list, tuple)):
        return tuple(Engine(e) for e in engine)
    return Engine(engine).expand()


def _noise(d: Dataset, b: int, seed, noise):
    if noise is not None:
        return np.asarray(noise, dtype=float)
    if seed is None:
        raise ValueError("perturbation needs a seed or an explicit noise matrix")
    return standard_normal_noise(b, d.n, seed)


def _evaluate(d, c, nf, sc, w, variant, engines, noise) -> TestResult:
    q = q_statistic(sc, w, variant, d.n)
    pk = projected_kernel(d, c, nf, w, variant)
    spec = spectrum(pk)
    pvals = {}
    fell_back = False
    draws = None
    for e in engines:
        if e is Engine.SATTERTHWAITE:
            pvals[e.value] = pvalue_satterthwaite(spec, q)
        elif e is Engine.DAVIES:
            pvals[e.value], fell_back = pvalue_davies_or_fallback(spec, q)
        elif e is Engine.PERTURBATION:
            draws = perturbation_null_draws(pk, d, nf, noise)
            pvals[e.value] = pvalue_perturbation(draws, q)
    return TestResult(
        statistic=q,
        variant=StatVariant(variant),
        weighting=w.mode,
        pvalues=pvals,
        lambdas=spec.lambdas,
        weights=(w.a1, w.a2, w.a3),
        b=None if draws is None else int(draws.shape[0]),
        davies_fallback=fell_back,
        draws=draws,
    )


def _weights_for(sc, variant, weighting):
    # Q_S only uses a1 = 1, identical in both modes
    if StatVariant(variant) is StatVariant.S:
        return UNWEIGHTED
    return compute_weights(sc, weighting)


def total_effect_test(d: Dataset, variant="sgc", weighting="weighted", engine="davies",
                      b: int = DEFAULT_B, seed=None, noise=None) -> TestResult:
    """Test H0: beta_S = 0, beta_G = 0, gamma = 0 with Q_S, Q_SG or Q_SGC."""
    variant = StatVariant(variant)
    if variant in (StatVariant.DE, StatVariant.IE):
        fn = direct_effect_test if variant is StatVariant.DE else indirect_effect_test
        return fn(d, weighting, engine, b=b, seed=seed, noise=noise)
    engines = _engines(engine)
    c = interaction_matrix(d)
    nf = fit_null_logistic(d)
    sc = score_components(d, c, nf)
    w = _weights_for(sc, variant, weighting)
    nz = _noise(d, b, seed, noise) if Engine.PERTURBATION in engines else None
    return _evaluate(d, c, nf, sc, w, variant, engines, nz)


def survival_at_draws(draws) -> np.ndarray:
    """Leave-self-in empirical survival of each draw: #{b' : x_b' >= x_b} / B."""
    draws = np.asarray(draws, dtype=float)
    srt = np.sort(draws)
    return (draws.size - np.searchsorted(srt, draws, side="left")) / draws.size


def omnibus_pvalue(observed_p, replicate_p) -> tuple[float, float]:
    """Calibrate the observed minimum p-value against replicate minima.

    ``observed_p`` has one entry per statistic; ``replicate_p`` is B x k.
    Returns ``(p_min_observed, p_omnibus)``.
    """
    p_min = float(np.min(observed_p))
    rep_min = np.min(np.asarray(replicate_p), axis=1)
    return p_min, (1.0 + float(np.count_nonzero(rep_min <= p_min))) / (rep_min.size + 1.0)


def _omnibus_from(results) -> tuple[float, float]:
    obs = [r.pvalues[Engine.PERTURBATION.value] for r in results]
    reps = np.column_stack([survival_at_draws(r.draws) for r in results])
    return omnibus_pvalue(obs, reps)


def omnibus_test(d: Dataset, b: int = DEFAULT_B, seed=None, weighting="weighted",
                 noise=None, engine="all") -> OmnibusResult:
    """Min-p combination of Q_S, Q_SG and Q_SGC calibrated by shared-noise perturbation.

    The component p-values entering the minimum are always the perturbation
    ones; ``engine`` only controls which extra analytic p-values are reported
    in ``per_variant``.
    """
    engines = tuple(dict.fromkeys(_engines(engine) + (Engine.PERTURBATION,)))
    nz = _noise(d, b, seed, noise)
    c = interaction_matrix(d)
    nf = fit_null_logistic(d)
    sc = score_components(d, c, nf)
    w = compute_weights(sc, weighting)
    results = tuple(
        _evaluate(d, c, nf, sc, UNWEIGHTED if v is StatVariant.S else w, v, engines, nz)
        for v in (StatVariant.S, StatVariant.SG, StatVariant.SGC)
    )
    p_min, p_omni = _omnibus_from(results)
    p_s, p_sg, p_sgc = (r.pvalues[Engine.PERTURBATION.value] for r in results)
    return OmnibusResult(p_s, p_sg, p_sgc, p_min, p_omni, int(nz.shape[0]), results)


def _effect_null(d: Dataset, extra, ridge) -> NullFit:
    if ridge == "auto":
        try:
            return fit_null_logistic(d, extra)
        except RankDeficientError:
            ridge = RIDGE_SCALE * d.n
    return fit_null_logistic(d, extra, ridge=ridge)


def _effect_test(d, extra, variant, weighting, engine, b, seed, noise, ridge) -> TestResult:
    engines = _engines(engine)
    c = interaction_matrix(d)
    nf = _effect_null(d, extra, ridge)
    if not nf.converged:
        raise RankDeficientError(f"effect null model failed: {nf.message}")
    sc = score_components(d, c, nf)
    w = compute_weights(sc, weighting)
    nz = _noise(d, b, seed, noise) if Engine.PERTURBATION in engines else None
    return _evaluate(d, c, nf, sc, w, variant, engines, nz)


def direct_effect_test(d: Dataset, weighting="weighted", engine="davies", b: int = DEFAULT_B,
                       seed=None, noise=None, ridge="auto") -> TestResult:
    """Q_DE = n^-1 (a1 U_tauS + a3 U_tauI) for H0: beta_S = 0, gamma = 0.

    The null model is logistic on [X | G]; weights are recomputed under it.
    """
    return _effect_test(d, d.g[:, None], StatVariant.DE, weighting, engine, b, seed, noise, ridge)


def indirect_effect_test(d: Dataset, weighting="weighted", engine="davies", b: int = DEFAULT_B,
                         seed=None, noise=None, ridge="auto") -> TestResult:
    """Q_IE = n^-1 (a2 U_betaG^2 + a3 U_tauI) for H0: beta_G = 0, gamma = 0.

    The null model is logistic on [X | S], ridge-penalized (lambda = 1e-4 n)
    when S is collinear.
    """
    return _effect_test(d, d.s, StatVariant.IE, weighting, engine, b, seed, noise, ridge)


# Keys of the battery run per simulated replicate.
BATTERY = (
    ("S", StatVariant.S, Weighting.UNWEIGHTED),
    ("SG-w", StatVariant.SG, Weighting.WEIGHTED),
    ("SG-u", StatVariant.SG, Weighting.UNWEIGHTED),
    ("SGC-w", StatVariant.SGC, Weighting.WEIGHTED),
    ("SGC-u", StatVariant.SGC, Weighting.UNWEIGHTED),
)


def battery_pvalues(d: Dataset, b: int, seed=None, engines=("satterthwaite", "davies", "perturbation"),
                    noise=None) -> dict:
    """All total-effect tests on one dataset from a single null fit.

    Returns ``{"S:davies": p, "SG-w:perturbation": p, ..., "omnibus": p}``;
    the omnibus entry is present when perturbation is among ``engines`` and
    combines S, SG-w and SGC-w from the same draws as their own p-values.
    """
    engines = _engines(list(engines))
    c = interaction_matrix(d)
    nf = fit_null_logistic(d)
    sc = score_components(d, c, nf)
    ws = {Weighting.UNWEIGHTED: UNWEIGHTED, Weighting.WEIGHTED: compute_weights(sc, "weighted")}
    nz = _noise(d, b, seed, noise) if Engine.PERTURBATION in engines else None
    out = {}
    results = {}
    for key, v, mode in BATTERY:
        res = _evaluate(d, c, nf, sc, ws[mode], v, engines, nz)
        results[key] = res
        for e, p in res.pvalues.items():
            out[f"{key}:{e}"] = p
    if nz is not None:
        out["omnibus"] = _omnibus_from([results["S"], results["SG-w"], results["SGC-w"]])[1]
    return out
