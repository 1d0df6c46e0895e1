"""Case-control simulation: correlated genotypes, expression and outcomes,
plus size / power experiments over a grid of generative models.

Genotypes come either from a haplotype pool (two haplotypes drawn with
replacement per subject) or from thresholded AR(1) latent Gaussians. The
bundled pool has 120 haplotypes over 99 loci with block-wise decaying LD;
10 loci are typed.
"""

from __future__ import annotations

import enum
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import stats

from .datamodel import Dataset, MonomorphicSNPWarning
from .errors import DataValidationError, InsufficientSamplesError
from .glm import expit

WORKERS_ENV = "JOINTVCT_WORKERS"

BUNDLED_POOL_FILE = "haplotype_pool.txt"
BUNDLED_TYPED = (4, 16, 33, 40, 50, 58, 66, 74, 85, 93)
BUNDLED_CAUSAL = (20,)
BUNDLED_BLOCKS = (14, 22, 9, 19, 13, 22)


# -- LD models --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class HaplotypePool:
    haplotypes: np.ndarray
    typed_indices: tuple
    causal_indices: tuple

    def __post_init__(self):
        h = np.asarray(self.haplotypes, dtype=np.int8)
        if h.ndim != 2 or not np.all((h == 0) | (h == 1)):
            raise DataValidationError("haplotypes must be a binary H x L matrix")
        object.__setattr__(self, "haplotypes", h)
        _check_indices(self.typed_indices, self.causal_indices, h.shape[1])
        object.__setattr__(self, "typed_indices", tuple(int(i) for i in self.typed_indices))
        object.__setattr__(self, "causal_indices", tuple(int(i) for i in self.causal_indices))

    @property
    def n_loci(self) -> int:
        return self.haplotypes.shape[1]

    def allele_frequencies(self) -> np.ndarray:
        return self.haplotypes.mean(axis=0)

    def genotypes(self, n: int, rng) -> np.ndarray:
        pick = rng.integers(0, self.haplotypes.shape[0], size=(n, 2))
        return (self.haplotypes[pick[:, 0]] + self.haplotypes[pick[:, 1]]).astype(np.float64)


@dataclass(frozen=True, eq=False)
class LatentGaussian:
    rho: float
    mafs: np.ndarray
    typed_indices: tuple
    causal_indices: tuple

    def __post_init__(self):
        mafs = np.asarray(self.mafs, dtype=float)
        if not -1 < self.rho < 1:
            raise DataValidationError("rho must lie in (-1, 1)")
        if np.any(mafs <= 0) or np.any(mafs > 0.5):
            raise DataValidationError("minor allele frequencies must lie in (0, 0.5]")
        object.__setattr__(self, "mafs", mafs)
        _check_indices(self.typed_indices, self.causal_indices, mafs.shape[0])
        object.__setattr__(self, "typed_indices", tuple(int(i) for i in self.typed_indices))
        object.__setattr__(self, "causal_indices", tuple(int(i) for i in self.causal_indices))

    @property
    def n_loci(self) -> int:
        return self.mafs.shape[0]

    def _haplotype(self, n, rng):
        e = rng.standard_normal((n, self.n_loci))
        z = np.empty_like(e)
        z[:, 0] = e[:, 0]
        scale = np.sqrt(1.0 - self.rho**2)
        for j in range(1, self.n_loci):
            z[:, j] = self.rho * z[:, j - 1] + scale * e[:, j]
        return (z < stats.norm.ppf(self.mafs)[None, :]).astype(np.float64)

    def genotypes(self, n: int, rng) -> np.ndarray:
        return self._haplotype(n, rng) + self._haplotype(n, rng)


def _check_indices(typed, causal, n_loci):
    for name, idx in (("typed", typed), ("causal", causal)):
        idx = list(idx)
        if not idx:
            raise DataValidationError(f"{name} index list is empty")
        if min(idx) < 0 or max(idx) >= n_loci:
            raise DataValidationError(f"{name} indices out of range 0..{n_loci - 1}")


def read_haplotype_pool(path, typed_indices, causal_indices) -> HaplotypePool:
    """Pool file: header ``H L`` then H lines of L space-separated bits."""
    with open(path) as fh:
        lines = [ln.split() for ln in fh if ln.strip()]
    h, l = (int(v) for v in lines[0])
    rows = lines[1:]
    if len(rows) != h or any(len(r) != l for r in rows):
        raise DataValidationError(f"haplotype pool {path} does not match its header {h} x {l}")
    return HaplotypePool(np.array(rows, dtype=np.int8), typed_indices, causal_indices)


def write_haplotype_pool(pool: HaplotypePool, path) -> None:
    h, l = pool.haplotypes.shape
    with open(path, "w") as fh:
        fh.write(f"{h} {l}\n")
        for row in pool.haplotypes:
            fh.write(" ".join(str(int(v)) for v in row) + "\n")


def bundled_pool(causal_indices=BUNDLED_CAUSAL, typed_indices=BUNDLED_TYPED) -> HaplotypePool:
    path = resources.files("jointvct") / "data" / BUNDLED_POOL_FILE
    with resources.as_file(path) as p:
        return read_haplotype_pool(p, typed_indices, causal_indices)


def make_haplotype_pool(seed: int = 17, n_haplotypes: int = 120, blocks=BUNDLED_BLOCKS,
                        n_founders=(3, 5), carry: float = 0.55, flip: float = 0.015,
                        min_maf: float = 0.05) -> np.ndarray:
    """Synthesize a block-structured haplotype pool (rows 0/1, 1 = minor allele).

    Inside a block each haplotype copies one of a few founder patterns with a
    small per-site flip rate, which gives strong within-block LD. Across
    blocks a haplotype keeps its founder lineage with probability ``carry``,
    so LD decays between neighbouring blocks.
    """
    rng = np.random.default_rng(seed)
    lineage = rng.integers(0, 1 << 16, size=n_haplotypes)
    out = []
    for size in blocks:
        k = int(rng.integers(n_founders[0], n_founders[1] + 1))
        while True:
            freq = rng.uniform(0.15, 0.6, size=size)
            founders = (rng.random((k, size)) < freq).astype(np.int8)
            keep = rng.random(n_haplotypes) < carry
            lineage = np.where(keep, lineage, rng.integers(0, 1 << 16, size=n_haplotypes))
            block = founders[lineage % k] ^ (rng.random((n_haplotypes, size)) < flip)
            af = block.mean(axis=0)
            if np.all((af >= min_maf) & (af <= 1 - min_maf)):
                break
        block = np.where(af > 0.5, 1 - block, block)
        out.append(block.astype(np.int8))
    return np.hstack(out)


# -- generative model -------------------------------------------------------


class Link(str, enum.Enum):
    LOGIT = "logit"
    PROBIT = "probit"
    POWER = "power"


class ExpressionNoise(str, enum.Enum):
    NORMAL = "normal"
    NORMAL_PLUS_UNIFORM = "normal_plus_uniform"


@dataclass(frozen=True)
class GenerativeModel:
    """Effect sizes per causal locus (scalars broadcast to every causal locus).

    ``link``: logit and probit use ``intercept_y + eta``; the power link uses
    logit P = -shift^exponent + (shift + eta)^exponent with no intercept.
    """

    beta_s: float | tuple = 0.0
    beta_g: float = 0.0
    gamma: float | tuple = 0.0
    delta: float | tuple = 1.0
    intercept_y: float = -0.2
    sigma2_g: float = 1.44
    link: Link = Link.LOGIT
    expression_noise: ExpressionNoise = ExpressionNoise.NORMAL
    power_exponent: float = 0.9
    power_shift: float = 100.0
    uniform_halfwidth: float = 0.3

    def __post_init__(self):
        object.__setattr__(self, "link", Link(self.link))
        object.__setattr__(self, "expression_noise", ExpressionNoise(self.expression_noise))
        if not self.sigma2_g > 0:
            raise DataValidationError("sigma2_g must be positive")

    def per_locus(self, name: str, k: int) -> np.ndarray:
        v = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
        if v.size == 1:
            return np.full(k, float(v[0]))
        if v.size != k:
            raise DataValidationError(f"{name} has {v.size} values for {k} causal loci")
        return v

    def expression(self, causal: np.ndarray, rng) -> np.ndarray:
        k = causal.shape[1]
        eps = rng.normal(0.0, np.sqrt(self.sigma2_g), size=causal.shape[0])
        if self.expression_noise is ExpressionNoise.NORMAL_PLUS_UNIFORM:
            eps = eps + rng.uniform(-self.uniform_halfwidth, self.uniform_halfwidth, size=eps.shape)
        return causal @ self.per_locus("delta", k) + eps

    def disease_probability(self, causal: np.ndarray, g: np.ndarray) -> np.ndarray:
        k = causal.shape[1]
        eta = (causal @ self.per_locus("beta_s", k) + self.beta_g * g
               + g * (causal @ self.per_locus("gamma", k)))
        if self.link is Link.LOGIT:
            return expit(self.intercept_y + eta)
        if self.link is Link.PROBIT:
            return stats.norm.cdf(self.intercept_y + eta)
        base = np.maximum(self.power_shift + eta, 0.0)
        return expit(-self.power_shift**self.power_exponent + base**self.power_exponent)


@dataclass(frozen=True, eq=False)
class Cohort:
    genotypes: np.ndarray
    g: np.ndarray
    y: np.ndarray
    typed_indices: tuple = field(default=())
    causal_indices: tuple = field(default=())


def generate_cohort(ld, gm: GenerativeModel, cohort_n: int, rng_seed) -> Cohort:
    rng = np.random.default_rng(rng_seed)
    geno = ld.genotypes(cohort_n, rng)
    causal = geno[:, list(ld.causal_indices)]
    g = gm.expression(causal, rng)
    prob = gm.disease_probability(causal, g)
    y = (rng.random(cohort_n) < prob).astype(np.float64)
    return Cohort(geno, g, y, ld.typed_indices, ld.causal_indices)


def sample_case_control(cohort: Cohort, n_cases: int, n_controls: int, rng_seed,
                        typed_indices=None) -> Dataset:
    """Sample cases and controls without replacement; keep the typed loci only."""
    rng = np.random.default_rng(rng_seed)
    cases = np.flatnonzero(cohort.y == 1)
    controls = np.flatnonzero(cohort.y == 0)
    if cases.size < n_cases or controls.size < n_controls:
        raise InsufficientSamplesError(
            f"cohort has {cases.size} cases / {controls.size} controls; "
            f"requested {n_cases} / {n_controls}"
        )
    rows = np.concatenate([rng.choice(cases, n_cases, replace=False),
                           rng.choice(controls, n_controls, replace=False)])
    typed = list(cohort.typed_indices if typed_indices is None else typed_indices)
    return Dataset(cohort.y[rows], cohort.genotypes[np.ix_(rows, typed)], cohort.g[rows])


# -- size / power experiments -----------------------------------------------


@dataclass(frozen=True)
class ExperimentRow:
    config: str
    test: str
    rejections: int
    replicates: int
    failures: int

    @property
    def rate(self) -> float:
        return self.rejections / self.replicates if self.replicates else float("nan")

    @property
    def se(self) -> float:
        r = self.rate
        return float(np.sqrt(r * (1 - r) / self.replicates)) if self.replicates else float("nan")


def replicate_seeds(seed: int, config_index: int, replicate: int):
    """Independent (cohort, sampling, noise) streams for one replicate."""
    return np.random.SeedSequence([seed, config_index, replicate]).spawn(3)


def simulate_dataset(ld, gm: GenerativeModel, seed: int, config_index: int = 0, replicate: int = 0,
                     cohort_n: int = 1000, n_cases: int = 100, n_controls: int = 100) -> Dataset:
    s_cohort, s_sample, _ = replicate_seeds(seed, config_index, replicate)
    cohort = generate_cohort(ld, gm, cohort_n, s_cohort)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MonomorphicSNPWarning)
        return sample_case_control(cohort, n_cases, n_controls, s_sample)


def _needed_engines(tests):
    eng = set()
    for t in tests:
        if t == "omnibus":
            eng.add("perturbation")
        else:
            eng.add(t.split(":")[1])
    return tuple(e for e in ("satterthwaite", "davies", "perturbation") if e in eng)


def _run_replicate(args):
    from .omnibus import battery_pvalues, direct_effect_test, indirect_effect_test

    ld, gm, seed, ci, rep, tests, b, cohort_n, n_cases, n_controls = args
    _, _, s_noise = replicate_seeds(seed, ci, rep)
    try:
        d = simulate_dataset(ld, gm, seed, ci, rep, cohort_n, n_cases, n_controls)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            battery_tests = [t for t in tests if not t.startswith(("DE:", "IE:"))]
            out = {}
            if battery_tests:
                out.update(battery_pvalues(d, b, seed=s_noise, engines=_needed_engines(battery_tests)))
            for t in tests:
                if t.startswith(("DE:", "IE:")):
                    name, engine = t.split(":")
                    fn = direct_effect_test if name == "DE" else indirect_effect_test
                    out[t] = fn(d, "weighted", engine, b=b, seed=s_noise).pvalues[engine]
        return {t: out[t] for t in tests}
    except Exception as exc:  # counted as a failure, never dropped silently
        return {"__error__": f"{type(exc).__name__}: {exc}"}


def worker_count(workers=None) -> int:
    if workers is not None:
        return max(1, int(workers))
    return max(1, int(os.environ.get(WORKERS_ENV, "1")))


def map_ordered(fn, items, workers=None):
    """Map in input order, optionally over a process pool."""
    items = list(items)
    workers = worker_count(workers)
    if workers == 1 or len(items) < 2:
        return [fn(it) for it in items]
    chunk = max(1, len(items) // (workers * 8))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=chunk))


def size_power_experiment(configs, replications: int, alpha: float, tests, seed: int,
                          ld=None, b: int = 500, cohort_n: int = 1000, n_cases: int = 100,
                          n_controls: int = 100, workers=None, return_pvalues: bool = False):
    """Empirical rejection rates for every (configuration, test) pair.

    ``configs`` maps a label to a :class:`GenerativeModel`. Test names follow
    ``"<S|SG-w|SG-u|SGC-w|SGC-u|DE|IE>:<engine>"`` or ``"omnibus"``. Replicates
    that raise are counted in ``failures`` and excluded from the denominator.
    """
    if replications < 100:
        raise ValueError("replications must be at least 100")
    ld = bundled_pool() if ld is None else ld
    tests = list(tests)
    configs = dict(configs)
    jobs = [(ld, gm, seed, ci, rep, tests, b, cohort_n, n_cases, n_controls)
            for ci, gm in enumerate(configs.values()) for rep in range(replications)]
    results = map_ordered(_run_replicate, jobs, workers)
    rows = []
    pvals = {}
    for ci, label in enumerate(configs):
        chunk = results[ci * replications:(ci + 1) * replications]
        ok = [r for r in chunk if "__error__" not in r]
        failures = len(chunk) - len(ok)
        for t in tests:
            ps = np.array([r[t] for r in ok])
            pvals[(label, t)] = ps
            rows.append(ExperimentRow(label, t, int(np.count_nonzero(ps <= alpha)), len(ok), failures))
    if return_pvalues:
        return rows, pvals
    return rows


def load_pool_or_bundled(path: str | Path | None, typed, causal):
    if path is None:
        return bundled_pool(causal_indices=causal or BUNDLED_CAUSAL,
                            typed_indices=typed or BUNDLED_TYPED)
    return read_haplotype_pool(path, typed, causal)
