"""Per-subject data containers, validation and delimited-text ingestion.

A :class:`Dataset` holds the aligned arrays of one SNP-set / expression pair:
binary outcome ``y`` (n), genotype dosages ``s`` (n x p), expression ``g`` (n)
and covariates ``x`` (n x q, first column the intercept).
"""

from __future__ import annotations

import enum
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataValidationError, DimensionMismatchError, InvalidDosageError

MISSING_TOKENS = frozenset({"", "na", "nan", ".", "?"})
_SPLIT = re.compile(r"[,\s]+")


class MonomorphicSNPWarning(UserWarning):
    """A genotype column is constant; it is kept and contributes nothing."""


class GenotypeCoding(str, enum.Enum):
    ADDITIVE = "additive"
    DOMINANT = "dominant"


def _frozen(a, dtype=np.float64, ndim=1):
    arr = np.array(a, dtype=dtype, copy=True)
    if ndim == 2 and arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Dataset:
    """Aligned outcome, genotypes, expression and covariates for n subjects.

    Arrays are copied and made read-only on construction.
    ``imputed`` marks genotype matrices that went through mean imputation and
    may therefore hold fractional dosages in [0, 2].
    """

    y: np.ndarray
    s: np.ndarray
    g: np.ndarray
    x: np.ndarray | None = None
    snp_ids: tuple[str, ...] | None = None
    imputed: bool = False

    def __post_init__(self):
        y = _frozen(self.y)
        s = _frozen(self.s, ndim=2)
        g = _frozen(self.g)
        n = y.shape[0]
        x = np.ones((n, 1)) if self.x is None else self.x
        x = _frozen(x, ndim=2)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "x", x)
        if self.snp_ids is not None:
            object.__setattr__(self, "snp_ids", tuple(str(v) for v in self.snp_ids))
        self._validate()

    def _validate(self):
        y, s, g, x = self.y, self.s, self.g, self.x
        if y.ndim != 1 or g.ndim != 1 or s.ndim != 2 or x.ndim != 2:
            raise DimensionMismatchError("y and g must be vectors, s and x matrices")
        n = y.shape[0]
        if n < 1:
            raise DimensionMismatchError("dataset has no subjects")
        if s.shape[0] != n or g.shape[0] != n or x.shape[0] != n:
            raise DimensionMismatchError(
                f"row counts disagree: y={n}, s={s.shape[0]}, g={g.shape[0]}, x={x.shape[0]}"
            )
        if s.shape[1] < 1 or x.shape[1] < 1:
            raise DimensionMismatchError("need at least one SNP and one covariate column")
        if self.snp_ids is not None and len(self.snp_ids) != s.shape[1]:
            raise DimensionMismatchError("snp_ids length differs from number of SNP columns")
        if not np.all((y == 0) | (y == 1)):
            raise DataValidationError("phenotype must be coded 0/1")
        if y.min() == y.max():
            raise DataValidationError("outcome has a single class; null model is degenerate")
        if not np.all(np.isfinite(s)):
            raise InvalidDosageError("invalid dosage: missing genotype values")
        if self.imputed:
            bad = (s < 0) | (s > 2)
        else:
            bad = ~np.isin(s, (0.0, 1.0, 2.0))
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise InvalidDosageError(f"invalid dosage {s[i, j]!r} at row {i}, column {j}")
        if not np.all(np.isfinite(g)):
            raise DataValidationError("expression contains NaN or infinite values")
        if not np.all(np.isfinite(x)):
            raise DataValidationError("covariates contain NaN or infinite values")
        if not np.all(x[:, 0] == 1.0):
            raise DataValidationError("covariate column 0 must be the all-ones intercept")
        constant = np.flatnonzero(np.ptp(s, axis=0) == 0)
        if constant.size:
            warnings.warn(
                f"monomorphic SNP columns kept: {constant.tolist()}",
                MonomorphicSNPWarning,
                stacklevel=3,
            )

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return self.s.shape[1]

    @property
    def q(self) -> int:
        return self.x.shape[1]

    def recoded(self, coding: GenotypeCoding | str) -> Dataset:
        coding = GenotypeCoding(coding)
        if coding is GenotypeCoding.ADDITIVE:
            return self
        return Dataset(
            self.y, dominant(self.s), self.g, self.x, snp_ids=self.snp_ids, imputed=self.imputed
        )


@dataclass(frozen=True, eq=False)
class InteractionMatrix:
    """SNP-by-expression products; row i is ``g[i] * s[i, :]``."""

    c: np.ndarray = field(repr=False)


def dominant(s: np.ndarray) -> np.ndarray:
    """Map dosage d to min(d, 1). Idempotent."""
    return np.minimum(np.asarray(s, dtype=np.float64), 1.0)


def interaction_matrix(d: Dataset) -> InteractionMatrix:
    c = d.g[:, None] * d.s
    c.setflags(write=False)
    return InteractionMatrix(c)


# -- file ingestion ---------------------------------------------------------


def _is_number(tok: str) -> bool:
    if tok.lower() in MISSING_TOKENS:
        return True
    try:
        float(tok)
    except ValueError:
        return False
    return True


def _read_table(path, what: str):
    """Return (header or None, list of token rows)."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            rows.append([t for t in _SPLIT.split(line) if t != ""])
    if not rows:
        raise DataValidationError(f"{what} file {path} is empty")
    header = None
    if not all(_is_number(t) for t in rows[0]):
        header, rows = rows[0], rows[1:]
    widths = {len(r) for r in rows}
    if len(widths) > 1:
        raise DimensionMismatchError(f"{what} file {path} has ragged rows")
    return header, rows


def _to_float(rows, what: str, allow_missing: bool = False) -> np.ndarray:
    out = np.empty((len(rows), len(rows[0]) if rows else 0))
    for i, row in enumerate(rows):
        for j, tok in enumerate(row):
            if tok.lower() in MISSING_TOKENS:
                if not allow_missing:
                    raise DataValidationError(f"{what}: missing value at row {i}, column {j}")
                out[i, j] = np.nan
            else:
                try:
                    out[i, j] = float(tok)
                except ValueError:
                    raise DataValidationError(f"{what}: non-numeric token {tok!r} at row {i}") from None
    return out


def _column(path, what: str) -> np.ndarray:
    _, rows = _read_table(path, what)
    arr = _to_float(rows, what)
    if arr.shape[1] != 1:
        raise DimensionMismatchError(f"{what} file must have exactly one value per row")
    return arr[:, 0]


def read_genotypes(path, impute_missing: bool = False):
    """Read an n x p dosage table. Returns (matrix, snp_ids or None, imputed flag)."""
    header, rows = _read_table(path, "genotype")
    s = _to_float(rows, "genotype", allow_missing=True)
    if header is not None and len(header) != s.shape[1]:
        raise DimensionMismatchError("genotype header width differs from data width")
    missing = np.isnan(s)
    imputed = False
    if missing.any():
        if not impute_missing:
            i, j = np.argwhere(missing)[0]
            raise InvalidDosageError(
                f"invalid dosage: missing genotype at row {i}, column {j} (enable mean imputation)"
            )
        observed = np.where(missing, 0.0, s)
        counts = (~missing).sum(axis=0)
        if np.any(counts == 0):
            raise InvalidDosageError("invalid dosage: a SNP column is entirely missing")
        _check_dosages(observed[~missing])
        means = observed.sum(axis=0) / counts
        s = np.where(missing, means[None, :], s)
        imputed = True
    else:
        _check_dosages(s)
    return s, (tuple(header) if header else None), imputed


def _check_dosages(values):
    bad = ~np.isin(values, (0.0, 1.0, 2.0))
    if np.any(bad):
        raise InvalidDosageError(f"invalid dosage {np.asarray(values)[bad].flat[0]!r}")


def load_dataset(
    genotype_path,
    expression_path,
    phenotype_path,
    covariate_path=None,
    coding: GenotypeCoding | str = GenotypeCoding.ADDITIVE,
    impute_missing: bool = False,
) -> Dataset:
    """Read and validate the four delimited text files of one analysis pair.

    The intercept column is prepended to the covariates; without a covariate
    file ``x`` is the n x 1 column of ones. Dominant coding is applied after
    reading.
    """
    s, snp_ids, imputed = read_genotypes(genotype_path, impute_missing=impute_missing)
    g = _column(expression_path, "expression")
    y = _column(phenotype_path, "phenotype")
    n = y.shape[0]
    if covariate_path is not None:
        _, rows = _read_table(covariate_path, "covariate")
        cov = _to_float(rows, "covariate")
        if cov.shape[0] != n:
            raise DimensionMismatchError(f"covariate rows {cov.shape[0]} != phenotype rows {n}")
        x = np.column_stack([np.ones(n), cov])
    else:
        x = None
    if s.shape[0] != n or g.shape[0] != n:
        raise DimensionMismatchError(
            f"row counts disagree: genotypes={s.shape[0]}, expression={g.shape[0]}, phenotype={n}"
        )
    if GenotypeCoding(coding) is GenotypeCoding.DOMINANT:
        s = dominant(s)
    return Dataset(y, s, g, x, snp_ids=snp_ids, imputed=imputed)


def _fmt(v: float) -> str:
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def write_dataset(d: Dataset, directory, prefix: str = "") -> dict[str, Path]:
    """Write ``d`` in the text format read by :func:`load_dataset`.

    Values are written with ``repr`` so a reload reproduces every float exactly.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {
        "genotypes": directory / f"{prefix}genotypes.txt",
        "expression": directory / f"{prefix}expression.txt",
        "phenotype": directory / f"{prefix}phenotype.txt",
    }
    with open(paths["genotypes"], "w") as fh:
        if d.snp_ids is not None:
            fh.write(" ".join(d.snp_ids) + "\n")
        for row in d.s:
            fh.write(" ".join(_fmt(v) for v in row) + "\n")
    paths["expression"].write_text("".join(repr(float(v)) + "\n" for v in d.g))
    paths["phenotype"].write_text("".join(_fmt(v) + "\n" for v in d.y))
    if d.q > 1:
        paths["covariates"] = directory / f"{prefix}covariates.txt"
        with open(paths["covariates"], "w") as fh:
            for row in d.x[:, 1:]:
                fh.write(" ".join(repr(float(v)) for v in row) + "\n")
    return paths
