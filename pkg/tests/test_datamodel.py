import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from jointvct.datamodel import (
    Dataset,
    GenotypeCoding,
    MonomorphicSNPWarning,
    dominant,
    interaction_matrix,
    load_dataset,
    read_genotypes,
    write_dataset,
)
from jointvct.errors import DataValidationError, DimensionMismatchError, InvalidDosageError


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


@pytest.fixture
def minimal_files(tmp_path):
    geno = _write(tmp_path, "g.txt", "0 1\n2 0\n1 1\n0 2\n")
    expr = _write(tmp_path, "e.txt", "0.5\n-1.0\n2.25\n0\n")
    pheno = _write(tmp_path, "y.txt", "1\n1\n0\n0\n")
    return geno, expr, pheno


def test_minimal_load(minimal_files):
    d = load_dataset(*minimal_files)
    assert (d.n, d.p, d.q) == (4, 2, 1)
    assert np.all(d.x == 1.0)
    np.testing.assert_array_equal(d.y, [1, 1, 0, 0])


def test_invalid_dosage(tmp_path, minimal_files):
    _, expr, pheno = minimal_files
    geno = _write(tmp_path, "bad.txt", "0 1\n3 0\n1 1\n0 2\n")
    with pytest.raises(InvalidDosageError, match="invalid dosage"):
        load_dataset(geno, expr, pheno)


def test_dominant_coding(tmp_path):
    geno = _write(tmp_path, "g.txt", "0\n1\n2\n2\n")
    expr = _write(tmp_path, "e.txt", "1\n2\n3\n4\n")
    pheno = _write(tmp_path, "y.txt", "1\n0\n1\n0\n")
    d = load_dataset(geno, expr, pheno, coding=GenotypeCoding.DOMINANT)
    np.testing.assert_array_equal(d.s[:, 0], [0, 1, 1, 1])


def test_header_and_commas(tmp_path):
    geno = _write(tmp_path, "g.csv", "rs1,rs2\n0,1\n2,0\n1,1\n0,2\n")
    expr = _write(tmp_path, "e.txt", "1\n2\n3\n4\n")
    pheno = _write(tmp_path, "y.txt", "1\n0\n1\n0\n")
    cov = _write(tmp_path, "c.txt", "0.1 5\n0.2 6\n0.3 7\n0.5 9\n")
    d = load_dataset(geno, expr, pheno, cov)
    assert d.snp_ids == ("rs1", "rs2")
    assert d.q == 3
    np.testing.assert_array_equal(d.x[:, 0], 1.0)
    np.testing.assert_allclose(d.x[:, 2], [5, 6, 7, 9])


@pytest.mark.parametrize("pheno_text,err", [
    ("1\n1\n1\n1\n", DataValidationError),   # single class
    ("1\n2\n0\n0\n", DataValidationError),   # not binary
    ("1\n0\n1\n", DimensionMismatchError),
])
def test_phenotype_errors(tmp_path, minimal_files, pheno_text, err):
    geno, expr, _ = minimal_files
    pheno = _write(tmp_path, "yy.txt", pheno_text)
    with pytest.raises(err):
        load_dataset(geno, expr, pheno)


def test_nan_expression_rejected(tmp_path, minimal_files):
    geno, _, pheno = minimal_files
    expr = _write(tmp_path, "e2.txt", "1\nnan\n2\n3\n")
    with pytest.raises(DataValidationError):
        load_dataset(geno, expr, pheno)


def test_missing_genotype_rejected_or_imputed(tmp_path):
    geno = _write(tmp_path, "g.txt", "0 1\nNA 0\n2 1\n0 2\n")
    with pytest.raises(InvalidDosageError):
        read_genotypes(geno)
    s, _, imputed = read_genotypes(geno, impute_missing=True)
    assert imputed
    assert s[1, 0] == pytest.approx(2 / 3)


def test_intercept_column_enforced():
    with pytest.raises(DataValidationError, match="intercept"):
        Dataset([1, 0], [[0], [1]], [0.0, 1.0], x=[[1.0], [2.0]])


def test_arrays_are_read_only():
    d = Dataset([1, 0], [[0], [1]], [0.0, 1.0])
    with pytest.raises(ValueError):
        d.s[0, 0] = 2


def test_monomorphic_warns_and_keeps():
    with pytest.warns(MonomorphicSNPWarning):
        d = Dataset([1, 0, 1], [[1, 0], [1, 2], [1, 1]], [0.0, 1.0, 2.0])
    assert d.p == 2


def test_interaction_examples():
    d = Dataset([1, 0], [[1, 0], [2, 1]], [2.0, 0.5])
    np.testing.assert_array_equal(interaction_matrix(d).c[0], [2.0, 0.0])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MonomorphicSNPWarning)
        z = Dataset([1, 0, 0], [[1, 0], [2, 1], [0, 2]], [0.0, 0.0, 0.0])
    assert np.all(interaction_matrix(z).c == 0)


def test_interaction_loop_oracle():
    rng = np.random.default_rng(3)
    s = rng.integers(0, 3, size=(5, 3))
    s[0] = [0, 1, 2]
    s[1] = [1, 2, 0]
    g = rng.normal(size=5)
    d = Dataset([1, 0, 1, 0, 1], s, g)
    c = interaction_matrix(d).c
    for i in range(5):
        for j in range(3):
            assert c[i, j] == g[i] * s[i, j]


@st.composite
def datasets(draw, imputed=False):
    n = draw(st.integers(2, 12))
    p = draw(st.integers(1, 4))
    q = draw(st.integers(0, 2))
    y = draw(hnp.arrays(np.int8, n, elements=st.integers(0, 1)))
    y[0], y[1] = 1, 0
    s = draw(hnp.arrays(np.int8, (n, p), elements=st.integers(0, 2)))
    finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
    g = draw(hnp.arrays(np.float64, n, elements=finite))
    x = None
    if q:
        x = np.column_stack([np.ones(n), draw(hnp.arrays(np.float64, (n, q), elements=finite))])
    return y, s, g, x


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(datasets())
def test_roundtrip_lossless(tmp_path_factory, parts):
    y, s, g, x = parts
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MonomorphicSNPWarning)
        d = Dataset(y, s, g, x)
        out = tmp_path_factory.mktemp("rt")
        paths = write_dataset(d, out)
        e = load_dataset(paths["genotypes"], paths["expression"], paths["phenotype"],
                         paths.get("covariates"))
    for a in ("y", "s", "g", "x"):
        np.testing.assert_array_equal(getattr(d, a), getattr(e, a))


@given(hnp.arrays(np.int8, (6, 3), elements=st.integers(0, 2)))
def test_dominant_idempotent(s):
    once = dominant(s)
    np.testing.assert_array_equal(dominant(once), once)
    assert set(np.unique(once)) <= {0.0, 1.0}


@settings(max_examples=50, deadline=None)
@given(datasets())
def test_interaction_property(parts):
    y, s, g, x = parts
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MonomorphicSNPWarning)
        d = Dataset(y, s, g, x)
    c = interaction_matrix(d).c
    np.testing.assert_array_equal(c, d.g[:, None] * d.s)
