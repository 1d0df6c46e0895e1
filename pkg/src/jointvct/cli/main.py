"""``jointvct`` command-line entry point."""

from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from ..datamodel import GenotypeCoding, load_dataset, write_dataset
from ..errors import ConfigError, JointVCTError
from ..glm import fit_full_models
from ..mediation import effects
from ..omnibus import (
    Engine,
    direct_effect_test,
    indirect_effect_test,
    omnibus_test,
    total_effect_test,
)
from ..simulate import (
    GenerativeModel,
    HaplotypePool,
    LatentGaussian,
    load_pool_or_bundled,
    map_ordered,
    simulate_dataset,
    size_power_experiment,
)
from .fdr import FDR_PROCEDURE, fdr_adjust
from .report import build_report, dumps, result_summary

MIN_B = 100
VARIANTS = ("s", "sg", "sgc", "de", "ie")
ENGINES = tuple(e.value for e in Engine)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def _add_data_args(p, phenotype=True):
    if phenotype:
        p.add_argument("--genotypes", required=True)
        p.add_argument("--expression", required=True)
    p.add_argument("--phenotype", required=True)
    p.add_argument("--covariates")
    p.add_argument("--coding", choices=[c.value for c in GenotypeCoding], default="additive")
    p.add_argument("--impute-missing", action="store_true",
                   help="mean-impute missing dosages per SNP instead of failing")


def _add_weighting(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--weighted", dest="weighting", action="store_const", const="weighted")
    g.add_argument("--unweighted", dest="weighting", action="store_const", const="unweighted")
    p.set_defaults(weighting="weighted")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="jointvct", description="Joint SNP-expression variance component tests.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("test", help="single-variant total, direct or indirect effect test")
    _add_data_args(p)
    p.add_argument("--variant", choices=VARIANTS, default="sgc")
    _add_weighting(p)
    p.add_argument("--engine", choices=ENGINES, default="davies")
    p.add_argument("--b", type=int, default=1000)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")

    p = sub.add_parser("omnibus", help="min-p omnibus over the S, SG and SGC statistics")
    _add_data_args(p)
    _add_weighting(p)
    p.add_argument("--engine", choices=ENGINES, default="all")
    p.add_argument("--b", type=int, default=1000)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")

    p = sub.add_parser("effects", help="direct / indirect / total effect decomposition")
    _add_data_args(p)
    _add_weighting(p)
    p.add_argument("--s0", help="comma-separated reference dosages (default all 0)")
    p.add_argument("--s1", help="comma-separated contrast dosages (default all 1)")
    p.add_argument("--engine", choices=ENGINES, default="davies")
    p.add_argument("--b", type=int, default=1000)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")

    p = sub.add_parser("simulate", help="simulate one case-control dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--out")

    p = sub.add_parser("power", help="empirical size / power over a grid of models")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--b", type=int)
    p.add_argument("--out")

    p = sub.add_parser("scan", help="test many SNP-set / expression pairs with FDR control")
    p.add_argument("--manifest", required=True, help="TSV with columns pair_id, genotypes, expression")
    _add_data_args(p, phenotype=False)
    p.add_argument("--variant", choices=VARIANTS + ("omnibus",), default="sgc")
    _add_weighting(p)
    p.add_argument("--engine", choices=ENGINES[:-1], default="davies")
    p.add_argument("--b", type=int, default=1000)
    p.add_argument("--seed", type=int)
    p.add_argument("--alpha", type=float, default=0.1, help="FDR level")
    p.add_argument("--out")
    p.add_argument("--table", help="TSV output (defaults to the report path with .tsv)")
    return parser


# -- helpers ----------------------------------------------------------------


def _uses_perturbation(engine) -> bool:
    return engine in ("perturbation", "all")


def _check_b(b, needed: bool):
    if needed and (b is None or b < MIN_B):
        raise ConfigError(f"b must be at least {MIN_B} for perturbation-based p-values (got {b})")


def _need_seed(seed, what):
    if seed is None:
        raise ConfigError(f"{what} requires --seed")


def _load(args):
    return load_dataset(args.genotypes, args.expression, args.phenotype, args.covariates,
                        coding=args.coding, impute_missing=args.impute_missing)


def _data_inputs(args) -> dict:
    return {
        "genotypes": args.genotypes,
        "expression": args.expression,
        "phenotype": args.phenotype,
        "covariates": args.covariates,
        "coding": args.coding,
        "impute_missing": args.impute_missing,
    }


def _vector(text, p, default):
    if text is None:
        return np.full(p, default, dtype=float)
    try:
        v = np.array([float(t) for t in text.split(",")])
    except ValueError:
        raise ConfigError(f"cannot parse dosage vector {text!r}") from None
    if v.size != p:
        raise ConfigError(f"dosage vector has {v.size} entries, expected {p}")
    return v


def _read_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("experiment config must be a JSON object")
    return cfg


def _ld_from_config(spec):
    spec = dict(spec or {"kind": "haplotype_pool"})
    kind = spec.pop("kind", "haplotype_pool")
    typed = spec.pop("typed_indices", None)
    causal = spec.pop("causal_indices", None)
    try:
        if kind == "haplotype_pool":
            path = spec.pop("path", None)
            if spec:
                raise ConfigError(f"unknown ld fields {sorted(spec)}")
            return load_pool_or_bundled(path, typed, causal)
        if kind == "latent_gaussian":
            rho = spec.pop("rho")
            mafs = spec.pop("mafs")
            if spec:
                raise ConfigError(f"unknown ld fields {sorted(spec)}")
            if typed is None or causal is None:
                raise ConfigError("latent_gaussian needs typed_indices and causal_indices")
            return LatentGaussian(rho, mafs, tuple(typed), tuple(causal))
    except KeyError as exc:
        raise ConfigError(f"ld config is missing {exc}") from None
    raise ConfigError(f"unknown ld kind {kind!r}")


def _model_from_config(spec) -> GenerativeModel:
    spec = {k: tuple(v) if isinstance(v, list) else v for k, v in dict(spec or {}).items()}
    try:
        return GenerativeModel(**spec)
    except TypeError as exc:
        raise ConfigError(f"bad generative model: {exc}") from None


def _sampling(cfg):
    return {k: int(cfg.get(k, dflt)) for k, dflt in
            (("cohort_n", 1000), ("n_cases", 100), ("n_controls", 100))}


def _ld_inputs(ld) -> dict:
    out = {"ld_kind": "haplotype_pool" if isinstance(ld, HaplotypePool) else "latent_gaussian",
           "typed_indices": ",".join(map(str, ld.typed_indices)),
           "causal_indices": ",".join(map(str, ld.causal_indices))}
    return out


# -- commands ---------------------------------------------------------------


def cmd_test(args):
    _check_b(args.b, _uses_perturbation(args.engine))
    if _uses_perturbation(args.engine):
        _need_seed(args.seed, "perturbation p-values")
    d = _load(args)
    res = total_effect_test(d, args.variant, args.weighting, args.engine, b=args.b, seed=args.seed)
    inputs = _data_inputs(args) | {"variant": args.variant, "weighting": args.weighting,
                                   "engine": args.engine}
    b = args.b if _uses_perturbation(args.engine) else None
    return build_report("test", inputs, result_summary(res), seed=args.seed, b=b)


def cmd_omnibus(args):
    _check_b(args.b, True)
    _need_seed(args.seed, "omnibus")
    d = _load(args)
    res = omnibus_test(d, b=args.b, seed=args.seed, weighting=args.weighting, engine=args.engine)
    result = {
        "p_s": res.p_s, "p_sg": res.p_sg, "p_sgc": res.p_sgc,
        "p_min_observed": res.p_min_observed, "p_omnibus": res.p_omnibus,
        "b": res.b, "weighting": args.weighting,
        "components": [result_summary(r) for r in res.per_variant],
    }
    inputs = _data_inputs(args) | {"weighting": args.weighting, "engine": args.engine}
    return build_report("omnibus", inputs, result, seed=args.seed, b=args.b)


def cmd_effects(args):
    _check_b(args.b, _uses_perturbation(args.engine))
    if _uses_perturbation(args.engine):
        _need_seed(args.seed, "perturbation p-values")
    d = _load(args)
    mc = fit_full_models(d)
    dec = effects(mc, _vector(args.s0, d.p, 0.0), _vector(args.s1, d.p, 1.0))
    de_t = direct_effect_test(d, args.weighting, args.engine, b=args.b, seed=args.seed)
    ie_t = indirect_effect_test(d, args.weighting, args.engine, b=args.b, seed=args.seed)
    result = {
        "s0": dec.s0, "s1": dec.s1, "x": dec.x,
        "te": dec.te, "de": dec.de, "ie": dec.ie,
        "rare_disease_approximation": dec.rare_disease_approximation,
        "coefficients": {
            "alpha": mc.alpha, "beta_s": mc.beta_s, "beta_g": mc.beta_g, "gamma": mc.gamma,
            "phi": mc.phi, "delta": mc.delta, "sigma2_g": mc.sigma2_g,
        },
        "tests": {"direct": result_summary(de_t), "indirect": result_summary(ie_t)},
    }
    inputs = _data_inputs(args) | {"weighting": args.weighting, "engine": args.engine,
                                   "s0": args.s0, "s1": args.s1}
    b = args.b if _uses_perturbation(args.engine) else None
    return build_report("effects", inputs, result, seed=args.seed, b=b)


def cmd_simulate(args):
    cfg = _read_config(args.config)
    seed = args.seed if args.seed is not None else cfg.get("seed")
    _need_seed(seed, "simulate")
    ld = _ld_from_config(cfg.get("ld"))
    gm = _model_from_config(cfg.get("model"))
    samp = _sampling(cfg)
    d = simulate_dataset(ld, gm, int(seed), 0, int(cfg.get("replicate", 0)), **samp)
    paths = write_dataset(d, args.out_dir)
    result = {
        "n": d.n, "p": d.p,
        "cases": int(d.y.sum()), "controls": int(d.n - d.y.sum()),
        "files": {k: str(v) for k, v in sorted(paths.items())},
    }
    inputs = {"config": args.config, "out_dir": args.out_dir} | _ld_inputs(ld)
    return build_report("simulate", inputs, result, seed=seed)


def cmd_power(args):
    cfg = _read_config(args.config)
    seed = args.seed if args.seed is not None else cfg.get("seed")
    _need_seed(seed, "power")
    alpha = args.alpha if args.alpha is not None else float(cfg.get("alpha", 0.05))
    b = args.b if args.b is not None else int(cfg.get("b", 500))
    tests = list(cfg.get("tests", ["S:davies", "SG-w:davies", "SGC-w:davies", "omnibus"]))
    _check_b(b, any(t == "omnibus" or t.endswith(":perturbation") for t in tests))
    models = cfg.get("models")
    if not isinstance(models, dict) or not models:
        raise ConfigError("power config needs a non-empty 'models' object")
    configs = {str(k): _model_from_config(v) for k, v in models.items()}
    reps = int(cfg.get("replications", 1000))
    if reps < 100:
        raise ConfigError("replications must be at least 100")
    ld = _ld_from_config(cfg.get("ld"))
    rows = size_power_experiment(configs, reps, alpha, tests, int(seed), ld=ld, b=b,
                                 **_sampling(cfg))
    result = {
        "alpha": alpha,
        "replications": reps,
        "rows": [{"config": r.config, "test": r.test, "rate": r.rate, "se": r.se,
                  "rejections": r.rejections, "replicates": r.replicates,
                  "failures": r.failures} for r in rows],
    }
    inputs = {"config": args.config, "tests": ",".join(tests)} | _ld_inputs(ld)
    return build_report("power", inputs, result, seed=seed, b=b)


def read_manifest(path):
    """Rows of (pair_id, genotype path, expression path); relative paths resolve
    against the manifest's directory."""
    base = Path(path).parent
    with open(path, newline="") as fh:
        reader = csv.DictReader((ln for ln in fh if not ln.startswith("#")), delimiter="\t")
        need = {"pair_id", "genotypes", "expression"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise ConfigError(f"manifest needs columns {sorted(need)}")
        rows = [(r["pair_id"], base / r["genotypes"], base / r["expression"]) for r in reader]
    if not rows:
        raise ConfigError("manifest lists no pairs")
    ids = [r[0] for r in rows]
    if len(set(ids)) != len(ids):
        raise ConfigError("duplicate pair_id in manifest")
    return rows


def _scan_one(job):
    idx, pair_id, geno, expr, opts = job
    seed = np.random.SeedSequence([opts["seed"], idx]) if opts["seed"] is not None else None
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            d = load_dataset(geno, expr, opts["phenotype"], opts["covariates"],
                             coding=opts["coding"], impute_missing=opts["impute_missing"])
            if opts["variant"] == "omnibus":
                res = omnibus_test(d, b=opts["b"], seed=seed, weighting=opts["weighting"],
                                   engine="perturbation")
                return {"pair_id": pair_id, "statistic": None, "pvalue": res.p_omnibus, "error": None}
            res = total_effect_test(d, opts["variant"], opts["weighting"], opts["engine"],
                                    b=opts["b"], seed=seed)
            return {"pair_id": pair_id, "statistic": res.statistic,
                    "pvalue": res.pvalues[opts["engine"]], "error": None}
    except JointVCTError as exc:
        return {"pair_id": pair_id, "statistic": None, "pvalue": None,
                "error": {"code": exc.code, "message": str(exc)}}


def _fmt(v):
    return "NA" if v is None else repr(v) if isinstance(v, float) else str(v)


def run_scan(args, workers=None):
    perturb = args.variant == "omnibus" or args.engine == "perturbation"
    _check_b(args.b, perturb)
    if perturb:
        _need_seed(args.seed, "perturbation-based scan")
    engine = "perturbation" if args.variant == "omnibus" else args.engine
    opts = {"seed": args.seed, "phenotype": args.phenotype, "covariates": args.covariates,
            "coding": args.coding, "impute_missing": args.impute_missing,
            "variant": args.variant, "weighting": args.weighting, "engine": engine, "b": args.b}
    manifest = read_manifest(args.manifest)
    jobs = [(i, pid, str(g), str(e), opts) for i, (pid, g, e) in enumerate(manifest)]
    pairs = map_ordered(_scan_one, jobs, workers)
    ok = [i for i, r in enumerate(pairs) if r["pvalue"] is not None]
    adjusted = fdr_adjust([pairs[i]["pvalue"] for i in ok]) if ok else []
    for r in pairs:
        r["adjusted"] = None
        r["discovery"] = False
    for i, a in zip(ok, adjusted):
        pairs[i]["adjusted"] = float(a)
        pairs[i]["discovery"] = bool(a <= args.alpha)
    table = args.table
    if table is None and args.out:
        table = str(Path(args.out).with_suffix(".tsv"))
    if table:
        with open(table, "w") as fh:
            fh.write("pair_id\tstatistic\tpvalue\tadjusted\tdiscovery\terror\n")
            for r in pairs:
                err = r["error"]["code"] if r["error"] else "NA"
                fh.write("\t".join([r["pair_id"], _fmt(r["statistic"]), _fmt(r["pvalue"]),
                                    _fmt(r["adjusted"]), str(r["discovery"]).lower(), err]) + "\n")
    result = {
        "fdr_procedure": FDR_PROCEDURE,
        "fdr_level": args.alpha,
        "variant": args.variant,
        "weighting": args.weighting,
        "engine": engine,
        "n_pairs": len(pairs),
        "n_failed": len(pairs) - len(ok),
        "discoveries": sum(r["discovery"] for r in pairs),
        "table": table,
        "pairs": [{k: r[k] for k in ("pair_id", "statistic", "pvalue", "adjusted", "discovery", "error")}
                  for r in pairs],
    }
    inputs = {"manifest": args.manifest, "phenotype": args.phenotype,
              "covariates": args.covariates, "coding": args.coding,
              "impute_missing": args.impute_missing}
    return build_report("scan", inputs, result, seed=args.seed, b=args.b if perturb else None)


COMMANDS = {
    "test": cmd_test,
    "omnibus": cmd_omnibus,
    "effects": cmd_effects,
    "simulate": cmd_simulate,
    "power": cmd_power,
    "scan": run_scan,
}


def _emit_error(code, message, status):
    sys.stderr.write(json.dumps({"error": {"code": code, "message": message}}, sort_keys=True) + "\n")
    return status


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        report = COMMANDS[args.command](args)
        text = dumps(report)
        if getattr(args, "out", None):
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
        return 0
    except JointVCTError as exc:
        return _emit_error(exc.code, str(exc), exc.exit_status)
    except OSError as exc:
        return _emit_error("E_IO", str(exc), 3)


if __name__ == "__main__":
    sys.exit(main())
