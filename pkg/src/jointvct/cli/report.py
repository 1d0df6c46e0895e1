"""Report assembly, schema validation and deterministic serialization."""

from __future__ import annotations

import json
import platform
from functools import lru_cache
from importlib import resources

import jsonschema
import numpy as np
import scipy

from .. import __version__


@lru_cache(maxsize=1)
def report_schema() -> dict:
    text = (resources.files("jointvct") / "data" / "report.schema.json").read_text()
    return json.loads(text)


def provenance(seed=None, b=None) -> dict:
    return {
        "package_version": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
        "seed": None if seed is None else int(seed),
        "b": None if b is None else int(b),
    }


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if hasattr(obj, "value") and isinstance(obj.value, str):  # enums
        return obj.value
    return obj


def build_report(command: str, inputs: dict, result: dict, seed=None, b=None) -> dict:
    report = _plain({
        "command": command,
        "provenance": provenance(seed, b),
        "inputs": inputs,
        "result": result,
    })
    jsonschema.validate(report, report_schema())
    return report


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"


def result_summary(res) -> dict:
    lam = np.asarray(res.lambdas)
    return {
        "statistic": res.statistic,
        "variant": res.variant,
        "weighting": res.weighting,
        "weights": list(res.weights),
        "pvalues": dict(res.pvalues),
        "spectrum": {
            "count": int(lam.size),
            "lambda_max": float(lam.max()),
            "lambda_min": float(lam.min()),
            "sum": float(lam.sum()),
            "sum_sq": float(np.sum(lam**2)),
        },
        "davies_fallback": res.davies_fallback,
        "b": res.b,
    }
