"""False discovery rate adjustment for genome-wide scans."""

from __future__ import annotations

import numpy as np
from scipy.stats import false_discovery_control

FDR_PROCEDURE = "benjamini-hochberg"


def fdr_adjust(pvalues) -> np.ndarray:
    """Benjamini-Hochberg step-up adjusted p-values (monotone, capped at 1)."""
    p = np.asarray(pvalues, dtype=float).ravel()
    if p.size == 0:
        raise ValueError("fdr_adjust needs at least one p-value")
    if np.any(~np.isfinite(p)) or np.any(p <= 0) or np.any(p > 1):
        raise ValueError("p-values must lie in (0, 1]")
    return false_discovery_control(p, method="bh")
