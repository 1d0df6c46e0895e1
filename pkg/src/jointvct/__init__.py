"""Joint SNP-set and gene-expression variance component tests for binary outcomes."""

__version__ = "0.1.0"

from .datamodel import Dataset, GenotypeCoding, interaction_matrix, load_dataset, write_dataset
from .errors import JointVCTError
from .glm import MediationCoefficients, fit_full_models, fit_null_logistic
from .mediation import effects, marginal_snp_coefficients
from .omnibus import (
    battery_pvalues,
    direct_effect_test,
    indirect_effect_test,
    omnibus_test,
    total_effect_test,
)
from .simulate import GenerativeModel, bundled_pool, generate_cohort, sample_case_control

__all__ = [
    "Dataset",
    "GenerativeModel",
    "GenotypeCoding",
    "JointVCTError",
    "MediationCoefficients",
    "battery_pvalues",
    "bundled_pool",
    "direct_effect_test",
    "effects",
    "fit_full_models",
    "fit_null_logistic",
    "generate_cohort",
    "indirect_effect_test",
    "interaction_matrix",
    "load_dataset",
    "marginal_snp_coefficients",
    "omnibus_test",
    "sample_case_control",
    "total_effect_test",
    "write_dataset",
]
