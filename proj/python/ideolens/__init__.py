"""Python bindings for the ideolens evaluation harness."""

from ._core import (
    IdeolensError,
    VariantSet,
    bias_test,
    bonferroni_adjust,
    fit_beta_regression,
    load_pronoun_variants,
    load_role_nouns,
    normalize_log_probs,
    paired_t_test,
    run_command,
    score_exp1_mock,
    suite_counts,
    validate_variant_set,
)

__all__ = [
    "IdeolensError",
    "VariantSet",
    "bias_test",
    "bonferroni_adjust",
    "fit_beta_regression",
    "load_pronoun_variants",
    "load_role_nouns",
    "normalize_log_probs",
    "paired_t_test",
    "run_command",
    "score_exp1_mock",
    "suite_counts",
    "validate_variant_set",
]
