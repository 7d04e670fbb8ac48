"""Selective explanations: LIME, SP-LIME, belief models and study utilities."""

from ._selex import (
    ReferenceClassifier,
    SelexError,
    accuracy,
    compute_metrics,
    config_hash,
    coverage,
    explain,
    generate_reviews,
    render_original,
    sentiment_lexicon,
    splime_select,
    survey_schema,
    tokenize,
)

__all__ = [
    "ReferenceClassifier",
    "SelexError",
    "accuracy",
    "compute_metrics",
    "config_hash",
    "coverage",
    "explain",
    "generate_reviews",
    "render_original",
    "sentiment_lexicon",
    "splime_select",
    "survey_schema",
    "tokenize",
]
