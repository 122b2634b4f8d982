"""Atomic-query confidence calibration for multimodal question answering."""

from ._atomcal import (
    AtomcalError,
    cache_key,
    mann_whitney_u,
    parse_paraphrases,
    parse_questions,
    parse_tuples,
    point_biserial,
    run_cli,
    select_answer,
    validate_question,
    welch_t,
)

__all__ = [
    "AtomcalError",
    "cache_key",
    "mann_whitney_u",
    "parse_paraphrases",
    "parse_questions",
    "parse_tuples",
    "point_biserial",
    "run_cli",
    "select_answer",
    "validate_question",
    "welch_t",
]
