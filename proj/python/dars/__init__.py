"""Thought-tree reflection synthesis and dual-model refinement, C++ core."""

from ._core import (
    ExtractionError,
    GuidanceError,
    ParseError,
    PipelineError,
    QuestionContext,
    Rubric,
    RubricBand,
    ScoreRange,
    StudentAnswer,
    ValidationError,
    accuracy,
    apply_rubric,
    completion_curve,
    detect_stop,
    difference_vector,
    enumerate_paths,
    extract_score,
    hamming_distance,
    load_answers,
    load_question_context,
    macro_f1,
    one_tailed_t_test,
    paired_one_tailed_t_test,
    parse_guidance,
    preference_pairs,
    qwk,
    render_hint,
    run_scripted_trajectory,
)

__all__ = [
    "ExtractionError",
    "GuidanceError",
    "ParseError",
    "PipelineError",
    "QuestionContext",
    "Rubric",
    "RubricBand",
    "ScoreRange",
    "StudentAnswer",
    "ValidationError",
    "accuracy",
    "apply_rubric",
    "completion_curve",
    "detect_stop",
    "difference_vector",
    "enumerate_paths",
    "extract_score",
    "hamming_distance",
    "load_answers",
    "load_question_context",
    "macro_f1",
    "one_tailed_t_test",
    "paired_one_tailed_t_test",
    "parse_guidance",
    "preference_pairs",
    "qwk",
    "render_hint",
    "run_scripted_trajectory",
]
