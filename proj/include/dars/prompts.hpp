#pragma once

#include <string>

#include "dars/corpus.hpp"

namespace dars {
struct TreePath;
}

namespace dars::prompts {

/// Default completion a trained critic emits when the assessment is correct.
inline constexpr const char* kStopCompletion = "Rationale Looks Good! [STOP]";

/// Substring whose presence in a critic turn ends the refinement loop.
inline constexpr const char* kStopToken = "[STOP]";

/// Rubric bands as prose lines, highest score first, default last as "Other".
std::string render_rubric_text(const Rubric& rubric);

/// The shared context turn: question, key elements, rubric, student answer,
/// and the assessment instruction. Used verbatim for training records and
/// for the first user message of every refinement run.
std::string render_question_turn(const QuestionContext& ctx, const StudentAnswer& answer);

/// Hint line for one element the wrong rationale credited but the student
/// did not cover (delta -1).
std::string hint_line_missing(int element_index, const std::string& element);

/// Hint line for one element the student covered but the wrong rationale
/// denied (delta +1).
std::string hint_line_covered(int element_index, const std::string& element);

/// Reflection-synthesis request around a wrong rationale and the structural
/// hint. When `chosen_rationale` is non-null it is included as a labeled
/// block after the hint.
std::string render_reflection_prompt(const StudentAnswer& answer,
                                     const std::string& rejected_rationale,
                                     const std::string& hint_rendered,
                                     const std::string* chosen_rationale);

/// System prompt for running an untargeted instruction model as the critic.
std::string baseline_critic_system_prompt();

/// Asks the model to write the rationale a decision path implies, asserting
/// the derived score in an extractable phrasing.
std::string render_summarize_prompt(const QuestionContext& ctx, const StudentAnswer& answer,
                                    const TreePath& path);

/// Asks whether one key element is covered by the student answer. The reply
/// is JSON with "decision" of present/absent/unsure plus optional evidence.
std::string render_judge_prompt(const QuestionContext& ctx, const StudentAnswer& answer,
                                int element_index);

}  // namespace dars::prompts
