#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dars/llm_gateway.hpp"
#include "dars/thought_tree.hpp"

namespace dars {

/// Ordered score-pattern matcher over rationale text. Patterns are tried in
/// order of specificity; within one pattern, matches are scanned left to
/// right and the first value inside the score range wins. Digits and the
/// spelled-out numbers zero through ten are both accepted.
class ScoreExtractor {
  public:
    /// Built-in pattern family, most specific first:
    ///   "scored {n} point(s)", "scores {n} point(s)", "score of {n}",
    ///   "awarded {n} point(s)", "{n} point(s) according to the marking rubric".
    ScoreExtractor();

    /// Extra patterns are regular expressions with one capture group for the
    /// number token; they are tried after the built-ins.
    explicit ScoreExtractor(const std::vector<std::string>& extra_patterns);

    /// Throws ExtractionError: NoPattern when nothing matches, OutOfRange
    /// when every match carries a value outside the range.
    int extract(const std::string& rationale, const ScoreRange& range) const;

  private:
    struct Compiled;
    std::vector<std::shared_ptr<Compiled>> patterns_;
};

/// Convenience wrapper over a default-constructed ScoreExtractor.
int extract_score(const std::string& rationale, const ScoreRange& range);

/// Case-sensitive substring test.
bool detect_stop(const std::string& critic_text, const std::string& stop_token = "[STOP]");

enum class Actor { Reasoner, Critic };
const char* to_string(Actor actor);

enum class Termination { Stop, Cap, Error };
const char* to_string(Termination t);
Termination termination_from_string(const std::string& value);

struct Turn {
    Actor actor = Actor::Reasoner;
    std::string text;
    int iteration_index = 0;
    double wall_ms = 0.0;
};

struct Trajectory {
    std::string answer_id;
    std::vector<Turn> turns;
    std::vector<int> scores;  // one entry per reasoner turn
    Termination terminated_by = Termination::Stop;
    int iterations_used = 0;  // reasoner turns issued
    std::string error;        // set when terminated_by == Error

    std::optional<int> final_score() const {
        if (scores.empty()) return std::nullopt;
        return scores.back();
    }
};

enum class UnextractablePolicy { Error, CarryPrevious };

struct LoopConfig {
    int max_iterations = 8;
    std::string stop_token = "[STOP]";
    GenerationProfile reasoner_profile;
    GenerationProfile critic_profile;
    UnextractablePolicy on_unextractable = UnextractablePolicy::CarryPrevious;
    bool baseline_critic = false;  // prompted critic instead of a trained one
    std::vector<std::string> extra_score_patterns;
};

/// Alternating reasoner/critic refinement for one answer. The reasoner sees
/// the context turn as user, its own turns as assistant, and critic guidance
/// as user; the critic sees the same conversation (plus a system prompt in
/// baseline mode). Ends on a critic stop, at max_iterations reasoner turns,
/// or on the first gateway/extraction error (partial trajectory preserved).
Trajectory run_trajectory(const StudentAnswer& answer, const QuestionContext& ctx,
                          ChatGateway& reasoner, ChatGateway& critic, const LoopConfig& cfg);

/// curve[t] = fraction of trajectories that stopped at or before t reasoner
/// turns, for t in 0..max_iterations. Cap and error terminations never count
/// as stopped. Empty input gives an all-zero curve.
std::vector<double> completion_curve(const std::vector<Trajectory>& trajectories,
                                     int max_iterations);

struct BatchResult {
    std::vector<Trajectory> trajectories;  // input order
    std::vector<double> curve;
    int stopped = 0;
    int capped = 0;
    int errored = 0;
};

/// Runs trajectories for all answers, up to `concurrency` at a time.
BatchResult run_batch(const std::vector<StudentAnswer>& answers, const QuestionContext& ctx,
                      ChatGateway& reasoner, ChatGateway& critic, const LoopConfig& cfg,
                      int concurrency = 4);

}  // namespace dars
