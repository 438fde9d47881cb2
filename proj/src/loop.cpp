#include "dars/loop.hpp"

#include <regex>

#include "dars/errors.hpp"
#include "dars/parallel.hpp"
#include "dars/prompts.hpp"

namespace dars {

struct ScoreExtractor::Compiled {
    std::regex re;
};

namespace {

constexpr const char* kNumberToken =
    "([0-9]+|zero|one|two|three|four|five|six|seven|eight|nine|ten)";

std::string with_number(const std::string& pattern) {
    std::string out;
    size_t pos = 0;
    size_t hole = pattern.find("{n}");
    while (hole != std::string::npos) {
        out += pattern.substr(pos, hole - pos);
        out += kNumberToken;
        pos = hole + 3;
        hole = pattern.find("{n}", pos);
    }
    out += pattern.substr(pos);
    return out;
}

const std::vector<std::string>& builtin_patterns() {
    static const std::vector<std::string> patterns = {
        "\\bscored\\s+{n}\\s+points?\\b",
        "\\bscores\\s+{n}\\s+points?\\b",
        "\\bscore\\s+of\\s+{n}\\b",
        "\\bawarded\\s+{n}\\s+points?\\b",
        "\\b{n}\\s+points?\\s+according\\s+to\\s+the\\s+marking\\s+rubric\\b",
    };
    return patterns;
}

std::optional<int> number_from_token(const std::string& token) {
    static const std::vector<std::string> words = {"zero", "one", "two",   "three", "four", "five",
                                                   "six",  "seven", "eight", "nine",  "ten"};
    std::string lower;
    lower.reserve(token.size());
    for (char c : token) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    for (size_t i = 0; i < words.size(); ++i) {
        if (lower == words[i]) return static_cast<int>(i);
    }
    try {
        return std::stoi(lower);
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

}  // namespace

ScoreExtractor::ScoreExtractor() : ScoreExtractor(std::vector<std::string>{}) {}

ScoreExtractor::ScoreExtractor(const std::vector<std::string>& extra_patterns) {
    auto compile = [this](const std::string& raw) {
        auto compiled = std::make_shared<Compiled>();
        try {
            compiled->re = std::regex(with_number(raw), std::regex::icase | std::regex::ECMAScript);
        } catch (const std::regex_error& e) {
            throw ValidationError("score pattern \"" + raw + "\": " + e.what());
        }
        patterns_.push_back(std::move(compiled));
    };
    for (const auto& p : builtin_patterns()) compile(p);
    for (const auto& p : extra_patterns) compile(p);
}

int ScoreExtractor::extract(const std::string& rationale, const ScoreRange& range) const {
    bool any_match = false;
    int first_out_of_range = 0;
    for (const auto& pattern : patterns_) {
        auto begin = std::sregex_iterator(rationale.begin(), rationale.end(), pattern->re);
        for (auto it = begin; it != std::sregex_iterator(); ++it) {
            auto value = number_from_token((*it)[1].str());
            if (!value) continue;
            if (!any_match) first_out_of_range = *value;
            any_match = true;
            if (range.contains(*value)) return *value;
        }
    }
    if (!any_match)
        throw ExtractionError(ExtractionError::Kind::NoPattern,
                              "no score pattern found in rationale");
    throw ExtractionError(ExtractionError::Kind::OutOfRange,
                          "matched score " + std::to_string(first_out_of_range) + " outside [" +
                              std::to_string(range.lo) + ", " + std::to_string(range.hi) + "]");
}

int extract_score(const std::string& rationale, const ScoreRange& range) {
    static const ScoreExtractor extractor;
    return extractor.extract(rationale, range);
}

bool detect_stop(const std::string& critic_text, const std::string& stop_token) {
    if (stop_token.empty()) return false;
    return critic_text.find(stop_token) != std::string::npos;
}

const char* to_string(Actor actor) {
    return actor == Actor::Reasoner ? "reasoner" : "critic";
}

const char* to_string(Termination t) {
    switch (t) {
        case Termination::Stop: return "stop";
        case Termination::Cap: return "cap";
        case Termination::Error: return "error";
    }
    return "error";
}

Termination termination_from_string(const std::string& value) {
    if (value == "stop") return Termination::Stop;
    if (value == "cap") return Termination::Cap;
    if (value == "error") return Termination::Error;
    throw ValidationError("termination: unknown value \"" + value + "\"");
}

Trajectory run_trajectory(const StudentAnswer& answer, const QuestionContext& ctx,
                          ChatGateway& reasoner, ChatGateway& critic, const LoopConfig& cfg) {
    if (cfg.max_iterations < 1) throw ValidationError("max_iterations must be >= 1");

    const ScoreExtractor extractor(cfg.extra_score_patterns);
    const std::string context_turn = prompts::render_question_turn(ctx, answer);
    GenerationProfile critic_profile = cfg.critic_profile;
    if (cfg.baseline_critic) {
        critic_profile = profiles::baseline_critic(cfg.critic_profile.model_name);
    }

    Trajectory traj;
    traj.answer_id = answer.id;

    // Shared conversation: context as user, reasoner turns as assistant,
    // critic turns as user. Both endpoints see the same history; the
    // baseline critic additionally gets its instruction as a system message.
    auto conversation = [&](bool for_critic) {
        std::vector<ChatMessage> messages;
        if (for_critic && cfg.baseline_critic)
            messages.push_back({Role::System, prompts::baseline_critic_system_prompt()});
        messages.push_back({Role::User, context_turn});
        for (const auto& turn : traj.turns) {
            messages.push_back(
                {turn.actor == Actor::Reasoner ? Role::Assistant : Role::User, turn.text});
        }
        return messages;
    };
    auto fail = [&](const std::string& what) {
        traj.terminated_by = Termination::Error;
        traj.error = what;
        return traj;
    };

    for (int t = 0; t < cfg.max_iterations; ++t) {
        ChatResponse reasoner_turn;
        try {
            reasoner_turn = reasoner.complete({conversation(false), cfg.reasoner_profile});
        } catch (const Error& e) {
            return fail(std::string("reasoner turn ") + std::to_string(t) + ": " + e.what());
        }
        traj.turns.push_back({Actor::Reasoner, reasoner_turn.text, t, reasoner_turn.latency_ms});
        traj.iterations_used = t + 1;

        try {
            traj.scores.push_back(extractor.extract(reasoner_turn.text, ctx.score_range));
        } catch (const ExtractionError& e) {
            if (cfg.on_unextractable == UnextractablePolicy::CarryPrevious && !traj.scores.empty()) {
                traj.scores.push_back(traj.scores.back());
            } else {
                return fail(std::string("reasoner turn ") + std::to_string(t) + ": " + e.what());
            }
        }

        ChatResponse critic_turn;
        try {
            critic_turn = critic.complete({conversation(true), critic_profile});
        } catch (const Error& e) {
            return fail(std::string("critic turn ") + std::to_string(t) + ": " + e.what());
        }
        traj.turns.push_back({Actor::Critic, critic_turn.text, t, critic_turn.latency_ms});

        if (detect_stop(critic_turn.text, cfg.stop_token)) {
            traj.terminated_by = Termination::Stop;
            return traj;
        }
    }
    traj.terminated_by = Termination::Cap;
    return traj;
}

std::vector<double> completion_curve(const std::vector<Trajectory>& trajectories,
                                     int max_iterations) {
    if (max_iterations < 1) throw ValidationError("max_iterations must be >= 1");
    std::vector<double> curve(static_cast<size_t>(max_iterations) + 1, 0.0);
    if (trajectories.empty()) return curve;
    for (int t = 0; t <= max_iterations; ++t) {
        int stopped = 0;
        for (const auto& traj : trajectories) {
            if (traj.terminated_by == Termination::Stop && traj.iterations_used <= t) ++stopped;
        }
        curve[static_cast<size_t>(t)] =
            static_cast<double>(stopped) / static_cast<double>(trajectories.size());
    }
    return curve;
}

BatchResult run_batch(const std::vector<StudentAnswer>& answers, const QuestionContext& ctx,
                      ChatGateway& reasoner, ChatGateway& critic, const LoopConfig& cfg,
                      int concurrency) {
    BatchResult result;
    result.trajectories = parallel_map<StudentAnswer, Trajectory>(
        answers,
        [&](const StudentAnswer& answer) {
            return run_trajectory(answer, ctx, reasoner, critic, cfg);
        },
        concurrency);
    for (const auto& traj : result.trajectories) {
        switch (traj.terminated_by) {
            case Termination::Stop: ++result.stopped; break;
            case Termination::Cap: ++result.capped; break;
            case Termination::Error: ++result.errored; break;
        }
    }
    result.curve = completion_curve(result.trajectories, cfg.max_iterations);
    return result;
}

}  // namespace dars
