#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dars/corpus.hpp"
#include "dars/judge.hpp"
#include "dars/llm_gateway.hpp"
#include "dars/loop.hpp"

namespace dars {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitTransport = 2;
inline constexpr int kExitPartial = 3;

struct EndpointConfig {
    std::string backend = "scripted";  // "http" or "scripted"
    std::string base_url;
    std::string model = "scripted";
    std::string api_key_env = "OPENAI_API_KEY";
    std::string profile_name = "eval";  // eval, baseline-critic, synthesis
    std::optional<json> profile_inline;
    std::string script_path;  // scripted backend only
    int max_attempts = 4;
    int initial_backoff_ms = 250;
    double backoff_multiplier = 2.0;
    int max_backoff_ms = 8000;
    int timeout_s = 120;
};

struct JudgeConfig {
    std::string backend = "table";  // "table" or "llm"
    std::string table_path;
    std::optional<EndpointConfig> endpoint;
};

struct DatasetConfig {
    std::string name;
    std::string context_path;
    std::string answers_path;
};

struct SynthesisSettings {
    int path_cap = 64;
    int pairs_cap = 4;
    int parse_retries = 2;
    bool include_chosen_rationale = true;
    std::vector<Split> splits = {Split::Train};
    std::optional<int> limit_answers;
};

struct SftSettings {
    std::string stop_completion = "Rationale Looks Good! [STOP]";
    bool critic_reflect_depth2 = false;
    std::optional<std::string> system_message;
    bool emit_dpo = false;
};

struct LoopSettings {
    int max_iterations = 8;
    std::string stop_token = "[STOP]";
    std::string on_unextractable = "carry_previous";  // or "error"
    Split split = Split::Test;
    bool redact_transcripts = false;
    std::optional<int> limit_answers;
    std::vector<std::string> extra_score_patterns;
};

struct EvalSettings {
    bool exclude_absent_classes = false;
    std::vector<std::string> trajectory_logs;  // defaults to this run's output
    int top_k_transitions = 10;
    bool paired_t_test = false;
};

struct PipelineConfig {
    std::vector<DatasetConfig> datasets;
    std::string output_dir = "out";
    std::uint64_t seed = 0;
    int concurrency = 4;
    std::optional<EndpointConfig> synthesizer;
    std::optional<EndpointConfig> reasoner;
    std::optional<EndpointConfig> critic;
    JudgeConfig judge;
    SynthesisSettings synthesis;
    SftSettings sft;
    LoopSettings loop;
    EvalSettings evaluation;

    std::string config_hash;  // canonical hash of the parsed document
};

/// Parses and validates a config file. Relative paths, output_dir included,
/// resolve against the config file's directory. Referenced input files must
/// exist. Throws ParseError or ValidationError naming the field.
PipelineConfig load_pipeline_config(const std::string& path);

struct CommandOptions {
    std::optional<std::string> out_dir;  // overrides config output_dir, cwd-relative
    bool dry_run = false;
    bool baseline_critic = false;
    std::optional<std::uint64_t> seed;
    std::optional<int> concurrency;
};

struct CommandResult {
    int exit_code = kExitOk;
    std::string summary;
};

/// Loads every dataset and prints per-split counts and the score histogram.
CommandResult cmd_ingest(const PipelineConfig& config, const CommandOptions& options = {});

/// Thought trees, preference pairs, rationale summaries, and reflection
/// synthesis over the configured splits. Writes reflections.jsonl,
/// chosen_rationales.jsonl, quarantine.jsonl, and manifest.json under
/// <out>/synthesize/. Resumes past answers already present when the stored
/// config hash matches.
CommandResult cmd_synthesize(const PipelineConfig& config, const CommandOptions& options = {});

/// Assembles the four fine-tuning families from the synthesize outputs into
/// <out>/sft/ and prints the per-family counts.
CommandResult cmd_build_sft(const PipelineConfig& config, const CommandOptions& options = {});

/// Iterative refinement over the configured split. Writes trajectories.jsonl,
/// completion_curve.json, and manifest.json under <out>/run/.
CommandResult cmd_run(const PipelineConfig& config, const CommandOptions& options = {});

/// Metrics for first-pass and final predictions, transition analytics, and
/// (given two or more run logs) one-tailed significance. Writes report.txt,
/// report.json, transitions.json, and manifest.json under <out>/eval/.
CommandResult cmd_evaluate(const PipelineConfig& config, const CommandOptions& options = {});

}  // namespace dars
