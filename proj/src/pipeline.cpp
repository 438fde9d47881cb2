#include "dars/pipeline.hpp"

#include <algorithm>
#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "dars/dataset_builder.hpp"
#include "dars/errors.hpp"
#include "dars/evaluation.hpp"
#include "dars/jsonl.hpp"
#include "dars/parallel.hpp"
#include "dars/prompts.hpp"
#include "dars/reflection.hpp"
#include "dars/thought_tree.hpp"

namespace fs = std::filesystem;

namespace dars {
namespace {

std::string resolve_path(const std::string& config_dir, const std::string& path) {
    if (path.empty()) return path;
    fs::path p(path);
    if (p.is_absolute()) return p.lexically_normal().string();
    return (fs::path(config_dir) / p).lexically_normal().string();
}

void require_field(const json& doc, const char* key, const std::string& where) {
    if (!doc.contains(key)) throw ParseError(where + ": missing field \"" + key + "\"");
}

EndpointConfig parse_endpoint(const json& doc, const std::string& where, const std::string& config_dir) {
    if (!doc.is_object()) throw ParseError(where + ": expected an object");
    EndpointConfig ep;
    ep.backend = doc.value("backend", std::string("scripted"));
    if (ep.backend != "http" && ep.backend != "scripted")
        throw ValidationError(where + ".backend: expected \"http\" or \"scripted\", got \"" + ep.backend + "\"");
    ep.base_url = doc.value("base_url", std::string());
    ep.model = doc.value("model", ep.backend == "http" ? std::string() : std::string("scripted"));
    ep.api_key_env = doc.value("api_key_env", std::string("OPENAI_API_KEY"));
    if (doc.contains("profile")) {
        const json& pr = doc.at("profile");
        if (pr.is_string()) {
            ep.profile_name = pr.get<std::string>();
            if (ep.profile_name != "eval" && ep.profile_name != "baseline-critic" && ep.profile_name != "synthesis")
                throw ValidationError(where + ".profile: unknown profile \"" + ep.profile_name + "\"");
        } else if (pr.is_object()) {
            ep.profile_inline = pr;
        } else {
            throw ParseError(where + ".profile: expected a name or an object");
        }
    }
    ep.script_path = doc.value("script", std::string());
    if (!ep.script_path.empty()) ep.script_path = resolve_path(config_dir, ep.script_path);
    ep.max_attempts = doc.value("max_attempts", 4);
    ep.initial_backoff_ms = doc.value("initial_backoff_ms", 250);
    ep.backoff_multiplier = doc.value("backoff_multiplier", 2.0);
    ep.max_backoff_ms = doc.value("max_backoff_ms", 8000);
    ep.timeout_s = doc.value("timeout_s", 120);
    if (doc.contains("api_key"))
        throw ValidationError(where + ": credentials must come from the environment; set api_key_env "
                              "to the variable name instead of embedding a key");
    if (ep.backend == "http") {
        if (ep.base_url.empty()) throw ValidationError(where + ".base_url: required for the http backend");
        if (ep.model.empty()) throw ValidationError(where + ".model: required for the http backend");
    } else {
        if (ep.script_path.empty()) throw ValidationError(where + ".script: required for the scripted backend");
        if (!fs::exists(ep.script_path))
            throw ValidationError(where + ".script: file not found: " + ep.script_path);
    }
    if (ep.max_attempts < 1) throw ValidationError(where + ".max_attempts: must be at least 1");
    return ep;
}

GenerationProfile endpoint_profile(const EndpointConfig& ep) {
    GenerationProfile base;
    if (ep.profile_inline) {
        const json& pr = *ep.profile_inline;
        if (pr.contains("temperature")) base.temperature = pr.at("temperature").get<double>();
        if (pr.contains("max_tokens")) base.max_tokens = pr.at("max_tokens").get<int>();
        if (pr.contains("top_p")) base.top_p = pr.at("top_p").get<double>();
        if (pr.contains("stop")) base.stop_sequences = pr.at("stop").get<std::vector<std::string>>();
    } else if (ep.profile_name == "eval") {
        base = profiles::eval(ep.model);
    } else if (ep.profile_name == "baseline-critic") {
        base = profiles::baseline_critic(ep.model);
    } else {
        base = profiles::synthesis(ep.model);
    }
    base.model_name = ep.model;
    return base;
}

struct BuiltEndpoint {
    std::shared_ptr<ChatGateway> gateway;
    std::shared_ptr<ScriptedBackend> scripted;  // kept for introspection in tests
    GenerationProfile profile;
};

BuiltEndpoint build_endpoint(const EndpointConfig& ep, int concurrency) {
    BuiltEndpoint built;
    built.profile = endpoint_profile(ep);
    std::shared_ptr<ChatBackend> backend;
    if (ep.backend == "scripted") {
        built.scripted = ScriptedBackend::from_file(ep.script_path);
        backend = built.scripted;
    } else {
        HttpBackend::Options opt;
        opt.base_url = ep.base_url;
        opt.api_key_env = ep.api_key_env;
        opt.timeout = std::chrono::seconds(ep.timeout_s);
        backend = std::make_shared<HttpBackend>(opt);
    }
    RetryPolicy policy;
    policy.max_attempts = ep.max_attempts;
    policy.initial_backoff = std::chrono::milliseconds(ep.initial_backoff_ms);
    policy.backoff_multiplier = ep.backoff_multiplier;
    policy.max_backoff = std::chrono::milliseconds(ep.max_backoff_ms);
    built.gateway = std::make_shared<ChatGateway>(backend, policy, concurrency);
    return built;
}

ojson merge_usage(const std::vector<const ChatGateway*>& gws) {
    ojson out;
    long long req = 0, att = 0, pt = 0, ct = 0, tt = 0;
    for (const auto* gw : gws) {
        if (!gw) continue;
        Usage u = gw->usage_totals();
        req += gw->requests_completed();
        att += gw->attempts_made();
        pt += u.prompt_tokens;
        ct += u.completion_tokens;
        tt += u.total_tokens;
    }
    out["requests"] = req;
    out["attempts"] = att;
    out["prompt_tokens"] = pt;
    out["completion_tokens"] = ct;
    out["total_tokens"] = tt;
    return out;
}

struct LoadedDataset {
    DatasetConfig cfg;
    QuestionContext context;
    std::vector<StudentAnswer> answers;
};

std::vector<LoadedDataset> load_corpus(const PipelineConfig& config) {
    std::vector<LoadedDataset> out;
    out.reserve(config.datasets.size());
    for (const auto& ds : config.datasets) {
        LoadedDataset ld;
        ld.cfg = ds;
        ld.context = load_question_context(ds.context_path);
        ld.answers = load_answers(ds.answers_path, ld.context);
        out.push_back(std::move(ld));
    }
    return out;
}

std::vector<StudentAnswer> filter_split(const std::vector<StudentAnswer>& answers, Split split) {
    std::vector<StudentAnswer> out;
    for (const auto& a : answers)
        if (a.split == split) out.push_back(a);
    return out;
}

std::vector<StudentAnswer> filter_splits(const std::vector<StudentAnswer>& answers,
                                         const std::vector<Split>& splits) {
    std::vector<StudentAnswer> out;
    for (const auto& a : answers)
        if (std::find(splits.begin(), splits.end(), a.split) != splits.end()) out.push_back(a);
    return out;
}

// Seeded subsample that keeps corpus order. Same seed, same file, same pick.
std::vector<StudentAnswer> subsample(std::vector<StudentAnswer> answers, std::optional<int> limit,
                                     std::uint64_t seed) {
    if (!limit || static_cast<std::size_t>(*limit) >= answers.size()) return answers;
    if (*limit < 0) throw ValidationError("limit_answers: must be non-negative");
    std::vector<std::size_t> idx(answers.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    for (std::size_t i = idx.size() - 1; i > 0; --i) {
        std::size_t j = rng() % (i + 1);
        std::swap(idx[i], idx[j]);
    }
    idx.resize(static_cast<std::size_t>(*limit));
    std::sort(idx.begin(), idx.end());
    std::vector<StudentAnswer> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(answers[i]);
    return out;
}

std::string out_root(const PipelineConfig& config, const CommandOptions& options) {
    if (options.out_dir) return *options.out_dir;
    return config.output_dir;
}

void write_manifest(const std::string& dir, const std::string& command, const std::string& config_hash,
                    const ojson& counts, const ojson& usage) {
    ojson m;
    m["command"] = command;
    m["config_hash"] = config_hash;
    m["counts"] = counts;
    m["usage"] = usage;
    write_text_file(dir + "/manifest.json", m.dump(2) + "\n");
}

std::optional<std::string> stored_config_hash(const std::string& dir) {
    fs::path p = fs::path(dir) / "manifest.json";
    if (!fs::exists(p)) return std::nullopt;
    json m = json::parse(read_text_file(p.string()));
    if (!m.contains("config_hash")) return std::nullopt;
    return m.at("config_hash").get<std::string>();
}

struct JudgeBundle {
    ElementJudge judge;
    std::shared_ptr<ChatGateway> gateway;  // null for table judges
};

JudgeBundle build_judge_bundle(const PipelineConfig& config, int concurrency) {
    JudgeBundle jb;
    if (config.judge.backend == "table") {
        jb.judge = load_table_judge(config.judge.table_path);
    } else {
        if (!config.judge.endpoint) throw ValidationError("judge.endpoint: required for the llm judge");
        BuiltEndpoint be = build_endpoint(*config.judge.endpoint, concurrency);
        jb.gateway = be.gateway;
        jb.judge = make_llm_judge(be.gateway, be.profile);
    }
    return jb;
}

int classify_exit(const std::exception& e) {
    if (dynamic_cast<const AuthError*>(&e)) return kExitTransport;
    if (dynamic_cast<const TransportExhaustedError*>(&e)) return kExitTransport;
    if (dynamic_cast<const TransportError*>(&e)) return kExitTransport;
    if (dynamic_cast<const WireFormatError*>(&e)) return kExitTransport;
    if (dynamic_cast<const GatewayError*>(&e)) return kExitTransport;
    return kExitValidation;
}

bool is_transport(const std::exception& e) { return classify_exit(e) == kExitTransport; }

}  // namespace

PipelineConfig load_pipeline_config(const std::string& path) {
    if (!fs::exists(path)) throw ValidationError("config file not found: " + path);
    json doc;
    try {
        doc = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError("config: expected a JSON object");

    std::string config_dir = fs::path(path).parent_path().string();
    if (config_dir.empty()) config_dir = ".";

    PipelineConfig cfg;
    cfg.config_hash = canonical_json_hash(doc);

    require_field(doc, "datasets", "config");
    if (!doc.at("datasets").is_array() || doc.at("datasets").empty())
        throw ValidationError("config.datasets: expected a non-empty array");
    std::set<std::string> seen_names;
    for (std::size_t i = 0; i < doc.at("datasets").size(); ++i) {
        const json& d = doc.at("datasets").at(i);
        std::string where = "config.datasets[" + std::to_string(i) + "]";
        require_field(d, "name", where);
        require_field(d, "context", where);
        require_field(d, "answers", where);
        DatasetConfig ds;
        ds.name = d.at("name").get<std::string>();
        if (ds.name.empty()) throw ValidationError(where + ".name: must be non-empty");
        if (!seen_names.insert(ds.name).second)
            throw ValidationError(where + ".name: duplicate dataset name \"" + ds.name + "\"");
        ds.context_path = resolve_path(config_dir, d.at("context").get<std::string>());
        ds.answers_path = resolve_path(config_dir, d.at("answers").get<std::string>());
        if (!fs::exists(ds.context_path))
            throw ValidationError(where + ".context: file not found: " + ds.context_path);
        if (!fs::exists(ds.answers_path))
            throw ValidationError(where + ".answers: file not found: " + ds.answers_path);
        cfg.datasets.push_back(std::move(ds));
    }

    cfg.output_dir = resolve_path(config_dir, doc.value("output_dir", std::string("out")));
    cfg.seed = doc.value("seed", 0ULL);
    cfg.concurrency = doc.value("concurrency", 4);
    if (cfg.concurrency < 1) throw ValidationError("config.concurrency: must be at least 1");

    if (doc.contains("endpoints")) {
        const json& eps = doc.at("endpoints");
        if (!eps.is_object()) throw ParseError("config.endpoints: expected an object");
        if (eps.contains("synthesizer"))
            cfg.synthesizer = parse_endpoint(eps.at("synthesizer"), "config.endpoints.synthesizer", config_dir);
        if (eps.contains("reasoner"))
            cfg.reasoner = parse_endpoint(eps.at("reasoner"), "config.endpoints.reasoner", config_dir);
        if (eps.contains("critic"))
            cfg.critic = parse_endpoint(eps.at("critic"), "config.endpoints.critic", config_dir);
    }

    if (doc.contains("judge")) {
        const json& j = doc.at("judge");
        if (!j.is_object()) throw ParseError("config.judge: expected an object");
        cfg.judge.backend = j.value("backend", std::string("table"));
        if (cfg.judge.backend != "table" && cfg.judge.backend != "llm")
            throw ValidationError("config.judge.backend: expected \"table\" or \"llm\"");
        if (cfg.judge.backend == "table") {
            require_field(j, "table", "config.judge");
            cfg.judge.table_path = resolve_path(config_dir, j.at("table").get<std::string>());
            if (!fs::exists(cfg.judge.table_path))
                throw ValidationError("config.judge.table: file not found: " + cfg.judge.table_path);
        } else {
            require_field(j, "endpoint", "config.judge");
            cfg.judge.endpoint = parse_endpoint(j.at("endpoint"), "config.judge.endpoint", config_dir);
        }
    }

    if (doc.contains("synthesis")) {
        const json& s = doc.at("synthesis");
        cfg.synthesis.path_cap = s.value("path_cap", 64);
        cfg.synthesis.pairs_cap = s.value("pairs_cap", 4);
        cfg.synthesis.parse_retries = s.value("parse_retries", 2);
        cfg.synthesis.include_chosen_rationale = s.value("include_chosen_rationale", true);
        if (s.contains("splits")) {
            cfg.synthesis.splits.clear();
            for (const auto& sp : s.at("splits"))
                cfg.synthesis.splits.push_back(split_from_string(sp.get<std::string>()));
            if (cfg.synthesis.splits.empty())
                throw ValidationError("config.synthesis.splits: must be non-empty");
        }
        if (s.contains("limit_answers")) cfg.synthesis.limit_answers = s.at("limit_answers").get<int>();
        if (cfg.synthesis.path_cap < 1) throw ValidationError("config.synthesis.path_cap: must be at least 1");
        if (cfg.synthesis.pairs_cap < 0)
            throw ValidationError("config.synthesis.pairs_cap: must be non-negative");
        if (cfg.synthesis.parse_retries < 0)
            throw ValidationError("config.synthesis.parse_retries: must be non-negative");
    }

    if (doc.contains("sft")) {
        const json& s = doc.at("sft");
        cfg.sft.stop_completion = s.value("stop_completion", cfg.sft.stop_completion);
        cfg.sft.critic_reflect_depth2 = s.value("critic_reflect_depth2", false);
        if (s.contains("system_message")) cfg.sft.system_message = s.at("system_message").get<std::string>();
        cfg.sft.emit_dpo = s.value("emit_dpo", false);
        if (cfg.sft.stop_completion.empty())
            throw ValidationError("config.sft.stop_completion: must be non-empty");
    }

    if (doc.contains("loop")) {
        const json& l = doc.at("loop");
        cfg.loop.max_iterations = l.value("max_iterations", 8);
        cfg.loop.stop_token = l.value("stop_token", std::string("[STOP]"));
        cfg.loop.on_unextractable = l.value("on_unextractable", std::string("carry_previous"));
        if (cfg.loop.on_unextractable != "carry_previous" && cfg.loop.on_unextractable != "error")
            throw ValidationError("config.loop.on_unextractable: expected \"carry_previous\" or \"error\"");
        if (l.contains("split")) cfg.loop.split = split_from_string(l.at("split").get<std::string>());
        cfg.loop.redact_transcripts = l.value("redact_transcripts", false);
        if (l.contains("limit_answers")) cfg.loop.limit_answers = l.at("limit_answers").get<int>();
        if (l.contains("extra_score_patterns"))
            cfg.loop.extra_score_patterns = l.at("extra_score_patterns").get<std::vector<std::string>>();
        if (cfg.loop.max_iterations < 1)
            throw ValidationError("config.loop.max_iterations: must be at least 1");
        if (cfg.loop.stop_token.empty()) throw ValidationError("config.loop.stop_token: must be non-empty");
    }

    if (doc.contains("evaluation")) {
        const json& e = doc.at("evaluation");
        cfg.evaluation.exclude_absent_classes = e.value("exclude_absent_classes", false);
        if (e.contains("trajectory_logs")) {
            for (const auto& t : e.at("trajectory_logs"))
                cfg.evaluation.trajectory_logs.push_back(resolve_path(config_dir, t.get<std::string>()));
        }
        cfg.evaluation.top_k_transitions = e.value("top_k_transitions", 10);
        cfg.evaluation.paired_t_test = e.value("paired_t_test", false);
        if (cfg.evaluation.top_k_transitions < 0)
            throw ValidationError("config.evaluation.top_k_transitions: must be non-negative");
    }

    return cfg;
}

// ---------------------------------------------------------------- ingest

CommandResult cmd_ingest(const PipelineConfig& config, const CommandOptions& options) {
    (void)options;  // read-only either way
    std::ostringstream out;
    long long grand_total = 0;
    for (const auto& ds : config.datasets) {
        QuestionContext ctx = load_question_context(ds.context_path);
        std::vector<StudentAnswer> answers = load_answers(ds.answers_path, ctx);
        DatasetStats stats = dataset_stats(answers);
        grand_total += stats.total;
        out << ds.name << ": " << stats.total << " answers (train " << stats.train << ", validation "
            << stats.validation << ", test " << stats.test << "), " << ctx.element_count()
            << " key elements, scores " << ctx.score_range.lo << ".." << ctx.score_range.hi << "\n";
        out << "  gold histogram:";
        for (int s = ctx.score_range.lo; s <= ctx.score_range.hi; ++s) {
            auto it = stats.score_histogram.find(s);
            out << " " << s << "=" << (it == stats.score_histogram.end() ? 0 : it->second);
        }
        out << "\n";
    }
    out << "total: " << grand_total << " answers across " << config.datasets.size() << " dataset(s)";
    return {kExitOk, out.str()};
}

// ---------------------------------------------------------------- synthesize

namespace {

struct AnswerOutcome {
    std::vector<ojson> chosen_rows;
    std::vector<ojson> reflection_rows;
    std::vector<ojson> quarantine_rows;
    bool transport_error = false;
};

ojson quarantine_row(const std::string& dataset, const std::string& answer_id, const std::string& id,
                     const std::string& stage, const std::string& error) {
    ojson q;
    q["dataset"] = dataset;
    q["answer_id"] = answer_id;
    q["id"] = id;
    q["stage"] = stage;
    q["error"] = error;
    return q;
}

AnswerOutcome process_answer(const LoadedDataset& ds, const StudentAnswer& answer,
                             const ElementJudge& judge, ChatGateway& synth_gateway,
                             const GenerationProfile& synth_profile, const PipelineConfig& config) {
    AnswerOutcome out;
    const QuestionContext& ctx = ds.context;
    SynthesisOptions synth_opts;
    synth_opts.include_chosen_rationale = config.synthesis.include_chosen_rationale;
    synth_opts.parse_retries = config.synthesis.parse_retries;

    try {
        std::vector<TreePath> paths = build_paths(answer, ctx, judge, config.synthesis.path_cap);
        PartitionedPaths part = partition_paths(paths, answer.gold_score);
        if (part.chosen.empty()) {
            ojson row;
            row["dataset"] = ds.cfg.name;
            row["answer_id"] = answer.id;
            row["bits"] = nullptr;
            row["rationale"] = nullptr;
            row["status"] = "no_chosen_path";
            out.chosen_rows.push_back(std::move(row));
            return out;
        }
        std::vector<PreferencePair> pairs =
            make_preference_pairs(part.chosen, part.rejected, answer.id, config.synthesis.pairs_cap);

        // Every distinct decision vector is summarized once per answer.
        std::map<std::string, std::string> summary_cache;
        auto summarized = [&](const TreePath& path) -> std::string {
            std::string key = to_string(path.decisions);
            auto it = summary_cache.find(key);
            if (it != summary_cache.end()) return it->second;
            std::string text = summarize_rationale(path, answer, ctx, synth_gateway,
                                                   config.synthesis.parse_retries, synth_profile);
            summary_cache.emplace(key, text);
            return text;
        };

        TreePath primary = part.chosen.front();
        primary.rationale_text = summarized(primary);
        ojson row;
        row["dataset"] = ds.cfg.name;
        row["answer_id"] = answer.id;
        row["bits"] = to_string(primary.decisions);
        row["rationale"] = primary.rationale_text;
        row["status"] = "ok";
        out.chosen_rows.push_back(std::move(row));

        for (std::size_t k = 0; k < pairs.size(); ++k) {
            std::string rid = answer.id + "#" + std::to_string(k);
            try {
                PreferencePair pair = pairs[k];
                pair.chosen.rationale_text = summarized(pair.chosen);
                pair.rejected.rationale_text = summarized(pair.rejected);
                ReflectionRecord rec =
                    synthesize_reflection(answer, pair, ctx, synth_gateway, synth_opts, synth_profile);
                rec.id = rid;
                ojson rrow = reflection_record_to_json(rec);
                ojson with_ds;
                with_ds["dataset"] = ds.cfg.name;
                for (auto it = rrow.begin(); it != rrow.end(); ++it) with_ds[it.key()] = it.value();
                out.reflection_rows.push_back(std::move(with_ds));
            } catch (const std::exception& e) {
                if (is_transport(e)) out.transport_error = true;
                out.quarantine_rows.push_back(
                    quarantine_row(ds.cfg.name, answer.id, rid, "reflection", e.what()));
            }
        }
    } catch (const std::exception& e) {
        if (is_transport(e)) out.transport_error = true;
        out.quarantine_rows.push_back(quarantine_row(ds.cfg.name, answer.id, answer.id, "paths", e.what()));
    }
    return out;
}

}  // namespace

CommandResult cmd_synthesize(const PipelineConfig& config, const CommandOptions& options) {
    if (!config.synthesizer)
        throw ValidationError("config.endpoints.synthesizer: required for synthesize");
    std::uint64_t seed = options.seed.value_or(config.seed);
    int concurrency = options.concurrency.value_or(config.concurrency);
    if (concurrency < 1) throw ValidationError("concurrency: must be at least 1");

    std::vector<LoadedDataset> corpus = load_corpus(config);
    std::string dir = out_root(config, options) + "/synthesize";

    // Resume bookkeeping: an answer id present in chosen_rationales.jsonl is done.
    std::set<std::string> done;
    std::vector<ojson> prior_chosen, prior_reflections, prior_quarantine;
    if (fs::exists(dir + "/manifest.json")) {
        auto stored = stored_config_hash(dir);
        if (stored && *stored != config.config_hash)
            throw ValidationError("synthesize: existing output at " + dir +
                                  " was produced with a different config (hash " + *stored +
                                  " vs " + config.config_hash + "); use a fresh --out to regenerate");
        if (fs::exists(dir + "/chosen_rationales.jsonl"))
            for (auto& row : read_jsonl(dir + "/chosen_rationales.jsonl")) {
                done.insert(row.at("dataset").get<std::string>() + "/" + row.at("answer_id").get<std::string>());
                prior_chosen.push_back(ojson(row));
            }
        if (fs::exists(dir + "/reflections.jsonl"))
            for (auto& row : read_jsonl(dir + "/reflections.jsonl")) prior_reflections.push_back(ojson(row));
        if (fs::exists(dir + "/quarantine.jsonl"))
            for (auto& row : read_jsonl(dir + "/quarantine.jsonl")) prior_quarantine.push_back(ojson(row));
    }

    struct WorkItem {
        const LoadedDataset* ds;
        StudentAnswer answer;
    };
    std::vector<WorkItem> work;
    long long considered = 0;
    for (const auto& ds : corpus) {
        std::vector<StudentAnswer> picked =
            subsample(filter_splits(ds.answers, config.synthesis.splits), config.synthesis.limit_answers, seed);
        considered += static_cast<long long>(picked.size());
        for (auto& a : picked) {
            if (done.count(ds.cfg.name + "/" + a.id)) continue;
            work.push_back({&ds, std::move(a)});
        }
    }

    // A re-attempted answer replaces its earlier quarantine rows.
    std::set<std::string> retrying;
    for (const auto& w : work) retrying.insert(w.ds->cfg.name + "/" + w.answer.id);
    prior_quarantine.erase(
        std::remove_if(prior_quarantine.begin(), prior_quarantine.end(),
                       [&](const ojson& row) {
                           return retrying.count(row.at("dataset").get<std::string>() + "/" +
                                                 row.at("answer_id").get<std::string>()) > 0;
                       }),
        prior_quarantine.end());

    if (options.dry_run) {
        std::ostringstream out;
        out << "dry-run: would synthesize " << work.size() << " answer(s) (" << done.size()
            << " already present, " << considered << " eligible) into " << dir;
        return {kExitOk, out.str()};
    }

    JudgeBundle jb = build_judge_bundle(config, concurrency);
    BuiltEndpoint synth = build_endpoint(*config.synthesizer, concurrency);

    std::vector<AnswerOutcome> outcomes = parallel_map<WorkItem, AnswerOutcome>(
        work,
        [&](const WorkItem& item) {
            return process_answer(*item.ds, item.answer, jb.judge, *synth.gateway, synth.profile, config);
        },
        concurrency);

    fs::create_directories(dir);
    std::vector<ojson> chosen_rows = prior_chosen;
    std::vector<ojson> reflection_rows = prior_reflections;
    std::vector<ojson> quarantine_rows = prior_quarantine;
    bool transport_error = false;
    for (auto& oc : outcomes) {
        transport_error = transport_error || oc.transport_error;
        for (auto& r : oc.chosen_rows) chosen_rows.push_back(std::move(r));
        for (auto& r : oc.reflection_rows) reflection_rows.push_back(std::move(r));
        for (auto& r : oc.quarantine_rows) quarantine_rows.push_back(std::move(r));
    }
    write_jsonl(dir + "/chosen_rationales.jsonl", chosen_rows);
    write_jsonl(dir + "/reflections.jsonl", reflection_rows);
    write_jsonl(dir + "/quarantine.jsonl", quarantine_rows);

    long long no_chosen = 0;
    for (const auto& row : chosen_rows)
        if (row.at("status").get<std::string>() == "no_chosen_path") ++no_chosen;

    ojson counts;
    counts["answers_considered"] = considered;
    counts["answers_processed"] = static_cast<long long>(work.size());
    counts["answers_resumed"] = static_cast<long long>(done.size());
    counts["chosen_rationales"] = static_cast<long long>(chosen_rows.size()) - no_chosen;
    counts["no_chosen_path"] = no_chosen;
    counts["reflections"] = static_cast<long long>(reflection_rows.size());
    counts["quarantined"] = static_cast<long long>(quarantine_rows.size());
    write_manifest(dir, "synthesize", config.config_hash, counts,
                   merge_usage({synth.gateway.get(), jb.gateway.get()}));

    std::ostringstream out;
    out << "synthesize: " << counts["reflections"] << " reflection(s) for "
        << counts["chosen_rationales"] << " answer(s), " << no_chosen << " without a matching path, "
        << counts["quarantined"] << " quarantined -> " << dir;
    int exit_code = kExitOk;
    if (transport_error) exit_code = kExitTransport;
    else if (!quarantine_rows.empty()) exit_code = kExitPartial;
    return {exit_code, out.str()};
}

// ---------------------------------------------------------------- build_sft

CommandResult cmd_build_sft(const PipelineConfig& config, const CommandOptions& options) {
    std::vector<LoadedDataset> corpus = load_corpus(config);
    std::string root = out_root(config, options);
    std::string in_dir = root + "/synthesize";
    std::string dir = root + "/sft";

    if (!fs::exists(in_dir + "/chosen_rationales.jsonl") || !fs::exists(in_dir + "/reflections.jsonl"))
        throw ValidationError("build_sft: missing synthesize outputs under " + in_dir +
                              "; run synthesize first");

    struct AnswerBundle {
        std::optional<json> chosen;
        std::vector<json> reflections;
    };
    std::map<std::string, std::map<std::string, AnswerBundle>> by_dataset;
    for (auto& row : read_jsonl(in_dir + "/chosen_rationales.jsonl"))
        by_dataset[row.at("dataset").get<std::string>()][row.at("answer_id").get<std::string>()].chosen = row;
    for (auto& row : read_jsonl(in_dir + "/reflections.jsonl"))
        by_dataset[row.at("dataset").get<std::string>()][row.at("answer_id").get<std::string>()]
            .reflections.push_back(row);

    SftOptions sft_opts;
    sft_opts.stop_completion = config.sft.stop_completion;
    sft_opts.system_message = config.sft.system_message;

    std::vector<SftRecord> task, refine, reflect, stop;
    std::vector<DpoRecord> dpo;
    long long answers_used = 0, skipped_no_chosen = 0, skipped_missing = 0;

    for (const auto& ds : corpus) {
        auto ds_it = by_dataset.find(ds.cfg.name);
        if (ds_it == by_dataset.end()) continue;
        for (const auto& answer : ds.answers) {
            auto it = ds_it->second.find(answer.id);
            if (it == ds_it->second.end()) {
                ++skipped_missing;
                continue;
            }
            const AnswerBundle& bundle = it->second;
            if (!bundle.chosen || bundle.chosen->at("status").get<std::string>() != "ok") {
                ++skipped_no_chosen;
                continue;
            }
            TreePath chosen;
            chosen.decisions = decision_vector_from_string(bundle.chosen->at("bits").get<std::string>());
            chosen.derived_score = answer.gold_score;
            chosen.rationale_text = bundle.chosen->at("rationale").get<std::string>();
            chosen.source = PathSource::External;

            task.push_back(build_reasoner_task(answer, ds.context, chosen, sft_opts));
            stop.push_back(build_critic_stop(answer, ds.context, chosen.rationale_text, 1, nullptr, sft_opts));

            std::vector<ReflectionRecord> recs;
            for (const auto& raw : bundle.reflections) recs.push_back(reflection_record_from_json(raw));
            for (const auto& rec : recs) {
                refine.push_back(build_reasoner_refine(answer, ds.context, rec, sft_opts));
                reflect.push_back(build_critic_reflect(answer, ds.context, rec, 1, nullptr, sft_opts));
                stop.push_back(build_critic_stop(answer, ds.context, chosen.rationale_text, 2, &rec, sft_opts));
            }
            if (config.sft.critic_reflect_depth2) {
                for (std::size_t i = 1; i < recs.size(); ++i) {
                    if (recs[i].rejected_bits != recs[0].rejected_bits) {
                        reflect.push_back(
                            build_critic_reflect(answer, ds.context, recs[i], 2, &recs[0], sft_opts));
                        break;
                    }
                }
            }
            if (config.sft.emit_dpo) {
                for (const auto& rec : recs) dpo.push_back(build_dpo_record(answer, ds.context, rec));
            }
            ++answers_used;
        }
    }

    ojson counts;
    counts["reasoner_task"] = static_cast<long long>(task.size());
    counts["reasoner_refine"] = static_cast<long long>(refine.size());
    counts["critic_reflect"] = static_cast<long long>(reflect.size());
    counts["critic_stop"] = static_cast<long long>(stop.size());
    if (config.sft.emit_dpo) counts["dpo_pairs"] = static_cast<long long>(dpo.size());
    counts["answers_used"] = answers_used;
    counts["answers_without_chosen_path"] = skipped_no_chosen;
    counts["answers_not_synthesized"] = skipped_missing;

    std::ostringstream out;
    out << "build_sft: task " << task.size() << ", refine " << refine.size() << ", reflect "
        << reflect.size() << ", stop " << stop.size();
    if (config.sft.emit_dpo) out << ", dpo " << dpo.size();
    out << " from " << answers_used << " answer(s)";

    if (options.dry_run) {
        out << " (dry-run, nothing written)";
        return {kExitOk, out.str()};
    }

    fs::create_directories(dir);
    emit_sft(task, dir + "/reasoner_task.jsonl");
    emit_sft(refine, dir + "/reasoner_refine.jsonl");
    emit_sft(reflect, dir + "/critic_reflect.jsonl");
    emit_sft(stop, dir + "/critic_stop.jsonl");
    if (config.sft.emit_dpo) emit_dpo(dpo, dir + "/dpo_pairs.jsonl");
    write_text_file(dir + "/counts.json", counts.dump(2) + "\n");
    ojson usage;
    usage["requests"] = 0;
    usage["attempts"] = 0;
    usage["prompt_tokens"] = 0;
    usage["completion_tokens"] = 0;
    usage["total_tokens"] = 0;
    write_manifest(dir, "build_sft", config.config_hash, counts, usage);
    out << " -> " << dir;
    return {kExitOk, out.str()};
}

// ---------------------------------------------------------------- run

CommandResult cmd_run(const PipelineConfig& config, const CommandOptions& options) {
    if (!config.reasoner) throw ValidationError("config.endpoints.reasoner: required for run");
    if (!config.critic) throw ValidationError("config.endpoints.critic: required for run");
    std::uint64_t seed = options.seed.value_or(config.seed);
    int concurrency = options.concurrency.value_or(config.concurrency);
    if (concurrency < 1) throw ValidationError("concurrency: must be at least 1");

    std::vector<LoadedDataset> corpus = load_corpus(config);
    std::string dir = out_root(config, options) + "/run";

    struct DatasetWork {
        const LoadedDataset* ds;
        std::vector<StudentAnswer> answers;
    };
    std::vector<DatasetWork> work;
    long long total_answers = 0;
    for (const auto& ds : corpus) {
        DatasetWork w{&ds, subsample(filter_split(ds.answers, config.loop.split), config.loop.limit_answers, seed)};
        total_answers += static_cast<long long>(w.answers.size());
        work.push_back(std::move(w));
    }

    if (options.dry_run) {
        std::ostringstream out;
        out << "dry-run: would run " << total_answers << " trajectory(ies) over " << work.size()
            << " dataset(s), max " << config.loop.max_iterations << " iteration(s) each, into " << dir;
        return {kExitOk, out.str()};
    }

    BuiltEndpoint reasoner = build_endpoint(*config.reasoner, concurrency);
    BuiltEndpoint critic = build_endpoint(*config.critic, concurrency);

    LoopConfig loop_cfg;
    loop_cfg.max_iterations = config.loop.max_iterations;
    loop_cfg.stop_token = config.loop.stop_token;
    loop_cfg.reasoner_profile = reasoner.profile;
    loop_cfg.critic_profile = critic.profile;
    loop_cfg.on_unextractable = config.loop.on_unextractable == "error" ? UnextractablePolicy::Error
                                                                        : UnextractablePolicy::CarryPrevious;
    loop_cfg.baseline_critic = options.baseline_critic;
    loop_cfg.extra_score_patterns = config.loop.extra_score_patterns;

    fs::create_directories(dir);
    std::vector<ojson> rows;
    ojson curves = ojson::object();
    std::vector<int> pooled_iters;  // stopped trajectories only, for the overall curve
    long long n_stopped = 0, n_capped = 0, n_errored = 0, pooled_total = 0;

    for (const auto& w : work) {
        BatchResult batch = run_batch(w.answers, w.ds->context, *reasoner.gateway, *critic.gateway,
                                      loop_cfg, concurrency);
        n_stopped += batch.stopped;
        n_capped += batch.capped;
        n_errored += batch.errored;
        pooled_total += static_cast<long long>(batch.trajectories.size());
        for (const auto& t : batch.trajectories) {
            if (t.terminated_by == Termination::Stop) pooled_iters.push_back(t.iterations_used);
            ojson row;
            row["dataset"] = w.ds->cfg.name;
            row["answer_id"] = t.answer_id;
            row["terminated_by"] = to_string(t.terminated_by);
            row["iterations_used"] = t.iterations_used;
            row["scores"] = t.scores;
            if (t.error.empty()) row["error"] = nullptr;
            else row["error"] = t.error;
            if (!config.loop.redact_transcripts) {
                ojson turns = ojson::array();
                for (const auto& turn : t.turns) {
                    ojson tj;
                    tj["actor"] = to_string(turn.actor);
                    tj["iteration"] = turn.iteration_index;
                    tj["wall_ms"] = turn.wall_ms;
                    tj["text"] = turn.text;
                    turns.push_back(std::move(tj));
                }
                row["turns"] = std::move(turns);
            }
            rows.push_back(std::move(row));
        }
        curves[w.ds->cfg.name] = batch.curve;
    }
    write_jsonl(dir + "/trajectories.jsonl", rows);

    std::vector<double> overall(static_cast<std::size_t>(config.loop.max_iterations) + 1, 0.0);
    if (pooled_total > 0) {
        for (int t = 0; t <= config.loop.max_iterations; ++t) {
            long long n = 0;
            for (int it : pooled_iters)
                if (it <= t) ++n;
            overall[static_cast<std::size_t>(t)] =
                static_cast<double>(n) / static_cast<double>(pooled_total);
        }
    }
    ojson curve_doc;
    curve_doc["max_iterations"] = config.loop.max_iterations;
    curve_doc["datasets"] = curves;
    curve_doc["overall"] = overall;
    write_text_file(dir + "/completion_curve.json", curve_doc.dump(2) + "\n");

    ojson counts;
    counts["trajectories"] = pooled_total;
    counts["stopped"] = n_stopped;
    counts["capped"] = n_capped;
    counts["errored"] = n_errored;
    counts["baseline_critic"] = options.baseline_critic;
    write_manifest(dir, "run", config.config_hash, counts,
                   merge_usage({reasoner.gateway.get(), critic.gateway.get()}));

    std::ostringstream out;
    out << "run: " << pooled_total << " trajectory(ies): " << n_stopped << " stopped, " << n_capped
        << " capped, " << n_errored << " errored -> " << dir;
    return {kExitOk, out.str()};
}

// ---------------------------------------------------------------- evaluate

namespace {

struct LogSlice {
    // Per dataset: aligned initial and final labeled pairs for scored trajectories.
    std::map<std::string, std::vector<LabeledPair>> initial;
    std::map<std::string, std::vector<LabeledPair>> final_pass;
    long long unscored = 0;
};

LogSlice slice_log(const std::string& path, const std::vector<LoadedDataset>& corpus) {
    std::map<std::string, const LoadedDataset*> by_name;
    for (const auto& ds : corpus) by_name[ds.cfg.name] = &ds;
    LogSlice slice;
    for (const auto& row : read_jsonl(path)) {
        std::string ds_name = row.at("dataset").get<std::string>();
        auto it = by_name.find(ds_name);
        if (it == by_name.end())
            throw ValidationError("evaluate: log " + path + " references unknown dataset \"" + ds_name + "\"");
        std::string answer_id = row.at("answer_id").get<std::string>();
        const StudentAnswer* answer = nullptr;
        for (const auto& a : it->second->answers)
            if (a.id == answer_id) {
                answer = &a;
                break;
            }
        if (!answer)
            throw ValidationError("evaluate: log " + path + " references unknown answer \"" + answer_id +
                                  "\" in dataset \"" + ds_name + "\"");
        std::vector<int> scores = row.at("scores").get<std::vector<int>>();
        if (scores.empty()) {
            ++slice.unscored;
            continue;
        }
        slice.initial[ds_name].push_back({answer->gold_score, scores.front(), answer_id, "initial"});
        slice.final_pass[ds_name].push_back({answer->gold_score, scores.back(), answer_id, "final"});
    }
    return slice;
}

std::vector<EvalDataset> to_eval_datasets(const std::map<std::string, std::vector<LabeledPair>>& slices,
                                          const std::vector<LoadedDataset>& corpus, bool exclude_absent) {
    std::vector<EvalDataset> out;
    for (const auto& ds : corpus) {
        auto it = slices.find(ds.cfg.name);
        if (it == slices.end() || it->second.empty()) continue;
        out.push_back({ds.cfg.name, it->second, ds.context.score_range, exclude_absent});
    }
    return out;
}

}  // namespace

CommandResult cmd_evaluate(const PipelineConfig& config, const CommandOptions& options) {
    std::vector<LoadedDataset> corpus = load_corpus(config);
    std::string root = out_root(config, options);
    std::string dir = root + "/eval";

    std::vector<std::string> logs = config.evaluation.trajectory_logs;
    if (logs.empty()) logs.push_back(root + "/run/trajectories.jsonl");
    for (const auto& log : logs)
        if (!fs::exists(log))
            throw ValidationError("evaluate: trajectory log not found: " + log + "; run the loop first");

    if (options.dry_run) {
        std::ostringstream out;
        out << "dry-run: would evaluate " << logs.size() << " trajectory log(s) into " << dir;
        return {kExitOk, out.str()};
    }

    LogSlice primary = slice_log(logs.front(), corpus);
    bool excl = config.evaluation.exclude_absent_classes;
    EvalReport initial_report = build_report(to_eval_datasets(primary.initial, corpus, excl));
    EvalReport final_report = build_report(to_eval_datasets(primary.final_pass, corpus, excl));

    // Transition analytics per dataset, on the primary log.
    ojson transitions_doc = ojson::object();
    std::ostringstream transition_text;
    for (const auto& ds : corpus) {
        auto ii = primary.initial.find(ds.cfg.name);
        auto fi = primary.final_pass.find(ds.cfg.name);
        if (ii == primary.initial.end() || fi == primary.final_pass.end()) continue;
        TransitionAnalysis ta = transitions(ii->second, fi->second, ds.context.score_range);
        ojson t;
        t["correct_to_correct"] = ta.correct_to_correct;
        t["incorrect_to_correct"] = ta.incorrect_to_correct;
        t["correct_to_incorrect"] = ta.correct_to_incorrect;
        t["incorrect_to_incorrect"] = ta.incorrect_to_incorrect;
        ojson ranked = ojson::array();
        int k = 0;
        for (const auto& triple : ta.ranked) {
            if (k++ >= config.evaluation.top_k_transitions) break;
            ojson r;
            r["gold"] = triple.gold;
            r["from"] = triple.from;
            r["to"] = triple.to;
            r["count"] = triple.count;
            ranked.push_back(std::move(r));
        }
        t["ranked"] = std::move(ranked);
        transitions_doc[ds.cfg.name] = std::move(t);
        transition_text << ds.cfg.name << ": kept correct " << ta.correct_to_correct << ", fixed "
                        << ta.incorrect_to_correct << ", broke " << ta.correct_to_incorrect
                        << ", kept wrong " << ta.incorrect_to_incorrect << "\n";
    }

    // With at least two logs, compare overall final metrics across logs 0 and 1.
    ojson significance = nullptr;
    if (logs.size() >= 2) {
        auto per_dataset_metric = [&](const LogSlice& slice) {
            EvalReport rep = build_report(to_eval_datasets(slice.final_pass, corpus, excl));
            std::vector<double> acc, f1, kappa;
            for (const auto& row : rep.rows) {
                acc.push_back(row.acc);
                f1.push_back(row.f1);
                kappa.push_back(row.qwk);
            }
            return std::array<std::vector<double>, 3>{acc, f1, kappa};
        };
        LogSlice other = slice_log(logs[1], corpus);
        auto a = per_dataset_metric(primary);
        auto b = per_dataset_metric(other);
        const char* names[3] = {"accuracy", "macro_f1", "qwk"};
        significance = ojson::object();
        for (int m = 0; m < 3; ++m) {
            if (a[m].size() < 2 || a[m].size() != b[m].size()) {
                significance[names[m]] = nullptr;
                continue;
            }
            double p = config.evaluation.paired_t_test ? paired_one_tailed_t_test(a[m], b[m])
                                                       : one_tailed_t_test(a[m], b[m]);
            significance[names[m]] = p;
        }
    }

    ojson report_doc;
    report_doc["initial"] = report_to_json(initial_report);
    report_doc["final"] = report_to_json(final_report);
    report_doc["unscored_trajectories"] = primary.unscored;
    report_doc["significance"] = significance;

    std::ostringstream text;
    text << render_comparison_text(initial_report, final_report);
    text << "\nTransitions (gold agreement, first pass vs final):\n" << transition_text.str();
    if (primary.unscored > 0)
        text << "\nExcluded " << primary.unscored << " trajectory(ies) with no extracted score.\n";
    if (!significance.is_null()) {
        text << "\nOne-tailed p (this run's final metrics above " << logs[1] << ", per-dataset samples):\n";
        for (auto it = significance.begin(); it != significance.end(); ++it) {
            if (it.value().is_null()) text << "  " << it.key() << ": not enough datasets\n";
            else text << "  " << it.key() << ": p=" << it.value().get<double>() << "\n";
        }
    }

    fs::create_directories(dir);
    write_text_file(dir + "/report.txt", text.str());
    write_text_file(dir + "/report.json", report_doc.dump(2) + "\n");
    write_text_file(dir + "/transitions.json", transitions_doc.dump(2) + "\n");
    ojson counts;
    counts["logs"] = static_cast<long long>(logs.size());
    counts["datasets_evaluated"] = static_cast<long long>(initial_report.rows.size());
    counts["unscored_trajectories"] = primary.unscored;
    ojson usage;
    usage["requests"] = 0;
    usage["attempts"] = 0;
    usage["prompt_tokens"] = 0;
    usage["completion_tokens"] = 0;
    usage["total_tokens"] = 0;
    write_manifest(dir, "evaluate", config.config_hash, counts, usage);

    std::ostringstream out;
    out << "evaluate: initial acc " << initial_report.overall.acc << " -> final acc "
        << final_report.overall.acc << ", final qwk " << final_report.overall.qwk << " -> " << dir;
    return {kExitOk, out.str()};
}

}  // namespace dars
