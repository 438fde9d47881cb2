#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include "dars/errors.hpp"
#include "dars/pipeline.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    bool dry_run = false;
    bool baseline_critic = false;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int concurrency = 0;
    bool concurrency_set = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_baseline) {
    cmd->add_option("--config", args.config_path, "pipeline config file (JSON)")->required();
    cmd->add_option("--out", args.out_dir, "output directory (overrides the config)");
    cmd->add_flag("--dry-run", args.dry_run, "validate and print the plan; write nothing, call nothing");
    cmd->add_option("--seed", args.seed, "sampling seed (overrides the config)")
        ->each([&args](const std::string&) { args.seed_set = true; });
    cmd->add_option("--concurrency", args.concurrency, "max in-flight requests (overrides the config)")
        ->check(CLI::PositiveNumber)
        ->each([&args](const std::string&) { args.concurrency_set = true; });
    if (with_baseline)
        cmd->add_flag("--baseline-critic", args.baseline_critic,
                      "prompt the critic endpoint with the generic critique instructions");
}

dars::CommandOptions to_options(const CommonArgs& args) {
    dars::CommandOptions opt;
    if (!args.out_dir.empty()) opt.out_dir = args.out_dir;
    opt.dry_run = args.dry_run;
    opt.baseline_critic = args.baseline_critic;
    if (args.seed_set) opt.seed = args.seed;
    if (args.concurrency_set) opt.concurrency = args.concurrency;
    return opt;
}

int classify(const std::exception& e) {
    if (dynamic_cast<const dars::AuthError*>(&e)) return dars::kExitTransport;
    if (dynamic_cast<const dars::TransportExhaustedError*>(&e)) return dars::kExitTransport;
    if (dynamic_cast<const dars::TransportError*>(&e)) return dars::kExitTransport;
    if (dynamic_cast<const dars::WireFormatError*>(&e)) return dars::kExitTransport;
    if (dynamic_cast<const dars::GatewayError*>(&e)) return dars::kExitTransport;
    return dars::kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"thought-tree reflection synthesis, SFT assembly, and dual-model refinement"};
    app.require_subcommand(1);

    CommonArgs ingest_args, synth_args, sft_args, run_args, eval_args;
    CLI::App* ingest = app.add_subcommand("ingest", "load and validate the corpus, print statistics");
    CLI::App* synthesize =
        app.add_subcommand("synthesize", "derive preference pairs and synthesize reflections");
    CLI::App* build_sft = app.add_subcommand("build_sft", "assemble fine-tuning records");
    CLI::App* run = app.add_subcommand("run", "iterative reasoner/critic refinement");
    CLI::App* evaluate = app.add_subcommand("evaluate", "score trajectories and report metrics");
    add_common(ingest, ingest_args, false);
    add_common(synthesize, synth_args, false);
    add_common(build_sft, sft_args, false);
    add_common(run, run_args, true);
    add_common(evaluate, eval_args, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);  // prints usage or help text
        // Keep the documented exit contract: anything but --help/--version
        // is a validation failure.
        return rc == 0 ? 0 : dars::kExitValidation;
    }

    auto dispatch = [&]() -> dars::CommandResult {
        if (app.got_subcommand(ingest))
            return dars::cmd_ingest(dars::load_pipeline_config(ingest_args.config_path),
                                    to_options(ingest_args));
        if (app.got_subcommand(synthesize))
            return dars::cmd_synthesize(dars::load_pipeline_config(synth_args.config_path),
                                        to_options(synth_args));
        if (app.got_subcommand(build_sft))
            return dars::cmd_build_sft(dars::load_pipeline_config(sft_args.config_path),
                                       to_options(sft_args));
        if (app.got_subcommand(run))
            return dars::cmd_run(dars::load_pipeline_config(run_args.config_path), to_options(run_args));
        return dars::cmd_evaluate(dars::load_pipeline_config(eval_args.config_path),
                                  to_options(eval_args));
    };

    try {
        dars::CommandResult result = dispatch();
        std::cout << result.summary << "\n";
        return result.exit_code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return classify(e);
    }
}
