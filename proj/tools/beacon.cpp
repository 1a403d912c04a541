// Command-line driver for the classification pipeline.
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"

#include "beacon/error.hpp"
#include "beacon/pipeline.hpp"

namespace {

struct Common {
    std::string config_file;
    std::vector<std::string> overrides;
    std::string model;
    std::size_t parallel = 0;
    bool verbose = false;
    bool quiet = false;
};

beacon::PipelineConfig resolve(const Common& c) {
    std::vector<std::string> overrides = c.overrides;
    if (!c.model.empty()) overrides.push_back("model.kind=\"" + c.model + "\"");
    if (c.parallel > 0) overrides.push_back("parallel=" + std::to_string(c.parallel));
    std::optional<std::filesystem::path> file;
    if (!c.config_file.empty()) file = c.config_file;
    return beacon::load_config(file, overrides);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"beacon: behavioural report classification pipeline"};
    app.require_subcommand(1);
    Common common;
    bool cv = false;
    bool synthesize = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", common.config_file, "Pipeline configuration (JSON)");
        sub->add_option("--set", common.overrides, "Override a config field, e.g. --set train.epochs=40")->take_all();
        sub->add_option("--model", common.model, "Model kind: cnn, mlp or bilstm");
        sub->add_option("--parallel", common.parallel, "Worker threads for chunking and embedding");
        sub->add_flag("-v,--verbose", common.verbose, "Debug logging");
        sub->add_flag("-q,--quiet", common.quiet, "Warnings and errors only");
    };

    auto* synth = app.add_subcommand("synth", "Generate a seeded synthetic corpus into paths.reports");
    auto* chunk = app.add_subcommand("chunk", "Split every report into budget-bounded chunks");
    auto* embed = app.add_subcommand("embed", "Embed chunks through the configured provider (cached)");
    auto* aggregate = app.add_subcommand("aggregate", "Build fixed-length sample vectors and the split plan");
    auto* train = app.add_subcommand("train", "Train the selected model on the training split");
    auto* eval = app.add_subcommand("eval", "Evaluate the trained model on the test split");
    auto* report = app.add_subcommand("report", "Render tables and precision-recall curves");
    auto* run = app.add_subcommand("run", "chunk, embed, aggregate, train, eval and report in sequence");
    auto* show = app.add_subcommand("config", "Print the resolved configuration");
    for (auto* sub : {synth, chunk, embed, aggregate, train, eval, report, run, show}) add_common(sub);
    train->add_flag("--cv", cv, "Run k-fold cross-validation on the training split instead");
    run->add_flag("--synth", synthesize, "Generate the synthetic corpus first");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    spdlog::set_pattern("[%H:%M:%S] [%^%l%$] %v");
    spdlog::set_level(common.verbose ? spdlog::level::debug : common.quiet ? spdlog::level::warn : spdlog::level::info);

    try {
        const beacon::PipelineConfig cfg = resolve(common);
        if (synth->parsed()) {
            beacon::cmd_synth(cfg);
        } else if (chunk->parsed()) {
            beacon::cmd_chunk(cfg);
        } else if (embed->parsed()) {
            beacon::cmd_embed(cfg);
        } else if (aggregate->parsed()) {
            beacon::cmd_aggregate(cfg);
        } else if (train->parsed()) {
            const auto summary = beacon::cmd_train(cfg, cv);
            if (summary.cv) std::cout << summary.cv->to_json().dump(2) << '\n';
        } else if (eval->parsed()) {
            const auto r = beacon::cmd_eval(cfg);
            std::cout << r.to_table();
        } else if (report->parsed()) {
            beacon::cmd_report(cfg);
        } else if (run->parsed()) {
            beacon::cmd_run(cfg, synthesize);
        } else if (show->parsed()) {
            std::cout << cfg.to_json().dump(2) << '\n';
        }
    } catch (const beacon::Error& e) {
        spdlog::error("{} ({})", e.what(), beacon::to_string(e.kind()));
        return beacon::exit_code_for(e.kind());
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 0;
}
