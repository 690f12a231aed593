#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "multilink/config.hpp"
#include "multilink/error.hpp"
#include "multilink/io.hpp"
#include "multilink/pipeline.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    long long seed = 0;
    int threads = 1;
    bool verbose = false;
    CLI::Option* out_opt = nullptr;
    CLI::Option* seed_opt = nullptr;
};

void add_common(CLI::App* sub, CommonFlags& flags, bool config_required) {
    CLI::Option* config = sub->add_option("--config", flags.config_path, "configuration file (JSON)");
    if (config_required) config->required()->check(CLI::ExistingFile);
    flags.out_opt = sub->add_option("--out", flags.out_dir, "output directory");
    flags.seed_opt = sub->add_option("--seed", flags.seed, "override the configured seed")
                         ->check(CLI::NonNegativeNumber);
    sub->add_option("--threads", flags.threads, "worker threads (simulate)")
        ->check(CLI::PositiveNumber);
    sub->add_flag("--verbose", flags.verbose, "progress to stderr");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"multiple record linkage across K datafiles"};
    app.require_subcommand(1);

    CommonFlags link_flags, simulate_flags, evaluate_flags;
    std::string assignments_path, truth_path, mode_text = "declared_only";

    CLI::App* link = app.add_subcommand("link", "link the configured datafiles");
    add_common(link, link_flags, true);

    CLI::App* simulate = app.add_subcommand("simulate", "run the configured simulation sweep");
    add_common(simulate, simulate_flags, true);

    CLI::App* evaluate = app.add_subcommand("evaluate", "score an assignments file against truth");
    add_common(evaluate, evaluate_flags, false);
    evaluate->add_option("--assignments", assignments_path, "assignments CSV from a link run")
        ->required()
        ->check(CLI::ExistingFile);
    evaluate->add_option("--truth", truth_path, "ground-truth CSV (file, record_id, entity_id)")
        ->required()
        ->check(CLI::ExistingFile);
    evaluate->add_option("--mode", mode_text, "declared_only or undeclared_as_error");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (link->parsed()) {
            multilink::LinkageConfig config = multilink::load_linkage_config(link_flags.config_path);
            if (link_flags.seed_opt->count())
                config.em.seed = static_cast<std::uint64_t>(link_flags.seed);
            const std::filesystem::path out = link_flags.out_opt->count()
                                                  ? std::filesystem::path(link_flags.out_dir)
                                                  : config.output_dir;
            const multilink::RunReport report =
                multilink::run_link(config, out, link_flags.verbose ? &std::cerr : nullptr);
            std::cout << "declared " << report.declared_total << ", undeclared " << report.undeclared
                      << ", resolved by blocking " << report.fully_blocked << ", of " << report.n
                      << " tuples\n"
                      << "artifacts in " << out.string() << '\n';
        } else if (simulate->parsed()) {
            multilink::SweepConfig config = multilink::load_sweep_config(simulate_flags.config_path);
            if (simulate_flags.seed_opt->count())
                config.seed = static_cast<std::uint64_t>(simulate_flags.seed);
            const std::filesystem::path out =
                simulate_flags.out_opt->count() ? simulate_flags.out_dir : std::string(".");
            const multilink::SimulationResult result = multilink::run_simulation(
                config, simulate_flags.threads, simulate_flags.verbose ? &std::cerr : nullptr);
            multilink::write_simulation_artifacts(result, out);
            int failures = 0;
            for (const auto& rep : result.replications) failures += rep.ok ? 0 : 1;
            std::cout << result.scenarios.size() << " scenarios x " << config.replications
                      << " replications, " << failures << " failed\n"
                      << "artifacts in " << out.string() << '\n';
        } else {
            const multilink::ScoreMode mode = multilink::score_mode_from_string(mode_text);
            const multilink::EvaluationReport report =
                multilink::run_evaluate(assignments_path, truth_path, mode);
            const std::filesystem::path out =
                evaluate_flags.out_opt->count() ? evaluate_flags.out_dir : std::string(".");
            multilink::write_evaluation_artifacts(report, out);
            std::cout << "ome " << multilink::format_scalar(report.ome_value) << ", mwge "
                      << multilink::format_scalar(report.mwge_value) << '\n'
                      << "artifacts in " << out.string() << '\n';
        }
    } catch (const multilink::NumericError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
