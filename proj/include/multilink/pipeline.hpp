#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "multilink/config.hpp"
#include "multilink/decision.hpp"
#include "multilink/em.hpp"
#include "multilink/evaluation.hpp"
#include "multilink/types.hpp"

namespace multilink {

// Fit parameters as a JSON document: class labels, effective field names,
// prevalences, and the per-field conditional matrices (rows = field pattern,
// columns = class, canonical order). Values round-trip bitwise.
std::string params_to_json(const ModelParams& params, const PatternSpace& space,
                           const std::vector<std::string>& field_names);
ModelParams params_from_json(const std::string& text);

struct RunReport {
    int k = 0;
    std::vector<std::string> class_names;
    std::vector<std::int64_t> file_sizes;
    std::int64_t n = 0;               // tuples in the cartesian product
    std::int64_t fully_blocked = 0;   // resolved at blocking time
    std::int64_t training_tuples = 0;
    std::int64_t distinct_rows = 0;
    bool em_run = false;
    std::string em_skip_reason;
    FitResult fit;                    // meaningful only when em_run
    std::vector<std::int64_t> declared_by_class; // row-level tuples, canonical order
    std::int64_t declared_total = 0;  // excludes blocked-resolved tuples
    std::int64_t undeclared = 0;
    std::map<std::string, Scalar> mu_used;
};

// The five pipeline steps over real datafiles: block, compare, fit the
// mixture, pick candidate classes, declare within error budgets. Writes
// assignments.csv, report.json, and params.json (when a model was fit)
// under out_dir. Errors are rethrown with the failing stage's name.
RunReport run_link(const LinkageConfig& config, const std::filesystem::path& out_dir,
                   std::ostream* log = nullptr);

struct ScenarioDef {
    std::string id;
    Scalar beta = 0;               // error rate for corruptible fields without an override
    bool blocking = true;          // false drops blocking fields from the linkage
    std::int64_t block_count = 0;  // categories of the blocking field; 0 = unchanged
    int low_quality = 0;           // 1 low-quality field included, -1 excluded, 0 no toggle
    int population_variant = 0;    // scenarios sharing a variant share the population
    int beta_index = 0;            // scenarios sharing (variant, beta) share corrupted files
};

struct ReplicationOutcome {
    int scenario = 0;
    int replication = 0;
    bool ok = false;
    std::string error;
    Scalar ome_value = 0;
    Scalar mwge_value = 0;
    Vec per_class;                 // per-true-class error rates, NaN when out of scope
    std::int64_t declared = 0;     // row-level declared tuples
    std::int64_t undeclared = 0;
    std::int64_t blocked = 0;
    bool converged = false;
    Scalar loglik = 0;
};

struct SimulationResult {
    int k = 0;
    std::vector<std::string> class_names;
    std::vector<ScenarioDef> scenarios;
    std::vector<ReplicationOutcome> replications; // scenario-major, replication-minor
};

struct ScenarioSummary {
    int scenario = 0;
    int completed = 0;
    int failures = 0;
    Scalar mean_ome = 0;
    Scalar se_ome = 0;
    Scalar mean_mwge = 0;
    Scalar se_mwge = 0;
    Vec mean_per_class;            // NaN-skipping means over completed replications
};

// Scenario cross of the sweep axes; per replication: generate, corrupt,
// link, evaluate. Failed replications carry their error text and are left
// out of the summaries. Deterministic in the config seed for any thread
// count: every replication derives its own seed stream.
SimulationResult run_simulation(const SweepConfig& config, int threads = 1,
                                std::ostream* log = nullptr);

std::vector<ScenarioSummary> summarize(const SimulationResult& result);

// replications.csv (one row per scenario x replication) and scenarios.csv
// (per-scenario means with Monte Carlo standard errors).
void write_simulation_artifacts(const SimulationResult& result,
                                const std::filesystem::path& out_dir);

struct EvaluationReport {
    int k = 0;
    std::vector<std::string> class_names;
    ConfusionMatrix matrix;
    ScoreMode mode = ScoreMode::declared_only;
    Scalar ome_value = 0;
    Scalar mwge_value = 0;
    Vec per_class;
};

// Scores an assignments file against a ground-truth key export.
EvaluationReport run_evaluate(const std::filesystem::path& assignments_path,
                              const std::filesystem::path& truth_path, ScoreMode mode);

// confusion.csv (true class x decided class counts) and metrics.csv.
void write_evaluation_artifacts(const EvaluationReport& report,
                                const std::filesystem::path& out_dir);

} // namespace multilink
