#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "multilink/comparison.hpp"
#include "multilink/decision.hpp"
#include "multilink/em.hpp"
#include "multilink/evaluation.hpp"
#include "multilink/synthetic.hpp"
#include "multilink/types.hpp"

namespace multilink {

// One linkage run: which files to read, how each field is compared, EM
// options, and the admissible error budgets. Loaded from a JSON file.
struct LinkageConfig {
    std::vector<std::filesystem::path> files;
    std::vector<FieldComparator> fields;
    FitOptions em;
    Scalar error_level = 0.01;                  // scalar broadcast to every class
    std::map<std::string, Scalar> error_levels; // per-class override, slash notation keys
    std::filesystem::path output_dir = ".";
    std::int64_t max_tuples = TableOptions{}.max_tuples;
};

// A simulation sweep: one latent population, corrupted and linked across the
// scenario cross beta grid x blocking modes x block-count grid x low-quality
// field in/out, R replications each.
struct SweepConfig {
    PopulationSpec population;
    std::vector<Scalar> beta_grid;
    std::map<std::string, Scalar> beta_overrides; // per-field fixed error rates
    std::vector<bool> blocking_modes = {true};    // false drops blocking fields entirely
    std::vector<std::int64_t> block_categories;   // empty keeps the spec's category count
    std::string low_quality_field;                // named field crosses include/exclude
    std::vector<FieldComparator> comparator_overrides; // banded comparison of numeric fields
    int replications = 1;
    std::uint64_t seed = 0;
    Scalar error_level = 0.01;
    FitOptions em;
    ScoreMode score_mode = ScoreMode::declared_only;
    std::int64_t max_tuples = TableOptions{}.max_tuples;
};

LinkageConfig load_linkage_config(const std::filesystem::path& path);
SweepConfig load_sweep_config(const std::filesystem::path& path);

// Both loaders validate on the way in; these run the same checks on
// hand-built configs.
void validate_linkage_config(const LinkageConfig& config);
void validate_sweep_config(const SweepConfig& config);

// Broadcast scalar plus per-class overrides, resolved against the class space.
ErrorLevels resolve_error_levels(Scalar broadcast, const std::map<std::string, Scalar>& overrides,
                                 const PatternSpace& space);

ScoreMode score_mode_from_string(const std::string& text);
std::string to_string(ScoreMode mode);

} // namespace multilink
