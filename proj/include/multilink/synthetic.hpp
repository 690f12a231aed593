#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "multilink/comparison.hpp"
#include "multilink/partition.hpp"
#include "multilink/types.hpp"

namespace multilink {

struct PopulationFieldSpec {
    std::string name;
    bool numeric = false;
    std::int64_t categories = 0;   // categorical: equiprobable values 0..categories-1
    std::int64_t support_lo = 0;   // numeric: uniform over [support_lo, support_hi]
    std::int64_t support_hi = 0;
    bool blocking = false;         // blocking fields are never corrupted
};

// Latent population design: how many entities appear in each subset of files,
// and how their field values are drawn. File sizes follow from the overlap.
struct PopulationSpec {
    int k = 0;
    // key: sorted 0-based file subset; value: entities present in exactly those files
    std::map<std::vector<int>, std::int64_t> overlap;
    std::vector<PopulationFieldSpec> fields;
    // optional cross-check; when non-empty the derived sizes must match
    std::vector<std::int64_t> expected_file_sizes;

    std::vector<std::int64_t> file_sizes() const;
    std::int64_t total_tuples() const;
};

void validate_population_spec(const PopulationSpec& spec);

struct GroundTruth {
    std::vector<std::vector<std::int64_t>> entity_ids; // [file][record position]

    // partition grouping equal entity ids; tuple holds one position per file
    Partition true_class(std::span<const std::int32_t> tuple) const;
};

struct Population {
    std::vector<DataFile> files;
    GroundTruth truth;
};

// Entities drawn subset by subset; every record of an entity carries the same
// (uncorrupted) values. Deterministic per seed.
Population generate_population(const PopulationSpec& spec, std::uint64_t seed);

// Scoring hook for build_pattern_table: maps a tuple to its true class index.
// Owns copies of what it needs, so it may outlive the ground truth.
TrueClassFn make_true_class_fn(const GroundTruth& truth, const PatternSpace& space);

// One exact comparator per spec field, with blocking roles carried over.
std::vector<FieldComparator> comparators_for(const PopulationSpec& spec);

// Keep the true value with probability 1-beta, otherwise redraw uniformly
// over all categories, so P(observed = true) = 1 - beta + beta/categories.
std::int64_t hit_miss_categorical(std::int64_t value, Scalar beta, std::int64_t categories,
                                  std::mt19937_64& rng);

// Keep with probability 1-beta, otherwise shift by d in {-2..2} with
// probability proportional to 2^(-|d|); offsets leaving the support are
// dropped and the rest renormalized.
std::int64_t hit_miss_numeric(std::int64_t value, Scalar beta, std::int64_t support_lo,
                              std::int64_t support_hi, std::mt19937_64& rng);

// Independent per-record, per-field corruption. Every non-blocking field
// needs a beta; supplying one for a blocking field is a config error.
std::vector<DataFile> corrupt_files(const std::vector<DataFile>& files, const PopulationSpec& spec,
                                    const std::map<std::string, Scalar>& beta, std::uint64_t seed);

} // namespace multilink
