#include "multilink/synthetic.hpp"

#include <algorithm>
#include <limits>
#include <memory>
#include <utility>
#include <variant>

namespace multilink {

namespace {

std::string subset_name(const std::vector<int>& subset) {
    std::string out = "{";
    for (std::size_t i = 0; i < subset.size(); ++i) {
        if (i > 0) out += ",";
        out += std::to_string(subset[i] + 1);
    }
    return out + "}";
}

} // namespace

std::vector<std::int64_t> PopulationSpec::file_sizes() const {
    std::vector<std::int64_t> sizes(static_cast<std::size_t>(k), 0);
    for (const auto& [subset, count] : overlap)
        for (int file : subset)
            if (file >= 0 && file < k) sizes[static_cast<std::size_t>(file)] += count;
    return sizes;
}

std::int64_t PopulationSpec::total_tuples() const {
    std::int64_t total = 1;
    for (std::int64_t m : file_sizes()) {
        if (m > 0 && total > std::numeric_limits<std::int64_t>::max() / m)
            throw SizeLimitError("PopulationSpec: tuple count overflows");
        total *= m;
    }
    return total;
}

void validate_population_spec(const PopulationSpec& spec) {
    if (spec.k < 2 || spec.k > kMaxFiles)
        throw ConfigError("population spec: need between 2 and " + std::to_string(kMaxFiles) +
                          " files, got " + std::to_string(spec.k));
    if (spec.fields.empty()) throw ConfigError("population spec: no fields");
    for (std::size_t f = 0; f < spec.fields.size(); ++f) {
        const PopulationFieldSpec& fs = spec.fields[f];
        if (fs.name.empty()) throw ConfigError("population spec: field " + std::to_string(f) + " is unnamed");
        for (std::size_t g = 0; g < f; ++g)
            if (spec.fields[g].name == fs.name)
                throw ConfigError("population spec: duplicate field name '" + fs.name + "'");
        if (fs.numeric) {
            if (fs.support_hi < fs.support_lo)
                throw ConfigError("population spec: field '" + fs.name + "' has an empty support");
        } else if (fs.categories < 1) {
            throw ConfigError("population spec: field '" + fs.name + "' needs at least one category");
        }
    }
    if (spec.overlap.empty()) throw ConfigError("population spec: empty overlap design");
    for (const auto& [subset, count] : spec.overlap) {
        if (subset.empty())
            throw ConfigError("population spec: overlap design contains an empty file subset");
        for (std::size_t i = 0; i < subset.size(); ++i) {
            if (subset[i] < 0 || subset[i] >= spec.k)
                throw ConfigError("population spec: subset " + subset_name(subset) +
                                  " names a file outside 1.." + std::to_string(spec.k));
            if (i > 0 && subset[i] <= subset[i - 1])
                throw ConfigError("population spec: subset " + subset_name(subset) +
                                  " must be strictly increasing");
        }
        if (count < 0)
            throw ConfigError("population spec: subset " + subset_name(subset) +
                              " has a negative entity count");
    }
    const std::vector<std::int64_t> sizes = spec.file_sizes();
    for (int file = 0; file < spec.k; ++file)
        if (sizes[static_cast<std::size_t>(file)] < 1)
            throw ConfigError("population spec: file " + std::to_string(file + 1) +
                              " receives no records under the overlap design");
    if (!spec.expected_file_sizes.empty()) {
        if (static_cast<int>(spec.expected_file_sizes.size()) != spec.k)
            throw ConfigError("population spec: expected " + std::to_string(spec.k) +
                              " file sizes, got " + std::to_string(spec.expected_file_sizes.size()));
        for (int file = 0; file < spec.k; ++file)
            if (sizes[static_cast<std::size_t>(file)] != spec.expected_file_sizes[static_cast<std::size_t>(file)])
                throw ConfigError("population spec: file " + std::to_string(file + 1) + " derives " +
                                  std::to_string(sizes[static_cast<std::size_t>(file)]) +
                                  " records but the spec expects " +
                                  std::to_string(spec.expected_file_sizes[static_cast<std::size_t>(file)]));
    }
}

Partition GroundTruth::true_class(std::span<const std::int32_t> tuple) const {
    if (tuple.size() != entity_ids.size())
        throw DimensionError("true_class: tuple has " + std::to_string(tuple.size()) +
                             " positions for " + std::to_string(entity_ids.size()) + " files");
    std::vector<std::int64_t> labels(tuple.size());
    for (std::size_t i = 0; i < tuple.size(); ++i) {
        const auto& ids = entity_ids[i];
        if (tuple[i] < 0 || static_cast<std::size_t>(tuple[i]) >= ids.size())
            throw InputError("true_class: record position out of range in file " + std::to_string(i + 1));
        labels[i] = ids[static_cast<std::size_t>(tuple[i])];
    }
    return partition_from_labels(std::span<const std::int64_t>(labels.data(), labels.size()));
}

Population generate_population(const PopulationSpec& spec, std::uint64_t seed) {
    validate_population_spec(spec);
    std::mt19937_64 rng(seed);

    Population out;
    out.files.resize(static_cast<std::size_t>(spec.k));
    out.truth.entity_ids.resize(static_cast<std::size_t>(spec.k));
    for (int file = 0; file < spec.k; ++file) out.files[static_cast<std::size_t>(file)].file_id = file + 1;

    std::int64_t entity = 0;
    std::vector<Value> values(spec.fields.size());
    for (const auto& [subset, count] : spec.overlap) {
        for (std::int64_t e = 0; e < count; ++e, ++entity) {
            for (std::size_t f = 0; f < spec.fields.size(); ++f) {
                const PopulationFieldSpec& fs = spec.fields[f];
                if (fs.numeric) {
                    std::uniform_int_distribution<std::int64_t> draw(fs.support_lo, fs.support_hi);
                    values[f] = draw(rng);
                } else {
                    std::uniform_int_distribution<std::int64_t> draw(0, fs.categories - 1);
                    values[f] = draw(rng);
                }
            }
            const std::string record_id = "e" + std::to_string(entity);
            for (int file : subset) {
                out.files[static_cast<std::size_t>(file)].records.push_back({record_id, values});
                out.truth.entity_ids[static_cast<std::size_t>(file)].push_back(entity);
            }
        }
    }
    return out;
}

TrueClassFn make_true_class_fn(const GroundTruth& truth, const PatternSpace& space) {
    const int k = space.k();
    if (static_cast<int>(truth.entity_ids.size()) != k)
        throw DimensionError("make_true_class_fn: ground truth covers " +
                             std::to_string(truth.entity_ids.size()) + " files, space expects " +
                             std::to_string(k));
    auto ids = std::make_shared<std::vector<std::vector<std::int64_t>>>(truth.entity_ids);
    if (k <= 6) {
        auto table = std::make_shared<std::vector<Index>>(build_agreement_mask_table(space));
        return [ids, table, k](std::span<const std::int32_t> tuple) -> Index {
            const auto& e = *ids;
            const std::uint32_t mask = pairwise_agreement_mask(k, [&](int i, int j) {
                return e[static_cast<std::size_t>(i)][static_cast<std::size_t>(tuple[i])] ==
                       e[static_cast<std::size_t>(j)][static_cast<std::size_t>(tuple[j])];
            });
            return (*table)[mask];
        };
    }
    auto shared_space = std::make_shared<PatternSpace>(space);
    return [ids, shared_space, k](std::span<const std::int32_t> tuple) -> Index {
        std::vector<std::int64_t> labels(static_cast<std::size_t>(k));
        for (int i = 0; i < k; ++i)
            labels[static_cast<std::size_t>(i)] =
                (*ids)[static_cast<std::size_t>(i)][static_cast<std::size_t>(tuple[i])];
        return shared_space->index_of(
            partition_from_labels(std::span<const std::int64_t>(labels.data(), labels.size())));
    };
}

std::vector<FieldComparator> comparators_for(const PopulationSpec& spec) {
    std::vector<FieldComparator> out;
    out.reserve(spec.fields.size());
    for (const PopulationFieldSpec& fs : spec.fields) {
        FieldComparator c;
        c.name = fs.name;
        c.kind = FieldKind::exact;
        c.role = fs.blocking ? FieldRole::blocking : FieldRole::compared;
        c.numeric = fs.numeric;
        out.push_back(std::move(c));
    }
    return out;
}

std::int64_t hit_miss_categorical(std::int64_t value, Scalar beta, std::int64_t categories,
                                  std::mt19937_64& rng) {
    if (!(beta >= 0.0 && beta <= 1.0))
        throw ConfigError("hit_miss_categorical: beta must lie in [0, 1]");
    if (categories < 1) throw ConfigError("hit_miss_categorical: need at least one category");
    if (value < 0 || value >= categories)
        throw InputError("hit_miss_categorical: value " + std::to_string(value) +
                         " outside 0.." + std::to_string(categories - 1));
    std::uniform_real_distribution<Scalar> unif(0.0, 1.0);
    if (unif(rng) < beta) {
        std::uniform_int_distribution<std::int64_t> draw(0, categories - 1);
        return draw(rng);
    }
    return value;
}

std::int64_t hit_miss_numeric(std::int64_t value, Scalar beta, std::int64_t support_lo,
                              std::int64_t support_hi, std::mt19937_64& rng) {
    if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("hit_miss_numeric: beta must lie in [0, 1]");
    if (support_hi < support_lo) throw ConfigError("hit_miss_numeric: empty support");
    if (value < support_lo || value > support_hi)
        throw InputError("hit_miss_numeric: value " + std::to_string(value) + " outside [" +
                         std::to_string(support_lo) + ", " + std::to_string(support_hi) + "]");
    std::uniform_real_distribution<Scalar> unif(0.0, 1.0);
    if (unif(rng) >= beta) return value;

    static constexpr Scalar kOffsetMass[5] = {0.1, 0.2, 0.4, 0.2, 0.1};
    Scalar total = 0;
    for (int d = -2; d <= 2; ++d)
        if (value + d >= support_lo && value + d <= support_hi) total += kOffsetMass[d + 2];
    Scalar u = unif(rng) * total;
    std::int64_t last_feasible = value;
    for (int d = -2; d <= 2; ++d) {
        if (value + d < support_lo || value + d > support_hi) continue;
        last_feasible = value + d;
        u -= kOffsetMass[d + 2];
        if (u < 0) return value + d;
    }
    return last_feasible;
}

std::vector<DataFile> corrupt_files(const std::vector<DataFile>& files, const PopulationSpec& spec,
                                    const std::map<std::string, Scalar>& beta, std::uint64_t seed) {
    validate_population_spec(spec);
    for (const PopulationFieldSpec& fs : spec.fields) {
        if (fs.blocking) {
            if (beta.count(fs.name))
                throw ConfigError("corrupt_files: beta supplied for blocking field '" + fs.name + "'");
        } else if (!beta.count(fs.name)) {
            throw ConfigError("corrupt_files: no beta for field '" + fs.name + "'");
        }
    }
    for (const auto& [name, level] : beta) {
        (void)level;
        const bool known = std::any_of(spec.fields.begin(), spec.fields.end(),
                                       [&](const PopulationFieldSpec& fs) { return fs.name == name; });
        if (!known) throw ConfigError("corrupt_files: beta names unknown field '" + name + "'");
    }
    if (static_cast<int>(files.size()) != spec.k)
        throw InputError("corrupt_files: " + std::to_string(files.size()) + " files for K = " +
                         std::to_string(spec.k));

    std::mt19937_64 rng(seed);
    std::vector<DataFile> out = files;
    for (DataFile& file : out) {
        for (Record& record : file.records) {
            if (record.values.size() != spec.fields.size())
                throw InputError("corrupt_files: record '" + record.record_id + "' has " +
                                 std::to_string(record.values.size()) + " values for " +
                                 std::to_string(spec.fields.size()) + " fields");
            for (std::size_t f = 0; f < spec.fields.size(); ++f) {
                const PopulationFieldSpec& fs = spec.fields[f];
                if (fs.blocking) continue;
                Value& v = record.values[f];
                if (std::holds_alternative<std::monostate>(v)) continue;
                const std::int64_t* iv = std::get_if<std::int64_t>(&v);
                if (!iv)
                    throw InputError("corrupt_files: field '" + fs.name +
                                     "' holds a non-integer value in record '" + record.record_id + "'");
                const Scalar level = beta.at(fs.name);
                v = fs.numeric ? hit_miss_numeric(*iv, level, fs.support_lo, fs.support_hi, rng)
                               : hit_miss_categorical(*iv, level, fs.categories, rng);
            }
        }
    }
    return out;
}

} // namespace multilink
