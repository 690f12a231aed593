#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "multilink/partition.hpp"
#include "multilink/types.hpp"

namespace multilink {

/// A field value: missing, a categorical token, or an integer.
using Value = std::variant<std::monostate, std::string, std::int64_t>;

inline bool is_missing(const Value& v) { return std::holds_alternative<std::monostate>(v); }

struct Record {
    std::string record_id;
    std::vector<Value> values; // one per configured field, in config order
};

struct DataFile {
    int file_id = 0; // 1-based position among the K files
    std::vector<Record> records;
    std::int64_t size() const { return static_cast<std::int64_t>(records.size()); }
};

enum class FieldKind { exact, banded };
enum class FieldRole { compared, blocking };

/// Declares how one field is compared across files. Banded fields derive one
/// categorical token per offset: token_o(v) = floor((v + o) / width). With
/// offsets {0..width-1}, two values at distance d agree on max(0, width - d)
/// of the derived tokens.
struct FieldComparator {
    std::string name;
    FieldKind kind = FieldKind::exact;
    FieldRole role = FieldRole::compared;
    bool numeric = false;
    std::int64_t width = 0;              // banded only
    std::vector<std::int64_t> offsets;   // banded only; distinct, each in [0, width)
};

/// Throws ConfigError unless every comparator is well formed (banded implies
/// numeric, width >= 1, offsets non-empty, distinct, in range).
void validate_comparators(const std::vector<FieldComparator>& fields);

/// A banded compared field contributes one effective field per offset; an
/// exact field contributes itself. Blocking fields contribute nothing here.
struct EffectiveField {
    std::size_t source = 0;      // index into the comparator list
    std::int64_t offset = 0;
    bool banded = false;
    std::string name;            // "age+1" style for banded offsets
};

std::vector<EffectiveField> effective_compared_fields(const std::vector<FieldComparator>& fields);

/// Derived band tokens for one value, one per offset; a missing value yields
/// the missing sentinel (nullopt) in every slot.
std::vector<std::optional<std::int64_t>> derive_banded_fields(const Value& v, const FieldComparator& field);

/// Agreement partition of a K-tuple of values under one comparator. Exact
/// fields agree on equality; banded fields agree iff all derived tokens
/// agree. Missing agrees with nothing, including other missings.
Partition compare_field(std::span<const Value> values, const FieldComparator& field);

/// Meet over all blocking fields of their agreement partitions; no blocking
/// fields means no restriction (the one-block partition).
Partition blocking_pattern(std::span<const Record* const> tuple, const std::vector<FieldComparator>& fields);

/// One distinct comparison outcome: per-effective-field agreement patterns
/// plus the blocking pattern, with the number of tuples that produced it.
struct PatternRow {
    std::vector<Index> gamma;  // canonical pattern index per effective field
    Index blocking = 0;        // canonical index of p_b
    std::int64_t count = 0;
    std::vector<std::vector<std::int32_t>> tuples; // record row per file; kept on request
};

struct TableOptions {
    std::int64_t max_tuples = 1'000'000'000; // cartesian product guard
    bool keep_tuples = false;                // remember tuple members per row
};

/// Maps a tuple (record row index per file) to the canonical index of its
/// true class; used by the synthetic pipeline to score decisions without
/// materializing tuples. Fully blocked tuples are attributed to the
/// all-singletons class without a call: the hook contract assumes records of
/// one entity always share every blocking key (blocking fields uncorrupted,
/// no missing values), so distinct keys imply distinct entities.
using TrueClassFn = std::function<Index(std::span<const std::int32_t>)>;

/// Frequency table of comparison patterns over the blocked cartesian product.
/// Tuples whose blocking pattern is all-singletons are resolved at blocking
/// time: they are counted, never stored.
class PatternTable {
public:
    int k() const { return k_; }
    const PatternSpace& space() const { return space_; }
    Index field_count() const { return static_cast<Index>(field_names_.size()); }
    const std::vector<std::string>& field_names() const { return field_names_; }
    const std::vector<PatternRow>& rows() const { return rows_; }
    const std::vector<std::int64_t>& file_sizes() const { return sizes_; }
    std::int64_t total_tuples() const { return total_; }
    std::int64_t fully_blocked_count() const { return blocked_; }
    std::int64_t training_tuples() const { return total_ - blocked_; }

    /// Per-row true-class tallies (rows x B_K) and the blocked-tuple tally;
    /// present only when a TrueClassFn was supplied at build time.
    bool has_class_counts() const { return has_class_counts_; }
    const CountMat& row_class_counts() const { return row_class_counts_; }
    const CountVec& blocked_class_counts() const { return blocked_class_counts_; }

    /// Streams every fully blocked tuple (record row per file) without
    /// storing them; requires keep_tuples at build time.
    void visit_fully_blocked(const std::function<void(std::span<const std::int32_t>)>& fn) const;

private:
    friend PatternTable build_pattern_table(const std::vector<DataFile>&,
                                            const std::vector<FieldComparator>&,
                                            const TableOptions&, const TrueClassFn&);
    int k_ = 0;
    PatternSpace space_{1};
    std::vector<std::string> field_names_;
    std::vector<PatternRow> rows_;
    std::vector<std::int64_t> sizes_;
    std::int64_t total_ = 0;
    std::int64_t blocked_ = 0;
    bool has_class_counts_ = false;
    CountMat row_class_counts_;
    CountVec blocked_class_counts_;
    std::vector<std::vector<std::int32_t>> block_keys_; // per file, per record; kept with keep_tuples
};

/// Builds the pattern table by blocked iteration of the cartesian product.
/// Throws InputError on an empty file, ConfigError on schema problems, and
/// SizeLimitError when the product exceeds options.max_tuples.
PatternTable build_pattern_table(const std::vector<DataFile>& files,
                                 const std::vector<FieldComparator>& fields,
                                 const TableOptions& options = {},
                                 const TrueClassFn& true_class = {});

} // namespace multilink
