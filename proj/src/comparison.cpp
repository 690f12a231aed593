#include "multilink/comparison.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>

namespace multilink {

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    std::int64_t r = a % b;
    if (r != 0 && ((r < 0) != (b < 0))) --q;
    return q;
}

void check_tuple_size(std::size_t n, const char* who) {
    if (n < 1 || n > static_cast<std::size_t>(kMaxFiles))
        throw DimensionError(std::string(who) + ": tuple size " + std::to_string(n) +
                             " outside 1.." + std::to_string(kMaxFiles));
}

// First-occurrence labels from an agreement predicate, then canonicalize.
template <typename Agree>
Partition partition_from_agreement(std::size_t n, Agree&& agree) {
    std::vector<int> labels(n);
    int next = 0;
    for (std::size_t i = 0; i < n; ++i) {
        int id = -1;
        for (std::size_t j = 0; j < i; ++j)
            if (agree(j, i)) {
                id = labels[j];
                break;
            }
        if (id < 0) id = next++;
        labels[i] = id;
    }
    return partition_from_labels(std::span<const int>(labels));
}

} // namespace

void validate_comparators(const std::vector<FieldComparator>& fields) {
    if (fields.empty()) throw ConfigError("validate_comparators: no fields declared");
    std::set<std::string> names;
    for (const auto& f : fields) {
        if (f.name.empty()) throw ConfigError("validate_comparators: unnamed field");
        if (!names.insert(f.name).second)
            throw ConfigError("validate_comparators: duplicate field name '" + f.name + "'");
        if (f.kind == FieldKind::banded) {
            if (!f.numeric)
                throw ConfigError("validate_comparators: banded field '" + f.name + "' must be numeric");
            if (f.width < 1)
                throw ConfigError("validate_comparators: banded field '" + f.name +
                                  "' needs width >= 1, got " + std::to_string(f.width));
            if (f.offsets.empty())
                throw ConfigError("validate_comparators: banded field '" + f.name + "' declares no offsets");
            std::set<std::int64_t> seen;
            for (std::int64_t o : f.offsets) {
                if (o < 0 || o >= f.width)
                    throw ConfigError("validate_comparators: offset " + std::to_string(o) + " of field '" +
                                      f.name + "' outside [0, " + std::to_string(f.width) + ")");
                if (!seen.insert(o).second)
                    throw ConfigError("validate_comparators: duplicate offset " + std::to_string(o) +
                                      " in field '" + f.name + "'");
            }
        }
    }
}

std::vector<EffectiveField> effective_compared_fields(const std::vector<FieldComparator>& fields) {
    std::vector<EffectiveField> out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        const FieldComparator& f = fields[i];
        if (f.role != FieldRole::compared) continue;
        if (f.kind == FieldKind::banded) {
            for (std::int64_t o : f.offsets)
                out.push_back({i, o, true, f.name + "+" + std::to_string(o)});
        } else {
            out.push_back({i, 0, false, f.name});
        }
    }
    return out;
}

std::vector<std::optional<std::int64_t>> derive_banded_fields(const Value& v, const FieldComparator& field) {
    if (field.kind != FieldKind::banded)
        throw ConfigError("derive_banded_fields: field '" + field.name + "' is not banded");
    std::vector<std::optional<std::int64_t>> out(field.offsets.size());
    if (is_missing(v)) return out;
    if (!std::holds_alternative<std::int64_t>(v))
        throw InputError("derive_banded_fields: non-integer value in banded field '" + field.name + "'");
    const std::int64_t x = std::get<std::int64_t>(v);
    for (std::size_t i = 0; i < field.offsets.size(); ++i)
        out[i] = floor_div(x + field.offsets[i], field.width);
    return out;
}

Partition compare_field(std::span<const Value> values, const FieldComparator& field) {
    check_tuple_size(values.size(), "compare_field");
    if (field.kind == FieldKind::banded) {
        std::vector<std::vector<std::optional<std::int64_t>>> tokens;
        tokens.reserve(values.size());
        for (const Value& v : values) tokens.push_back(derive_banded_fields(v, field));
        return partition_from_agreement(values.size(), [&](std::size_t i, std::size_t j) {
            if (is_missing(values[i]) || is_missing(values[j])) return false;
            return tokens[i] == tokens[j];
        });
    }
    return partition_from_agreement(values.size(), [&](std::size_t i, std::size_t j) {
        if (is_missing(values[i]) || is_missing(values[j])) return false;
        return values[i] == values[j];
    });
}

Partition blocking_pattern(std::span<const Record* const> tuple, const std::vector<FieldComparator>& fields) {
    check_tuple_size(tuple.size(), "blocking_pattern");
    const std::size_t k = tuple.size();
    std::vector<std::uint8_t> one_block(k, 0);
    Partition acc{std::span<const std::uint8_t>(one_block)};
    std::vector<Value> column(k);
    for (std::size_t f = 0; f < fields.size(); ++f) {
        if (fields[f].role != FieldRole::blocking) continue;
        for (std::size_t i = 0; i < k; ++i) {
            if (tuple[i]->values.size() <= f)
                throw InputError("blocking_pattern: record '" + tuple[i]->record_id +
                                 "' has fewer values than configured fields");
            column[i] = tuple[i]->values[f];
        }
        acc = meet(acc, compare_field(std::span<const Value>(column), fields[f]));
    }
    return acc;
}

namespace {

// Shared universe of blocking keys: equal keys agree on every blocking
// field; records with any missing blocking value get a unique negative key.
struct BlockKeys {
    std::vector<std::vector<std::int32_t>> per_file;
};

BlockKeys compute_block_keys(const std::vector<DataFile>& files,
                             const std::vector<FieldComparator>& fields) {
    BlockKeys out;
    out.per_file.resize(files.size());
    std::unordered_map<std::string, std::int32_t> ids;
    std::int32_t next_missing = -1;
    std::string buf;
    for (std::size_t fi = 0; fi < files.size(); ++fi) {
        out.per_file[fi].resize(files[fi].records.size());
        for (std::size_t r = 0; r < files[fi].records.size(); ++r) {
            const Record& rec = files[fi].records[r];
            buf.clear();
            bool miss = false;
            for (std::size_t f = 0; f < fields.size() && !miss; ++f) {
                if (fields[f].role != FieldRole::blocking) continue;
                const Value& v = rec.values[f];
                if (is_missing(v)) {
                    miss = true;
                    break;
                }
                if (fields[f].kind == FieldKind::banded) {
                    for (const auto& t : derive_banded_fields(v, fields[f])) {
                        buf += std::to_string(*t);
                        buf += ',';
                    }
                } else if (const auto* s = std::get_if<std::string>(&v)) {
                    buf += 's';
                    buf += std::to_string(s->size());
                    buf += ':';
                    buf += *s;
                } else {
                    buf += 'i';
                    buf += std::to_string(std::get<std::int64_t>(v));
                }
                buf += '\x1f';
            }
            if (miss) {
                out.per_file[fi][r] = next_missing--;
            } else {
                out.per_file[fi][r] = ids.try_emplace(buf, static_cast<std::int32_t>(ids.size())).first->second;
            }
        }
    }
    return out;
}

} // namespace

void PatternTable::visit_fully_blocked(const std::function<void(std::span<const std::int32_t>)>& fn) const {
    if (block_keys_.empty())
        throw InputError("PatternTable::visit_fully_blocked: table was built without keep_tuples");
    const int k = k_;
    std::vector<std::int32_t> chosen(static_cast<std::size_t>(k));
    std::vector<std::int32_t> keys(static_cast<std::size_t>(k));
    auto recurse = [&](auto&& self, int depth) -> void {
        const auto& file_keys = block_keys_[static_cast<std::size_t>(depth)];
        const std::int32_t m = static_cast<std::int32_t>(file_keys.size());
        if (depth == k - 1) {
            for (std::int32_t r = 0; r < m; ++r) {
                const std::int32_t key = file_keys[static_cast<std::size_t>(r)];
                bool hit = false;
                if (key >= 0)
                    for (int d = 0; d < depth && !hit; ++d) hit = keys[static_cast<std::size_t>(d)] == key;
                if (hit) continue;
                chosen[static_cast<std::size_t>(depth)] = r;
                fn(std::span<const std::int32_t>(chosen.data(), chosen.size()));
            }
            return;
        }
        for (std::int32_t r = 0; r < m; ++r) {
            const std::int32_t key = file_keys[static_cast<std::size_t>(r)];
            bool hit = false;
            if (key >= 0)
                for (int d = 0; d < depth && !hit; ++d) hit = keys[static_cast<std::size_t>(d)] == key;
            if (hit) continue; // a collision already rules out fully blocked
            chosen[static_cast<std::size_t>(depth)] = r;
            keys[static_cast<std::size_t>(depth)] = key;
            self(self, depth + 1);
        }
    };
    recurse(recurse, 0);
}

PatternTable build_pattern_table(const std::vector<DataFile>& files,
                                 const std::vector<FieldComparator>& fields,
                                 const TableOptions& options,
                                 const TrueClassFn& true_class) {
    validate_comparators(fields);
    const int k = static_cast<int>(files.size());
    if (k < 2) throw ConfigError("build_pattern_table: need at least 2 files, got " + std::to_string(k));
    if (k > kMaxFiles)
        throw SizeLimitError("build_pattern_table: at most " + std::to_string(kMaxFiles) + " files, got " +
                             std::to_string(k));

    std::vector<std::int64_t> sizes;
    std::int64_t total = 1;
    for (const DataFile& file : files) {
        if (file.records.empty())
            throw InputError("build_pattern_table: file " + std::to_string(file.file_id) + " is empty");
        for (const Record& rec : file.records)
            if (rec.values.size() != fields.size())
                throw InputError("build_pattern_table: record '" + rec.record_id + "' in file " +
                                 std::to_string(file.file_id) + " has " + std::to_string(rec.values.size()) +
                                 " values, schema declares " + std::to_string(fields.size()));
        const std::int64_t m = file.size();
        if (total > options.max_tuples / m)
            throw SizeLimitError("build_pattern_table: cartesian product exceeds max_tuples = " +
                                 std::to_string(options.max_tuples) +
                                 "; block more aggressively or raise the limit");
        total *= m;
        sizes.push_back(m);
    }

    // All-blocking schemas are allowed: rows then carry an empty gamma and
    // differ only in the blocking partition.
    const std::vector<EffectiveField> effective = effective_compared_fields(fields);
    const std::size_t F = effective.size();

    PatternSpace space = enumerate_patterns(k);
    const Index bk = space.size();

    // Dense token ids per effective field; -1 marks missing.
    std::vector<std::vector<std::int32_t>> tok(files.size());
    {
        std::vector<std::unordered_map<std::int64_t, std::int32_t>> num_ids(F);
        std::vector<std::unordered_map<std::string, std::int32_t>> str_ids(F);
        for (std::size_t fi = 0; fi < files.size(); ++fi) {
            tok[fi].resize(files[fi].records.size() * F);
            for (std::size_t r = 0; r < files[fi].records.size(); ++r) {
                for (std::size_t e = 0; e < F; ++e) {
                    const EffectiveField& ef = effective[e];
                    const Value& v = files[fi].records[r].values[ef.source];
                    std::int32_t id = -1;
                    if (!is_missing(v)) {
                        const std::int32_t fresh =
                            static_cast<std::int32_t>(num_ids[e].size() + str_ids[e].size());
                        if (ef.banded) {
                            if (!std::holds_alternative<std::int64_t>(v))
                                throw InputError("build_pattern_table: non-integer value in banded field '" +
                                                 fields[ef.source].name + "'");
                            const std::int64_t t =
                                floor_div(std::get<std::int64_t>(v) + ef.offset, fields[ef.source].width);
                            id = num_ids[e].try_emplace(t, fresh).first->second;
                        } else if (const auto* s = std::get_if<std::string>(&v)) {
                            id = str_ids[e].try_emplace(*s, fresh).first->second;
                        } else {
                            id = num_ids[e].try_emplace(std::get<std::int64_t>(v), fresh).first->second;
                        }
                    }
                    tok[fi][r * F + e] = id;
                }
            }
        }
    }

    BlockKeys keys = compute_block_keys(files, fields);

    // Buckets of the last file by blocking key, for the fully-blocked cut.
    std::unordered_map<std::int32_t, std::vector<std::int32_t>> last_buckets;
    {
        const auto& last = keys.per_file.back();
        for (std::int32_t r = 0; r < static_cast<std::int32_t>(last.size()); ++r)
            if (last[static_cast<std::size_t>(r)] >= 0)
                last_buckets[last[static_cast<std::size_t>(r)]].push_back(r);
    }

    // Pattern index from any per-position id accessor (missing/unique < 0).
    std::vector<Index> mask_table;
    if (k <= 6) mask_table = build_agreement_mask_table(space);
    auto pattern_index_from = [&](auto&& id_of) -> Index {
        if (!mask_table.empty()) {
            const std::uint32_t mask = pairwise_agreement_mask(k, [&](int i, int j) {
                const std::int32_t a = id_of(i);
                return a >= 0 && a == id_of(j);
            });
            return mask_table[mask];
        }
        std::array<int, kMaxFiles> labels{};
        for (int i = 0; i < k; ++i) {
            const std::int32_t a = id_of(i);
            labels[static_cast<std::size_t>(i)] = a >= 0 ? a : -(i + 1);
        }
        return space.index_of(
            partition_from_labels(std::span<const int>(labels.data(), static_cast<std::size_t>(k))));
    };

    // Row lookup: packed 64-bit key when it fits, ordered vector key otherwise.
    const int bits = std::bit_width(static_cast<std::uint64_t>(bk - 1));
    const bool packable = static_cast<std::size_t>(bits) * (F + 1) <= 64;
    std::unordered_map<std::uint64_t, std::size_t> row_by_pack;
    std::map<std::vector<Index>, std::size_t> row_by_vec;

    std::vector<PatternRow> rows;
    std::vector<std::vector<std::int64_t>> class_counts;
    CountVec blocked_class = CountVec::Zero(bk);
    std::int64_t blocked = 0;

    std::vector<std::int32_t> chosen(static_cast<std::size_t>(k));
    std::vector<std::int32_t> chosen_keys(static_cast<std::size_t>(k));
    std::vector<Index> gamma(F);

    auto emit = [&]() {
        for (std::size_t e = 0; e < F; ++e)
            gamma[e] = pattern_index_from(
                [&](int i) { return tok[static_cast<std::size_t>(i)][static_cast<std::size_t>(chosen[static_cast<std::size_t>(i)]) * F + e]; });
        const Index pb = pattern_index_from([&](int i) { return chosen_keys[static_cast<std::size_t>(i)]; });
        std::size_t row;
        if (packable) {
            std::uint64_t key = 0;
            for (std::size_t e = 0; e < F; ++e) key = (key << bits) | static_cast<std::uint64_t>(gamma[e]);
            key = (key << bits) | static_cast<std::uint64_t>(pb);
            auto [it, inserted] = row_by_pack.try_emplace(key, rows.size());
            row = it->second;
            if (inserted) rows.push_back(PatternRow{gamma, pb, 0, {}});
        } else {
            std::vector<Index> key = gamma;
            key.push_back(pb);
            auto [it, inserted] = row_by_vec.try_emplace(std::move(key), rows.size());
            row = it->second;
            if (inserted) rows.push_back(PatternRow{gamma, pb, 0, {}});
        }
        rows[row].count += 1;
        if (options.keep_tuples) rows[row].tuples.push_back(chosen);
        if (true_class) {
            if (class_counts.size() < rows.size())
                class_counts.resize(rows.size(), std::vector<std::int64_t>(static_cast<std::size_t>(bk), 0));
            const Index c = true_class(std::span<const std::int32_t>(chosen.data(), chosen.size()));
            class_counts[row][static_cast<std::size_t>(c)] += 1;
        }
    };

    auto recurse = [&](auto&& self, int depth, bool collided) -> void {
        const auto& file_keys = keys.per_file[static_cast<std::size_t>(depth)];
        const std::int32_t m = static_cast<std::int32_t>(file_keys.size());
        if (depth == k - 1) {
            if (collided) {
                for (std::int32_t r = 0; r < m; ++r) {
                    chosen[static_cast<std::size_t>(depth)] = r;
                    chosen_keys[static_cast<std::size_t>(depth)] = file_keys[static_cast<std::size_t>(r)];
                    emit();
                }
            } else {
                // Earlier keys are pairwise distinct here, so the buckets below
                // are disjoint; everything outside them is fully blocked.
                std::int64_t matched = 0;
                for (int d = 0; d < depth; ++d) {
                    const std::int32_t key = chosen_keys[static_cast<std::size_t>(d)];
                    if (key < 0) continue;
                    auto it = last_buckets.find(key);
                    if (it == last_buckets.end()) continue;
                    matched += static_cast<std::int64_t>(it->second.size());
                    for (std::int32_t r : it->second) {
                        chosen[static_cast<std::size_t>(depth)] = r;
                        chosen_keys[static_cast<std::size_t>(depth)] = key;
                        emit();
                    }
                }
                blocked += m - matched;
                if (true_class) blocked_class[0] += m - matched;
            }
            return;
        }
        for (std::int32_t r = 0; r < m; ++r) {
            const std::int32_t key = file_keys[static_cast<std::size_t>(r)];
            chosen[static_cast<std::size_t>(depth)] = r;
            chosen_keys[static_cast<std::size_t>(depth)] = key;
            bool next_collided = collided;
            if (!next_collided && key >= 0)
                for (int d = 0; d < depth && !next_collided; ++d)
                    next_collided = chosen_keys[static_cast<std::size_t>(d)] == key;
            self(self, depth + 1, next_collided);
        }
    };
    recurse(recurse, 0, false);

    // Deterministic row order: gamma lexicographic, then blocking.
    std::vector<std::size_t> perm(rows.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
        if (rows[a].gamma != rows[b].gamma) return rows[a].gamma < rows[b].gamma;
        return rows[a].blocking < rows[b].blocking;
    });

    PatternTable table;
    table.k_ = k;
    table.space_ = std::move(space);
    for (const EffectiveField& ef : effective) table.field_names_.push_back(ef.name);
    table.sizes_ = sizes;
    table.total_ = total;
    table.blocked_ = blocked;
    table.rows_.reserve(rows.size());
    for (std::size_t i : perm) table.rows_.push_back(std::move(rows[i]));
    if (true_class) {
        table.has_class_counts_ = true;
        class_counts.resize(rows.size(), std::vector<std::int64_t>(static_cast<std::size_t>(bk), 0));
        table.row_class_counts_ = CountMat::Zero(static_cast<Index>(rows.size()), bk);
        for (std::size_t i = 0; i < perm.size(); ++i)
            for (Index c = 0; c < bk; ++c)
                table.row_class_counts_(static_cast<Index>(i), c) = class_counts[perm[i]][static_cast<std::size_t>(c)];
        table.blocked_class_counts_ = blocked_class;
    }
    if (options.keep_tuples) table.block_keys_ = std::move(keys.per_file);
    return table;
}

} // namespace multilink
