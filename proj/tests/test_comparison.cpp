#include "doctest.h"

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "multilink/comparison.hpp"
#include "test_support.hpp"

using namespace multilink;
using testsupport::banded_field;
using testsupport::exact_field;
using testsupport::make_record;

namespace {

// Reference table: full product, per-tuple compare_field/blocking_pattern.
struct BruteTable {
    std::map<std::pair<std::vector<Index>, Index>, std::int64_t> rows;
    std::map<std::pair<std::vector<Index>, Index>, std::vector<std::vector<std::int64_t>>> class_rows;
    std::int64_t blocked = 0;
    std::int64_t total = 0;
    std::vector<std::int64_t> blocked_classes;
};

BruteTable brute_force_table(const std::vector<DataFile>& files, const std::vector<FieldComparator>& fields,
                             const std::function<Index(std::span<const std::int32_t>)>& true_class = {}) {
    const int k = static_cast<int>(files.size());
    PatternSpace space = enumerate_patterns(k);
    auto effective = effective_compared_fields(fields);
    BruteTable out;
    out.blocked_classes.assign(static_cast<std::size_t>(space.size()), 0);
    std::vector<std::int32_t> idx(static_cast<std::size_t>(k), 0);
    while (true) {
        std::vector<const Record*> tuple;
        for (int i = 0; i < k; ++i)
            tuple.push_back(&files[static_cast<std::size_t>(i)].records[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])]);
        Partition pb = blocking_pattern(std::span<const Record* const>(tuple.data(), tuple.size()), fields);
        out.total += 1;
        Index cls = -1;
        if (true_class) cls = true_class(std::span<const std::int32_t>(idx.data(), idx.size()));
        if (pb.is_singletons()) {
            out.blocked += 1;
            if (true_class) out.blocked_classes[static_cast<std::size_t>(cls)] += 1;
        } else {
            std::vector<Index> gamma;
            std::vector<Value> column(static_cast<std::size_t>(k));
            for (const auto& ef : effective) {
                for (int i = 0; i < k; ++i) column[static_cast<std::size_t>(i)] = tuple[static_cast<std::size_t>(i)]->values[ef.source];
                FieldComparator single = fields[ef.source];
                if (ef.banded) single.offsets = {ef.offset};
                gamma.push_back(space.index_of(compare_field(std::span<const Value>(column), single)));
            }
            auto key = std::make_pair(gamma, space.index_of(pb));
            out.rows[key] += 1;
            if (true_class) {
                auto& hist = out.class_rows[key];
                if (hist.empty()) hist.assign(1, std::vector<std::int64_t>(static_cast<std::size_t>(space.size()), 0));
                hist[0][static_cast<std::size_t>(cls)] += 1;
            }
        }
        int d = k - 1;
        while (d >= 0 && ++idx[static_cast<std::size_t>(d)] == files[static_cast<std::size_t>(d)].size()) {
            idx[static_cast<std::size_t>(d)] = 0;
            --d;
        }
        if (d < 0) break;
    }
    return out;
}

void check_against_brute(const PatternTable& table, const BruteTable& brute) {
    CHECK(table.total_tuples() == brute.total);
    CHECK(table.fully_blocked_count() == brute.blocked);
    REQUIRE(table.rows().size() == brute.rows.size());
    std::int64_t sum = 0;
    for (const auto& row : table.rows()) {
        auto it = brute.rows.find(std::make_pair(row.gamma, row.blocking));
        REQUIRE(it != brute.rows.end());
        CHECK(row.count == it->second);
        CHECK_FALSE(table.space().pattern(row.blocking).is_singletons());
        sum += row.count;
    }
    CHECK(sum + table.fully_blocked_count() == table.total_tuples());
}

} // namespace

TEST_CASE("comparator validation rejects malformed declarations") {
    CHECK_THROWS_AS(validate_comparators({}), ConfigError);
    CHECK_THROWS_AS(validate_comparators({exact_field("")}), ConfigError);
    CHECK_THROWS_AS(validate_comparators({exact_field("a"), exact_field("a")}), ConfigError);
    auto not_numeric = banded_field("b", 3, {0, 1, 2});
    not_numeric.numeric = false;
    CHECK_THROWS_AS(validate_comparators({not_numeric}), ConfigError);
    CHECK_THROWS_AS(validate_comparators({banded_field("b", 0, {0})}), ConfigError);
    CHECK_THROWS_AS(validate_comparators({banded_field("b", 3, {})}), ConfigError);
    CHECK_THROWS_AS(validate_comparators({banded_field("b", 3, {0, 3})}), ConfigError);
    CHECK_THROWS_AS(validate_comparators({banded_field("b", 3, {1, 1})}), ConfigError);
    CHECK_NOTHROW(validate_comparators({exact_field("a"), banded_field("b", 3, {0, 1, 2})}));
}

TEST_CASE("banded tokens follow the shifted-band construction") {
    auto age = banded_field("age", 3, {0, 1, 2});
    auto toks = derive_banded_fields(Value{std::int64_t{4}}, age);
    REQUIRE(toks.size() == 3);
    CHECK(*toks[0] == 1);
    CHECK(*toks[1] == 1);
    CHECK(*toks[2] == 2);

    auto missing = derive_banded_fields(Value{}, age);
    for (const auto& t : missing) CHECK_FALSE(t.has_value());

    auto count_agreements = [&](std::int64_t a, std::int64_t b) {
        auto ta = derive_banded_fields(Value{a}, age);
        auto tb = derive_banded_fields(Value{b}, age);
        int n = 0;
        for (std::size_t i = 0; i < ta.size(); ++i)
            if (*ta[i] == *tb[i]) ++n;
        return n;
    };
    CHECK(count_agreements(10, 10) == 3);
    CHECK(count_agreements(10, 12) == 1);

    // two values at distance d share exactly max(0, width - d) bands
    for (std::int64_t v = -20; v <= 20; ++v)
        for (std::int64_t d = 0; d <= 5; ++d)
            CHECK(count_agreements(v, v + d) == std::max<std::int64_t>(0, 3 - d));

    CHECK_THROWS_AS(derive_banded_fields(Value{std::int64_t{4}}, exact_field("a")), ConfigError);
    CHECK_THROWS_AS(derive_banded_fields(Value{std::string{"x"}}, age), InputError);
}

TEST_CASE("field comparison groups agreeing entries") {
    auto f = exact_field("v", FieldRole::compared, true);
    std::vector<Value> vals = {std::int64_t{7}, std::int64_t{7}, std::int64_t{9}};
    CHECK(to_string(compare_field(std::span<const Value>(vals), f)) == "12/3");

    std::vector<Value> all_missing = {Value{}, Value{}, Value{}};
    CHECK(to_string(compare_field(std::span<const Value>(all_missing), f)) == "1/2/3");

    std::vector<Value> strings = {std::string{"x"}, std::string{"y"}, std::string{"x"}};
    CHECK(to_string(compare_field(std::span<const Value>(strings), exact_field("s"))) == "13/2");

    // conjunctive banded agreement needs every derived token to match
    auto age = banded_field("age", 3, {0, 1, 2});
    std::vector<Value> ages = {std::int64_t{30}, std::int64_t{31}, std::int64_t{40}};
    CHECK(to_string(compare_field(std::span<const Value>(ages), age)) == "1/2/3");
    const char* per_offset[] = {"12/3", "12/3", "1/2/3"};
    for (std::int64_t o = 0; o < 3; ++o) {
        auto single = banded_field("age", 3, {o});
        CHECK(to_string(compare_field(std::span<const Value>(ages), single)) == per_offset[o]);
    }

    // pairwise agreement booleans of the partition rebuild it exactly
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<int> val(0, 3);
    std::uniform_int_distribution<int> miss(0, 9);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<Value> vs(5);
        for (auto& v : vs) v = miss(rng) == 0 ? Value{} : Value{static_cast<std::int64_t>(val(rng))};
        Partition p = compare_field(std::span<const Value>(vs), f);
        Partition rebuilt = partition_from_labels(std::span<const std::uint8_t>(p.rgs()));
        CHECK(rebuilt == p);
        for (int i = 0; i < 5; ++i)
            for (int j = i + 1; j < 5; ++j) {
                bool agree = !is_missing(vs[static_cast<std::size_t>(i)]) &&
                             !is_missing(vs[static_cast<std::size_t>(j)]) &&
                             vs[static_cast<std::size_t>(i)] == vs[static_cast<std::size_t>(j)];
                CHECK(p.same_block(i, j) == agree);
            }
    }
}

TEST_CASE("blocking pattern is the meet over blocking fields") {
    std::vector<FieldComparator> fields = {exact_field("town", FieldRole::blocking),
                                           exact_field("gender", FieldRole::blocking),
                                           exact_field("name")};
    Record r1 = make_record("a", {std::string{"east"}, std::string{"m"}, std::string{"ann"}});
    Record r2 = make_record("b", {std::string{"west"}, std::string{"m"}, std::string{"bob"}});
    Record r3 = make_record("c", {std::string{"west"}, std::string{"m"}, std::string{"cal"}});
    const Record* tuple[] = {&r1, &r2, &r3};
    CHECK(to_string(blocking_pattern(std::span<const Record* const>(tuple), fields)) == "1/23");

    std::vector<FieldComparator> unblocked = {exact_field("name")};
    CHECK(to_string(blocking_pattern(std::span<const Record* const>(tuple), unblocked)) == "123");

    Record q1 = make_record("a", {std::string{"east"}, std::string{"m"}, Value{}});
    Record q2 = make_record("b", {std::string{"east"}, std::string{"f"}, Value{}});
    Record q3 = make_record("c", {std::string{"west"}, std::string{"m"}, Value{}});
    const Record* tuple2[] = {&q1, &q2, &q3};
    CHECK(to_string(blocking_pattern(std::span<const Record* const>(tuple2), fields)) == "1/2/3");
}

TEST_CASE("single-pair table has one row") {
    std::vector<FieldComparator> fields = {exact_field("v")};
    DataFile a{1, {make_record("r1", {std::string{"x"}})}};
    DataFile b{2, {make_record("r1", {std::string{"x"}})}};
    PatternTable table = build_pattern_table({a, b}, fields);
    CHECK(table.total_tuples() == 1);
    CHECK(table.fully_blocked_count() == 0);
    REQUIRE(table.rows().size() == 1);
    CHECK(table.rows()[0].count == 1);
    CHECK(to_string(table.space().pattern(table.rows()[0].gamma[0])) == "12");
    CHECK(to_string(table.space().pattern(table.rows()[0].blocking)) == "12");
}

TEST_CASE("table construction fails loudly on bad input") {
    std::vector<FieldComparator> fields = {exact_field("v")};
    DataFile a{1, {make_record("r1", {std::string{"x"}})}};
    DataFile empty{2, {}};
    CHECK_THROWS_AS(build_pattern_table({a, empty}, fields), InputError);
    CHECK_THROWS_AS(build_pattern_table({a}, fields), ConfigError);

    DataFile arity{2, {make_record("r1", {std::string{"x"}, std::string{"y"}})}};
    CHECK_THROWS_AS(build_pattern_table({a, arity}, fields), InputError);

    // all-blocking schemas degenerate to rows with empty gammas
    std::vector<FieldComparator> only_blocking = {exact_field("v", FieldRole::blocking)};
    DataFile b{2, {make_record("r1", {std::string{"x"}}), make_record("r2", {std::string{"z"}})}};
    PatternTable bare = build_pattern_table({a, b}, only_blocking);
    CHECK(bare.field_count() == 0);
    CHECK(bare.fully_blocked_count() == 1);
    REQUIRE(bare.rows().size() == 1);
    CHECK(bare.rows()[0].gamma.empty());
    CHECK(to_string(bare.space().pattern(bare.rows()[0].blocking)) == "12");

    DataFile big{1, {}};
    for (int i = 0; i < 100; ++i) big.records.push_back(make_record(std::to_string(i), {std::string{"x"}}));
    TableOptions opts;
    opts.max_tuples = 9999;
    CHECK_THROWS_AS(build_pattern_table({big, big}, fields, opts), SizeLimitError);
}

TEST_CASE("blocked iteration matches brute-force enumeration") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> cat(0, 2);
    std::uniform_int_distribution<int> num(0, 12);
    std::uniform_int_distribution<int> block_val(0, 3);
    std::uniform_int_distribution<int> miss(0, 11);

    std::vector<FieldComparator> fields = {exact_field("block_town", FieldRole::blocking),
                                           exact_field("cat"),
                                           banded_field("age", 3, {0, 1, 2}),
                                           exact_field("num", FieldRole::compared, true)};

    auto random_file = [&](int id, int n) {
        DataFile file{id, {}};
        for (int r = 0; r < n; ++r) {
            std::vector<Value> vals;
            vals.push_back(miss(rng) == 0 ? Value{} : Value{std::string(1, static_cast<char>('a' + block_val(rng)))});
            vals.push_back(miss(rng) == 0 ? Value{} : Value{std::string(1, static_cast<char>('p' + cat(rng)))});
            vals.push_back(miss(rng) == 0 ? Value{} : Value{static_cast<std::int64_t>(num(rng))});
            vals.push_back(miss(rng) == 0 ? Value{} : Value{static_cast<std::int64_t>(cat(rng))});
            file.records.push_back(make_record("r" + std::to_string(r), std::move(vals)));
        }
        return file;
    };

    for (int trial = 0; trial < 5; ++trial) {
        std::vector<DataFile> files = {random_file(1, 9), random_file(2, 8), random_file(3, 7)};
        TableOptions opts;
        opts.keep_tuples = true;
        PatternTable table = build_pattern_table(files, fields, opts);
        BruteTable brute = brute_force_table(files, fields);
        check_against_brute(table, brute);

        // stored tuples plus the fully-blocked stream cover the product once
        std::int64_t streamed = 0;
        std::set<std::vector<std::int32_t>> seen;
        table.visit_fully_blocked([&](std::span<const std::int32_t> t) {
            ++streamed;
            seen.emplace(t.begin(), t.end());
        });
        CHECK(streamed == table.fully_blocked_count());
        CHECK(static_cast<std::int64_t>(seen.size()) == streamed);
        for (const auto& row : table.rows()) {
            CHECK(static_cast<std::int64_t>(row.tuples.size()) == row.count);
            for (const auto& t : row.tuples) CHECK(seen.count(t) == 0);
        }
    }

    // two and four files through the same oracle
    std::vector<DataFile> two = {random_file(1, 20), random_file(2, 17)};
    check_against_brute(build_pattern_table(two, fields), brute_force_table(two, fields));
    std::vector<DataFile> four = {random_file(1, 6), random_file(2, 5), random_file(3, 5), random_file(4, 4)};
    check_against_brute(build_pattern_table(four, fields), brute_force_table(four, fields));
}

TEST_CASE("table counts are invariant under record order") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> v(0, 2);
    std::vector<FieldComparator> fields = {exact_field("b", FieldRole::blocking), exact_field("c")};
    auto random_file = [&](int id, int n) {
        DataFile file{id, {}};
        for (int r = 0; r < n; ++r)
            file.records.push_back(make_record("r" + std::to_string(r),
                                               {Value{std::string(1, static_cast<char>('a' + v(rng)))},
                                                Value{std::string(1, static_cast<char>('x' + v(rng)))}}));
        return file;
    };
    std::vector<DataFile> files = {random_file(1, 12), random_file(2, 11), random_file(3, 10)};
    PatternTable before = build_pattern_table(files, fields);
    for (auto& f : files) std::shuffle(f.records.begin(), f.records.end(), rng);
    PatternTable after = build_pattern_table(files, fields);
    REQUIRE(before.rows().size() == after.rows().size());
    for (std::size_t i = 0; i < before.rows().size(); ++i) {
        CHECK(before.rows()[i].gamma == after.rows()[i].gamma);
        CHECK(before.rows()[i].blocking == after.rows()[i].blocking);
        CHECK(before.rows()[i].count == after.rows()[i].count);
    }
    CHECK(before.fully_blocked_count() == after.fully_blocked_count());
}

TEST_CASE("true-class tallies match brute force when blocking respects entities") {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> ent(0, 19);
    std::uniform_int_distribution<int> cat(0, 2);

    // blocking value is a function of the entity, so same entity implies same key
    std::vector<FieldComparator> fields = {exact_field("b", FieldRole::blocking, true), exact_field("c")};
    std::vector<std::vector<Index>> entity_of(3);
    std::vector<DataFile> files;
    for (int fi = 0; fi < 3; ++fi) {
        DataFile file{fi + 1, {}};
        for (int r = 0; r < 10; ++r) {
            int e = ent(rng);
            entity_of[static_cast<std::size_t>(fi)].push_back(e);
            file.records.push_back(make_record("r" + std::to_string(r),
                                               {Value{static_cast<std::int64_t>(e % 5)},
                                                Value{std::string(1, static_cast<char>('x' + cat(rng)))}}));
        }
        files.push_back(std::move(file));
    }
    PatternSpace space = enumerate_patterns(3);
    auto mask_table = build_agreement_mask_table(space);
    TrueClassFn true_class = [&](std::span<const std::int32_t> tuple) {
        auto mask = pairwise_agreement_mask(3, [&](int i, int j) {
            return entity_of[static_cast<std::size_t>(i)][static_cast<std::size_t>(tuple[static_cast<std::size_t>(i)])] ==
                   entity_of[static_cast<std::size_t>(j)][static_cast<std::size_t>(tuple[static_cast<std::size_t>(j)])];
        });
        return mask_table[mask];
    };

    PatternTable table = build_pattern_table(files, fields, {}, true_class);
    BruteTable brute = brute_force_table(files, fields, true_class);
    check_against_brute(table, brute);
    REQUIRE(table.has_class_counts());
    for (std::size_t i = 0; i < table.rows().size(); ++i) {
        const auto& row = table.rows()[i];
        auto it = brute.class_rows.find(std::make_pair(row.gamma, row.blocking));
        REQUIRE(it != brute.class_rows.end());
        std::int64_t row_sum = 0;
        for (Index c = 0; c < space.size(); ++c) {
            CHECK(table.row_class_counts()(static_cast<Index>(i), c) == it->second[0][static_cast<std::size_t>(c)]);
            row_sum += table.row_class_counts()(static_cast<Index>(i), c);
        }
        CHECK(row_sum == row.count);
    }
    for (Index c = 0; c < space.size(); ++c)
        CHECK(table.blocked_class_counts()(c) == brute.blocked_classes[static_cast<std::size_t>(c)]);
}
