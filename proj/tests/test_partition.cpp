#include "doctest.h"

#include <algorithm>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "multilink/partition.hpp"

using namespace multilink;

namespace {

// Independent Bell oracle: B_k = sum_j S(k,j) with the Stirling triangle.
std::uint64_t bell_by_stirling(int k) {
    std::vector<std::vector<std::uint64_t>> s(static_cast<std::size_t>(k) + 1,
                                              std::vector<std::uint64_t>(static_cast<std::size_t>(k) + 1, 0));
    s[0][0] = 1;
    for (int n = 1; n <= k; ++n)
        for (int j = 1; j <= n; ++j)
            s[static_cast<std::size_t>(n)][static_cast<std::size_t>(j)] =
                static_cast<std::uint64_t>(j) * s[static_cast<std::size_t>(n - 1)][static_cast<std::size_t>(j)] +
                s[static_cast<std::size_t>(n - 1)][static_cast<std::size_t>(j - 1)];
    std::uint64_t total = 0;
    for (int j = 0; j <= k; ++j) total += s[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
    return total;
}

// Definitional refinement oracle over element pairs.
bool refines_by_pairs(const Partition& fine, const Partition& coarse) {
    for (int i = 0; i < fine.size(); ++i)
        for (int j = i + 1; j < fine.size(); ++j)
            if (fine.same_block(i, j) && !coarse.same_block(i, j)) return false;
    return true;
}

Partition parse(const std::string& text) { return partition_from_string(text); }

} // namespace

TEST_CASE("bell numbers match the reference values and the Stirling oracle") {
    const std::uint64_t expected[] = {1, 2, 5, 15, 52, 203, 877, 4140};
    for (int k = 1; k <= 8; ++k) CHECK(bell_number(k) == expected[k - 1]);
    for (int k = 1; k <= 12; ++k) CHECK(bell_number(k) == bell_by_stirling(k));
    CHECK(bell_number(12) == 4213597);
    CHECK_THROWS_AS(bell_number(0), SizeLimitError);
    CHECK_THROWS_AS(bell_number(13), SizeLimitError);
}

TEST_CASE("pattern enumeration is canonical and complete") {
    for (int k = 1; k <= 8; ++k) {
        PatternSpace space = enumerate_patterns(k);
        CHECK(space.size() == static_cast<Index>(bell_number(k)));
        CHECK(space.pattern(space.singletons_index()).is_singletons());
        CHECK(space.pattern(space.one_block_index()).is_one_block());
        std::set<std::uint64_t> codes;
        for (Index i = 0; i < space.size(); ++i) {
            codes.insert(space.pattern(i).code());
            CHECK(space.index_of(space.pattern(i)) == i);
        }
        CHECK(codes.size() == static_cast<std::size_t>(space.size()));
    }

    PatternSpace three = enumerate_patterns(3);
    const char* order3[] = {"1/2/3", "12/3", "13/2", "1/23", "123"};
    for (Index i = 0; i < three.size(); ++i) CHECK(to_string(three.pattern(i)) == order3[i]);

    PatternSpace two = enumerate_patterns(2);
    CHECK(to_string(two.pattern(0)) == "1/2");
    CHECK(to_string(two.pattern(1)) == "12");

    PatternSpace four = enumerate_patterns(4);
    CHECK(four.size() == 15);
    CHECK(to_string(four.pattern(0)) == "1/2/3/4");
    CHECK(to_string(four.pattern(14)) == "1234");

    CHECK_THROWS_AS(three.index_of(parse("1/2")), DimensionError);
}

TEST_CASE("refinement is a partial order and matches the pairwise definition") {
    CHECK(is_refinement(parse("1/2/3"), parse("12/3")));
    CHECK_FALSE(is_refinement(parse("12/3"), parse("13/2")));
    CHECK_THROWS_AS(is_refinement(parse("1/2"), parse("1/2/3")), DimensionError);

    for (int k = 2; k <= 5; ++k) {
        PatternSpace space = enumerate_patterns(k);
        const Index n = space.size();
        std::vector<std::vector<bool>> leq(static_cast<std::size_t>(n),
                                           std::vector<bool>(static_cast<std::size_t>(n), false));
        for (Index a = 0; a < n; ++a) {
            for (Index b = 0; b < n; ++b) {
                bool r = is_refinement(space.pattern(a), space.pattern(b));
                CHECK(r == refines_by_pairs(space.pattern(a), space.pattern(b)));
                leq[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = r;
            }
            CHECK(leq[static_cast<std::size_t>(a)][static_cast<std::size_t>(a)]);
            CHECK(is_refinement(space.pattern(space.singletons_index()), space.pattern(a)));
            CHECK(is_refinement(space.pattern(a), space.pattern(space.one_block_index())));
        }
        for (Index a = 0; a < n; ++a)
            for (Index b = 0; b < n; ++b) {
                if (a != b && leq[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)])
                    CHECK_FALSE(leq[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)]);
                for (Index c = 0; c < n; ++c)
                    if (leq[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] &&
                        leq[static_cast<std::size_t>(b)][static_cast<std::size_t>(c)])
                        CHECK(leq[static_cast<std::size_t>(a)][static_cast<std::size_t>(c)]);
            }
    }
}

TEST_CASE("meet is the greatest common refinement") {
    CHECK(meet(parse("12/3"), parse("13/2")) == parse("1/2/3"));
    CHECK(meet(parse("123/4"), parse("12/34")) == parse("12/3/4"));
    CHECK_THROWS_AS(meet(parse("1/2"), parse("1/2/3")), DimensionError);

    for (int k = 2; k <= 5; ++k) {
        PatternSpace space = enumerate_patterns(k);
        const Index n = space.size();
        const Partition& top = space.pattern(space.one_block_index());
        for (Index a = 0; a < n; ++a) {
            const Partition& pa = space.pattern(a);
            CHECK(meet(pa, top) == pa);
            CHECK(meet(pa, pa) == pa);
            for (Index b = 0; b < n; ++b) {
                const Partition& pb = space.pattern(b);
                Partition m = meet(pa, pb);
                CHECK(m == meet(pb, pa));
                for (int i = 0; i < k; ++i)
                    for (int j = i + 1; j < k; ++j)
                        CHECK(m.same_block(i, j) == (pa.same_block(i, j) && pb.same_block(i, j)));
                CHECK(is_refinement(m, pa));
                CHECK(is_refinement(m, pb));
                // greatest: every common refinement sits below the meet
                for (Index c = 0; c < n; ++c) {
                    const Partition& pc = space.pattern(c);
                    if (is_refinement(pc, pa) && is_refinement(pc, pb)) CHECK(is_refinement(pc, m));
                }
            }
        }
    }

    // associativity on a sample of triples
    PatternSpace space = enumerate_patterns(5);
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<Index> pick(0, space.size() - 1);
    for (int trial = 0; trial < 500; ++trial) {
        const Partition& a = space.pattern(pick(rng));
        const Partition& b = space.pattern(pick(rng));
        const Partition& c = space.pattern(pick(rng));
        CHECK(meet(meet(a, b), c) == meet(a, meet(b, c)));
    }
}

TEST_CASE("hasse edges are exactly the covering pairs") {
    PatternSpace two = enumerate_patterns(2);
    auto edges2 = hasse_edges(two);
    REQUIRE(edges2.size() == 1);
    CHECK(to_string(edges2[0].first) == "1/2");
    CHECK(to_string(edges2[0].second) == "12");

    PatternSpace three = enumerate_patterns(3);
    auto edges3 = hasse_edges(three);
    std::set<std::pair<std::string, std::string>> got;
    for (const auto& [f, c] : edges3) got.emplace(to_string(f), to_string(c));
    std::set<std::pair<std::string, std::string>> want = {
        {"1/2/3", "12/3"}, {"1/2/3", "13/2"}, {"1/2/3", "1/23"},
        {"12/3", "123"},   {"13/2", "123"},   {"1/23", "123"}};
    CHECK(got == want);

    for (int k = 2; k <= 5; ++k) {
        PatternSpace space = enumerate_patterns(k);
        const Index n = space.size();
        auto strictly_below = [&](Index a, Index b) {
            return a != b && is_refinement(space.pattern(a), space.pattern(b));
        };
        std::set<std::pair<Index, Index>> covers;
        for (Index a = 0; a < n; ++a)
            for (Index b = 0; b < n; ++b) {
                if (!strictly_below(a, b)) continue;
                bool gap = false;
                for (Index z = 0; z < n && !gap; ++z)
                    if (strictly_below(a, z) && strictly_below(z, b)) gap = true;
                if (!gap) covers.emplace(a, b);
            }
        std::set<std::pair<Index, Index>> got_k;
        for (const auto& [f, c] : hasse_edges(space))
            got_k.emplace(space.index_of(f), space.index_of(c));
        CHECK(got_k == covers);

        // transitive closure of the covers reproduces the strict order
        std::vector<std::vector<bool>> reach(static_cast<std::size_t>(n),
                                             std::vector<bool>(static_cast<std::size_t>(n), false));
        for (const auto& [a, b] : covers) reach[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = true;
        for (Index m = 0; m < n; ++m)
            for (Index a = 0; a < n; ++a)
                for (Index b = 0; b < n; ++b)
                    if (reach[static_cast<std::size_t>(a)][static_cast<std::size_t>(m)] &&
                        reach[static_cast<std::size_t>(m)][static_cast<std::size_t>(b)])
                        reach[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = true;
        for (Index a = 0; a < n; ++a)
            for (Index b = 0; b < n; ++b)
                CHECK(reach[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] == strictly_below(a, b));
    }
}

TEST_CASE("downset contains exactly the refinements") {
    PatternSpace three = enumerate_patterns(3);
    auto down = downset_indices(three, parse("12/3"));
    REQUIRE(down.size() == 2);
    CHECK(to_string(three.pattern(down[0])) == "1/2/3");
    CHECK(to_string(three.pattern(down[1])) == "12/3");

    for (int k = 2; k <= 5; ++k) {
        PatternSpace space = enumerate_patterns(k);
        for (Index p = 0; p < space.size(); ++p) {
            auto idx = downset_indices(space, space.pattern(p));
            CHECK(std::is_sorted(idx.begin(), idx.end()));
            std::set<Index> got(idx.begin(), idx.end());
            CHECK(got.count(space.singletons_index()) == 1);
            CHECK(got.count(p) == 1);
            for (Index q = 0; q < space.size(); ++q)
                CHECK(got.count(q) == (is_refinement(space.pattern(q), space.pattern(p)) ? 1u : 0u));
        }
    }
}

TEST_CASE("labels canonicalize and are invariant under renaming") {
    {
        const int labels[] = {7, 11, 7};
        CHECK(partition_from_labels(std::span<const int>(labels)) == parse("13/2"));
    }
    {
        const std::string labels[] = {"x", "x", "x"};
        CHECK(partition_from_labels(std::span<const std::string>(labels)) == parse("123"));
    }
    {
        const char labels[] = {'a', 'b', 'a'};
        CHECK(partition_from_labels(std::span<const char>(labels)) == parse("13/2"));
    }

    std::mt19937_64 rng(99);
    PatternSpace space = enumerate_patterns(5);
    for (Index p = 0; p < space.size(); ++p) {
        const Partition& part = space.pattern(p);
        std::vector<int> alphabet = {10, 20, 30, 40, 50};
        for (int trial = 0; trial < 10; ++trial) {
            std::shuffle(alphabet.begin(), alphabet.end(), rng);
            std::vector<int> labels(5);
            for (int i = 0; i < 5; ++i) labels[static_cast<std::size_t>(i)] = alphabet[part.block_of(i)];
            CHECK(partition_from_labels(std::span<const int>(labels)) == part);
        }
    }
}

TEST_CASE("string forms round trip") {
    for (int k = 1; k <= 5; ++k) {
        PatternSpace space = enumerate_patterns(k);
        for (Index i = 0; i < space.size(); ++i) {
            const Partition& p = space.pattern(i);
            CHECK(partition_from_string(to_string(p)) == p);
        }
    }

    // bracketed form for K >= 10
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        int k = 10 + static_cast<int>(rng() % 3);
        std::vector<int> labels(static_cast<std::size_t>(k));
        std::uniform_int_distribution<int> lab(0, 3);
        for (auto& v : labels) v = lab(rng);
        Partition p = partition_from_labels(std::span<const int>(labels));
        std::string text = to_string(p);
        CHECK(text.front() == '[');
        CHECK(partition_from_string(text) == p);
    }
    Partition p = partition_from_string("[1,2,10/3/4/5,6/7/8/9]");
    CHECK(p.size() == 10);
    CHECK(p.same_block(0, 9));
    CHECK(p.same_block(0, 1));
    CHECK(p.same_block(4, 5));
    CHECK_FALSE(p.same_block(2, 3));

    CHECK_THROWS_AS(partition_from_string(""), InputError);
    CHECK_THROWS_AS(partition_from_string("1//2"), InputError);
    CHECK_THROWS_AS(partition_from_string("12/2"), InputError);
    CHECK_THROWS_AS(partition_from_string("13/4"), InputError);
    CHECK_THROWS_AS(partition_from_string("1x2"), InputError);
    CHECK_THROWS_AS(partition_from_string("[1,2"), InputError);
}

TEST_CASE("invalid restricted-growth sequences are rejected") {
    const std::uint8_t bad1[] = {1};
    CHECK_THROWS_AS(Partition(std::span<const std::uint8_t>(bad1)), InputError);
    const std::uint8_t bad2[] = {0, 2};
    CHECK_THROWS_AS(Partition(std::span<const std::uint8_t>(bad2)), InputError);
    const std::uint8_t good[] = {0, 1, 0, 2};
    Partition p{std::span<const std::uint8_t>(good)};
    CHECK(p.block_count() == 3);
    CHECK(to_string(p) == "13/2/4");
    std::vector<std::uint8_t> too_long(13, 0);
    CHECK_THROWS_AS(Partition(std::span<const std::uint8_t>(too_long)), SizeLimitError);
}
