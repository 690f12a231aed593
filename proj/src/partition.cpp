#include "multilink/partition.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace multilink {

namespace {

void check_count(int k, const char* who) {
    if (k < 1 || k > kMaxFiles) {
        throw SizeLimitError(std::string(who) + ": K must be between 1 and " +
                             std::to_string(kMaxFiles) + ", got " + std::to_string(k));
    }
}

// Canonical order: all-singletons first, one-block last, ties by lex RGS.
bool canonical_less(const Partition& a, const Partition& b) {
    if (a.block_count() != b.block_count()) return a.block_count() > b.block_count();
    auto ra = a.rgs();
    auto rb = b.rgs();
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
}

} // namespace

Partition::Partition(std::span<const std::uint8_t> rgs) {
    if (rgs.empty() || rgs.size() > static_cast<std::size_t>(kMaxFiles))
        throw SizeLimitError("Partition: RGS length must be between 1 and " +
                             std::to_string(kMaxFiles));
    int max_seen = -1;
    for (std::size_t i = 0; i < rgs.size(); ++i) {
        if (rgs[i] > max_seen + 1)
            throw InputError("Partition: invalid restricted-growth sequence at position " +
                             std::to_string(i));
        max_seen = std::max(max_seen, static_cast<int>(rgs[i]));
        rgs_[i] = rgs[i];
    }
    k_ = static_cast<std::uint8_t>(rgs.size());
    blocks_ = static_cast<std::uint8_t>(max_seen + 1);
}

std::uint64_t Partition::code() const {
    std::uint64_t key = static_cast<std::uint64_t>(k_);
    for (int i = 0; i < k_; ++i)
        key = (key << 4) | rgs_[static_cast<std::size_t>(i)];
    return key;
}

std::uint64_t bell_number(int k) {
    check_count(k, "bell_number");
    // B_K = sum_{j=0}^{K-1} B_j * C(K-1, j), B_0 = 1.
    std::vector<std::uint64_t> bell(static_cast<std::size_t>(k) + 1, 0);
    bell[0] = 1;
    for (int m = 1; m <= k; ++m) {
        std::uint64_t binom = 1; // C(m-1, j), updated incrementally
        std::uint64_t sum = 0;
        for (int j = 0; j < m; ++j) {
            if (j > 0) binom = binom * static_cast<std::uint64_t>(m - j) / static_cast<std::uint64_t>(j);
            sum += bell[static_cast<std::size_t>(j)] * binom;
        }
        bell[static_cast<std::size_t>(m)] = sum;
    }
    return bell[static_cast<std::size_t>(k)];
}

PatternSpace::PatternSpace(int k) : k_(k) {
    check_count(k, "enumerate_patterns");
    // Depth-first enumeration of all restricted-growth sequences.
    std::vector<std::uint8_t> rgs(static_cast<std::size_t>(k), 0);
    patterns_.reserve(static_cast<std::size_t>(bell_number(k)));
    auto rec = [&](auto&& self, int pos, std::uint8_t max_so_far) -> void {
        if (pos == k) {
            patterns_.emplace_back(std::span<const std::uint8_t>(rgs.data(), rgs.size()));
            return;
        }
        for (std::uint8_t v = 0; v <= max_so_far + 1; ++v) {
            rgs[static_cast<std::size_t>(pos)] = v;
            self(self, pos + 1, std::max(max_so_far, v));
        }
    };
    rec(rec, 1, 0);
    std::sort(patterns_.begin(), patterns_.end(), canonical_less);
    index_.reserve(patterns_.size());
    for (std::size_t i = 0; i < patterns_.size(); ++i)
        index_.emplace(patterns_[i].code(), static_cast<Index>(i));
}

Index PatternSpace::index_of(const Partition& p) const {
    if (p.size() != k_)
        throw DimensionError("PatternSpace::index_of: partition over K=" + std::to_string(p.size()) +
                             " queried in a K=" + std::to_string(k_) + " space");
    auto it = index_.find(p.code());
    if (it == index_.end())
        throw InputError("PatternSpace::index_of: partition not in space");
    return it->second;
}

PatternSpace enumerate_patterns(int k) {
    return PatternSpace(k);
}

bool is_refinement(const Partition& fine, const Partition& coarse) {
    if (fine.size() != coarse.size())
        throw DimensionError("is_refinement: partitions over different K (" +
                             std::to_string(fine.size()) + " vs " + std::to_string(coarse.size()) + ")");
    // Each fine block must map into a single coarse block.
    std::array<int, kMaxFiles> coarse_of{};
    coarse_of.fill(-1);
    for (int i = 0; i < fine.size(); ++i) {
        int b = fine.block_of(i);
        int c = coarse.block_of(i);
        if (coarse_of[static_cast<std::size_t>(b)] == -1)
            coarse_of[static_cast<std::size_t>(b)] = c;
        else if (coarse_of[static_cast<std::size_t>(b)] != c)
            return false;
    }
    return true;
}

Partition meet(const Partition& a, const Partition& b) {
    if (a.size() != b.size())
        throw DimensionError("meet: partitions over different K (" + std::to_string(a.size()) +
                             " vs " + std::to_string(b.size()) + ")");
    std::array<int, kMaxFiles> labels{};
    for (int i = 0; i < a.size(); ++i)
        labels[static_cast<std::size_t>(i)] = a.block_of(i) * (kMaxFiles + 1) + b.block_of(i);
    return partition_from_labels(std::span<const int>(labels.data(), static_cast<std::size_t>(a.size())));
}

std::vector<std::pair<Partition, Partition>> hasse_edges(const PatternSpace& space) {
    // Covers in the partition lattice merge exactly two blocks, so candidate
    // pairs differ by one in block count.
    std::vector<std::pair<Partition, Partition>> edges;
    for (Index i = 0; i < space.size(); ++i) {
        const Partition& fine = space.pattern(i);
        for (Index j = 0; j < space.size(); ++j) {
            const Partition& coarse = space.pattern(j);
            if (fine.block_count() != coarse.block_count() + 1) continue;
            if (is_refinement(fine, coarse)) edges.emplace_back(fine, coarse);
        }
    }
    return edges;
}

std::vector<Index> downset_indices(const PatternSpace& space, const Partition& p) {
    std::vector<Index> out;
    for (Index i = 0; i < space.size(); ++i)
        if (is_refinement(space.pattern(i), p)) out.push_back(i);
    return out;
}

Partition partition_from_labels(std::span<const int> labels) {
    if (labels.empty() || labels.size() > static_cast<std::size_t>(kMaxFiles))
        throw SizeLimitError("partition_from_labels: need between 1 and " +
                             std::to_string(kMaxFiles) + " labels");
    std::vector<std::uint8_t> rgs(labels.size());
    std::array<int, kMaxFiles> seen{};   // label value per block id
    int next = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        int id = next;
        for (int b = 0; b < next; ++b) {
            if (seen[static_cast<std::size_t>(b)] == labels[i]) {
                id = b;
                break;
            }
        }
        if (id == next) seen[static_cast<std::size_t>(next++)] = labels[i];
        rgs[i] = static_cast<std::uint8_t>(id);
    }
    return Partition(std::span<const std::uint8_t>(rgs.data(), rgs.size()));
}

std::vector<Index> build_agreement_mask_table(const PatternSpace& space) {
    const int k = space.k();
    if (k > 6)
        throw SizeLimitError("build_agreement_mask_table: flat table needs K <= 6, got " +
                             std::to_string(k));
    const int pairs = k * (k - 1) / 2;
    std::vector<Index> table(std::size_t{1} << pairs, Index{-1});
    for (Index i = 0; i < space.size(); ++i) {
        const Partition& p = space.pattern(i);
        std::uint32_t mask = pairwise_agreement_mask(k, [&](int a, int b) { return p.same_block(a, b); });
        table[mask] = i;
    }
    return table;
}

std::string to_string(const Partition& p) {
    // Blocks in first-appearance order, which for canonical RGS is order of
    // smallest element.
    std::vector<std::vector<int>> blocks(static_cast<std::size_t>(p.block_count()));
    for (int i = 0; i < p.size(); ++i)
        blocks[p.block_of(i)].push_back(i + 1);
    std::ostringstream out;
    bool bracketed = p.size() >= 10;
    if (bracketed) out << '[';
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        if (b > 0) out << '/';
        for (std::size_t e = 0; e < blocks[b].size(); ++e) {
            if (bracketed && e > 0) out << ',';
            out << blocks[b][e];
        }
    }
    if (bracketed) out << ']';
    return out.str();
}

Partition partition_from_string(const std::string& text) {
    if (text.empty()) throw InputError("partition_from_string: empty text");
    std::vector<std::vector<int>> blocks;
    if (text.front() == '[') {
        if (text.back() != ']')
            throw InputError("partition_from_string: unterminated bracket in '" + text + "'");
        std::string body = text.substr(1, text.size() - 2);
        std::vector<int> current;
        std::string token;
        auto flush_token = [&]() {
            if (token.empty())
                throw InputError("partition_from_string: empty element in '" + text + "'");
            current.push_back(std::stoi(token));
            token.clear();
        };
        for (char c : body) {
            if (std::isdigit(static_cast<unsigned char>(c))) {
                token.push_back(c);
            } else if (c == ',') {
                flush_token();
            } else if (c == '/') {
                flush_token();
                blocks.push_back(std::move(current));
                current.clear();
            } else {
                throw InputError("partition_from_string: unexpected character '" +
                                 std::string(1, c) + "' in '" + text + "'");
            }
        }
        flush_token();
        blocks.push_back(std::move(current));
    } else {
        std::vector<int> current;
        for (char c : text) {
            if (std::isdigit(static_cast<unsigned char>(c)) && c != '0') {
                current.push_back(c - '0');
            } else if (c == '/') {
                if (current.empty())
                    throw InputError("partition_from_string: empty block in '" + text + "'");
                blocks.push_back(std::move(current));
                current.clear();
            } else {
                throw InputError("partition_from_string: unexpected character '" +
                                 std::string(1, c) + "' in '" + text + "'");
            }
        }
        if (current.empty())
            throw InputError("partition_from_string: empty block in '" + text + "'");
        blocks.push_back(std::move(current));
    }

    int k = 0;
    for (const auto& b : blocks) k += static_cast<int>(b.size());
    if (k < 1 || k > kMaxFiles)
        throw SizeLimitError("partition_from_string: K must be between 1 and " +
                             std::to_string(kMaxFiles) + ", got " + std::to_string(k));
    std::vector<int> labels(static_cast<std::size_t>(k), -1);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        for (int e : blocks[b]) {
            if (e < 1 || e > k)
                throw InputError("partition_from_string: element " + std::to_string(e) +
                                 " out of range in '" + text + "'");
            if (labels[static_cast<std::size_t>(e - 1)] != -1)
                throw InputError("partition_from_string: element " + std::to_string(e) +
                                 " repeated in '" + text + "'");
            labels[static_cast<std::size_t>(e - 1)] = static_cast<int>(b);
        }
    }
    return partition_from_labels(std::span<const int>(labels.data(), labels.size()));
}

} // namespace multilink
