#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "multilink/error.hpp"
#include "multilink/types.hpp"

namespace multilink {

/// Hard cap on the number of datafiles. B_12 = 4,213,597 matching classes;
/// parameter blocks of length B_K make anything larger unworkable.
inline constexpr int kMaxFiles = 12;

/// A set partition of {1..K} in canonical restricted-growth encoding.
///
/// rgs[i] is the block label of element i; labels are assigned in order of
/// first appearance, so rgs[0] == 0 and rgs[i] <= 1 + max(rgs[0..i-1]).
/// Two partitions are equal iff their RGS sequences are equal, which makes
/// the encoding a unique O(K) representative of each matching pattern.
class Partition {
public:
    Partition() = default;

    /// Builds from a raw RGS sequence. Throws InputError if the sequence is
    /// not a valid restricted-growth sequence.
    explicit Partition(std::span<const std::uint8_t> rgs);

    int size() const { return k_; }
    int block_count() const { return blocks_; }
    std::uint8_t block_of(int i) const { return rgs_[static_cast<std::size_t>(i)]; }
    std::span<const std::uint8_t> rgs() const { return {rgs_.data(), static_cast<std::size_t>(k_)}; }

    bool same_block(int i, int j) const { return block_of(i) == block_of(j); }

    /// Packs the RGS into a 64-bit key (4 bits per element; K <= 12).
    std::uint64_t code() const;

    bool is_singletons() const { return blocks_ == k_; }
    bool is_one_block() const { return blocks_ == 1; }

    friend bool operator==(const Partition& a, const Partition& b) {
        if (a.k_ != b.k_) return false;
        for (int i = 0; i < a.k_; ++i)
            if (a.rgs_[static_cast<std::size_t>(i)] != b.rgs_[static_cast<std::size_t>(i)]) return false;
        return true;
    }
    friend bool operator!=(const Partition& a, const Partition& b) { return !(a == b); }

private:
    std::uint8_t k_ = 0;
    std::uint8_t blocks_ = 0;
    std::array<std::uint8_t, kMaxFiles> rgs_{};
};

struct PartitionHash {
    std::size_t operator()(const Partition& p) const noexcept {
        std::uint64_t x = p.code();
        x ^= x >> 33;
        x *= 0xff51afd7ed558ccdULL;
        x ^= x >> 33;
        return static_cast<std::size_t>(x);
    }
};

/// All B_K partitions of {1..K} in the canonical order: most blocks first
/// (all-singletons at position 0, the one-block partition last), ties broken
/// by lexicographically ascending RGS. For K = 3 this is exactly
/// 1/2/3, 12/3, 13/2, 1/23, 123.
class PatternSpace {
public:
    explicit PatternSpace(int k);

    int k() const { return k_; }
    Index size() const { return static_cast<Index>(patterns_.size()); }
    const Partition& pattern(Index i) const { return patterns_[static_cast<std::size_t>(i)]; }
    const std::vector<Partition>& patterns() const { return patterns_; }

    /// Canonical position of a partition. Throws DimensionError if the
    /// partition is over a different K.
    Index index_of(const Partition& p) const;

    Index singletons_index() const { return 0; }
    Index one_block_index() const { return size() - 1; }

private:
    int k_;
    std::vector<Partition> patterns_;
    std::unordered_map<std::uint64_t, Index> index_;
};

/// Bell number B_k via the recurrence B_K = sum_j B_j * C(K-1, j), B_0 = 1.
/// Accepts 1 <= k <= 12 and throws SizeLimitError outside that range.
std::uint64_t bell_number(int k);

/// Enumerates the full pattern space for K files. Same cap as bell_number.
PatternSpace enumerate_patterns(int k);

/// True iff every block of `fine` is contained in some block of `coarse`
/// (the refinement partial order; reflexive). Throws DimensionError on
/// mismatched K.
bool is_refinement(const Partition& fine, const Partition& coarse);

/// Greatest common refinement: i and j share a block in the result iff they
/// share a block in both a and b.
Partition meet(const Partition& a, const Partition& b);

/// Covering pairs (fine, coarse) of the refinement order: fine < coarse with
/// nothing strictly between. In the partition lattice these are exactly the
/// pairs where coarse merges two blocks of fine.
std::vector<std::pair<Partition, Partition>> hasse_edges(const PatternSpace& space);

/// Canonical positions of every pattern p' <= p (the admissible classes under
/// blocking pattern p). Always includes p itself and the all-singletons
/// pattern; returned in canonical order.
std::vector<Index> downset_indices(const PatternSpace& space, const Partition& p);

/// Canonicalizes a labeling into a Partition: positions with equal labels
/// share a block. Invariant under renaming of the labels.
Partition partition_from_labels(std::span<const int> labels);

template <typename T>
Partition partition_from_labels(std::span<const T> labels) {
    if (labels.empty() || labels.size() > static_cast<std::size_t>(kMaxFiles))
        throw SizeLimitError("partition_from_labels: need between 1 and 12 labels");
    std::vector<int> ids(labels.size());
    int next = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        int id = next;
        for (std::size_t j = 0; j < i; ++j) {
            if (labels[j] == labels[i]) {
                id = ids[j];
                break;
            }
        }
        if (id == next) ++next;
        ids[i] = id;
    }
    return partition_from_labels(std::span<const int>(ids));
}

/// Bitmask of pairwise agreements for positions 0..k-1: one bit per pair
/// (i, j), i < j, enumerated with j innermost. Equivalence relations and
/// partitions carry the same information, so the mask identifies a pattern.
template <typename Eq>
std::uint32_t pairwise_agreement_mask(int k, Eq&& agree) {
    std::uint32_t mask = 0;
    int t = 0;
    for (int i = 0; i < k; ++i)
        for (int j = i + 1; j < k; ++j, ++t)
            if (agree(i, j)) mask |= (1u << t);
    return mask;
}

/// Flat lookup from pairwise_agreement_mask to canonical pattern index;
/// entries for non-transitive masks are -1. Sized 2^(K(K-1)/2), so K <= 6
/// (SizeLimitError beyond). Lets hot loops classify tuples without building
/// a Partition.
std::vector<Index> build_agreement_mask_table(const PatternSpace& space);

/// Slash notation for K <= 9 ("13/2", "123"); bracketed block list for
/// K >= 10 ("[1,10/2,3/...]"). Blocks are ordered by smallest element,
/// elements ascending, matching the canonical RGS block order.
std::string to_string(const Partition& p);

/// Parses both notations accepted by to_string. Throws InputError on
/// malformed text.
Partition partition_from_string(const std::string& text);

} // namespace multilink
