#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "multilink/comparison.hpp"
#include "multilink/em.hpp"
#include "multilink/types.hpp"

namespace multilink {

// Admissible error budget per matching class, keyed by canonical class index.
struct ErrorLevels {
    std::map<Index, Scalar> mu;

    // same budget for every class in the space
    static ErrorLevels uniform(const PatternSpace& space, Scalar level = 0.01);

    // ConfigError when the class has no budget or the budget is outside [0, 1]
    Scalar at(Index p) const;
};

// P(gamma | S_p^c): mixture of all other classes, renormalized. Requires s_p < 1.
Scalar log_complement_likelihood(const ModelParams& params, std::span<const Index> gamma, Index p);
Scalar complement_likelihood(const ModelParams& params, std::span<const Index> gamma, Index p);

// log P(gamma | S_p) - log P(gamma | S_p^c)
Scalar weight(const ModelParams& params, std::span<const Index> gamma, Index p);

// Decision for one table row (one distinct (gamma, blocking) configuration).
struct PatternDecision {
    Index row = -1;
    Index candidate = -1;  // argmax of the blocked posterior; ties go to the finest class
    Vec posterior;         // over all classes, zero outside the blocking support
    Scalar weight = 0;     // w_candidate for this row's gamma
    Scalar complement = 0; // P(gamma | S_candidate^c)
    bool declared = false;
};

// Applies the weight-ordered cutoff rule to every table row. Within each
// candidate class the cutoff accumulates P(gamma|S^c) over distinct gamma
// configurations (rows sharing gamma under different blocking patterns count
// once), takes the largest prefix whose cumulative sum stays within the
// class budget, and declares exactly that prefix. Returned in table row order.
std::vector<PatternDecision> classify_rows(const ModelParams& params, const PatternTable& table,
                                           const ErrorLevels& levels);

// Per-tuple view of one decision. Tuples resolved by blocking alone carry a
// point-mass posterior on the all-singletons class and an infinite weight
// (blocking rules out every alternative).
struct Assignment {
    std::vector<std::int32_t> records; // per-file record positions
    Index candidate = -1;
    Vec posterior;
    Scalar weight = 0;
    bool declared = false;
};

// Expands classify_rows over the individual tuples. The table must have been
// built with keep_tuples; rows come first in table order, fully blocked
// tuples follow. ConfigError when the table kept no tuples.
std::vector<Assignment> classify(const FitResult& fit, const PatternTable& table,
                                 const ErrorLevels& levels);

} // namespace multilink
