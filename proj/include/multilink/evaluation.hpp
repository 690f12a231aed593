#pragma once

#include <vector>

#include "multilink/decision.hpp"
#include "multilink/synthetic.hpp"
#include "multilink/types.hpp"

namespace multilink {

// How Undeclared tuples enter the error rates: ignored (errors among decided
// tuples only) or charged as misclassifications.
enum class ScoreMode { declared_only, undeclared_as_error };

// Rows: true class. Columns: decided class in canonical order, then one
// trailing column for Undeclared.
struct ConfusionMatrix {
    CountMat counts;

    explicit ConfusionMatrix(Index class_count = 0)
        : counts(CountMat::Zero(class_count, class_count + 1)) {}

    Index class_count() const { return counts.rows(); }
    Index undeclared_column() const { return counts.cols() - 1; }
    std::int64_t total() const { return counts.sum(); }
};

// Tabulates per-tuple assignments against the generating truth.
ConfusionMatrix confusion(const GroundTruth& truth, const std::vector<Assignment>& assignments,
                          const PatternSpace& space);

// Same tabulation at pattern level, using the true-class tallies collected
// while the table was built. Fully blocked tuples count as declared
// all-singletons. Requires a table built with a scoring hook.
ConfusionMatrix confusion_from_rows(const std::vector<PatternDecision>& decisions,
                                    const PatternTable& table);

// overall misclassification error: wrong decisions / tuples in scope
Scalar ome(const ConfusionMatrix& matrix, ScoreMode mode = ScoreMode::declared_only);

// per-true-class error rates; NaN for classes with nothing in scope
Vec per_class_error(const ConfusionMatrix& matrix, ScoreMode mode = ScoreMode::declared_only);

// mean within-group error: average per-true-class error rate; classes with
// nothing in scope are left out of the mean
Scalar mwge(const ConfusionMatrix& matrix, ScoreMode mode = ScoreMode::declared_only);

} // namespace multilink
