#include "multilink/evaluation.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace multilink {

ConfusionMatrix confusion(const GroundTruth& truth, const std::vector<Assignment>& assignments,
                          const PatternSpace& space) {
    if (static_cast<int>(truth.entity_ids.size()) != space.k())
        throw DimensionError("confusion: ground truth covers " + std::to_string(truth.entity_ids.size()) +
                             " files, space expects " + std::to_string(space.k()));
    ConfusionMatrix out(space.size());
    for (const Assignment& a : assignments) {
        if (static_cast<int>(a.records.size()) != space.k())
            throw ScoringError("confusion: assignment tuple has " + std::to_string(a.records.size()) +
                               " entries for K = " + std::to_string(space.k()));
        for (std::size_t f = 0; f < a.records.size(); ++f)
            if (a.records[f] < 0 ||
                static_cast<std::size_t>(a.records[f]) >= truth.entity_ids[f].size())
                throw ScoringError("confusion: record position " + std::to_string(a.records[f]) +
                                   " is unknown in file " + std::to_string(f + 1));
        const Index true_class =
            space.index_of(truth.true_class(std::span<const std::int32_t>(a.records.data(),
                                                                          a.records.size())));
        const Index decided = a.declared ? a.candidate : out.undeclared_column();
        out.counts(true_class, decided) += 1;
    }
    return out;
}

ConfusionMatrix confusion_from_rows(const std::vector<PatternDecision>& decisions,
                                    const PatternTable& table) {
    if (!table.has_class_counts())
        throw ScoringError("confusion_from_rows: table carries no true-class tallies");
    if (decisions.size() != table.rows().size())
        throw DimensionError("confusion_from_rows: " + std::to_string(decisions.size()) +
                             " decisions for " + std::to_string(table.rows().size()) + " rows");
    const Index bk = table.space().size();
    ConfusionMatrix out(bk);
    for (const PatternDecision& d : decisions) {
        const Index decided = d.declared ? d.candidate : out.undeclared_column();
        for (Index p = 0; p < bk; ++p) out.counts(p, decided) += table.row_class_counts()(d.row, p);
    }
    const Index resolved = table.space().singletons_index();
    for (Index p = 0; p < bk; ++p) out.counts(p, resolved) += table.blocked_class_counts()(p);
    return out;
}

Scalar ome(const ConfusionMatrix& matrix, ScoreMode mode) {
    const Index bk = matrix.class_count();
    const Index undeclared = matrix.undeclared_column();
    std::int64_t scope = 0;
    std::int64_t wrong = 0;
    for (Index p = 0; p < bk; ++p) {
        for (Index d = 0; d < matrix.counts.cols(); ++d) {
            const std::int64_t n = matrix.counts(p, d);
            if (d == undeclared) {
                if (mode == ScoreMode::undeclared_as_error) {
                    scope += n;
                    wrong += n;
                }
            } else {
                scope += n;
                if (d != p) wrong += n;
            }
        }
    }
    if (scope == 0) throw ScoringError("ome: no tuples in scope");
    return static_cast<Scalar>(wrong) / static_cast<Scalar>(scope);
}

Vec per_class_error(const ConfusionMatrix& matrix, ScoreMode mode) {
    const Index bk = matrix.class_count();
    const Index undeclared = matrix.undeclared_column();
    Vec rates = Vec::Constant(bk, std::numeric_limits<Scalar>::quiet_NaN());
    for (Index p = 0; p < bk; ++p) {
        std::int64_t scope = matrix.counts.row(p).sum();
        std::int64_t wrong = scope - matrix.counts(p, p) - matrix.counts(p, undeclared);
        if (mode == ScoreMode::declared_only) {
            scope -= matrix.counts(p, undeclared);
        } else {
            wrong += matrix.counts(p, undeclared);
        }
        if (scope == 0) continue;
        rates(p) = static_cast<Scalar>(wrong) / static_cast<Scalar>(scope);
    }
    return rates;
}

Scalar mwge(const ConfusionMatrix& matrix, ScoreMode mode) {
    const Vec rates = per_class_error(matrix, mode);
    Scalar sum = 0;
    Index groups = 0;
    for (Index p = 0; p < rates.size(); ++p) {
        if (std::isnan(rates(p))) continue;
        sum += rates(p);
        ++groups;
    }
    if (groups == 0) throw ScoringError("mwge: every class is empty in scope");
    return sum / static_cast<Scalar>(groups);
}

} // namespace multilink
