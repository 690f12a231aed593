#include "multilink/decision.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

namespace multilink {

namespace {

constexpr Scalar kNegInf = -std::numeric_limits<Scalar>::infinity();

// logsumexp over log s_{p'} + log P(gamma|S_{p'}) for p' != p
Scalar log_other_mass(const ModelParams& params, const Vec& log_lik, Index p) {
    const Index bk = params.class_count();
    Scalar best = kNegInf;
    for (Index q = 0; q < bk; ++q) {
        if (q == p || params.s(q) <= 0) continue;
        best = std::max(best, std::log(params.s(q)) + log_lik(q));
    }
    if (best == kNegInf) return kNegInf;
    Scalar sum = 0;
    for (Index q = 0; q < bk; ++q) {
        if (q == p || params.s(q) <= 0) continue;
        sum += std::exp(std::log(params.s(q)) + log_lik(q) - best);
    }
    return best + std::log(sum);
}

} // namespace

ErrorLevels ErrorLevels::uniform(const PatternSpace& space, Scalar level) {
    ErrorLevels out;
    for (Index p = 0; p < space.size(); ++p) out.mu[p] = level;
    return out;
}

Scalar ErrorLevels::at(Index p) const {
    auto it = mu.find(p);
    if (it == mu.end())
        throw ConfigError("ErrorLevels: no admissible error level for class index " + std::to_string(p));
    if (!(it->second >= 0.0 && it->second <= 1.0))
        throw ConfigError("ErrorLevels: level for class index " + std::to_string(p) +
                          " is outside [0, 1]");
    return it->second;
}

Scalar log_complement_likelihood(const ModelParams& params, std::span<const Index> gamma, Index p) {
    if (p < 0 || p >= params.class_count())
        throw DimensionError("complement_likelihood: class index out of range");
    if (params.s(p) >= 1.0)
        throw NumericError("complement_likelihood: class " + std::to_string(p) +
                           " has prevalence 1; the complement is empty");
    const Vec log_lik = log_class_conditional(params, gamma);
    return log_other_mass(params, log_lik, p) - std::log1p(-params.s(p));
}

Scalar complement_likelihood(const ModelParams& params, std::span<const Index> gamma, Index p) {
    return std::exp(log_complement_likelihood(params, gamma, p));
}

Scalar weight(const ModelParams& params, std::span<const Index> gamma, Index p) {
    if (p < 0 || p >= params.class_count())
        throw DimensionError("weight: class index out of range");
    const Vec log_lik = log_class_conditional(params, gamma);
    const Scalar log_comp = log_complement_likelihood(params, gamma, p);
    if (log_lik(p) == kNegInf && log_comp == kNegInf)
        throw ScoringError("weight: pattern has zero likelihood under the class and its complement");
    return log_lik(p) - log_comp;
}

std::vector<PatternDecision> classify_rows(const ModelParams& params, const PatternTable& table,
                                           const ErrorLevels& levels) {
    const Index bk = table.space().size();
    for (Index p = 0; p < bk; ++p) levels.at(p);

    const Mat post = e_step(params, table);
    const auto& rows = table.rows();
    std::vector<PatternDecision> out(rows.size());

    // candidate class per row: argmax posterior, first maximum is the finest
    std::vector<std::vector<std::size_t>> groups(static_cast<std::size_t>(bk));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        Index best = 0;
        for (Index p = 1; p < bk; ++p)
            if (post(static_cast<Index>(r), p) > post(static_cast<Index>(r), best)) best = p;
        out[r].row = static_cast<Index>(r);
        out[r].candidate = best;
        out[r].posterior = post.row(static_cast<Index>(r)).transpose();
        groups[static_cast<std::size_t>(best)].push_back(r);
    }

    for (Index p = 0; p < bk; ++p) {
        const auto& members = groups[static_cast<std::size_t>(p)];
        if (members.empty()) continue;
        const Scalar budget = levels.at(p);

        // one entry per distinct gamma; members arrive in gamma-sorted order
        struct Entry {
            Scalar weight;
            Scalar complement;
            std::vector<std::size_t> rows;
        };
        std::vector<Entry> entries;
        for (std::size_t r : members) {
            const auto& gamma = rows[r].gamma;
            if (entries.empty() || rows[entries.back().rows.front()].gamma != gamma) {
                std::span<const Index> g(gamma.data(), gamma.size());
                entries.push_back({weight(params, g, p), complement_likelihood(params, g, p), {}});
            }
            entries.back().rows.push_back(r);
        }

        // stable: equal weights keep gamma-ascending order
        std::stable_sort(entries.begin(), entries.end(),
                         [](const Entry& a, const Entry& b) { return a.weight > b.weight; });

        Scalar cumulative = 0;
        bool open = true;
        for (const Entry& entry : entries) {
            open = open && cumulative + entry.complement <= budget;
            if (open) cumulative += entry.complement;
            for (std::size_t r : entry.rows) {
                out[r].weight = entry.weight;
                out[r].complement = entry.complement;
                out[r].declared = open;
            }
        }
    }
    return out;
}

std::vector<Assignment> classify(const FitResult& fit, const PatternTable& table,
                                 const ErrorLevels& levels) {
    const auto& rows = table.rows();
    for (const PatternRow& row : rows)
        if (row.count > 0 && row.tuples.empty())
            throw ConfigError("classify: table was built without keep_tuples; "
                              "per-tuple assignments are unavailable");

    const std::vector<PatternDecision> decisions = classify_rows(fit.params, table, levels);
    std::vector<Assignment> out;
    out.reserve(static_cast<std::size_t>(table.total_tuples()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (const auto& tuple : rows[r].tuples) {
            Assignment a;
            a.records = tuple;
            a.candidate = decisions[r].candidate;
            a.posterior = decisions[r].posterior;
            a.weight = decisions[r].weight;
            a.declared = decisions[r].declared;
            out.push_back(std::move(a));
        }
    }

    Vec resolved = Vec::Zero(table.space().size());
    resolved(table.space().singletons_index()) = 1.0;
    table.visit_fully_blocked([&](std::span<const std::int32_t> tuple) {
        Assignment a;
        a.records.assign(tuple.begin(), tuple.end());
        a.candidate = table.space().singletons_index();
        a.posterior = resolved;
        a.weight = std::numeric_limits<Scalar>::infinity();
        a.declared = true;
        out.push_back(std::move(a));
    });
    return out;
}

} // namespace multilink
