#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "multilink/comparison.hpp"
#include "multilink/partition.hpp"
#include "multilink/types.hpp"

namespace multilink {

/// Probabilities below this are floored before taking logs, so products over
/// many fields cannot underflow to -inf.
inline constexpr Scalar kLogFloor = 1e-300;

/// Mixture parameters Phi = (s, Pi): class prevalences s_p and, per field,
/// a column-stochastic matrix pi[f](p', p) = P(field pattern p' | class S_p).
/// Indices follow the canonical PatternSpace order.
struct ModelParams {
    Vec s;
    std::vector<Mat> pi;

    Index class_count() const { return s.size(); }
    Index field_count() const { return static_cast<Index>(pi.size()); }
};

/// Throws NumericError unless s and every pi column are simplexes within tol.
void validate_params(const ModelParams& params, Scalar tol = 1e-9);

/// Constrained random starting point:
///   (a) within each pi column p, entries are monotone along refinement
///       below p: pi[f](p''|p) <= pi[f](p'|p) whenever p'' <= p' <= p;
///   (b) s is monotone against refinement: s_{p'} >= s_p whenever p' <= p;
///   (c) s_p < prod_{q in p} min{m_k : k in q} / n for every p other than
///       the all-singletons class, which absorbs the remainder.
/// Deterministic in (space, fields, file_sizes, n, seed).
ModelParams initial_params(const PatternSpace& space, Index fields,
                           std::span<const std::int64_t> file_sizes, std::int64_t n,
                           std::uint64_t seed);

/// log P(gamma | S_p) for every class p: sum over fields of log pi entries,
/// floored at kLogFloor.
Vec log_class_conditional(const ModelParams& params, std::span<const Index> gamma);

/// exp of log_class_conditional.
Vec class_conditional(const ModelParams& params, std::span<const Index> gamma);

/// Per-row posteriors P(S_p | gamma, p_b): proportional to s_p P(gamma|S_p)
/// over p <= p_b, exactly zero outside that support. One row per table row.
/// With clamp_full_agreement, a row whose gamma equals the same non-trivial
/// admissible pattern p on every field is clamped to a point mass on S_p.
/// Throws NumericError if every admissible class of some row has zero mass.
Mat e_step(const ModelParams& params, const PatternTable& table, bool clamp_full_agreement = false);

struct MStepOutcome {
    ModelParams params;
    bool empty_class_reset = false; // some pi column had zero responsibility
};

/// Closed-form maximizers given responsibilities. Prevalences normalize by
/// the training total; with include_blocked_in_prevalence the fully blocked
/// tuples are added back as fixed members of the all-singletons class.
/// A pi column with zero total responsibility resets to uniform.
MStepOutcome m_step(const Mat& posteriors, const PatternTable& table,
                    bool include_blocked_in_prevalence = false);

/// Observed-data log-likelihood sum_rows n_gamma log sum_{p <= p_b} s_p
/// P(gamma|S_p). A row with zero marginal yields -infinity; if diag is
/// given it receives a description of the first such row.
Scalar observed_loglik(const ModelParams& params, const PatternTable& table,
                       std::string* diag = nullptr);

struct FitOptions {
    int restarts = 20;
    int max_iters = 1000;
    Scalar tol = 1e-6;        // L-inf over the concatenated parameter vector
    std::uint64_t seed = 0;
    bool clamp_full_agreement = false;
    bool include_blocked_in_prevalence = false;
};

struct FitResult {
    ModelParams params;
    Scalar loglik = 0;               // objective of the winning chain
    int restarts_run = 0;
    int iterations = 0;              // iterations of the winning chain
    bool converged = false;          // winning chain met tol before max_iters
    bool clamped = false;            // clamp option was on and hit some row
    bool empty_class_reset = false;  // any m_step of the winning chain reset a column
    int winning_chain = 0;
    std::uint64_t winning_seed = 0;  // sub-seed of the winning chain
    std::vector<Scalar> loglik_trace; // objective: initial params, then per iteration
};

/// Runs `restarts` EM chains from constrained random starts (sub-seed per
/// chain) and keeps the one with the highest objective; ties go to the lower
/// chain index. The objective is observed_loglik plus, when blocked tuples
/// count toward prevalence, their fixed-membership term
/// fully_blocked_count * log s_{all-singletons}.
FitResult fit(const PatternTable& table, const FitOptions& options = {});

} // namespace multilink
