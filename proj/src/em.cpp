#include "multilink/em.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <unordered_map>
#include <utility>

#include "multilink/rng.hpp"

namespace multilink {

namespace {

constexpr Scalar kNegInf = -std::numeric_limits<Scalar>::infinity();

Scalar log_floored(Scalar x) { return std::log(std::max(x, kLogFloor)); }

// Downsets of the blocking patterns actually present, computed lazily.
class DownsetCache {
public:
    explicit DownsetCache(const PatternSpace& space) : space_(space) {}
    const std::vector<Index>& of(Index blocking) {
        auto it = cache_.find(blocking);
        if (it == cache_.end())
            it = cache_.emplace(blocking, downset_indices(space_, space_.pattern(blocking))).first;
        return it->second;
    }

private:
    const PatternSpace& space_;
    std::unordered_map<Index, std::vector<Index>> cache_;
};

void check_table_dims(const ModelParams& params, const PatternTable& table, const char* who) {
    if (params.class_count() != table.space().size())
        throw DimensionError(std::string(who) + ": params cover " + std::to_string(params.class_count()) +
                             " classes, table has " + std::to_string(table.space().size()));
    if (params.field_count() != table.field_count())
        throw DimensionError(std::string(who) + ": params cover " + std::to_string(params.field_count()) +
                             " fields, table has " + std::to_string(table.field_count()));
}

std::string describe_row(const PatternRow& row, const PatternSpace& space) {
    std::string out = "gamma = (";
    for (std::size_t f = 0; f < row.gamma.size(); ++f) {
        if (f > 0) out += ", ";
        out += to_string(space.pattern(row.gamma[f]));
    }
    out += "), p_b = " + to_string(space.pattern(row.blocking));
    return out;
}

// The class a row is clamped to in semi-supervised mode, or -1: every field
// must show the same non-trivial pattern p with p admissible under p_b.
Index clamp_class(const PatternRow& row, const PatternSpace& space) {
    const Index p = row.gamma.empty() ? Index{-1} : row.gamma[0];
    if (p <= 0) return -1; // index 0 is the all-singletons pattern
    for (Index g : row.gamma)
        if (g != p) return -1;
    if (!is_refinement(space.pattern(p), space.pattern(row.blocking))) return -1;
    return p;
}

struct LogParams {
    Vec log_s;
    std::vector<Mat> log_pi;
};

LogParams to_log(const ModelParams& params) {
    LogParams lp;
    lp.log_s = params.s.unaryExpr([](Scalar v) { return v > 0 ? std::log(v) : kNegInf; });
    lp.log_pi.reserve(params.pi.size());
    for (const Mat& m : params.pi)
        lp.log_pi.push_back(m.unaryExpr([](Scalar v) { return log_floored(v); }));
    return lp;
}

Scalar row_log_joint(const LogParams& lp, const PatternRow& row, Index p) {
    Scalar acc = lp.log_s(p);
    for (std::size_t f = 0; f < row.gamma.size(); ++f) acc += lp.log_pi[f](row.gamma[f], p);
    return acc;
}

// Objective maximized by fit: observed log-likelihood, with clamped rows
// contributing their fixed-class complete term and blocked tuples (when
// included) contributing fixed membership in the all-singletons class.
Scalar fit_objective(const ModelParams& params, const PatternTable& table, bool clamp,
                     bool include_blocked) {
    const LogParams lp = to_log(params);
    DownsetCache downsets(table.space());
    Scalar total = 0;
    for (const PatternRow& row : table.rows()) {
        Scalar term;
        Index fixed = clamp ? clamp_class(row, table.space()) : Index{-1};
        if (fixed >= 0) {
            term = row_log_joint(lp, row, fixed);
        } else {
            Scalar best = kNegInf;
            const auto& ds = downsets.of(row.blocking);
            for (Index p : ds) best = std::max(best, row_log_joint(lp, row, p));
            if (best == kNegInf) return kNegInf;
            Scalar sum = 0;
            for (Index p : ds) sum += std::exp(row_log_joint(lp, row, p) - best);
            term = best + std::log(sum);
        }
        total += static_cast<Scalar>(row.count) * term;
    }
    if (include_blocked && table.fully_blocked_count() > 0)
        total += static_cast<Scalar>(table.fully_blocked_count()) *
                 (params.s(0) > 0 ? std::log(params.s(0)) : kNegInf);
    return total;
}

Scalar linf_distance(const ModelParams& a, const ModelParams& b) {
    Scalar d = (a.s - b.s).cwiseAbs().maxCoeff();
    for (std::size_t f = 0; f < a.pi.size(); ++f)
        d = std::max(d, (a.pi[f] - b.pi[f]).cwiseAbs().maxCoeff());
    return d;
}

} // namespace

void validate_params(const ModelParams& params, Scalar tol) {
    const Index bk = params.class_count();
    if (bk < 1) throw NumericError("validate_params: empty prevalence vector");
    if (params.s.minCoeff() < 0 || std::abs(params.s.sum() - 1.0) > tol)
        throw NumericError("validate_params: prevalences are not a simplex");
    for (std::size_t f = 0; f < params.pi.size(); ++f) {
        const Mat& m = params.pi[f];
        if (m.rows() != bk || m.cols() != bk)
            throw DimensionError("validate_params: pi matrix " + std::to_string(f) + " is " +
                                 std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                                 ", expected " + std::to_string(bk) + " square");
        if (m.minCoeff() < 0) throw NumericError("validate_params: negative pi entry");
        for (Index p = 0; p < bk; ++p)
            if (std::abs(m.col(p).sum() - 1.0) > tol)
                throw NumericError("validate_params: pi column " + std::to_string(p) +
                                   " of field " + std::to_string(f) + " does not sum to 1");
    }
}

ModelParams initial_params(const PatternSpace& space, Index fields,
                           std::span<const std::int64_t> file_sizes, std::int64_t n,
                           std::uint64_t seed) {
    const Index bk = space.size();
    const int k = space.k();
    if (fields < 1) throw ConfigError("initial_params: need at least one field");
    if (static_cast<int>(file_sizes.size()) != k)
        throw DimensionError("initial_params: " + std::to_string(file_sizes.size()) +
                             " file sizes for K = " + std::to_string(k));
    for (std::int64_t m : file_sizes)
        if (m < 1) throw InputError("initial_params: file sizes must be positive");
    if (n < 1) throw InputError("initial_params: n must be positive");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<Scalar> unif(0.0, 1.0);

    // Covering pairs inside each column's downset drive the repair sweeps.
    std::vector<std::pair<Index, Index>> covers;
    for (const auto& [fine, coarse] : hasse_edges(space))
        covers.emplace_back(space.index_of(fine), space.index_of(coarse));
    std::vector<std::vector<std::pair<Index, Index>>> column_covers(static_cast<std::size_t>(bk));
    std::vector<std::vector<Index>> downsets(static_cast<std::size_t>(bk));
    for (Index p = 0; p < bk; ++p) {
        downsets[static_cast<std::size_t>(p)] = downset_indices(space, space.pattern(p));
        for (const auto& [a, b] : covers)
            if (is_refinement(space.pattern(b), space.pattern(p)))
                column_covers[static_cast<std::size_t>(p)].emplace_back(a, b);
    }

    ModelParams params;
    params.pi.assign(static_cast<std::size_t>(fields), Mat(bk, bk));
    for (Index f = 0; f < fields; ++f) {
        for (Index p = 0; p < bk; ++p) {
            Vec col(bk);
            for (Index i = 0; i < bk; ++i) col(i) = -std::log(1.0 - unif(rng));
            col /= col.sum();
            // enforce monotonicity along refinement below p
            const auto& pairs = column_covers[static_cast<std::size_t>(p)];
            bool dirty = !pairs.empty();
            for (int sweep = 0; dirty && sweep < 1000; ++sweep) {
                dirty = false;
                for (const auto& [fine, coarse] : pairs) {
                    if (col(fine) > col(coarse)) {
                        const Scalar mid = 0.5 * (col(fine) + col(coarse));
                        col(fine) = col(coarse) = mid;
                        dirty = true;
                    }
                }
            }
            if (dirty) {
                // averaging stalled; level the whole downset instead
                const auto& ds = downsets[static_cast<std::size_t>(p)];
                Scalar mean = 0;
                for (Index q : ds) mean += col(q);
                mean /= static_cast<Scalar>(ds.size());
                for (Index q : ds) col(q) = mean;
            }
            params.pi[static_cast<std::size_t>(f)].col(p) = col;
        }
    }

    // Prevalence caps: s_p < prod over blocks of min file size, over n.
    Vec cap(bk);
    for (Index p = 0; p < bk; ++p) {
        const Partition& part = space.pattern(p);
        Scalar prod = 1;
        for (int b = 0; b < part.block_count(); ++b) {
            std::int64_t least = std::numeric_limits<std::int64_t>::max();
            for (int i = 0; i < k; ++i)
                if (part.block_of(i) == b) least = std::min(least, file_sizes[static_cast<std::size_t>(i)]);
            prod *= static_cast<Scalar>(least);
        }
        cap(p) = prod / static_cast<Scalar>(n);
    }

    // Coarsest first (highest canonical index); each class sits above every
    // coarser one it refines into and below its size cap.
    Vec s = Vec::Zero(bk);
    for (Index p = bk - 1; p >= 1; --p) {
        Scalar lower = 0;
        for (Index q = p + 1; q < bk; ++q)
            if (is_refinement(space.pattern(p), space.pattern(q))) lower = std::max(lower, s(q));
        if (!(cap(p) > lower))
            throw NumericError("initial_params: infeasible prevalence bounds for class " +
                               to_string(space.pattern(p)));
        s(p) = lower + (cap(p) - lower) * unif(rng);
    }
    const Scalar others = s.sum();
    const Scalar biggest = bk > 1 ? s.maxCoeff() : 0.0;
    if (others + biggest >= 1.0) s *= 0.999 / (others + biggest);
    s(0) = 1.0 - s.sum();
    params.s = s;
    return params;
}

Vec log_class_conditional(const ModelParams& params, std::span<const Index> gamma) {
    const Index bk = params.class_count();
    if (static_cast<Index>(gamma.size()) != params.field_count())
        throw DimensionError("log_class_conditional: gamma has " + std::to_string(gamma.size()) +
                             " fields, params have " + std::to_string(params.field_count()));
    Vec out = Vec::Zero(bk);
    for (std::size_t f = 0; f < gamma.size(); ++f) {
        if (gamma[f] < 0 || gamma[f] >= bk)
            throw DimensionError("log_class_conditional: pattern index out of range");
        for (Index p = 0; p < bk; ++p) out(p) += log_floored(params.pi[f](gamma[f], p));
    }
    return out;
}

Vec class_conditional(const ModelParams& params, std::span<const Index> gamma) {
    return log_class_conditional(params, gamma).array().exp().matrix();
}

Mat e_step(const ModelParams& params, const PatternTable& table, bool clamp_full_agreement) {
    check_table_dims(params, table, "e_step");
    const Index bk = table.space().size();
    const LogParams lp = to_log(params);
    DownsetCache downsets(table.space());
    Mat post = Mat::Zero(static_cast<Index>(table.rows().size()), bk);
    for (std::size_t r = 0; r < table.rows().size(); ++r) {
        const PatternRow& row = table.rows()[r];
        if (clamp_full_agreement) {
            const Index fixed = clamp_class(row, table.space());
            if (fixed >= 0) {
                post(static_cast<Index>(r), fixed) = 1.0;
                continue;
            }
        }
        const auto& ds = downsets.of(row.blocking);
        Scalar best = kNegInf;
        for (Index p : ds) best = std::max(best, row_log_joint(lp, row, p));
        if (best == kNegInf)
            throw NumericError("e_step: zero posterior mass for row with " +
                               describe_row(row, table.space()));
        Scalar sum = 0;
        for (Index p : ds) sum += std::exp(row_log_joint(lp, row, p) - best);
        for (Index p : ds)
            post(static_cast<Index>(r), p) = std::exp(row_log_joint(lp, row, p) - best) / sum;
    }
    return post;
}

MStepOutcome m_step(const Mat& posteriors, const PatternTable& table, bool include_blocked_in_prevalence) {
    const Index bk = table.space().size();
    const Index nrows = static_cast<Index>(table.rows().size());
    if (posteriors.rows() != nrows || posteriors.cols() != bk)
        throw DimensionError("m_step: posterior matrix is " + std::to_string(posteriors.rows()) + "x" +
                             std::to_string(posteriors.cols()) + ", table needs " + std::to_string(nrows) +
                             "x" + std::to_string(bk));
    const Index F = table.field_count();

    Vec class_mass = Vec::Zero(bk);
    std::vector<Mat> pi_acc(static_cast<std::size_t>(F), Mat::Zero(bk, bk));
    for (Index r = 0; r < nrows; ++r) {
        const PatternRow& row = table.rows()[static_cast<std::size_t>(r)];
        const Scalar n = static_cast<Scalar>(row.count);
        for (Index p = 0; p < bk; ++p) {
            const Scalar w = n * posteriors(r, p);
            if (w == 0) continue;
            class_mass(p) += w;
            for (Index f = 0; f < F; ++f) pi_acc[static_cast<std::size_t>(f)](row.gamma[static_cast<std::size_t>(f)], p) += w;
        }
    }

    MStepOutcome out;
    out.params.pi.assign(static_cast<std::size_t>(F), Mat(bk, bk));
    for (Index f = 0; f < F; ++f) {
        for (Index p = 0; p < bk; ++p) {
            if (class_mass(p) > 0) {
                Vec col = pi_acc[static_cast<std::size_t>(f)].col(p);
                out.params.pi[static_cast<std::size_t>(f)].col(p) = col / col.sum();
            } else {
                out.params.pi[static_cast<std::size_t>(f)].col(p).setConstant(1.0 / static_cast<Scalar>(bk));
                out.empty_class_reset = true;
            }
        }
    }

    Vec s = class_mass;
    if (include_blocked_in_prevalence) s(0) += static_cast<Scalar>(table.fully_blocked_count());
    const Scalar total = s.sum();
    if (total <= 0) throw NumericError("m_step: no responsibility mass in the table");
    out.params.s = s / total;
    return out;
}

Scalar observed_loglik(const ModelParams& params, const PatternTable& table, std::string* diag) {
    check_table_dims(params, table, "observed_loglik");
    const LogParams lp = to_log(params);
    DownsetCache downsets(table.space());
    Scalar total = 0;
    for (const PatternRow& row : table.rows()) {
        const auto& ds = downsets.of(row.blocking);
        Scalar best = kNegInf;
        for (Index p : ds) best = std::max(best, row_log_joint(lp, row, p));
        if (best == kNegInf) {
            if (diag) *diag = "zero marginal likelihood for row with " + describe_row(row, table.space());
            return kNegInf;
        }
        Scalar sum = 0;
        for (Index p : ds) sum += std::exp(row_log_joint(lp, row, p) - best);
        total += static_cast<Scalar>(row.count) * (best + std::log(sum));
    }
    return total;
}

FitResult fit(const PatternTable& table, const FitOptions& options) {
    if (options.restarts < 1)
        throw ConfigError("fit: restarts must be >= 1, got " + std::to_string(options.restarts));
    if (options.max_iters < 1)
        throw ConfigError("fit: max_iters must be >= 1, got " + std::to_string(options.max_iters));
    if (std::isnan(options.tol) || options.tol < 0) throw ConfigError("fit: tol must be >= 0");
    if (table.rows().empty())
        throw InputError("fit: table has no training rows; blocking resolved every tuple");

    const PatternSpace& space = table.space();
    const Index F = table.field_count();

    bool any_clamp_row = false;
    if (options.clamp_full_agreement)
        for (const PatternRow& row : table.rows())
            if (clamp_class(row, space) >= 0) {
                any_clamp_row = true;
                break;
            }

    FitResult best;
    bool have_best = false;
    for (int chain = 0; chain < options.restarts; ++chain) {
        const std::uint64_t chain_seed = derive_seed(options.seed, static_cast<std::uint64_t>(chain));
        ModelParams current = initial_params(space, F, table.file_sizes(), table.total_tuples(), chain_seed);
        std::vector<Scalar> trace;
        trace.push_back(fit_objective(current, table, options.clamp_full_agreement,
                                      options.include_blocked_in_prevalence));
        bool converged = false;
        bool reset = false;
        int done = 0;
        for (int iter = 1; iter <= options.max_iters; ++iter) {
            Mat post = e_step(current, table, options.clamp_full_agreement);
            MStepOutcome next = m_step(post, table, options.include_blocked_in_prevalence);
            reset = reset || next.empty_class_reset;
            const Scalar dist = linf_distance(current, next.params);
            current = std::move(next.params);
            trace.push_back(fit_objective(current, table, options.clamp_full_agreement,
                                          options.include_blocked_in_prevalence));
            done = iter;
            if (dist < options.tol) {
                converged = true;
                break;
            }
        }
        const Scalar ll = trace.back();
        if (!have_best || ll > best.loglik) {
            have_best = true;
            best.params = std::move(current);
            best.loglik = ll;
            best.iterations = done;
            best.converged = converged;
            best.empty_class_reset = reset;
            best.winning_chain = chain;
            best.winning_seed = chain_seed;
            best.loglik_trace = std::move(trace);
        }
    }
    best.restarts_run = options.restarts;
    best.clamped = options.clamp_full_agreement && any_clamp_row;
    return best;
}

} // namespace multilink
