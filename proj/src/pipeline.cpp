#include "multilink/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "multilink/error.hpp"
#include "multilink/io.hpp"
#include "multilink/partition.hpp"
#include "multilink/rng.hpp"
#include "multilink/synthetic.hpp"

namespace multilink {

namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

constexpr Scalar kNaN = std::numeric_limits<Scalar>::quiet_NaN();

// Prefixes the failing stage's name while keeping the error type, so exit
// codes can still dispatch on it.
[[noreturn]] void rethrow_with_stage(const char* name) {
    const std::string prefix = std::string(name) + ": ";
    try {
        throw;
    } catch (const SizeLimitError& e) {
        throw SizeLimitError(prefix + e.what());
    } catch (const DimensionError& e) {
        throw DimensionError(prefix + e.what());
    } catch (const ConfigError& e) {
        throw ConfigError(prefix + e.what());
    } catch (const InputError& e) {
        throw InputError(prefix + e.what());
    } catch (const NumericError& e) {
        throw NumericError(prefix + e.what());
    } catch (const ScoringError& e) {
        throw ScoringError(prefix + e.what());
    } catch (const std::exception& e) {
        throw Error(prefix + e.what());
    }
}

template <typename Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (...) {
        rethrow_with_stage(name);
    }
}

std::vector<std::string> class_names_for(const PatternSpace& space) {
    std::vector<std::string> names;
    names.reserve(static_cast<std::size_t>(space.size()));
    for (Index p = 0; p < space.size(); ++p) names.push_back(to_string(space.pattern(p)));
    return names;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << text;
    if (!out) throw InputError("failed writing " + path.string());
}

CsvTable assignments_table(const std::vector<Assignment>& assignments,
                           const std::vector<DataFile>& files, const PatternSpace& space,
                           const std::vector<std::string>& class_names) {
    const int k = space.k();
    const Index bk = space.size();
    CsvTable csv;
    for (int f = 0; f < k; ++f) csv.header.push_back("id_" + std::to_string(f + 1));
    csv.header.push_back("candidate");
    csv.header.push_back("candidate_posterior");
    for (Index p = 0; p < bk; ++p) csv.header.push_back("post_" + class_names[p]);
    csv.header.push_back("weight");
    csv.header.push_back("decision");
    csv.rows.reserve(assignments.size());
    for (const Assignment& a : assignments) {
        std::vector<std::string> row;
        row.reserve(csv.header.size());
        for (int f = 0; f < k; ++f)
            row.push_back(files[static_cast<std::size_t>(f)]
                              .records[static_cast<std::size_t>(a.records[f])]
                              .record_id);
        const bool scored = a.posterior.size() == bk && a.candidate >= 0;
        row.push_back(a.candidate >= 0 ? class_names[a.candidate] : std::string());
        row.push_back(scored ? format_scalar(a.posterior(a.candidate)) : std::string());
        for (Index p = 0; p < bk; ++p)
            row.push_back(scored ? format_scalar(a.posterior(p)) : std::string());
        row.push_back(scored ? format_scalar(a.weight) : std::string());
        row.push_back(a.declared ? "declared" : "undeclared");
        csv.rows.push_back(std::move(row));
    }
    return csv;
}

std::string report_to_json(const RunReport& report, const LinkageConfig& config) {
    ordered_json doc;
    ordered_json file_list = ordered_json::array();
    for (const auto& path : config.files) file_list.push_back(path.string());
    doc["files"] = std::move(file_list);
    doc["k"] = report.k;
    doc["file_sizes"] = report.file_sizes;
    doc["tuples"] = report.n;
    doc["fully_blocked"] = report.fully_blocked;
    doc["training_tuples"] = report.training_tuples;
    doc["distinct_rows"] = report.distinct_rows;
    ordered_json em;
    em["run"] = report.em_run;
    if (report.em_run) {
        em["loglik"] = report.fit.loglik;
        em["converged"] = report.fit.converged;
        em["iterations"] = report.fit.iterations;
        em["restarts"] = report.fit.restarts_run;
        em["winning_chain"] = report.fit.winning_chain;
        em["clamped"] = report.fit.clamped;
        em["empty_class_reset"] = report.fit.empty_class_reset;
    } else {
        em["reason"] = report.em_skip_reason;
    }
    doc["em"] = std::move(em);
    ordered_json declared;
    for (std::size_t p = 0; p < report.class_names.size(); ++p)
        declared[report.class_names[p]] = report.declared_by_class[p];
    doc["declared"] = std::move(declared);
    doc["declared_total"] = report.declared_total;
    doc["undeclared"] = report.undeclared;
    doc["blocked_resolved"] = report.fully_blocked;
    ordered_json levels;
    for (const auto& [name, mu] : report.mu_used) levels[name] = mu;
    doc["error_levels"] = std::move(levels);
    return doc.dump(2) + "\n";
}

// Blocking resolved everything, or there is no comparison data to model:
// surviving rows stay undeclared, fully blocked tuples are still resolved.
std::vector<Assignment> resolve_without_model(const PatternTable& table) {
    const Index bk = table.space().size();
    std::vector<Assignment> out;
    out.reserve(static_cast<std::size_t>(table.total_tuples()));
    for (const PatternRow& row : table.rows())
        for (const auto& tuple : row.tuples) {
            Assignment a;
            a.records = tuple;
            a.weight = kNaN;
            out.push_back(std::move(a));
        }
    Vec point = Vec::Zero(bk);
    point(table.space().singletons_index()) = 1.0;
    table.visit_fully_blocked([&](std::span<const std::int32_t> tuple) {
        Assignment a;
        a.records.assign(tuple.begin(), tuple.end());
        a.candidate = table.space().singletons_index();
        a.posterior = point;
        a.weight = std::numeric_limits<Scalar>::infinity();
        a.declared = true;
        out.push_back(std::move(a));
    });
    return out;
}

} // namespace

std::string params_to_json(const ModelParams& params, const PatternSpace& space,
                           const std::vector<std::string>& field_names) {
    if (params.class_count() != space.size())
        throw DimensionError("params cover " + std::to_string(params.class_count()) +
                             " classes, space has " + std::to_string(space.size()));
    if (params.field_count() != static_cast<Index>(field_names.size()))
        throw DimensionError("params cover " + std::to_string(params.field_count()) +
                             " fields, " + std::to_string(field_names.size()) + " names given");
    const Index bk = space.size();
    ordered_json doc;
    doc["k"] = space.k();
    doc["classes"] = class_names_for(space);
    doc["fields"] = field_names;
    ordered_json s = ordered_json::array();
    for (Index p = 0; p < bk; ++p) s.push_back(params.s(p));
    doc["s"] = std::move(s);
    ordered_json pi = ordered_json::array();
    for (const Mat& field : params.pi) {
        ordered_json rows = ordered_json::array();
        for (Index a = 0; a < bk; ++a) {
            ordered_json row = ordered_json::array();
            for (Index p = 0; p < bk; ++p) row.push_back(field(a, p));
            rows.push_back(std::move(row));
        }
        pi.push_back(std::move(rows));
    }
    doc["pi"] = std::move(pi);
    return doc.dump(2) + "\n";
}

ModelParams params_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InputError(std::string("params document: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("k") || !doc.contains("s") || !doc.contains("pi"))
        throw InputError("params document needs keys k, s, pi");
    if (!doc["k"].is_number_integer()) throw InputError("params k must be an integer");
    const PatternSpace space(doc["k"].get<int>());
    const Index bk = space.size();
    const json& s = doc["s"];
    if (!s.is_array() || static_cast<Index>(s.size()) != bk)
        throw InputError("params s must list " + std::to_string(bk) + " prevalences");
    ModelParams params;
    params.s = Vec(bk);
    for (Index p = 0; p < bk; ++p) {
        if (!s[static_cast<std::size_t>(p)].is_number()) throw InputError("params s entries must be numbers");
        params.s(p) = s[static_cast<std::size_t>(p)].get<Scalar>();
    }
    const json& pi = doc["pi"];
    if (!pi.is_array()) throw InputError("params pi must be an array of matrices");
    for (const json& field : pi) {
        if (!field.is_array() || static_cast<Index>(field.size()) != bk)
            throw InputError("each pi matrix must have " + std::to_string(bk) + " rows");
        Mat m(bk, bk);
        for (Index a = 0; a < bk; ++a) {
            const json& row = field[static_cast<std::size_t>(a)];
            if (!row.is_array() || static_cast<Index>(row.size()) != bk)
                throw InputError("each pi row must have " + std::to_string(bk) + " entries");
            for (Index p = 0; p < bk; ++p) {
                if (!row[static_cast<std::size_t>(p)].is_number())
                    throw InputError("pi entries must be numbers");
                m(a, p) = row[static_cast<std::size_t>(p)].get<Scalar>();
            }
        }
        params.pi.push_back(std::move(m));
    }
    return params;
}

RunReport run_link(const LinkageConfig& config, const std::filesystem::path& out_dir,
                   std::ostream* log) {
    stage("config", [&] { validate_linkage_config(config); });

    const std::vector<DataFile> files = stage("input", [&] {
        std::vector<DataFile> out;
        out.reserve(config.files.size());
        for (std::size_t i = 0; i < config.files.size(); ++i)
            out.push_back(read_datafile(config.files[i], config.fields, static_cast<int>(i) + 1));
        return out;
    });
    if (log) {
        *log << "input: " << files.size() << " files, sizes";
        for (const DataFile& f : files) *log << ' ' << f.size();
        *log << '\n';
    }

    const PatternTable table = stage("comparison", [&] {
        TableOptions options;
        options.max_tuples = config.max_tuples;
        options.keep_tuples = true;
        return build_pattern_table(files, config.fields, options);
    });
    const PatternSpace& space = table.space();

    RunReport report;
    report.k = table.k();
    report.class_names = class_names_for(space);
    report.file_sizes = table.file_sizes();
    report.n = table.total_tuples();
    report.fully_blocked = table.fully_blocked_count();
    report.training_tuples = table.training_tuples();
    report.distinct_rows = static_cast<std::int64_t>(table.rows().size());
    if (log)
        *log << "comparison: " << report.n << " tuples, " << report.fully_blocked
             << " resolved by blocking, " << report.distinct_rows << " distinct rows\n";

    const ErrorLevels levels = stage("config", [&] {
        return resolve_error_levels(config.error_level, config.error_levels, space);
    });
    for (Index p = 0; p < space.size(); ++p)
        report.mu_used[report.class_names[static_cast<std::size_t>(p)]] = levels.at(p);

    std::vector<Assignment> assignments;
    if (table.training_tuples() == 0) {
        report.em_skip_reason = "no tuples survive blocking";
    } else if (effective_compared_fields(config.fields).empty()) {
        report.em_skip_reason = "no compared fields";
    } else {
        report.em_run = true;
    }
    if (report.em_run) {
        report.fit = stage("model", [&] {
            FitResult result = fit(table, config.em);
            if (!std::isfinite(result.loglik))
                throw NumericError("no usable fit: winning log-likelihood is " +
                                   format_scalar(result.loglik));
            return result;
        });
        if (log)
            *log << "model: loglik " << format_scalar(report.fit.loglik) << ", "
                 << (report.fit.converged ? "converged" : "not converged") << " after "
                 << report.fit.iterations << " iterations\n";
        assignments = stage("decision", [&] { return classify(report.fit, table, levels); });
    } else {
        if (log) *log << "model: skipped (" << report.em_skip_reason << ")\n";
        assignments = stage("decision", [&] { return resolve_without_model(table); });
    }

    report.declared_by_class.assign(static_cast<std::size_t>(space.size()), 0);
    const std::int64_t row_level = report.n - report.fully_blocked;
    for (std::int64_t i = 0; i < row_level; ++i) {
        const Assignment& a = assignments[static_cast<std::size_t>(i)];
        if (a.declared) {
            ++report.declared_by_class[static_cast<std::size_t>(a.candidate)];
            ++report.declared_total;
        } else {
            ++report.undeclared;
        }
    }
    if (report.declared_total + report.undeclared + report.fully_blocked != report.n)
        throw NumericError("decision: conservation violated: declared " +
                           std::to_string(report.declared_total) + " + undeclared " +
                           std::to_string(report.undeclared) + " + blocked " +
                           std::to_string(report.fully_blocked) + " != " + std::to_string(report.n));
    if (log)
        *log << "decision: " << report.declared_total << " declared, " << report.undeclared
             << " undeclared, " << report.fully_blocked << " resolved by blocking\n";

    stage("output", [&] {
        std::filesystem::create_directories(out_dir);
        write_csv(out_dir / "assignments.csv",
                  assignments_table(assignments, files, space, report.class_names));
        if (report.em_run) {
            std::vector<std::string> field_names;
            for (const EffectiveField& f : effective_compared_fields(config.fields))
                field_names.push_back(f.name);
            write_text(out_dir / "params.json",
                       params_to_json(report.fit.params, space, field_names));
        }
        write_text(out_dir / "report.json", report_to_json(report, config));
    });
    if (log) *log << "output: " << out_dir.string() << '\n';
    return report;
}

namespace {

std::vector<ScenarioDef> build_scenarios(const SweepConfig& config) {
    std::vector<std::int64_t> block_grid = config.block_categories;
    if (block_grid.empty()) block_grid.push_back(0);
    std::vector<int> lq_modes;
    if (config.low_quality_field.empty())
        lq_modes.push_back(0);
    else {
        lq_modes.push_back(1);
        lq_modes.push_back(-1);
    }
    std::vector<ScenarioDef> scenarios;
    for (std::size_t bv = 0; bv < block_grid.size(); ++bv)
        for (std::size_t bi = 0; bi < config.beta_grid.size(); ++bi)
            for (bool blocking : config.blocking_modes)
                for (int lq : lq_modes) {
                    ScenarioDef def;
                    def.beta = config.beta_grid[bi];
                    def.blocking = blocking;
                    def.block_count = block_grid[bv];
                    def.low_quality = lq;
                    def.population_variant = static_cast<int>(bv);
                    def.beta_index = static_cast<int>(bi);
                    std::string id = "beta" + format_scalar(def.beta);
                    id += blocking ? "_block" : "_noblock";
                    if (def.block_count > 0) id += "_c" + std::to_string(def.block_count);
                    if (lq == 1) id += "_lqin";
                    if (lq == -1) id += "_lqout";
                    def.id = std::move(id);
                    scenarios.push_back(std::move(def));
                }
    return scenarios;
}

// Seed streams: population varies only with the block-count variant,
// corruption with (variant, beta, replication), EM with (scenario,
// replication). Scenarios differing only in blocking mode or field subset
// therefore link the same corrupted files.
std::uint64_t population_seed(const SweepConfig& config, const ScenarioDef& def) {
    return derive_seed(derive_seed(config.seed, 1), static_cast<std::uint64_t>(def.population_variant));
}

std::uint64_t corruption_seed(const SweepConfig& config, const ScenarioDef& def, int rep) {
    std::uint64_t s = derive_seed(config.seed, 2);
    s = derive_seed(s, static_cast<std::uint64_t>(def.population_variant));
    s = derive_seed(s, static_cast<std::uint64_t>(def.beta_index));
    return derive_seed(s, static_cast<std::uint64_t>(rep));
}

std::uint64_t em_seed(const SweepConfig& config, int scenario, int rep) {
    std::uint64_t s = derive_seed(config.seed, 3);
    s = derive_seed(s, static_cast<std::uint64_t>(scenario));
    return derive_seed(s, static_cast<std::uint64_t>(rep));
}

// Comparators for one scenario plus the matching per-field keep mask; fields
// a scenario leaves out (blocking off, low-quality field excluded) must also
// be projected out of the record values.
std::pair<std::vector<FieldComparator>, std::vector<bool>> scenario_comparators(
    const SweepConfig& config, const PopulationSpec& spec, const ScenarioDef& def) {
    std::vector<FieldComparator> comparators = comparators_for(spec);
    for (const FieldComparator& override_field : config.comparator_overrides)
        for (FieldComparator& field : comparators)
            if (field.name == override_field.name) {
                field.kind = override_field.kind;
                field.width = override_field.width;
                field.offsets = override_field.offsets;
            }
    std::vector<bool> keep(comparators.size(), true);
    for (std::size_t f = 0; f < comparators.size(); ++f) {
        if (!def.blocking && comparators[f].role == FieldRole::blocking) keep[f] = false;
        if (def.low_quality == -1 && comparators[f].name == config.low_quality_field)
            keep[f] = false;
    }
    std::size_t slot = 0;
    for (std::size_t f = 0; f < comparators.size(); ++f)
        if (keep[f]) {
            if (slot != f) comparators[slot] = std::move(comparators[f]);
            ++slot;
        }
    comparators.resize(slot);
    return {std::move(comparators), std::move(keep)};
}

std::vector<DataFile> project_fields(std::vector<DataFile> files, const std::vector<bool>& keep) {
    if (std::find(keep.begin(), keep.end(), false) == keep.end()) return files;
    for (DataFile& file : files)
        for (Record& record : file.records) {
            std::size_t slot = 0;
            for (std::size_t f = 0; f < record.values.size(); ++f)
                if (f < keep.size() && keep[f]) {
                    if (slot != f) record.values[slot] = std::move(record.values[f]);
                    ++slot;
                }
            record.values.resize(slot);
        }
    return files;
}

ReplicationOutcome simulate_one(const SweepConfig& config, const ScenarioDef& def, int scenario,
                                int rep) {
    ReplicationOutcome out;
    out.scenario = scenario;
    out.replication = rep;
    out.ome_value = kNaN;
    out.mwge_value = kNaN;
    out.loglik = kNaN;
    try {
        PopulationSpec spec = config.population;
        if (def.block_count > 0)
            for (PopulationFieldSpec& field : spec.fields)
                if (field.blocking) field.categories = def.block_count;
        const Population population = generate_population(spec, population_seed(config, def));

        std::map<std::string, Scalar> beta;
        for (const PopulationFieldSpec& field : spec.fields)
            if (!field.blocking) beta[field.name] = def.beta;
        for (const auto& [name, value] : config.beta_overrides) beta[name] = value;
        std::vector<DataFile> corrupted =
            corrupt_files(population.files, spec, beta, corruption_seed(config, def, rep));

        auto [comparators, keep] = scenario_comparators(config, spec, def);
        corrupted = project_fields(std::move(corrupted), keep);
        const PatternSpace space(spec.k);
        TableOptions options;
        options.max_tuples = config.max_tuples;
        const PatternTable table = build_pattern_table(
            corrupted, comparators, options, make_true_class_fn(population.truth, space));

        std::vector<PatternDecision> decisions;
        if (table.training_tuples() > 0) {
            FitOptions em = config.em;
            em.seed = em_seed(config, scenario, rep);
            const FitResult result = fit(table, em);
            if (!std::isfinite(result.loglik))
                throw NumericError("no usable fit: winning log-likelihood is " +
                                   format_scalar(result.loglik));
            out.converged = result.converged;
            out.loglik = result.loglik;
            decisions = classify_rows(result.params, table,
                                      ErrorLevels::uniform(table.space(), config.error_level));
        }
        const ConfusionMatrix matrix = confusion_from_rows(decisions, table);
        out.ome_value = ome(matrix, config.score_mode);
        out.mwge_value = mwge(matrix, config.score_mode);
        out.per_class = per_class_error(matrix, config.score_mode);
        for (const PatternDecision& d : decisions) {
            const std::int64_t count = table.rows()[static_cast<std::size_t>(d.row)].count;
            if (d.declared)
                out.declared += count;
            else
                out.undeclared += count;
        }
        out.blocked = table.fully_blocked_count();
        out.ok = true;
    } catch (const std::exception& e) {
        out.error = e.what();
    }
    return out;
}

} // namespace

SimulationResult run_simulation(const SweepConfig& config, int threads, std::ostream* log) {
    stage("config", [&] { validate_sweep_config(config); });
    SimulationResult result;
    result.k = config.population.k;
    result.class_names = class_names_for(PatternSpace(config.population.k));
    result.scenarios = build_scenarios(config);
    const int R = config.replications;
    const std::size_t tasks = result.scenarios.size() * static_cast<std::size_t>(R);
    result.replications.resize(tasks);

    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    auto worker = [&] {
        while (true) {
            const std::size_t t = next.fetch_add(1);
            if (t >= tasks) break;
            const int scenario = static_cast<int>(t / static_cast<std::size_t>(R));
            const int rep = static_cast<int>(t % static_cast<std::size_t>(R));
            result.replications[t] =
                simulate_one(config, result.scenarios[static_cast<std::size_t>(scenario)], scenario, rep);
            if (log) {
                std::lock_guard<std::mutex> lock(log_mutex);
                const ReplicationOutcome& r = result.replications[t];
                *log << result.scenarios[static_cast<std::size_t>(scenario)].id << " rep " << rep
                     << (r.ok ? ": mwge " + format_scalar(r.mwge_value) : ": failed: " + r.error)
                     << '\n';
            }
        }
    };

    const int workers = std::max(1, std::min<int>(threads, static_cast<int>(tasks)));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
        for (std::thread& thread : pool) thread.join();
    }
    return result;
}

std::vector<ScenarioSummary> summarize(const SimulationResult& result) {
    const std::size_t R = result.scenarios.empty()
                              ? 0
                              : result.replications.size() / result.scenarios.size();
    const Index bk = static_cast<Index>(result.class_names.size());
    std::vector<ScenarioSummary> out;
    for (std::size_t s = 0; s < result.scenarios.size(); ++s) {
        ScenarioSummary summary;
        summary.scenario = static_cast<int>(s);
        std::vector<Scalar> omes, mwges;
        Vec class_sums = Vec::Zero(bk);
        std::vector<std::int64_t> class_counts(static_cast<std::size_t>(bk), 0);
        for (std::size_t r = 0; r < R; ++r) {
            const ReplicationOutcome& rep = result.replications[s * R + r];
            if (!rep.ok) {
                ++summary.failures;
                continue;
            }
            ++summary.completed;
            omes.push_back(rep.ome_value);
            mwges.push_back(rep.mwge_value);
            for (Index p = 0; p < bk && p < rep.per_class.size(); ++p)
                if (!std::isnan(rep.per_class(p))) {
                    class_sums(p) += rep.per_class(p);
                    ++class_counts[static_cast<std::size_t>(p)];
                }
        }
        auto mean_se = [](const std::vector<Scalar>& values, Scalar& mean, Scalar& se) {
            if (values.empty()) {
                mean = kNaN;
                se = kNaN;
                return;
            }
            Scalar sum = 0;
            for (Scalar v : values) sum += v;
            mean = sum / static_cast<Scalar>(values.size());
            if (values.size() < 2) {
                se = 0;
                return;
            }
            Scalar ss = 0;
            for (Scalar v : values) ss += (v - mean) * (v - mean);
            se = std::sqrt(ss / static_cast<Scalar>(values.size() - 1)) /
                 std::sqrt(static_cast<Scalar>(values.size()));
        };
        mean_se(omes, summary.mean_ome, summary.se_ome);
        mean_se(mwges, summary.mean_mwge, summary.se_mwge);
        summary.mean_per_class = Vec::Constant(bk, kNaN);
        for (Index p = 0; p < bk; ++p)
            if (class_counts[static_cast<std::size_t>(p)] > 0)
                summary.mean_per_class(p) =
                    class_sums(p) / static_cast<Scalar>(class_counts[static_cast<std::size_t>(p)]);
        out.push_back(std::move(summary));
    }
    return out;
}

namespace {

std::string scenario_cell(Scalar value) { return std::isnan(value) ? std::string() : format_scalar(value); }

void scenario_axis_cells(const ScenarioDef& def, std::vector<std::string>& row) {
    row.push_back(format_scalar(def.beta));
    row.push_back(def.blocking ? "yes" : "no");
    row.push_back(def.block_count > 0 ? std::to_string(def.block_count) : std::string());
    row.push_back(def.low_quality == 0 ? std::string()
                                       : (def.low_quality == 1 ? "included" : "excluded"));
}

} // namespace

void write_simulation_artifacts(const SimulationResult& result,
                                const std::filesystem::path& out_dir) {
    stage("output", [&] {
        std::filesystem::create_directories(out_dir);
        const std::size_t R = result.scenarios.empty()
                                  ? 0
                                  : result.replications.size() / result.scenarios.size();

        CsvTable reps;
        reps.header = {"scenario", "beta", "blocking", "block_categories", "low_quality",
                       "replication", "status", "error", "ome", "mwge"};
        for (const std::string& name : result.class_names) reps.header.push_back("err_" + name);
        for (const char* name : {"declared", "undeclared", "blocked", "converged", "loglik"})
            reps.header.push_back(name);
        for (std::size_t s = 0; s < result.scenarios.size(); ++s) {
            const ScenarioDef& def = result.scenarios[s];
            for (std::size_t r = 0; r < R; ++r) {
                const ReplicationOutcome& rep = result.replications[s * R + r];
                std::vector<std::string> row;
                row.push_back(def.id);
                scenario_axis_cells(def, row);
                row.push_back(std::to_string(rep.replication));
                row.push_back(rep.ok ? "ok" : "failed");
                row.push_back(rep.error);
                row.push_back(rep.ok ? scenario_cell(rep.ome_value) : std::string());
                row.push_back(rep.ok ? scenario_cell(rep.mwge_value) : std::string());
                for (std::size_t p = 0; p < result.class_names.size(); ++p)
                    row.push_back(rep.ok && static_cast<Index>(p) < rep.per_class.size()
                                      ? scenario_cell(rep.per_class(static_cast<Index>(p)))
                                      : std::string());
                row.push_back(std::to_string(rep.declared));
                row.push_back(std::to_string(rep.undeclared));
                row.push_back(std::to_string(rep.blocked));
                row.push_back(rep.ok ? (rep.converged ? "yes" : "no") : std::string());
                row.push_back(rep.ok ? scenario_cell(rep.loglik) : std::string());
                reps.rows.push_back(std::move(row));
            }
        }
        write_csv(out_dir / "replications.csv", reps);

        CsvTable means;
        means.header = {"scenario", "beta",     "blocking", "block_categories", "low_quality",
                        "replications", "completed", "failures", "mean_ome",  "se_ome",
                        "mean_mwge",    "se_mwge"};
        for (const std::string& name : result.class_names) means.header.push_back("mean_err_" + name);
        const std::vector<ScenarioSummary> summaries = summarize(result);
        for (std::size_t s = 0; s < summaries.size(); ++s) {
            const ScenarioDef& def = result.scenarios[s];
            const ScenarioSummary& summary = summaries[s];
            std::vector<std::string> row;
            row.push_back(def.id);
            scenario_axis_cells(def, row);
            row.push_back(std::to_string(R));
            row.push_back(std::to_string(summary.completed));
            row.push_back(std::to_string(summary.failures));
            row.push_back(scenario_cell(summary.mean_ome));
            row.push_back(scenario_cell(summary.se_ome));
            row.push_back(scenario_cell(summary.mean_mwge));
            row.push_back(scenario_cell(summary.se_mwge));
            for (Index p = 0; p < summary.mean_per_class.size(); ++p)
                row.push_back(scenario_cell(summary.mean_per_class(p)));
            means.rows.push_back(std::move(row));
        }
        write_csv(out_dir / "scenarios.csv", means);
    });
}

EvaluationReport run_evaluate(const std::filesystem::path& assignments_path,
                              const std::filesystem::path& truth_path, ScoreMode mode) {
    const CsvTable csv = stage("input", [&] { return read_csv(assignments_path); });
    const TruthKeys truth = stage("input", [&] { return read_truth(truth_path); });

    return stage("scoring", [&]() -> EvaluationReport {
        int k = 0;
        while (csv.column("id_" + std::to_string(k + 1)) >= 0) ++k;
        if (k < 2 || k > kMaxFiles)
            throw InputError("assignments file needs id_1..id_K columns for 2 <= K <= " +
                             std::to_string(kMaxFiles));
        std::vector<Index> id_cols;
        for (int f = 0; f < k; ++f) id_cols.push_back(csv.column("id_" + std::to_string(f + 1)));
        const Index candidate_col = csv.column("candidate");
        const Index decision_col = csv.column("decision");
        if (candidate_col < 0 || decision_col < 0)
            throw InputError("assignments file needs candidate and decision columns");

        const PatternSpace space(k);
        EvaluationReport report;
        report.k = k;
        report.class_names = class_names_for(space);
        report.matrix = ConfusionMatrix(space.size());
        report.mode = mode;
        std::vector<std::int64_t> entities(static_cast<std::size_t>(k));
        for (const auto& row : csv.rows) {
            for (int f = 0; f < k; ++f) {
                const std::string& id = row[static_cast<std::size_t>(id_cols[static_cast<std::size_t>(f)])];
                auto it = truth.find(std::make_pair(f + 1, id));
                if (it == truth.end())
                    throw ScoringError("no truth entry for record \"" + id + "\" in file " +
                                       std::to_string(f + 1));
                entities[static_cast<std::size_t>(f)] = it->second;
            }
            const Index true_class = space.index_of(
                partition_from_labels(std::span<const std::int64_t>(entities.data(), entities.size())));
            const std::string& decision = row[static_cast<std::size_t>(decision_col)];
            Index decided;
            if (decision == "declared") {
                const std::string& label = row[static_cast<std::size_t>(candidate_col)];
                try {
                    decided = space.index_of(partition_from_string(label));
                } catch (const Error& e) {
                    throw ScoringError("bad candidate \"" + label + "\": " + e.what());
                }
            } else if (decision == "undeclared") {
                decided = report.matrix.undeclared_column();
            } else {
                throw ScoringError("bad decision \"" + decision + "\"");
            }
            report.matrix.counts(true_class, decided) += 1;
        }
        report.ome_value = ome(report.matrix, mode);
        report.mwge_value = mwge(report.matrix, mode);
        report.per_class = per_class_error(report.matrix, mode);
        return report;
    });
}

void write_evaluation_artifacts(const EvaluationReport& report,
                                const std::filesystem::path& out_dir) {
    stage("output", [&] {
        std::filesystem::create_directories(out_dir);
        CsvTable confusion_csv;
        confusion_csv.header.push_back("true_class");
        for (const std::string& name : report.class_names) confusion_csv.header.push_back(name);
        confusion_csv.header.push_back("undeclared");
        for (Index p = 0; p < report.matrix.class_count(); ++p) {
            std::vector<std::string> row;
            row.push_back(report.class_names[static_cast<std::size_t>(p)]);
            for (Index d = 0; d < report.matrix.counts.cols(); ++d)
                row.push_back(std::to_string(report.matrix.counts(p, d)));
            confusion_csv.rows.push_back(std::move(row));
        }
        write_csv(out_dir / "confusion.csv", confusion_csv);

        CsvTable metrics;
        metrics.header = {"metric", "class", "value"};
        metrics.rows.push_back({"score_mode", "", to_string(report.mode)});
        metrics.rows.push_back({"ome", "", format_scalar(report.ome_value)});
        metrics.rows.push_back({"mwge", "", format_scalar(report.mwge_value)});
        for (Index p = 0; p < report.per_class.size(); ++p)
            metrics.rows.push_back({"per_class_error", report.class_names[static_cast<std::size_t>(p)],
                                    scenario_cell(report.per_class(p))});
        write_csv(out_dir / "metrics.csv", metrics);
    });
}

} // namespace multilink
