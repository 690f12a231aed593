#include "multilink/config.hpp"

#include <fstream>
#include <set>

#include "json.hpp"

#include "multilink/error.hpp"
#include "multilink/partition.hpp"

namespace multilink {

namespace {

using nlohmann::json;

json parse_json_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

const json& expect_object(const json& v, const std::string& ctx) {
    if (!v.is_object()) throw ConfigError(ctx + " must be an object");
    return v;
}

const json& expect_array(const json& v, const std::string& ctx) {
    if (!v.is_array()) throw ConfigError(ctx + " must be an array");
    return v;
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& ctx) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* key : allowed)
            if (it.key() == key) known = true;
        if (!known) throw ConfigError("unknown key \"" + it.key() + "\" in " + ctx);
    }
}

const json* find(const json& obj, const char* key) {
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

const json& require(const json& obj, const char* key, const std::string& ctx) {
    const json* v = find(obj, key);
    if (!v) throw ConfigError("missing key \"" + std::string(key) + "\" in " + ctx);
    return *v;
}

Scalar as_scalar(const json& v, const std::string& ctx) {
    if (!v.is_number()) throw ConfigError(ctx + " must be a number");
    return v.get<Scalar>();
}

std::int64_t as_int(const json& v, const std::string& ctx) {
    if (!v.is_number_integer()) throw ConfigError(ctx + " must be an integer");
    return v.get<std::int64_t>();
}

bool as_bool(const json& v, const std::string& ctx) {
    if (!v.is_boolean()) throw ConfigError(ctx + " must be a boolean");
    return v.get<bool>();
}

std::string as_string(const json& v, const std::string& ctx) {
    if (!v.is_string()) throw ConfigError(ctx + " must be a string");
    return v.get<std::string>();
}

FitOptions fit_options_from_json(const json& v, const std::string& ctx) {
    expect_object(v, ctx);
    check_keys(v,
               {"restarts", "max_iters", "tol", "seed", "clamp_full_agreement",
                "include_blocked_in_prevalence"},
               ctx);
    FitOptions options;
    if (const json* x = find(v, "restarts")) options.restarts = static_cast<int>(as_int(*x, ctx + ".restarts"));
    if (const json* x = find(v, "max_iters")) options.max_iters = static_cast<int>(as_int(*x, ctx + ".max_iters"));
    if (const json* x = find(v, "tol")) options.tol = as_scalar(*x, ctx + ".tol");
    if (const json* x = find(v, "seed")) {
        std::int64_t seed = as_int(*x, ctx + ".seed");
        if (seed < 0) throw ConfigError(ctx + ".seed must be non-negative");
        options.seed = static_cast<std::uint64_t>(seed);
    }
    if (const json* x = find(v, "clamp_full_agreement"))
        options.clamp_full_agreement = as_bool(*x, ctx + ".clamp_full_agreement");
    if (const json* x = find(v, "include_blocked_in_prevalence"))
        options.include_blocked_in_prevalence = as_bool(*x, ctx + ".include_blocked_in_prevalence");
    return options;
}

void validate_fit_options(const FitOptions& em, const std::string& ctx) {
    if (em.restarts < 1) throw ConfigError(ctx + ".restarts must be at least 1");
    if (em.max_iters < 1) throw ConfigError(ctx + ".max_iters must be at least 1");
    if (!(em.tol >= 0)) throw ConfigError(ctx + ".tol must be non-negative");
}

FieldComparator comparator_from_json(const json& v, const std::string& ctx) {
    expect_object(v, ctx);
    check_keys(v, {"name", "kind", "role", "numeric", "width", "offsets"}, ctx);
    FieldComparator field;
    field.name = as_string(require(v, "name", ctx), ctx + ".name");
    std::string kind = "exact";
    if (const json* x = find(v, "kind")) kind = as_string(*x, ctx + ".kind");
    if (kind == "exact")
        field.kind = FieldKind::exact;
    else if (kind == "banded")
        field.kind = FieldKind::banded;
    else
        throw ConfigError(ctx + ".kind must be \"exact\" or \"banded\"");
    std::string role = "compared";
    if (const json* x = find(v, "role")) role = as_string(*x, ctx + ".role");
    if (role == "compared")
        field.role = FieldRole::compared;
    else if (role == "blocking")
        field.role = FieldRole::blocking;
    else
        throw ConfigError(ctx + ".role must be \"compared\" or \"blocking\"");
    field.numeric = field.kind == FieldKind::banded;
    if (const json* x = find(v, "numeric")) field.numeric = as_bool(*x, ctx + ".numeric");
    if (const json* x = find(v, "width")) field.width = as_int(*x, ctx + ".width");
    if (const json* x = find(v, "offsets"))
        for (const json& o : expect_array(*x, ctx + ".offsets"))
            field.offsets.push_back(as_int(o, ctx + ".offsets entry"));
    return field;
}

std::map<std::string, Scalar> scalar_map_from_json(const json& v, const std::string& ctx) {
    expect_object(v, ctx);
    std::map<std::string, Scalar> out;
    for (auto it = v.begin(); it != v.end(); ++it)
        out[it.key()] = as_scalar(it.value(), ctx + "." + it.key());
    return out;
}

PopulationSpec population_from_json(const json& v, const std::string& ctx) {
    expect_object(v, ctx);
    check_keys(v, {"k", "overlap", "fields", "expected_file_sizes"}, ctx);
    PopulationSpec spec;
    spec.k = static_cast<int>(as_int(require(v, "k", ctx), ctx + ".k"));
    for (const json& entry : expect_array(require(v, "overlap", ctx), ctx + ".overlap")) {
        std::string ectx = ctx + ".overlap entry";
        expect_object(entry, ectx);
        check_keys(entry, {"files", "entities"}, ectx);
        std::vector<int> subset;
        for (const json& f : expect_array(require(entry, "files", ectx), ectx + ".files"))
            subset.push_back(static_cast<int>(as_int(f, ectx + ".files entry")) - 1);
        std::int64_t count = as_int(require(entry, "entities", ectx), ectx + ".entities");
        if (!spec.overlap.emplace(std::move(subset), count).second)
            throw ConfigError("duplicate file subset in " + ctx + ".overlap");
    }
    for (const json& entry : expect_array(require(v, "fields", ctx), ctx + ".fields")) {
        std::string fctx = ctx + ".fields entry";
        expect_object(entry, fctx);
        check_keys(entry, {"name", "categories", "support", "blocking"}, fctx);
        PopulationFieldSpec field;
        field.name = as_string(require(entry, "name", fctx), fctx + ".name");
        const json* categories = find(entry, "categories");
        const json* support = find(entry, "support");
        if (!!categories == !!support)
            throw ConfigError("field \"" + field.name + "\" needs exactly one of categories or support");
        if (categories) {
            field.categories = as_int(*categories, fctx + ".categories");
        } else {
            field.numeric = true;
            const json& range = expect_array(*support, fctx + ".support");
            if (range.size() != 2)
                throw ConfigError(fctx + ".support must be [lo, hi]");
            field.support_lo = as_int(range[0], fctx + ".support lo");
            field.support_hi = as_int(range[1], fctx + ".support hi");
        }
        if (const json* x = find(entry, "blocking")) field.blocking = as_bool(*x, fctx + ".blocking");
        spec.fields.push_back(std::move(field));
    }
    if (const json* x = find(v, "expected_file_sizes"))
        for (const json& s : expect_array(*x, ctx + ".expected_file_sizes"))
            spec.expected_file_sizes.push_back(as_int(s, ctx + ".expected_file_sizes entry"));
    return spec;
}

const PopulationFieldSpec* find_field(const PopulationSpec& spec, const std::string& name) {
    for (const auto& field : spec.fields)
        if (field.name == name) return &field;
    return nullptr;
}

} // namespace

LinkageConfig load_linkage_config(const std::filesystem::path& path) {
    json root = parse_json_file(path);
    expect_object(root, "config");
    check_keys(root,
               {"files", "fields", "em", "error_level", "error_levels", "output_dir", "max_tuples"},
               "config");
    LinkageConfig config;
    for (const json& f : expect_array(require(root, "files", "config"), "config.files"))
        config.files.emplace_back(as_string(f, "config.files entry"));
    for (const json& f : expect_array(require(root, "fields", "config"), "config.fields"))
        config.fields.push_back(comparator_from_json(f, "config.fields entry"));
    if (const json* x = find(root, "em")) config.em = fit_options_from_json(*x, "config.em");
    if (const json* x = find(root, "error_level"))
        config.error_level = as_scalar(*x, "config.error_level");
    if (const json* x = find(root, "error_levels"))
        config.error_levels = scalar_map_from_json(*x, "config.error_levels");
    if (const json* x = find(root, "output_dir"))
        config.output_dir = as_string(*x, "config.output_dir");
    if (const json* x = find(root, "max_tuples")) config.max_tuples = as_int(*x, "config.max_tuples");
    validate_linkage_config(config);
    return config;
}

void validate_linkage_config(const LinkageConfig& config) {
    if (config.files.size() < 2)
        throw ConfigError("need at least two datafiles, got " + std::to_string(config.files.size()));
    if (config.files.size() > static_cast<std::size_t>(kMaxFiles))
        throw ConfigError("at most " + std::to_string(kMaxFiles) + " datafiles supported");
    if (config.fields.empty()) throw ConfigError("no fields declared");
    validate_comparators(config.fields);
    if (!(config.error_level >= 0 && config.error_level <= 1))
        throw ConfigError("error_level must lie in [0, 1]");
    for (const auto& [name, mu] : config.error_levels)
        if (!(mu >= 0 && mu <= 1))
            throw ConfigError("error level for class " + name + " must lie in [0, 1]");
    validate_fit_options(config.em, "em");
    if (config.max_tuples < 1) throw ConfigError("max_tuples must be positive");
}

SweepConfig load_sweep_config(const std::filesystem::path& path) {
    json root = parse_json_file(path);
    expect_object(root, "sweep");
    check_keys(root,
               {"population", "beta", "beta_overrides", "blocking", "block_categories",
                "low_quality_field", "comparators", "replications", "seed", "error_level", "em",
                "score_mode", "max_tuples"},
               "sweep");
    SweepConfig config;
    config.population = population_from_json(require(root, "population", "sweep"), "sweep.population");
    for (const json& b : expect_array(require(root, "beta", "sweep"), "sweep.beta"))
        config.beta_grid.push_back(as_scalar(b, "sweep.beta entry"));
    if (const json* x = find(root, "beta_overrides"))
        config.beta_overrides = scalar_map_from_json(*x, "sweep.beta_overrides");
    if (const json* x = find(root, "blocking")) {
        config.blocking_modes.clear();
        for (const json& b : expect_array(*x, "sweep.blocking"))
            config.blocking_modes.push_back(as_bool(b, "sweep.blocking entry"));
    }
    if (const json* x = find(root, "block_categories"))
        for (const json& c : expect_array(*x, "sweep.block_categories"))
            config.block_categories.push_back(as_int(c, "sweep.block_categories entry"));
    if (const json* x = find(root, "low_quality_field"))
        config.low_quality_field = as_string(*x, "sweep.low_quality_field");
    if (const json* x = find(root, "comparators"))
        for (const json& c : expect_array(*x, "sweep.comparators")) {
            FieldComparator field = comparator_from_json(c, "sweep.comparators entry");
            config.comparator_overrides.push_back(std::move(field));
        }
    if (const json* x = find(root, "replications"))
        config.replications = static_cast<int>(as_int(*x, "sweep.replications"));
    if (const json* x = find(root, "seed")) {
        std::int64_t seed = as_int(*x, "sweep.seed");
        if (seed < 0) throw ConfigError("sweep.seed must be non-negative");
        config.seed = static_cast<std::uint64_t>(seed);
    }
    if (const json* x = find(root, "error_level"))
        config.error_level = as_scalar(*x, "sweep.error_level");
    if (const json* x = find(root, "em")) config.em = fit_options_from_json(*x, "sweep.em");
    if (const json* x = find(root, "score_mode"))
        config.score_mode = score_mode_from_string(as_string(*x, "sweep.score_mode"));
    if (const json* x = find(root, "max_tuples")) config.max_tuples = as_int(*x, "sweep.max_tuples");
    validate_sweep_config(config);
    return config;
}

void validate_sweep_config(const SweepConfig& config) {
    validate_population_spec(config.population);
    if (config.beta_grid.empty()) throw ConfigError("beta grid is empty");
    for (Scalar beta : config.beta_grid)
        if (!(beta >= 0 && beta <= 1)) throw ConfigError("beta grid values must lie in [0, 1]");
    for (const auto& [name, beta] : config.beta_overrides) {
        const PopulationFieldSpec* field = find_field(config.population, name);
        if (!field) throw ConfigError("beta override for unknown field \"" + name + "\"");
        if (field->blocking)
            throw ConfigError("beta override for blocking field \"" + name + "\"");
        if (!(beta >= 0 && beta <= 1))
            throw ConfigError("beta override for \"" + name + "\" must lie in [0, 1]");
    }
    if (config.blocking_modes.empty()) throw ConfigError("blocking mode grid is empty");
    if (!config.block_categories.empty()) {
        int blocking_fields = 0;
        for (const auto& field : config.population.fields)
            if (field.blocking) ++blocking_fields;
        if (blocking_fields != 1)
            throw ConfigError("block_categories needs exactly one blocking field, found " +
                              std::to_string(blocking_fields));
        for (std::int64_t c : config.block_categories)
            if (c < 1) throw ConfigError("block_categories values must be positive");
    }
    if (!config.low_quality_field.empty()) {
        const PopulationFieldSpec* field = find_field(config.population, config.low_quality_field);
        if (!field)
            throw ConfigError("low_quality_field \"" + config.low_quality_field + "\" is not a field");
        if (field->blocking)
            throw ConfigError("low_quality_field cannot be a blocking field");
    }
    for (const auto& override_field : config.comparator_overrides) {
        const PopulationFieldSpec* field = find_field(config.population, override_field.name);
        if (!field)
            throw ConfigError("comparator override for unknown field \"" + override_field.name + "\"");
        if (override_field.kind == FieldKind::banded && !field->numeric)
            throw ConfigError("banded comparator on categorical field \"" + override_field.name + "\"");
    }
    if (config.replications < 1) throw ConfigError("replications must be at least 1");
    if (!(config.error_level >= 0 && config.error_level <= 1))
        throw ConfigError("error_level must lie in [0, 1]");
    validate_fit_options(config.em, "em");
    if (config.max_tuples < 1) throw ConfigError("max_tuples must be positive");
}

ErrorLevels resolve_error_levels(Scalar broadcast, const std::map<std::string, Scalar>& overrides,
                                 const PatternSpace& space) {
    ErrorLevels levels = ErrorLevels::uniform(space, broadcast);
    for (const auto& [name, mu] : overrides) {
        Index p;
        try {
            p = space.index_of(partition_from_string(name));
        } catch (const Error& e) {
            throw ConfigError("error level key \"" + name + "\": " + e.what());
        }
        levels.mu[p] = mu;
    }
    return levels;
}

ScoreMode score_mode_from_string(const std::string& text) {
    if (text == "declared_only") return ScoreMode::declared_only;
    if (text == "undeclared_as_error") return ScoreMode::undeclared_as_error;
    throw ConfigError("score mode must be \"declared_only\" or \"undeclared_as_error\", got \"" +
                      text + "\"");
}

std::string to_string(ScoreMode mode) {
    return mode == ScoreMode::declared_only ? "declared_only" : "undeclared_as_error";
}

} // namespace multilink
