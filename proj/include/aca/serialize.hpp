#pragma once

#include <aca/bootstrap.hpp>
#include <aca/dataset.hpp>
#include <aca/linreg.hpp>
#include <aca/model.hpp>
#include <aca/synth.hpp>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace aca {

using json = nlohmann::json;

inline constexpr int model_format_version = 1;

inline json matrix_to_json(const Eigen::MatrixXd& a)
{
    json rows = json::array();
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < a.cols(); ++c) row.push_back(a(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index cols_if_empty = 0)
{
    if (!j.is_array()) throw Error("json: matrix must be an array of rows");
    if (j.empty()) return Eigen::MatrixXd(0, cols_if_empty);
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j.front().size());
    Eigen::MatrixXd a(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto& row = j.at(static_cast<std::size_t>(r));
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) throw Error("json: ragged matrix");
        for (Eigen::Index c = 0; c < cols; ++c) a(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
    }
    return a;
}

inline json spec_to_json(const CovariateSpec& spec)
{
    json j{{"name", spec.name}};
    if (const auto* c = std::get_if<Categorical>(&spec.kind)) {
        j["kind"] = "categorical";
        j["levels"] = c->levels;
    } else if (const auto* g = std::get_if<RealGrid>(&spec.kind)) {
        j["kind"] = "grid";
        j["nodes"] = g->nodes;
        j["units"] = g->units;
    } else {
        const auto& p = std::get<Prototyped>(spec.kind);
        j["kind"] = "prototyped";
        j["count"] = p.count;
        j["locality_penalty"] = p.locality_penalty;
        j["prototypes"] = p.prototypes;
        j["units"] = p.units;
    }
    return j;
}

inline CovariateSpec spec_from_json(const json& j)
{
    CovariateSpec spec;
    spec.name = j.at("name").get<std::string>();
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "categorical") {
        spec.kind = Categorical{j.at("levels").get<std::vector<std::string>>()};
    } else if (kind == "grid") {
        spec.kind = RealGrid{j.at("nodes").get<std::vector<double>>(), j.value("units", std::string{})};
    } else if (kind == "prototyped") {
        spec.kind = Prototyped{j.at("count").get<std::size_t>(), j.at("locality_penalty").get<double>(),
                               j.value("prototypes", std::vector<double>{}), j.value("units", std::string{})};
    } else {
        throw Error("json: unknown covariate kind '" + kind + "'");
    }
    spec.validate();
    return spec;
}

inline json fit_config_to_json(const AcaFitConfig& c)
{
    return json{{"components", c.components},
                {"lambda", c.lambda},
                {"default_lambda", c.default_lambda},
                {"roughness_order", c.roughness_order},
                {"max_sweeps", c.max_sweeps},
                {"tol", c.tol},
                {"seed", c.seed},
                {"init_scale", c.init_scale},
                {"restarts", c.restarts}};
}

inline AcaFitConfig fit_config_from_json(const json& j)
{
    AcaFitConfig c;
    c.components = j.at("components").get<std::size_t>();
    c.lambda = j.value("lambda", std::vector<double>{});
    c.default_lambda = j.at("default_lambda").get<double>();
    c.roughness_order = j.value("roughness_order", c.roughness_order);
    c.max_sweeps = j.value("max_sweeps", c.max_sweeps);
    c.tol = j.value("tol", c.tol);
    c.seed = j.value("seed", std::uint64_t{0});
    c.init_scale = j.value("init_scale", c.init_scale);
    c.restarts = j.value("restarts", c.restarts);
    return c;
}

inline json report_to_json(const FitReport& r)
{
    return json{{"objective_trace", r.objective_trace},
                {"sweeps_run", r.sweeps_run},
                {"converged", r.converged},
                {"singular_solves", r.singular_solves},
                {"rejected_updates", r.rejected_updates}};
}

inline FitReport report_from_json(const json& j)
{
    FitReport r;
    r.objective_trace = j.value("objective_trace", std::vector<double>{});
    r.sweeps_run = j.value("sweeps_run", std::size_t{0});
    r.converged = j.value("converged", false);
    r.singular_solves = j.value("singular_solves", std::size_t{0});
    r.rejected_updates = j.value("rejected_updates", std::size_t{0});
    return r;
}

inline json to_json(const AcaFit& fit)
{
    json covs = json::array();
    for (std::size_t l = 0; l < fit.model.L(); ++l) {
        json c = spec_to_json(fit.model.specs[l]);
        c["factor"] = matrix_to_json(fit.model.factors[l]);
        covs.push_back(std::move(c));
    }
    return json{{"model", "aca"},
                {"version", model_format_version},
                {"config", fit_config_to_json(fit.model.config)},
                {"covariates", std::move(covs)},
                {"report", report_to_json(fit.report)}};
}

/// Penalty matrices are rebuilt from the covariate specs and stored config.
inline AcaFit aca_fit_from_json(const json& j)
{
    if (j.at("model").get<std::string>() != "aca") throw Error("json: not an ACA model");
    AcaFit fit;
    fit.model.config = fit_config_from_json(j.at("config"));
    const auto d = static_cast<Eigen::Index>(fit.model.config.components);
    for (const auto& c : j.at("covariates")) {
        auto spec = spec_from_json(c);
        auto factor = matrix_from_json(c.at("factor"), d);
        if (factor.rows() != static_cast<Eigen::Index>(spec.size()) || factor.cols() != d)
            throw ShapeError("json: factor of covariate '" + spec.name + "' has wrong shape");
        fit.model.penalties.push_back(penalty_matrix(spec, fit.model.config.roughness_order));
        fit.model.factors.push_back(std::move(factor));
        fit.model.specs.push_back(std::move(spec));
    }
    fit.model.config.validate(fit.model.L());
    if (j.contains("report")) fit.report = report_from_json(j.at("report"));
    return fit;
}

inline json to_json(const LinearModel& model)
{
    json terms = json::array();
    for (std::size_t l = 0; l < model.terms.size(); ++l) {
        const auto& t = model.terms[l];
        json c = spec_to_json(model.specs[l]);
        c["encoding"] = t.categorical ? "one_hot_drop_first" : "linear";
        c["coefficients"] = t.coefficients;
        c["column_means"] = t.column_means;
        terms.push_back(std::move(c));
    }
    return json{{"model", "linreg"},
                {"version", model_format_version},
                {"intercept", model.intercept},
                {"rank_deficient", model.rank_deficient},
                {"covariates", std::move(terms)}};
}

inline LinearModel linear_model_from_json(const json& j)
{
    if (j.at("model").get<std::string>() != "linreg") throw Error("json: not a linear model");
    LinearModel model;
    model.intercept = j.at("intercept").get<double>();
    model.rank_deficient = j.value("rank_deficient", false);
    for (const auto& c : j.at("covariates")) {
        auto spec = spec_from_json(c);
        LinearTerm t;
        t.covariate = spec.name;
        t.categorical = spec.is_categorical();
        t.coefficients = c.at("coefficients").get<std::vector<double>>();
        t.column_means = c.at("column_means").get<std::vector<double>>();
        const auto expected = t.categorical ? spec.size() - 1 : 1;
        if (t.coefficients.size() != expected || t.column_means.size() != expected)
            throw ShapeError("json: coefficients of '" + spec.name + "' have wrong length");
        model.terms.push_back(std::move(t));
        model.specs.push_back(std::move(spec));
    }
    return model;
}

inline json to_json(const CurveEnsemble& e)
{
    json failures = json::array();
    for (const auto& f : e.failures) failures.push_back({{"replica", f.replica}, {"message", f.message}});
    return json{{"covariates", e.covariates},  {"eval_points", e.eval_points},     {"curves", e.curves},
                {"replica_index", e.replica_index}, {"replica_seeds", e.replica_seeds}, {"failures", std::move(failures)}};
}

inline CurveEnsemble ensemble_from_json(const json& j)
{
    CurveEnsemble e;
    e.covariates = j.at("covariates").get<std::vector<std::string>>();
    e.eval_points = j.at("eval_points").get<std::vector<std::vector<double>>>();
    e.curves = j.at("curves").get<std::vector<std::vector<double>>>();
    e.replica_index = j.at("replica_index").get<std::vector<std::size_t>>();
    e.replica_seeds = j.at("replica_seeds").get<std::vector<std::uint64_t>>();
    for (const auto& f : j.value("failures", json::array()))
        e.failures.push_back({f.at("replica").get<std::size_t>(), f.at("message").get<std::string>()});
    if (e.replica_index.size() != e.curves.size()) throw ShapeError("json: replica_index and curves differ in length");
    for (const auto& c : e.curves) {
        if (c.size() != e.eval_points.size()) throw ShapeError("json: ensemble curve length differs from eval points");
    }
    return e;
}

namespace detail {

inline NutrientLaw nutrient_law_from_json(const json& j, NutrientLaw law)
{
    law.lo = j.value("lo", law.lo);
    law.hi = j.value("hi", law.hi);
    if (j.contains("shape")) {
        const auto s = j.at("shape").get<std::string>();
        if (s == "uniform") law.shape = DrawShape::uniform;
        else if (s == "triangular") law.shape = DrawShape::triangular;
        else if (s == "skewed") law.shape = DrawShape::skewed;
        else throw Error("synth spec: unknown draw shape '" + s + "'");
    }
    return law;
}

} // namespace detail

/// One user's synthetic generator settings; absent keys keep their defaults.
inline SynthConfig synth_config_from_json(const json& j)
{
    SynthConfig c;
    c.user_id = j.value("user_id", c.user_id);
    c.n = j.value("n", c.n);
    if (j.contains("carbs")) c.carbs = detail::nutrient_law_from_json(j.at("carbs"), c.carbs);
    if (j.contains("fat")) c.fat = detail::nutrient_law_from_json(j.at("fat"), c.fat);
    if (j.contains("protein")) c.protein = detail::nutrient_law_from_json(j.at("protein"), c.protein);
    if (j.contains("fiber")) c.fiber = detail::nutrient_law_from_json(j.at("fiber"), c.fiber);
    if (j.contains("pre_bg")) c.pre_bg = detail::nutrient_law_from_json(j.at("pre_bg"), c.pre_bg);
    if (j.contains("law")) {
        const auto name = j.at("law").get<std::string>();
        const auto law = parse_response_law(name);
        if (!law) throw Error("synth spec: unknown response law '" + name + "'");
        c.law = *law;
    }
    c.noise_sd = j.value("noise_sd", c.noise_sd);
    c.heteroscedastic = j.value("heteroscedastic", c.heteroscedastic);
    if (j.contains("outliers") && !j.at("outliers").is_null()) {
        const auto& o = j.at("outliers");
        OutlierSpec spec;
        spec.fiber = o.value("fiber", spec.fiber);
        spec.count = o.value("count", spec.count);
        c.outliers = spec;
    }
    if (j.contains("meal_counts") && !j.at("meal_counts").is_null())
        c.meal_counts = j.at("meal_counts").get<std::array<std::size_t, 4>>();
    c.validate();
    return c;
}

/// A synth spec is either one user object or {"users": [ ... ]}.
inline std::vector<SynthConfig> synth_spec_from_json(const json& j)
{
    std::vector<SynthConfig> users;
    if (j.contains("users")) {
        for (const auto& u : j.at("users")) users.push_back(synth_config_from_json(u));
    } else {
        users.push_back(synth_config_from_json(j));
    }
    if (users.empty()) throw Error("synth spec: no users");
    for (std::size_t a = 0; a < users.size(); ++a) {
        for (std::size_t b = 0; b < a; ++b) {
            if (users[a].user_id == users[b].user_id)
                throw Error("synth spec: duplicate user_id '" + users[a].user_id + "'");
        }
    }
    return users;
}

inline json read_json_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error("'" + path.string() + "': " + e.what());
    }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw Error("write failed for '" + path.string() + "'");
}

inline void write_json_file(const std::filesystem::path& path, const json& j)
{
    write_text_file(path, j.dump(2) + "\n");
}

} // namespace aca
