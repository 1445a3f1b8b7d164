#pragma once

#include <aca/analysis.hpp>
#include <aca/assignment.hpp>
#include <aca/bootstrap.hpp>
#include <aca/dataset.hpp>
#include <aca/linreg.hpp>
#include <aca/model.hpp>
#include <aca/random.hpp>
#include <aca/serialize.hpp>
#include <aca/synth.hpp>

#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace aca {

namespace fs = std::filesystem;

inline const std::vector<std::string> default_subsets{"all", "breakfast", "lunch", "dinner"};
inline const std::vector<std::string> model_names{"aca", "linreg"};

struct RunConfig
{
    std::optional<fs::path> input;
    /// Parsed synthetic spec, one entry per user.
    std::optional<std::vector<SynthConfig>> synth;
    /// Users to process; empty means every user in the input.
    std::vector<std::string> users;
    std::vector<std::string> subsets = default_subsets;
    AcaFitConfig aca;
    BootstrapConfig bootstrap;
    std::size_t grid_nodes = default_grid_nodes;
    /// Points per marginal curve; 0 evaluates at the covariate's grid nodes.
    std::size_t eval_points = 0;
    bool include_meal_type = true;
    std::size_t min_meals = default_min_meals;
    std::vector<double> thresholds;
    LoadOptions load;
    fs::path out = "aca_out";
    std::uint64_t seed = 0;

    void validate() const
    {
        if (input.has_value() == synth.has_value()) throw Error("exactly one of an input file and a synth spec is required");
        if (subsets.empty()) throw Error("no meal subsets selected");
        for (const auto& s : subsets) {
            if (s != "all" && !parse_meal_type(s)) throw Error("unknown meal subset '" + s + "'");
        }
        if (grid_nodes < 2) throw Error("grid nodes must be >= 2");
        if (eval_points == 1) throw Error("eval points must be 0 (grid nodes) or >= 2");
        for (double t : thresholds) {
            if (!std::isfinite(t)) throw Error("thresholds must be finite");
        }
        aca.validate(aca.lambda.empty() ? 0 : aca.lambda.size());
        bootstrap.validate();
    }
};

/// Text log of one invocation. Holds only deterministic content.
class RunLog
{
public:
    void line(const std::string& text) { lines_.push_back(text); }
    const std::vector<std::string>& lines() const noexcept { return lines_; }

    std::string text() const
    {
        std::string out;
        for (const auto& l : lines_) out += l + "\n";
        return out;
    }

private:
    std::vector<std::string> lines_;
};

/// Seed of the synthetic generator for one user.
inline std::uint64_t synth_user_seed(std::uint64_t seed, const std::string& user)
{
    return derive_seed(seed, stable_hash(user));
}

inline std::vector<MealRecord> generate_synthetic_users(const std::vector<SynthConfig>& users, std::uint64_t seed)
{
    std::vector<MealRecord> out;
    for (const auto& u : users) {
        auto sample = generate_synthetic(u, synth_user_seed(seed, u.user_id));
        out.insert(out.end(), sample.records.begin(), sample.records.end());
    }
    return out;
}

inline std::string synthetic_csv(const std::vector<SynthConfig>& users, std::uint64_t seed)
{
    std::ostringstream out;
    write_meals_csv(out, generate_synthetic_users(users, seed));
    return out.str();
}

inline std::vector<MealRecord> load_records(const RunConfig& config)
{
    if (config.input) return load_meals_csv(config.input->string(), config.load);
    if (config.synth) return generate_synthetic_users(*config.synth, config.seed);
    throw Error("no input data configured");
}

/// One (user, meal subset) dataset and its seed.
struct Task
{
    std::string user;
    std::string subset;
    Dataset data;
    std::uint64_t seed = 0;
};

inline std::uint64_t task_seed(std::uint64_t seed, const std::string& user, const std::string& subset)
{
    return derive_seed(seed, stable_hash(user + '\x1f' + subset));
}

inline std::vector<Task> plan_tasks(const std::vector<MealRecord>& records, const RunConfig& config, RunLog& log)
{
    auto users = list_users(records);
    if (!config.users.empty()) {
        for (const auto& u : config.users) {
            if (std::find(users.begin(), users.end(), u) == users.end()) throw Error("user '" + u + "' not in input");
        }
        users = config.users;
    }
    BuildOptions opt{config.grid_nodes, config.include_meal_type};
    std::vector<Task> tasks;
    for (const auto& user : users) {
        for (const auto& subset : config.subsets) {
            const auto filter = subset == "all" ? std::nullopt : parse_meal_type(subset);
            try {
                auto data = build_dataset(records, user, filter, config.min_meals, opt);
                tasks.push_back({user, subset, std::move(data), task_seed(config.seed, user, subset)});
            } catch (const InsufficientDataError& e) {
                log.line("skip user=" + user + ": " + e.what());
                break;
            } catch (const Error& e) {
                log.line("skip user=" + user + " subset=" + subset + ": " + e.what());
            }
        }
    }
    return tasks;
}

/// Covariates that receive marginal curves: the real-valued ones.
inline std::vector<std::string> curve_covariates(const Dataset& data)
{
    std::vector<std::string> out;
    for (const auto& c : data.covariates()) {
        if (!c.spec.is_categorical()) out.push_back(c.spec.name);
    }
    return out;
}

inline std::vector<double> eval_axis(const CovariateSpec& spec, std::size_t eval_points)
{
    std::vector<double> nodes;
    if (const auto* g = std::get_if<RealGrid>(&spec.kind)) nodes = g->nodes;
    else if (const auto* p = std::get_if<Prototyped>(&spec.kind)) nodes = p->prototypes;
    else throw Error("no eval axis for categorical covariate '" + spec.name + "'");
    if (eval_points == 0 || nodes.size() < 2) return nodes;
    std::vector<double> axis(eval_points);
    const double lo = nodes.front();
    const double hi = nodes.back();
    for (std::size_t p = 0; p < eval_points; ++p)
        axis[p] = lo + (hi - lo) * (static_cast<double>(p) / static_cast<double>(eval_points - 1));
    axis.back() = hi;
    return axis;
}

inline std::vector<CurveQuery> curve_queries(const Dataset& data, const RunConfig& config)
{
    std::vector<CurveQuery> out;
    for (const auto& name : curve_covariates(data))
        out.push_back({{name}, points_1d(eval_axis(data.covariate(data.index_of(name)).spec, config.eval_points))});
    return out;
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

struct TaskFits
{
    AcaFit aca;
    LinearModel linreg;
};

inline TaskFits fit_task(const Task& task, const RunConfig& config)
{
    AcaFitConfig cfg = config.aca;
    cfg.seed = derive_seed(task.seed, 0);
    return {aca_fit(task.data, cfg), ols_fit(task.data)};
}

/// Ensembles per model (in model_names order), one per curve covariate.
struct TaskEnsembles
{
    std::vector<std::vector<CurveEnsemble>> by_model;
};

inline BootstrapConfig task_bootstrap_config(const Task& task, const RunConfig& config)
{
    BootstrapConfig b = config.bootstrap;
    b.seed = derive_seed(task.seed, 1);
    return b;
}

inline TaskEnsembles bootstrap_task(const Task& task, const RunConfig& config)
{
    const auto queries = curve_queries(task.data, config);
    const auto bcfg = task_bootstrap_config(task, config);
    TaskEnsembles out;
    for (const Fitter& fitter : {Fitter{AcaFitter{config.aca}}, Fitter{LinregFitter{}}})
        out.by_model.push_back(bootstrap_curves(task.data, fitter, queries, bcfg).ensembles);
    return out;
}

/// One plot-ready curve: the full-data marginal with its bootstrap band.
struct CurveRecord
{
    std::string model;
    std::string user_id;
    std::string subset;
    std::string covariate;
    std::string units;
    std::vector<double> eval_points;
    std::vector<double> mean;
    std::vector<double> lower;
    std::vector<double> upper;
    double level = 0.95;
    std::uint64_t seed = 0;

    bool operator==(const CurveRecord&) const = default;
};

inline std::vector<CurveRecord> marginal_task(const Task& task, const TaskFits& fits, const TaskEnsembles& ensembles,
                                              const RunConfig& config)
{
    const auto queries = curve_queries(task.data, config);
    const auto alphas = assign_all(task.data);
    const auto inner = training_inner_sums(fits.aca.model, alphas);
    if (ensembles.by_model.size() != model_names.size()) throw ShapeError("marginal: ensembles for both models required");

    std::vector<CurveRecord> out;
    for (std::size_t mi = 0; mi < model_names.size(); ++mi) {
        if (ensembles.by_model[mi].size() != queries.size())
            throw ShapeError("marginal: ensemble count differs from covariate count");
        for (std::size_t q = 0; q < queries.size(); ++q) {
            const auto& query = queries[q];
            const auto& ens = ensembles.by_model[mi][q];
            if (ens.covariates != query.covariates || ens.eval_points != query.eval_points)
                throw Error("marginal: ensemble for '" + query.covariates.front() + "' does not match the eval grid");
            const auto curve = mi == 0 ? aca_marginalize_inner(fits.aca.model, inner, query.covariates, query.eval_points)
                                       : lm_marginalize(fits.linreg, query.covariates, query.eval_points);
            if (ens.curves.empty())
                throw Error("marginal: every bootstrap replica failed for " + model_names[mi] + " '" + query.covariates.front() + "'");
            const auto band = empirical_band(ens, config.bootstrap.level);
            const auto& spec = task.data.covariate(task.data.index_of(query.covariates.front())).spec;
            out.push_back({model_names[mi], task.user, task.subset, spec.name, spec.units(), curve.axis(), curve.mean,
                           band.lower, band.upper, band.level, task.seed});
        }
    }
    return out;
}

struct MetricsRow
{
    std::string user_id;
    std::string subset;
    std::string model;
    double rmse_full = 0.0;
    double rmse_marginal = 0.0;
    CoverageReport coverage;
};

struct BendRow
{
    std::string user_id;
    std::string subset;
    std::string model;
    std::string covariate;
    BendReport bend;
};

struct EvaluationRows
{
    std::vector<MetricsRow> metrics;
    std::vector<BendRow> bends;
};

inline EvaluationRows evaluate_task(const Task& task, const TaskFits& fits, const std::vector<CurveRecord>& curves)
{
    const auto& data = task.data;
    const auto names = curve_covariates(data);
    const auto alphas = assign_all(data);
    const auto inner = training_inner_sums(fits.aca.model, alphas);

    EvaluationRows out;
    for (const auto& model : model_names) {
        MetricsRow row{task.user, task.subset, model, 0.0, 0.0, {}};
        std::vector<double> full;
        if (model == "aca") {
            const Eigen::VectorXd p = aca_predict_samples(fits.aca.model, alphas);
            full.assign(p.data(), p.data() + p.size());
        } else {
            full = lm_predict_samples(fits.linreg, data);
        }
        row.rmse_full = rmse_full(full, data.x());

        std::vector<std::vector<double>> at_samples;
        std::vector<CovariateBand> bands;
        for (const auto& name : names) {
            const auto points = points_1d(data.covariate(data.index_of(name)).values);
            const auto curve = model == "aca" ? aca_marginalize_inner(fits.aca.model, inner, {name}, points)
                                              : lm_marginalize(fits.linreg, {name}, points);
            at_samples.push_back(curve.mean);

            const auto it = std::find_if(curves.begin(), curves.end(), [&](const CurveRecord& c) {
                return c.model == model && c.covariate == name && c.user_id == task.user && c.subset == task.subset;
            });
            if (it == curves.end()) throw Error("evaluate: no " + model + " curve for covariate '" + name + "'");
            bands.push_back({name, it->eval_points, {it->lower, it->upper, it->level}});
            out.bends.push_back({task.user, task.subset, model, name, detect_bend(it->eval_points, it->mean)});
        }
        row.rmse_marginal = rmse_marginal(at_samples, data.x());
        row.coverage = ci_coverage(data, bands);
        out.metrics.push_back(std::move(row));
    }
    return out;
}

struct RangeRow
{
    std::string user_id;
    std::string subset;
    RangeSet ranges;
};

/// Ranges of the ACA curves at every threshold.
inline std::vector<RangeRow> ranges_task(const std::vector<CurveRecord>& curves, const std::vector<double>& thresholds)
{
    std::vector<RangeRow> out;
    for (double t : thresholds) {
        for (const auto& c : curves) {
            if (c.model != "aca") continue;
            out.push_back({c.user_id, c.subset, extract_ranges(c.covariate, c.eval_points, c.mean, t)});
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

/// File-name-safe form of an identifier.
inline std::string path_component(const std::string& s)
{
    std::string out;
    for (char ch : s) {
        const bool ok = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') || ch == '-' ||
                        ch == '_' || ch == '.';
        out += ok ? ch : '_';
    }
    if (out.empty() || out == "." || out == "..") out = "_" + out;
    return out;
}

inline fs::path task_dir(const fs::path& root, const std::string& kind, const Task& task)
{
    return root / kind / path_component(task.user) / path_component(task.subset);
}

inline json to_json(const CurveRecord& c)
{
    return json{{"model", c.model},   {"user_id", c.user_id}, {"subset", c.subset}, {"covariate", c.covariate},
                {"units", c.units},   {"eval_points", c.eval_points}, {"mean", c.mean}, {"lower", c.lower},
                {"upper", c.upper},   {"level", c.level}, {"seed", c.seed}};
}

inline CurveRecord curve_from_json(const json& j)
{
    CurveRecord c;
    c.model = j.at("model").get<std::string>();
    c.user_id = j.at("user_id").get<std::string>();
    c.subset = j.at("subset").get<std::string>();
    c.covariate = j.at("covariate").get<std::string>();
    c.units = j.at("units").get<std::string>();
    c.eval_points = j.at("eval_points").get<std::vector<double>>();
    c.mean = j.at("mean").get<std::vector<double>>();
    c.lower = j.at("lower").get<std::vector<double>>();
    c.upper = j.at("upper").get<std::vector<double>>();
    c.level = j.at("level").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    const auto n = c.eval_points.size();
    if (c.mean.size() != n || c.lower.size() != n || c.upper.size() != n)
        throw ShapeError("curve file: arrays differ in length");
    return c;
}

inline void write_models(const fs::path& root, const Task& task, const TaskFits& fits)
{
    const auto dir = task_dir(root, "models", task);
    write_json_file(dir / "aca.json", to_json(fits.aca));
    write_json_file(dir / "linreg.json", to_json(fits.linreg));
}

inline TaskFits read_models(const fs::path& root, const Task& task)
{
    const auto dir = task_dir(root, "models", task);
    return {aca_fit_from_json(read_json_file(dir / "aca.json")), linear_model_from_json(read_json_file(dir / "linreg.json"))};
}

inline void write_ensembles(const fs::path& root, const Task& task, const TaskEnsembles& ens)
{
    const auto dir = task_dir(root, "ensembles", task);
    for (std::size_t mi = 0; mi < model_names.size(); ++mi) {
        for (const auto& e : ens.by_model.at(mi)) {
            json j = to_json(e);
            j["model"] = model_names[mi];
            j["user_id"] = task.user;
            j["subset"] = task.subset;
            write_json_file(dir / (model_names[mi] + "_" + path_component(e.covariates.front()) + ".json"), j);
        }
    }
}

inline TaskEnsembles read_ensembles(const fs::path& root, const Task& task, const RunConfig& config)
{
    const auto dir = task_dir(root, "ensembles", task);
    TaskEnsembles out;
    for (const auto& model : model_names) {
        std::vector<CurveEnsemble> list;
        for (const auto& q : curve_queries(task.data, config))
            list.push_back(ensemble_from_json(read_json_file(dir / (model + "_" + path_component(q.covariates.front()) + ".json"))));
        out.by_model.push_back(std::move(list));
    }
    return out;
}

inline void write_curves(const fs::path& root, const Task& task, const std::vector<CurveRecord>& curves)
{
    const auto dir = task_dir(root, "curves", task);
    for (const auto& c : curves) write_json_file(dir / (c.model + "_" + path_component(c.covariate) + ".json"), to_json(c));
}

inline std::vector<CurveRecord> read_curves(const fs::path& root, const Task& task)
{
    const auto dir = task_dir(root, "curves", task);
    std::vector<CurveRecord> out;
    for (const auto& model : model_names) {
        for (const auto& name : curve_covariates(task.data))
            out.push_back(curve_from_json(read_json_file(dir / (model + "_" + path_component(name) + ".json"))));
    }
    return out;
}

namespace detail {

/// Quotes a CSV field when it contains a separator, quote or line break.
inline std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

} // namespace detail

inline std::string metrics_csv(const std::vector<MetricsRow>& rows)
{
    std::vector<std::string> covs;
    for (const auto& r : rows) {
        for (const auto& c : r.coverage.covariates) {
            if (std::find(covs.begin(), covs.end(), c) == covs.end()) covs.push_back(c);
        }
    }
    std::string out = "user_id,subset,model,rmse_full,rmse_marginal,coverage_mean_pct";
    for (const auto& c : covs) out += ",coverage_" + c + "_pct";
    out += ",coverage_pooled_pct\n";
    for (const auto& r : rows) {
        out += detail::csv_field(r.user_id) + "," + r.subset + "," + r.model + "," + detail::format_number(r.rmse_full) + "," +
               detail::format_number(r.rmse_marginal) + "," + detail::format_number(r.coverage.mean_pct);
        for (const auto& c : covs) {
            const auto it = std::find(r.coverage.covariates.begin(), r.coverage.covariates.end(), c);
            out += ",";
            if (it != r.coverage.covariates.end())
                out += detail::format_number(r.coverage.per_covariate_pct[static_cast<std::size_t>(it - r.coverage.covariates.begin())]);
        }
        out += "," + detail::format_number(r.coverage.pooled_pct) + "\n";
    }
    return out;
}

inline std::string bends_csv(const std::vector<BendRow>& rows)
{
    std::string out = "user_id,subset,model,covariate,max_bend_deg,threshold_deg,flagged\n";
    for (const auto& r : rows) {
        out += detail::csv_field(r.user_id) + "," + r.subset + "," + r.model + "," + r.covariate + "," +
               detail::format_number(r.bend.max_bend_deg) + "," + detail::format_number(r.bend.threshold_deg) + "," +
               (r.bend.flagged ? "true" : "false") + "\n";
    }
    return out;
}

inline std::string ranges_csv(const std::vector<RangeRow>& rows)
{
    std::string out = "user_id,subset,covariate,threshold,kind,lo,hi\n";
    for (const auto& r : rows) {
        const auto prefix = detail::csv_field(r.user_id) + "," + r.subset + "," + r.ranges.covariate + "," +
                            detail::format_number(r.ranges.threshold) + ",";
        for (const auto& iv : r.ranges.above)
            out += prefix + "above," + detail::format_number(iv.lo) + "," + detail::format_number(iv.hi) + "\n";
        for (const auto& iv : r.ranges.below)
            out += prefix + "below," + detail::format_number(iv.lo) + "," + detail::format_number(iv.hi) + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Orchestration
// ---------------------------------------------------------------------------

enum class Stage { fit, bootstrap, marginal, evaluate, ranges, all };

inline std::string_view to_string(Stage s) noexcept
{
    switch (s) {
    case Stage::fit: return "fit";
    case Stage::bootstrap: return "bootstrap";
    case Stage::marginal: return "marginal";
    case Stage::evaluate: return "evaluate";
    case Stage::ranges: return "ranges";
    case Stage::all: return "run";
    }
    return "?";
}

inline void log_config(const RunConfig& c, RunLog& log)
{
    log.line("source=" + (c.input ? "input:" + c.input->filename().string() : std::string("synth")));
    log.line("seed=" + std::to_string(c.seed));
    log.line("components=" + std::to_string(c.aca.components));
    std::string lambda = c.aca.lambda.empty() ? detail::format_number(c.aca.default_lambda) : std::string();
    for (std::size_t l = 0; l < c.aca.lambda.size(); ++l) lambda += (l ? ";" : "") + detail::format_number(c.aca.lambda[l]);
    log.line("lambda=" + lambda);
    log.line("roughness_order=" + std::to_string(c.aca.roughness_order));
    log.line("max_sweeps=" + std::to_string(c.aca.max_sweeps) + " tol=" + detail::format_number(c.aca.tol) +
             " restarts=" + std::to_string(c.aca.restarts));
    log.line("grid_nodes=" + std::to_string(c.grid_nodes));
    log.line("eval_points=" + (c.eval_points ? std::to_string(c.eval_points) : std::string("grid_nodes")));
    log.line("include_meal_type=" + std::string(c.include_meal_type ? "true" : "false"));
    log.line("linreg_categorical_encoding=one_hot_drop_first");
    log.line("bootstrap_iters=" + std::to_string(c.bootstrap.iterations) +
             " bootstrap_size=" + std::to_string(c.bootstrap.sample_size) +
             " level=" + detail::format_number(c.bootstrap.level));
    log.line("min_meals=" + std::to_string(c.min_meals));
    std::string t;
    for (std::size_t i = 0; i < c.thresholds.size(); ++i) t += (i ? ";" : "") + detail::format_number(c.thresholds[i]);
    log.line("thresholds=" + (t.empty() ? std::string("none") : t));
    std::string subsets;
    for (std::size_t i = 0; i < c.subsets.size(); ++i) subsets += (i ? ";" : "") + c.subsets[i];
    log.line("subsets=" + subsets);
}

struct RunSummary
{
    std::size_t tasks = 0;
    std::size_t replica_failures = 0;
    RunLog log;
};

/// Runs one stage (or all of them) for every planned task. Stages after `fit`
/// read earlier artifacts from the output directory unless they were produced
/// in the same invocation. Every file is assembled in memory before writing,
/// so outputs do not depend on thread scheduling.
inline RunSummary run_stage(const RunConfig& config, Stage stage)
{
    config.validate();
    RunSummary summary;
    auto& log = summary.log;
    log.line("stage=" + std::string(to_string(stage)));
    log_config(config, log);

    const auto records = load_records(config);
    log.line("records=" + std::to_string(records.size()));
    const auto tasks = plan_tasks(records, config, log);
    summary.tasks = tasks.size();

    if (stage == Stage::all && config.synth) write_text_file(config.out / "meals.csv", synthetic_csv(*config.synth, config.seed));

    const bool all = stage == Stage::all;
    std::vector<MetricsRow> metrics;
    std::vector<BendRow> bends;
    std::vector<RangeRow> ranges;
    for (const auto& task : tasks) {
        std::string head = "task user=" + task.user + " subset=" + task.subset + " m=" + std::to_string(task.data.m()) +
                           " seed=" + std::to_string(task.seed);
        std::optional<TaskFits> fits;
        std::optional<TaskEnsembles> ens;
        std::optional<std::vector<CurveRecord>> curves;

        if (all || stage == Stage::fit) {
            fits = fit_task(task, config);
            write_models(config.out, task, *fits);
            const auto& r = fits->aca.report;
            head += " aca_sweeps=" + std::to_string(r.sweeps_run) + " converged=" + (r.converged ? "true" : "false") +
                    " singular_solves=" + std::to_string(r.singular_solves) +
                    " objective=" + detail::format_number(r.objective_trace.back()) +
                    " linreg_rank_deficient=" + (fits->linreg.rank_deficient ? "true" : "false");
        }
        if (all || stage == Stage::bootstrap) {
            ens = bootstrap_task(task, config);
            write_ensembles(config.out, task, *ens);
            for (std::size_t mi = 0; mi < model_names.size(); ++mi) {
                const auto& failures = ens->by_model[mi].front().failures;
                summary.replica_failures += failures.size();
                head += " " + model_names[mi] + "_failed_replicas=" + std::to_string(failures.size());
                for (const auto& f : failures)
                    log.line("replica failure user=" + task.user + " subset=" + task.subset + " model=" + model_names[mi] +
                             " replica=" + std::to_string(f.replica) + ": " + f.message);
            }
        }
        if (all || stage == Stage::marginal) {
            if (!fits) fits = read_models(config.out, task);
            if (!ens) ens = read_ensembles(config.out, task, config);
            curves = marginal_task(task, *fits, *ens, config);
            write_curves(config.out, task, *curves);
        }
        if (all || stage == Stage::evaluate) {
            if (!fits) fits = read_models(config.out, task);
            if (!curves) curves = read_curves(config.out, task);
            auto rows = evaluate_task(task, *fits, *curves);
            metrics.insert(metrics.end(), rows.metrics.begin(), rows.metrics.end());
            bends.insert(bends.end(), rows.bends.begin(), rows.bends.end());
        }
        if ((all || stage == Stage::ranges) && !config.thresholds.empty()) {
            if (!curves) curves = read_curves(config.out, task);
            auto rows = ranges_task(*curves, config.thresholds);
            ranges.insert(ranges.end(), rows.begin(), rows.end());
        }
        log.line(head);
    }

    if (all || stage == Stage::evaluate) {
        write_text_file(config.out / "metrics.csv", metrics_csv(metrics));
        write_text_file(config.out / "bends.csv", bends_csv(bends));
    }
    if ((all || stage == Stage::ranges) && !config.thresholds.empty())
        write_text_file(config.out / "ranges.csv", ranges_csv(ranges));
    if (stage == Stage::ranges && config.thresholds.empty()) log.line("no thresholds given; ranges.csv not written");

    log.line("tasks=" + std::to_string(summary.tasks) + " replica_failures=" + std::to_string(summary.replica_failures));
    write_text_file(config.out / "logs" / (std::string(to_string(stage)) + ".log"), log.text());
    return summary;
}

inline RunSummary run_pipeline(const RunConfig& config)
{
    return run_stage(config, Stage::all);
}

} // namespace aca
