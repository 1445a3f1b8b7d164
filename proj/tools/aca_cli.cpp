#include <aca/aca.hpp>

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

namespace {

struct Options
{
    std::string input;
    std::string synth;
    std::uint64_t seed = 0;
    std::size_t components = 2;
    double lambda = aca::AcaFitConfig{}.default_lambda;
    int roughness_order = aca::AcaFitConfig{}.roughness_order;
    std::size_t max_sweeps = aca::AcaFitConfig{}.max_sweeps;
    std::size_t restarts = aca::AcaFitConfig{}.restarts;
    std::size_t grid_nodes = aca::default_grid_nodes;
    std::size_t eval_points = 0;
    std::size_t bootstrap_iters = 100;
    std::size_t bootstrap_size = 500;
    double level = 0.95;
    std::size_t min_meals = aca::default_min_meals;
    std::vector<double> thresholds;
    std::string out = "aca_out";
    std::size_t threads = 0;
    std::vector<std::string> users;
    std::vector<std::string> subsets = aca::default_subsets;
    bool no_meal_type = false;
    std::string cap_policy = "keep";
};

void add_stage_options(CLI::App& cmd, Options& o)
{
    auto* in = cmd.add_option("--input", o.input, "Meal CSV file")->check(CLI::ExistingFile);
    auto* syn = cmd.add_option("--synth", o.synth, "Synthetic spec (JSON)")->check(CLI::ExistingFile);
    in->excludes(syn);
    cmd.add_option("--seed", o.seed, "Master seed");
    cmd.add_option("--components", o.components, "ACA components d")->check(CLI::PositiveNumber);
    cmd.add_option("--lambda", o.lambda, "Roughness penalty strength for every covariate")->check(CLI::NonNegativeNumber);
    cmd.add_option("--roughness-order", o.roughness_order, "Penalized derivative order")->check(CLI::IsMember({1, 2}));
    cmd.add_option("--max-sweeps", o.max_sweeps, "ACA sweep limit")->check(CLI::PositiveNumber);
    cmd.add_option("--restarts", o.restarts, "ACA random starts per fit (best kept)")->check(CLI::PositiveNumber);
    cmd.add_option("--grid-nodes", o.grid_nodes, "Grid nodes per real covariate")->check(CLI::Range(2, 10000));
    cmd.add_option("--eval-points", o.eval_points, "Points per curve (0: grid nodes)");
    cmd.add_option("--bootstrap-iters", o.bootstrap_iters, "Bootstrap replicas")->check(CLI::PositiveNumber);
    cmd.add_option("--bootstrap-size", o.bootstrap_size, "Rows per replica")->check(CLI::PositiveNumber);
    cmd.add_option("--level", o.level, "Confidence level")->check(CLI::Range(0.0, 1.0));
    cmd.add_option("--min-meals", o.min_meals, "Minimum meals per user");
    cmd.add_option("--threshold", o.thresholds, "Range threshold in mg/dl (repeatable)")->delimiter(',');
    cmd.add_option("--out", o.out, "Output directory");
    cmd.add_option("--threads", o.threads, "Replica worker threads (0: all cores)");
    cmd.add_option("--users", o.users, "Users to process")->delimiter(',');
    cmd.add_option("--subsets", o.subsets, "Meal subsets")->delimiter(',');
    cmd.add_flag("--no-meal-type", o.no_meal_type, "Leave meal_type out of pooled fits");
    cmd.add_option("--cap-policy", o.cap_policy, "Nutrients above 100 g: keep, clamp or reject")
        ->check(CLI::IsMember({"keep", "clamp", "reject"}));
}

aca::RunConfig to_run_config(const Options& o)
{
    aca::RunConfig c;
    if (!o.input.empty()) c.input = o.input;
    if (!o.synth.empty()) c.synth = aca::synth_spec_from_json(aca::read_json_file(o.synth));
    c.users = o.users;
    c.subsets = o.subsets;
    c.aca.components = o.components;
    c.aca.default_lambda = o.lambda;
    c.aca.roughness_order = o.roughness_order;
    c.aca.max_sweeps = o.max_sweeps;
    c.aca.restarts = o.restarts;
    c.bootstrap.iterations = o.bootstrap_iters;
    c.bootstrap.sample_size = o.bootstrap_size;
    c.bootstrap.level = o.level;
    c.bootstrap.threads = o.threads;
    c.grid_nodes = o.grid_nodes;
    c.eval_points = o.eval_points;
    c.include_meal_type = !o.no_meal_type;
    c.min_meals = o.min_meals;
    c.thresholds = o.thresholds;
    c.out = o.out;
    c.seed = o.seed;
    if (o.cap_policy == "clamp") c.load.cap_policy = aca::CapPolicy::clamp;
    else if (o.cap_policy == "reject") c.load.cap_policy = aca::CapPolicy::reject;
    return c;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Attributable components analysis of meal and blood-glucose data"};
    app.require_subcommand(1);

    std::string synth_spec;
    std::string synth_out;
    std::uint64_t synth_seed = 0;
    auto* synth = app.add_subcommand("synth", "Write a synthetic meal CSV");
    synth->add_option("--synth", synth_spec, "Synthetic spec (JSON)")->required()->check(CLI::ExistingFile);
    synth->add_option("--seed", synth_seed, "Master seed");
    synth->add_option("--out", synth_out, "Output CSV (stdout when omitted)");

    Options opts;
    const std::vector<std::pair<const char*, aca::Stage>> stages{
        {"fit", aca::Stage::fit},           {"bootstrap", aca::Stage::bootstrap}, {"marginal", aca::Stage::marginal},
        {"evaluate", aca::Stage::evaluate}, {"ranges", aca::Stage::ranges},       {"run", aca::Stage::all}};
    const std::vector<const char*> help{"Fit ACA and OLS per user and subset",
                                        "Paired bootstrap ensembles of the marginal curves",
                                        "Marginal curves with confidence bands",
                                        "Metrics and bend reports",
                                        "Threshold ranges of the ACA curves",
                                        "Full pipeline"};
    std::vector<CLI::App*> stage_cmds;
    for (std::size_t s = 0; s < stages.size(); ++s) {
        auto* cmd = app.add_subcommand(stages[s].first, help[s]);
        add_stage_options(*cmd, opts);
        stage_cmds.push_back(cmd);
    }

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            const auto users = aca::synth_spec_from_json(aca::read_json_file(synth_spec));
            const auto csv = aca::synthetic_csv(users, synth_seed);
            if (synth_out.empty()) std::cout << csv;
            else aca::write_text_file(synth_out, csv);
            return 0;
        }
        for (std::size_t s = 0; s < stages.size(); ++s) {
            if (!stage_cmds[s]->parsed()) continue;
            const auto summary = aca::run_stage(to_run_config(opts), stages[s].second);
            for (const auto& line : summary.log.lines()) std::cerr << line << '\n';
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
