#include "oracles.hpp"

#include <aca/model.hpp>

#include <gtest/gtest.h>

using namespace aca;

namespace {

std::vector<double> uniform_nodes(int n, double step = 1.0)
{
    std::vector<double> v;
    for (int j = 0; j < n; ++j) v.push_back(step * j);
    return v;
}

} // namespace

TEST(Penalty, SecondDifferenceNullspace)
{
    const CovariateSpec g{"g", RealGrid{uniform_nodes(7, 2.5), "u"}};
    const auto c = penalty_matrix(g, 2);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(7);
    Eigen::VectorXd line(7);
    for (int j = 0; j < 7; ++j) line(j) = 3.0 - 0.7 * j;
    EXPECT_LT((c * ones).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(std::abs(line.dot(c * line)), 1e-12);

    Eigen::VectorXd bump = Eigen::VectorXd::Zero(7);
    bump(3) = 1.0;
    // One unit bump on spacing h: second differences (1, -2, 1)/h^2.
    EXPECT_NEAR(bump.dot(c * bump), 6.0 / std::pow(2.5, 4), 1e-12);
}

TEST(Penalty, FirstDifferenceNullspaceAndScale)
{
    const CovariateSpec g{"g", RealGrid{{0, 1, 3, 6}, "u"}};
    const auto c = penalty_matrix(g, 1);
    EXPECT_LT((c * Eigen::VectorXd::Ones(4)).cwiseAbs().maxCoeff(), 1e-12);
    Eigen::Vector4d v(0, 1, 3, 6);
    // Slope 1 everywhere: sum over segments of (dv/h)^2 = 3.
    EXPECT_NEAR(v.dot(c * v), 3.0, 1e-12);
    EXPECT_EQ(penalty_matrix(g), c);
}

TEST(Penalty, TwoNodesFallBackToFirstDifference)
{
    const CovariateSpec g{"g", RealGrid{{0, 2}, "u"}};
    const auto c = penalty_matrix(g, 2);
    Eigen::Vector2d v(0, 2);
    EXPECT_NEAR(v.dot(c * v), 1.0, 1e-15);
}

TEST(Penalty, CategoricalCentering)
{
    const CovariateSpec cat{"c", Categorical{{"a", "b"}}};
    const auto c = penalty_matrix(cat);
    Eigen::Vector2d v(1, -1);
    EXPECT_NEAR(v.dot(c * v), 2.0, 1e-15);
    EXPECT_NEAR(Eigen::Vector2d(4, 4).dot(c * Eigen::Vector2d(4, 4)), 0.0, 1e-14);
    EXPECT_EQ(penalty_matrix(CovariateSpec{"one", Categorical{{"x"}}}).size(), 1);
    EXPECT_EQ(penalty_matrix(CovariateSpec{"one", Categorical{{"x"}}})(0, 0), 0.0);
}

TEST(Penalty, SymmetricPositiveSemidefinite)
{
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.1, 5.0);
    for (int t = 0; t < 20; ++t) {
        std::vector<double> nodes{0.0};
        for (int j = 1; j < 9; ++j) nodes.push_back(nodes.back() + u(rng));
        for (int order : {1, 2}) {
            const auto c = penalty_matrix(CovariateSpec{"g", RealGrid{nodes, ""}}, order);
            EXPECT_LT((c - c.transpose()).cwiseAbs().maxCoeff(), 1e-12);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
            EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10);
        }
    }
}

TEST(Objective, MatchesNaiveOracle)
{
    std::mt19937_64 rng(5);
    for (int t = 0; t < 10; ++t) {
        auto inst = oracle::random_instance(rng, 15, 3);
        auto model = oracle::random_model(rng, inst, 2, 0.7, 1 + t % 2);
        const double fast = aca_objective(model, inst.x, inst.alphas);
        const double slow = oracle::naive_objective(model, inst.x, inst.alphas);
        EXPECT_NEAR(fast, slow, 1e-10 * std::max(1.0, slow));
        EXPECT_GE(fast, 0.0);
    }
}

TEST(Objective, Examples)
{
    std::mt19937_64 rng(6);
    auto inst = oracle::random_instance(rng, 12, 2);
    auto model = oracle::random_model(rng, inst, 2, 1.0);
    for (auto& v : model.factors) v.setZero();
    double ss = 0.0;
    for (double v : inst.x) ss += v * v;
    EXPECT_NEAR(aca_objective(model, inst.x, inst.alphas), ss, 1e-12 * ss);

    // Perfect fit with lambda = 0.
    model = oracle::random_model(rng, inst, 2, 0.0);
    const auto pred = aca_predict_samples(model, inst.alphas);
    std::vector<double> exact(pred.data(), pred.data() + pred.size());
    EXPECT_NEAR(aca_objective(model, exact, inst.alphas), 0.0, 1e-20);

    auto bad = inst.alphas;
    bad.pop_back();
    EXPECT_THROW(aca_objective(model, inst.x, bad), ShapeError);
}

TEST(Predict, Examples)
{
    AcaModel m;
    m.specs = {CovariateSpec{"g", RealGrid{{0, 1, 2}, ""}}};
    m.factors = {Eigen::Vector3d(1, 2, 3)};
    m.penalties = {penalty_matrix(m.specs[0])};
    m.config.components = 1;
    EXPECT_EQ(aca_predict(m, std::vector<Eigen::RowVectorXd>{Eigen::RowVector3d(0, 1, 0)}), 2.0);
    EXPECT_EQ(aca_predict(m, std::vector<Eigen::RowVectorXd>{Eigen::RowVector3d(0.5, 0.5, 0)}), 1.5);

    AcaModel two;
    two.specs = {CovariateSpec{"a", Categorical{{"x"}}}, CovariateSpec{"b", Categorical{{"y"}}}};
    two.factors = {Eigen::MatrixXd::Constant(1, 1, 2.0), Eigen::MatrixXd::Constant(1, 1, 3.0)};
    const std::vector<Eigen::RowVectorXd> rows{Eigen::RowVectorXd::Ones(1), Eigen::RowVectorXd::Ones(1)};
    EXPECT_EQ(aca_predict(two, rows), 6.0);
    EXPECT_THROW(aca_predict(two, std::vector<Eigen::RowVectorXd>{Eigen::RowVectorXd::Ones(1)}), ShapeError);
}

TEST(Predict, LinearInAssignmentRow)
{
    std::mt19937_64 rng(9);
    auto inst = oracle::random_instance(rng, 10, 3, false);
    auto model = oracle::random_model(rng, inst, 2, 0.0);
    std::vector<Eigen::RowVectorXd> rows;
    for (const auto& s : model.specs) rows.push_back(encode_row(s, std::get<RealGrid>(s.kind).nodes[1] + 0.3));
    const auto J = model.factors[0].rows();
    Eigen::RowVectorXd mix = Eigen::RowVectorXd::Zero(J);
    double mixed = 0.0;
    const std::vector<double> w{0.2, 0.5, 0.3};
    for (std::size_t t = 0; t < w.size(); ++t) {
        Eigen::RowVectorXd e = Eigen::RowVectorXd::Zero(J);
        e(static_cast<Eigen::Index>(t)) = 1.0;
        rows[0] = e;
        mixed += w[t] * aca_predict(model, rows);
        mix += w[t] * e;
    }
    rows[0] = mix;
    EXPECT_NEAR(aca_predict(model, rows), mixed, 1e-12);
}

TEST(SolveBlock, GroupMeansForSingleCategorical)
{
    const std::vector<double> x{1, 2, 3, 10, 20, 7};
    const std::vector<double> level{0, 0, 0, 1, 1, 2};
    const CovariateSpec spec{"c", Categorical{{"a", "b", "c"}}};
    AcaModel model;
    model.specs = {spec};
    model.factors = {Eigen::MatrixXd::Constant(3, 1, 0.1)};
    model.penalties = {penalty_matrix(spec)};
    model.config.components = 1;
    model.config.default_lambda = 0.0;
    const std::vector<AssignmentMatrix> alphas{assign(spec, level)};
    const auto sol = solve_block(0, model, x, alphas);
    EXPECT_NEAR(sol.factor(0, 0), 2.0, 1e-12);
    EXPECT_NEAR(sol.factor(1, 0), 15.0, 1e-12);
    EXPECT_NEAR(sol.factor(2, 0), 7.0, 1e-12);
    EXPECT_FALSE(sol.singular);
}

TEST(SolveBlock, MatchesHardAssignmentClosedForm)
{
    std::mt19937_64 rng(21);
    for (int t = 0; t < 10; ++t) {
        const std::size_t m = 40;
        std::vector<CovariateSpec> specs{{"a", Categorical{{"a0", "a1", "a2"}}}, {"b", Categorical{{"b0", "b1", "b2", "b3"}}}};
        std::vector<std::vector<int>> z(2, std::vector<int>(m));
        std::vector<AssignmentMatrix> alphas;
        for (std::size_t l = 0; l < 2; ++l) {
            std::vector<double> vals(m);
            for (std::size_t i = 0; i < m; ++i) {
                // Every level appears at least twice.
                z[l][i] = static_cast<int>(i % specs[l].size());
                vals[i] = z[l][i];
            }
            std::shuffle(z[l].begin(), z[l].end(), rng);
            for (std::size_t i = 0; i < m; ++i) vals[i] = z[l][i];
            alphas.push_back(assign(specs[l], vals));
        }
        std::normal_distribution<double> g(0, 1);
        std::vector<double> x(m);
        for (auto& v : x) v = 3 * g(rng);
        oracle::RandomInstance inst{specs, {}, alphas, x};
        auto model = oracle::random_model(rng, inst, 2, 0.0);
        for (std::size_t l = 0; l < 2; ++l) {
            const auto expected = oracle::hard_assignment_update(l, model, x, z);
            const auto got = solve_block(l, model, x, alphas).factor;
            EXPECT_LT((got - expected).cwiseAbs().maxCoeff(), 1e-9 * std::max(1.0, expected.cwiseAbs().maxCoeff()));
        }
    }
}

TEST(SolveBlock, MatchesDenseQuadraticOracle)
{
    std::mt19937_64 rng(33);
    for (int t = 0; t < 10; ++t) {
        auto inst = oracle::random_instance(rng, 20, 3);
        auto model = oracle::random_model(rng, inst, 2, 0.5 + t * 0.3, 1 + t % 2);
        for (std::size_t l = 0; l < 3; ++l) {
            const auto expected = oracle::dense_block_oracle(l, model, inst.x, inst.alphas);
            const auto got = solve_block(l, model, inst.x, inst.alphas).factor;
            EXPECT_LT((got - expected).cwiseAbs().maxCoeff(), 1e-8 * std::max(1.0, expected.cwiseAbs().maxCoeff()))
                << "instance " << t << " block " << l;
        }
    }
}

TEST(SolveBlock, NeverIncreasesObjective)
{
    std::mt19937_64 rng(34);
    for (int t = 0; t < 20; ++t) {
        auto inst = oracle::random_instance(rng, 25, 3);
        auto model = oracle::random_model(rng, inst, 1 + t % 3, 0.3);
        for (std::size_t l = 0; l < 3; ++l) {
            const double before = aca_objective(model, inst.x, inst.alphas);
            model.factors[l] = solve_block(l, model, inst.x, inst.alphas).factor;
            EXPECT_LE(aca_objective(model, inst.x, inst.alphas), before + 1e-10);
        }
    }
}

TEST(SolveBlock, SingularSystemUsesMinimumNorm)
{
    // Grid node 2 is never touched by any sample: its column is unidentified.
    const CovariateSpec spec{"g", RealGrid{{0, 1, 2}, ""}};
    const std::vector<double> z{0.0, 0.5, 1.0, 0.2};
    const std::vector<double> x{1, 2, 3, 1.4};
    AcaModel model;
    model.specs = {spec};
    model.factors = {Eigen::MatrixXd::Constant(3, 1, 0.3)};
    model.penalties = {penalty_matrix(spec)};
    model.config.default_lambda = 0.0;
    const std::vector<AssignmentMatrix> alphas{assign(spec, z)};
    const auto sol = solve_block(0, model, x, alphas);
    EXPECT_TRUE(sol.singular);
    EXPECT_EQ(sol.factor(2, 0), 0.0);
    EXPECT_NEAR(sol.factor(0, 0), 1.0, 1e-10);
    EXPECT_NEAR(sol.factor(1, 0), 3.0, 1e-10);
}

TEST(Fit, TraceNonIncreasingAndDeterministic)
{
    std::mt19937_64 rng(41);
    for (int t = 0; t < 10; ++t) {
        auto inst = oracle::random_instance(rng, 60, 1 + t % 4);
        AcaFitConfig cfg;
        cfg.components = 1 + t % 3;
        cfg.seed = static_cast<std::uint64_t>(t);
        const auto fit = aca_fit(inst.x, inst.alphas, inst.specs, cfg);
        const auto& trace = fit.report.objective_trace;
        ASSERT_EQ(trace.size(), fit.report.sweeps_run + 1);
        for (std::size_t s = 1; s < trace.size(); ++s) EXPECT_LE(trace[s], trace[s - 1] + 1e-10);
        EXPECT_NEAR(trace.back(), aca_objective(fit.model, inst.x, inst.alphas), 1e-9 * trace.back());

        const auto again = aca_fit(inst.x, inst.alphas, inst.specs, cfg);
        for (std::size_t l = 0; l < fit.model.L(); ++l) EXPECT_EQ(again.model.factors[l], fit.model.factors[l]);
    }
}

TEST(Fit, RescalingInvariance)
{
    std::mt19937_64 rng(55);
    auto inst = oracle::random_instance(rng, 30, 3);
    AcaFitConfig cfg;
    cfg.seed = 3;
    const auto fit = aca_fit(inst.x, inst.alphas, inst.specs, cfg);
    const double base = aca_objective(fit.model, inst.x, inst.alphas);
    for (double c : {0.1, 2.0, 10.0}) {
        auto scaled = fit.model;
        scaled.factors[0].col(1) *= c;
        scaled.factors[2].col(1) /= c;
        EXPECT_NEAR(aca_objective(scaled, inst.x, inst.alphas), base, 1e-9 * base);
    }
}

TEST(Fit, SingleCategoricalRecoversGroupMeans)
{
    std::mt19937_64 rng(61);
    std::normal_distribution<double> g(0, 5);
    const CovariateSpec spec{"c", Categorical{{"a", "b", "c", "d"}}};
    std::vector<double> level, x;
    for (int i = 0; i < 40; ++i) {
        level.push_back(i % 4);
        x.push_back(10.0 * (i % 4) + g(rng));
    }
    AcaFitConfig cfg;
    cfg.components = 1;
    cfg.default_lambda = 0.0;
    const std::vector<AssignmentMatrix> alphas{assign(spec, level)};
    const auto fit = aca_fit(x, alphas, {spec}, cfg);
    for (int j = 0; j < 4; ++j) {
        double sum = 0.0;
        int n = 0;
        for (int i = 0; i < 40; ++i) {
            if (i % 4 == j) sum += x[static_cast<std::size_t>(i)], ++n;
        }
        EXPECT_NEAR(fit.model.factors[0](j, 0), sum / n, 1e-6);
    }
}

TEST(Fit, ConstantResponseIsReproduced)
{
    std::mt19937_64 rng(62);
    auto inst = oracle::random_instance(rng, 30, 3);
    std::fill(inst.x.begin(), inst.x.end(), 42.0);
    AcaFitConfig cfg;
    cfg.components = 1;
    cfg.default_lambda = 1.0;
    const auto fit = aca_fit(inst.x, inst.alphas, inst.specs, cfg);
    const auto pred = aca_predict_samples(fit.model, inst.alphas);
    EXPECT_LT((pred.array() - 42.0).abs().maxCoeff(), 1e-6);
}

TEST(Fit, SeparableNoiselessTruthIsRecovered)
{
    const CovariateSpec a{"a", RealGrid{{0, 10, 20, 30}, ""}};
    const CovariateSpec b{"b", Categorical{{"x", "y", "z"}}};
    const std::vector<double> fa{1.0, 2.0, 0.5, 3.0};
    const std::vector<double> fb{2.0, -1.0, 4.0};
    std::vector<double> za, zb, x;
    for (int i = 0; i < 36; ++i) {
        const double t = 2.5 * (i % 13);
        const int j = std::min(2, static_cast<int>(t / 10.0));
        const double w = (t - 10.0 * j) / 10.0;
        za.push_back(t);
        zb.push_back(i % 3);
        x.push_back(((1 - w) * fa[static_cast<std::size_t>(j)] + w * fa[static_cast<std::size_t>(j + 1)]) * fb[static_cast<std::size_t>(i % 3)]);
    }
    const std::vector<AssignmentMatrix> alphas{assign(a, za), assign(b, zb)};
    AcaFitConfig cfg;
    cfg.components = 1;
    cfg.default_lambda = 0.0;
    cfg.tol = 1e-14;
    cfg.max_sweeps = 2000;
    const auto fit = aca_fit(x, alphas, {a, b}, cfg);
    const auto pred = aca_predict_samples(fit.model, alphas);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(pred(static_cast<Eigen::Index>(i)), x[i], 1e-3);
}

TEST(Fit, BeatsRandomFactorsAndGenericDescent)
{
    std::mt19937_64 rng(71);
    for (int t = 0; t < 5; ++t) {
        auto inst = oracle::random_instance(rng, 12, 2);
        for (auto& s : inst.specs) {
            if (s.size() > 4) {
                // Keep at most 4 columns per covariate.
                if (auto* c = std::get_if<Categorical>(&s.kind)) c->levels.resize(4);
                if (auto* g = std::get_if<RealGrid>(&s.kind)) g->nodes.resize(4);
            }
        }
        for (std::size_t l = 0; l < inst.specs.size(); ++l) {
            if (inst.specs[l].is_categorical())
                for (auto& v : inst.values[l]) v = std::fmod(v, static_cast<double>(inst.specs[l].size()));
            inst.alphas[l] = assign(inst.specs[l], inst.values[l]);
        }
        AcaFitConfig cfg;
        cfg.components = 1 + t % 2;
        cfg.default_lambda = 0.2;
        cfg.seed = static_cast<std::uint64_t>(t);
        cfg.tol = 1e-15;
        cfg.max_sweeps = 5000;
        cfg.restarts = 20;
        const auto fit = aca_fit(inst.x, inst.alphas, inst.specs, cfg);
        const double best = fit.report.objective_trace.back();

        std::normal_distribution<double> g(0, 3);
        for (int r = 0; r < 1000; ++r) {
            auto trial = fit.model;
            for (auto& v : trial.factors) {
                for (Eigen::Index p = 0; p < v.size(); ++p) v.data()[p] = g(rng);
            }
            EXPECT_LE(best, oracle::naive_objective(trial, inst.x, inst.alphas));
        }

        // Generic descent started at the ACA solution: gradient steps with
        // backtracking on the naive objective, gradient by central differences.
        // A stationary point admits no meaningful improvement.
        AcaModel gd = fit.model;
        double f = oracle::naive_objective(gd, inst.x, inst.alphas);
        double step = 1e-3;
        for (int it = 0; it < 2000 && step > 1e-20; ++it) {
            std::vector<Eigen::MatrixXd> grad;
            double gnorm = 0.0;
            for (std::size_t l = 0; l < gd.factors.size(); ++l) {
                Eigen::MatrixXd gl(gd.factors[l].rows(), gd.factors[l].cols());
                for (Eigen::Index p = 0; p < gl.size(); ++p) {
                    const double h = 1e-6;
                    const double keep = gd.factors[l].data()[p];
                    gd.factors[l].data()[p] = keep + h;
                    const double fp = oracle::naive_objective(gd, inst.x, inst.alphas);
                    gd.factors[l].data()[p] = keep - h;
                    const double fm = oracle::naive_objective(gd, inst.x, inst.alphas);
                    gd.factors[l].data()[p] = keep;
                    gl.data()[p] = (fp - fm) / (2 * h);
                }
                gnorm += gl.squaredNorm();
                grad.push_back(std::move(gl));
            }
            if (gnorm < 1e-16) break;
            while (step > 1e-20) {
                auto trial = gd;
                for (std::size_t l = 0; l < gd.factors.size(); ++l) trial.factors[l] -= step * grad[l];
                const double ft = oracle::naive_objective(trial, inst.x, inst.alphas);
                if (ft <= f - 0.5 * step * gnorm) {
                    gd = std::move(trial);
                    f = ft;
                    step *= 2.0;
                    break;
                }
                step *= 0.5;
            }
        }
        EXPECT_NEAR(best, f, 1e-6 * std::max(1.0, best)) << "instance " << t;
    }
}

TEST(Fit, Errors)
{
    const CovariateSpec s{"g", RealGrid{{0, 1}, ""}};
    const std::vector<AssignmentMatrix> alphas{assign(s, {0.5})};
    AcaFitConfig cfg;
    EXPECT_THROW(aca_fit(std::vector<double>{1.0}, alphas, {}, cfg), Error);
    EXPECT_THROW(aca_fit(std::vector<double>{std::nan("")}, alphas, {s}, cfg), Error);
    cfg.tol = 0;
    EXPECT_THROW(aca_fit(std::vector<double>{1.0}, alphas, {s}, cfg), Error);
    cfg = {};
    cfg.lambda = {1.0, 2.0};
    EXPECT_THROW(aca_fit(std::vector<double>{1.0}, alphas, {s}, cfg), Error);
    cfg = {};
    cfg.components = 0;
    EXPECT_THROW(aca_fit(std::vector<double>{1.0}, alphas, {s}, cfg), Error);
}

TEST(Marginal, MatchesNaiveSummation)
{
    std::mt19937_64 rng(81);
    for (int t = 0; t < 10; ++t) {
        auto inst = oracle::random_instance(rng, 25, 3);
        auto model = oracle::random_model(rng, inst, 2, 0.1);
        std::vector<std::vector<double>> points;
        for (int p = 0; p < 7; ++p) {
            const auto& s = model.specs[0];
            if (s.is_categorical()) points.push_back({static_cast<double>(p % s.size())});
            else points.push_back({std::get<RealGrid>(s.kind).nodes.front() + 4.1 * p});
        }
        const auto curve = aca_marginalize(model, inst.alphas, {"cov0"}, points);
        const auto naive = oracle::naive_marginal(model, inst.alphas, {0}, points);
        for (std::size_t p = 0; p < points.size(); ++p) EXPECT_NEAR(curve.mean[p], naive[p], 1e-10 * std::max(1.0, std::abs(naive[p])));

        std::vector<std::vector<double>> pair_points;
        for (const auto& p : points) pair_points.push_back({inst.values[2][0], p[0]});
        const auto pair = aca_marginalize(model, inst.alphas, {"cov2", "cov0"}, pair_points);
        const auto naive_pair = oracle::naive_marginal(model, inst.alphas, {2, 0}, pair_points);
        for (std::size_t p = 0; p < points.size(); ++p) EXPECT_NEAR(pair.mean[p], naive_pair[p], 1e-10 * std::max(1.0, std::abs(naive_pair[p])));
    }
}

TEST(Marginal, AllCovariatesEqualsPredict)
{
    std::mt19937_64 rng(82);
    auto inst = oracle::random_instance(rng, 20, 2);
    auto model = oracle::random_model(rng, inst, 2, 0.1);
    std::vector<std::vector<double>> points;
    for (std::size_t i = 0; i < 20; ++i) points.push_back({inst.values[0][i], inst.values[1][i]});
    const auto curve = aca_marginalize(model, inst.alphas, {"cov0", "cov1"}, points);
    for (std::size_t i = 0; i < 20; ++i) {
        const std::vector<Eigen::RowVectorXd> rows{encode_row(model.specs[0], points[i][0]), encode_row(model.specs[1], points[i][1])};
        EXPECT_NEAR(curve.mean[i], aca_predict(model, rows), 1e-12);
    }
}

TEST(Marginal, SingleCovariateModelIsTheModel)
{
    std::mt19937_64 rng(83);
    auto inst = oracle::random_instance(rng, 20, 1, false);
    auto model = oracle::random_model(rng, inst, 2, 0.1);
    const auto& nodes = std::get<RealGrid>(model.specs[0].kind).nodes;
    const auto curve = aca_marginalize(model, inst.alphas, {"cov0"}, points_1d(nodes));
    for (std::size_t j = 0; j < nodes.size(); ++j)
        EXPECT_NEAR(curve.mean[j], model.factors[0].row(static_cast<Eigen::Index>(j)).sum(), 1e-12);
}

TEST(Marginal, Errors)
{
    std::mt19937_64 rng(84);
    auto inst = oracle::random_instance(rng, 10, 2);
    auto model = oracle::random_model(rng, inst, 1, 0.1);
    EXPECT_THROW(aca_marginalize(model, inst.alphas, {"nope"}, {{1.0}}), Error);
    EXPECT_THROW(aca_marginalize(model, inst.alphas, {}, {{}}), Error);
    EXPECT_THROW(aca_marginalize(model, inst.alphas, {"cov0", "cov0"}, {{0.0, 0.0}}), Error);
    EXPECT_THROW(aca_marginalize(model, inst.alphas, {"cov0"}, {{0.0, 1.0}}), ShapeError);
}

TEST(Fit, RestartsKeepTheBestStart)
{
    std::mt19937_64 rng(91);
    auto inst = oracle::random_instance(rng, 12, 2);
    AcaFitConfig cfg;
    cfg.components = 1;
    cfg.default_lambda = 0.2;
    cfg.seed = 4;
    const auto single = aca_fit(inst.x, inst.alphas, inst.specs, cfg);
    cfg.restarts = 6;
    const auto multi = aca_fit(inst.x, inst.alphas, inst.specs, cfg);
    double expected = single.report.objective_trace.back();
    for (std::size_t r = 1; r < 6; ++r) {
        auto one = cfg;
        one.restarts = 1;
        one.seed = derive_seed(4, r);
        expected = std::min(expected, aca_fit(inst.x, inst.alphas, inst.specs, one).report.objective_trace.back());
    }
    EXPECT_EQ(multi.report.objective_trace.back(), expected);
    EXPECT_LE(multi.report.objective_trace.back(), single.report.objective_trace.back());
    cfg.restarts = 0;
    EXPECT_THROW(aca_fit(inst.x, inst.alphas, inst.specs, cfg), Error);
}
