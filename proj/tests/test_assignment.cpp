#include <aca/assignment.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace aca;

namespace {

Eigen::RowVectorXd grid_of(double z, const std::vector<double>& nodes)
{
    Eigen::RowVectorXd row(static_cast<Eigen::Index>(nodes.size()));
    grid_row(z, nodes, row);
    return row;
}

void expect_row_stochastic(const Eigen::MatrixXd& a, double tol = 1e-12)
{
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        EXPECT_NEAR(a.row(i).sum(), 1.0, tol);
        EXPECT_GE(a.row(i).minCoeff(), 0.0);
    }
}

} // namespace

TEST(Simplex, ProjectionProperties)
{
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0, 2);
    for (int t = 0; t < 200; ++t) {
        Eigen::VectorXd v(5);
        for (auto& e : v) e = g(rng);
        const auto p = project_to_simplex(v);
        EXPECT_NEAR(p.sum(), 1.0, 1e-12);
        EXPECT_GE(p.minCoeff(), 0.0);
        // Optimality: <v - p, q - p> <= 0 for simplex vertices q.
        for (Eigen::Index j = 0; j < 5; ++j) {
            Eigen::VectorXd q = Eigen::VectorXd::Zero(5);
            q(j) = 1;
            EXPECT_LE((v - p).dot(q - p), 1e-10);
        }
    }
    Eigen::VectorXd inside(3);
    inside << 0.2, 0.3, 0.5;
    EXPECT_TRUE(project_to_simplex(inside).isApprox(inside, 1e-15));
}

TEST(Categorical, Examples)
{
    const std::vector<std::string> levels{"breakfast", "lunch", "dinner"};
    const auto a = categorical_assign(std::vector<std::optional<std::string>>{"lunch"}, levels);
    EXPECT_EQ(a.entries.row(0), (Eigen::RowVector3d(0, 1, 0)));

    const auto single = categorical_assign(std::vector<double>{0, 0, 0, 0}, {"only"});
    EXPECT_TRUE(single.entries.isOnes());

    const auto miss = categorical_assign(std::vector<std::optional<std::string>>{std::nullopt},
                                         {"breakfast", "lunch", "dinner", "other"});
    EXPECT_EQ(miss.entries.row(0), (Eigen::RowVector4d(0.25, 0.25, 0.25, 0.25)));

    EXPECT_THROW(categorical_assign(std::vector<std::optional<std::string>>{"brunch"}, levels), Error);
    EXPECT_THROW(categorical_assign(std::vector<double>{3}, levels), Error);
}

TEST(Grid, Examples)
{
    const std::vector<double> nodes{0, 50, 100};
    EXPECT_EQ(grid_of(25, nodes), (Eigen::RowVector3d(0.5, 0.5, 0)));
    EXPECT_EQ(grid_of(50, nodes), (Eigen::RowVector3d(0, 1, 0)));
    EXPECT_EQ(grid_of(120, nodes), (Eigen::RowVector3d(0, 0, 1)));
    EXPECT_EQ(grid_of(-3, nodes), (Eigen::RowVector3d(1, 0, 0)));
    const auto miss = grid_of(missing_value, nodes);
    EXPECT_NEAR(miss(0), 1.0 / 3, 1e-15);
    EXPECT_NEAR(miss.sum(), 1.0, 1e-15);
    EXPECT_THROW(grid_assign({1}, {0, 0, 1}), Error);
    EXPECT_THROW(grid_assign({1}, {0, 2, 1}), Error);
}

TEST(Grid, RandomPropertiesHold)
{
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-50, 150);
    std::uniform_int_distribution<int> count(2, 15);
    for (int t = 0; t < 1000; ++t) {
        std::vector<double> nodes(static_cast<std::size_t>(count(rng)));
        for (auto& v : nodes) v = u(rng);
        std::sort(nodes.begin(), nodes.end());
        nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
        if (nodes.size() < 2) continue;
        const double z = u(rng);
        const auto row = grid_of(z, nodes);
        EXPECT_NEAR(row.sum(), 1.0, 1e-12);
        EXPECT_GE(row.minCoeff(), 0.0);
        std::vector<Eigen::Index> nz;
        for (Eigen::Index j = 0; j < row.size(); ++j) {
            if (row(j) != 0.0) nz.push_back(j);
        }
        ASSERT_LE(nz.size(), 2u);
        if (nz.size() == 2) EXPECT_EQ(nz[1], nz[0] + 1);
        const Eigen::Map<const Eigen::RowVectorXd> nv(nodes.data(), static_cast<Eigen::Index>(nodes.size()));
        EXPECT_NEAR(row.dot(nv), std::clamp(z, nodes.front(), nodes.back()), 1e-12 * std::max(1.0, std::abs(z)));
    }
}

TEST(Grid, MatrixForm)
{
    const auto a = grid_assign({0, 10, 25, missing_value, 200}, {0, 20, 40});
    EXPECT_EQ(a.rows(), 5);
    EXPECT_EQ(a.cols(), 3);
    expect_row_stochastic(a.entries);
    EXPECT_NEAR(a.entries(1, 0), 0.5, 1e-15);
    EXPECT_EQ(a.column_labels, (std::vector<std::string>{"0", "20", "40"}));
}

TEST(Prototypal, SinglePoint)
{
    Eigen::MatrixXd pts(1, 2);
    pts << 3, -1;
    const auto r = prototypal_assign(pts, 1, 0.5, 0);
    EXPECT_TRUE(r.prototypes.prototypes.isApprox(pts));
    EXPECT_EQ(r.assignment.entries(0, 0), 1.0);
    EXPECT_NEAR(r.objective_trace.back(), 0.0, 1e-15);
}

TEST(Prototypal, Errors)
{
    Eigen::MatrixXd pts = Eigen::MatrixXd::Random(3, 1);
    EXPECT_THROW(prototypal_assign(pts, 4, 0.1, 0), Error);
    EXPECT_THROW(prototypal_assign(pts, 0, 0.1, 0), Error);
    EXPECT_THROW(prototypal_assign(pts, 2, 0.1, 0, {0, 200, 1e-8}), Error);
    EXPECT_THROW(prototypal_assign(pts, 2, 0.1, 0, {10, 0, 1e-8}), Error);
    EXPECT_THROW(prototypal_assign(pts, 2, -1, 0), Error);
}

TEST(Prototypal, TwoClustersMatchBruteForce)
{
    Eigen::MatrixXd pts(6, 1);
    pts << 0.0, 0.2, 0.4, 10.0, 10.2, 10.4;
    const double penalty = 0.5;
    const auto r = prototypal_assign(pts, 2, penalty, 4);

    // Brute force: 1-D prototypes are any values in the data hull; assignments
    // per point on a fine grid of the 2-simplex.
    double best = std::numeric_limits<double>::infinity();
    for (double y1 = 0.0; y1 <= 10.4 + 1e-9; y1 += 0.05) {
        for (double y2 = y1; y2 <= 10.4 + 1e-9; y2 += 0.05) {
            double total = 0.0;
            for (Eigen::Index i = 0; i < 6; ++i) {
                const double z = pts(i, 0);
                double row_best = std::numeric_limits<double>::infinity();
                for (int s = 0; s <= 1000; ++s) {
                    const double a = s / 1000.0;
                    const double rec = a * y1 + (1 - a) * y2;
                    const double v = (z - rec) * (z - rec) + penalty * (a * (z - y1) * (z - y1) + (1 - a) * (z - y2) * (z - y2));
                    row_best = std::min(row_best, v);
                }
                total += row_best;
            }
            best = std::min(best, total);
        }
    }
    EXPECT_LE(r.objective_trace.back(), best + 1e-6);

    const auto& a = r.assignment.entries;
    const auto& y = r.prototypes.prototypes;
    const Eigen::Index low = y(0, 0) < y(1, 0) ? 0 : 1;
    for (Eigen::Index i = 0; i < 6; ++i) EXPECT_GE(a(i, i < 3 ? low : 1 - low), 0.99);
}

TEST(Prototypal, WeightsAndDescentInvariants)
{
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g(0, 1);
    Eigen::MatrixXd pts(25, 2);
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
        pts(i, 0) = g(rng) + (i % 3) * 4.0;
        pts(i, 1) = g(rng);
    }
    const auto r = prototypal_assign(pts, 3, 0.3, 11);
    const auto& beta = r.prototypes.weights;
    for (Eigen::Index j = 0; j < beta.cols(); ++j) {
        EXPECT_NEAR(beta.col(j).sum(), 1.0, 1e-12);
        EXPECT_GE(beta.col(j).minCoeff(), 0.0);
    }
    EXPECT_LE((r.prototypes.prototypes - beta.transpose() * pts).cwiseAbs().maxCoeff(), 1e-10);
    expect_row_stochastic(r.assignment.entries);
    for (std::size_t t = 1; t < r.objective_trace.size(); ++t)
        EXPECT_LE(r.objective_trace[t], r.objective_trace[t - 1] + 1e-10);

    const auto again = prototypal_assign(pts, 3, 0.3, 11);
    EXPECT_EQ(again.prototypes.prototypes, r.prototypes.prototypes);
    EXPECT_EQ(again.assignment.entries, r.assignment.entries);
}

TEST(Prototypal, LocalityShrinksWithPenalty)
{
    Eigen::MatrixXd pts(10, 1);
    pts << 0.0, 1.0, 1.5, 3.0, 4.2, 5.0, 6.1, 7.7, 8.0, 9.5;
    double previous = std::numeric_limits<double>::infinity();
    for (double lp : {0.0, 0.1, 0.5, 1.0, 5.0, 50.0}) {
        const auto r = prototypal_assign(pts, 3, lp, 2);
        const double loc = prototypal_locality(pts, r.assignment.entries, r.prototypes.prototypes);
        EXPECT_LE(loc, previous + 1e-8) << "penalty " << lp;
        previous = loc;
    }
}

TEST(Prototypal, ResolvedCovariateEncodes)
{
    Covariate c{CovariateSpec{"p", Prototyped{3, 0.2, {}, "g"}}, {0, 1, 2, 8, 9, 10, 20, 21, missing_value}};
    resolve_prototypes(c, 5);
    const auto& p = std::get<Prototyped>(c.spec.kind).prototypes;
    ASSERT_EQ(p.size(), 3u);
    EXPECT_TRUE(std::is_sorted(p.begin(), p.end()));
    const auto a = assign(c.spec, c.values);
    expect_row_stochastic(a.entries, 1e-12);
    EXPECT_NEAR(a.entries(8, 0), 1.0 / 3, 1e-15);
}

TEST(Encode, SpecDispatch)
{
    const CovariateSpec cat{"m", Categorical{{"a", "b"}}};
    EXPECT_EQ(encode_row(cat, 1), (Eigen::RowVector2d(0, 1)));
    EXPECT_THROW(encode_row(cat, 2), Error);
    const CovariateSpec grid{"g", RealGrid{{0, 10}, "g"}};
    EXPECT_EQ(encode_row(grid, 2.5), (Eigen::RowVector2d(0.75, 0.25)));
    const CovariateSpec unresolved{"p", Prototyped{2, 0.0, {}, ""}};
    EXPECT_THROW(encode_row(unresolved, 1.0), Error);
}
