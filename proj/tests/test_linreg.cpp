#include "oracles.hpp"

#include <aca/linreg.hpp>

#include <gtest/gtest.h>

using namespace aca;

namespace {

const CovariateSpec real(const std::string& name) { return {name, RealGrid{{0, 100}, "g"}}; }

Dataset random_dataset(std::mt19937_64& rng, std::size_t m, bool with_category)
{
    std::uniform_real_distribution<double> u(0, 100);
    std::normal_distribution<double> g(0, 3);
    std::vector<Covariate> covs{{real("carbs"), {}}, {real("fat"), {}}, {real("fiber"), {}}};
    Covariate cat{CovariateSpec{"meal_type", Categorical{{"breakfast", "lunch", "dinner"}}}, {}};
    std::vector<double> x;
    for (std::size_t i = 0; i < m; ++i) {
        for (auto& c : covs) c.values.push_back(u(rng));
        cat.values.push_back(static_cast<double>(i % 3));
        x.push_back(1.5 * covs[0].values.back() - 0.4 * covs[1].values.back() + 7.0 * (i % 3) + g(rng));
    }
    if (with_category) covs.push_back(cat);
    return Dataset(x, covs, "random");
}

Eigen::MatrixXd design_of(const Dataset& data)
{
    std::size_t p = 1;
    for (const auto& c : data.covariates()) p += c.spec.is_categorical() ? c.spec.size() - 1 : 1;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(data.m()), static_cast<Eigen::Index>(p));
    for (std::size_t i = 0; i < data.m(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        a(r, 0) = 1.0;
        Eigen::Index col = 1;
        for (const auto& c : data.covariates()) {
            if (c.spec.is_categorical()) {
                for (std::size_t j = 1; j < c.spec.size(); ++j, ++col) a(r, col) = c.values[i] == static_cast<double>(j);
            } else {
                a(r, col++) = c.values[i];
            }
        }
    }
    return a;
}

std::vector<double> coefficients_of(const LinearModel& model)
{
    std::vector<double> out{model.intercept};
    for (const auto& t : model.terms) out.insert(out.end(), t.coefficients.begin(), t.coefficients.end());
    return out;
}

} // namespace

TEST(Ols, TwoPointLine)
{
    const Dataset d({1, 3}, {Covariate{real("carbs"), {0, 1}}});
    const auto m = ols_fit(d);
    EXPECT_NEAR(m.intercept, 1.0, 1e-12);
    EXPECT_NEAR(m.terms[0].coefficients[0], 2.0, 1e-12);
    EXPECT_NEAR(lm_predict(m, {0.5}), 2.0, 1e-12);
}

TEST(Ols, ConstantResponse)
{
    std::mt19937_64 rng(1);
    auto d = random_dataset(rng, 30, true);
    const Dataset flat(std::vector<double>(30, 12.5), d.covariates(), "flat");
    const auto m = ols_fit(flat);
    EXPECT_NEAR(m.intercept, 12.5, 1e-9);
    for (const auto& t : m.terms) {
        for (double c : t.coefficients) EXPECT_NEAR(c, 0.0, 1e-10);
    }
}

TEST(Ols, MatchesNormalEquations)
{
    std::mt19937_64 rng(2);
    for (int t = 0; t < 10; ++t) {
        const auto d = random_dataset(rng, 40 + 5 * t, t % 2 == 0);
        const auto m = ols_fit(d);
        const auto a = design_of(d);
        const Eigen::Map<const Eigen::VectorXd> x(d.x().data(), static_cast<Eigen::Index>(d.m()));
        const Eigen::VectorXd beta = oracle::normal_equations(a, x);
        const auto got = coefficients_of(m);
        ASSERT_EQ(got.size(), static_cast<std::size_t>(beta.size()));
        for (std::size_t j = 0; j < got.size(); ++j)
            EXPECT_NEAR(got[j], beta(static_cast<Eigen::Index>(j)), 1e-8 * std::max(1.0, std::abs(beta(static_cast<Eigen::Index>(j)))));
        EXPECT_FALSE(m.rank_deficient);

        const auto pred = lm_predict_samples(m, d);
        double residual_sum = 0.0;
        for (std::size_t i = 0; i < d.m(); ++i) residual_sum += d.x()[i] - pred[i];
        EXPECT_LT(std::abs(residual_sum), 1e-8);
    }
}

TEST(Ols, PredictionAtMeansIsMeanResponse)
{
    std::mt19937_64 rng(3);
    const auto d = random_dataset(rng, 50, false);
    const auto m = ols_fit(d);
    std::vector<double> means;
    for (const auto& c : d.covariates()) means.push_back(std::accumulate(c.values.begin(), c.values.end(), 0.0) / 50.0);
    const double mean_x = std::accumulate(d.x().begin(), d.x().end(), 0.0) / 50.0;
    EXPECT_NEAR(lm_predict(m, means), mean_x, 1e-9);
}

TEST(LinearMarginal, AllAndNoCovariates)
{
    std::mt19937_64 rng(4);
    const auto d = random_dataset(rng, 45, true);
    const auto m = ols_fit(d);
    std::vector<std::vector<double>> pts{{10, 20, 30, 1}, {90, 5, 50, 2}, {0, 0, 0, 0}};
    const auto all = lm_marginalize(m, {"carbs", "fat", "fiber", "meal_type"}, pts);
    for (std::size_t p = 0; p < pts.size(); ++p) EXPECT_NEAR(all.mean[p], lm_predict(m, pts[p]), 1e-12);

    const auto none = lm_marginalize(m, {}, {{}});
    const double mean_x = std::accumulate(d.x().begin(), d.x().end(), 0.0) / 45.0;
    EXPECT_NEAR(none.mean[0], mean_x, 1e-9);
}

TEST(LinearMarginal, HandComputedFat)
{
    // x = 2 + 3 carbs - fat fits exactly.
    const std::vector<double> carbs{0, 1, 2, 3, 4};
    const std::vector<double> fat{1, 0, 3, 1, 5};
    std::vector<double> x;
    for (std::size_t i = 0; i < 5; ++i) x.push_back(2 + 3 * carbs[i] - fat[i]);
    const Dataset d(x, {Covariate{real("carbs"), carbs}, Covariate{real("fat"), fat}});
    const auto m = ols_fit(d);
    // Marginal over fat: 2 + 3 mean(carbs) - f = 8 - f.
    const auto c = lm_marginalize(m, {"fat"}, points_1d({0, 2, 10}));
    EXPECT_NEAR(c.mean[0], 8.0, 1e-10);
    EXPECT_NEAR(c.mean[1], 6.0, 1e-10);
    EXPECT_NEAR(c.mean[2], -2.0, 1e-10);
}

TEST(LinearMarginal, AffineAlongCovariate)
{
    std::mt19937_64 rng(5);
    const auto d = random_dataset(rng, 40, false);
    const auto m = ols_fit(d);
    const auto c = lm_marginalize(m, {"carbs"}, points_1d({0, 25, 50, 75, 100}));
    for (std::size_t p = 1; p + 1 < c.mean.size(); ++p)
        EXPECT_NEAR(c.mean[p + 1] - c.mean[p], c.mean[p] - c.mean[p - 1], 1e-9);
    EXPECT_NEAR(c.mean[1] - c.mean[0], 25 * m.terms[0].coefficients[0], 1e-9);
}

TEST(Ols, ShiftMovesOnlyIntercept)
{
    std::mt19937_64 rng(6);
    const auto d = random_dataset(rng, 40, true);
    auto shifted_x = d.x();
    for (auto& v : shifted_x) v += 17.0;
    const auto a = ols_fit(d);
    const auto b = ols_fit(Dataset(shifted_x, d.covariates(), "shifted"));
    EXPECT_NEAR(b.intercept - a.intercept, 17.0, 1e-8);
    const auto ca = coefficients_of(a);
    const auto cb = coefficients_of(b);
    for (std::size_t j = 1; j < ca.size(); ++j) EXPECT_NEAR(ca[j], cb[j], 1e-9);
}

TEST(Ols, RankDeficientDesign)
{
    const std::vector<double> z{1, 2, 3, 4};
    const Dataset d({2, 4, 6, 8}, {Covariate{real("a"), z}, Covariate{real("b"), z}});
    const auto m = ols_fit(d);
    EXPECT_TRUE(m.rank_deficient);
    EXPECT_NEAR(m.terms[0].coefficients[0], m.terms[1].coefficients[0], 1e-10);
    EXPECT_NEAR(lm_predict(m, {2.5, 2.5}), 5.0, 1e-9);
}

TEST(Ols, CategoricalOneHotAgainstReference)
{
    const CovariateSpec cat{"meal_type", Categorical{{"b", "l", "d"}}};
    const Dataset d({1, 3, 10, 12, 20, 22}, {Covariate{cat, {0, 0, 1, 1, 2, 2}}});
    const auto m = ols_fit(d);
    EXPECT_NEAR(m.intercept, 2.0, 1e-10);
    EXPECT_NEAR(m.terms[0].coefficients[0], 9.0, 1e-10);
    EXPECT_NEAR(m.terms[0].coefficients[1], 19.0, 1e-10);
    EXPECT_NEAR(lm_predict(m, {2}), 21.0, 1e-10);
    EXPECT_THROW(lm_predict(m, {3}), Error);
    EXPECT_THROW(lm_predict(m, {0, 1}), ShapeError);
}

TEST(Ols, MissingValuesUseColumnMeans)
{
    const Dataset d({1, 2, 3}, {Covariate{real("a"), {0, missing_value, 2}}});
    const auto m = ols_fit(d);
    EXPECT_NEAR(m.terms[0].column_means[0], 1.0, 1e-15);
    EXPECT_NEAR(lm_predict_samples(m, d)[1], lm_predict(m, {1.0}), 1e-12);
}
