#pragma once

#include <aca/dataset.hpp>
#include <aca/model.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

namespace aca {

/// Contribution of one covariate to the linear predictor. Real covariates
/// carry one slope; categorical ones carry a coefficient per non-reference
/// level (level 0 is the reference).
struct LinearTerm
{
    std::string covariate;
    bool categorical = false;
    std::vector<double> coefficients;
    /// Training mean of each design column of this term (level frequencies
    /// for categorical terms).
    std::vector<double> column_means;
};

struct LinearModel
{
    double intercept = 0.0;
    std::vector<LinearTerm> terms;
    std::vector<CovariateSpec> specs;
    /// The design was rank deficient; coefficients are the minimum-norm solution.
    bool rank_deficient = false;

    std::size_t index_of(std::string_view name) const
    {
        for (std::size_t l = 0; l < terms.size(); ++l) {
            if (terms[l].covariate == name) return l;
        }
        throw Error("unknown covariate '" + std::string(name) + "'");
    }
};

namespace detail {

/// Design columns of one covariate value; NaN is replaced by the column means.
inline void linear_columns(const LinearTerm& term, std::size_t levels, double z, std::vector<double>& out)
{
    if (!term.categorical) {
        out.push_back(is_missing(z) ? term.column_means.at(0) : z);
        return;
    }
    if (is_missing(z)) {
        out.insert(out.end(), term.column_means.begin(), term.column_means.end());
        return;
    }
    if (z < 0 || z >= static_cast<double>(levels) || z != std::floor(z))
        throw Error("covariate '" + term.covariate + "': level index out of range");
    for (std::size_t j = 1; j < levels; ++j) out.push_back(static_cast<double>(j) == z ? 1.0 : 0.0);
}

inline double dot_term(const LinearTerm& term, const std::vector<double>& cols)
{
    double s = 0.0;
    for (std::size_t j = 0; j < cols.size(); ++j) s += term.coefficients[j] * cols[j];
    return s;
}

} // namespace detail

/// Ordinary least squares with intercept. Categorical covariates enter as
/// one-hot columns without the first level; missing values are mean-imputed.
/// Solved by complete orthogonal decomposition, which yields the
/// minimum-norm solution when the design is rank deficient.
inline LinearModel ols_fit(const Dataset& data)
{
    const auto m = data.m();
    if (m == 0) throw Error("ols_fit: no observations");

    LinearModel model;
    model.specs = data.specs();
    std::size_t p = 1;
    for (const auto& c : data.covariates()) {
        LinearTerm term;
        term.covariate = c.spec.name;
        term.categorical = c.spec.is_categorical();
        if (term.categorical) {
            const auto levels = c.spec.size();
            std::vector<double> counts(levels, 0.0);
            std::size_t present = 0;
            for (double v : c.values) {
                if (is_missing(v)) continue;
                counts[static_cast<std::size_t>(v)] += 1.0;
                ++present;
            }
            for (std::size_t j = 1; j < levels; ++j)
                term.column_means.push_back(present ? counts[j] / static_cast<double>(present) : 0.0);
        } else {
            double sum = 0.0;
            std::size_t present = 0;
            for (double v : c.values) {
                if (is_missing(v)) continue;
                sum += v;
                ++present;
            }
            term.column_means.push_back(present ? sum / static_cast<double>(present) : 0.0);
        }
        term.coefficients.assign(term.column_means.size(), 0.0);
        p += term.column_means.size();
        model.terms.push_back(std::move(term));
    }

    Eigen::MatrixXd design(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(p));
    std::vector<double> row;
    for (std::size_t i = 0; i < m; ++i) {
        row.assign(1, 1.0);
        for (std::size_t l = 0; l < data.L(); ++l)
            detail::linear_columns(model.terms[l], data.covariate(l).spec.size(), data.covariate(l).values[i], row);
        design.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(row.data(), static_cast<Eigen::Index>(p));
    }

    // Imputed columns use the mean of present values, so refresh stored means
    // to the design means that marginalization averages over.
    const Eigen::RowVectorXd design_means = design.colwise().mean();

    const Eigen::Map<const Eigen::VectorXd> x(data.x().data(), static_cast<Eigen::Index>(m));
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(design);
    const Eigen::VectorXd beta = cod.solve(x);
    model.rank_deficient = cod.rank() < static_cast<Eigen::Index>(p);

    model.intercept = beta(0);
    Eigen::Index col = 1;
    for (auto& term : model.terms) {
        for (std::size_t j = 0; j < term.coefficients.size(); ++j, ++col) {
            term.coefficients[j] = beta(col);
            term.column_means[j] = design_means(col);
        }
    }
    return model;
}

/// beta_0 + sum_l beta_l z_l. Categorical entries are level indices.
inline double lm_predict(const LinearModel& model, const std::vector<double>& z)
{
    if (z.size() != model.terms.size())
        throw ShapeError("lm_predict: expected " + std::to_string(model.terms.size()) + " covariate values");
    double out = model.intercept;
    std::vector<double> cols;
    for (std::size_t l = 0; l < model.terms.size(); ++l) {
        if (is_missing(z[l])) throw Error("lm_predict: missing value for covariate '" + model.terms[l].covariate + "'");
        cols.clear();
        detail::linear_columns(model.terms[l], model.specs[l].size(), z[l], cols);
        out += detail::dot_term(model.terms[l], cols);
    }
    return out;
}

/// Fitted values at every training row, with mean imputation for missing entries.
inline std::vector<double> lm_predict_samples(const LinearModel& model, const Dataset& data)
{
    std::vector<double> out(data.m(), model.intercept);
    std::vector<double> cols;
    for (std::size_t l = 0; l < model.terms.size(); ++l) {
        const auto& values = data.covariate(data.index_of(model.terms[l].covariate)).values;
        for (std::size_t i = 0; i < data.m(); ++i) {
            cols.clear();
            detail::linear_columns(model.terms[l], model.specs[l].size(), values[i], cols);
            out[i] += detail::dot_term(model.terms[l], cols);
        }
    }
    return out;
}

/// beta_0 + sum_{h not in H} beta_h mean(z_h) + sum_{h in H} beta_h z_h.
/// H may be empty, in which case every eval point (of dimension 0) maps to the
/// sample mean of the response.
inline MarginalCurve lm_marginalize(const LinearModel& model, const std::vector<std::string>& H,
                                    const std::vector<std::vector<double>>& eval_points)
{
    std::vector<std::size_t> in_h;
    for (const auto& name : H) {
        const auto l = model.index_of(name);
        if (std::find(in_h.begin(), in_h.end(), l) != in_h.end())
            throw Error("lm_marginalize: covariate '" + name + "' listed twice");
        in_h.push_back(l);
    }
    double base = model.intercept;
    for (std::size_t l = 0; l < model.terms.size(); ++l) {
        if (std::find(in_h.begin(), in_h.end(), l) == in_h.end())
            base += detail::dot_term(model.terms[l], model.terms[l].column_means);
    }

    MarginalCurve curve{H, eval_points, {}};
    curve.mean.reserve(eval_points.size());
    std::vector<double> cols;
    for (const auto& point : eval_points) {
        if (point.size() != H.size()) throw ShapeError("lm_marginalize: eval point has wrong dimension");
        double v = base;
        for (std::size_t t = 0; t < in_h.size(); ++t) {
            cols.clear();
            detail::linear_columns(model.terms[in_h[t]], model.specs[in_h[t]].size(), point[t], cols);
            v += detail::dot_term(model.terms[in_h[t]], cols);
        }
        curve.mean.push_back(v);
    }
    return curve;
}

} // namespace aca
