#pragma once

#include <aca/assignment.hpp>
#include <aca/dataset.hpp>
#include <aca/random.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace aca {

/// V(l): one row per category/node/prototype, one column per component.
using FactorMatrix = Eigen::MatrixXd;

/// Symmetric PSD smoothness (or variance) penalty C^l.
using PenaltyMatrix = Eigen::MatrixXd;

struct AcaFitConfig
{
    std::size_t components = 2;
    /// Per-covariate penalty strengths; empty means default_lambda everywhere.
    std::vector<double> lambda;
    double default_lambda = 0.01;
    std::size_t max_sweeps = 500;
    /// Stop when |f_prev - f| <= tol * |f_prev|.
    double tol = 1e-8;
    std::uint64_t seed = 0;
    /// Factors start uniform on [-init_scale, init_scale].
    double init_scale = 0.1;
    /// Derivative order penalized on grids and prototypes (1 or 2).
    int roughness_order = 1;
    /// Independent random starts; the fit with the lowest final objective is
    /// kept. Start 0 uses `seed`, start r uses derive_seed(seed, r).
    std::size_t restarts = 1;

    double lambda_for(std::size_t l) const { return lambda.empty() ? default_lambda : lambda.at(l); }

    void validate(std::size_t L) const
    {
        if (components < 1) throw Error("aca: components must be >= 1");
        if (max_sweeps < 1) throw Error("aca: max_sweeps must be >= 1");
        if (restarts < 1) throw Error("aca: restarts must be >= 1");
        if (!(tol > 0.0)) throw Error("aca: tol must be > 0");
        if (!(init_scale > 0.0) || !std::isfinite(init_scale)) throw Error("aca: init_scale must be > 0");
        if (roughness_order != 1 && roughness_order != 2) throw Error("aca: roughness order must be 1 or 2");
        if (!lambda.empty() && lambda.size() != L)
            throw Error("aca: expected " + std::to_string(L) + " penalty strengths, got " + std::to_string(lambda.size()));
        for (std::size_t l = 0; l < L; ++l) {
            const double v = lambda_for(l);
            if (!(v >= 0.0) || !std::isfinite(v)) throw Error("aca: penalty strengths must be finite and >= 0");
        }
    }
};

struct AcaModel
{
    std::vector<CovariateSpec> specs;
    std::vector<FactorMatrix> factors;
    std::vector<PenaltyMatrix> penalties;
    AcaFitConfig config;

    std::size_t L() const noexcept { return factors.size(); }
    std::size_t d() const noexcept { return factors.empty() ? 0 : static_cast<std::size_t>(factors.front().cols()); }

    std::size_t index_of(std::string_view name) const
    {
        for (std::size_t l = 0; l < specs.size(); ++l) {
            if (specs[l].name == name) return l;
        }
        throw Error("unknown covariate '" + std::string(name) + "'");
    }
};

struct FitReport
{
    /// Objective at initialization followed by the value after every sweep.
    std::vector<double> objective_trace;
    std::size_t sweeps_run = 0;
    bool converged = false;
    /// Block solves that fell back to the minimum-norm solution.
    std::size_t singular_solves = 0;
    /// Block updates rejected because they would have raised the objective.
    std::size_t rejected_updates = 0;
};

struct AcaFit
{
    AcaModel model;
    FitReport report;
};

// ---------------------------------------------------------------------------
// Penalties
// ---------------------------------------------------------------------------

namespace detail {

/// (n-2) x n second-difference operator on (possibly non-uniform) nodes,
/// approximating the second derivative at interior nodes.
inline Eigen::MatrixXd second_difference(const std::vector<double>& nodes)
{
    const auto n = static_cast<Eigen::Index>(nodes.size());
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n - 2, n);
    for (Eigen::Index j = 1; j + 1 < n; ++j) {
        const double h1 = nodes[static_cast<std::size_t>(j)] - nodes[static_cast<std::size_t>(j - 1)];
        const double h2 = nodes[static_cast<std::size_t>(j + 1)] - nodes[static_cast<std::size_t>(j)];
        d(j - 1, j - 1) = 2.0 / (h1 * (h1 + h2));
        d(j - 1, j) = -2.0 / (h1 * h2);
        d(j - 1, j + 1) = 2.0 / (h2 * (h1 + h2));
    }
    return d;
}

inline Eigen::MatrixXd first_difference(const std::vector<double>& nodes)
{
    const auto n = static_cast<Eigen::Index>(nodes.size());
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n - 1, n);
    for (Eigen::Index j = 0; j + 1 < n; ++j) {
        const double h = nodes[static_cast<std::size_t>(j + 1)] - nodes[static_cast<std::size_t>(j)];
        d(j, j) = -1.0 / h;
        d(j, j + 1) = 1.0 / h;
    }
    return d;
}

inline PenaltyMatrix roughness_penalty(std::vector<double> nodes, int order)
{
    const auto n = static_cast<Eigen::Index>(nodes.size());
    if (n < 2) return PenaltyMatrix::Zero(n, n);
    // Coincident prototypes have no usable spacing; fall back to index spacing.
    for (std::size_t j = 1; j < nodes.size(); ++j) {
        if (!(nodes[j] > nodes[j - 1])) {
            for (std::size_t k = 0; k < nodes.size(); ++k) nodes[k] = static_cast<double>(k);
            break;
        }
    }
    const Eigen::MatrixXd d = (order == 2 && n >= 3) ? second_difference(nodes) : first_difference(nodes);
    PenaltyMatrix c = d.transpose() * d;
    return 0.5 * (c + c.transpose());
}

} // namespace detail

/// Grids and prototypes: D^T D with D the node-spacing-scaled difference
/// operator of the given order (first differences when there are fewer than
/// three nodes). Categories: the centering matrix I - 11^T/J, which measures
/// the variance across levels.
inline PenaltyMatrix penalty_matrix(const CovariateSpec& spec, int roughness_order = 1)
{
    spec.validate();
    const auto n = static_cast<Eigen::Index>(spec.size());
    if (n <= 1) return PenaltyMatrix::Zero(n, n);
    if (spec.is_categorical())
        return PenaltyMatrix::Identity(n, n) - PenaltyMatrix::Constant(n, n, 1.0 / static_cast<double>(n));
    if (const auto* g = std::get_if<RealGrid>(&spec.kind)) return detail::roughness_penalty(g->nodes, roughness_order);
    const auto& p = std::get<Prototyped>(spec.kind);
    if (p.prototypes.empty()) throw Error("covariate '" + spec.name + "': prototypes not resolved");
    return detail::roughness_penalty(p.prototypes, roughness_order);
}

// ---------------------------------------------------------------------------
// Objective
// ---------------------------------------------------------------------------

namespace detail {

inline void check_shapes(const AcaModel& model, std::span<const double> x, std::span<const AssignmentMatrix> alphas)
{
    if (model.factors.empty()) throw ShapeError("aca: model has no covariates");
    if (alphas.size() != model.L())
        throw ShapeError("aca: expected " + std::to_string(model.L()) + " assignment matrices, got " +
                         std::to_string(alphas.size()));
    if (model.penalties.size() != model.L()) throw ShapeError("aca: penalty count mismatch");
    const auto d = model.factors.front().cols();
    for (std::size_t l = 0; l < model.L(); ++l) {
        if (model.factors[l].cols() != d) throw ShapeError("aca: factor column counts differ");
        if (alphas[l].rows() != static_cast<Eigen::Index>(x.size()))
            throw ShapeError("aca: assignment matrix " + std::to_string(l) + " has wrong row count");
        if (alphas[l].cols() != model.factors[l].rows())
            throw ShapeError("aca: assignment matrix " + std::to_string(l) + " has " +
                             std::to_string(alphas[l].cols()) + " columns, factor has " +
                             std::to_string(model.factors[l].rows()) + " rows");
        if (model.penalties[l].rows() != model.factors[l].rows() || model.penalties[l].cols() != model.factors[l].rows())
            throw ShapeError("aca: penalty matrix " + std::to_string(l) + " has wrong shape");
    }
}

/// Column-wise ||V(l)^k||^2 and V(l)^k' C^l V(l)^k for every block.
struct ComponentNorms
{
    Eigen::MatrixXd sq_norm;   // L x d
    Eigen::MatrixXd roughness; // L x d
};

inline ComponentNorms component_norms(const AcaModel& model)
{
    const auto L = static_cast<Eigen::Index>(model.L());
    const auto d = static_cast<Eigen::Index>(model.d());
    ComponentNorms out{Eigen::MatrixXd(L, d), Eigen::MatrixXd(L, d)};
    for (Eigen::Index l = 0; l < L; ++l) {
        const auto& v = model.factors[static_cast<std::size_t>(l)];
        const auto& c = model.penalties[static_cast<std::size_t>(l)];
        out.sq_norm.row(l) = v.colwise().squaredNorm();
        out.roughness.row(l) = (v.array() * (c * v).array()).colwise().sum();
    }
    return out;
}

inline double penalty_term(const AcaModel& model, const ComponentNorms& norms)
{
    const auto L = static_cast<Eigen::Index>(model.L());
    double total = 0.0;
    for (Eigen::Index l = 0; l < L; ++l) {
        const double lam = model.config.lambda_for(static_cast<std::size_t>(l));
        if (lam == 0.0) continue;
        for (Eigen::Index k = 0; k < norms.sq_norm.cols(); ++k) {
            double prefactor = 1.0;
            for (Eigen::Index b = 0; b < L; ++b) {
                if (b != l) prefactor *= norms.sq_norm(b, k);
            }
            total += lam * prefactor * norms.roughness(l, k);
        }
    }
    return total;
}

} // namespace detail

/// Per-sample inner sums alpha(l) V(l), an m x d matrix.
inline Eigen::MatrixXd inner_sums(const AssignmentMatrix& alpha, const FactorMatrix& factor)
{
    return alpha.entries * factor;
}

/// Fitted mean at every sample: sum_k prod_l (alpha(l) V(l))_{ik}.
inline Eigen::VectorXd aca_predict_samples(const AcaModel& model, std::span<const AssignmentMatrix> alphas)
{
    if (alphas.size() != model.L()) throw ShapeError("aca: assignment count mismatch");
    const auto m = alphas.empty() ? 0 : alphas.front().rows();
    Eigen::MatrixXd prod = Eigen::MatrixXd::Ones(m, static_cast<Eigen::Index>(model.d()));
    for (std::size_t l = 0; l < model.L(); ++l) {
        if (alphas[l].rows() != m || alphas[l].cols() != model.factors[l].rows())
            throw ShapeError("aca: assignment matrix " + std::to_string(l) + " has wrong shape");
        prod.array() *= inner_sums(alphas[l], model.factors[l]).array();
    }
    return prod.rowwise().sum();
}

/// Data misfit plus the scale-invariant roughness penalty
/// sum_l lambda_l sum_k (prod_{b != l} ||V(b)^k||^2) V(l)^k' C^l V(l)^k.
inline double aca_objective(const AcaModel& model, std::span<const double> x, std::span<const AssignmentMatrix> alphas)
{
    detail::check_shapes(model, x, alphas);
    const Eigen::VectorXd pred = aca_predict_samples(model, alphas);
    const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
    return (xv - pred).squaredNorm() + detail::penalty_term(model, detail::component_norms(model));
}

// ---------------------------------------------------------------------------
// Block update
// ---------------------------------------------------------------------------

struct BlockSolution
{
    FactorMatrix factor;
    /// The normal equations were rank deficient; the minimum-norm solution was used.
    bool singular = false;
};

/// Exact minimizer of the objective over V(l) with every other block fixed.
///
/// With w_ik = prod_{b != l} (alpha(b) V(b))_{ik} the data term is least squares
/// in vec(V(l)) with design rows w_ik alpha(l)_ij. The penalty contributes, per
/// component k, a_k C^l from block l's own term and c_k I from every other
/// block's term (their prefactors contain ||V(l)^k||^2):
///   a_k = lambda_l prod_{b != l} ||V(b)^k||^2
///   c_k = sum_{b != l} lambda_b (V(b)^k' C^b V(b)^k) prod_{b' != l, b} ||V(b')^k||^2
inline BlockSolution solve_block(std::size_t l, const AcaModel& model, std::span<const double> x,
                                 std::span<const AssignmentMatrix> alphas)
{
    detail::check_shapes(model, x, alphas);
    const auto m = static_cast<Eigen::Index>(x.size());
    const auto L = static_cast<Eigen::Index>(model.L());
    const auto d = static_cast<Eigen::Index>(model.d());
    const auto J = model.factors[l].rows();
    const auto li = static_cast<Eigen::Index>(l);
    const auto& alpha = alphas[l].entries;

    Eigen::MatrixXd w = Eigen::MatrixXd::Ones(m, d);
    for (std::size_t b = 0; b < model.L(); ++b) {
        if (b != l) w.array() *= inner_sums(alphas[b], model.factors[b]).array();
    }

    // Normal equations in vec(V(l)), index j + k*J. Assignment rows are sparse
    // for grids and categories, so accumulate per sample over nonzeros only.
    const Eigen::Index n = J * d;
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    std::vector<Eigen::Index> nz_idx;
    std::vector<double> nz_val;
    for (Eigen::Index i = 0; i < m; ++i) {
        nz_idx.clear();
        nz_val.clear();
        for (Eigen::Index k = 0; k < d; ++k) {
            const double wk = w(i, k);
            if (wk == 0.0) continue;
            for (Eigen::Index j = 0; j < J; ++j) {
                const double a = alpha(i, j);
                if (a == 0.0) continue;
                nz_idx.push_back(j + k * J);
                nz_val.push_back(wk * a);
            }
        }
        const double xi = x[static_cast<std::size_t>(i)];
        for (std::size_t p = 0; p < nz_idx.size(); ++p) {
            rhs(nz_idx[p]) += nz_val[p] * xi;
            for (std::size_t q = 0; q <= p; ++q) hess(nz_idx[p], nz_idx[q]) += nz_val[p] * nz_val[q];
        }
    }

    const auto norms = detail::component_norms(model);
    const auto& c_l = model.penalties[l];
    for (Eigen::Index k = 0; k < d; ++k) {
        double own = 0.0;
        const double lam_l = model.config.lambda_for(l);
        if (lam_l != 0.0) {
            own = lam_l;
            for (Eigen::Index b = 0; b < L; ++b) {
                if (b != li) own *= norms.sq_norm(b, k);
            }
        }
        double ridge = 0.0;
        for (Eigen::Index b = 0; b < L; ++b) {
            const double lam_b = model.config.lambda_for(static_cast<std::size_t>(b));
            if (b == li || lam_b == 0.0) continue;
            double term = lam_b * norms.roughness(b, k);
            for (Eigen::Index bb = 0; bb < L; ++bb) {
                if (bb != li && bb != b) term *= norms.sq_norm(bb, k);
            }
            ridge += term;
        }
        auto block = hess.block(k * J, k * J, J, J);
        if (own != 0.0) block.triangularView<Eigen::Lower>() += own * c_l;
        if (ridge != 0.0) block.diagonal().array() += ridge;
    }
    const Eigen::MatrixXd full = hess.selfadjointView<Eigen::Lower>();
    hess = full;

    BlockSolution out;
    Eigen::VectorXd sol;
    const double scale = hess.diagonal().cwiseAbs().maxCoeff();
    if (scale == 0.0) {
        sol = Eigen::VectorXd::Zero(n);
        out.singular = true;
    } else {
        Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
        const auto diag = ldlt.vectorD().cwiseAbs();
        const double cutoff = scale * static_cast<double>(n) * std::numeric_limits<double>::epsilon() * 16.0;
        if (ldlt.info() == Eigen::Success && ldlt.isPositive() && diag.minCoeff() > cutoff) {
            sol = ldlt.solve(rhs);
        } else {
            // Minimum-norm solution through the pseudo-inverse.
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hess);
            const Eigen::VectorXd& ev = es.eigenvalues();
            const double tol = ev.cwiseAbs().maxCoeff() * static_cast<double>(n) * std::numeric_limits<double>::epsilon() * 16.0;
            Eigen::VectorXd coeff = es.eigenvectors().transpose() * rhs;
            for (Eigen::Index q = 0; q < n; ++q) coeff(q) = ev(q) > tol ? coeff(q) / ev(q) : 0.0;
            sol = es.eigenvectors() * coeff;
            out.singular = true;
        }
    }
    out.factor = Eigen::Map<const Eigen::MatrixXd>(sol.data(), J, d);
    return out;
}

// ---------------------------------------------------------------------------
// Fitting
// ---------------------------------------------------------------------------

namespace detail {

/// Equalizes the column norms of each component across blocks. The product of
/// the per-block scale factors is 1, so predictions and objective are unchanged.
inline void balance_components(AcaModel& model)
{
    const auto L = model.L();
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(model.d()); ++k) {
        double log_mean = 0.0;
        bool usable = true;
        std::vector<double> norms(L);
        for (std::size_t l = 0; l < L; ++l) {
            norms[l] = model.factors[l].col(k).norm();
            if (!(norms[l] > 0.0) || !std::isfinite(norms[l])) usable = false;
            else log_mean += std::log(norms[l]);
        }
        if (!usable) continue;
        const double target = std::exp(log_mean / static_cast<double>(L));
        for (std::size_t l = 0; l < L; ++l) model.factors[l].col(k) *= target / norms[l];
    }
}

/// One alternating-minimization run started from Rng(start_seed).
inline AcaFit fit_from_start(std::span<const double> x, std::span<const AssignmentMatrix> alphas,
                             const std::vector<CovariateSpec>& specs, const AcaFitConfig& config, std::uint64_t start_seed)
{
    AcaFit fit;
    auto& model = fit.model;
    model.specs = specs;
    model.config = config;
    Rng rng(start_seed);
    std::uniform_real_distribution<double> init(-config.init_scale, config.init_scale);
    const auto d = static_cast<Eigen::Index>(config.components);
    for (const auto& spec : specs) {
        const auto J = static_cast<Eigen::Index>(spec.size());
        FactorMatrix v(J, d);
        for (Eigen::Index k = 0; k < d; ++k) {
            for (Eigen::Index j = 0; j < J; ++j) v(j, k) = init(rng);
        }
        model.factors.push_back(std::move(v));
        model.penalties.push_back(penalty_matrix(spec, config.roughness_order));
    }

    auto& report = fit.report;
    double current = aca_objective(model, x, alphas);
    report.objective_trace.push_back(current);
    for (std::size_t sweep = 0; sweep < config.max_sweeps; ++sweep) {
        for (std::size_t l = 0; l < model.L(); ++l) {
            auto solution = solve_block(l, model, x, alphas);
            report.singular_solves += solution.singular ? 1 : 0;
            if (!solution.factor.allFinite()) {
                ++report.rejected_updates;
                continue;
            }
            FactorMatrix previous = std::move(model.factors[l]);
            model.factors[l] = std::move(solution.factor);
            const double updated = aca_objective(model, x, alphas);
            if (updated <= current) {
                current = updated;
            } else {
                // Roundoff in an ill-conditioned solve; the old block is at least as good.
                model.factors[l] = std::move(previous);
                ++report.rejected_updates;
            }
        }
        AcaModel balanced = model;
        detail::balance_components(balanced);
        const double rebalanced = aca_objective(balanced, x, alphas);
        if (rebalanced <= current) {
            model = std::move(balanced);
            current = rebalanced;
        }

        const double previous = report.objective_trace.back();
        report.objective_trace.push_back(current);
        report.sweeps_run = sweep + 1;
        if (std::abs(previous - current) <= config.tol * std::abs(previous)) {
            report.converged = true;
            break;
        }
    }
    return fit;
}

} // namespace detail

/// Alternating block minimization from seeded random starts. Each sweep
/// updates V(1), ..., V(L) in turn; the objective trace never increases. With
/// several restarts the run with the lowest final objective is returned
/// (ties go to the earliest start).
inline AcaFit aca_fit(std::span<const double> x, std::span<const AssignmentMatrix> alphas,
                      const std::vector<CovariateSpec>& specs, const AcaFitConfig& config)
{
    if (specs.empty()) throw Error("aca_fit: empty covariate list");
    if (x.empty()) throw Error("aca_fit: no observations");
    for (double v : x) {
        if (!std::isfinite(v)) throw Error("aca_fit: response contains non-finite values");
    }
    if (alphas.size() != specs.size()) throw ShapeError("aca_fit: one assignment matrix per covariate required");
    config.validate(specs.size());

    AcaFit best = detail::fit_from_start(x, alphas, specs, config, config.seed);
    for (std::size_t r = 1; r < config.restarts; ++r) {
        auto candidate = detail::fit_from_start(x, alphas, specs, config, derive_seed(config.seed, r));
        if (candidate.report.objective_trace.back() < best.report.objective_trace.back()) best = std::move(candidate);
    }
    return best;
}

/// Convenience overload: assignments computed from the dataset's own specs.
inline AcaFit aca_fit(const Dataset& data, const AcaFitConfig& config)
{
    const auto alphas = assign_all(data);
    return aca_fit(data.x(), alphas, data.specs(), config);
}

// ---------------------------------------------------------------------------
// Prediction and marginalization
// ---------------------------------------------------------------------------

/// sum_k prod_l sum_j alpha_rows[l]_j V(l)_jk for one query point.
inline double aca_predict(const AcaModel& model, std::span<const Eigen::RowVectorXd> alpha_rows)
{
    if (alpha_rows.size() != model.L()) throw ShapeError("aca_predict: one assignment row per covariate required");
    Eigen::RowVectorXd prod = Eigen::RowVectorXd::Ones(static_cast<Eigen::Index>(model.d()));
    for (std::size_t l = 0; l < model.L(); ++l) {
        if (alpha_rows[l].size() != model.factors[l].rows())
            throw ShapeError("aca_predict: assignment row " + std::to_string(l) + " has wrong length");
        prod.array() *= (alpha_rows[l] * model.factors[l]).array();
    }
    return prod.sum();
}

/// Mean response over a grid of query points for a covariate subset H.
/// eval_points[p] holds one coordinate per member of `covariates`.
struct MarginalCurve
{
    std::vector<std::string> covariates;
    std::vector<std::vector<double>> eval_points;
    std::vector<double> mean;

    std::size_t size() const noexcept { return mean.size(); }

    /// First coordinate of every point (the axis of a one-covariate curve).
    std::vector<double> axis() const
    {
        std::vector<double> out;
        out.reserve(eval_points.size());
        for (const auto& p : eval_points) out.push_back(p.at(0));
        return out;
    }
};

/// Turns a 1-D axis into eval points for a one-covariate query.
inline std::vector<std::vector<double>> points_1d(const std::vector<double>& axis)
{
    std::vector<std::vector<double>> out;
    out.reserve(axis.size());
    for (double v : axis) out.push_back({v});
    return out;
}

/// Marginal of the fitted mean over the covariates outside H, given the
/// training inner sums alpha(l) V(l) for every covariate:
///   x(z_H) = sum_k [ (1/m) sum_i prod_{h not in H} (alpha(h) V(h))_ik ] prod_{h in H} (alpha(h)(z_h) V(h))_k
inline MarginalCurve aca_marginalize_inner(const AcaModel& model, std::span<const Eigen::MatrixXd> training_inner,
                                           const std::vector<std::string>& H,
                                           const std::vector<std::vector<double>>& eval_points)
{
    if (H.empty()) throw Error("aca_marginalize: empty covariate subset");
    if (training_inner.size() != model.L()) throw ShapeError("aca_marginalize: inner sums per covariate required");
    std::vector<std::size_t> in_h;
    for (const auto& name : H) {
        const auto l = model.index_of(name);
        if (std::find(in_h.begin(), in_h.end(), l) != in_h.end())
            throw Error("aca_marginalize: covariate '" + name + "' listed twice");
        in_h.push_back(l);
    }
    const auto d = static_cast<Eigen::Index>(model.d());
    const auto m = training_inner.front().rows();
    Eigen::MatrixXd prod = Eigen::MatrixXd::Ones(m, d);
    for (std::size_t l = 0; l < model.L(); ++l) {
        if (training_inner[l].rows() != m || training_inner[l].cols() != d)
            throw ShapeError("aca_marginalize: inner sum matrix has wrong shape");
        if (std::find(in_h.begin(), in_h.end(), l) == in_h.end()) prod.array() *= training_inner[l].array();
    }
    const Eigen::RowVectorXd bracket = prod.colwise().mean();

    MarginalCurve curve{H, eval_points, {}};
    curve.mean.reserve(eval_points.size());
    for (const auto& point : eval_points) {
        if (point.size() != H.size()) throw ShapeError("aca_marginalize: eval point has wrong dimension");
        Eigen::RowVectorXd term = bracket;
        for (std::size_t t = 0; t < in_h.size(); ++t) {
            const auto l = in_h[t];
            term.array() *= (encode_row(model.specs[l], point[t]) * model.factors[l]).array();
        }
        curve.mean.push_back(term.sum());
    }
    return curve;
}

inline std::vector<Eigen::MatrixXd> training_inner_sums(const AcaModel& model, std::span<const AssignmentMatrix> alphas)
{
    if (alphas.size() != model.L()) throw ShapeError("aca: assignment count mismatch");
    std::vector<Eigen::MatrixXd> out;
    out.reserve(model.L());
    for (std::size_t l = 0; l < model.L(); ++l) out.push_back(inner_sums(alphas[l], model.factors[l]));
    return out;
}

inline MarginalCurve aca_marginalize(const AcaModel& model, std::span<const AssignmentMatrix> alphas,
                                     const std::vector<std::string>& H,
                                     const std::vector<std::vector<double>>& eval_points)
{
    const auto inner = training_inner_sums(model, alphas);
    return aca_marginalize_inner(model, inner, H, eval_points);
}

} // namespace aca
