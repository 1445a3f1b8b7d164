#pragma once

#include <aca/dataset.hpp>
#include <aca/random.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace aca {

/// Row-stochastic m x J matrix: row i expresses observation i as a convex
/// combination of the J columns (categories, grid nodes or prototypes).
struct AssignmentMatrix
{
    Eigen::MatrixXd entries;
    std::vector<std::string> column_labels;

    Eigen::Index rows() const noexcept { return entries.rows(); }
    Eigen::Index cols() const noexcept { return entries.cols(); }
};

/// Euclidean projection of v onto the probability simplex.
inline Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v)
{
    const Eigen::Index n = v.size();
    std::vector<double> u(v.data(), v.data() + n);
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumsum = 0.0;
    double theta = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        cumsum += u[static_cast<std::size_t>(j)];
        const double t = (cumsum - 1.0) / static_cast<double>(j + 1);
        if (u[static_cast<std::size_t>(j)] - t > 0.0) theta = t;
    }
    Eigen::VectorXd w = (v.array() - theta).max(0.0);
    const double s = w.sum();
    if (s > 0.0) w /= s;
    else w.setConstant(1.0 / static_cast<double>(n));
    return w;
}

/// Writable view of one assignment row (possibly strided inside a matrix).
using RowRef = Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>>;

namespace detail {

inline std::vector<std::string> node_labels(const std::vector<double>& nodes)
{
    std::vector<std::string> out;
    out.reserve(nodes.size());
    for (double v : nodes) out.push_back(format_number(v));
    return out;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Hard (categorical) assignments
// ---------------------------------------------------------------------------

/// One-hot rows from level indices; NaN gives the uniform row 1/J.
inline AssignmentMatrix categorical_assign(const std::vector<double>& level_index, const std::vector<std::string>& levels)
{
    if (levels.empty()) throw Error("categorical_assign: no levels");
    const auto m = static_cast<Eigen::Index>(level_index.size());
    const auto J = static_cast<Eigen::Index>(levels.size());
    AssignmentMatrix a{Eigen::MatrixXd::Zero(m, J), levels};
    for (Eigen::Index i = 0; i < m; ++i) {
        const double v = level_index[static_cast<std::size_t>(i)];
        if (is_missing(v)) {
            a.entries.row(i).setConstant(1.0 / static_cast<double>(J));
            continue;
        }
        if (v < 0 || v >= static_cast<double>(J) || v != std::floor(v))
            throw Error("categorical_assign: level index out of range");
        a.entries(i, static_cast<Eigen::Index>(v)) = 1.0;
    }
    return a;
}

/// One-hot rows from labels; nullopt marks a missing value.
inline AssignmentMatrix categorical_assign(const std::vector<std::optional<std::string>>& values,
                                           const std::vector<std::string>& levels)
{
    std::vector<double> idx;
    idx.reserve(values.size());
    for (const auto& v : values) {
        if (!v) {
            idx.push_back(missing_value);
            continue;
        }
        const auto it = std::find(levels.begin(), levels.end(), *v);
        if (it == levels.end()) throw Error("categorical_assign: label '" + *v + "' is not a known level");
        idx.push_back(static_cast<double>(it - levels.begin()));
    }
    return categorical_assign(idx, levels);
}

// ---------------------------------------------------------------------------
// Grid (piecewise linear) assignments
// ---------------------------------------------------------------------------

inline void check_increasing(const std::vector<double>& nodes)
{
    if (nodes.size() < 2) throw Error("grid needs at least 2 nodes");
    for (std::size_t j = 1; j < nodes.size(); ++j) {
        if (!(nodes[j] > nodes[j - 1])) throw Error("grid nodes must be strictly increasing");
    }
}

/// Interpolation weights of one value on the grid, written into `row`.
/// Values outside the grid clamp to the end nodes; NaN gives a uniform row.
inline void grid_row(double z, const std::vector<double>& nodes, RowRef row)
{
    row.setZero();
    const auto J = nodes.size();
    if (is_missing(z)) {
        row.setConstant(1.0 / static_cast<double>(J));
        return;
    }
    if (z <= nodes.front()) {
        row(0) = 1.0;
        return;
    }
    if (z >= nodes.back()) {
        row(static_cast<Eigen::Index>(J - 1)) = 1.0;
        return;
    }
    const auto hi = static_cast<std::size_t>(std::upper_bound(nodes.begin(), nodes.end(), z) - nodes.begin());
    const std::size_t lo = hi - 1;
    if (z == nodes[lo]) {
        row(static_cast<Eigen::Index>(lo)) = 1.0;
        return;
    }
    const double t = (z - nodes[lo]) / (nodes[hi] - nodes[lo]);
    row(static_cast<Eigen::Index>(lo)) = 1.0 - t;
    row(static_cast<Eigen::Index>(hi)) = t;
}

inline AssignmentMatrix grid_assign(const std::vector<double>& values, const std::vector<double>& nodes)
{
    check_increasing(nodes);
    const auto m = static_cast<Eigen::Index>(values.size());
    AssignmentMatrix a{Eigen::MatrixXd::Zero(m, static_cast<Eigen::Index>(nodes.size())), detail::node_labels(nodes)};
    for (Eigen::Index i = 0; i < m; ++i) grid_row(values[static_cast<std::size_t>(i)], nodes, a.entries.row(i));
    return a;
}

// ---------------------------------------------------------------------------
// Prototypal analysis
// ---------------------------------------------------------------------------

/// Prototypes (J x p) and the m x J matrix of convex weights that build them
/// from the data points: prototypes = weights^T * points.
struct PrototypeSet
{
    Eigen::MatrixXd prototypes;
    Eigen::MatrixXd weights;
};

struct PrototypalOptions
{
    /// Outer alternations between the weight and assignment sub-problems.
    std::size_t max_alternations = 100;
    /// Projected-gradient iterations per sub-problem.
    std::size_t inner_iterations = 200;
    double tol = 1e-8;
};

struct PrototypalResult
{
    PrototypeSet prototypes;
    AssignmentMatrix assignment;
    /// Objective after initialization and after each alternation.
    std::vector<double> objective_trace;
};

/// sum_i ||z_i - sum_j alpha_ij y_j||^2 + penalty * sum_ij alpha_ij ||z_i - y_j||^2
inline double prototypal_objective(const Eigen::MatrixXd& points, const Eigen::MatrixXd& alpha,
                                   const Eigen::MatrixXd& prototypes, double penalty)
{
    const double fit = (points - alpha * prototypes).squaredNorm();
    double locality = 0.0;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        for (Eigen::Index j = 0; j < prototypes.rows(); ++j)
            locality += alpha(i, j) * (points.row(i) - prototypes.row(j)).squaredNorm();
    }
    return fit + penalty * locality;
}

/// Locality term sum_ij alpha_ij ||z_i - y_j||^2 alone.
inline double prototypal_locality(const Eigen::MatrixXd& points, const Eigen::MatrixXd& alpha,
                                  const Eigen::MatrixXd& prototypes)
{
    return prototypal_objective(points, alpha, prototypes, 1.0) - (points - alpha * prototypes).squaredNorm();
}

namespace detail {

inline double spectral_norm_sym(const Eigen::MatrixXd& a)
{
    if (a.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Minimizes ||z - Y^T a||^2 + penalty * d^T a over the simplex, starting at `a`.
inline void solve_weights_row(const Eigen::RowVectorXd& z, const Eigen::MatrixXd& prototypes, double penalty,
                              double lipschitz, const PrototypalOptions& opt, Eigen::VectorXd& a)
{
    const Eigen::Index J = prototypes.rows();
    Eigen::VectorXd dist(J);
    for (Eigen::Index j = 0; j < J; ++j) dist(j) = (z - prototypes.row(j)).squaredNorm();
    if (J == 1 || lipschitz <= 0.0) {
        if (J == 1) a.setOnes();
        return;
    }
    const Eigen::MatrixXd gram = prototypes * prototypes.transpose();
    const Eigen::VectorXd yz = prototypes * z.transpose();
    const double step = 1.0 / lipschitz;
    for (std::size_t it = 0; it < opt.inner_iterations; ++it) {
        const Eigen::VectorXd grad = 2.0 * (gram * a - yz) + penalty * dist;
        Eigen::VectorXd next = project_to_simplex(a - step * grad);
        const double change = (next - a).cwiseAbs().maxCoeff();
        a = std::move(next);
        if (change < opt.tol) break;
    }
}

inline void alpha_step(const Eigen::MatrixXd& points, const Eigen::MatrixXd& prototypes, double penalty,
                       const PrototypalOptions& opt, Eigen::MatrixXd& alpha)
{
    const double lipschitz = 2.0 * spectral_norm_sym(prototypes * prototypes.transpose());
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        Eigen::VectorXd a = alpha.row(i).transpose();
        solve_weights_row(points.row(i), prototypes, penalty, lipschitz, opt, a);
        alpha.row(i) = a.transpose();
    }
}

inline void beta_step(const Eigen::MatrixXd& points, const Eigen::MatrixXd& alpha, double penalty,
                      const PrototypalOptions& opt, Eigen::MatrixXd& beta)
{
    const Eigen::VectorXd mass = alpha.colwise().sum().transpose();
    const Eigen::MatrixXd curvature = alpha.transpose() * alpha + penalty * Eigen::MatrixXd(mass.asDiagonal());
    const double lipschitz =
        2.0 * spectral_norm_sym(curvature) * spectral_norm_sym(points.transpose() * points);
    if (lipschitz <= 0.0) return;
    const double step = 1.0 / lipschitz;
    const Eigen::MatrixXd target = (1.0 + penalty) * alpha.transpose() * points;
    for (std::size_t it = 0; it < opt.inner_iterations; ++it) {
        const Eigen::MatrixXd y = beta.transpose() * points;
        const Eigen::MatrixXd grad_y = 2.0 * (curvature * y - target);
        const Eigen::MatrixXd grad = points * grad_y.transpose();
        double change = 0.0;
        for (Eigen::Index j = 0; j < beta.cols(); ++j) {
            Eigen::VectorXd col = project_to_simplex(beta.col(j) - step * grad.col(j));
            change = std::max(change, (col - beta.col(j)).cwiseAbs().maxCoeff());
            beta.col(j) = col;
        }
        if (change < opt.tol) break;
    }
}

} // namespace detail

/// Learns `count` prototypes as convex combinations of the rows of `points`
/// together with local convex assignments of every point to them. Alternates
/// simplex-constrained least squares over the assignments and the prototype
/// weights; the objective never increases from one alternation to the next.
inline PrototypalResult prototypal_assign(const Eigen::MatrixXd& points, std::size_t count, double locality_penalty,
                                          std::uint64_t seed, const PrototypalOptions& opt = {})
{
    const Eigen::Index m = points.rows();
    const auto J = static_cast<Eigen::Index>(count);
    if (m < 1) throw Error("prototypal_assign: no data points");
    if (count < 1) throw Error("prototypal_assign: prototype count must be >= 1");
    if (J > m) throw Error("prototypal_assign: more prototypes than data points");
    if (!(locality_penalty >= 0.0)) throw Error("prototypal_assign: locality penalty must be >= 0");
    if (opt.max_alternations == 0 || opt.inner_iterations == 0)
        throw Error("prototypal_assign: iteration budget must be positive");

    // Farthest-point initialization from a seeded first pick.
    Rng rng(seed);
    std::vector<Eigen::Index> chosen;
    chosen.push_back(std::uniform_int_distribution<Eigen::Index>(0, m - 1)(rng));
    Eigen::VectorXd nearest = (points.rowwise() - points.row(chosen[0])).rowwise().squaredNorm();
    while (static_cast<Eigen::Index>(chosen.size()) < J) {
        Eigen::Index next = 0;
        nearest.maxCoeff(&next);
        chosen.push_back(next);
        nearest = nearest.cwiseMin((points.rowwise() - points.row(next)).rowwise().squaredNorm());
    }

    Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(m, J);
    for (Eigen::Index j = 0; j < J; ++j) beta(chosen[static_cast<std::size_t>(j)], j) = 1.0;
    Eigen::MatrixXd alpha = Eigen::MatrixXd::Constant(m, J, 1.0 / static_cast<double>(J));

    PrototypalResult result;
    detail::alpha_step(points, beta.transpose() * points, locality_penalty, opt, alpha);
    result.objective_trace.push_back(
        prototypal_objective(points, alpha, beta.transpose() * points, locality_penalty));

    for (std::size_t it = 0; it < opt.max_alternations; ++it) {
        detail::beta_step(points, alpha, locality_penalty, opt, beta);
        detail::alpha_step(points, beta.transpose() * points, locality_penalty, opt, alpha);
        const double obj = prototypal_objective(points, alpha, beta.transpose() * points, locality_penalty);
        const double prev = result.objective_trace.back();
        result.objective_trace.push_back(obj);
        if (std::abs(prev - obj) <= opt.tol * std::max(1.0, std::abs(prev))) break;
    }

    result.prototypes = {beta.transpose() * points, beta};
    std::vector<std::string> labels;
    for (Eigen::Index j = 0; j < J; ++j) labels.push_back("prototype_" + std::to_string(j));
    result.assignment = {std::move(alpha), std::move(labels)};
    return result;
}

/// Assignment weights of one 1-D value against fixed sorted prototypes.
inline void prototype_row(double z, const std::vector<double>& prototypes, double penalty,
                          RowRef row, const PrototypalOptions& opt = {})
{
    const auto J = static_cast<Eigen::Index>(prototypes.size());
    if (is_missing(z)) {
        row.setConstant(1.0 / static_cast<double>(J));
        return;
    }
    const Eigen::MatrixXd y = Eigen::Map<const Eigen::VectorXd>(prototypes.data(), J);
    Eigen::VectorXd a(J);
    // Warm start from the grid interpolation weights over the prototypes.
    if (J >= 2 && std::adjacent_find(prototypes.begin(), prototypes.end()) == prototypes.end()) {
        Eigen::RowVectorXd start(J);
        grid_row(z, prototypes, start);
        a = start.transpose();
    } else {
        a.setConstant(1.0 / static_cast<double>(J));
    }
    Eigen::RowVectorXd zr(1);
    zr(0) = z;
    PrototypalOptions inner = opt;
    inner.inner_iterations = std::max<std::size_t>(opt.inner_iterations, 2000);
    inner.tol = std::min(opt.tol, 1e-12);
    const double lipschitz = 2.0 * y.squaredNorm();
    detail::solve_weights_row(zr, y, penalty, lipschitz, inner, a);
    row = a.transpose();
}

/// Learns sorted 1-D prototypes for a Prototyped covariate from its
/// non-missing values and stores them in the spec.
inline void resolve_prototypes(Covariate& covariate, std::uint64_t seed, const PrototypalOptions& opt = {})
{
    auto* spec = std::get_if<Prototyped>(&covariate.spec.kind);
    if (!spec) throw Error("resolve_prototypes: covariate '" + covariate.spec.name + "' is not prototyped");
    std::vector<double> present;
    for (double v : covariate.values) {
        if (!is_missing(v)) present.push_back(v);
    }
    if (present.empty()) throw Error("resolve_prototypes: all values missing");
    const Eigen::MatrixXd pts = Eigen::Map<const Eigen::VectorXd>(present.data(), static_cast<Eigen::Index>(present.size()));
    const auto result = prototypal_assign(pts, spec->count, spec->locality_penalty, seed, opt);
    spec->prototypes.assign(result.prototypes.prototypes.data(),
                            result.prototypes.prototypes.data() + result.prototypes.prototypes.rows());
    std::sort(spec->prototypes.begin(), spec->prototypes.end());
}

// ---------------------------------------------------------------------------
// Encoding by covariate kind
// ---------------------------------------------------------------------------

/// Writes the assignment row of one covariate value according to its spec.
inline void encode_row(const CovariateSpec& spec, double value, RowRef row)
{
    std::visit(
        [&](const auto& k) {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, Categorical>) {
                row.setZero();
                const auto J = static_cast<double>(k.levels.size());
                if (is_missing(value)) row.setConstant(1.0 / J);
                else if (value < 0 || value >= J || value != std::floor(value))
                    throw Error("covariate '" + spec.name + "': level index out of range");
                else row(static_cast<Eigen::Index>(value)) = 1.0;
            } else if constexpr (std::is_same_v<K, RealGrid>) {
                grid_row(value, k.nodes, row);
            } else {
                if (k.prototypes.empty())
                    throw Error("covariate '" + spec.name + "': prototypes not resolved");
                prototype_row(value, k.prototypes, k.locality_penalty, row);
            }
        },
        spec.kind);
}

inline Eigen::RowVectorXd encode_row(const CovariateSpec& spec, double value)
{
    Eigen::RowVectorXd row(static_cast<Eigen::Index>(spec.size()));
    encode_row(spec, value, row);
    return row;
}

inline std::vector<std::string> column_labels(const CovariateSpec& spec)
{
    if (const auto* c = std::get_if<Categorical>(&spec.kind)) return c->levels;
    if (const auto* g = std::get_if<RealGrid>(&spec.kind)) return detail::node_labels(g->nodes);
    return detail::node_labels(std::get<Prototyped>(spec.kind).prototypes);
}

/// Assignment matrix of a full covariate column.
inline AssignmentMatrix assign(const CovariateSpec& spec, const std::vector<double>& values)
{
    if (const auto* g = std::get_if<RealGrid>(&spec.kind)) return grid_assign(values, g->nodes);
    const auto m = static_cast<Eigen::Index>(values.size());
    AssignmentMatrix a{Eigen::MatrixXd::Zero(m, static_cast<Eigen::Index>(spec.size())), column_labels(spec)};
    for (Eigen::Index i = 0; i < m; ++i) encode_row(spec, values[static_cast<std::size_t>(i)], a.entries.row(i));
    return a;
}

/// Assignment matrices for every covariate of a dataset, in column order.
inline std::vector<AssignmentMatrix> assign_all(const Dataset& data)
{
    std::vector<AssignmentMatrix> out;
    out.reserve(data.L());
    for (const auto& c : data.covariates()) out.push_back(assign(c.spec, c.values));
    return out;
}

} // namespace aca
