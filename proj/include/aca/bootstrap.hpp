#pragma once

#include <aca/assignment.hpp>
#include <aca/dataset.hpp>
#include <aca/linreg.hpp>
#include <aca/model.hpp>
#include <aca/parallel.hpp>
#include <aca/random.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace aca {

struct BootstrapConfig
{
    std::size_t iterations = 100;
    std::size_t sample_size = 500;
    double level = 0.95;
    std::uint64_t seed = 0;
    /// Worker threads for replicas; 0 picks the hardware concurrency. Results
    /// do not depend on this value.
    std::size_t threads = 0;

    void validate() const
    {
        if (iterations < 1) throw Error("bootstrap: iterations must be >= 1");
        if (sample_size < 1) throw Error("bootstrap: sample size must be >= 1");
        if (!(level > 0.0 && level < 1.0)) throw Error("bootstrap: level must lie in (0, 1)");
    }
};

/// ACA refit per replica. The configured seed is replaced by a per-replica
/// seed derived from the bootstrap seed.
struct AcaFitter
{
    AcaFitConfig config;
};

struct LinregFitter
{};

using Fitter = std::variant<AcaFitter, LinregFitter>;

inline std::string_view fitter_name(const Fitter& f) noexcept
{
    return std::holds_alternative<AcaFitter>(f) ? "aca" : "linreg";
}

/// Covariate subset H and the points at which its marginal is evaluated.
struct CurveQuery
{
    std::vector<std::string> covariates;
    std::vector<std::vector<double>> eval_points;
};

struct ReplicaFailure
{
    std::size_t replica = 0;
    std::string message;
};

/// Marginal curves of the successful replicas on a shared eval grid.
struct CurveEnsemble
{
    std::vector<std::string> covariates;
    std::vector<std::vector<double>> eval_points;
    std::vector<std::vector<double>> curves;
    /// Replica index of each entry in `curves`.
    std::vector<std::size_t> replica_index;
    /// Seed of every replica, successful or not.
    std::vector<std::uint64_t> replica_seeds;
    std::vector<ReplicaFailure> failures;
};

struct ConfidenceBand
{
    std::vector<double> lower;
    std::vector<double> upper;
    double level = 0.95;
};

/// Ensembles for several queries sharing the same replicas, plus the rows each
/// replica drew from the parent dataset.
struct BootstrapResult
{
    std::vector<CurveEnsemble> ensembles;
    std::vector<std::vector<std::size_t>> resampled_rows;
};

/// Seed of replica b. Depends only on (master seed, b).
inline std::uint64_t replica_seed(std::uint64_t master, std::size_t replica) noexcept
{
    return derive_seed(master, replica);
}

/// n row indices drawn uniformly with replacement from [0, m).
inline std::vector<std::size_t> resample_rows(std::size_t m, std::size_t n, Rng& rng)
{
    if (m == 0) throw Error("resample: empty parent dataset");
    std::uniform_int_distribution<std::size_t> pick(0, m - 1);
    std::vector<std::size_t> rows(n);
    for (auto& r : rows) r = pick(rng);
    return rows;
}

/// Draws n rows with replacement. Covariate specs (grids, levels, prototypes)
/// are carried over unchanged.
inline Dataset resample(const Dataset& data, std::size_t n, Rng& rng)
{
    const auto rows = resample_rows(data.m(), n, rng);
    return data.select_rows(rows, data.provenance() + " resample n=" + std::to_string(n));
}

/// Fits `fitter` to `data` and evaluates every query's marginal.
inline std::vector<MarginalCurve> fit_and_marginalize(const Dataset& data, const Fitter& fitter,
                                                      const std::vector<CurveQuery>& queries, std::uint64_t fit_seed)
{
    std::vector<MarginalCurve> out;
    out.reserve(queries.size());
    if (const auto* aca = std::get_if<AcaFitter>(&fitter)) {
        AcaFitConfig cfg = aca->config;
        cfg.seed = fit_seed;
        const auto alphas = assign_all(data);
        const auto fit = aca_fit(data.x(), alphas, data.specs(), cfg);
        const auto inner = training_inner_sums(fit.model, alphas);
        for (const auto& q : queries) out.push_back(aca_marginalize_inner(fit.model, inner, q.covariates, q.eval_points));
    } else {
        const auto model = ols_fit(data);
        for (const auto& q : queries) out.push_back(lm_marginalize(model, q.covariates, q.eval_points));
    }
    for (const auto& c : out) {
        for (double v : c.mean) {
            if (!std::isfinite(v)) throw Error("non-finite marginal value");
        }
    }
    return out;
}

/// Replica b resamples with Rng(replica_seed(seed, b)), fits, and marginalizes
/// every query on its shared grid. Resampled rows depend only on (seed, b), so
/// two fitters run with the same config see identical samples. Failed
/// replicas are recorded and left out of the curves.
inline BootstrapResult bootstrap_curves(const Dataset& data, const Fitter& fitter, const std::vector<CurveQuery>& queries,
                                        const BootstrapConfig& config)
{
    config.validate();
    if (queries.empty()) throw Error("bootstrap: no curve queries");
    for (const auto& q : queries) {
        for (const auto& name : q.covariates) data.index_of(name);
    }

    const auto B = config.iterations;
    std::vector<std::vector<MarginalCurve>> replicas(B);
    std::vector<std::string> errors(B);
    std::vector<std::vector<std::size_t>> rows(B);
    std::vector<std::uint64_t> seeds(B);
    for (std::size_t b = 0; b < B; ++b) seeds[b] = replica_seed(config.seed, b);

    parallel_for(B, config.threads, [&](std::size_t b) {
        Rng rng(seeds[b]);
        rows[b] = resample_rows(data.m(), config.sample_size, rng);
        try {
            const auto sample = data.select_rows(rows[b], data.provenance() + " replica " + std::to_string(b));
            replicas[b] = fit_and_marginalize(sample, fitter, queries, derive_seed(seeds[b], 1));
        } catch (const std::exception& e) {
            errors[b] = e.what();
            if (errors[b].empty()) errors[b] = "unknown failure";
        }
    });

    BootstrapResult result;
    result.resampled_rows = std::move(rows);
    for (std::size_t q = 0; q < queries.size(); ++q) {
        CurveEnsemble e;
        e.covariates = queries[q].covariates;
        e.eval_points = queries[q].eval_points;
        e.replica_seeds = seeds;
        for (std::size_t b = 0; b < B; ++b) {
            if (!errors[b].empty()) {
                e.failures.push_back({b, errors[b]});
                continue;
            }
            e.curves.push_back(std::move(replicas[b][q].mean));
            e.replica_index.push_back(b);
        }
        result.ensembles.push_back(std::move(e));
    }
    return result;
}

inline CurveEnsemble bootstrap_curves(const Dataset& data, const Fitter& fitter, const CurveQuery& query,
                                      const BootstrapConfig& config)
{
    auto result = bootstrap_curves(data, fitter, std::vector<CurveQuery>{query}, config);
    return std::move(result.ensembles.front());
}

/// Quantile of sorted values with linear interpolation between order
/// statistics at 1-based position 1 + q (n - 1).
inline double sorted_quantile(const std::vector<double>& sorted, double q)
{
    if (sorted.empty()) throw Error("quantile of empty sample");
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

/// Pointwise quantiles at (1 - level)/2 and 1 - (1 - level)/2.
inline ConfidenceBand empirical_band(const CurveEnsemble& ensemble, double level)
{
    if (!(level > 0.0 && level < 1.0)) throw Error("empirical_band: level must lie in (0, 1)");
    if (ensemble.curves.empty()) throw Error("empirical_band: empty ensemble");
    const auto n = ensemble.curves.front().size();
    const double tail = (1.0 - level) / 2.0;
    ConfidenceBand band{std::vector<double>(n), std::vector<double>(n), level};
    std::vector<double> column(ensemble.curves.size());
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t b = 0; b < ensemble.curves.size(); ++b) {
            if (ensemble.curves[b].size() != n) throw ShapeError("empirical_band: curves differ in length");
            column[b] = ensemble.curves[b][p];
        }
        std::sort(column.begin(), column.end());
        band.lower[p] = sorted_quantile(column, tail);
        band.upper[p] = sorted_quantile(column, 1.0 - tail);
    }
    return band;
}

} // namespace aca
