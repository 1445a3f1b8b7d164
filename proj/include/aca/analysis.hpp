#pragma once

#include <aca/bootstrap.hpp>
#include <aca/dataset.hpp>
#include <aca/model.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

namespace aca {

/// Root mean squared error of full-model predictions.
inline double rmse_full(const std::vector<double>& predictions, const std::vector<double>& x)
{
    if (predictions.size() != x.size()) throw ShapeError("rmse_full: length mismatch");
    if (x.empty()) throw Error("rmse_full: no observations");
    double ss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) ss += (predictions[i] - x[i]) * (predictions[i] - x[i]);
    return std::sqrt(ss / static_cast<double>(x.size()));
}

/// sqrt((1/m)(1/L) sum_l sum_i (marginal_l(z_l^i) - x^i)^2), with
/// marginal_at_samples[l][i] the one-covariate marginal of covariate l
/// evaluated at sample i's value.
inline double rmse_marginal(const std::vector<std::vector<double>>& marginal_at_samples, const std::vector<double>& x)
{
    if (marginal_at_samples.empty()) throw Error("rmse_marginal: no covariate curves");
    if (x.empty()) throw Error("rmse_marginal: no observations");
    double ss = 0.0;
    for (const auto& curve : marginal_at_samples) {
        if (curve.size() != x.size()) throw ShapeError("rmse_marginal: curve length mismatch");
        for (std::size_t i = 0; i < x.size(); ++i) ss += (curve[i] - x[i]) * (curve[i] - x[i]);
    }
    return std::sqrt(ss / (static_cast<double>(x.size()) * static_cast<double>(marginal_at_samples.size())));
}

/// Piecewise-linear interpolation of (axis, values) at z, clamped to the
/// axis range. The axis need not be sorted.
inline double interpolate(const std::vector<double>& axis, const std::vector<double>& values, double z)
{
    if (axis.empty() || axis.size() != values.size()) throw ShapeError("interpolate: bad curve");
    std::vector<std::size_t> order(axis.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return axis[a] < axis[b]; });
    if (z <= axis[order.front()]) return values[order.front()];
    if (z >= axis[order.back()]) return values[order.back()];
    for (std::size_t p = 1; p < order.size(); ++p) {
        const double x1 = axis[order[p]];
        if (z > x1) continue;
        const double x0 = axis[order[p - 1]];
        const double y0 = values[order[p - 1]];
        const double y1 = values[order[p]];
        if (z == x1 || x1 == x0) return y1;
        return y0 + (y1 - y0) * ((z - x0) / (x1 - x0));
    }
    return values[order.back()];
}

/// Confidence band of one covariate's marginal, on that covariate's axis.
struct CovariateBand
{
    std::string covariate;
    std::vector<double> axis;
    ConfidenceBand band;
};

struct CoverageReport
{
    std::vector<std::string> covariates;
    /// Percent of samples inside the band, per covariate.
    std::vector<double> per_covariate_pct;
    /// Unweighted mean of the per-covariate percentages.
    double mean_pct = 0.0;
    /// All (sample, covariate) pairs pooled.
    double pooled_pct = 0.0;
};

/// Percent of samples with lower(z_l^i) <= x^i <= upper(z_l^i), per covariate.
/// Samples with a missing value for the covariate are not counted.
inline CoverageReport ci_coverage(const Dataset& data, const std::vector<CovariateBand>& bands)
{
    if (bands.empty()) throw Error("ci_coverage: no bands");
    CoverageReport report;
    std::size_t total_in = 0;
    std::size_t total = 0;
    for (const auto& b : bands) {
        const auto& values = data.covariate(data.index_of(b.covariate)).values;
        if (b.axis.size() != b.band.lower.size() || b.axis.size() != b.band.upper.size())
            throw ShapeError("ci_coverage: band and axis lengths differ");
        std::size_t in = 0;
        std::size_t present = 0;
        for (std::size_t i = 0; i < data.m(); ++i) {
            if (is_missing(values[i])) continue;
            ++present;
            const double lo = interpolate(b.axis, b.band.lower, values[i]);
            const double hi = interpolate(b.axis, b.band.upper, values[i]);
            if (lo <= data.x()[i] && data.x()[i] <= hi) ++in;
        }
        report.covariates.push_back(b.covariate);
        report.per_covariate_pct.push_back(present ? 100.0 * static_cast<double>(in) / static_cast<double>(present) : 0.0);
        total_in += in;
        total += present;
    }
    report.mean_pct = std::accumulate(report.per_covariate_pct.begin(), report.per_covariate_pct.end(), 0.0) /
                      static_cast<double>(report.per_covariate_pct.size());
    report.pooled_pct = total ? 100.0 * static_cast<double>(total_in) / static_cast<double>(total) : 0.0;
    return report;
}

inline constexpr double default_bend_threshold_deg = 10.0;

struct BendReport
{
    double max_bend_deg = 0.0;
    double threshold_deg = default_bend_threshold_deg;
    bool flagged = false;
};

/// Largest turning angle between successive chords of the curve after both
/// axes are rescaled to [0, 1]. A flat curve has no bend.
inline BendReport detect_bend(const std::vector<double>& axis, const std::vector<double>& values,
                              double threshold_deg = default_bend_threshold_deg)
{
    if (axis.size() != values.size()) throw ShapeError("detect_bend: axis and values differ in length");
    if (axis.size() < 3) throw Error("detect_bend: at least 3 points required");
    BendReport report;
    report.threshold_deg = threshold_deg;
    const auto [xmin, xmax] = std::minmax_element(axis.begin(), axis.end());
    const auto [ymin, ymax] = std::minmax_element(values.begin(), values.end());
    const double xspan = *xmax - *xmin;
    const double yspan = *ymax - *ymin;
    if (!(yspan > 0.0) || !(xspan > 0.0)) return report;

    std::vector<std::pair<double, double>> chords;
    for (std::size_t p = 0; p + 1 < axis.size(); ++p) {
        const double dx = (axis[p + 1] - axis[p]) / xspan;
        const double dy = (values[p + 1] - values[p]) / yspan;
        if (dx != 0.0 || dy != 0.0) chords.emplace_back(dx, dy);
    }
    for (std::size_t c = 1; c < chords.size(); ++c) {
        const auto [ax, ay] = chords[c - 1];
        const auto [bx, by] = chords[c];
        const double cosine = (ax * bx + ay * by) / (std::hypot(ax, ay) * std::hypot(bx, by));
        const double angle = std::acos(std::clamp(cosine, -1.0, 1.0)) * 180.0 / std::numbers::pi;
        report.max_bend_deg = std::max(report.max_bend_deg, angle);
    }
    report.flagged = report.max_bend_deg > threshold_deg;
    return report;
}

inline BendReport detect_bend(const MarginalCurve& curve, double threshold_deg = default_bend_threshold_deg)
{
    if (curve.covariates.size() != 1) throw Error("detect_bend: single-covariate curve required");
    return detect_bend(curve.axis(), curve.mean, threshold_deg);
}

struct Interval
{
    double lo = 0.0;
    double hi = 0.0;
    bool operator==(const Interval&) const = default;
};

/// Covariate intervals where the mean response is above or below a threshold.
struct RangeSet
{
    std::string covariate;
    double threshold = 0.0;
    std::vector<Interval> above;
    std::vector<Interval> below;
};

/// Intersects the piecewise-linear curve with a horizontal threshold. Crossing
/// points are exact on each segment and close the adjacent intervals; a point
/// that only touches the threshold does not split an interval. Stretches lying
/// exactly on the threshold belong to neither list.
inline RangeSet extract_ranges(const std::string& covariate, const std::vector<double>& axis,
                               const std::vector<double>& values, double threshold)
{
    if (axis.empty()) throw Error("extract_ranges: empty curve");
    if (axis.size() != values.size()) throw ShapeError("extract_ranges: axis and values differ in length");
    for (std::size_t p = 1; p < axis.size(); ++p) {
        if (!(axis[p] > axis[p - 1])) throw Error("extract_ranges: eval points must be strictly increasing");
    }
    RangeSet out{covariate, threshold, {}, {}};
    if (axis.size() == 1) {
        if (values[0] > threshold) out.above.push_back({axis[0], axis[0]});
        else if (values[0] < threshold) out.below.push_back({axis[0], axis[0]});
        return out;
    }

    std::vector<double> cuts{axis.front()};
    for (std::size_t p = 0; p + 1 < axis.size(); ++p) {
        const double y0 = values[p] - threshold;
        const double y1 = values[p + 1] - threshold;
        if ((y0 < 0.0 && y1 > 0.0) || (y0 > 0.0 && y1 < 0.0)) {
            const double c = axis[p] + (axis[p + 1] - axis[p]) * (y0 / (y0 - y1));
            cuts.push_back(std::clamp(c, axis[p], axis[p + 1]));
        }
        if (y1 == 0.0) cuts.push_back(axis[p + 1]);
    }
    cuts.push_back(axis.back());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    auto push = [](std::vector<Interval>& list, double lo, double hi) {
        if (!list.empty() && list.back().hi == lo) list.back().hi = hi;
        else list.push_back({lo, hi});
    };
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
        const double lo = cuts[c];
        const double hi = cuts[c + 1];
        if (!(hi > lo)) continue;
        const double mid = interpolate(axis, values, 0.5 * (lo + hi));
        if (mid > threshold) push(out.above, lo, hi);
        else if (mid < threshold) push(out.below, lo, hi);
    }
    return out;
}

inline RangeSet extract_ranges(const MarginalCurve& curve, double threshold)
{
    if (curve.covariates.size() != 1) throw Error("extract_ranges: single-covariate curve required");
    return extract_ranges(curve.covariates.front(), curve.axis(), curve.mean, threshold);
}

/// Summary metrics of one fitted model on one dataset.
struct MetricsReport
{
    double rmse_full = 0.0;
    double rmse_marginal = 0.0;
    CoverageReport coverage;
    std::vector<std::string> bend_covariates;
    std::vector<BendReport> bends;
};

} // namespace aca
