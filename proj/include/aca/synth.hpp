#pragma once

#include <aca/dataset.hpp>
#include <aca/random.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace aca {

/// Ground-truth mean response laws for synthetic data (mg/dl).
///
///   linear:          10 + 0.6 carbs - 2 fiber
///   quadratic:       0.025 (carbs - 50)^2 - 20
///   piecewise_flat:  20 + 0.5 (carbs - 50) - 3 min(fiber, 10)
///
/// The piecewise law decreases in fiber up to 10 g and is flat beyond; it is
/// the backdrop for the fiber-outlier scenario.
enum class ResponseLaw { linear, quadratic, piecewise_flat };

inline std::string_view to_string(ResponseLaw law) noexcept
{
    switch (law) {
        case ResponseLaw::linear: return "linear";
        case ResponseLaw::quadratic: return "quadratic";
        case ResponseLaw::piecewise_flat: return "piecewise_flat";
    }
    return "linear";
}

inline std::optional<ResponseLaw> parse_response_law(std::string_view s) noexcept
{
    for (auto law : {ResponseLaw::linear, ResponseLaw::quadratic, ResponseLaw::piecewise_flat}) {
        if (s == to_string(law)) return law;
    }
    if (s == "piecewise-flat-with-outliers") return ResponseLaw::piecewise_flat;
    return std::nullopt;
}

/// uniform on [lo, hi]; triangular with mode at the midpoint; skewed puts
/// most mass near lo (lo + (hi - lo) u^2).
enum class DrawShape { uniform, triangular, skewed };

struct NutrientLaw
{
    double lo = 0.0;
    double hi = 100.0;
    DrawShape shape = DrawShape::uniform;
};

struct OutlierSpec
{
    double fiber = 50.0;
    std::size_t count = 2;
};

struct SynthConfig
{
    std::string user_id = "synth";
    std::size_t n = 88;
    NutrientLaw carbs{5.0, 100.0, DrawShape::uniform};
    NutrientLaw fat{0.0, 50.0, DrawShape::uniform};
    NutrientLaw protein{0.0, 50.0, DrawShape::uniform};
    NutrientLaw fiber{0.0, 15.0, DrawShape::skewed};
    NutrientLaw pre_bg{90.0, 200.0, DrawShape::uniform};
    ResponseLaw law = ResponseLaw::linear;
    double noise_sd = 10.0;
    /// Noise sd grows linearly with carbs from 0.2x to 1.8x noise_sd.
    bool heteroscedastic = false;
    std::optional<OutlierSpec> outliers;
    /// Exact per-type counts (breakfast, lunch, dinner, other); must sum to n.
    std::optional<std::array<std::size_t, 4>> meal_counts;

    void validate() const
    {
        if (n < 1) throw Error("synth: n must be >= 1");
        if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) throw Error("synth: noise_sd must be >= 0");
        for (const auto* law : {&carbs, &fat, &protein, &fiber}) {
            if (!(law->lo >= 0.0) || !(law->hi >= law->lo) || !std::isfinite(law->hi))
                throw Error("synth: nutrient ranges must satisfy 0 <= lo <= hi");
        }
        if (!(pre_bg.lo > 0.0) || !(pre_bg.hi >= pre_bg.lo)) throw Error("synth: pre_bg range must be positive");
        if (outliers) {
            if (outliers->count > n) throw Error("synth: more outliers than records");
            if (!(outliers->fiber >= 0.0)) throw Error("synth: outlier fiber must be >= 0");
        }
        if (meal_counts) {
            std::size_t total = 0;
            for (auto c : *meal_counts) total += c;
            if (total != n) throw Error("synth: meal_counts must sum to n");
        }
    }
};

/// Generated records with the noiseless response alongside each one.
struct SynthSample
{
    std::vector<MealRecord> records;
    /// truth[i] == post_bg - pre_bg of records[i] when noise_sd == 0.
    std::vector<double> truth;
};

/// Rounds to a multiple of 2^-10 so that pre + value - pre == value exactly.
inline double dyadic_round(double v) noexcept { return std::round(v * 1024.0) / 1024.0; }

/// Noiseless response for one record's covariates, on the 2^-10 lattice.
inline double response_truth(ResponseLaw law, double carbs, double fiber) noexcept
{
    double v = 0.0;
    switch (law) {
        case ResponseLaw::linear: v = 10.0 + 0.6 * carbs - 2.0 * fiber; break;
        case ResponseLaw::quadratic: v = 0.025 * (carbs - 50.0) * (carbs - 50.0) - 20.0; break;
        case ResponseLaw::piecewise_flat: v = 20.0 + 0.5 * (carbs - 50.0) - 3.0 * std::min(fiber, 10.0); break;
    }
    return dyadic_round(v);
}

namespace detail {

inline double draw(const NutrientLaw& law, Rng& rng)
{
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double u = unit(rng);
    double t = u;
    switch (law.shape) {
        case DrawShape::uniform: break;
        case DrawShape::triangular: t = 0.5 * (u + unit(rng)); break;
        case DrawShape::skewed: t = u * u; break;
    }
    return law.lo + (law.hi - law.lo) * t;
}

inline double round_tenth(double v) noexcept { return std::round(v * 10.0) / 10.0; }

} // namespace detail

/// Deterministic in (config, seed). Nutrients are rounded to 0.1 g and pre-meal
/// BG to whole mg/dl, matching how such logs are recorded.
inline SynthSample generate_synthetic(const SynthConfig& config, std::uint64_t seed)
{
    config.validate();
    Rng rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<MealType> types;
    types.reserve(config.n);
    if (config.meal_counts) {
        for (std::size_t t = 0; t < 4; ++t) types.insert(types.end(), (*config.meal_counts)[t], all_meal_types[t]);
    } else {
        static constexpr std::array<double, 4> cumulative{0.25, 0.5, 0.85, 1.0};
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (std::size_t i = 0; i < config.n; ++i) {
            const double u = unit(rng);
            const auto t = static_cast<std::size_t>(
                std::upper_bound(cumulative.begin(), cumulative.end() - 1, u) - cumulative.begin());
            types.push_back(all_meal_types[t]);
        }
    }
    std::shuffle(types.begin(), types.end(), rng);

    std::vector<std::size_t> outlier_rows;
    if (config.outliers) {
        std::vector<std::size_t> order(config.n);
        for (std::size_t i = 0; i < config.n; ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), rng);
        outlier_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(config.outliers->count));
    }

    SynthSample out;
    out.records.reserve(config.n);
    out.truth.reserve(config.n);
    const double carbs_span = std::max(config.carbs.hi - config.carbs.lo, 1e-12);
    for (std::size_t i = 0; i < config.n; ++i) {
        MealRecord r;
        r.user_id = config.user_id;
        r.meal_type = types[i];
        r.carbs = detail::round_tenth(detail::draw(config.carbs, rng));
        r.fat = detail::round_tenth(detail::draw(config.fat, rng));
        r.protein = detail::round_tenth(detail::draw(config.protein, rng));
        r.fiber = detail::round_tenth(detail::draw(config.fiber, rng));
        if (std::find(outlier_rows.begin(), outlier_rows.end(), i) != outlier_rows.end())
            r.fiber = config.outliers->fiber;
        r.pre_bg = std::max(1.0, std::round(detail::draw(config.pre_bg, rng)));

        const double truth = response_truth(config.law, *r.carbs, *r.fiber);
        double sd = config.noise_sd;
        if (config.heteroscedastic) sd *= 0.2 + 1.6 * (*r.carbs - config.carbs.lo) / carbs_span;

        // Redraw noise until the post-meal reading is a valid (positive) value.
        double impact = truth;
        for (int attempt = 0;; ++attempt) {
            impact = sd > 0.0 ? dyadic_round(truth + sd * gauss(rng)) : truth;
            if (r.pre_bg + impact > 0.0) break;
            if (sd == 0.0 || attempt > 1000) throw Error("synth: response law drives post-meal BG below zero");
        }
        r.post_bg = r.pre_bg + impact;
        r.over_cap = *r.carbs > nutrient_cap_g || *r.fat > nutrient_cap_g || *r.protein > nutrient_cap_g ||
                     *r.fiber > nutrient_cap_g;
        out.records.push_back(std::move(r));
        out.truth.push_back(truth);
    }
    return out;
}

} // namespace aca
