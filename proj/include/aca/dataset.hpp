#pragma once

#include <aca/error.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace aca {

inline constexpr double missing_value = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) noexcept { return std::isnan(v); }

// ---------------------------------------------------------------------------
// Meal records
// ---------------------------------------------------------------------------

enum class MealType { breakfast, lunch, dinner, other };

inline constexpr std::array<MealType, 4> all_meal_types{
    MealType::breakfast, MealType::lunch, MealType::dinner, MealType::other};

inline std::string_view to_string(MealType t) noexcept
{
    switch (t) {
        case MealType::breakfast: return "breakfast";
        case MealType::lunch: return "lunch";
        case MealType::dinner: return "dinner";
        case MealType::other: return "other";
    }
    return "other";
}

/// Case-insensitive parse; nullopt for unknown labels.
inline std::optional<MealType> parse_meal_type(std::string_view text)
{
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    for (auto t : all_meal_types) {
        if (lower == to_string(t)) return t;
    }
    return std::nullopt;
}

/// One logged meal. Nutrients are grams and may be missing; BG values are
/// mg/dl and always present.
struct MealRecord
{
    std::string user_id;
    MealType meal_type = MealType::other;
    std::optional<double> carbs;
    std::optional<double> fat;
    std::optional<double> protein;
    std::optional<double> fiber;
    double pre_bg = 0.0;
    double post_bg = 0.0;

    /// Set when any nutrient exceeds the 100 g assessment cap.
    bool over_cap = false;

    bool has_missing() const noexcept { return !carbs || !fat || !protein || !fiber; }

    bool operator==(const MealRecord&) const = default;
};

/// Response variable: post-meal BG minus pre-meal BG (mg/dl).
inline double bg_impact(double pre, double post)
{
    if (!std::isfinite(pre) || !std::isfinite(post))
        throw Error("bg_impact: non-finite blood glucose value");
    if (pre <= 0.0 || post <= 0.0)
        throw Error("bg_impact: blood glucose must be positive");
    return post - pre;
}

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

inline constexpr std::array<std::string_view, 8> meal_csv_columns{
    "user_id", "meal_type", "carbs_g", "fat_g", "protein_g", "fiber_g", "pre_bg_mgdl", "post_bg_mgdl"};

inline constexpr double nutrient_cap_g = 100.0;

/// What to do with nutrient values above the 100 g assessment cap.
enum class CapPolicy { keep_and_flag, clamp, reject };

struct LoadOptions
{
    CapPolicy cap_policy = CapPolicy::keep_and_flag;
};

namespace detail {

inline std::string_view trim(std::string_view s) noexcept
{
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line)
{
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            cells.push_back(trim(line.substr(start)));
            return cells;
        }
        cells.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
}

inline std::optional<double> parse_double(std::string_view text)
{
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
    return value;
}

} // namespace detail

/// Parses meal records from a stream holding the documented CSV layout.
/// Data rows are numbered from 1; the header is row 0.
inline std::vector<MealRecord> parse_meals_csv(std::istream& in, const LoadOptions& options = {})
{
    std::string line;
    if (!std::getline(in, line)) throw InputError("missing header line");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

    const auto header = detail::split_commas(line);
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (std::find(meal_csv_columns.begin(), meal_csv_columns.end(), header[c]) == meal_csv_columns.end())
            throw InputError("unknown column", 0, std::string(header[c]));
    }
    for (std::size_t c = 0; c < meal_csv_columns.size(); ++c) {
        if (c >= header.size() || header[c] != meal_csv_columns[c])
            throw InputError("missing or misplaced column", 0, std::string(meal_csv_columns[c]));
    }
    if (header.size() != meal_csv_columns.size()) throw InputError("unexpected extra columns", 0);

    std::vector<MealRecord> records;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::trim(line).empty()) continue;

        const auto cells = detail::split_commas(line);
        if (cells.size() != meal_csv_columns.size())
            throw InputError("expected " + std::to_string(meal_csv_columns.size()) + " cells, found " +
                                 std::to_string(cells.size()),
                             row);

        MealRecord rec;
        if (cells[0].empty()) throw InputError("empty user id", row, "user_id");
        rec.user_id = std::string(cells[0]);

        const auto meal = parse_meal_type(cells[1]);
        if (!meal) throw InputError("unknown meal type '" + std::string(cells[1]) + "'", row, "meal_type");
        rec.meal_type = *meal;

        auto nutrient = [&](std::size_t c) -> std::optional<double> {
            const auto col = std::string(meal_csv_columns[c]);
            if (cells[c].empty()) return std::nullopt;
            const auto v = detail::parse_double(cells[c]);
            if (!v) throw InputError("non-numeric value '" + std::string(cells[c]) + "'", row, col);
            if (!std::isfinite(*v) || *v < 0.0) throw InputError("nutrient must be finite and >= 0", row, col);
            if (*v > nutrient_cap_g) {
                switch (options.cap_policy) {
                    case CapPolicy::keep_and_flag: rec.over_cap = true; return *v;
                    case CapPolicy::clamp: rec.over_cap = true; return nutrient_cap_g;
                    case CapPolicy::reject: throw InputError("value above 100 g cap", row, col);
                }
            }
            return *v;
        };
        rec.carbs = nutrient(2);
        rec.fat = nutrient(3);
        rec.protein = nutrient(4);
        rec.fiber = nutrient(5);

        auto glucose = [&](std::size_t c) {
            const auto col = std::string(meal_csv_columns[c]);
            if (cells[c].empty()) throw InputError("missing blood glucose value", row, col);
            const auto v = detail::parse_double(cells[c]);
            if (!v) throw InputError("non-numeric value '" + std::string(cells[c]) + "'", row, col);
            if (!std::isfinite(*v) || *v <= 0.0) throw InputError("blood glucose must be finite and > 0", row, col);
            return *v;
        };
        rec.pre_bg = glucose(6);
        rec.post_bg = glucose(7);
        records.push_back(std::move(rec));
    }
    return records;
}

inline std::vector<MealRecord> load_meals_csv(const std::string& path, const LoadOptions& options = {})
{
    std::ifstream in(path);
    if (!in) throw InputError("cannot open meal file '" + path + "'");
    return parse_meals_csv(in, options);
}

namespace detail {

inline std::string format_number(double v)
{
    std::array<char, 32> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

} // namespace detail

inline void write_meals_csv(std::ostream& out, const std::vector<MealRecord>& records)
{
    for (std::size_t c = 0; c < meal_csv_columns.size(); ++c) out << (c ? "," : "") << meal_csv_columns[c];
    out << '\n';
    auto opt = [](const std::optional<double>& v) { return v ? detail::format_number(*v) : std::string{}; };
    for (const auto& r : records) {
        out << r.user_id << ',' << to_string(r.meal_type) << ',' << opt(r.carbs) << ',' << opt(r.fat) << ','
            << opt(r.protein) << ',' << opt(r.fiber) << ',' << detail::format_number(r.pre_bg) << ','
            << detail::format_number(r.post_bg) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Covariates and datasets
// ---------------------------------------------------------------------------

/// Unordered categories; values are stored as level indices.
struct Categorical
{
    std::vector<std::string> levels;
    bool operator==(const Categorical&) const = default;
};

/// Real covariate represented on a grid of strictly increasing nodes.
struct RealGrid
{
    std::vector<double> nodes;
    std::string units;
    bool operator==(const RealGrid&) const = default;
};

/// Real covariate represented by learned prototypes. `prototypes` is empty
/// until resolved against data (see resolve_prototypes), then sorted ascending.
struct Prototyped
{
    std::size_t count = 1;
    double locality_penalty = 0.0;
    std::vector<double> prototypes;
    std::string units;
    bool operator==(const Prototyped&) const = default;
};

struct CovariateSpec
{
    std::string name;
    std::variant<Categorical, RealGrid, Prototyped> kind;

    bool is_categorical() const noexcept { return std::holds_alternative<Categorical>(kind); }

    /// Number of assignment columns (levels, nodes or prototypes).
    std::size_t size() const
    {
        return std::visit(
            [](const auto& k) -> std::size_t {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, Categorical>) return k.levels.size();
                else if constexpr (std::is_same_v<K, RealGrid>) return k.nodes.size();
                else return k.prototypes.empty() ? k.count : k.prototypes.size();
            },
            kind);
    }

    std::string units() const
    {
        if (const auto* g = std::get_if<RealGrid>(&kind)) return g->units;
        if (const auto* p = std::get_if<Prototyped>(&kind)) return p->units;
        return "category";
    }

    void validate() const
    {
        if (name.empty()) throw Error("covariate name must not be empty");
        std::visit(
            [&](const auto& k) {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, Categorical>) {
                    if (k.levels.empty()) throw Error("covariate '" + name + "': no categorical levels");
                    std::set<std::string> seen(k.levels.begin(), k.levels.end());
                    if (seen.size() != k.levels.size())
                        throw Error("covariate '" + name + "': duplicate categorical levels");
                } else if constexpr (std::is_same_v<K, RealGrid>) {
                    if (k.nodes.size() < 2) throw Error("covariate '" + name + "': grid needs at least 2 nodes");
                    for (std::size_t j = 0; j < k.nodes.size(); ++j) {
                        if (!std::isfinite(k.nodes[j]) || (j > 0 && !(k.nodes[j] > k.nodes[j - 1])))
                            throw Error("covariate '" + name + "': grid nodes must be finite and strictly increasing");
                    }
                } else {
                    if (k.count < 1) throw Error("covariate '" + name + "': prototype count must be >= 1");
                    if (!(k.locality_penalty >= 0.0))
                        throw Error("covariate '" + name + "': locality penalty must be >= 0");
                    if (!k.prototypes.empty() && !std::is_sorted(k.prototypes.begin(), k.prototypes.end()))
                        throw Error("covariate '" + name + "': prototypes must be sorted");
                }
            },
            kind);
    }

    bool operator==(const CovariateSpec&) const = default;
};

/// One covariate column. Real values are in native units, categorical values
/// are level indices; NaN marks a missing entry.
struct Covariate
{
    CovariateSpec spec;
    std::vector<double> values;
};

/// Response vector x plus L typed covariate columns of equal length m.
class Dataset
{
public:
    Dataset(std::vector<double> x, std::vector<Covariate> covariates, std::string provenance = {})
        : x_(std::move(x)), covariates_(std::move(covariates)), provenance_(std::move(provenance))
    {
        if (x_.empty()) throw Error("dataset must contain at least one observation");
        for (double v : x_) {
            if (!std::isfinite(v)) throw Error("dataset response values must be finite");
        }
        std::set<std::string> names;
        for (const auto& c : covariates_) {
            c.spec.validate();
            if (!names.insert(c.spec.name).second) throw Error("duplicate covariate name '" + c.spec.name + "'");
            if (c.values.size() != x_.size())
                throw ShapeError("covariate '" + c.spec.name + "' has " + std::to_string(c.values.size()) +
                                 " entries, expected " + std::to_string(x_.size()));
            if (c.spec.is_categorical()) {
                const auto levels = static_cast<double>(c.spec.size());
                for (double v : c.values) {
                    if (!is_missing(v) && (v < 0 || v >= levels || v != std::floor(v)))
                        throw Error("covariate '" + c.spec.name + "': invalid level index");
                }
            } else {
                for (double v : c.values) {
                    if (std::isinf(v)) throw Error("covariate '" + c.spec.name + "': infinite value");
                }
            }
        }
    }

    std::size_t m() const noexcept { return x_.size(); }
    std::size_t L() const noexcept { return covariates_.size(); }
    const std::vector<double>& x() const noexcept { return x_; }
    const std::vector<Covariate>& covariates() const noexcept { return covariates_; }
    const Covariate& covariate(std::size_t l) const { return covariates_.at(l); }
    const std::string& provenance() const noexcept { return provenance_; }

    std::vector<CovariateSpec> specs() const
    {
        std::vector<CovariateSpec> out;
        out.reserve(covariates_.size());
        for (const auto& c : covariates_) out.push_back(c.spec);
        return out;
    }

    std::optional<std::size_t> find(std::string_view name) const noexcept
    {
        for (std::size_t l = 0; l < covariates_.size(); ++l) {
            if (covariates_[l].spec.name == name) return l;
        }
        return std::nullopt;
    }

    std::size_t index_of(std::string_view name) const
    {
        if (auto l = find(name)) return *l;
        throw Error("unknown covariate '" + std::string(name) + "'");
    }

    /// Rows `rows` of this dataset (repeats allowed), keeping specs unchanged.
    Dataset select_rows(const std::vector<std::size_t>& rows, std::string provenance) const
    {
        std::vector<double> x;
        x.reserve(rows.size());
        for (auto r : rows) x.push_back(x_.at(r));
        std::vector<Covariate> cols;
        cols.reserve(covariates_.size());
        for (const auto& c : covariates_) {
            Covariate out{c.spec, {}};
            out.values.reserve(rows.size());
            for (auto r : rows) out.values.push_back(c.values[r]);
            cols.push_back(std::move(out));
        }
        return Dataset(std::move(x), std::move(cols), std::move(provenance));
    }

private:
    std::vector<double> x_;
    std::vector<Covariate> covariates_;
    std::string provenance_;
};

// ---------------------------------------------------------------------------
// Grids and dataset assembly
// ---------------------------------------------------------------------------

inline constexpr std::size_t default_grid_nodes = 11;
inline constexpr std::size_t default_min_meals = 30;

/// n_nodes equally spaced nodes over [min, max] of the non-missing values.
/// A constant column gets the two nodes value - 0.5 and value + 0.5.
inline std::vector<double> build_grid(const std::vector<double>& values, std::size_t n_nodes)
{
    if (n_nodes < 2) throw Error("build_grid: at least 2 nodes required");
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (double v : values) {
        if (is_missing(v)) continue;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (!std::isfinite(lo) || !std::isfinite(hi)) throw Error("build_grid: all values missing");
    if (lo == hi) return {lo - 0.5, hi + 0.5};

    std::vector<double> nodes(n_nodes);
    const double span = hi - lo;
    const auto steps = static_cast<double>(n_nodes - 1);
    for (std::size_t j = 0; j < n_nodes; ++j) nodes[j] = lo + span * (static_cast<double>(j) / steps);
    nodes.front() = lo;
    nodes.back() = hi;
    return nodes;
}

struct BuildOptions
{
    std::size_t grid_nodes = default_grid_nodes;
    /// Add meal_type as a categorical covariate for unfiltered (pooled) fits.
    bool include_meal_type = true;
};

inline constexpr std::array<std::string_view, 5> real_covariate_names{"carbs", "fat", "protein", "fiber", "pre_bg"};

/// Dataset for one user, optionally restricted to one meal type. The
/// min_meals threshold applies to the user's total meal count.
inline Dataset build_dataset(const std::vector<MealRecord>& records, const std::string& user,
                             std::optional<MealType> meal_filter = std::nullopt,
                             std::size_t min_meals = default_min_meals, const BuildOptions& options = {})
{
    std::size_t total = 0;
    std::vector<const MealRecord*> rows;
    for (const auto& r : records) {
        if (r.user_id != user) continue;
        ++total;
        if (!meal_filter || r.meal_type == *meal_filter) rows.push_back(&r);
    }
    if (total < min_meals) throw InsufficientDataError(user, total, min_meals);
    if (rows.empty())
        throw Error("no meals of type '" + std::string(to_string(*meal_filter)) + "' for user '" + user + "'");

    std::vector<double> x;
    x.reserve(rows.size());
    std::array<std::vector<double>, 5> cols;
    auto val = [](const std::optional<double>& v) { return v ? *v : missing_value; };
    for (const auto* r : rows) {
        x.push_back(bg_impact(r->pre_bg, r->post_bg));
        cols[0].push_back(val(r->carbs));
        cols[1].push_back(val(r->fat));
        cols[2].push_back(val(r->protein));
        cols[3].push_back(val(r->fiber));
        cols[4].push_back(r->pre_bg);
    }

    std::vector<Covariate> covariates;
    for (std::size_t c = 0; c < cols.size(); ++c) {
        const std::string name(real_covariate_names[c]);
        const std::string units = c == 4 ? "mg/dl" : "g";
        covariates.push_back({CovariateSpec{name, RealGrid{build_grid(cols[c], options.grid_nodes), units}},
                              std::move(cols[c])});
    }
    if (!meal_filter && options.include_meal_type) {
        // Only levels that occur; unobserved levels would carry unidentified factor rows.
        Categorical cat;
        std::array<int, all_meal_types.size()> level_of{};
        for (auto t : all_meal_types) {
            const bool seen = std::any_of(rows.begin(), rows.end(), [t](const auto* r) { return r->meal_type == t; });
            level_of[static_cast<std::size_t>(t)] = seen ? static_cast<int>(cat.levels.size()) : -1;
            if (seen) cat.levels.emplace_back(to_string(t));
        }
        std::vector<double> idx;
        idx.reserve(rows.size());
        for (const auto* r : rows) idx.push_back(level_of[static_cast<std::size_t>(r->meal_type)]);
        covariates.push_back({CovariateSpec{"meal_type", std::move(cat)}, std::move(idx)});
    }

    std::string provenance = "user=" + user + " subset=" +
                             (meal_filter ? std::string(to_string(*meal_filter)) : std::string("all")) +
                             " m=" + std::to_string(rows.size());
    return Dataset(std::move(x), std::move(covariates), std::move(provenance));
}

/// Distinct user ids in first-appearance order.
inline std::vector<std::string> list_users(const std::vector<MealRecord>& records)
{
    std::vector<std::string> users;
    for (const auto& r : records) {
        if (std::find(users.begin(), users.end(), r.user_id) == users.end()) users.push_back(r.user_id);
    }
    return users;
}

} // namespace aca
