#pragma once
#include <algorithm>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fertgrid/common.hpp"
#include "fertgrid/csv.hpp"

namespace fertgrid {

// One report observation: fertilizer to grasslands+fodder and to all
// agriculture, with the matching surfaces.
struct ShareObservation {
    std::string country;
    std::string nutrient;
    int year = 0;
    double q_f = 0.0; // fertilizer to grasslands+fodder, t
    double q_a = 0.0; // total agricultural fertilizer, t
    double a_f = 0.0; // grassland+fodder area, ha
    double a_a = 0.0; // total agricultural area, ha

    void validate() const {
        if (!(q_f >= 0.0) || q_f > q_a)
            throw std::invalid_argument("ShareObservation: need 0 <= Q_f <= Q_a");
        if (!(a_f > 0.0) || a_f > a_a)
            throw std::invalid_argument("ShareObservation: need 0 < A_f <= A_a");
    }
};

// Intensity ratio between grassland+fodder fertilization and all-agriculture
// fertilization.
inline double ratio_rfa(const ShareObservation& obs) {
    if (!(obs.q_a > 0.0)) throw std::invalid_argument("ratio_rfa: Q_a must be > 0");
    if (!(obs.a_f > 0.0)) throw std::invalid_argument("ratio_rfa: A_f must be > 0");
    return (obs.q_f * obs.a_a) / (obs.q_a * obs.a_f);
}

// Per-year surfaces a share series is evaluated against.
struct AreaSeries {
    int start_year = 0;
    std::vector<double> a_f;
    std::vector<double> a_a;

    std::size_t size() const { return a_f.size(); }
    int year_at(std::size_t i) const { return start_year + int(i); }

    std::optional<std::size_t> index_of(int year) const {
        if (year < start_year || year >= start_year + int(size())) return std::nullopt;
        return std::size_t(year - start_year);
    }
};

enum class ShareMethod { InterpR, MeanR, Fixed, Blended, MidpointCap };

inline std::string to_string(ShareMethod m) {
    switch (m) {
        case ShareMethod::InterpR: return "interp-R";
        case ShareMethod::MeanR: return "mean-R";
        case ShareMethod::Fixed: return "fixed";
        case ShareMethod::Blended: return "blended";
        default: return "midpoint-cap";
    }
}

struct ShareEntry {
    int year = 0;
    double share = 0.0;
    ShareMethod method = ShareMethod::Fixed;
    bool clamped = false;
};

struct ShareSeries {
    std::string country;
    std::string nutrient;
    std::vector<ShareEntry> entries; // contiguous, ascending years

    std::size_t clamp_count() const {
        std::size_t n = 0;
        for (const auto& e : entries) n += e.clamped ? 1 : 0;
        return n;
    }
};

namespace detail {

inline ShareEntry clamp_share(int year, double share, ShareMethod method) {
    ShareEntry e;
    e.year = year;
    e.method = method;
    if (share < 0.0) {
        e.share = 0.0;
        e.clamped = true;
    } else if (share > 1.0) {
        e.share = 1.0;
        e.clamped = true;
    } else {
        e.share = share;
    }
    return e;
}

} // namespace detail

// share_i = mean_R * A_f_i / A_a_i, clamped into [0,1].
inline ShareSeries share_from_mean_r(double mean_r, const AreaSeries& areas) {
    if (!(mean_r >= 0.0)) throw std::invalid_argument("share_from_mean_r: mean_r must be >= 0");
    ShareSeries out;
    for (std::size_t i = 0; i < areas.size(); ++i)
        out.entries.push_back(detail::clamp_share(
            areas.year_at(i), mean_r * areas.a_f[i] / areas.a_a[i], ShareMethod::MeanR));
    return out;
}

// Piecewise-linear R across years, held constant beyond the outermost points;
// anchors are just additional (year, R) knots.
inline ShareSeries share_from_interp_r(std::vector<std::pair<int, double>> r_points,
                                       const AreaSeries& areas) {
    if (r_points.empty()) throw std::invalid_argument("share_from_interp_r: need >= 1 point");
    std::sort(r_points.begin(), r_points.end());
    for (std::size_t i = 1; i < r_points.size(); ++i)
        if (r_points[i].first == r_points[i - 1].first)
            throw std::invalid_argument("share_from_interp_r: duplicate year knot");

    auto r_at = [&](int year) {
        if (year <= r_points.front().first) return r_points.front().second;
        if (year >= r_points.back().first) return r_points.back().second;
        for (std::size_t i = 1; i < r_points.size(); ++i) {
            if (year <= r_points[i].first) {
                const auto [y0, r0] = r_points[i - 1];
                const auto [y1, r1] = r_points[i];
                const double t = double(year - y0) / double(y1 - y0);
                return r0 + t * (r1 - r0);
            }
        }
        return r_points.back().second;
    };

    ShareSeries out;
    for (std::size_t i = 0; i < areas.size(); ++i)
        out.entries.push_back(detail::clamp_share(
            areas.year_at(i), r_at(areas.year_at(i)) * areas.a_f[i] / areas.a_a[i],
            ShareMethod::InterpR));
    return out;
}

// MAE of a series against sparse reported shares, in percentage points,
// with sample standard deviation.
inline MeanSd evaluate_share_mae(const ShareSeries& series,
                                 const std::vector<std::pair<int, double>>& reported) {
    std::vector<double> errs;
    for (const auto& [year, share] : reported)
        for (const auto& e : series.entries)
            if (e.year == year) errs.push_back(std::abs(e.share - share) * 100.0);
    if (errs.empty())
        throw std::runtime_error("evaluate_share_mae: no overlapping reported year");
    return mean_sd(errs);
}

// ----------------------------------------------------------------------------
// Declarative country rules
//
// One document per country; '#' starts a comment. Grammar:
//
//   country: AUT
//   note: free text
//   rule N 1961-1969: mean_r
//   rule N 1970-1990: interp_r anchor=1970:0.41
//   rule P2O5 1961-2019: blend(mean_r; fixed 0.1)
//   rule K2O 1961-2019: midpoint_cap
//
// mean_r without a value averages the R ratios of the country's observations;
// interp_r interpolates them (anchors add extra knots). Documents in one file
// are separated by a line of three dashes.
// ----------------------------------------------------------------------------

struct CountryRule {
    struct Span {
        std::string nutrient;
        int from = 0;
        int to = 0;
        std::string expr;
    };
    std::string country;
    std::string note;
    std::vector<Span> spans;
};

inline std::vector<CountryRule> parse_rules(std::istream& in) {
    std::vector<CountryRule> out;
    CountryRule cur;
    bool any = false;
    std::string line;
    auto flush = [&]() {
        if (any) {
            if (cur.country.empty()) throw std::runtime_error("rule document without country:");
            out.push_back(cur);
        }
        cur = CountryRule{};
        any = false;
    };
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (line == "---") {
            flush();
            continue;
        }
        any = true;
        if (line.rfind("country:", 0) == 0) {
            cur.country = line.substr(8);
            while (!cur.country.empty() && cur.country.front() == ' ')
                cur.country.erase(cur.country.begin());
        } else if (line.rfind("note:", 0) == 0) {
            cur.note = line.substr(5);
        } else if (line.rfind("rule ", 0) == 0) {
            const auto colon = line.find(':');
            if (colon == std::string::npos)
                throw std::runtime_error("rule line missing ':': " + line);
            std::istringstream head(line.substr(5, colon - 5));
            CountryRule::Span span;
            std::string span_txt;
            head >> span.nutrient >> span_txt;
            const auto dash = span_txt.find('-');
            if (dash == std::string::npos)
                throw std::runtime_error("rule span must be from-to: " + line);
            span.from = std::stoi(span_txt.substr(0, dash));
            span.to = std::stoi(span_txt.substr(dash + 1));
            if (span.to < span.from) throw std::runtime_error("rule span reversed: " + line);
            span.expr = line.substr(colon + 1);
            while (!span.expr.empty() && span.expr.front() == ' ')
                span.expr.erase(span.expr.begin());
            cur.spans.push_back(std::move(span));
        } else {
            throw std::runtime_error("unrecognised rule line: " + line);
        }
    }
    flush();
    return out;
}

inline std::vector<CountryRule> parse_rules_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open rule file: " + path);
    return parse_rules(in);
}

// Evaluation context: the observations and area series a rule may reference.
struct RuleContext {
    std::vector<ShareObservation> observations; // already filtered per country+nutrient
    AreaSeries areas;
};

namespace detail {

inline std::vector<std::pair<int, double>> observed_r_points(const RuleContext& ctx) {
    std::vector<std::pair<int, double>> pts;
    for (const auto& obs : ctx.observations) pts.push_back({obs.year, ratio_rfa(obs)});
    std::sort(pts.begin(), pts.end());
    return pts;
}

// expr := fixed <v> | mean_r [<v>] | interp_r [anchor=<year>:<r>]...
//       | blend(<expr>; <expr>) | midpoint_cap
inline ShareSeries eval_expr(const std::string& expr, const RuleContext& ctx);

inline ShareSeries eval_blend(const std::string& args, const RuleContext& ctx) {
    int depth = 0;
    std::size_t split = std::string::npos;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == '(') depth++;
        else if (args[i] == ')') depth--;
        else if (args[i] == ';' && depth == 0) {
            split = i;
            break;
        }
    }
    if (split == std::string::npos)
        throw std::runtime_error("blend needs two ';'-separated parts: " + args);
    ShareSeries a = eval_expr(args.substr(0, split), ctx);
    ShareSeries b = eval_expr(args.substr(split + 1), ctx);
    if (a.entries.size() != b.entries.size())
        throw std::runtime_error("blend parts cover different spans");
    ShareSeries out;
    for (std::size_t i = 0; i < a.entries.size(); ++i) {
        ShareEntry e = clamp_share(a.entries[i].year,
                                   0.5 * (a.entries[i].share + b.entries[i].share),
                                   ShareMethod::Blended);
        e.clamped = e.clamped || a.entries[i].clamped || b.entries[i].clamped;
        out.entries.push_back(e);
    }
    return out;
}

inline ShareSeries eval_expr(const std::string& raw, const RuleContext& ctx) {
    std::string expr = raw;
    while (!expr.empty() && expr.front() == ' ') expr.erase(expr.begin());
    while (!expr.empty() && expr.back() == ' ') expr.pop_back();
    if (expr.rfind("blend(", 0) == 0) {
        if (expr.back() != ')') throw std::runtime_error("unterminated blend: " + expr);
        return eval_blend(expr.substr(6, expr.size() - 7), ctx);
    }
    std::istringstream s(expr);
    std::string head;
    s >> head;
    if (head == "fixed") {
        double v = 0.0;
        if (!(s >> v)) throw std::runtime_error("fixed needs a value: " + expr);
        ShareSeries out;
        for (std::size_t i = 0; i < ctx.areas.size(); ++i)
            out.entries.push_back(clamp_share(ctx.areas.year_at(i), v, ShareMethod::Fixed));
        return out;
    }
    if (head == "mean_r") {
        double v = 0.0;
        if (s >> v) return share_from_mean_r(v, ctx.areas);
        auto pts = observed_r_points(ctx);
        if (pts.empty())
            throw std::runtime_error("mean_r without observations for this series");
        double sum = 0.0;
        for (const auto& [_, r] : pts) sum += r;
        return share_from_mean_r(sum / double(pts.size()), ctx.areas);
    }
    if (head == "interp_r") {
        auto pts = observed_r_points(ctx);
        std::string tok;
        while (s >> tok) {
            if (tok.rfind("anchor=", 0) != 0)
                throw std::runtime_error("interp_r option must be anchor=year:R: " + expr);
            const auto body = tok.substr(7);
            const auto colon = body.find(':');
            if (colon == std::string::npos)
                throw std::runtime_error("anchor must be year:R: " + tok);
            const int year = std::stoi(body.substr(0, colon));
            const double r = std::stod(body.substr(colon + 1));
            std::erase_if(pts, [&](const auto& p) { return p.first == year; });
            pts.push_back({year, r});
        }
        if (pts.empty())
            throw std::runtime_error("interp_r without observations or anchors");
        return share_from_interp_r(pts, ctx.areas);
    }
    if (head == "midpoint_cap") {
        // mid-value between full allocation and the grassland+fodder land share
        ShareSeries out;
        for (std::size_t i = 0; i < ctx.areas.size(); ++i)
            out.entries.push_back(clamp_share(
                ctx.areas.year_at(i),
                0.5 * (1.0 + ctx.areas.a_f[i] / ctx.areas.a_a[i]), ShareMethod::MidpointCap));
        return out;
    }
    throw std::runtime_error("unknown share rule method: " + expr);
}

} // namespace detail

// Evaluate one country rule for one nutrient over [from_year, to_year]. Spans
// must jointly cover the requested years; each span evaluates against the
// areas restricted to it.
inline ShareSeries apply_country_rule(const CountryRule& rule, const std::string& nutrient,
                                      int from_year, int to_year, const RuleContext& full_ctx) {
    ShareSeries out;
    out.country = rule.country;
    out.nutrient = nutrient;
    std::map<int, ShareEntry> by_year;
    for (const auto& span : rule.spans) {
        if (span.nutrient != nutrient) continue;
        const int lo_year = std::max(span.from, from_year);
        const int hi_year = std::min(span.to, to_year);
        if (lo_year > hi_year) continue;
        const auto lo = full_ctx.areas.index_of(lo_year);
        const auto hi = full_ctx.areas.index_of(hi_year);
        if (!lo || !hi)
            throw std::runtime_error("rule span outside the provided area series for " +
                                     rule.country);
        RuleContext ctx;
        ctx.observations = full_ctx.observations;
        ctx.areas.start_year = lo_year;
        ctx.areas.a_f.assign(full_ctx.areas.a_f.begin() + std::ptrdiff_t(*lo),
                             full_ctx.areas.a_f.begin() + std::ptrdiff_t(*hi + 1));
        ctx.areas.a_a.assign(full_ctx.areas.a_a.begin() + std::ptrdiff_t(*lo),
                             full_ctx.areas.a_a.begin() + std::ptrdiff_t(*hi + 1));
        ShareSeries span_series = detail::eval_expr(span.expr, ctx);
        for (const auto& e : span_series.entries)
            by_year.emplace(e.year, e); // first matching span wins
    }
    for (int year = from_year; year <= to_year; ++year) {
        auto it = by_year.find(year);
        if (it == by_year.end())
            throw std::runtime_error("no rule span for " + rule.country + " " + nutrient +
                                     " year " + std::to_string(year));
        out.entries.push_back(it->second);
    }
    return out;
}

// Share table emission: (country, nutrient, year, share, method, clamped).
inline Table share_table(const std::vector<ShareSeries>& series) {
    Table t;
    t.columns = {"country", "nutrient", "year", "share", "method", "clamped"};
    for (const auto& s : series)
        for (const auto& e : s.entries)
            t.rows.push_back({s.country, s.nutrient, std::to_string(e.year),
                              format_cell(e.share), to_string(e.method),
                              e.clamped ? "1" : "0"});
    return t;
}

} // namespace fertgrid
