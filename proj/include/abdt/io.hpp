#pragma once
// CSV ingestion and JSON / CSV output for the command-line tool.
//
// Input CSV: comma separated, UTF-8, dot decimal, header row mandatory.
// Columns (any order): lift, stderr, and optionally feature_id (default
// "anon") and seq (default 0). Fields may be double-quoted.

#include <abdt/core_model.hpp>
#include <abdt/error.hpp>
#include <abdt/policy_sim.hpp>
#include <abdt/prior_fit.hpp>
#include <abdt/risk_engine.hpp>
#include <abdt/sequential.hpp>

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

namespace abdt::io {

using nlohmann::json;

// Output precision: 6 significant digits unless raw.
struct Format {
    bool raw = false;

    double num(double v) const {
        if (raw || !std::isfinite(v)) return v;
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6g", v);
        return std::strtod(buf, nullptr);
    }

    std::string text(double v) const {
        char buf[40];
        std::snprintf(buf, sizeof buf, raw ? "%.17g" : "%.6g", v);
        return buf;
    }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line, std::size_t row) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (quoted) throw ParseError("unterminated quote", row);
    out.push_back(cur);
    for (auto& f : out) {
        f.erase(0, f.find_first_not_of(" \t"));
        f.erase(f.find_last_not_of(" \t") + 1);
    }
    return out;
}

inline double parse_real(const std::string& s, const char* column, std::size_t row) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size())
        throw ParseError(std::string("column '") + column + "' is not a number: '" + s + "'", row);
    return v;
}

}  // namespace detail

inline std::vector<ExperimentRecord> read_records(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("missing header row");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = detail::split_csv_line(line, 0);
    int c_id = -1, c_lift = -1, c_se = -1, c_seq = -1;
    for (int i = 0; i < static_cast<int>(header.size()); ++i) {
        const auto& h = header[static_cast<std::size_t>(i)];
        int* slot = h == "feature_id" ? &c_id : h == "lift" ? &c_lift : h == "stderr" ? &c_se : h == "seq" ? &c_seq : nullptr;
        if (!slot) continue;
        if (*slot >= 0) throw ParseError("duplicate column '" + h + "'");
        *slot = i;
    }
    if (c_lift < 0 || c_se < 0) throw ParseError("header must name 'lift' and 'stderr' columns");

    std::vector<ExperimentRecord> out;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        ++row;
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        const auto f = detail::split_csv_line(line, row);
        if (f.size() != header.size())
            throw ParseError("expected " + std::to_string(header.size()) + " fields, found " + std::to_string(f.size()),
                             row);
        ExperimentRecord r;
        if (c_id >= 0 && !f[static_cast<std::size_t>(c_id)].empty()) r.feature_id = f[static_cast<std::size_t>(c_id)];
        r.lift_estimate = detail::parse_real(f[static_cast<std::size_t>(c_lift)], "lift", row);
        r.std_error = detail::parse_real(f[static_cast<std::size_t>(c_se)], "stderr", row);
        if (c_seq >= 0) {
            const auto& s = f[static_cast<std::size_t>(c_seq)];
            char* end = nullptr;
            const long v = std::strtol(s.c_str(), &end, 10);
            if (s.empty() || end != s.c_str() + s.size()) throw ParseError("column 'seq' is not an integer: '" + s + "'", row);
            if (v < 0) throw DomainError("seq must be non-negative", row);
            r.replicate_index = static_cast<unsigned>(v);
        }
        if (!std::isfinite(r.lift_estimate)) throw DomainError("lift must be finite", row);
        if (!(std::isfinite(r.std_error) && r.std_error > 0.0))
            throw DomainError("stderr must be positive (row " + std::to_string(row) + ")", row);
        out.push_back(std::move(r));
    }
    return out;
}

// Groups records by feature_id, ordered by seq; seq must be unique per feature.
inline std::map<std::string, FeatureHistory> group_histories(const std::vector<ExperimentRecord>& records) {
    std::map<std::string, std::vector<std::pair<unsigned, Observation>>> groups;
    for (const auto& r : records)
        groups[r.feature_id].push_back({r.replicate_index.value_or(0), {r.lift_estimate, r.std_error}});
    std::map<std::string, FeatureHistory> out;
    for (auto& [id, obs] : groups) {
        std::stable_sort(obs.begin(), obs.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        for (std::size_t i = 1; i < obs.size(); ++i)
            if (obs[i].first == obs[i - 1].first)
                throw DomainError("duplicate seq " + std::to_string(obs[i].first) + " for feature '" + id + "'");
        FeatureHistory h{id, {}};
        for (const auto& [seq, o] : obs) h.observations.push_back(o);
        out.emplace(id, std::move(h));
    }
    return out;
}

inline json to_json(const PriorSpec& p, const Format& f = {}) {
    if (p.is_gaussian()) return {{"family", "gaussian"}, {"mu", f.num(p.mu)}, {"tau", f.num(p.tau)}};
    return {{"family", "student_t"}, {"nu", f.num(p.nu)}, {"mu", f.num(p.mu)}, {"tau", f.num(p.tau)}};
}

// Accepts a prior object or a fit summary (its "plug_in" member).
inline PriorSpec prior_from_json(const json& j) {
    try {
        const json& p = j.contains("plug_in") ? j.at("plug_in") : j;
        const auto family = p.at("family").get<std::string>();
        const double mu = p.at("mu").get<double>();
        const double tau = p.at("tau").get<double>();
        if (family == "gaussian") return PriorSpec::gaussian(mu, tau);
        if (family == "student_t") return PriorSpec::student_t(p.at("nu").get<double>(), mu, tau);
        throw ParseError("unknown prior family '" + family + "'");
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad prior JSON: ") + e.what());
    }
}

inline PriorSpec prior_from_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad prior JSON: ") + e.what());
    }
    return prior_from_json(j);
}

inline json to_json(const ParamSummary& s, const Format& f = {}) {
    return {{"mean", f.num(s.mean)}, {"sd", f.num(s.sd)}, {"q025", f.num(s.q025)}, {"q50", f.num(s.q50)},
            {"q975", f.num(s.q975)}};
}

inline json to_json(const PosteriorSummary& s, const Format& f = {}) {
    return {{"nu", to_json(s.nu, f)},
            {"mu", to_json(s.mu, f)},
            {"tau", to_json(s.tau, f)},
            {"acceptance_rate", f.num(s.acceptance_rate)},
            {"n_kept", s.n_kept},
            {"converged", s.converged},
            {"plug_in", to_json(s.plug_in, f)}};
}

inline json to_json(const ThresholdRule& r, const Format& f = {}) {
    return {{"beta", f.num(r.beta)}, {"sigma", f.num(r.sigma)}, {"p_cutoff", f.num(r.p_cutoff)}};
}

inline json to_json(const PosteriorLift& p, const Format& f = {}) {
    auto v = [&](double x) { return std::isfinite(x) ? json(f.num(x)) : json(nullptr); };
    return {{"precision_sum", v(p.precision_sum)},
            {"weighted_sum", v(p.weighted_sum)},
            {"mean", v(p.mean)},
            {"variance", v(p.variance)}};
}

inline json to_json(const SimReport& r, const Format& f = {}) {
    json pols = json::array();
    for (const auto& p : r.policies) {
        json j = {{"policy", p.name},
                  {"total_realized_lift", f.num(p.total_realized_lift)},
                  {"ship_rate", f.num(p.ship_rate)},
                  {"mean_loss", f.num(p.mean_loss)},
                  {"std_error", f.num(p.std_error)},
                  {"n_features", r.n_features},
                  {"seed", r.seed}};
        j["beta"] = p.beta ? json(f.num(*p.beta)) : json(nullptr);
        pols.push_back(std::move(j));
    }
    return {{"n_features", r.n_features}, {"seed", r.seed}, {"policies", pols}};
}

inline void write_curve_csv(std::ostream& os, const RiskCurve& c, const Format& f = {}) {
    os << "beta,risk\n";
    for (const auto& p : c.points) os << f.text(p.beta) << ',' << f.text(p.risk) << '\n';
}

inline void write_sigma_curve_csv(std::ostream& os, const std::vector<SigmaCurvePoint>& pts, const Format& f = {}) {
    os << "sigma,beta_opt,risk\n";
    for (const auto& p : pts) os << f.text(p.sigma) << ',' << f.text(p.beta_opt) << ',' << f.text(p.risk_at_opt) << '\n';
}

inline void write_qq_csv(std::ostream& os, const std::vector<QqPoint>& pts, const Format& f = {}) {
    os << "empirical,fitted\n";
    for (const auto& p : pts) os << f.text(p.empirical) << ',' << f.text(p.fitted) << '\n';
}

// "min:max:step"
inline BetaGrid parse_grid(const std::string& s) {
    const auto a = s.find(':');
    const auto b = a == std::string::npos ? a : s.find(':', a + 1);
    if (a == std::string::npos || b == std::string::npos || s.find(':', b + 1) != std::string::npos)
        throw ParseError("range must look like min:max:step, got '" + s + "'");
    BetaGrid g{detail::parse_real(s.substr(0, a), "min", 0), detail::parse_real(s.substr(a + 1, b - a - 1), "max", 0),
               detail::parse_real(s.substr(b + 1), "step", 0)};
    g.validate();
    return g;
}

}  // namespace abdt::io
