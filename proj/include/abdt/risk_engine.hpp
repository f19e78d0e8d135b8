#pragma once
// Bayes risk of "ship iff x > beta" under a Gaussian or Student-t lift prior:
//
//     r(beta) = -Integral d * Phi((d - beta) / sigma) * prior(d) dd
//
// evaluated by adaptive Gauss-Kronrod quadrature, plus grid search for the
// optimal cutoff and a Monte-Carlo estimator used as an independent check.
//
// Far from the prior mass the risk curve is flat to many orders of magnitude
// below double resolution (for a Gaussian prior the optimum sits where r is
// of order exp(-mu^2 (sigma^2 + tau^2) / (2 tau^4))). The integral is
// therefore computed as a scaled value sign * exp(log_abs): the integrand is
// evaluated in log space and normalised by its peak before integrating.
// When the prior location is positive the risk is written through the
// reflected prior as
//
//     r(beta) = -mean + D(-beta; reflected prior),
//
// so the part that varies with beta is again a small scaled quantity rather
// than a rounding-level perturbation of -mean. Risks are only compared inside
// one form (RiskValue::offset), and both forms agree to quadrature accuracy.
//
// Domain handling: the integrand decays like a Gaussian on the side where
// Phi -> 0, so the left end is walked out until the log-integrand is 60 below
// its peak. Past max(mu, beta) + 12 (sigma + tau) Phi is 1 within 1e-33 and the
// remainder is the closed-form partial mean of the prior, which covers the
// heavy right tail of the t prior exactly. Quadrature tolerance is 1e-11
// relative to the result (absolute error below 1e-12 at typical lift scales).

#include <abdt/core_model.hpp>
#include <abdt/error.hpp>
#include <abdt/normal.hpp>
#include <abdt/parallel.hpp>
#include <abdt/quadrature.hpp>
#include <abdt/random.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace abdt {

// offset + sign * exp(log_abs).
struct RiskValue {
    double offset = 0.0;
    int sign = 0;
    double log_abs = -std::numeric_limits<double>::infinity();

    double value() const { return sign == 0 ? offset : offset + sign * std::exp(log_abs); }

    // Strict ordering; both values must come from the same form (equal offset).
    friend bool operator<(const RiskValue& a, const RiskValue& b) {
        if (a.sign != b.sign) return a.sign < b.sign;
        if (a.sign > 0) return a.log_abs < b.log_abs;
        if (a.sign < 0) return a.log_abs > b.log_abs;
        return false;
    }
};

struct BetaGrid {
    double min = -1.0;
    double max = 1.0;
    double step = 0.005;

    void validate() const {
        detail::require(std::isfinite(min) && std::isfinite(max) && min < max, "grid needs min < max");
        detail::require(std::isfinite(step) && step > 0.0, "grid step must be positive");
        detail::require(size() >= 3, "grid needs at least 3 points");
    }

    std::size_t size() const {
        if (!(max > min) || !(step > 0.0)) return 0;
        return static_cast<std::size_t>(std::floor((max - min) / step + 1e-9)) + 1;
    }

    double at(std::size_t i) const { return min + static_cast<double>(i) * step; }
};

struct RiskPoint {
    double beta;
    double risk;
};

struct RiskCurve {
    std::vector<RiskPoint> points;
    double argmin_beta = 0.0;
    double argmin_risk = 0.0;
};

struct OptimalThreshold {
    ThresholdRule rule;        // grid argmin with its p-value cutoff at sigma
    RiskCurve curve;
    double beta_refined = 0.0; // golden-section refinement within one grid step
    double risk_refined = 0.0;
};

struct McEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
};

namespace detail {

struct ScaledIntegral {
    int sign = 0;
    double log_abs = -std::numeric_limits<double>::infinity();
};

inline ScaledIntegral scaled_add(ScaledIntegral a, int sign_b, double log_b) {
    if (sign_b == 0 || !std::isfinite(log_b)) return a;
    if (a.sign == 0) return {sign_b, log_b};
    const double hi = std::max(a.log_abs, log_b);
    const double v = a.sign * std::exp(a.log_abs - hi) + sign_b * std::exp(log_b - hi);
    if (v == 0.0) return {};
    return {v > 0 ? 1 : -1, hi + std::log(std::fabs(v))};
}

// log of the closed-form tail -Integral_[a,inf) d prior(d) dd, as (sign, log|.|).
inline ScaledIntegral neg_upper_tail(const PriorSpec& prior, double a) {
    if (prior.is_gaussian()) {
        const double z = (a - prior.mu) / prior.tau;
        // mu * sf(z) + tau * pdf(z) = pdf(z) * (tau + mu * mills(z))
        const double factor = prior.tau + prior.mu * mills_ratio(z);
        if (factor == 0.0) return {};
        return {factor > 0 ? -1 : 1, normal_log_pdf(z) + std::log(std::fabs(factor))};
    }
    const double v = prior.upper_partial_mean(a);
    if (v == 0.0) return {};
    return {v > 0 ? -1 : 1, std::log(std::fabs(v))};
}

// D(beta) = -Integral d * Phi((d - beta)/sigma) * prior(d) dd as a scaled value.
inline ScaledIntegral direct_risk(const PriorSpec& prior, double sigma, double beta) {
    const double mu = prior.mu;
    const double tau = prior.tau;
    auto log_integrand = [&](double d) {
        if (d == 0.0) return -std::numeric_limits<double>::infinity();
        return std::log(std::fabs(d)) + normal_log_cdf((d - beta) / sigma) + prior.log_pdf(d);
    };

    const double width = sigma + tau;
    const double lo0 = std::min(mu, beta) - 12.0 * width;
    const double hi = std::max(mu, beta) + 12.0 * width;

    // Peak of the log-integrand: coarse scan, then golden section around the best point.
    std::vector<double> cands{mu, mu - tau, mu + tau, beta, beta - sigma, beta + sigma};
    constexpr int scan = 96;
    const double dx = (hi - lo0) / scan;
    for (int i = 0; i <= scan; ++i) cands.push_back(lo0 + i * dx);
    double best_x = mu;
    double peak = -std::numeric_limits<double>::infinity();
    for (double c : cands) {
        const double v = log_integrand(c);
        if (v > peak) {
            peak = v;
            best_x = c;
        }
    }
    {
        double a = best_x - dx, b = best_x + dx;
        constexpr double g = 0.6180339887498949;
        double c = b - g * (b - a), d = a + g * (b - a);
        double fc = log_integrand(c), fd = log_integrand(d);
        for (int it = 0; it < 60 && (b - a) > 1e-12 * (1.0 + std::fabs(best_x)); ++it) {
            if (fc > fd) {
                b = d; d = c; fd = fc;
                c = b - g * (b - a); fc = log_integrand(c);
            } else {
                a = c; c = d; fc = fd;
                d = a + g * (b - a); fd = log_integrand(d);
            }
        }
        const double x = 0.5 * (a + b);
        const double v = log_integrand(x);
        if (v > peak) {
            peak = v;
            best_x = x;
        }
    }
    if (!std::isfinite(peak)) return {};

    // Left end: walk out until the integrand is negligible against the peak.
    double lo = lo0;
    double stepout = width;
    for (int it = 0; it < 200 && log_integrand(lo) > peak - 60.0; ++it) {
        lo -= stepout;
        stepout *= 2.0;
    }

    // Local width of the peak from the curvature of the log-integrand.
    double peak_w = std::min(sigma, tau);
    {
        const double h = 1e-3 * peak_w;
        const double c2 = (log_integrand(best_x + h) - 2.0 * peak + log_integrand(best_x - h)) / (h * h);
        if (std::isfinite(c2) && c2 < 0.0) peak_w = std::min(peak_w, 1.0 / std::sqrt(-c2));
    }

    std::vector<double> pts{0.0, best_x};
    for (double k : {1.0, 3.0, 8.0}) {
        pts.push_back(best_x - k * peak_w);
        pts.push_back(best_x + k * peak_w);
    }
    for (double k : {0.0, 1.0, 3.0, 10.0}) {
        pts.push_back(mu - k * tau);
        pts.push_back(mu + k * tau);
    }
    for (double k : {0.0, 1.0, 3.0}) {
        pts.push_back(beta - k * sigma);
        pts.push_back(beta + k * sigma);
    }
    const auto breaks = sorted_breakpoints(std::move(pts), lo, hi);

    auto scaled = [&](double d) {
        const double v = std::exp(log_integrand(d) - peak);
        return d > 0.0 ? -v : v;
    };
    QuadOptions opt;
    opt.abs_tol = 1e-14 * peak_w;
    opt.rel_tol = 1e-11;
    const auto q = integrate(scaled, breaks, opt);

    ScaledIntegral out{};
    if (q.value != 0.0) out = {q.value > 0 ? 1 : -1, peak + std::log(std::fabs(q.value))};
    const auto tail = neg_upper_tail(prior, hi);
    return scaled_add(out, tail.sign, tail.log_abs);
}

inline void check_inputs(const PriorSpec& prior, double sigma) {
    prior.validate();
    require(std::isfinite(sigma) && sigma > 0.0, "sigma must be positive");
}

}  // namespace detail

// Bayes risk in the form used for comparisons (see the header comment).
inline RiskValue bayes_risk_value(const PriorSpec& prior, double sigma, double beta) {
    detail::check_inputs(prior, sigma);
    if (std::isinf(beta)) {
        if (beta > 0) return RiskValue{};
        return RiskValue{-prior.mean(), 0, -std::numeric_limits<double>::infinity()};
    }
    if (prior.mu <= 0.0) {
        const auto d = detail::direct_risk(prior, sigma, beta);
        return {0.0, d.sign, d.log_abs};
    }
    const auto d = detail::direct_risk(prior.mirrored(), sigma, -beta);
    return {-prior.mean(), d.sign, d.log_abs};
}

inline double bayes_risk(const PriorSpec& prior, double sigma, double beta) {
    return bayes_risk_value(prior, sigma, beta).value();
}

// Monte-Carlo Bayes risk: draws d ~ prior, x ~ Normal(d, sigma^2) and averages
// -d * 1{x > beta}. Draws are taken in batches of 2^16; batch b uses the
// sub-stream derive_seed(seed, b), so the output does not depend on the thread
// count.
inline McEstimate bayes_risk_mc(const PriorSpec& prior, double sigma, double beta, std::uint64_t n_draws,
                                std::uint64_t seed) {
    detail::check_inputs(prior, sigma);
    detail::require(n_draws >= 1000, "n_draws must be at least 1000");
    constexpr std::uint64_t batch = 1u << 16;
    const std::uint64_t n_batches = (n_draws + batch - 1) / batch;
    std::vector<double> sums(n_batches), sq_sums(n_batches);
    parallel_for(n_batches, [&](std::size_t b) {
        Rng rng(derive_seed(seed, b));
        const std::uint64_t begin = b * batch;
        const std::uint64_t end = std::min(n_draws, begin + batch);
        CompensatedSum s, s2;
        for (std::uint64_t i = begin; i < end; ++i) {
            const double d = prior.sample(rng);
            const double x = d + sigma * rng.normal();
            const double l = loss(d, ships(x, beta));
            s.add(l);
            s2.add(l * l);
        }
        sums[b] = s.value();
        sq_sums[b] = s2.value();
    });
    CompensatedSum s, s2;
    for (std::uint64_t b = 0; b < n_batches; ++b) {
        s.add(sums[b]);
        s2.add(sq_sums[b]);
    }
    const double n = static_cast<double>(n_draws);
    const double mean = s.value() / n;
    const double var = std::max(0.0, (s2.value() - n * mean * mean) / (n - 1.0));
    return {mean, std::sqrt(var / n)};
}

namespace detail {

// Grid argmin (first minimum wins) followed by golden section on
// [argmin - step, argmin + step].
template <class RiskFn>
OptimalThreshold minimize_on_grid(RiskFn&& risk_at, const BetaGrid& grid, double sigma) {
    grid.validate();
    const std::size_t n = grid.size();
    std::vector<RiskValue> values(n);
    parallel_for(n, [&](std::size_t i) { values[i] = risk_at(grid.at(i)); });

    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (values[i] < values[best]) best = i;

    OptimalThreshold out;
    out.curve.points.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.curve.points.push_back({grid.at(i), values[i].value()});
    out.curve.argmin_beta = grid.at(best);
    out.curve.argmin_risk = values[best].value();
    out.rule = ThresholdRule::from_beta(out.curve.argmin_beta, sigma);

    double a = grid.at(best) - grid.step, b = grid.at(best) + grid.step;
    constexpr double g = 0.6180339887498949;
    double c = b - g * (b - a), d = a + g * (b - a);
    RiskValue fc = risk_at(c), fd = risk_at(d);
    for (int it = 0; it < 48; ++it) {
        if (fc < fd) {
            b = d; d = c; fd = fc;
            c = b - g * (b - a); fc = risk_at(c);
        } else {
            a = c; c = d; fc = fd;
            d = a + g * (b - a); fd = risk_at(d);
        }
    }
    RiskValue fbest = values[best];
    double xbest = grid.at(best);
    const double xm = 0.5 * (a + b);
    const RiskValue fm = risk_at(xm);
    if (fm < fbest) {
        fbest = fm;
        xbest = xm;
    }
    out.beta_refined = xbest;
    out.risk_refined = fbest.value();
    return out;
}

}  // namespace detail

inline OptimalThreshold optimal_threshold(const PriorSpec& prior, double sigma, const BetaGrid& grid) {
    detail::check_inputs(prior, sigma);
    return detail::minimize_on_grid([&](double b) { return bayes_risk_value(prior, sigma, b); }, grid, sigma);
}

struct SigmaCurvePoint {
    double sigma;
    double beta_opt;
    double beta_opt_refined;
    double risk_at_opt;
};

inline std::vector<SigmaCurvePoint> beta_opt_curve(const PriorSpec& prior, std::vector<double> sigma_values,
                                                   const BetaGrid& grid) {
    prior.validate();
    grid.validate();
    detail::require(!sigma_values.empty(), "sigma list is empty");
    for (double s : sigma_values) detail::require(std::isfinite(s) && s > 0.0, "sigma values must be positive");
    std::sort(sigma_values.begin(), sigma_values.end());
    std::vector<SigmaCurvePoint> out;
    out.reserve(sigma_values.size());
    for (double s : sigma_values) {
        const auto opt = optimal_threshold(prior, s, grid);
        out.push_back({s, opt.rule.beta, opt.beta_refined, opt.curve.argmin_risk});
    }
    return out;
}

struct MuSweepPoint {
    double mu;
    double beta_opt;
    double beta_opt_refined;
};

// Optimal cutoff under t_nu(mu, tau) for each mu, at fixed nu, tau, sigma.
inline std::vector<MuSweepPoint> mu_sweep(double nu, double tau, double sigma, const std::vector<double>& mu_values,
                                          const BetaGrid& grid) {
    std::vector<MuSweepPoint> out;
    out.reserve(mu_values.size());
    for (double mu : mu_values) {
        const auto opt = optimal_threshold(PriorSpec::student_t(nu, mu, tau), sigma, grid);
        out.push_back({mu, opt.rule.beta, opt.beta_refined});
    }
    return out;
}

}  // namespace abdt
