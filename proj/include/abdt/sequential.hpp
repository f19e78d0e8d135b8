#pragma once
// Replicated and sequential tests of one feature.
//
// With observations x_j ~ Normal(d, sigma_j^2), the inverse-variance weighted
// sum y = sum x_j / sigma_j^2 is Normal(d / S, 1 / S), S = (sum 1/sigma_j^2)^-1,
// and "ship iff y > -mu / tau^2" is Bayes optimal under a Normal(mu, tau^2)
// prior whatever the variances. Equivalently, after n - 1 tests the n-th
// observation is compared with
//     -mu sigma_n^2 / tau^2 - sigma_n^2 sum_{j<n} x_j / sigma_j^2.
// Modifications between versions are assumed not to change the true lift.

#include <abdt/core_model.hpp>
#include <abdt/error.hpp>
#include <abdt/parallel.hpp>
#include <abdt/quadrature.hpp>
#include <abdt/random.hpp>
#include <abdt/risk_engine.hpp>
#include <abdt/sigma_model.hpp>

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace abdt {

struct Observation {
    double x;
    double sigma;
};

// Observations of one feature in test-execution order.
struct FeatureHistory {
    std::string feature_id = "anon";
    std::vector<Observation> observations;

    void validate() const {
        for (const auto& o : observations) {
            detail::require(std::isfinite(o.x), "observation must be finite");
            detail::require(o.sigma > 0.0, "observation sigma must be positive");
        }
    }

    bool empty() const { return observations.empty(); }
};

struct WeightedStat {
    double y;  // sum x_j / sigma_j^2
    double s;  // (sum 1 / sigma_j^2)^-1
};

inline WeightedStat weighted_stat(const FeatureHistory& history) {
    detail::require(!history.empty(), "history is empty");
    history.validate();
    double y = 0.0, precision = 0.0;
    for (const auto& o : history.observations) {
        const double w = 1.0 / (o.sigma * o.sigma);
        y += o.x * w;
        precision += w;
    }
    return {y, 1.0 / precision};
}

// Gaussian posterior of the lift: precision s = 1/tau^2 + sum 1/sigma_j^2,
// weighted sum m = mu/tau^2 + sum x_j/sigma_j^2, mean m/s, variance 1/s.
struct PosteriorLift {
    double precision_sum;
    double weighted_sum;
    double mean;
    double variance;

    static PosteriorLift from_sums(double s, double m) { return {s, m, m / s, 1.0 / s}; }

    PosteriorLift updated(const Observation& o) const {
        detail::require(o.sigma > 0.0, "observation sigma must be positive");
        const double w = 1.0 / (o.sigma * o.sigma);
        return from_sums(precision_sum + w, weighted_sum + o.x * w);
    }
};

inline PosteriorLift posterior_lift(double mu, double tau, const FeatureHistory& history) {
    detail::require(tau > 0.0, "tau must be positive");
    history.validate();
    const double p0 = 1.0 / (tau * tau);
    double s = p0, m = mu * p0;
    for (const auto& o : history.observations) {
        const double w = 1.0 / (o.sigma * o.sigma);
        s += w;
        m += o.x * w;
    }
    return PosteriorLift::from_sums(s, m);
}

// Optimal cutoff for x_n given the earlier observations, Normal(mu, tau^2) prior.
inline double nth_experiment_threshold(double mu, double tau, const FeatureHistory& history, double sigma_n) {
    detail::require(tau > 0.0, "tau must be positive");
    detail::require(sigma_n > 0.0, "sigma_n must be positive");
    history.validate();
    double sum = 0.0;
    for (const auto& o : history.observations) sum += o.x / (o.sigma * o.sigma);
    const double v = sigma_n * sigma_n;
    return -(v / (tau * tau)) * mu - v * sum;
}

struct EquivalenceResult {
    bool ship_by_weighted_sum;  // y over all n observations vs -mu/tau^2
    bool ship_by_nth_threshold; // x_n vs nth_experiment_threshold
};

// Decides the n-th test both ways. Each route's comparison is evaluated in
// exact rational arithmetic on the given doubles, so the algebraic identity
// between them carries over to every input, boundary cases included. Exact
// ties do not ship.
inline EquivalenceResult equivalence_check(double mu, double tau, const FeatureHistory& history, double candidate_xn,
                                           double sigma_n) {
    using Q = boost::multiprecision::cpp_rational;
    detail::require(std::isfinite(candidate_xn), "candidate x_n must be finite");
    detail::require(std::isfinite(mu), "mu must be finite");
    detail::require(std::isfinite(tau) && tau > 0.0, "tau must be positive");
    detail::require(std::isfinite(sigma_n) && sigma_n > 0.0, "sigma_n must be positive");
    history.validate();

    const Q t2 = Q(tau) * Q(tau);
    const Q vn = Q(sigma_n) * Q(sigma_n);
    Q prev_sum = 0;
    for (const auto& o : history.observations) prev_sum += Q(o.x) / (Q(o.sigma) * Q(o.sigma));

    const Q beta_y = -Q(mu) / t2;
    const Q y = prev_sum + Q(candidate_xn) / vn;
    const Q beta_x = -Q(mu) * vn / t2 - vn * prev_sum;
    return {y > beta_y, Q(candidate_xn) > beta_x};
}

// p-value cutoff per test when one test's cutoff is split over n replicates.
inline double bonferroni_threshold(double p_single, int n) {
    detail::require(p_single > 0.0 && p_single < 1.0, "p must lie in (0, 1)");
    detail::require(n >= 1, "n must be at least 1");
    return p_single / static_cast<double>(n);
}

// Joint distribution of the replicate count n_i and the standard errors
// sigma_ij. Counts are geometric on {1, 2, ...}, P(n > k) = q^k, truncated at
// max_count; q = 0.58 puts the 95th percentile at 6 and the 99th at 9.
struct ReplicateSpec {
    double continue_prob = 0.58;
    int max_count = 60;
    SigmaModel sigma = SigmaModel::default_model();

    static ReplicateSpec fixed(int n, SigmaModel sigma) { return {0.0, n, sigma}; }

    bool is_fixed() const { return continue_prob == 0.0; }

    void validate() const {
        detail::require(continue_prob >= 0.0 && continue_prob < 1.0, "continue_prob must lie in [0, 1)");
        detail::require(max_count >= 1, "max_count must be at least 1");
        sigma.validate();
    }

    int sample_count(Rng& rng) const {
        if (is_fixed()) return max_count;
        int n = 1;
        while (n < max_count && rng.uniform() < continue_prob) ++n;
        return n;
    }
};

struct WeightedThreshold {
    double beta_opt_y = 0.0;
    double beta_refined_y = 0.0;
    RiskCurve curve;
    std::vector<double> replicate_s;  // S of each simulated replicate set
};

// Bayes risk of "ship iff y > beta" averaged over n_mc simulated replicate
// structures. For a given S the rule is "ship iff x_bar > beta S" with
// x_bar ~ Normal(d, S), so each term is the single-test risk at noise sqrt(S)
// and cutoff beta S, integrated over d by quadrature.
inline WeightedThreshold optimal_threshold_weighted(const PriorSpec& prior, const ReplicateSpec& spec,
                                                    const BetaGrid& grid, int n_mc, std::uint64_t seed) {
    prior.validate();
    spec.validate();
    grid.validate();
    detail::require(n_mc >= 1, "n_mc must be at least 1");

    WeightedThreshold out;
    out.replicate_s.reserve(static_cast<std::size_t>(n_mc));
    Rng rng(seed);
    for (int r = 0; r < n_mc; ++r) {
        const int n = spec.sample_count(rng);
        double precision = 0.0;
        for (int j = 0; j < n; ++j) {
            const double s = spec.sigma.sample(rng);
            precision += 1.0 / (s * s);
        }
        out.replicate_s.push_back(1.0 / precision);
    }

    const bool reflect = prior.mu > 0.0;
    const PriorSpec base = reflect ? prior.mirrored() : prior;
    const double log_n = std::log(static_cast<double>(n_mc));
    auto risk_at = [&](double beta) {
        detail::ScaledIntegral acc{};
        for (double s : out.replicate_s) {
            const double b = beta * s;
            const auto d = detail::direct_risk(base, std::sqrt(s), reflect ? -b : b);
            acc = detail::scaled_add(acc, d.sign, d.log_abs);
        }
        return RiskValue{reflect ? -prior.mean() : 0.0, acc.sign, acc.log_abs - log_n};
    };
    const double unit_sigma = 1.0;  // y-space rules carry no single sigma
    auto opt = detail::minimize_on_grid(risk_at, grid, unit_sigma);
    out.beta_opt_y = opt.rule.beta;
    out.beta_refined_y = opt.beta_refined;
    out.curve = std::move(opt.curve);
    return out;
}

struct DecisionResult {
    double threshold;
    bool ship;
    PosteriorLift posterior;
    bool closed_form;  // Gaussian prior: nth_experiment_threshold
};

namespace detail {

// Unnormalised log posterior of the lift under a t prior and Gaussian
// observations, with its support window.
struct TPosterior {
    PriorSpec prior;
    const FeatureHistory& history;
    double center, spread, log_peak, log_norm;

    TPosterior(const PriorSpec& p, const FeatureHistory& h) : prior(p), history(h) {
        const auto ws = weighted_stat(h);
        center = ws.y * ws.s;
        spread = std::sqrt(ws.s);
        log_peak = -std::numeric_limits<double>::infinity();
        for (double c : breakpoints()) log_peak = std::max(log_peak, log_unnorm(c));
        const auto pts = breakpoints();
        QuadOptions opt;
        opt.abs_tol = 0.0;
        opt.rel_tol = 1e-11;
        const auto q = integrate([&](double d) { return std::exp(log_unnorm(d) - log_peak); }, pts, opt);
        log_norm = log_peak + std::log(q.value);
    }

    double log_unnorm(double d) const {
        double v = prior.log_pdf(d);
        for (const auto& o : history.observations) {
            const double e = (o.x - d) / o.sigma;
            v += -0.5 * e * e - std::log(o.sigma);
        }
        return v;
    }

    double lo() const { return center - 40.0 * spread; }
    double hi() const { return center + 40.0 * spread; }

    std::vector<double> breakpoints() const {
        std::vector<double> pts{0.0};
        for (double k : {0.0, 1.0, 3.0, 8.0}) {
            pts.push_back(center - k * spread);
            pts.push_back(center + k * spread);
        }
        for (double k : {0.0, 1.0, 3.0}) {
            pts.push_back(prior.mu - k * prior.tau);
            pts.push_back(prior.mu + k * prior.tau);
        }
        return sorted_breakpoints(std::move(pts), lo(), hi());
    }

    template <class G>
    double expect(G&& g) const {
        std::vector<double> pts = breakpoints();
        QuadOptions opt;
        opt.abs_tol = 1e-15;
        opt.rel_tol = 1e-11;
        return integrate([&](double d) { return g(d) * std::exp(log_unnorm(d) - log_norm); }, pts, opt).value;
    }
};

}  // namespace detail

// Ship decision for a new observation x_new (noise sigma_new) of a feature
// with earlier observations `history`. Gaussian priors use the closed form;
// t priors minimise the posterior Bayes risk over `grid` with the same
// quadrature stack, then take the refined optimum.
inline DecisionResult decide_nth(const PriorSpec& prior, const FeatureHistory& history, double x_new,
                                 double sigma_new, const BetaGrid& grid) {
    prior.validate();
    history.validate();
    detail::require(sigma_new > 0.0, "sigma_new must be positive");
    detail::require(std::isfinite(x_new), "x_new must be finite");

    if (prior.is_gaussian()) {
        const double beta = nth_experiment_threshold(prior.mu, prior.tau, history, sigma_new);
        return {beta, ships(x_new, beta), posterior_lift(prior.mu, prior.tau, history), true};
    }
    if (history.empty()) {
        const auto opt = optimal_threshold(prior, sigma_new, grid);
        const double var = prior.nu > 2.0 ? prior.tau * prior.tau * prior.nu / (prior.nu - 2.0)
                                          : std::numeric_limits<double>::infinity();
        return {opt.beta_refined, ships(x_new, opt.beta_refined), {1.0 / var, prior.mu / var, prior.mu, var}, false};
    }

    const detail::TPosterior post(prior, history);
    const double mean = post.expect([](double d) { return d; });
    const double var = post.expect([&](double d) { return (d - mean) * (d - mean); });
    auto risk_at = [&](double beta) {
        const double r = -post.expect([&](double d) { return d * normal_cdf((d - beta) / sigma_new); });
        if (r == 0.0) return RiskValue{};
        return RiskValue{0.0, r > 0 ? 1 : -1, std::log(std::fabs(r))};
    };
    const auto opt = detail::minimize_on_grid(risk_at, grid, sigma_new);
    return {opt.beta_refined, ships(x_new, opt.beta_refined), PosteriorLift::from_sums(1.0 / var, mean / var), false};
}

}  // namespace abdt
