#pragma once
// Monte-Carlo experimentation program: each simulated feature has a true lift
// d ~ prior, a standard error sigma ~ sigma_model and an estimate
// x ~ Normal(d, sigma^2). Every policy decides on the same draws (common
// random numbers) and realises d for each ship. mean_loss is the Monte-Carlo
// Bayes risk of the policy.
//
// Features are simulated in batches of 2^15; batch b draws from the
// sub-stream derive_seed(seed, b) and batch totals are combined in batch
// order with compensated summation, so results do not depend on threads.

#include <abdt/core_model.hpp>
#include <abdt/error.hpp>
#include <abdt/parallel.hpp>
#include <abdt/random.hpp>
#include <abdt/risk_engine.hpp>
#include <abdt/sigma_model.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace abdt {

struct Policy {
    enum class Kind { FixedPValue, FixedBeta, BayesOptimal, Oracle, NeverShip };

    Kind kind = Kind::NeverShip;
    double p = 0.05;
    double beta = 0.0;
    std::optional<PriorSpec> prior;  // BayesOptimal: prior to optimise under (default: the simulation prior)
    BetaGrid grid{};

    static Policy fixed_p(double p) { return checked({Kind::FixedPValue, p, 0.0, std::nullopt, {}}); }
    static Policy fixed_beta(double beta) { return checked({Kind::FixedBeta, 0.05, beta, std::nullopt, {}}); }
    static Policy bayes_optimal(std::optional<PriorSpec> prior = std::nullopt, BetaGrid grid = {}) {
        return checked({Kind::BayesOptimal, 0.05, 0.0, prior, grid});
    }
    static Policy oracle() { return {Kind::Oracle, 0.05, 0.0, std::nullopt, {}}; }
    static Policy never_ship() { return {Kind::NeverShip, 0.05, 0.0, std::nullopt, {}}; }

    void validate() const {
        switch (kind) {
        case Kind::FixedPValue: detail::require(p > 0.0 && p < 1.0, "policy p must lie in (0, 1)"); break;
        case Kind::FixedBeta: detail::require(std::isfinite(beta), "policy beta must be finite"); break;
        case Kind::BayesOptimal:
            if (prior) prior->validate();
            grid.validate();
            break;
        default: break;
        }
    }

    std::string name() const {
        std::ostringstream os;
        switch (kind) {
        case Kind::FixedPValue: os << "fixed_p(" << p << ")"; break;
        case Kind::FixedBeta: os << "fixed_beta(" << beta << ")"; break;
        case Kind::BayesOptimal: os << "bayes_optimal"; break;
        case Kind::Oracle: os << "oracle"; break;
        case Kind::NeverShip: os << "never_ship"; break;
        }
        return os.str();
    }

private:
    static Policy checked(Policy p) {
        p.validate();
        return p;
    }
};

// Comma-separated policy list: "never", "oracle", "bayes", "p=<p>", "beta=<b>".
inline std::vector<Policy> parse_policies(std::string_view spec) {
    std::vector<Policy> out;
    std::size_t pos = 0;
    while (pos <= spec.size()) {
        const std::size_t end = std::min(spec.find(',', pos), spec.size());
        std::string tok(spec.substr(pos, end - pos));
        tok.erase(0, tok.find_first_not_of(" \t"));
        tok.erase(tok.find_last_not_of(" \t") + 1);
        auto number = [&](std::size_t from) {
            const std::string s = tok.substr(from);
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(s, &used);
            } catch (...) {
                throw ParseError("bad number in policy '" + tok + "'");
            }
            if (used != s.size()) throw ParseError("bad number in policy '" + tok + "'");
            return v;
        };
        if (tok == "never" || tok == "never_ship")
            out.push_back(Policy::never_ship());
        else if (tok == "oracle")
            out.push_back(Policy::oracle());
        else if (tok == "bayes" || tok == "bayes_optimal")
            out.push_back(Policy::bayes_optimal());
        else if (tok.rfind("p=", 0) == 0) {
            const double p = number(2);
            if (!(p > 0.0 && p < 1.0)) throw ParseError("policy p must lie in (0, 1): '" + tok + "'");
            out.push_back(Policy::fixed_p(p));
        } else if (tok.rfind("beta=", 0) == 0) {
            const double b = number(5);
            if (!std::isfinite(b)) throw ParseError("policy beta must be finite: '" + tok + "'");
            out.push_back(Policy::fixed_beta(b));
        } else
            throw ParseError("unknown policy '" + tok + "'");
        pos = end + 1;
    }
    if (out.empty()) throw ParseError("empty policy list");
    return out;
}

struct PolicyResult {
    std::string name;
    double total_realized_lift = 0.0;
    double ship_rate = 0.0;
    double mean_loss = 0.0;
    double std_error = 0.0;
    std::optional<double> beta;  // cutoff used when sigma is constant and the policy has one
};

struct SimReport {
    std::vector<PolicyResult> policies;
    std::uint64_t n_features = 0;
    std::uint64_t seed = 0;
};

namespace detail {

// A policy reduced to "ship iff x > cutoff(sigma)" (or the oracle / never rules).
struct ResolvedPolicy {
    Policy::Kind kind;
    double p = 0.0;
    double beta = 0.0;
    std::vector<double> sigma_knots, beta_knots;  // BayesOptimal with varying sigma

    double cutoff(double sigma) const {
        switch (kind) {
        case Policy::Kind::FixedPValue: return beta_of_p(p, sigma);
        case Policy::Kind::FixedBeta: return beta;
        case Policy::Kind::BayesOptimal: {
            if (sigma_knots.empty()) return beta;
            if (sigma <= sigma_knots.front()) return beta_knots.front();
            if (sigma >= sigma_knots.back()) return beta_knots.back();
            const auto it = std::upper_bound(sigma_knots.begin(), sigma_knots.end(), sigma);
            const std::size_t k = static_cast<std::size_t>(it - sigma_knots.begin());
            const double t = (sigma - sigma_knots[k - 1]) / (sigma_knots[k] - sigma_knots[k - 1]);
            return beta_knots[k - 1] + t * (beta_knots[k] - beta_knots[k - 1]);
        }
        default: return 0.0;
        }
    }

    bool decide(double delta, double sigma, double x) const {
        switch (kind) {
        case Policy::Kind::Oracle: return delta > 0.0;
        case Policy::Kind::NeverShip: return false;
        default: return ships(x, cutoff(sigma));
        }
    }
};

// BayesOptimal with a varying sigma uses the grid optimum tabulated at 33
// log-spaced sigma values between the 0.1% and 99.9% quantiles of the sigma
// model, interpolated linearly and clamped at the ends.
inline ResolvedPolicy resolve(const Policy& pol, const PriorSpec& sim_prior, const SigmaModel& sm) {
    ResolvedPolicy r{pol.kind, pol.p, pol.beta, {}, {}};
    if (pol.kind != Policy::Kind::BayesOptimal) return r;
    const PriorSpec& prior = pol.prior ? *pol.prior : sim_prior;
    if (sm.is_constant()) {
        r.beta = optimal_threshold(prior, sm.a, pol.grid).rule.beta;
        return r;
    }
    const double lo = std::log(sm.quantile(0.001)), hi = std::log(sm.quantile(0.999));
    constexpr int knots = 33;
    for (int k = 0; k < knots; ++k) {
        const double s = std::exp(lo + (hi - lo) * k / (knots - 1));
        if (!r.sigma_knots.empty() && s <= r.sigma_knots.back()) continue;
        r.sigma_knots.push_back(s);
        r.beta_knots.push_back(optimal_threshold(prior, s, pol.grid).rule.beta);
    }
    return r;
}

}  // namespace detail

struct SimOptions {
    std::ostream* trace = nullptr;  // per-feature CSV: feature,delta,sigma,x,<ship per policy>
};

inline SimReport simulate(const PriorSpec& prior, const SigmaModel& sigma_model, const std::vector<Policy>& policies,
                          std::uint64_t n_features, std::uint64_t seed, const SimOptions& opts = {}) {
    prior.validate();
    sigma_model.validate();
    detail::require(n_features >= 1, "n_features must be at least 1");
    detail::require(!policies.empty(), "policy list is empty");
    for (const auto& p : policies) p.validate();

    std::vector<detail::ResolvedPolicy> resolved;
    for (const auto& p : policies) resolved.push_back(detail::resolve(p, prior, sigma_model));

    const std::size_t np = policies.size();
    constexpr std::uint64_t batch = 1u << 15;
    const std::uint64_t n_batches = (n_features + batch - 1) / batch;
    // per batch, per policy: sum of shipped lift, sum of squared loss, ship count
    std::vector<double> lift(n_batches * np), sq(n_batches * np);
    std::vector<std::uint64_t> shipped(n_batches * np);

    auto run_batch = [&](std::size_t b) {
        Rng rng(derive_seed(seed, b));
        const std::uint64_t begin = b * batch;
        const std::uint64_t end = std::min(n_features, begin + batch);
        std::vector<CompensatedSum> l(np), l2(np);
        std::vector<std::uint64_t> cnt(np, 0);
        std::vector<char> dec(np);
        for (std::uint64_t i = begin; i < end; ++i) {
            const double d = prior.sample(rng);
            const double s = sigma_model.sample(rng);
            const double x = d + s * rng.normal();
            for (std::size_t k = 0; k < np; ++k) {
                const bool ship = resolved[k].decide(d, s, x);
                dec[k] = ship;
                if (ship) {
                    l[k].add(d);
                    l2[k].add(d * d);
                    ++cnt[k];
                }
            }
            if (opts.trace) {
                *opts.trace << i << ',' << d << ',' << s << ',' << x;
                for (std::size_t k = 0; k < np; ++k) *opts.trace << ',' << int(dec[k]);
                *opts.trace << '\n';
            }
        }
        for (std::size_t k = 0; k < np; ++k) {
            lift[b * np + k] = l[k].value();
            sq[b * np + k] = l2[k].value();
            shipped[b * np + k] = cnt[k];
        }
    };
    if (opts.trace) {
        *opts.trace << "feature,delta,sigma,x";
        for (const auto& p : policies) *opts.trace << ',' << p.name();
        *opts.trace << '\n';
        for (std::uint64_t b = 0; b < n_batches; ++b) run_batch(b);
    } else {
        parallel_for(n_batches, run_batch);
    }

    SimReport rep;
    rep.n_features = n_features;
    rep.seed = seed;
    const double n = static_cast<double>(n_features);
    for (std::size_t k = 0; k < np; ++k) {
        CompensatedSum total, total_sq;
        std::uint64_t count = 0;
        for (std::uint64_t b = 0; b < n_batches; ++b) {
            total.add(lift[b * np + k]);
            total_sq.add(sq[b * np + k]);
            count += shipped[b * np + k];
        }
        PolicyResult r;
        r.name = policies[k].name();
        r.total_realized_lift = total.value();
        r.ship_rate = static_cast<double>(count) / n;
        r.mean_loss = r.total_realized_lift == 0.0 ? 0.0 : -r.total_realized_lift / n;
        const double var = n > 1.0 ? std::max(0.0, (total_sq.value() - n * r.mean_loss * r.mean_loss) / (n - 1.0)) : 0.0;
        r.std_error = std::sqrt(var / n);
        if (sigma_model.is_constant() && policies[k].kind != Policy::Kind::Oracle &&
            policies[k].kind != Policy::Kind::NeverShip)
            r.beta = resolved[k].cutoff(sigma_model.a);
        rep.policies.push_back(std::move(r));
    }
    return rep;
}

}  // namespace abdt
