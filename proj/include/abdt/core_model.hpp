#pragma once
// Loss, frequentist risk and p-value conversions for ship/no-ship thresholding
// rules, plus the lift prior and the Gaussian closed-form optimal thresholds.
//
// Lifts are percent changes of revenue per user. An observation x of the true
// lift d is modelled as x ~ Normal(d, sigma^2), and the rule "ship iff
// x > beta" is the one-tailed test "ship iff p(x) < 1 - Phi(beta/sigma)".

#include <abdt/error.hpp>
#include <abdt/normal.hpp>
#include <abdt/random.hpp>

#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <optional>
#include <string>

namespace abdt {

struct ExperimentRecord {
    std::string feature_id = "anon";
    double lift_estimate = 0.0;
    double std_error = 1.0;
    std::optional<unsigned> replicate_index;

    void validate() const {
        detail::require(std::isfinite(lift_estimate), "lift_estimate must be finite");
        detail::require(std::isfinite(std_error) && std_error > 0.0, "std_error must be positive and finite");
    }
};

enum class PriorFamily { Gaussian, StudentT };

// Lift prior: Normal(mu, tau^2) or the location-scale Student t_nu(mu, tau).
struct PriorSpec {
    PriorFamily family = PriorFamily::Gaussian;
    double mu = 0.0;
    double tau = 1.0;
    double nu = 0.0;  // StudentT only

    static PriorSpec gaussian(double mu, double tau) {
        PriorSpec p{PriorFamily::Gaussian, mu, tau, 0.0};
        p.validate();
        return p;
    }

    static PriorSpec student_t(double nu, double mu, double tau) {
        PriorSpec p{PriorFamily::StudentT, mu, tau, nu};
        p.validate();
        return p;
    }

    bool is_gaussian() const { return family == PriorFamily::Gaussian; }

    // nu > 1 keeps E|lift| finite, which the Bayes risk integral needs.
    void validate() const {
        detail::require(std::isfinite(mu), "prior location must be finite");
        detail::require(std::isfinite(tau) && tau > 0.0, "prior scale tau must be positive");
        if (family == PriorFamily::StudentT)
            detail::require(std::isfinite(nu) && nu > 1.0, "Student-t prior needs nu > 1");
    }

    double mean() const { return mu; }

    // Prior reflected through zero: lift d -> -d.
    PriorSpec mirrored() const { return PriorSpec{family, -mu, tau, nu}; }

    double log_pdf(double x) const {
        const double z = (x - mu) / tau;
        if (is_gaussian()) return normal_log_pdf(z) - std::log(tau);
        return log_norm_const() - 0.5 * (nu + 1.0) * std::log1p(z * z / nu) - std::log(tau);
    }

    double pdf(double x) const { return std::exp(log_pdf(x)); }

    double cdf(double x) const {
        const double z = (x - mu) / tau;
        if (is_gaussian()) return normal_cdf(z);
        return boost::math::cdf(boost::math::students_t_distribution<double>(nu), z);
    }

    // Integral of d * pdf(d) over [a, inf).
    double upper_partial_mean(double a) const {
        const double z = (a - mu) / tau;
        if (is_gaussian()) return mu * normal_sf(z) + tau * normal_pdf(z);
        const double tail = boost::math::cdf(
            boost::math::complement(boost::math::students_t_distribution<double>(nu), z));
        const double moment =
            std::exp(log_norm_const()) * nu / (nu - 1.0) * std::pow(1.0 + z * z / nu, -0.5 * (nu - 1.0));
        return mu * tail + tau * moment;
    }

    double sample(Rng& rng) const {
        if (is_gaussian()) return mu + tau * rng.normal();
        return mu + tau * rng.student_t(nu);
    }

    // log of Gamma((nu+1)/2) / (Gamma(nu/2) sqrt(nu pi)), the standard t density at 0.
    double log_norm_const() const {
        return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * std::log(nu * std::numbers::pi);
    }
};

inline double p_of_beta(double beta, double sigma) {
    detail::require(sigma > 0.0, "sigma must be positive");
    return normal_sf(beta / sigma);
}

inline double beta_of_p(double p, double sigma) {
    detail::require(sigma > 0.0, "sigma must be positive");
    detail::require(p > 0.0 && p < 1.0, "p must lie in (0, 1)");
    return -sigma * normal_quantile(p);
}

// Lift cutoff beta with the one-tailed p-value cutoff it induces at sigma.
struct ThresholdRule {
    double beta = 0.0;
    double sigma = 1.0;
    double p_cutoff = 0.5;

    static ThresholdRule from_beta(double beta, double sigma) { return {beta, sigma, p_of_beta(beta, sigma)}; }
    static ThresholdRule from_p(double p, double sigma) { return {beta_of_p(p, sigma), sigma, p}; }

    // Ties at the cutoff do not ship.
    bool ships(double x) const { return x > beta; }
};

inline bool ships(double x, double beta) { return x > beta; }

// L(d, a) = -a d.
inline double loss(double delta_true, bool ship) { return ship ? -delta_true : 0.0; }

// Expected loss of "ship iff x > beta" when the true lift is delta_true.
inline double frequentist_risk(double delta_true, double beta, double sigma) {
    detail::require(sigma > 0.0, "sigma must be positive");
    if (delta_true == 0.0) return 0.0;
    return -delta_true * normal_cdf((delta_true - beta) / sigma);
}

// Bayes-optimal cutoff for a Normal(mu, tau^2) prior and Normal noise sigma.
inline double optimal_beta_gaussian(double mu, double tau, double sigma) {
    detail::require(tau > 0.0, "tau must be positive");
    detail::require(sigma > 0.0, "sigma must be positive");
    return -(sigma * sigma / (tau * tau)) * mu;
}

// Bayes-optimal cutoff for the inverse-variance weighted sum y = sum x_j / sigma_j^2.
inline double optimal_beta_weighted_gaussian(double mu, double tau) {
    detail::require(tau > 0.0, "tau must be positive");
    return -mu / (tau * tau);
}

}  // namespace abdt
