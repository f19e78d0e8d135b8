#pragma once

#include <abdt/error.hpp>
#include <abdt/normal.hpp>
#include <abdt/random.hpp>

#include <cmath>
#include <string>

namespace abdt {

// Distribution of per-experiment standard errors.
struct SigmaModel {
    enum class Kind { Constant, LogNormal, LogUniform };

    Kind kind = Kind::LogNormal;
    double a = 0.3;     // Constant: value; LogNormal: median; LogUniform: lower bound
    double b = 0.8155;  // LogNormal: sd of log sigma; LogUniform: upper bound

    static SigmaModel constant(double sigma) { return checked({Kind::Constant, sigma, 0.0}); }
    static SigmaModel log_normal(double median, double log_sd) { return checked({Kind::LogNormal, median, log_sd}); }
    static SigmaModel log_uniform(double lo, double hi) { return checked({Kind::LogUniform, lo, hi}); }

    // Median 0.3 with the 99th percentile at 2: log_sd = ln(2/0.3) / z_0.99.
    static SigmaModel default_model() {
        return log_normal(0.3, std::log(2.0 / 0.3) / normal_quantile(0.99));
    }

    void validate() const {
        switch (kind) {
        case Kind::Constant:
            detail::require(std::isfinite(a) && a > 0.0, "constant sigma must be positive");
            break;
        case Kind::LogNormal:
            detail::require(std::isfinite(a) && a > 0.0, "log-normal sigma median must be positive");
            detail::require(std::isfinite(b) && b >= 0.0, "log-normal sigma spread must be non-negative");
            break;
        case Kind::LogUniform:
            detail::require(std::isfinite(a) && a > 0.0 && std::isfinite(b) && b >= a,
                            "log-uniform sigma needs 0 < lo <= hi");
            break;
        }
    }

    bool is_constant() const { return kind == Kind::Constant; }

    double sample(Rng& rng) const {
        switch (kind) {
        case Kind::Constant: return a;
        case Kind::LogNormal: return a * std::exp(b * rng.normal());
        case Kind::LogUniform: return std::exp(rng.uniform(std::log(a), std::log(b)));
        }
        return a;
    }

    double quantile(double p) const {
        switch (kind) {
        case Kind::Constant: return a;
        case Kind::LogNormal: return a * std::exp(b * normal_quantile(p));
        case Kind::LogUniform: return std::exp(std::log(a) + p * (std::log(b) - std::log(a)));
        }
        return a;
    }

private:
    static SigmaModel checked(SigmaModel m) {
        m.validate();
        return m;
    }
};

}  // namespace abdt
