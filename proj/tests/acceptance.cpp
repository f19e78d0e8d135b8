// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <abdt/abdt.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

using namespace abdt;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass;
    std::string detail;
};

int failures = 0;

void run(int id, const char* title, const std::function<Outcome()>& body) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    if (!o.pass) ++failures;
    std::printf("%s criterion %d: %s [%s] (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.c_str(), secs);
    std::fflush(stdout);
}

void info(const char* title, const std::function<std::string()>& body) {
    const auto t0 = Clock::now();
    std::string detail;
    try {
        detail = body();
    } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    std::printf("INFO %s [%s] (%.1f s)\n", title, detail.c_str(), secs);
    std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

const PriorSpec kFitted = PriorSpec::student_t(2.31, -0.02, 0.18);

}  // namespace

int main() {
    run(1, "Gaussian optimum equals -mu sigma^2 / tau^2", [] {
        const auto t0 = Clock::now();
        Rng rng(101);
        const BetaGrid grid{-250.0, 250.0, 0.05};
        double worst = 0.0;
        for (int i = 0; i < 20; ++i) {
            const double mu = rng.uniform(-0.5, 0.5), tau = rng.uniform(0.05, 0.5), s = rng.uniform(0.05, 1.0);
            const auto opt = optimal_threshold(PriorSpec::gaussian(mu, tau), s, grid);
            worst = std::max(worst, std::fabs(opt.beta_refined - optimal_beta_gaussian(mu, tau, s)));
        }
        const double secs = seconds_since(t0);
        return Outcome{worst <= 0.002 && secs <= 60.0, fmt("max abs error %.3g, tol 0.002; %.1f s, limit 60 s", worst, secs)};
    });

    run(2, "zero is a critical point for centred priors", [] {
        const double h = 1e-3;
        double worst = 0.0;
        for (const auto& p : {PriorSpec::gaussian(0.0, 0.18), PriorSpec::gaussian(0.0, 1.0), PriorSpec::student_t(2.31, 0.0, 0.18),
                              PriorSpec::student_t(1.5, 0.0, 0.5), PriorSpec::student_t(4.0, 0.0, 1.0)})
            for (double s : {0.1, 0.3, 1.0}) {
                const double d = (bayes_risk(p, s, h) - bayes_risk(p, s, -h)) / (2 * h);
                worst = std::max(worst, std::fabs(d));
            }
        return Outcome{worst <= 1e-5, fmt("max |dr/dbeta| %.3g, tol 1e-5", worst)};
    });

    run(3, "fitted t prior at sigma 0.30 gives beta 0.04 and p 0.45", [] {
        const auto t0 = Clock::now();
        const auto opt = optimal_threshold(kFitted, 0.30, BetaGrid{});
        const double secs = seconds_since(t0);
        const bool ok = std::fabs(opt.rule.beta - 0.04) <= 0.01 && std::fabs(opt.rule.p_cutoff - 0.45) <= 0.02 && secs <= 30.0;
        return Outcome{ok, fmt("beta %.4f (refined %.6f), p %.4f; %.2f s", opt.rule.beta, opt.beta_refined,
                               opt.rule.p_cutoff, secs)};
    });

    run(4, "mu sweep shape for the t prior", [] {
        std::vector<double> mus;
        for (int k = -40; k <= 40; ++k) mus.push_back(k * 0.05);
        const auto sweep = mu_sweep(2.31, 0.18, 0.30, mus, BetaGrid{-1.0, 1.0, 0.005});
        auto at = [&](double mu) {
            for (const auto& p : sweep)
                if (std::fabs(p.mu - mu) < 1e-9) return p.beta_opt_refined;
            throw std::runtime_error("mu not in sweep");
        };
        bool decreasing = true;
        for (const auto& p : sweep)
            for (const auto& q : sweep)
                if (p.mu >= -0.3 - 1e-9 && q.mu <= 0.3 + 1e-9 && p.mu < q.mu && !(q.beta_opt_refined < p.beta_opt_refined))
                    decreasing = false;
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int n = 0;
        for (const auto& p : sweep)
            if (std::fabs(p.mu) <= 0.2 + 1e-9) {
                sx += p.mu;
                sy += p.beta_opt_refined;
                sxx += p.mu * p.mu;
                sxy += p.mu * p.beta_opt_refined;
                ++n;
            }
        const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        const double gauss = 0.09 / (0.18 * 0.18);
        const double b2 = at(2.0);
        const bool ok = decreasing && std::fabs(slope) < gauss && std::fabs(b2) < std::fabs(-2.0 * gauss);
        return Outcome{ok, fmt("(a) decreasing on [-0.3,0.3]: %s; (b) slope %.4f vs -%.4f; (c) beta(2) %.4f vs %.4f",
                               decreasing ? "yes" : "no", slope, gauss, b2, -2.0 * gauss)};
    });

    run(5, "weighted-statistic optimum equals -mu / tau^2 for two replicate structures", [] {
        Rng rng(105);
        const BetaGrid grid{-25.0, 25.0, 0.05};
        const ReplicateSpec structures[] = {ReplicateSpec{}, ReplicateSpec::fixed(4, SigmaModel::log_uniform(0.1, 0.6))};
        double worst = 0.0;
        for (int i = 0; i < 10; ++i) {
            const double mu = rng.uniform(-0.2, 0.2), tau = rng.uniform(0.1, 0.5);
            const double exact = optimal_beta_weighted_gaussian(mu, tau);
            for (std::size_t k = 0; k < 2; ++k) {
                const auto w = optimal_threshold_weighted(PriorSpec::gaussian(mu, tau), structures[k], grid, 25,
                                                          derive_seed(205, 2 * i + k));
                worst = std::max(worst, std::fabs(w.beta_refined_y - exact));
            }
        }
        return Outcome{worst <= 0.005, fmt("max abs error %.3g, tol 0.005 (grid step 0.05 + refinement)", worst)};
    });

    run(6, "sequential equivalence identity and batch/sequential posterior", [] {
        Rng rng(106);
        int disagree = 0;
        double worst = 0.0;
        for (int i = 0; i < 10000; ++i) {
            const double mu = rng.uniform(-0.5, 0.5), tau = rng.uniform(0.05, 0.5);
            FeatureHistory h{"f", {}};
            const int n = static_cast<int>(rng.below(9));
            for (int j = 0; j < n; ++j) h.observations.push_back({rng.uniform(-2, 2), rng.uniform(0.05, 1.5)});
            const double s = rng.uniform(0.05, 1.5);
            const double bx = nth_experiment_threshold(mu, tau, h, s);
            const double x = i % 2 ? bx + s * rng.normal() : bx + 1e-12 * rng.normal();
            const auto r = equivalence_check(mu, tau, h, x, s);
            disagree += r.ship_by_weighted_sum != r.ship_by_nth_threshold;

            auto seq = posterior_lift(mu, tau, FeatureHistory{});
            for (const auto& o : h.observations) seq = seq.updated(o);
            const auto batch = posterior_lift(mu, tau, h);
            worst = std::max({worst, std::fabs(seq.mean - batch.mean), std::fabs(seq.variance - batch.variance)});
        }
        return Outcome{disagree == 0 && worst <= 1e-10,
                       fmt("%d of 10000 disagree; batch vs sequential max diff %.3g, tol 1e-10", disagree, worst)};
    });

    run(7, "Bonferroni split of 0.45 over 9 tests", [] {
        const double v = bonferroni_threshold(0.45, 9);
        return Outcome{v == 0.05, fmt("%.17g", v)};
    });

    run(8, "quadrature agrees with Monte Carlo", [] {
        const double stein = bayes_risk(PriorSpec::gaussian(0.0, 1.0), 1.0, 0.0);
        const double stein_err = std::fabs(stein + 1.0 / (2.0 * std::sqrt(M_PI)));
        Rng rng(108);
        int outside = 0;
        double worst_z = 0.0;
        for (int i = 0; i < 25; ++i) {
            const double mu = rng.uniform(-0.5, 0.5), tau = rng.uniform(0.05, 0.5);
            const PriorSpec p = i % 2 == 0 ? PriorSpec::gaussian(mu, tau)
                                           : PriorSpec::student_t(rng.uniform(2.2, 6.0), mu, tau);
            const double s = rng.uniform(0.05, 1.0), beta = rng.uniform(-0.5, 0.5);
            const auto mc = bayes_risk_mc(p, s, beta, 1'000'000, derive_seed(208, i));
            const double z = std::fabs(bayes_risk(p, s, beta) - mc.estimate) / mc.std_error;
            worst_z = std::max(worst_z, z);
            outside += z > 3.0;
        }
        return Outcome{outside == 0 && stein_err <= 1e-6,
                       fmt("%d of 25 outside 3 se (max %.2f se); Stein value error %.2g", outside, worst_z, stein_err)};
    });

    run(9, "parameter recovery on 500 synthetic records", [] {
        const auto t0 = Clock::now();
        const auto data = sample_synthetic(PriorSpec::student_t(2.3, 0.0, 0.2), SigmaModel::log_uniform(0.1, 0.6), 500, 42);
        McmcConfig cfg;
        cfg.seed = 7;
        const auto s = fit_prior(data, {}, cfg);
        const double secs = seconds_since(t0);
        const bool ok = std::fabs(s.mu.mean) <= 0.05 && std::fabs(s.tau.mean - 0.2) <= 0.05 &&
                        std::fabs(s.nu.mean - 2.3) <= 0.7 && secs <= 300.0;
        return Outcome{ok, fmt("nu %.3f, mu %.4f, tau %.4f, acceptance %.3f; %.1f s, limit 300 s", s.nu.mean, s.mu.mean,
                               s.tau.mean, s.acceptance_rate, secs)};
    });

    run(10, "Bayes-optimal policy beats p < 0.05 and matches quadrature", [] {
        const auto rep = simulate(kFitted, SigmaModel::constant(0.3), {Policy::bayes_optimal(), Policy::fixed_p(0.05)},
                                  1'000'000, 110);
        const auto& b = rep.policies[0];
        const auto& p = rep.policies[1];
        const double q = bayes_risk(kFitted, 0.3, 0.04);
        const bool ok = b.beta && std::fabs(*b.beta - 0.04) < 1e-9 && b.mean_loss <= p.mean_loss &&
                        std::fabs(b.mean_loss - q) <= 3.0 * b.std_error;
        return Outcome{ok, fmt("bayes(beta %.3f) %.5f +- %.5f, p<0.05 %.5f, quadrature %.5f", b.beta.value_or(NAN),
                               b.mean_loss, b.std_error, p.mean_loss, q)};
    });

    info("replicated-test threshold under the fitted t prior (reference value 0.31)", [] {
        const auto w = optimal_threshold_weighted(kFitted, ReplicateSpec{}, BetaGrid{0.0, 1.0, 0.005}, 400, 311);
        const double bx = w.beta_refined_y * 0.09;
        return fmt("beta_y grid %.3f, refined %.4f; x cutoff at sigma 0.3: %.4f, p %.3f", w.beta_opt_y, w.beta_refined_y,
                   bx, p_of_beta(bx, 0.3));
    });

    info("fit on 1000 records with 5000 iterations", [] {
        const auto data = sample_synthetic(kFitted, SigmaModel::default_model(), 1000, 1000);
        const auto s = fit_prior(data);
        return fmt("nu %.3f, mu %.4f, tau %.4f, acceptance %.3f", s.nu.mean, s.mu.mean, s.tau.mean, s.acceptance_rate);
    });

    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
