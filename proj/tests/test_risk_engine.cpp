#include <abdt/risk_engine.hpp>
#include <abdt/random.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace abdt;

namespace {

const PriorSpec kFitted = PriorSpec::student_t(2.31, -0.02, 0.18);

double gaussian_risk_oracle(double mu, double tau, double sigma, double beta) {
    const double s = std::sqrt(sigma * sigma + tau * tau);
    const double z = (mu - beta) / s;
    return -(mu * normal_cdf(z) + tau * tau / s * normal_pdf(z));
}

}  // namespace

TEST(BayesRisk, SteinIdentityValue) {
    const double r = bayes_risk(PriorSpec::gaussian(0.0, 1.0), 1.0, 0.0);
    EXPECT_NEAR(r, -1.0 / (2.0 * std::sqrt(std::numbers::pi)), 1e-12);
}

TEST(BayesRisk, MatchesGaussianClosedForm) {
    Rng rng(21);
    for (int i = 0; i < 200; ++i) {
        const double mu = rng.uniform(-0.5, 0.5), tau = rng.uniform(0.05, 0.5), s = rng.uniform(0.05, 1.0);
        const double beta = rng.uniform(-1.0, 1.0);
        EXPECT_NEAR(bayes_risk(PriorSpec::gaussian(mu, tau), s, beta), gaussian_risk_oracle(mu, tau, s, beta), 1e-12);
    }
}

TEST(BayesRisk, FarCutoffGivesZero) {
    for (const auto& p : {PriorSpec::gaussian(0.1, 0.3), kFitted, PriorSpec::student_t(2.0, 0.0, 1.0)})
        EXPECT_NEAR(bayes_risk(p, 0.3, 1e6), 0.0, 1e-6);
}

TEST(BayesRisk, FarCutoffNearCauchyTracksTailMean) {
    // With nu close to 1 the tail mean decays like beta^(1 - nu), so 1e6 is not yet near zero.
    const auto p = PriorSpec::student_t(1.2, 0.0, 1.0);
    const double r = bayes_risk(p, 0.3, 1e6);
    EXPECT_NEAR(r / -p.upper_partial_mean(1e6), 1.0, 1e-6);
    EXPECT_NEAR(bayes_risk(p, 0.3, 1e30), 0.0, 1e-4);
}

TEST(BayesRisk, StudentTMatchesReference) {
    // Independent adaptive quadrature to double precision.
    EXPECT_NEAR(bayes_risk(kFitted, 0.30, 0.04), -0.0723648883987789, 1e-12);
}

TEST(BayesRisk, StudentTMatchesMonteCarlo) {
    const auto q = bayes_risk(kFitted, 0.30, 0.04);
    const auto mc = bayes_risk_mc(kFitted, 0.30, 0.04, 1'000'000, 17);
    EXPECT_LT(q, 0.0);
    EXPECT_LE(std::fabs(q - mc.estimate), 3 * mc.std_error);
}

TEST(BayesRisk, RejectsInvalidInputs) {
    EXPECT_THROW(bayes_risk(kFitted, 0.0, 0.0), DomainError);
    EXPECT_THROW(bayes_risk(kFitted, -1.0, 0.0), DomainError);
    PriorSpec bad = kFitted;
    bad.nu = 1.0;
    EXPECT_THROW(bayes_risk(bad, 0.3, 0.0), DomainError);
    bad = kFitted;
    bad.tau = 0.0;
    EXPECT_THROW(bayes_risk(bad, 0.3, 0.0), DomainError);
}

TEST(BayesRisk, LimitAtTwentyScales) {
    for (const auto& p : {PriorSpec::gaussian(-0.02, 0.18), PriorSpec::gaussian(0.5, 0.5),
                          PriorSpec::student_t(5.0, 0.0, 0.2), PriorSpec::student_t(30.0, 0.1, 0.3)}) {
        for (double s : {0.05, 0.3, 1.0}) {
            const double b = p.mu + 20.0 * std::max(s, p.tau);
            EXPECT_LE(std::fabs(bayes_risk(p, s, b)), 1e-4) << p.nu << " " << s;
        }
    }
}

TEST(BayesRisk, HeavyTailLimitDecaysAsPartialMean) {
    // A t prior with nu near 2 carries mass far out; at 20 scales the risk is
    // still about -E[d; d > beta]. Reference from an independent quadrature.
    const double b = -0.02 + 20.0 * 0.3;
    EXPECT_NEAR(bayes_risk(kFitted, 0.3, b), -0.001996116416300795, 1e-9);
    double prev = std::fabs(bayes_risk(kFitted, 0.3, b));
    for (double beta = 2 * b; beta < 1e5; beta *= 2) {
        const double r = std::fabs(bayes_risk(kFitted, 0.3, beta));
        EXPECT_LT(r, prev);
        prev = r;
    }
    EXPECT_LT(prev, 1e-5);
}

TEST(BayesRiskMc, NeverShipping) {
    const auto mc = bayes_risk_mc(kFitted, 0.3, std::numeric_limits<double>::infinity(), 1000, 1);
    EXPECT_EQ(mc.estimate, 0.0);
    EXPECT_EQ(mc.std_error, 0.0);
}

TEST(BayesRiskMc, SteinValue) {
    const auto mc = bayes_risk_mc(PriorSpec::gaussian(0.0, 1.0), 1.0, 0.0, 1'000'000, 5);
    EXPECT_LE(std::fabs(mc.estimate + 0.28209479177387814), 3 * mc.std_error);
}

TEST(BayesRiskMc, Deterministic) {
    const auto a = bayes_risk_mc(kFitted, 0.3, 0.04, 200'000, 99);
    const auto b = bayes_risk_mc(kFitted, 0.3, 0.04, 200'000, 99);
    EXPECT_EQ(a.estimate, b.estimate);
    EXPECT_EQ(a.std_error, b.std_error);
    const auto c = bayes_risk_mc(kFitted, 0.3, 0.04, 200'000, 100);
    EXPECT_NE(a.estimate, c.estimate);
}

TEST(BayesRiskMc, RejectsSmallSamples) {
    EXPECT_THROW(bayes_risk_mc(kFitted, 0.3, 0.0, 999, 1), DomainError);
}

TEST(BayesRiskMc, AgreesWithQuadratureOnRandomTuples) {
    Rng rng(2024);
    for (int i = 0; i < 25; ++i) {
        const double mu = rng.uniform(-0.5, 0.5), tau = rng.uniform(0.05, 0.5);
        // nu above 2 keeps the Monte-Carlo variance finite.
        const PriorSpec p = i % 2 == 0 ? PriorSpec::gaussian(mu, tau)
                                       : PriorSpec::student_t(rng.uniform(2.2, 6.0), mu, tau);
        const double s = rng.uniform(0.05, 1.0), beta = rng.uniform(-0.5, 0.5);
        const auto mc = bayes_risk_mc(p, s, beta, 1'000'000, derive_seed(77, i));
        EXPECT_LE(std::fabs(bayes_risk(p, s, beta) - mc.estimate), 3 * mc.std_error) << i;
    }
}

TEST(BayesRisk, ZeroIsCriticalPointForCenteredPriors) {
    const double h = 1e-3;
    for (const auto& p : {PriorSpec::gaussian(0.0, 0.2), PriorSpec::gaussian(0.0, 1.0), PriorSpec::student_t(2.31, 0.0, 0.18),
                          PriorSpec::student_t(1.5, 0.0, 0.5)}) {
        for (double s : {0.1, 0.3, 1.0}) {
            const double d = (bayes_risk(p, s, h) - bayes_risk(p, s, -h)) / (2 * h);
            EXPECT_LE(std::fabs(d), 1e-5);
        }
    }
}

TEST(OptimalThreshold, GaussianGridArgminMatchesClosedForm) {
    Rng rng(31);
    const BetaGrid grid{-6.0, 6.0, 0.01};
    for (int i = 0; i < 20; ++i) {
        const double mu = rng.uniform(-0.2, 0.2), tau = rng.uniform(0.1, 0.5), s = rng.uniform(0.05, 0.5);
        const auto opt = optimal_threshold(PriorSpec::gaussian(mu, tau), s, grid);
        const double exact = optimal_beta_gaussian(mu, tau, s);
        EXPECT_LE(std::fabs(opt.rule.beta - exact), grid.step) << i;
        EXPECT_NEAR(opt.beta_refined, exact, 1e-6) << i;
    }
}

TEST(OptimalThreshold, FittedPriorAtPointThree) {
    const auto opt = optimal_threshold(kFitted, 0.30, BetaGrid{});
    EXPECT_NEAR(opt.rule.beta, 0.04, 0.005);
    EXPECT_NEAR(opt.rule.p_cutoff, 0.45, 0.005);
    EXPECT_NEAR(opt.beta_refined, 0.0394343, 1e-6);
    EXPECT_EQ(opt.curve.points.size(), 401u);
    EXPECT_LE(opt.curve.argmin_risk, 0.0);
}

TEST(OptimalThreshold, GaussianExamples) {
    EXPECT_NEAR(optimal_threshold(PriorSpec::gaussian(-0.02, 0.18), 0.3, BetaGrid{}).rule.beta, 0.0556, 0.005);
    EXPECT_NEAR(optimal_threshold(PriorSpec::gaussian(0.0, 0.2), 0.3, BetaGrid{}).rule.beta, 0.0, 0.005);
}

TEST(OptimalThreshold, CurveInvariants) {
    const auto opt = optimal_threshold(kFitted, 0.6, BetaGrid{-1.0, 1.0, 0.01});
    const auto& pts = opt.curve.points;
    double best = pts[0].risk;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        EXPECT_LT(pts[i - 1].beta, pts[i].beta);
        best = std::min(best, pts[i].risk);
    }
    EXPECT_EQ(opt.curve.argmin_risk, best);
    for (const auto& p : pts)
        if (p.risk == best) {
            EXPECT_EQ(opt.curve.argmin_beta, p.beta);
            break;
        }
}

TEST(OptimalThreshold, TiesPickSmallestBeta) {
    const RiskValue flat{0.0, -1, 0.0};
    const auto opt = detail::minimize_on_grid([&](double) { return flat; }, BetaGrid{-0.5, 0.5, 0.1}, 0.3);
    EXPECT_DOUBLE_EQ(opt.rule.beta, -0.5);
    EXPECT_DOUBLE_EQ(opt.curve.argmin_beta, -0.5);
    const auto two = detail::minimize_on_grid(
        [&](double b) { return std::fabs(std::fabs(b) - 0.3) < 1e-9 ? RiskValue{0.0, -1, 1.0} : flat; },
        BetaGrid{-0.5, 0.5, 0.1}, 0.3);
    EXPECT_DOUBLE_EQ(two.rule.beta, -0.3);
}

TEST(OptimalThreshold, RejectsBadGrid) {
    EXPECT_THROW(optimal_threshold(kFitted, 0.3, BetaGrid{1.0, -1.0, 0.1}), DomainError);
    EXPECT_THROW(optimal_threshold(kFitted, 0.3, BetaGrid{0.0, 1.0, 0.0}), DomainError);
    EXPECT_THROW(optimal_threshold(kFitted, 0.3, BetaGrid{0.0, 1.0, 0.9}), DomainError);
}

TEST(BetaOptCurve, GaussianMatchesClosedForm) {
    const auto prior = PriorSpec::gaussian(-0.02, 0.18);
    const BetaGrid grid{-1.0, 1.0, 0.005};
    for (const auto& pt : beta_opt_curve(prior, {1.0, 0.2, 0.5, 0.05}, grid))
        EXPECT_LE(std::fabs(pt.beta_opt - optimal_beta_gaussian(-0.02, 0.18, pt.sigma)), grid.step);
}

TEST(BetaOptCurve, FittedPriorIsMonotoneAndMatchesReference) {
    const std::vector<double> sigmas{2.0, 0.1, 0.3, 0.6, 1.0, 1.5};
    const auto curve = beta_opt_curve(kFitted, sigmas, BetaGrid{-1.0, 1.0, 0.005});
    const double beta_ref[] = {0.0069576, 0.0394343, 0.1120135, 0.2465319, 0.4710645, 0.7551872};
    const double risk_ref[] = {-0.0966346, -0.0723649, -0.0499619, -0.0344558, -0.0241386, -0.0180914};
    ASSERT_EQ(curve.size(), 6u);
    for (std::size_t i = 0; i < curve.size(); ++i) {
        EXPECT_NEAR(curve[i].beta_opt_refined, beta_ref[i], 1e-6);
        EXPECT_NEAR(curve[i].risk_at_opt, risk_ref[i], 1e-5);
        if (i > 0) {
            EXPECT_LT(curve[i - 1].sigma, curve[i].sigma);
            EXPECT_GE(curve[i].beta_opt, curve[i - 1].beta_opt);
            EXPECT_GE(curve[i].risk_at_opt, curve[i - 1].risk_at_opt);
        }
    }
}

TEST(BetaOptCurve, DenseSigmaSweepIsMonotone) {
    std::vector<double> sigmas;
    for (double s = 0.05; s <= 2.0 + 1e-9; s += 0.05) sigmas.push_back(s);
    const auto curve = beta_opt_curve(kFitted, sigmas, BetaGrid{-1.0, 1.0, 0.005});
    for (std::size_t i = 1; i < curve.size(); ++i) {
        EXPECT_GE(curve[i].beta_opt, curve[i - 1].beta_opt);
        EXPECT_GE(curve[i].beta_opt_refined, curve[i - 1].beta_opt_refined);
        EXPECT_GE(curve[i].risk_at_opt, curve[i - 1].risk_at_opt);
    }
}

TEST(BetaOptCurve, RejectsBadSigma) {
    EXPECT_THROW(beta_opt_curve(kFitted, {}, BetaGrid{}), DomainError);
    EXPECT_THROW(beta_opt_curve(kFitted, {0.3, 0.0}, BetaGrid{}), DomainError);
}

TEST(MuSweep, ShapeMatchesReference) {
    const BetaGrid grid{-1.0, 1.0, 0.005};
    const std::vector<double> mus{-2.0, -1.0, -0.5, -0.3, -0.2, -0.1, 0.0, 0.1, 0.2, 0.3, 0.5, 1.0, 2.0};
    const double ref[] = {0.149684, 0.295252, 0.397189, 0.369891, 0.306422, 0.183428, 0.0};
    const auto sweep = mu_sweep(2.31, 0.18, 0.3, mus, grid);
    for (std::size_t i = 0; i < 7; ++i) {
        EXPECT_NEAR(sweep[i].beta_opt_refined, ref[i], 1e-5) << mus[i];
        EXPECT_NEAR(sweep[12 - i].beta_opt_refined, -ref[i], 1e-5) << mus[12 - i];
    }
    EXPECT_LE(std::fabs(sweep[6].beta_opt), grid.step);
    const double gauss_slope = 0.09 / (0.18 * 0.18);
    for (std::size_t i = 3; i + 1 <= 9; ++i) EXPECT_LT(sweep[i + 1].beta_opt_refined, sweep[i].beta_opt_refined);
    const double slope = (sweep[8].beta_opt_refined - sweep[4].beta_opt_refined) / 0.4;
    EXPECT_LT(std::fabs(slope), gauss_slope);
    EXPECT_LT(std::fabs(sweep[12].beta_opt_refined), std::fabs(-2.0 * gauss_slope));
    EXPECT_LT(std::fabs(sweep[0].beta_opt_refined), std::fabs(sweep[2].beta_opt_refined));
}
