// abdt: Bayes-optimal ship/no-ship thresholds for A/B tests.
//
// Exit codes: 0 success, 2 parse error, 3 domain error, 4 MCMC acceptance
// rate outside [0.1, 0.6] (the summary is still printed), 1 anything else.

#include <abdt/abdt.hpp>
#include <abdt/io.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

namespace {

using abdt::io::json;

enum ExitCode { kOk = 0, kInternal = 1, kParse = 2, kDomain = 3, kConverge = 4 };

void emit_error(const char* code, const std::string& message, std::optional<std::size_t> row = std::nullopt) {
    json err = {{"code", code}, {"message", message}};
    if (row) err["row"] = *row;
    std::cerr << json{{"error", err}}.dump() << '\n';
}

std::vector<abdt::ExperimentRecord> load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw abdt::ParseError("cannot open '" + path + "'");
    return abdt::io::read_records(in);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw abdt::ParseError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct PriorArgs {
    std::string prior;
    std::string fit_output;

    void add_to(CLI::App* cmd) {
        auto* p = cmd->add_option("--prior", prior, "prior as JSON text or a path to a JSON file");
        auto* f = cmd->add_option("--fit-output", fit_output, "JSON written by 'abdt fit'; its plug_in prior is used");
        p->excludes(f);
    }

    abdt::PriorSpec resolve() const {
        if (!fit_output.empty()) return abdt::io::prior_from_string(slurp(fit_output));
        if (prior.empty()) throw abdt::ParseError("one of --prior or --fit-output is required");
        const auto first = prior.find_first_not_of(" \t\n");
        if (first != std::string::npos && prior[first] == '{') return abdt::io::prior_from_string(prior);
        return abdt::io::prior_from_string(slurp(prior));
    }
};

std::vector<double> parse_sigma_range(const std::string& s) {
    const auto a = s.find(':');
    const auto b = a == std::string::npos ? a : s.find(':', a + 1);
    if (a == std::string::npos || b == std::string::npos) throw abdt::ParseError("range must look like min:max:step");
    auto num = [&](const std::string& t) {
        char* end = nullptr;
        const double v = std::strtod(t.c_str(), &end);
        if (t.empty() || end != t.c_str() + t.size()) throw abdt::ParseError("bad number '" + t + "' in range");
        return v;
    };
    const double lo = num(s.substr(0, a)), hi = num(s.substr(a + 1, b - a - 1)), step = num(s.substr(b + 1));
    if (!(lo <= hi)) throw abdt::DomainError("sigma range is empty (min > max)");
    if (!(step > 0.0)) throw abdt::DomainError("sigma range step must be positive");
    if (!(lo > 0.0)) throw abdt::DomainError("sigma values must be positive");
    std::vector<double> out;
    const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
    for (std::size_t i = 0; i < n; ++i) out.push_back(lo + static_cast<double>(i) * step);
    return out;
}

// "const:<s>", "lognormal:<median>:<log_sd>", "loguniform:<lo>:<hi>" or a bare number.
abdt::SigmaModel parse_sigma_model(const std::string& s) {
    std::vector<std::string> parts;
    std::stringstream ss(s);
    for (std::string t; std::getline(ss, t, ':');) parts.push_back(t);
    auto num = [&](const std::string& t) {
        char* end = nullptr;
        const double v = std::strtod(t.c_str(), &end);
        if (t.empty() || end != t.c_str() + t.size()) throw abdt::ParseError("bad number '" + t + "' in sigma model");
        return v;
    };
    if (parts.size() == 1 && parts[0] == "default") return abdt::SigmaModel::default_model();
    if (parts.size() == 1) return abdt::SigmaModel::constant(num(parts[0]));
    if (parts.size() == 2 && parts[0] == "const") return abdt::SigmaModel::constant(num(parts[1]));
    if (parts.size() == 3 && parts[0] == "lognormal") return abdt::SigmaModel::log_normal(num(parts[1]), num(parts[2]));
    if (parts.size() == 3 && parts[0] == "loguniform") return abdt::SigmaModel::log_uniform(num(parts[1]), num(parts[2]));
    throw abdt::ParseError("unrecognised sigma model '" + s + "'");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayes-optimal ship/no-ship thresholds for A/B tests"};
    app.require_subcommand(1);
    bool raw = false;
    app.add_flag("--raw", raw, "print full precision instead of 6 significant digits");

    // fit
    auto* fit = app.add_subcommand("fit", "fit the Student-t lift prior by MCMC");
    std::string data_path;
    int iters = 5000, burn_in = 2500;
    std::uint64_t seed = 1;
    fit->add_option("--data", data_path, "CSV of historical lift estimates")->required();
    fit->add_option("--iters", iters, "MCMC iterations")->capture_default_str();
    fit->add_option("--burn-in", burn_in, "iterations discarded as burn-in")->capture_default_str();
    fit->add_option("--seed", seed, "random seed")->capture_default_str();

    // threshold
    auto* thr = app.add_subcommand("threshold", "optimal cutoff for one standard error");
    PriorArgs thr_prior;
    thr_prior.add_to(thr);
    double sigma = 0.0;
    std::string grid_text = "-1:1:0.005", curve_out;
    thr->add_option("--sigma", sigma, "standard error of the experiment")->required();
    thr->add_option("--grid", grid_text, "beta grid min:max:step")->capture_default_str();
    thr->add_option("--curve-out", curve_out, "write the risk curve (beta,risk) as CSV");

    // curve
    auto* crv = app.add_subcommand("curve", "optimal cutoff as a function of the standard error");
    PriorArgs crv_prior;
    crv_prior.add_to(crv);
    std::string sigma_range;
    crv->add_option("--sigma-range", sigma_range, "sigma values min:max:step")->required();
    crv->add_option("--grid", grid_text, "beta grid min:max:step")->capture_default_str();

    // decide
    auto* dec = app.add_subcommand("decide", "ship decision for the next test of a feature");
    PriorArgs dec_prior;
    dec_prior.add_to(dec);
    std::string history_path;
    double x_new = 0.0, sigma_new = 0.0;
    dec->add_option("--history", history_path, "CSV of earlier tests of this feature (may have no rows)");
    dec->add_option("--x-new", x_new, "lift estimate of the new test")->required();
    dec->add_option("--sigma-new", sigma_new, "standard error of the new test")->required();
    dec->add_option("--grid", grid_text, "beta grid for non-Gaussian priors")->capture_default_str();

    // simulate
    auto* sim = app.add_subcommand("simulate", "compare decision policies by simulation");
    PriorArgs sim_prior;
    sim_prior.add_to(sim);
    std::string policies_text = "never,oracle,p=0.05,bayes", sigma_model_text = "0.3", trace_path;
    std::uint64_t n_features = 100000;
    sim->add_option("--policies", policies_text, "comma list of never, oracle, bayes, p=<p>, beta=<b>")
        ->capture_default_str();
    sim->add_option("--n", n_features, "number of simulated features")->capture_default_str();
    sim->add_option("--seed", seed, "random seed")->capture_default_str();
    sim->add_option("--sigma-model", sigma_model_text,
                    "standard errors: <s>, const:<s>, lognormal:<median>:<log_sd>, loguniform:<lo>:<hi>, default")
        ->capture_default_str();
    sim->add_option("--grid", grid_text, "beta grid for the bayes policy")->capture_default_str();
    sim->add_option("--trace", trace_path, "write per-feature decisions as CSV");

    // qq
    auto* qq = app.add_subcommand("qq", "Q-Q pairs of observed lifts against the fitted marginal");
    PriorArgs qq_prior;
    qq_prior.add_to(qq);
    std::string qq_out;
    std::size_t n_ref = 20000;
    qq->add_option("--data", data_path, "CSV of historical lift estimates")->required();
    qq->add_option("--out", qq_out, "output CSV path (stdout when omitted)");
    qq->add_option("--n-ref", n_ref, "size of the simulated reference sample")->capture_default_str();
    qq->add_option("--seed", seed, "random seed")->capture_default_str();

    // sample
    auto* smp = app.add_subcommand("sample", "synthetic lift estimates drawn from a prior, as CSV");
    PriorArgs smp_prior;
    smp_prior.add_to(smp);
    std::size_t n_records = 500;
    std::string smp_sigma_text = "default";
    smp->add_option("--n", n_records, "number of records")->capture_default_str();
    smp->add_option("--seed", seed, "random seed")->capture_default_str();
    smp->add_option("--sigma-model", smp_sigma_text, "standard errors, as for simulate")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        emit_error("E_PARSE", e.what());
        return kParse;
    }

    const abdt::io::Format fmt{raw};
    try {
        if (*fit) {
            const auto data = load_csv(data_path);
            abdt::McmcConfig cfg;
            cfg.iterations = iters;
            cfg.burn_in = burn_in;
            cfg.seed = seed;
            const auto summary = abdt::fit_prior(data, {}, cfg);
            std::cout << abdt::io::to_json(summary, fmt).dump(2) << '\n';
            if (!summary.converged) {
                emit_error("E_CONVERGE", "acceptance rate " + std::to_string(summary.acceptance_rate) +
                                             " outside [0.1, 0.6]");
                return kConverge;
            }
        } else if (*thr) {
            const auto prior = thr_prior.resolve();
            const auto grid = abdt::io::parse_grid(grid_text);
            const auto opt = abdt::optimal_threshold(prior, sigma, grid);
            json out = abdt::io::to_json(opt.rule, fmt);
            out["beta_refined"] = fmt.num(opt.beta_refined);
            out["risk"] = fmt.num(opt.curve.argmin_risk);
            out["prior"] = abdt::io::to_json(prior, fmt);
            std::cout << out.dump(2) << '\n';
            if (!curve_out.empty()) {
                std::ofstream os(curve_out);
                if (!os) throw abdt::ParseError("cannot write '" + curve_out + "'");
                abdt::io::write_curve_csv(os, opt.curve, fmt);
            }
        } else if (*crv) {
            const auto prior = crv_prior.resolve();
            const auto sigmas = parse_sigma_range(sigma_range);
            const auto grid = abdt::io::parse_grid(grid_text);
            abdt::io::write_sigma_curve_csv(std::cout, abdt::beta_opt_curve(prior, sigmas, grid), fmt);
        } else if (*dec) {
            const auto prior = dec_prior.resolve();
            abdt::FeatureHistory history;
            if (!history_path.empty()) {
                const auto groups = abdt::io::group_histories(load_csv(history_path));
                if (groups.size() > 1) throw abdt::DomainError("history mixes several feature_id values");
                if (groups.size() == 1) history = groups.begin()->second;
            }
            const auto grid = abdt::io::parse_grid(grid_text);
            const auto d = abdt::decide_nth(prior, history, x_new, sigma_new, grid);
            json out = {{"threshold", fmt.num(d.threshold)},
                        {"ship", d.ship},
                        {"method", d.closed_form ? "closed_form" : "grid"},
                        {"n_history", history.observations.size()},
                        {"posterior", abdt::io::to_json(d.posterior, fmt)}};
            std::cout << out.dump(2) << '\n';
        } else if (*sim) {
            const auto prior = sim_prior.resolve();
            auto policies = abdt::parse_policies(policies_text);
            const auto grid = abdt::io::parse_grid(grid_text);
            for (auto& p : policies)
                if (p.kind == abdt::Policy::Kind::BayesOptimal) p.grid = grid;
            const auto sm = parse_sigma_model(sigma_model_text);
            abdt::SimOptions opts;
            std::ofstream trace;
            if (!trace_path.empty()) {
                trace.open(trace_path);
                if (!trace) throw abdt::ParseError("cannot write '" + trace_path + "'");
                opts.trace = &trace;
            }
            const auto rep = abdt::simulate(prior, sm, policies, n_features, seed, opts);
            std::cout << abdt::io::to_json(rep, fmt).dump(2) << '\n';
        } else if (*qq) {
            const auto prior = qq_prior.resolve();
            const auto pts = abdt::qq_data(load_csv(data_path), prior, n_ref, seed);
            if (qq_out.empty()) {
                abdt::io::write_qq_csv(std::cout, pts, fmt);
            } else {
                std::ofstream os(qq_out);
                if (!os) throw abdt::ParseError("cannot write '" + qq_out + "'");
                abdt::io::write_qq_csv(os, pts, fmt);
            }
        } else if (*smp) {
            const auto prior = smp_prior.resolve();
            const auto recs = abdt::sample_synthetic(prior, parse_sigma_model(smp_sigma_text), n_records, seed);
            std::cout << "feature_id,lift,stderr\n";
            for (const auto& r : recs)
                std::cout << r.feature_id << ',' << fmt.text(r.lift_estimate) << ',' << fmt.text(r.std_error) << '\n';
        }
    } catch (const abdt::ParseError& e) {
        emit_error("E_PARSE", e.what(), e.row());
        return kParse;
    } catch (const abdt::DomainError& e) {
        emit_error("E_DOMAIN", e.what(), e.row());
        return kDomain;
    } catch (const std::exception& e) {
        emit_error("E_INTERNAL", e.what());
        return kInternal;
    }
    return kOk;
}
