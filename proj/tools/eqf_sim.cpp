// eqf_sim: runs the bearing-estimation experiments and writes CSV results.
//
//   eqf_sim noiseless  [--offset RAD]           -> noiseless.csv
//   eqf_sim montecarlo [--trials N --seed S]    -> aggregate.csv, trial_NNNN.csv
//   eqf_sim linmap     [--resolution N]         -> linmap.csv
//   eqf_sim selftest                            -> exit 0 when every invariant holds
//
// Exit status: 0 success, 1 invalid arguments, 2 runtime failure.

#include <eqf/errors.hpp>
#include <eqf/selftest.hpp>
#include <eqf/sim/csv.hpp>
#include <eqf/sim/experiments.hpp>
#include <eqf/sim/harness.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace {

namespace fs = std::filesystem;
using namespace eqf;

constexpr int kExitInvalid = 1;
constexpr int kExitRuntime = 2;

struct Options {
    sim::SimConfig cfg;
    std::optional<double> sigma0_var;
    double offset = 0.3;
    int resolution = 50;
    double cap = 0.1;
    std::string out = "results";
};

void print_summary(const sim::TrialRecord& rec) {
    for (sim::Filter f : sim::kFilters) {
        const auto& a = rec.angle_of(f);
        const auto half = sim::halving_time(rec.t, a);
        const auto fit = sim::fit_exponential(rec.t, a, 0.5, 3.0);
        std::printf("%-8s final angle %.3e rad  halving time %s  decay rate on [0.5, 3] s %.4f /s\n",
                    std::string(sim::filter_name(f)).c_str(), a.back(),
                    half ? (std::to_string(*half) + " s").c_str() : "never", fit.rate);
    }
}

int run_noiseless(const Options& o) {
    const sim::SimConfig cfg = sim::noiseless_config(o.cfg, o.offset);
    const sim::TrialRecord rec = sim::run_noiseless(cfg);
    sim::write_file(fs::path(o.out) / "noiseless.csv", sim::trial_csv(rec));
    print_summary(rec);
    return 0;
}

int run_montecarlo(const Options& o) {
    const sim::MonteCarloResult mc = sim::run_monte_carlo(o.cfg);
    const fs::path dir(o.out);
    for (int i = 0; i < o.cfg.trials; ++i) {
        if (mc.trials[i]) sim::write_file(dir / sim::trial_filename(i), sim::trial_csv(*mc.trials[i]));
    }
    for (const auto& f : mc.failures) {
        std::fprintf(stderr, "trial %d failed: %s\n", f.trial, f.message.c_str());
    }
    if (static_cast<int>(mc.failures.size()) == o.cfg.trials) {
        std::fprintf(stderr, "every trial failed\n");
        return kExitRuntime;
    }
    sim::write_file(dir / "aggregate.csv", sim::aggregate_csv(mc.aggregate));

    const double t_end = o.cfg.steps() * o.cfg.dt;
    for (sim::Filter f : sim::kFilters) {
        std::printf("%-8s median angle averaged over [%.2f, %.2f] s: %.4e rad\n",
                    std::string(sim::filter_name(f)).c_str(), t_end - 1.0, t_end,
                    sim::window_mean(mc.aggregate.t, mc.aggregate.angle_of(f).p50, t_end - 1.0, t_end));
    }
    std::printf("%d of %d trials completed\n", o.cfg.trials - static_cast<int>(mc.failures.size()), o.cfg.trials);
    return 0;
}

int run_linmap(const Options& o) {
    const auto rows = sim::linearization_error_map(o.cfg, o.resolution, o.cap);
    sim::write_file(fs::path(o.out) / "linmap.csv", sim::linmap_csv(rows));
    double max_ekf = 0.0, max_eqf = 0.0, max_star = 0.0;
    int dominated = 0;
    for (const auto& r : rows) {
        max_ekf = std::max(max_ekf, r.ekf_err);
        max_eqf = std::max(max_eqf, r.eqf_err);
        max_star = std::max(max_star, r.eqfstar_err);
        dominated += r.eqfstar_err <= r.eqf_err;
    }
    std::printf("max error  ekf %.4f  eqf %.4f  eqfstar %.4f\n", max_ekf, max_eqf, max_star);
    std::printf("eqfstar <= eqf at %d of %zu grid points\n", dominated, rows.size());
    return 0;
}

int run_selftest(const Options& o) {
    const auto report = selftest::run_all(o.cfg.seed);
    for (const auto& c : report.checks) {
        std::printf("[%s] %s: %s (worst %.3e, tolerance %.1e)%s%s\n", c.passed ? "PASS" : "FAIL", c.suite.c_str(),
                    c.name.c_str(), c.worst, c.tolerance, c.detail.empty() ? "" : " ", c.detail.c_str());
    }
    std::printf("%zu checks, %d failed\n", report.checks.size(), report.failures());
    return report.passed() ? 0 : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
    Options o;
    CLI::App app{"Equivariant filter experiments on the bearing problem"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "TOML/INI file with option values; command-line flags take precedence");

    app.add_option("--dt", o.cfg.dt, "Time step [s]")->capture_default_str();
    app.add_option("--duration", o.cfg.duration, "Simulated time [s]")->capture_default_str();
    app.add_option("--trials", o.cfg.trials, "Monte Carlo trials")->capture_default_str();
    app.add_option("--seed", o.cfg.seed, "Base seed")->capture_default_str();
    app.add_option("--sigma0", o.cfg.sigma0, "Initial perturbation std")->capture_default_str();
    app.add_option("--sigma-u", o.cfg.sigma_u, "Gyroscope noise std [rad/s]")->capture_default_str();
    app.add_option("--sigma-y", o.cfg.sigma_y, "Magnetometer noise std")->capture_default_str();
    app.add_option("--c-m", o.cfg.c_m, "Output scale")->capture_default_str();
    app.add_option("--ekf-r-virtual", o.cfg.ekf_r_virtual, "EKF unit-norm pseudo-measurement variance")
        ->capture_default_str();
    app.add_option("--m-eps", o.cfg.m_eps, "State gain regularizer (times I2)")->capture_default_str();
    app.add_option("--n-eps", o.cfg.n_eps, "Output gain regularizer (times I3)")->capture_default_str();
    app.add_option("--sigma0-var", o.sigma0_var, "Initial Riccati variance (default sigma0^2)");
    app.add_option("--out", o.out, "Output directory")->capture_default_str();

    auto* noiseless = app.add_subcommand("noiseless", "Noise-free run from a fixed initial offset");
    noiseless->add_option("--offset", o.offset, "Initial angle error [rad]")->capture_default_str();
    app.add_subcommand("montecarlo", "Seeded Monte Carlo batch with percentile aggregation");
    auto* linmap = app.add_subcommand("linmap", "Output-linearization error over the sphere");
    linmap->add_option("--resolution", o.resolution, "Grid points per angle")->capture_default_str();
    linmap->add_option("--cap", o.cap, "Excluded cap radius around -e1 [rad]")->capture_default_str();
    app.add_subcommand("selftest", "Run the invariant suites");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitInvalid;
    }

    o.cfg.initial_variance = o.sigma0_var;
    try {
        o.cfg.validate();
        if (o.resolution < 2) throw Error(ErrorKind::InvalidConfig, "--resolution must be at least 2");
        if (!(o.cap > 0.0)) throw Error(ErrorKind::InvalidConfig, "--cap must be positive");
        if (!(o.offset >= 0.0 && o.offset < 3.0)) throw Error(ErrorKind::InvalidConfig, "--offset must be in [0, 3)");
    } catch (const std::exception& e) {
        std::fprintf(stderr, "invalid configuration: %s\n", e.what());
        return kExitInvalid;
    }

    try {
        if (app.got_subcommand("noiseless")) return run_noiseless(o);
        if (app.got_subcommand("montecarlo")) return run_montecarlo(o);
        if (app.got_subcommand("linmap")) return run_linmap(o);
        return run_selftest(o);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
}
