/**
 * @file harness.hpp
 * @brief Bearing-estimation experiments: trajectories, noise, the three
 *        filters in lockstep, metrics and Monte Carlo aggregation.
 *
 * Draw order inside one trial stream: mu_0 (3 normals), then for every
 * step k = 0..K: mu_u (3 normals) followed by nu_y (3 normals).
 */
#pragma once

#include <eqf/bearing_system.hpp>
#include <eqf/ekf.hpp>
#include <eqf/eqf.hpp>
#include <eqf/errors.hpp>
#include <eqf/lie.hpp>
#include <eqf/sim/rng.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace eqf::sim {

enum class Filter { Ekf = 0, Eqf = 1, EqfStar = 2 };
inline constexpr std::array<Filter, 3> kFilters{Filter::Ekf, Filter::Eqf, Filter::EqfStar};

constexpr std::string_view filter_name(Filter f) {
    switch (f) {
        case Filter::Ekf: return "ekf";
        case Filter::Eqf: return "eqf";
        case Filter::EqfStar: return "eqfstar";
    }
    return "?";
}

struct SimConfig {
    double dt = 0.01;
    double duration = 5.0;
    int trials = 500;
    std::uint64_t seed = 1;

    // Noise standard deviations. They set both the injected noise and the
    // filter gains; inject_noise = false keeps the gains but injects nothing.
    double sigma0 = 0.5;
    double sigma_u = 0.01;
    double sigma_y = 0.05;
    bool inject_noise = true;

    // Initial truth rotated from e1 by this angle (rad) about offset_axis,
    // instead of the perturbed e1 + mu_0 draw.
    std::optional<double> initial_offset;
    Vec3 offset_axis = Vec3(0.0, 1.0, 1.0).normalized();

    double c_m = 1.0;
    double ekf_r_virtual = 1e-4;

    // Gain overrides. Sigma_0 = initial_variance * I, defaulting to sigma0^2.
    // The default n_eps keeps dt c_m^2 Sigma_0 / N at 1/2 for the default
    // dt, sigma0 and sigma_y; at 1 a single Euler step of the Riccati
    // equation annihilates Sigma.
    double m_eps = 1e-6;
    double n_eps = 0.0025;
    std::optional<double> initial_variance;

    int steps() const { return static_cast<int>(std::lround(duration / dt)); }
    double sigma0_variance() const { return initial_variance.value_or(sigma0 * sigma0); }
    bearing::BearingConfig bearing() const { return {c_m}; }

    void validate() const {
        auto fail = [](const std::string& what) { throw Error(ErrorKind::InvalidConfig, what); };
        if (!(dt > 0.0)) fail("dt must be positive");
        if (!(duration >= dt)) fail("duration must be at least dt");
        if (trials < 1) fail("trials must be at least 1");
        if (!(sigma0 >= 0.0) || !(sigma_u >= 0.0) || !(sigma_y >= 0.0)) fail("standard deviations must be >= 0");
        if (!(c_m > 0.0)) fail("c_m must be positive");
        if (!(ekf_r_virtual > 0.0)) fail("ekf_r_virtual must be positive");
        if (!(m_eps >= 0.0) || !(n_eps >= 0.0)) fail("m_eps and n_eps must be >= 0");
        if (!(n_eps + sigma_y * sigma_y > 0.0)) fail("n_eps + sigma_y^2 must be positive");
        if (!(sigma0_variance() > 0.0)) fail("initial variance must be positive");
    }
};

/// Omega(t) = (0.1 cos 2t, 0.2 sin t, 0) rad/s.
inline Vec3 reference_omega(double t) { return {0.1 * std::cos(2.0 * t), 0.2 * std::sin(t), 0.0}; }

struct TrialData {
    std::vector<double> t;
    std::vector<Vec3> eta;      // true state, unit norm
    std::vector<Vec3> omega_m;  // measured angular velocity
    std::vector<Vec3> y_m;      // measured output (not renormalized)
};

inline UnitVector offset_direction(double angle, const Vec3& axis) {
    const Vec3 perp = (axis - axis.dot(Vec3::UnitX()) * Vec3::UnitX()).normalized();
    return UnitVector::normalized(std::cos(angle) * Vec3::UnitX() + std::sin(angle) * perp);
}

inline TrialData generate_trial(const SimConfig& cfg, GaussianStream& stream) {
    const int K = cfg.steps();
    const double noise = cfg.inject_noise ? 1.0 : 0.0;
    TrialData data;
    data.t.reserve(K + 1);
    data.eta.reserve(K + 1);
    data.omega_m.reserve(K + 1);
    data.y_m.reserve(K + 1);

    const Vec3 mu0 = stream.normal3(noise * cfg.sigma0);
    UnitVector eta = cfg.initial_offset ? offset_direction(*cfg.initial_offset, cfg.offset_axis)
                                        : UnitVector::normalized(Vec3::UnitX() + mu0);
    for (int k = 0; k <= K; ++k) {
        const double t = k * cfg.dt;
        const Vec3 omega = reference_omega(t);
        const Vec3 mu_u = stream.normal3(noise * cfg.sigma_u);
        const Vec3 nu_y = stream.normal3(noise * cfg.sigma_y);
        data.t.push_back(t);
        data.eta.push_back(eta.vec());
        data.omega_m.push_back(omega + mu_u);
        data.y_m.push_back(cfg.c_m * eta.vec() + nu_y);
        eta = UnitVector::normalized(eta.vec() + cfg.dt * bearing::dynamics(eta, omega));
    }
    return data;
}

struct TrialRecord {
    std::vector<double> t;
    std::array<std::vector<double>, 3> angle;  // indexed by Filter
    std::array<std::vector<double>, 3> lyap;

    const std::vector<double>& angle_of(Filter f) const { return angle[static_cast<int>(f)]; }
    const std::vector<double>& lyap_of(Filter f) const { return lyap[static_cast<int>(f)]; }
};

/// Angle in [0, pi]. atan2 keeps full resolution near 0 and pi, where acos of
/// the inner product bottoms out around 2e-8.
inline double angle_between(const Vec3& a, const Vec3& b) {
    return std::atan2(a.cross(b).norm(), a.dot(b));
}

inline GainScheduleOf<bearing::BearingSystem> eqf_gains(const SimConfig& cfg) {
    GainScheduleOf<bearing::BearingSystem> g;
    g.Sigma0 = SymPosDef<2>::scaled_identity(cfg.sigma0_variance());
    g.M_eps = cfg.m_eps * Mat2::Identity();
    g.N_eps = cfg.n_eps * Mat3::Identity();
    g.M_input = cfg.sigma_u * cfg.sigma_u * Mat3::Identity();
    g.N_meas = cfg.sigma_y * cfg.sigma_y * Mat3::Identity();
    return g;
}

/// Discrete-time EKF noise matching the continuous intensities the EqF uses:
/// Q is a rate (integrated by dt in predict), R_meas = (n_eps + sigma_y^2) / dt.
struct EkfTuning {
    SymPosDef<3> P0;
    Mat3 Q;
    Mat3 R_meas;
    double r_virtual;
};

inline EkfTuning ekf_tuning(const SimConfig& cfg) {
    return {SymPosDef<3>::scaled_identity(cfg.sigma0_variance()), cfg.sigma_u * cfg.sigma_u * Mat3::Identity(),
            (cfg.n_eps + cfg.sigma_y * cfg.sigma_y) / cfg.dt * Mat3::Identity(), cfg.ekf_r_virtual};
}

/// Runs EKF, EqF (standard C) and EqF* (equivariant C*) on the same measurements.
inline TrialRecord run_trial(const SimConfig& cfg, const TrialData& data,
                             LinearizationSource linearization = LinearizationSource::Auto) {
    const int K = cfg.steps();
    if (static_cast<int>(data.t.size()) != K + 1 || data.eta.size() != data.t.size() ||
        data.omega_m.size() != data.t.size() || data.y_m.size() != data.t.size()) {
        throw Error(ErrorKind::InvalidConfig, "trial data does not match the configured number of steps");
    }

    const bearing::BearingSystem sys{cfg.bearing()};
    const auto gains = eqf_gains(cfg);
    const auto tuning = ekf_tuning(cfg);
    const EqfOptions standard{OutputMode::Standard, linearization};
    const EqfOptions star{OutputMode::EquivariantStar, linearization};

    ekf::EkfState ekf_state{Vec3::UnitX(), tuning.P0, 0.0};
    auto eqf_state = EqFState<bearing::BearingSystem>::initial(gains.Sigma0);
    auto star_state = eqf_state;

    TrialRecord rec;
    rec.t = data.t;
    for (auto& v : rec.angle) v.reserve(K + 1);
    for (auto& v : rec.lyap) v.reserve(K + 1);

    auto record_eqf = [&](Filter f, const EqFState<bearing::BearingSystem>& s, const UnitVector& eta) {
        const Vec3 eta_hat = state_estimate(sys, s.Xhat).vec();
        rec.angle[static_cast<int>(f)].push_back(angle_between(eta.vec(), eta_hat));
        rec.lyap[static_cast<int>(f)].push_back(lyapunov_value<2>(state_error(sys, s.Xhat, eta), s.Sigma));
    };

    for (int k = 0; k <= K; ++k) {
        const UnitVector eta = UnitVector::normalized(data.eta[k]);

        const Vec3 eta_err = eta.vec() - ekf_state.eta_hat;
        rec.angle[0].push_back(angle_between(eta.vec(), ekf_state.eta_hat));
        rec.lyap[0].push_back(std::max(0.0, eta_err.dot(ekf_state.P.matrix().llt().solve(eta_err))));
        record_eqf(Filter::Eqf, eqf_state, eta);
        record_eqf(Filter::EqfStar, star_state, eta);

        if (k == K) break;
        const Vec3& u = data.omega_m[k];
        const Vec3& y = data.y_m[k];

        ekf_state = ekf::ekf_update_magnetometer(ekf_state, y, tuning.R_meas, cfg.bearing());
        ekf_state = ekf::ekf_update_constraint(ekf_state, tuning.r_virtual);
        ekf_state = ekf::ekf_predict(ekf_state, u, tuning.Q, cfg.dt);

        eqf_state = eqf_step(sys, eqf_state, u, std::optional<Vec3>(y), gains, standard, cfg.dt);
        star_state = eqf_step(sys, star_state, u, std::optional<Vec3>(y), gains, star, cfg.dt);
    }
    return rec;
}

struct Percentiles {
    std::vector<double> p25, p50, p75;
};

struct AggregateRecord {
    std::vector<double> t;
    std::array<Percentiles, 3> angle;  // indexed by Filter
    std::array<Percentiles, 3> lyap;

    const Percentiles& angle_of(Filter f) const { return angle[static_cast<int>(f)]; }
    const Percentiles& lyap_of(Filter f) const { return lyap[static_cast<int>(f)]; }
};

/// Linear interpolation between order statistics; `sorted` must be ascending.
inline double percentile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) return 0.0;
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline AggregateRecord aggregate(const std::vector<const TrialRecord*>& trials) {
    AggregateRecord agg;
    if (trials.empty()) return agg;
    agg.t = trials.front()->t;
    const std::size_t steps = agg.t.size();
    std::vector<double> column(trials.size());

    auto fill = [&](Percentiles& out, auto&& series) {
        out.p25.resize(steps);
        out.p50.resize(steps);
        out.p75.resize(steps);
        for (std::size_t k = 0; k < steps; ++k) {
            for (std::size_t i = 0; i < trials.size(); ++i) column[i] = series(*trials[i])[k];
            std::sort(column.begin(), column.end());
            out.p25[k] = percentile_sorted(column, 0.25);
            out.p50[k] = percentile_sorted(column, 0.50);
            out.p75[k] = percentile_sorted(column, 0.75);
        }
    };
    for (Filter f : kFilters) {
        const int i = static_cast<int>(f);
        fill(agg.angle[i], [i](const TrialRecord& r) -> const std::vector<double>& { return r.angle[i]; });
        fill(agg.lyap[i], [i](const TrialRecord& r) -> const std::vector<double>& { return r.lyap[i]; });
    }
    return agg;
}

struct TrialFailure {
    int trial;
    std::string message;
};

struct MonteCarloResult {
    AggregateRecord aggregate;
    std::vector<std::optional<TrialRecord>> trials;  // indexed by trial, empty on failure
    std::vector<TrialFailure> failures;
};

/// Worker count from EQFKIT_THREADS (0 or unset = hardware concurrency).
inline unsigned thread_count_from_env() {
    unsigned n = 0;
    if (const char* env = std::getenv("EQFKIT_THREADS")) {
        n = static_cast<unsigned>(std::strtoul(env, nullptr, 10));
    }
    if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
    return n;
}

inline MonteCarloResult run_monte_carlo(const SimConfig& cfg, unsigned threads = thread_count_from_env()) {
    cfg.validate();
    MonteCarloResult result;
    result.trials.resize(cfg.trials);
    std::vector<std::optional<std::string>> errors(cfg.trials);

    std::atomic<int> next{0};
    auto worker = [&] {
        for (int i = next++; i < cfg.trials; i = next++) {
            try {
                auto stream = GaussianStream::for_trial(cfg.seed, static_cast<std::uint64_t>(i));
                result.trials[i] = run_trial(cfg, generate_trial(cfg, stream));
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    threads = std::clamp(threads, 1u, static_cast<unsigned>(cfg.trials));
    {
        std::vector<std::jthread> pool;
        for (unsigned w = 1; w < threads; ++w) pool.emplace_back(worker);
        worker();
    }

    std::vector<const TrialRecord*> ok;
    for (int i = 0; i < cfg.trials; ++i) {
        if (result.trials[i]) {
            ok.push_back(&*result.trials[i]);
        } else {
            result.failures.push_back({i, errors[i].value_or("unknown failure")});
        }
    }
    result.aggregate = aggregate(ok);
    return result;
}

struct LinmapRow {
    double theta;  // polar angle from e1
    double phi;    // azimuth about e1, measured from e2 toward e3
    double ekf_err;
    double eqf_err;
    double eqfstar_err;
};

/// Output-linearization error at X̂ = I, yhat = h(e1), for the direction
/// eta = cos(theta) e1 + sin(theta) (cos(phi) e2 + sin(phi) e3).
inline LinmapRow linearization_error_at(const bearing::BearingConfig& bcfg, double theta, double phi) {
    const UnitVector eta =
        UnitVector::normalized(std::cos(theta) * Vec3::UnitX() +
                               std::sin(theta) * (std::cos(phi) * Vec3::UnitY() + std::sin(phi) * Vec3::UnitZ()));
    const Vec3 yhat = bearing::output(UnitVector::e1(), bcfg);
    const Vec3 y = bearing::output(eta, bcfg);
    const Vec3 residual = y - yhat;

    const Mat3 H = ekf::magnetometer_jacobian(Vec3::UnitX(), bcfg);
    const auto cf = bearing::closed_form_matrices(Rotation::identity(), y, yhat);
    const Vec2 eps = bearing::chart(eta);

    return {theta, phi, (residual - H * (eta.vec() - Vec3::UnitX())).norm(), (residual - cf.C * eps).norm(),
            (residual - cf.C_star * eps).norm()};
}

/// resolution x resolution grid, theta in [0, pi - cap], phi in [0, 2 pi).
inline std::vector<LinmapRow> linearization_error_map(const SimConfig& cfg, int resolution, double cap = 0.1) {
    if (resolution < 2) throw Error(ErrorKind::InvalidConfig, "linmap resolution must be at least 2");
    if (!(cap > 0.0)) throw Error(ErrorKind::InvalidConfig, "linmap cap must exclude -e1");
    const auto bcfg = cfg.bearing();
    bcfg.validate();
    std::vector<LinmapRow> rows;
    rows.reserve(static_cast<std::size_t>(resolution) * resolution);
    const double theta_max = std::numbers::pi - cap;
    for (int i = 0; i < resolution; ++i) {
        const double theta = theta_max * i / (resolution - 1);
        for (int j = 0; j < resolution; ++j) {
            const double phi = 2.0 * std::numbers::pi * j / resolution;
            rows.push_back(linearization_error_at(bcfg, theta, phi));
        }
    }
    return rows;
}

}  // namespace eqf::sim
