/**
 * @file experiments.hpp
 * @brief Scalar summaries of filter runs: halving times, exponential decay
 *        fits, windowed means and residual-order slopes.
 */
#pragma once

#include <eqf/bearing_system.hpp>
#include <eqf/errors.hpp>
#include <eqf/lie.hpp>
#include <eqf/sim/harness.hpp>

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

namespace eqf::sim {

/// Nominal gains, no injected noise, truth started `offset` rad from e1.
inline SimConfig noiseless_config(SimConfig cfg, double offset, const Vec3& axis = Vec3(0.0, 1.0, 1.0)) {
    cfg.inject_noise = false;
    cfg.initial_offset = offset;
    cfg.offset_axis = axis.normalized();
    cfg.trials = 1;
    return cfg;
}

inline TrialRecord run_noiseless(const SimConfig& cfg) {
    cfg.validate();
    GaussianStream stream = GaussianStream::for_trial(cfg.seed, 0);
    return run_trial(cfg, generate_trial(cfg, stream));
}

/// First time the series reaches half its initial value, linearly
/// interpolated between samples. nullopt if it never does.
inline std::optional<double> halving_time(const std::vector<double>& t, const std::vector<double>& err) {
    if (t.empty() || err.size() != t.size()) return std::nullopt;
    const double target = 0.5 * err.front();
    for (std::size_t k = 1; k < err.size(); ++k) {
        if (err[k] <= target) {
            const double span = err[k - 1] - err[k];
            const double frac = span > 0.0 ? (err[k - 1] - target) / span : 1.0;
            return t[k - 1] + frac * (t[k] - t[k - 1]);
        }
    }
    return std::nullopt;
}

struct ExponentialFit {
    double rate = 0.0;       // lambda in err ~ a exp(-lambda t)
    double log_scale = 0.0;  // log a
    int samples = 0;
};

/// Least-squares fit of log(err) = log a - lambda t over t in [t0, t1].
/// Non-positive samples are skipped.
inline ExponentialFit fit_exponential(const std::vector<double>& t, const std::vector<double>& err, double t0,
                                      double t1) {
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    int n = 0;
    for (std::size_t k = 0; k < t.size() && k < err.size(); ++k) {
        if (t[k] < t0 - 1e-12 || t[k] > t1 + 1e-12 || !(err[k] > 0.0)) continue;
        const double y = std::log(err[k]);
        sx += t[k];
        sy += y;
        sxx += t[k] * t[k];
        sxy += t[k] * y;
        ++n;
    }
    ExponentialFit fit;
    fit.samples = n;
    const double denom = n * sxx - sx * sx;
    if (n < 2 || denom <= 0.0) return fit;
    const double slope = (n * sxy - sx * sy) / denom;
    fit.rate = -slope;
    fit.log_scale = (sy - slope * sx) / n;
    return fit;
}

inline double window_mean(const std::vector<double>& t, const std::vector<double>& v, double t0, double t1) {
    double sum = 0.0;
    int n = 0;
    for (std::size_t k = 0; k < t.size() && k < v.size(); ++k) {
        if (t[k] >= t0 - 1e-12 && t[k] <= t1 + 1e-12) {
            sum += v[k];
            ++n;
        }
    }
    if (n == 0) throw Error(ErrorKind::InvalidConfig, "empty averaging window");
    return sum / n;
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    const auto n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lx = std::log(x[i]);
        const double ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

struct ResidualOrder {
    Vec2 direction;
    Rotation Xhat;
    std::vector<double> eps_norm;
    std::vector<double> standard_residual;
    std::vector<double> star_residual;
    double standard_slope = 0.0;
    double star_slope = 0.0;
};

/// Output residual y~ = h(phi(X̂, chart^{-1} eps)) - h(phi(X̂, e1)) against
/// C eps and C* eps along eps0 / 2^k, k = 0..levels-1.
inline ResidualOrder residual_order(const bearing::BearingConfig& cfg, const Rotation& Xhat, const Vec2& eps0,
                                    int levels) {
    ResidualOrder out;
    out.direction = eps0.normalized();
    out.Xhat = Xhat;
    const Vec3 yhat = bearing::output(bearing::phi(Xhat, UnitVector::e1()), cfg);
    for (int k = 0; k < levels; ++k) {
        const Vec2 eps = eps0 / std::ldexp(1.0, k);
        const Vec3 y = bearing::output(bearing::phi(Xhat, bearing::chart_inverse(eps)), cfg);
        const auto cf = bearing::closed_form_matrices(Xhat, y, yhat);
        const Vec3 residual = y - yhat;
        out.eps_norm.push_back(eps.norm());
        out.standard_residual.push_back((residual - cf.C * eps).norm());
        out.star_residual.push_back((residual - cf.C_star * eps).norm());
    }
    out.standard_slope = loglog_slope(out.eps_norm, out.standard_residual);
    out.star_slope = loglog_slope(out.eps_norm, out.star_residual);
    return out;
}

/// `count` random directions and attitudes, |eps0| = radius.
inline std::vector<ResidualOrder> residual_orders(const bearing::BearingConfig& cfg, int count, double radius,
                                                  int levels, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<ResidualOrder> out;
    for (int i = 0; i < count; ++i) {
        const Vec2 dir = Vec2(normal(rng), normal(rng)).normalized();
        const Rotation Xhat = exp_so3(Vec3(normal(rng), normal(rng), normal(rng)));
        out.push_back(residual_order(cfg, Xhat, radius * dir, levels));
    }
    return out;
}

}  // namespace eqf::sim
