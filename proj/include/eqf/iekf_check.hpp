/**
 * @file iekf_check.hpp
 * @brief Exactness check of the pre-observer error linearization on
 *        group-affine torsor systems.
 *
 * For such systems (origin = identity, chart = log) the pre-observer error
 * E = P X̂^{-1} obeys E_dot = f_u(E) - E f_u(I), and eps = log(E)^v evolves
 * exactly as eps_dot = A° eps. With Euler integration of both the true state
 * and the observer, the only remaining discrepancy is integration error,
 * which must shrink linearly with dt.
 */
#pragma once

#include <eqf/eqf.hpp>
#include <eqf/system.hpp>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace eqf {

struct IekfCheckOptions {
    std::vector<double> step_sizes{1e-2, 5e-3, 2.5e-3};
    double horizon = 1.0;
    double ratio_target = 2.0;
    double ratio_tolerance = 0.3;
    std::uint64_t seed = 7;
};

struct IekfCheckReport {
    enum class Status { Passed, Failed, NotApplicable };

    Status status = Status::NotApplicable;
    std::string reason;
    std::vector<double> step_sizes;
    std::vector<std::vector<double>> deviations;  // [trial][step size]
    std::vector<std::vector<double>> ratios;      // [trial][i] = dev[i] / dev[i+1]
    double fixed_point_deviation = 0.0;           // max |eps| over a run started at E(0) = I
    double error_dynamics_residual = 0.0;         // max |E_dot - (f(E) - E f(I))|_F
};

namespace detail {

template <int M>
Vec<M> integrate_linear(const Mat<M, M>& A, Vec<M> x, double dt, int substeps = 8) {
    const double h = dt / substeps;
    for (int i = 0; i < substeps; ++i) {
        const Vec<M> k1 = A * x;
        const Vec<M> k2 = A * (x + 0.5 * h * k1);
        const Vec<M> k3 = A * (x + 0.5 * h * k2);
        const Vec<M> k4 = A * (x + h * k3);
        x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return x;
}

template <class S>
Vec<S::Group::dim> random_algebra(std::mt19937_64& rng, double scale) {
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    Vec<S::Group::dim> v;
    for (int i = 0; i < S::Group::dim; ++i) v[i] = scale * uni(rng);
    return v;
}

/// Deviation at the horizon between the log error and its linear prediction.
template <GroupAffineTorsorSystem S>
double exactness_deviation(const S& sys, const ElementOf<S>& E0, const InputOf<S>& u, double dt, double horizon,
                           double* max_eps = nullptr) {
    using G = GroupOf<S>;
    constexpr int m = S::state_dim;

    GainScheduleOf<S> gains;
    gains.M_eps = 1e-6 * Mat<m, m>::Identity();
    EqfOptions opts;
    opts.mode = OutputMode::Standard;
    opts.linearization = LinearizationSource::Numeric;

    auto observer = EqFState<S>::initial(gains.Sigma0);
    ElementOf<S> P = E0;
    Vec<m> eps_lin = sys.chart(G::compose(P, G::inverse(observer.Xhat)));

    const int steps = static_cast<int>(std::lround(horizon / dt));
    for (int k = 0; k < steps; ++k) {
        const auto A = state_matrix(sys, observer.Xhat, u);
        eps_lin = integrate_linear<m>(A, eps_lin, dt);
        P = G::project(G::matrix(P) + dt * sys.vector_field(P, u));
        observer = eqf_step(sys, observer, u, std::optional<OutputOf<S>>{}, gains, opts, dt);
        if (max_eps) {
            const double e = sys.chart(G::compose(P, G::inverse(observer.Xhat))).norm();
            *max_eps = std::max(*max_eps, e);
        }
    }
    const Vec<m> eps = sys.chart(G::compose(P, G::inverse(observer.Xhat)));
    return (eps - eps_lin).norm();
}

}  // namespace detail

template <EquivariantSystem S>
IekfCheckReport iekf_specialization_check(const S& sys, int trials, const IekfCheckOptions& opts = {}) {
    IekfCheckReport report;
    report.step_sizes = opts.step_sizes;

    if constexpr (!GroupAffineTorsorSystem<S>) {
        (void)sys;
        (void)trials;
        report.status = IekfCheckReport::Status::NotApplicable;
        report.reason = "system is not a group-affine system on a group torsor; no exactness claim";
        return report;
    } else {
        using G = GroupOf<S>;
        std::mt19937_64 rng(opts.seed);
        std::normal_distribution<double> normal(0.0, 1.0);
        auto random_input = [&] {
            InputOf<S> u;
            for (int i = 0; i < S::input_dim; ++i) u[i] = 0.5 * normal(rng);
            return u;
        };

        // E_dot from the product rule against the closed-form error dynamics.
        for (int i = 0; i < 100; ++i) {
            const auto P = G::exp(detail::random_algebra<S>(rng, 2.0));
            const auto Xhat = G::exp(detail::random_algebra<S>(rng, 2.0));
            const auto u = random_input();
            const auto Xinv = G::matrix(G::inverse(Xhat));
            const auto E = G::compose(P, G::inverse(Xhat));
            const typename G::Matrix Edot =
                sys.vector_field(P, u) * Xinv - G::matrix(P) * G::hat(sys.lift(Xhat, u)) * Xinv;
            const typename G::Matrix expected = sys.vector_field(E, u) - G::matrix(E) * sys.vector_field(G::identity(), u);
            report.error_dynamics_residual = std::max(report.error_dynamics_residual, (Edot - expected).norm());
        }

        {
            double max_eps = 0.0;
            detail::exactness_deviation(sys, G::identity(), random_input(), opts.step_sizes.front(), opts.horizon,
                                        &max_eps);
            report.fixed_point_deviation = max_eps;
        }

        bool ok = report.error_dynamics_residual < 1e-9 && report.fixed_point_deviation < 1e-12;
        for (int trial = 0; trial < trials; ++trial) {
            const auto E0 = G::exp(detail::random_algebra<S>(rng, 0.6));
            const auto u = random_input();
            std::vector<double> devs;
            for (double dt : opts.step_sizes) {
                devs.push_back(detail::exactness_deviation(sys, E0, u, dt, opts.horizon));
            }
            std::vector<double> ratios;
            for (std::size_t i = 0; i + 1 < devs.size(); ++i) {
                const double r = devs[i] / devs[i + 1];
                ratios.push_back(r);
                ok = ok && std::abs(r - opts.ratio_target) <= opts.ratio_tolerance;
            }
            report.deviations.push_back(std::move(devs));
            report.ratios.push_back(std::move(ratios));
        }
        report.status = ok ? IekfCheckReport::Status::Passed : IekfCheckReport::Status::Failed;
        if (!ok) report.reason = "deviation ratios or error-dynamics identity outside tolerance";
        return report;
    }
}

}  // namespace eqf
