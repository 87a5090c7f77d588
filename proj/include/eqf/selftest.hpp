/**
 * @file selftest.hpp
 * @brief Runtime invariant suites over random samples.
 *
 * Each check records the worst violation it saw against its tolerance, so a
 * failing report says by how much, not just where.
 */
#pragma once

#include <eqf/attitude_system.hpp>
#include <eqf/bearing_system.hpp>
#include <eqf/ekf.hpp>
#include <eqf/eqf.hpp>
#include <eqf/iekf_check.hpp>
#include <eqf/lie.hpp>
#include <eqf/numeric.hpp>
#include <eqf/sim/harness.hpp>
#include <eqf/system.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace eqf::selftest {

struct CheckResult {
    std::string suite;
    std::string name;
    double worst = 0.0;
    double tolerance = 0.0;
    bool passed = true;
    std::string detail;
};

struct Report {
    std::vector<CheckResult> checks;

    bool passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
    }
    int failures() const {
        return static_cast<int>(std::count_if(checks.begin(), checks.end(), [](const CheckResult& c) { return !c.passed; }));
    }
};

/// Tracks the worst value of a sampled violation measure.
class Check {
public:
    Check(std::string suite, std::string name, double tolerance)
        : result_{std::move(suite), std::move(name), 0.0, tolerance, true, {}} {}

    void observe(double violation) {
        if (!std::isfinite(violation)) {
            result_.worst = violation;
            result_.passed = false;
            return;
        }
        result_.worst = std::max(result_.worst, violation);
        if (violation > result_.tolerance) result_.passed = false;
    }

    void fail(std::string detail) {
        result_.passed = false;
        result_.detail = std::move(detail);
    }

    template <class F>
    void run(F&& body) {
        try {
            body(*this);
        } catch (const std::exception& e) {
            fail(std::string("threw: ") + e.what());
        }
    }

    CheckResult result() const { return result_; }

private:
    CheckResult result_;
};

namespace detail {

inline Vec3 random_vec3(std::mt19937_64& rng, double scale) {
    std::normal_distribution<double> n(0.0, scale);
    return {n(rng), n(rng), n(rng)};
}

inline Rotation random_rotation(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> angle(0.0, std::numbers::pi - 1e-3);
    return exp_so3(angle(rng) * random_vec3(rng, 1.0).normalized());
}

inline UnitVector random_bearing(std::mt19937_64& rng) { return UnitVector::normalized(random_vec3(rng, 1.0)); }

// Bearings kept 0.2 rad away from -e1 so the chart is well inside its domain.
inline UnitVector random_chart_bearing(std::mt19937_64& rng) {
    for (;;) {
        const UnitVector e = random_bearing(rng);
        if (e[0] > -std::cos(0.2)) return e;
    }
}

inline double distance(const UnitVector& a, const UnitVector& b) { return (a.vec() - b.vec()).norm(); }
inline double distance(const Rotation& a, const Rotation& b) { return (a.matrix() - b.matrix()).norm(); }

}  // namespace detail

inline void group_axioms(Report& report, std::mt19937_64& rng, int samples) {
    const std::string suite = "group";
    Check assoc(suite, "associativity", 1e-12);
    Check ident(suite, "identity", 1e-12);
    Check inv(suite, "inverse", 1e-12);
    Check explog(suite, "exp/log roundtrip", 1e-9);
    Check closure(suite, "orthonormal with det +1", 1e-12);
    Check adj(suite, "adjoint equals conjugation", 1e-12);
    for (int i = 0; i < samples; ++i) {
        const Rotation a = detail::random_rotation(rng), b = detail::random_rotation(rng), c = detail::random_rotation(rng);
        assoc.run([&](Check& k) { k.observe(detail::distance((a * b) * c, a * (b * c))); });
        ident.run([&](Check& k) {
            k.observe(detail::distance(a * Rotation::identity(), a));
            k.observe(detail::distance(Rotation::identity() * a, a));
        });
        inv.run([&](Check& k) { k.observe(detail::distance(a * a.inverse(), Rotation::identity())); });
        explog.run([&](Check& k) { k.observe(detail::distance(exp_so3(log_so3(a)), a)); });
        closure.run([&](Check& k) {
            const Mat3 m = (a * b).matrix();
            k.observe((m * m.transpose() - Mat3::Identity()).norm());
            k.observe(std::abs(m.determinant() - 1.0));
        });
        adj.run([&](Check& k) {
            const Vec3 w = detail::random_vec3(rng, 1.0);
            k.observe((hat3(SO3::adjoint_matrix(a) * w) - a.matrix() * hat3(w) * a.matrix().transpose()).norm());
        });
    }
    for (const Check* c : {&assoc, &ident, &inv, &explog, &closure, &adj}) report.checks.push_back(c->result());
}

/**
 * Axioms that every equivariant system must satisfy, on random samples drawn
 * by `state`, `input` and `element`. `dynamics(xi, u)` and `embed(xi)` give the
 * vector field and the state in ambient coordinates of the same dimension.
 */
template <EquivariantSystem S, class StateGen, class InputGen, class ElementGen, class Dynamics, class Embed>
void system_axioms(Report& report, const std::string& suite, const S& sys, std::mt19937_64& rng, int samples,
                   StateGen&& state, InputGen&& input, ElementGen&& element, Dynamics&& dynamics, Embed&& embed) {
    using G = GroupOf<S>;
    Check act_id(suite, "state action identity", 1e-12);
    Check act_comp(suite, "state action compatibility", 1e-12);
    Check in_act(suite, "input action axioms", 1e-12);
    Check out_act(suite, "output action axioms", 1e-12);
    Check lift_cond(suite, "lift condition", 1e-7);
    Check lift_eq(suite, "lift equivariance", 1e-12);
    Check out_eq(suite, "output equivariance", 1e-12);

    for (int i = 0; i < samples; ++i) {
        const auto xi = state(rng);
        const auto X = element(rng);
        const auto Y = element(rng);
        const auto u = input(rng);

        act_id.run([&](Check& k) { k.observe(detail::distance(sys.phi(G::identity(), xi), xi)); });
        act_comp.run([&](Check& k) {
            k.observe(detail::distance(sys.phi(G::compose(X, Y), xi), sys.phi(Y, sys.phi(X, xi))));
        });
        if constexpr (HasInputAction<S>) {
            in_act.run([&](Check& k) {
                k.observe((sys.psi(G::identity(), u) - u).norm());
                k.observe((sys.psi(G::compose(X, Y), u) - sys.psi(Y, sys.psi(X, u))).norm());
            });
            lift_eq.run([&](Check& k) {
                const AlgebraOf<S> lhs = G::adjoint_matrix(X) * sys.lift(sys.phi(X, xi), sys.psi(X, u));
                k.observe((lhs - sys.lift(xi, u)).norm());
            });
        }
        if constexpr (HasOutputAction<S>) {
            const OutputOf<S> y = sys.output(xi);
            out_act.run([&](Check& k) {
                k.observe((sys.rho(G::identity(), y) - y).norm());
                k.observe((sys.rho(G::compose(X, Y), y) - sys.rho(Y, sys.rho(X, y))).norm());
            });
            out_eq.run([&](Check& k) { k.observe((sys.output(sys.phi(X, xi)) - sys.rho(X, y)).norm()); });
        }
        lift_cond.run([&](Check& k) {
            const AlgebraOf<S> lambda = sys.lift(xi, u);
            const auto flow = numeric_jacobian<1>(
                [&](const Vec<1>& s) { return embed(sys.phi(G::exp(s[0] * lambda), xi)); }, Vec<1>::Zero());
            k.observe((flow.col(0) - dynamics(xi, u)).norm());
        });
    }
    report.checks.push_back(act_id.result());
    report.checks.push_back(act_comp.result());
    if constexpr (HasInputAction<S>) {
        report.checks.push_back(in_act.result());
        report.checks.push_back(lift_eq.result());
    }
    if constexpr (HasOutputAction<S>) {
        report.checks.push_back(out_act.result());
        report.checks.push_back(out_eq.result());
    }
    report.checks.push_back(lift_cond.result());
}

inline void bearing_chart(Report& report, std::mt19937_64& rng, int samples) {
    const std::string suite = "bearing chart";
    Check fwd(suite, "chart_inverse(chart(eta)) = eta", 1e-10);
    Check bwd(suite, "chart(chart_inverse(eps)) = eps", 1e-10);
    Check origin(suite, "chart(e1) = 0", 0.0);
    Check rinv(suite, "right-inverse identity", 1e-12);
    Check corr(suite, "closed-form correction map", 1e-7);
    std::uniform_real_distribution<double> radius(0.0, std::numbers::pi - 0.2);

    origin.run([&](Check& k) { k.observe(bearing::chart(UnitVector::e1()).norm()); });
    for (int i = 0; i < samples; ++i) {
        const UnitVector eta = detail::random_chart_bearing(rng);
        fwd.run([&](Check& k) { k.observe(detail::distance(bearing::chart_inverse(bearing::chart(eta)), eta)); });
        bwd.run([&](Check& k) {
            const Vec2 eps = radius(rng) * Vec2(detail::random_vec3(rng, 1.0).head<2>()).normalized();
            k.observe((bearing::chart(bearing::chart_inverse(eps)) - eps).norm());
        });
        rinv.run([&](Check& k) {
            const Vec3 u(0.0, detail::random_vec3(rng, 1.0).y(), detail::random_vec3(rng, 1.0).z());
            k.observe((bearing::dphi_origin(bearing::wedge2(bearing::dphi_origin_pinv(u))) - u).norm());
        });
    }
    corr.run([&](Check& k) {
        const bearing::BearingSystem sys{};
        const Mat<3, 2> numeric = pseudo_inverse<2, 3>(origin_differential(sys));
        k.observe((sys.correction_map() - numeric).cwiseAbs().maxCoeff());
    });
    for (const Check* c : {&fwd, &bwd, &origin, &rinv, &corr}) report.checks.push_back(c->result());
}

/// Closed-form A°, B, C, C* against central differences through the system maps.
inline void bearing_closed_forms(Report& report, std::mt19937_64& rng, int samples, double c_m = 1.0) {
    const std::string suite = c_m == 1.0 ? "bearing closed forms" : "bearing closed forms, scaled output";
    const bearing::BearingSystem sys{{c_m}};
    Check a(suite, "A° closed form vs finite differences", 1e-8);
    Check b(suite, "B closed form vs finite differences", 1e-6);
    Check c(suite, "C closed form vs finite differences", 1e-6);
    Check cs(suite, "C* closed form vs finite differences", 1e-6);
    Check dual(suite, "A° origin-velocity path vs measured-input path", 1e-6);
    for (int i = 0; i < samples; ++i) {
        const Rotation X = detail::random_rotation(rng);
        const Vec3 u = detail::random_vec3(rng, 1.0);
        const Vec3 yhat = sys.output(sys.phi(X, sys.origin()));
        const Vec3 y = sys.output(detail::random_bearing(rng)) + detail::random_vec3(rng, 0.05);
        const auto cf = bearing::closed_form_matrices(X, y, yhat);
        a.run([&](Check& k) {
            k.observe(state_matrix_origin(sys, X, u).cwiseAbs().maxCoeff());
            k.observe((state_matrix_origin(sys, X, u) - cf.A).cwiseAbs().maxCoeff());
        });
        b.run([&](Check& k) { k.observe((input_matrix(sys, X, u) - cf.B).cwiseAbs().maxCoeff()); });
        c.run([&](Check& k) { k.observe((output_matrix_standard(sys, X) - cf.C).cwiseAbs().maxCoeff()); });
        cs.run([&](Check& k) {
            k.observe((output_matrix_equivariant(sys, X, y, yhat) - cf.C_star).cwiseAbs().maxCoeff());
        });
        dual.run([&](Check& k) {
            k.observe((state_matrix_origin(sys, X, u) - state_matrix_measured(sys, X, u)).cwiseAbs().maxCoeff());
        });
    }
    for (const Check* ch : {&a, &b, &c, &cs, &dual}) report.checks.push_back(ch->result());
}

/// Sigma and P stay positive definite across noisy trials of every filter.
inline void positivity_along_runs(Report& report, int trials, std::uint64_t seed) {
    const std::string suite = "positivity";
    Check eqf_pd(suite, "Sigma positive definite along EqF and EqF* runs", 0.0);
    Check ekf_pd(suite, "P positive definite along EKF runs", 0.0);
    Check metrics(suite, "angle in [0, pi] and Lyapunov >= 0", 0.0);

    sim::SimConfig cfg;
    cfg.duration = 2.0;
    cfg.seed = seed;
    const bearing::BearingSystem sys{cfg.bearing()};
    const auto gains = sim::eqf_gains(cfg);
    const auto tuning = sim::ekf_tuning(cfg);

    for (int trial = 0; trial < trials; ++trial) {
        auto stream = sim::GaussianStream::for_trial(cfg.seed, static_cast<std::uint64_t>(trial));
        const sim::TrialData data = sim::generate_trial(cfg, stream);
        for (OutputMode mode : {OutputMode::Standard, OutputMode::EquivariantStar}) {
            eqf_pd.run([&](Check& k) {
                auto st = EqFState<bearing::BearingSystem>::initial(gains.Sigma0);
                const EqfOptions opts{mode, LinearizationSource::Auto};
                for (std::size_t i = 0; i + 1 < data.t.size(); ++i) {
                    st = eqf_step(sys, st, data.omega_m[i], std::optional<Vec3>(data.y_m[i]), gains, opts, cfg.dt);
                    const double lmin = Eigen::SelfAdjointEigenSolver<Mat2>(st.Sigma.matrix()).eigenvalues().minCoeff();
                    if (!(lmin > 0.0)) k.fail("min eigenvalue " + std::to_string(lmin));
                }
            });
        }
        ekf_pd.run([&](Check& k) {
            ekf::EkfState st{Vec3::UnitX(), tuning.P0, 0.0};
            for (std::size_t i = 0; i + 1 < data.t.size(); ++i) {
                st = ekf::ekf_update_magnetometer(st, data.y_m[i], tuning.R_meas, cfg.bearing());
                st = ekf::ekf_update_constraint(st, tuning.r_virtual);
                st = ekf::ekf_predict(st, data.omega_m[i], tuning.Q, cfg.dt);
                const double lmin = Eigen::SelfAdjointEigenSolver<Mat3>(st.P.matrix()).eigenvalues().minCoeff();
                if (!(lmin > 0.0)) k.fail("min eigenvalue " + std::to_string(lmin));
            }
        });
        metrics.run([&](Check& k) {
            const sim::TrialRecord rec = sim::run_trial(cfg, data);
            for (int f = 0; f < 3; ++f) {
                for (double a : rec.angle[f]) {
                    if (!(a >= 0.0 && a <= std::numbers::pi)) k.fail("angle " + std::to_string(a));
                }
                for (double v : rec.lyap[f]) {
                    if (!(v >= 0.0)) k.fail("lyapunov " + std::to_string(v));
                }
            }
        });
    }
    for (const Check* c : {&eqf_pd, &ekf_pd, &metrics}) report.checks.push_back(c->result());
}

inline void attitude_exactness(Report& report) {
    const std::string suite = "group affine";
    Check c(suite, "log-error deviation halves with dt", 0.0);
    c.run([&](Check& k) {
        const auto r = iekf_specialization_check(attitude::AttitudeTorsorSystem{}, 5);
        if (r.status != IekfCheckReport::Status::Passed) k.fail(r.reason);
    });
    report.checks.push_back(c.result());
}

/// Every suite with a fixed seed. `samples` scales the random sample counts.
inline Report run_all(std::uint64_t seed = 2024, int samples = 100) {
    Report report;
    std::mt19937_64 rng(seed);

    group_axioms(report, rng, samples);

    const bearing::BearingSystem bearing_sys{};
    system_axioms(
        report, "bearing system", bearing_sys, rng, samples, [](auto& g) { return detail::random_bearing(g); },
        [](auto& g) { return detail::random_vec3(g, 1.0); }, [](auto& g) { return detail::random_rotation(g); },
        [](const UnitVector& eta, const Vec3& omega) { return bearing::dynamics(eta, omega); },
        [](const UnitVector& eta) -> Vec3 { return eta.vec(); });

    const attitude::AttitudeTorsorSystem att{};
    system_axioms(
        report, "attitude system", att, rng, samples, [](auto& g) { return detail::random_rotation(g); },
        [](auto& g) {
            Vec<6> u;
            u << detail::random_vec3(g, 1.0), detail::random_vec3(g, 1.0);
            return u;
        },
        [](auto& g) { return detail::random_rotation(g); },
        [&att](const Rotation& P, const Vec<6>& u) -> Vec<9> { return att.vector_field(P, u).reshaped(); },
        [](const Rotation& P) -> Vec<9> { return P.matrix().reshaped(); });

    bearing_chart(report, rng, samples);
    bearing_closed_forms(report, rng, samples);
    bearing_closed_forms(report, rng, samples / 4 + 1, 2.5);
    positivity_along_runs(report, 10, seed);
    attitude_exactness(report);
    return report;
}

}  // namespace eqf::selftest
