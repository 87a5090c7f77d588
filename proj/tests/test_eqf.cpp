// Generic filter machinery, exercised through the bearing system and
// stripped-down variants of it that lack optional capabilities.

#include <eqf/bearing_system.hpp>
#include <eqf/eqf.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <optional>
#include <random>

using namespace eqf;

namespace {

// Bearing system assembled from the free functions, with each optional
// capability switched on or off.
template <bool Psi, bool Rho, bool Wedge>
struct Variant {
    using Group = SO3;
    using State = UnitVector;
    static constexpr int state_dim = 2;
    static constexpr int output_dim = 3;
    static constexpr int input_dim = 3;

    bearing::BearingConfig cfg;

    State phi(const Rotation& R, const State& eta) const { return bearing::phi(R, eta); }
    Vec3 lift(const State& eta, const Vec3& omega) const { return bearing::lift(eta, omega); }
    Vec3 output(const State& eta) const { return bearing::output(eta, cfg); }
    State origin() const { return UnitVector::e1(); }
    Vec2 chart(const State& e) const { return bearing::chart(e); }
    State chart_inverse(const Vec2& eps) const { return bearing::chart_inverse(eps); }

    Vec3 psi(const Rotation& R, const Vec3& omega) const
        requires Psi
    {
        return bearing::psi(R, omega);
    }
    Vec3 rho(const Rotation& R, const Vec3& y) const
        requires Rho
    {
        return bearing::rho(R, y);
    }
    Vec3 wedge(const Vec2& v) const
        requires Wedge
    {
        return bearing::wedge2(v);
    }
};

using NumericBearing = Variant<true, true, true>;
using NoPsi = Variant<false, true, true>;
using NoRho = Variant<true, false, true>;
using NonNormal = Variant<true, true, false>;

static_assert(EquivariantSystem<NumericBearing> && !HasCorrectionMap<NumericBearing>);
static_assert(!HasInputAction<NoPsi>);
static_assert(!HasOutputAction<NoRho>);
static_assert(!HasNormalChart<NonNormal>);

Rotation random_rotation(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    return exp_so3(Vec3(n(rng), n(rng), n(rng)));
}

Vec3 random_vec(std::mt19937_64& rng, double s = 1.0) {
    std::normal_distribution<double> n(0.0, s);
    return {n(rng), n(rng), n(rng)};
}

template <class S>
GainScheduleOf<S> unit_gains() {
    GainScheduleOf<S> g;
    g.Sigma0 = SymPosDef<2>::scaled_identity(0.1);
    g.M_eps = 1e-6 * Mat2::Identity();
    g.M_input = 1e-4 * Mat3::Identity();
    g.N_meas = 0.01 * Mat3::Identity();
    return g;
}

template <class F>
ErrorKind kind_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no eqf::Error thrown";
    return ErrorKind::InvalidConfig;
}

}  // namespace

TEST(StateMatrix, BearingIsZeroOnBothPaths) {
    const bearing::BearingSystem sys{};
    std::mt19937_64 rng(1);
    for (int i = 0; i < 100; ++i) {
        const Rotation X = random_rotation(rng);
        const Vec3 u = random_vec(rng);
        EXPECT_LE(state_matrix_origin(sys, X, u).cwiseAbs().maxCoeff(), 1e-8);
        EXPECT_LE(state_matrix_measured(sys, X, u).cwiseAbs().maxCoeff(), 1e-8);
        EXPECT_LE((state_matrix_origin(sys, X, u) - state_matrix_measured(sys, X, u)).cwiseAbs().maxCoeff(), 1e-6);
    }
}

TEST(StateMatrix, FallsBackToMeasuredPathWithoutPsi) {
    const NoPsi sys{};
    std::mt19937_64 rng(2);
    const Rotation X = random_rotation(rng);
    const Vec3 u = random_vec(rng);
    EXPECT_LE(state_matrix(sys, X, u).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_EQ(kind_of([&] { state_matrix_origin(sys, X, u); }), ErrorKind::MissingPsi);
}

TEST(InputMatrix, BearingAtIdentity) {
    const auto B = input_matrix(bearing::BearingSystem{}, Rotation::identity(), Vec3(0.1, -0.4, 2.0));
    Mat<2, 3> expected;
    expected << 0, 1, 0,
                0, 0, 1;
    EXPECT_LE((B - expected).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(InputMatrix, MatchesErrorFlowPerturbation) {
    // B is the sensitivity of the chart error rate to an input perturbation.
    const bearing::BearingSystem sys{};
    std::mt19937_64 rng(3);
    for (int i = 0; i < 20; ++i) {
        const Rotation X = random_rotation(rng);
        const Vec3 u = random_vec(rng);
        const UnitVector xi_hat = sys.phi(X, sys.origin());
        // Truth at xi_hat driven by u + du; observer driven by u. The error
        // phi(X^{-1}, xi) then moves at rate B du to first order.
        const auto fd = numeric_jacobian<3>(
            [&](const Vec3& du) -> Vec2 {
                const double h = 1e-5;
                const UnitVector truth = UnitVector::normalized(xi_hat.vec() + h * bearing::dynamics(xi_hat, u + du));
                const Rotation Xn = project_so3(X.matrix() + h * X.matrix() * hat3(u));
                return sys.chart(sys.phi(Xn.inverse(), truth)) / h;
            },
            Vec3::Zero(), 1e-3);
        EXPECT_LE((fd - input_matrix(sys, X, u)).cwiseAbs().maxCoeff(), 1e-4);
    }
}

TEST(OutputMatrix, StandardAtIdentityColumns) {
    const auto C = output_matrix_standard(bearing::BearingSystem{}, Rotation::identity());
    EXPECT_LE((C.col(0) - Vec3(0, 0, 1)).norm(), 1e-9);
    EXPECT_LE((C.col(1) - Vec3(0, -1, 0)).norm(), 1e-9);
}

TEST(OutputMatrix, EquivariantEqualsStandardWhenYIsYhat) {
    const bearing::BearingSystem sys{};
    std::mt19937_64 rng(4);
    for (int i = 0; i < 50; ++i) {
        const Rotation X = random_rotation(rng);
        const Vec3 yhat = sys.output(sys.phi(X, sys.origin()));
        EXPECT_LE((output_matrix_equivariant(sys, X, yhat, yhat) - output_matrix_standard(sys, X)).cwiseAbs().maxCoeff(),
                  1e-9);
    }
}

TEST(OutputMatrix, EquivariantNeedsRhoAndNormalChart) {
    const Vec3 y = Vec3::UnitX();
    EXPECT_EQ(kind_of([&] { output_matrix_equivariant(NoRho{}, Rotation::identity(), y, y); }), ErrorKind::MissingRho);
    EXPECT_EQ(kind_of([&] { output_matrix_equivariant(NonNormal{}, Rotation::identity(), y, y); }),
              ErrorKind::NotNormalChart);
    EXPECT_EQ(kind_of([&] { wedge_matrix(NonNormal{}); }), ErrorKind::NotNormalChart);
}

TEST(CorrectionMap, ClosedFormMatchesPseudoinverseFallback) {
    const Mat<3, 2> closed = bearing::BearingSystem{}.correction_map();
    const Mat<3, 2> numeric = correction_map(NumericBearing{});
    EXPECT_LE((closed - numeric).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LE((closed - bearing::chart_injection()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Correction, ZeroResidualGivesZero) {
    const bearing::BearingSystem sys{};
    const auto st = EqFState<bearing::BearingSystem>::initial(SymPosDef<2>::scaled_identity(0.3));
    const auto C = output_matrix_standard(sys, st.Xhat);
    EXPECT_EQ(correction(sys, st, C, Mat3::Identity(), Vec3::Zero()), Vec3::Zero());
}

TEST(Correction, ScalesLinearlyWithSigma) {
    const bearing::BearingSystem sys{};
    const Vec3 r(0.02, -0.3, 0.1);
    const auto C = output_matrix_standard(sys, Rotation::identity());
    for (double s : {1.0, 1e-3, 1e-6}) {
        const auto st = EqFState<bearing::BearingSystem>::initial(SymPosDef<2>::scaled_identity(s));
        const Vec3 delta = correction(sys, st, C, Mat3::Identity(), r);
        EXPECT_LE(delta.norm(), s * (C.transpose() * r).norm() * (1 + 1e-12));
    }
}

TEST(Correction, DisplacementTowardE2RotatesAboutE3) {
    const bearing::BearingSystem sys{};
    const auto st = EqFState<bearing::BearingSystem>::initial(SymPosDef<2>::scaled_identity(1.0));
    const Vec3 yhat = Vec3::UnitX();
    const Vec3 residual = 0.1 * Vec3::UnitY();
    const Vec3 delta = correction(sys, st, output_matrix_standard(sys, st.Xhat), Mat3::Identity(), residual);
    EXPECT_NEAR(delta.x(), 0.0, 1e-9);
    EXPECT_NEAR(delta.y(), 0.0, 1e-9);
    EXPECT_NEAR(delta.z(), -0.1, 1e-8);
    // The induced motion of yhat = X^T e1 under X_dot = delta^x X points toward y.
    const Vec3 yhat_rate = (hat3(delta)).transpose() * yhat;
    EXPECT_GT(yhat_rate.dot(residual), 0.0);
}

TEST(Correction, RefusesSingularN) {
    const bearing::BearingSystem sys{};
    const auto st = EqFState<bearing::BearingSystem>::initial(SymPosDef<2>{});
    const auto C = output_matrix_standard(sys, st.Xhat);
    EXPECT_EQ(kind_of([&] { correction(sys, st, C, Mat3::Zero(), Vec3::UnitY()); }), ErrorKind::SingularN);
}

TEST(Riccati, StationaryAndDiffusion) {
    const SymPosDef<2> s0 = SymPosDef<2>::make((Mat2() << 2, 0.5, 0.5, 1).finished());
    const Mat<3, 2> C0 = Mat<3, 2>::Zero();
    const auto same = riccati_step<2, 3>(s0, Mat2::Zero(), C0, Mat2::Zero(), Mat3::Identity(), 0.01);
    EXPECT_LE((same.matrix() - s0.matrix()).norm(), 1e-15);
    const auto grown = riccati_step<2, 3>(s0, Mat2::Zero(), C0, 0.5 * Mat2::Identity(), Mat3::Identity(), 0.01);
    EXPECT_LE((grown.matrix() - s0.matrix() - 0.005 * Mat2::Identity()).norm(), 1e-15);
}

TEST(Riccati, ScalarConvergesToAnalyticSolution) {
    SymPosDef<1> s = SymPosDef<1>::scaled_identity(1.0);
    const double dt = 1e-4;
    for (int k = 0; k < 10000; ++k) {
        s = riccati_step<1, 1>(s, Mat<1, 1>::Zero(), Mat<1, 1>::Ones(), Mat<1, 1>::Zero(), Mat<1, 1>::Ones(), dt);
    }
    EXPECT_NEAR(s.matrix()(0, 0), 0.5, 1e-3);
}

TEST(Riccati, ReportsLostPositivity) {
    // dt * Sigma / N = 2 overshoots through zero.
    const SymPosDef<1> s = SymPosDef<1>::scaled_identity(1.0);
    EXPECT_EQ(kind_of([&] {
                  riccati_step<1, 1>(s, Mat<1, 1>::Zero(), Mat<1, 1>::Ones(), Mat<1, 1>::Zero(), Mat<1, 1>::Ones(), 2.0);
              }),
              ErrorKind::LostPositivity);
    EXPECT_EQ(kind_of([&] {
                  riccati_step<1, 1>(s, Mat<1, 1>::Zero(), Mat<1, 1>::Ones(), Mat<1, 1>::Zero(), Mat<1, 1>::Ones(), 0.0);
              }),
              ErrorKind::InvalidConfig);
}

TEST(Gains, ComposedGainsArePositiveDefinite) {
    auto g = unit_gains<bearing::BearingSystem>();
    Mat<2, 3> B;
    B << 0, 1, 0,
         0, 0, 1;
    EXPECT_LE((g.state_gain(B).matrix() - (1e-6 + 1e-4) * Mat2::Identity()).norm(), 1e-15);
    EXPECT_LE((g.output_gain().matrix() - 0.01 * Mat3::Identity()).norm(), 1e-15);
    g.M_eps.setZero();
    g.M_input.setZero();
    EXPECT_EQ(kind_of([&] { g.state_gain(B); }), ErrorKind::NotPositiveDefinite);
}

TEST(EqfStep, WithheldOutputFollowsLiftedSystem) {
    // Without a measurement the estimate is the Euler-integrated lifted system,
    // which tracks a fine reference solution to O(dt).
    const bearing::BearingSystem sys{};
    const auto gains = unit_gains<bearing::BearingSystem>();
    const EqfOptions opts{OutputMode::Standard, LinearizationSource::Auto};
    auto st = EqFState<bearing::BearingSystem>::initial(gains.Sigma0);
    UnitVector ref = UnitVector::e1();
    const double dt = 0.01;
    auto omega = [](double t) { return Vec3(0.1 * std::cos(2 * t), 0.2 * std::sin(t), 0.3); };
    for (int k = 0; k < 100; ++k) {
        const double t = k * dt;
        st = eqf_step(sys, st, omega(t), std::optional<Vec3>{}, gains, opts, dt);
        for (int j = 0; j < 100; ++j) {
            const double tj = t + j * dt / 100;
            ref = UnitVector::normalized(ref.vec() + dt / 100 * bearing::dynamics(ref, omega(tj)));
        }
    }
    const double err = (state_estimate(sys, st.Xhat).vec() - ref.vec()).norm();
    EXPECT_LT(err, 5 * dt * 0.3);
    EXPECT_NEAR(st.t, 1.0, 1e-12);
}

TEST(EqfStep, ZeroResidualOnlyDriftsAndGrowsSigmaByM) {
    const bearing::BearingSystem sys{};
    auto gains = unit_gains<bearing::BearingSystem>();
    const EqfOptions opts{OutputMode::EquivariantStar, LinearizationSource::Auto};
    const auto st = EqFState<bearing::BearingSystem>::initial(gains.Sigma0);
    const Vec3 yhat = sys.output(sys.origin());
    const auto next = eqf_step(sys, st, Vec3::Zero(), std::optional<Vec3>(yhat), gains, opts, 0.01);
    EXPECT_LE((next.Xhat.matrix() - Mat3::Identity()).norm(), 1e-15);
    const Mat<3, 2> C = output_matrix_standard(sys, st.Xhat);
    const Mat2 info = st.Sigma.matrix() * C.transpose() * (gains.N_meas.inverse()) * C * st.Sigma.matrix();
    const Mat2 expected = st.Sigma.matrix() + 0.01 * ((1e-6 + 1e-4) * Mat2::Identity() - info);
    EXPECT_LE((next.Sigma.matrix() - expected).norm(), 1e-9);
}

TEST(EqfStep, ClosedFormAndNumericLinearizationAgree) {
    const bearing::BearingSystem sys{};
    const NumericBearing numeric{};
    const auto gains = unit_gains<bearing::BearingSystem>();
    std::mt19937_64 rng(5);
    for (OutputMode mode : {OutputMode::Standard, OutputMode::EquivariantStar}) {
        auto a = EqFState<bearing::BearingSystem>::initial(gains.Sigma0);
        auto b = EqFState<NumericBearing>::initial(gains.Sigma0);
        UnitVector truth = UnitVector::normalized(Vec3(0.8, 0.5, -0.3));
        for (int k = 0; k < 200; ++k) {
            const Vec3 u = random_vec(rng, 0.3);
            const Vec3 y = truth.vec() + random_vec(rng, 0.02);
            a = eqf_step(sys, a, u, std::optional<Vec3>(y), gains, {mode, LinearizationSource::Auto}, 0.01);
            b = eqf_step(numeric, b, u, std::optional<Vec3>(y), gains, {mode, LinearizationSource::Auto}, 0.01);
            truth = UnitVector::normalized(truth.vec() + 0.01 * bearing::dynamics(truth, u));
        }
        EXPECT_LE((a.Xhat.matrix() - b.Xhat.matrix()).norm(), 1e-6);
        EXPECT_LE((a.Sigma.matrix() - b.Sigma.matrix()).norm(), 1e-8);
    }
}

TEST(EqfStep, StarModeRequiresCapabilities) {
    const auto gains = unit_gains<NoRho>();
    const EqfOptions star{OutputMode::EquivariantStar, LinearizationSource::Auto};
    auto st = EqFState<NoRho>::initial(gains.Sigma0);
    EXPECT_EQ(kind_of([&] { eqf_step(NoRho{}, st, Vec3::Zero(), std::optional<Vec3>(Vec3::UnitX()), gains, star, 0.01); }),
              ErrorKind::MissingRho);
    const auto gains2 = unit_gains<NonNormal>();
    auto st2 = EqFState<NonNormal>::initial(gains2.Sigma0);
    EXPECT_EQ(kind_of([&] {
                  eqf_step(NonNormal{}, st2, Vec3::Zero(), std::optional<Vec3>(Vec3::UnitX()), gains2, star, 0.01);
              }),
              ErrorKind::NotNormalChart);
    // Standard mode needs neither.
    EXPECT_NO_THROW(eqf_step(NoRho{}, st, Vec3::Zero(), std::optional<Vec3>(Vec3::UnitX()), gains,
                             {OutputMode::Standard, LinearizationSource::Auto}, 0.01));
}

TEST(EqfStep, RejectsNonFiniteOutputAndBadDt) {
    const bearing::BearingSystem sys{};
    const auto gains = unit_gains<bearing::BearingSystem>();
    const auto st = EqFState<bearing::BearingSystem>::initial(gains.Sigma0);
    const Vec3 nan_y(std::nan(""), 0, 0);
    EXPECT_EQ(kind_of([&] { eqf_step(sys, st, Vec3::Zero(), std::optional<Vec3>(nan_y), gains, {}, 0.01); }),
              ErrorKind::NonFiniteEvaluation);
    EXPECT_EQ(kind_of([&] { eqf_step(sys, st, Vec3::Zero(), std::optional<Vec3>{}, gains, {}, -0.01); }),
              ErrorKind::InvalidConfig);
}

TEST(Lyapunov, NamedValues) {
    EXPECT_EQ(lyapunov_value<2>(Vec2::Zero(), SymPosDef<2>{}), 0.0);
    EXPECT_NEAR(lyapunov_value<2>(Vec2(3, 4), SymPosDef<2>{}), 25.0, 1e-12);
    const auto sigma = SymPosDef<2>::make((Mat2() << 4, 0, 0, 1).finished());
    EXPECT_NEAR(lyapunov_value<2>(Vec2(2, 0), sigma), 1.0, 1e-12);
}

TEST(StateError, ZeroWhenEstimateIsExact) {
    const bearing::BearingSystem sys{};
    std::mt19937_64 rng(6);
    const Rotation X = random_rotation(rng);
    EXPECT_LE(state_error(sys, X, state_estimate(sys, X)).norm(), 1e-7);
}
