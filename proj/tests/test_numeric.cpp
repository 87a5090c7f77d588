#include <eqf/numeric.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace eqf;

TEST(NumericJacobian, ExactForLinearMaps) {
    Mat<3, 2> A;
    A << 1, -2,
         0.5, 3,
         -4, 7;
    const auto J = numeric_jacobian<2>([&](const Vec2& x) -> Vec3 { return A * x; }, Vec2(0.3, -1.2));
    EXPECT_LE((J - A).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(NumericJacobian, SineAtZero) {
    const auto J = numeric_jacobian<1>([](const Vec<1>& x) -> Vec<1> { return x.array().sin().matrix(); },
                                       Vec<1>::Zero());
    EXPECT_NEAR(J(0, 0), 1.0, 1e-10);
}

TEST(NumericJacobian, DefaultStepScalesWithPoint) {
    EXPECT_DOUBLE_EQ(default_fd_step(Vec2(0.1, 0.0)), 1e-6);
    EXPECT_DOUBLE_EQ(default_fd_step(Vec2(30.0, 40.0)), 5e-5);
}

TEST(NumericJacobian, ExplicitStep) {
    // Central differences of x^3 with step h give 3x^2 + h^2.
    const auto J = numeric_jacobian<1>([](const Vec<1>& x) -> Vec<1> { return x.array().cube().matrix(); },
                                       Vec<1>::Constant(2.0), 1e-2);
    EXPECT_NEAR(J(0, 0), 12.0 + 1e-4, 1e-10);
}

TEST(NumericJacobian, RejectsNonFiniteEvaluations) {
    auto f = [](const Vec<1>& x) -> Vec<1> { return Vec<1>(std::log(x[0])); };
    try {
        numeric_jacobian<1>(f, Vec<1>::Zero());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NonFiniteEvaluation);
    }
}

TEST(PseudoInverse, RightInverseOfFullRowRank) {
    Mat<2, 3> m;
    m << 1, 0, 2,
         0, 1, -1;
    const Mat<3, 2> p = pseudo_inverse<2, 3>(m);
    EXPECT_LE((m * p - Mat2::Identity()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((p * m * p - p).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GuardedInverse, InvertsWellConditioned) {
    Mat2 m;
    m << 4, 1,
         1, 3;
    EXPECT_LE((guarded_spd_inverse<2>(m, 1e12, ErrorKind::SingularN) * m - Mat2::Identity()).norm(), 1e-14);
}

TEST(GuardedInverse, RefusesSingularAndIllConditioned) {
    const ErrorKind kind = ErrorKind::SingularN;
    try {
        guarded_spd_inverse<2>(Mat2::Zero(), 1e12, kind);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), kind);
    }
    Mat2 m = Mat2::Identity();
    m(1, 1) = 1e-13;
    EXPECT_THROW(guarded_spd_inverse<2>(m, 1e12, kind), Error);
    EXPECT_NO_THROW(guarded_spd_inverse<2>(m, 1e14, kind));
}
