#include <eqf/attitude_system.hpp>
#include <eqf/bearing_system.hpp>
#include <eqf/iekf_check.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace eqf;

TEST(IekfCheck, AttitudeDeviationIsPureIntegrationError) {
    const auto r = iekf_specialization_check(attitude::AttitudeTorsorSystem{}, 5);
    ASSERT_EQ(r.status, IekfCheckReport::Status::Passed) << r.reason;
    ASSERT_EQ(r.ratios.size(), 5u);
    for (const auto& trial : r.ratios) {
        ASSERT_EQ(trial.size(), 2u);
        for (double ratio : trial) EXPECT_NEAR(ratio, 2.0, 0.3);
    }
    EXPECT_LT(r.error_dynamics_residual, 1e-9);
}

TEST(IekfCheck, ZeroErrorStaysZero) {
    const auto r = iekf_specialization_check(attitude::AttitudeTorsorSystem{}, 1);
    EXPECT_LE(r.fixed_point_deviation, 1e-12);
}

TEST(IekfCheck, DeviationShrinksWithStep) {
    const auto r = iekf_specialization_check(attitude::AttitudeTorsorSystem{}, 3);
    for (const auto& devs : r.deviations) {
        ASSERT_EQ(devs.size(), 3u);
        EXPECT_GT(devs[0], devs[1]);
        EXPECT_GT(devs[1], devs[2]);
        EXPECT_GT(devs[2], 0.0);
    }
}

TEST(IekfCheck, OtherReferenceDirection) {
    attitude::AttitudeTorsorSystem sys;
    sys.reference = Vec3(1.0, -2.0, 0.5).normalized();
    EXPECT_EQ(iekf_specialization_check(sys, 2).status, IekfCheckReport::Status::Passed);
}

TEST(IekfCheck, BearingSystemIsNotApplicable) {
    const auto r = iekf_specialization_check(bearing::BearingSystem{}, 5);
    EXPECT_EQ(r.status, IekfCheckReport::Status::NotApplicable);
    EXPECT_FALSE(r.reason.empty());
    EXPECT_TRUE(r.deviations.empty());
}
