#include <eqf/selftest.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <stdexcept>
#include <string>

using namespace eqf;

TEST(Selftest, AllSuitesPass) {
    const auto report = selftest::run_all();
    for (const auto& c : report.checks) {
        EXPECT_TRUE(c.passed) << c.suite << ": " << c.name << " worst " << c.worst << " tol " << c.tolerance << " "
                              << c.detail;
    }
    EXPECT_TRUE(report.passed());
    EXPECT_EQ(report.failures(), 0);
}

TEST(Selftest, CoversEverySuite) {
    const auto report = selftest::run_all(7, 10);
    std::set<std::string> suites;
    for (const auto& c : report.checks) suites.insert(c.suite);
    for (const char* s : {"group", "bearing system", "attitude system", "bearing chart", "bearing closed forms",
                          "positivity", "group affine"}) {
        EXPECT_TRUE(suites.count(s)) << s;
    }
}

TEST(Selftest, CheckTracksWorstAndFailures) {
    selftest::Check c("s", "n", 1e-3);
    c.observe(1e-4);
    c.observe(5e-4);
    EXPECT_TRUE(c.result().passed);
    EXPECT_DOUBLE_EQ(c.result().worst, 5e-4);
    c.observe(2e-3);
    EXPECT_FALSE(c.result().passed);

    selftest::Check nan("s", "nan", 1.0);
    nan.observe(std::nan(""));
    EXPECT_FALSE(nan.result().passed);

    selftest::Check thrower("s", "throws", 1.0);
    thrower.run([](selftest::Check&) { throw std::runtime_error("boom"); });
    EXPECT_FALSE(thrower.result().passed);
    EXPECT_NE(thrower.result().detail.find("boom"), std::string::npos);
}
