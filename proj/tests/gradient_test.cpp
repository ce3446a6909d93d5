#include <gtest/gtest.h>

#include "support/gradient_cases.hpp"

namespace antq::testing {
namespace {

class Gradient : public ::testing::TestWithParam<GradientCase> {};

TEST_P(Gradient, MatchesCentralDifferences) {
  const auto& c = GetParam();
  const auto report = run_gradient_case(c);
  EXPECT_GT(report.checked, 0u);
  EXPECT_LT(report.max_rel_error, c.tolerance) << c.name;
}

INSTANTIATE_TEST_SUITE_P(Ops, Gradient, ::testing::ValuesIn(gradient_cases()),
                         [](const ::testing::TestParamInfo<GradientCase>& info) { return info.param.name; });

}  // namespace
}  // namespace antq::testing
