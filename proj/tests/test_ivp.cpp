#include <gtest/gtest.h>

#include <cmath>

#include "ridc/ivp.hpp"
#include "ridc/mol.hpp"

using namespace ridc;

namespace {

RhsFunction scale(double a) {
  return [a](double, std::span<const double> y) {
    StateVector out(y.begin(), y.end());
    for (auto& v : out) v *= a;
    return out;
  };
}

RhsFunction constant(StateVector c) {
  return [c](double, std::span<const double>) { return c; };
}

}  // namespace

TEST(EvalFullRhs, SplitsCancel) {
  SplitIvp ivp(0.0, 1.0, {1.0, 2.0}, scale(1.0), scale(-1.0));
  const auto f = eval_full_rhs(ivp, 0.3, StateVector{4.0, -5.0});
  EXPECT_EQ(f, (StateVector{0.0, 0.0}));
}

TEST(EvalFullRhs, ZeroOperatorPlusConstant) {
  SplitIvp ivp(0.0, 1.0, {0.0, 0.0}, scale(0.0), constant({1.0, 1.0}), DenseMatrix(2, 2));
  EXPECT_EQ(eval_full_rhs(ivp, 0.0, StateVector{7.0, 8.0}), (StateVector{1.0, 1.0}));
}

TEST(EvalFullRhs, ScalarExample) {
  RhsFunction forcing = [](double t, std::span<const double>) { return StateVector{std::sin(t)}; };
  SplitIvp ivp(0.0, 1.0, {3.0}, scale(-2.0), forcing);
  EXPECT_DOUBLE_EQ(eval_full_rhs(ivp, 0.0, StateVector{3.0})[0], -6.0);
}

TEST(EvalFullRhs, DimensionChecked) {
  SplitIvp ivp(0.0, 1.0, {1.0, 2.0}, scale(1.0), scale(1.0));
  EXPECT_THROW(eval_full_rhs(ivp, 0.0, StateVector{1.0}), ContractViolation);
}

TEST(EvalFullRhs, Deterministic) {
  const auto prob = build_burgers({});
  const auto a = eval_full_rhs(prob.ivp, 0.1, prob.ivp.initial_state());
  const auto b = eval_full_rhs(prob.ivp, 0.1, prob.ivp.initial_state());
  EXPECT_EQ(a, b);
}

TEST(SplitIvp, StiffFunctionMatchesOperator) {
  for (const MolProblem& prob : {build_advection_diffusion({}), build_burgers({})}) {
    ASSERT_TRUE(prob.ivp.has_linear_stiff());
    const auto& y = prob.ivp.initial_state();
    const auto lf = prob.ivp.eval_stiff(0.0, y);
    const auto ly = mat_vec(*prob.ivp.stiff_operator(), y);
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(lf[i], ly[i], 1e-9 * (1.0 + std::abs(ly[i])));
  }
}

TEST(SplitIvp, ConstructionContracts) {
  EXPECT_THROW(SplitIvp(1.0, 1.0, {1.0}, scale(1), scale(1)), ContractViolation);
  EXPECT_THROW(SplitIvp(0.0, 1.0, {}, scale(1), scale(1)), ContractViolation);
  EXPECT_THROW(SplitIvp(0.0, 1.0, {NAN}, scale(1), scale(1)), ContractViolation);
  EXPECT_THROW(SplitIvp(0.0, 1.0, {1.0}, RhsFunction{}, scale(1)), ContractViolation);
  EXPECT_THROW(SplitIvp(0.0, 1.0, {1.0, 2.0}, scale(1), scale(1), DenseMatrix(3, 3)), ContractViolation);
}

TEST(SplitIvp, WindowKeepsSplits) {
  SplitIvp ivp(0.0, 1.0, {1.0}, scale(-1.0), scale(0.5), DenseMatrix(1, 1, -1.0));
  const auto w = ivp.with_window(0.25, 0.5, {2.0});
  EXPECT_EQ(w.t_start(), 0.25);
  EXPECT_EQ(w.t_end(), 0.5);
  EXPECT_EQ(w.initial_state(), StateVector{2.0});
  EXPECT_EQ(w.stiff_operator(), ivp.stiff_operator());
  EXPECT_EQ(eval_full_rhs(w, 0.3, StateVector{2.0})[0], -1.0);
}
