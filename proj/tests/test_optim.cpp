#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "retroroute/errors.hpp"
#include "retroroute/optim.hpp"

using namespace retroroute;
using nn::Tensor;

TEST(Adam, FirstStepMovesByLearningRate) {
  // With bias correction the first update is lr·g/(|g| + eps·…) ≈ lr·sign(g).
  std::vector<float> p{1.0f, -2.0f, 0.5f};
  const std::vector<float> g{0.3f, -4.0f, 1e-3f};
  std::vector<double> m(3), v(3);
  nn::adam_update(p, g, m, v, 1, 0.01, {});
  EXPECT_NEAR(p[0], 1.0 - 0.01, 1e-6);
  EXPECT_NEAR(p[1], -2.0 + 0.01, 1e-6);
  EXPECT_NEAR(p[2], 0.5 - 0.01 * 1e-3 / (1e-3 + 1e-8), 1e-6);
}

TEST(Adam, MatchesClosedFormOverSeveralSteps) {
  const nn::AdamHyper h;
  std::vector<float> p{0.7f};
  std::vector<double> m(1), v(1);
  double ref = 0.7, rm = 0.0, rv = 0.0;
  for (int t = 1; t <= 20; ++t) {
    const double g = std::sin(static_cast<double>(t));
    const std::vector<float> gf{static_cast<float>(g)};
    nn::adam_update(p, gf, m, v, static_cast<std::uint64_t>(t), 1e-2, h);
    const double gd = gf[0];
    rm = 0.9 * rm + 0.1 * gd;
    rv = 0.999 * rv + 0.001 * gd * gd;
    const double mh = rm / (1.0 - std::pow(0.9, t));
    const double vh = rv / (1.0 - std::pow(0.999, t));
    ref = static_cast<float>(ref - 1e-2 * mh / (std::sqrt(vh) + 1e-8));
    EXPECT_FLOAT_EQ(p[0], static_cast<float>(ref)) << t;
  }
}

TEST(Adam, StepUsesZeroGradientForUntouchedParameters) {
  std::vector<Tensor> params{Tensor::from_data({2}, {1.0f, 1.0f}, true)};
  auto state = nn::AdamState::for_params(params);
  nn::adam_step(params, state, 0.1);
  EXPECT_EQ(state.t, 1u);
  EXPECT_FLOAT_EQ(params[0].data()[0], 1.0f);
  EXPECT_THROW(nn::adam_step(params, state, -1.0), InputError);
}

TEST(Clip, ScalesToMaxNorm) {
  std::vector<Tensor> params{Tensor::zeros({2}, true), Tensor::zeros({1}, true)};
  params[0].grad()[0] = 3.0f;
  params[0].grad()[1] = 0.0f;
  params[1].grad()[0] = 4.0f;
  EXPECT_DOUBLE_EQ(nn::global_grad_norm(params), 5.0);
  EXPECT_DOUBLE_EQ(nn::clip_global_norm(params, 1.0), 5.0);
  EXPECT_NEAR(nn::global_grad_norm(params), 1.0, 1e-6);
  EXPECT_NEAR(params[1].grad()[0], 0.8, 1e-6);
  // Below the threshold nothing changes.
  EXPECT_NEAR(nn::clip_global_norm(params, 2.0), 1.0, 1e-6);
  EXPECT_NEAR(params[1].grad()[0], 0.8, 1e-6);
}

TEST(Schedule, WarmupThenCosine) {
  const nn::LrSchedule s{3e-4, 3e-5, 1000, 0.1};
  EXPECT_EQ(s.warmup_steps(), 100u);
  EXPECT_DOUBLE_EQ(nn::lr_at(0, s), 0.0);
  EXPECT_NEAR(nn::lr_at(50, s), 1.5e-4, 1e-15);
  EXPECT_NEAR(nn::lr_at(100, s), 3e-4, 1e-15);
  EXPECT_NEAR(nn::lr_at(550, s), 3e-5 + 2.7e-4 * 0.5, 1e-15);
  EXPECT_NEAR(nn::lr_at(1000, s), 3e-5, 1e-15);
  double prev = nn::lr_at(100, s);
  for (int t = 101; t <= 1000; ++t) {
    const double lr = nn::lr_at(t, s);
    EXPECT_LE(lr, prev);
    prev = lr;
  }
  EXPECT_THROW(nn::lr_at(-1, s), StepOutOfRange);
  EXPECT_THROW(nn::lr_at(1001, s), StepOutOfRange);
}

TEST(Schedule, RejectsInconsistentParameters) {
  EXPECT_THROW(nn::lr_at(0, nn::LrSchedule{1e-4, 1e-3, 10, 0.1}), InputError);
  EXPECT_THROW(nn::lr_at(0, nn::LrSchedule{1e-4, 1e-5, 0, 0.1}), InputError);
  EXPECT_THROW(nn::lr_at(0, nn::LrSchedule{1e-4, 1e-5, 10, 1.0}), InputError);
}
