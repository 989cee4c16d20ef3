#include <gtest/gtest.h>

#include "tfalt/optim.hpp"

using namespace tfalt;

namespace {

// One scalar parameter stepped through sgd_step.
struct Scalar1 {
  double w;
  SgdState state;

  void step(double g, const SgdHyper& h, double lr) {
    const std::span<double> params[] = {std::span<double>(&w, 1)};
    const std::span<const double> grads[] = {std::span<const double>(&g, 1)};
    sgd_step(params, grads, state, h, lr);
  }
};

}  // namespace

TEST(CosineLr, Endpoints) {
  SgdHyper h;
  h.lr0 = 0.1;
  h.eta_min = 0.0;
  h.total_steps = 200;
  EXPECT_EQ(cosine_lr(0, h), 0.1);
  EXPECT_EQ(cosine_lr(200, h), 0.0);
  EXPECT_NEAR(cosine_lr(100, h), 0.05, 1e-15);
  h.eta_min = 0.003;
  EXPECT_EQ(cosine_lr(200, h), 0.003);
}

TEST(CosineLr, ExhaustedScheduleThrows) {
  SgdHyper h;
  h.total_steps = 10;
  try {
    cosine_lr(11, h);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::schedule_exhausted);
  }
}

TEST(CosineLr, MonotoneNonIncreasing) {
  SgdHyper h;
  h.lr0 = 0.37;
  h.eta_min = 0.01;
  h.total_steps = 97;
  for (std::size_t t = 0; t < h.total_steps; ++t) EXPECT_GE(cosine_lr(t, h), cosine_lr(t + 1, h));
}

TEST(SgdStep, TwoStepMomentumTrace) {
  SgdHyper h;
  h.momentum = 0.9;
  h.weight_decay = 0.0;
  Scalar1 p{1.0, {}};
  p.step(1.0, h, 0.1);
  EXPECT_NEAR(p.w, 0.9, 1e-15);
  p.step(1.0, h, 0.1);
  EXPECT_NEAR(p.state.velocity[0](0), 1.9, 1e-15);
  EXPECT_NEAR(p.w, 0.71, 1e-15);
}

TEST(SgdStep, FixedPointAndPureDecay) {
  SgdHyper h;
  h.weight_decay = 0.0;
  Scalar1 p{1.0, {}};
  p.step(0.0, h, 0.1);
  EXPECT_EQ(p.w, 1.0);
  EXPECT_EQ(p.state.velocity[0](0), 0.0);

  h.weight_decay = 5e-4;
  h.momentum = 0.0;
  Scalar1 q{1.0, {}};
  q.step(0.0, h, 0.1);
  EXPECT_NEAR(q.w, 0.99995, 1e-15);
}

TEST(SgdStep, ReducesToGradientDescent) {
  SgdHyper h;
  h.momentum = 0.0;
  h.weight_decay = 0.0;
  Vector w(3), g(3);
  w << 1.5, -2.0, 0.25;
  g << 0.1, 0.7, -3.0;
  const Vector expected = w - 0.05 * g;
  SgdState state;
  const std::span<double> params[] = {param_span(w)};
  const std::span<const double> grads[] = {grad_span(g)};
  sgd_step(params, grads, state, h, 0.05);
  EXPECT_EQ(w, expected);
  EXPECT_EQ(state.step, 1u);
}

TEST(SgdStep, ShapeMismatchThrows) {
  SgdHyper h;
  Vector w(3), g(2);
  w.setZero();
  g.setZero();
  SgdState state;
  const std::span<double> params[] = {param_span(w)};
  const std::span<const double> grads[] = {grad_span(g)};
  EXPECT_THROW(sgd_step(params, grads, state, h, 0.1), Error);
}

TEST(SgdHyper, Validation) {
  SgdHyper h;
  h.momentum = 1.0;
  EXPECT_THROW(h.validate(), Error);
  h = {};
  h.eta_min = 1.0;
  EXPECT_THROW(h.validate(), Error);
  h = {};
  h.lr0 = 0.0;
  EXPECT_THROW(h.validate(), Error);
}
