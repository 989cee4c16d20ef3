#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"
#include "tfalt/gradcheck.hpp"
#include "tfalt/model.hpp"

using namespace tfalt;
using tfalt::testing::expect_errc;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

Matrix gaussian(Rng& rng, Eigen::Index r, Eigen::Index c, double s = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = s * rng.normal();
  return m;
}

PromptBank bank_from(const Matrix& anchors) {
  std::vector<std::string> names(static_cast<std::size_t>(anchors.rows()), "x");
  return PromptBank(anchors, names, names);
}

PromptBank orthonormal_bank(Eigen::Index C, Eigen::Index d) {
  return bank_from(Matrix::Identity(C, d));
}

// Test-local central-difference oracle, independent of the library's checker.
template <typename F>
double central_diff(double& x, F&& f, double h = 1e-5) {
  const double saved = x;
  x = saved + h;
  const double up = f();
  x = saved - h;
  const double down = f();
  x = saved;
  return (up - down) / (2 * h);
}

double rel(double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-8}); }

}  // namespace

TEST(AdapterForward, Examples) {
  AdapterParams p = AdapterParams::identity(2);
  for (double lambda : {-3.0, 0.0, 2.5}) {
    p.lambda = lambda;
    EXPECT_EQ(adapter_forward(p, vec({2, 3})), vec({2, 3}));
  }
  Rng rng(1);
  AdapterParams q{gaussian(rng, 3, 3), 50.0};
  const Vector f = vec({1, -2, 0.5});
  EXPECT_LT((adapter_forward(q, f) - f).cwiseAbs().maxCoeff(), 1e-12);

  AdapterParams z{Matrix::Zero(2, 2), 0.0};
  EXPECT_EQ(adapter_forward(z, vec({2, 4})), vec({1, 2}));
  expect_errc(Errc::shape, [&] { adapter_forward(z, vec({1, 2, 3})); });
}

TEST(AdapterForward, GateIsConvex) {
  Rng rng(2);
  for (int t = 0; t < 200; ++t) {
    AdapterParams p{gaussian(rng, 5, 5), 3.0 * rng.normal()};
    const Vector f = gaussian(rng, 5, 1);
    const Vector h = p.A * f;
    const double s = sigmoid(p.lambda);
    const Vector expect = s * f + (1 - s) * h;
    EXPECT_LT((adapter_forward(p, f) - expect).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(AdapterForward, TemplatedOnScalar) {
  AdapterParamsT<float> p{MatrixX<float>::Zero(2, 2), 0.0f};
  VectorX<float> f(2);
  f << 2.0f, 4.0f;
  const VectorX<float> out = adapter_forward(p, f);
  EXPECT_FLOAT_EQ(out(0), 1.0f);
  EXPECT_FLOAT_EQ(out(1), 2.0f);
}

TEST(BranchLogits, Examples) {
  const auto bank = orthonormal_bank(4, 6);
  const Vector f = bank.anchors().row(0).transpose();
  const AdapterParams p = AdapterParams::identity(6);
  EXPECT_EQ(branch_logits(p, bank, f, {1.0}), vec({1, 0, 0, 0}));
  const Vector sharp = branch_logits(p, bank, f, {0.01});
  EXPECT_NEAR(sharp(0), 100.0, 1e-12);
  EXPECT_EQ(sharp.tail(3), Vector::Zero(3));

  const auto two = orthonormal_bank(2, 2);
  const Vector l = branch_logits(AdapterParams::identity(2), two, vec({1, 1}), {1.0});
  EXPECT_NEAR(l(0), 0.70710678, 1e-8);
  EXPECT_NEAR(l(1), 0.70710678, 1e-8);

  AdapterParams collapse{Matrix::Zero(2, 2), -80.0};
  expect_errc(Errc::degenerate_vector, [&] { branch_logits(collapse, two, vec({1, 1}), {1.0}); });
}

TEST(BranchLogits, ArgmaxInvariantToTau) {
  Rng rng(6);
  const auto bank = bank_from(gaussian(rng, 5, 8));
  for (int t = 0; t < 200; ++t) {
    AdapterParams p{Matrix::Identity(8, 8) + gaussian(rng, 8, 8, 0.5), rng.normal()};
    const Vector f = gaussian(rng, 8, 1);
    const auto ref = argmax(branch_logits(p, bank, f, {1.0}));
    for (double tau : {0.01, 0.07, 3.0, 10.0}) EXPECT_EQ(argmax(branch_logits(p, bank, f, {tau})), ref);
  }
}

TEST(ZeroShot, EqualsIdentityAdapterExactly) {
  Rng rng(7);
  const auto bank = bank_from(gaussian(rng, 6, 9));
  const HeadConfig head{0.01};
  for (int t = 0; t < 500; ++t) {
    AdapterParams p = AdapterParams::identity(9);
    p.lambda = 4.0 * rng.normal();
    const Vector f = gaussian(rng, 9, 1);
    EXPECT_EQ(zero_shot_logits(bank, f, head), branch_logits(p, bank, f, head));
  }
}

TEST(ZeroShot, OrthogonalAndAntipodal) {
  const auto bank = orthonormal_bank(3, 5);
  Vector ortho = Vector::Zero(5);
  ortho(4) = 2.0;
  EXPECT_EQ(zero_shot_logits(bank, ortho, {1.0}), Vector::Zero(3));
  const Vector anti = -bank.anchors().row(0).transpose();
  EXPECT_EQ(zero_shot_logits(bank, anti, {1.0})(0), -1.0);
}

TEST(EnsembleLogits, Examples) {
  const auto bank = orthonormal_bank(4, 6);
  const HeadConfig head{1.0};
  const Vector l = vec({0.3, -1, 2, 0.5});
  const Vector l2 = vec({9, 9, 9, 9});
  const Vector f = bank.anchors().row(0).transpose();
  const Vector g = Vector::Ones(6);

  const auto avg = EnsemblerParams::averaging(EnsembleMode::logit_wise, 4);
  EXPECT_EQ(ensemble_logits(avg, g, g, l, l, bank, head), l);

  auto proj = avg;
  proj.K.setZero();
  proj.K.leftCols(4).setIdentity();
  EXPECT_EQ(ensemble_logits(proj, g, g, l, l2, bank, head), l);

  auto feat = EnsemblerParams::averaging(EnsembleMode::feature_wise, 6);
  feat.K.setZero();
  feat.K.leftCols(6).setIdentity();
  EXPECT_EQ(ensemble_logits(feat, f, g, l, l2, bank, head), vec({1, 0, 0, 0}));

  expect_errc(Errc::shape, [&] { ensemble_logits(avg, g, g, vec({1, 2}), vec({1, 2}), bank, head); });
  Vector zero = Vector::Zero(6);
  expect_errc(Errc::degenerate_vector, [&] {
    ensemble_logits(EnsemblerParams::averaging(EnsembleMode::feature_wise, 6), zero, zero, l, l, bank, head);
  });
}

TEST(Losses, CrossEntropyExamples) {
  EXPECT_LT(ce_loss(vec({100, 0, 0}), 0), 1e-40);
  EXPECT_NEAR(ce_loss(vec({0, 0, 0, 0}), 2), std::log(4.0), 1e-15);
  // p[label] = 0.25 exactly: logits ln(1), ln(3) -> probs 1/4, 3/4.
  EXPECT_NEAR(ce_loss(vec({0, std::log(3.0)}), 0), 1.386294, 1e-6);
  EXPECT_THROW(ce_loss(vec({0, 0}), 2), Error);
}

TEST(Losses, FocalExamples) {
  EXPECT_EQ(focal_loss(vec({800, 0}), 0, 2.0), 0.0);
  EXPECT_NEAR(focal_loss(vec({0, 0}), 1, 2.0), 0.25 * std::log(2.0), 1e-15);
  EXPECT_THROW(focal_loss(vec({0, 0}), 5, 2.0), Error);
  Rng rng(11);
  for (int t = 0; t < 1000; ++t) {
    const Vector z = gaussian(rng, 6, 1, 5.0);
    const auto y = static_cast<Label>(rng.below(6));
    EXPECT_NEAR(focal_loss(z, y, 0.0), ce_loss(z, y), 1e-12);
    EXPECT_LE(focal_loss(z, y, 2.0), ce_loss(z, y) + 1e-15);
  }
}

TEST(Losses, FocalGradientMatchesFiniteDifferences) {
  Rng rng(12);
  for (double gamma : {0.0, 0.5, 1.0, 2.0, 3.5}) {
    for (int t = 0; t < 20; ++t) {
      Vector z = gaussian(rng, 5, 1, 2.0);
      const auto y = static_cast<Label>(rng.below(5));
      const Vector g = focal_loss_grad(z, y, gamma);
      for (Eigen::Index j = 0; j < z.size(); ++j) {
        const double n = central_diff(z(j), [&] { return focal_loss(z, y, gamma); });
        EXPECT_LT(rel(g(j), n), 1e-6) << "gamma " << gamma;
      }
    }
  }
}

TEST(Stage1Backward, MatchesFiniteDifferences) {
  Rng rng(21);
  const HeadConfig head{0.5};
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Eigen::Index d = 6, C = 4;
    const auto bank = bank_from(gaussian(rng, C, d));
    AdapterParams p{Matrix::Identity(d, d) + gaussian(rng, d, d, 0.3), rng.normal()};
    const Vector f = gaussian(rng, d, 1);
    const auto y = static_cast<Label>(rng.below(C));
    const auto res = stage1_backward(p, bank, f, y, head);
    auto loss = [&] { return ce_loss(branch_logits(p, bank, f, head), y); };
    EXPECT_EQ(res.loss, loss());
    for (Eigen::Index i = 0; i < p.A.size(); ++i) {
      worst = std::max(worst, rel(res.grad.dA.data()[i], central_diff(p.A.data()[i], loss)));
    }
    worst = std::max(worst, rel(res.grad.dlambda, central_diff(p.lambda, loss)));
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(Stage1Backward, StationaryAndSaturated) {
  const auto bank = orthonormal_bank(4, 6);
  const HeadConfig head{0.01};
  const AdapterParams p = AdapterParams::identity(6);
  const Vector f = bank.anchors().row(2).transpose();
  const auto res = stage1_backward(p, bank, f, 2, head);
  EXPECT_LT(res.grad.dA.norm(), 1e-6);
  EXPECT_LT(std::abs(res.grad.dlambda), 1e-6);

  Rng rng(3);
  AdapterParams sat{gaussian(rng, 6, 6), 50.0};
  const auto s = stage1_backward(sat, bank, gaussian(rng, 6, 1), 1, {1.0});
  EXPECT_LT(std::abs(s.grad.dlambda), 1e-10);
}

TEST(Stage1Backward, BatchIsMeanOfSamples) {
  Rng rng(31);
  const auto bank = bank_from(gaussian(rng, 3, 5));
  const AdapterParams p{Matrix::Identity(5, 5) + gaussian(rng, 5, 5, 0.2), 0.3};
  const Matrix X = gaussian(rng, 7, 5);
  const std::vector<Label> y{0, 1, 2, 0, 1, 2, 2};
  const std::vector<std::size_t> rows{6, 1, 3};
  const HeadConfig head{0.2};
  const auto batch = stage1_batch_backward(p, bank, X, y, rows, head);
  AdapterGrad sum = AdapterGrad::zeros(5);
  double loss = 0;
  for (auto r : rows) {
    const auto s = stage1_backward(p, bank, X.row(static_cast<Eigen::Index>(r)).transpose(), y[r], head);
    sum.dA += s.grad.dA;
    sum.dlambda += s.grad.dlambda;
    loss += s.loss;
  }
  EXPECT_NEAR(batch.loss, loss / 3, 1e-12);
  EXPECT_LT((batch.grad.dA - sum.dA / 3).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(batch.grad.dlambda, sum.dlambda / 3, 1e-12);
}

TEST(Stage2Backward, MatchesFiniteDifferencesBothModes) {
  Rng rng(41);
  const HeadConfig head{0.5};
  for (auto mode : {EnsembleMode::logit_wise, EnsembleMode::feature_wise}) {
    double worst = 0.0;
    for (int t = 0; t < 10; ++t) {
      const Eigen::Index d = 6, C = 4;
      const auto bank = bank_from(gaussian(rng, C, d));
      const AdapterParams w{Matrix::Identity(d, d) + gaussian(rng, d, d, 0.3), rng.normal()};
      const AdapterParams r{Matrix::Identity(d, d) + gaussian(rng, d, d, 0.3), rng.normal()};
      const auto frozen = branch_outputs(w, r, bank, Vector(gaussian(rng, d, 1)), head);
      const Eigen::Index width = mode == EnsembleMode::logit_wise ? C : d;
      auto e = EnsemblerParams::averaging(mode, width);
      e.K += gaussian(rng, width, 2 * width, 0.1);
      e.bias = gaussian(rng, width, 1, 0.1);
      const auto y = static_cast<Label>(rng.below(C));
      const auto res = stage2_backward(e, frozen, bank, y, head, 2.0);
      auto loss = [&] { return focal_loss(ensemble_logits(e, frozen, bank, head), y, 2.0); };
      for (Eigen::Index i = 0; i < e.K.size(); ++i) {
        worst = std::max(worst, rel(res.grad.dK.data()[i], central_diff(e.K.data()[i], loss)));
      }
      for (Eigen::Index i = 0; i < e.bias.size(); ++i) {
        worst = std::max(worst, rel(res.grad.dbias(i), central_diff(e.bias(i), loss)));
      }
    }
    EXPECT_LT(worst, 1e-5) << to_string(mode);
  }
}

TEST(Stage2Backward, GammaZeroMatchesCrossEntropyGradient) {
  Rng rng(43);
  const auto bank = bank_from(gaussian(rng, 4, 6));
  const HeadConfig head{0.3};
  const auto frozen = branch_outputs(AdapterParams::identity(6), AdapterParams::identity(6), bank,
                                     Vector(gaussian(rng, 6, 1)), head);
  auto e = EnsemblerParams::averaging(EnsembleMode::logit_wise, 4);
  e.K += gaussian(rng, 4, 8, 0.2);
  const auto focal = stage2_backward(e, frozen, bank, 1, head, 0.0);
  // Cross-entropy gradient in logit mode: (softmax(z) - onehot) x^T.
  Vector x(8);
  x << frozen.logits_w, frozen.logits_r;
  Vector dz = stable_softmax(Vector(e.K * x + e.bias));
  dz(1) -= 1.0;
  EXPECT_LT((focal.grad.dK - dz * x.transpose()).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((focal.grad.dbias - dz).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Gradcheck, LibrarySuitePasses) {
  const auto res = run_gradcheck({});
  EXPECT_TRUE(res.pass) << res.max_rel_err;
  EXPECT_GT(res.entries_checked, 1000u);
}

TEST(LinearProbe, SeparableToySetReachesFullAccuracy) {
  Rng rng(51);
  EmbeddingSet set;
  set.features.resize(60, 3);
  for (Eigen::Index i = 0; i < 60; ++i) {
    const Label y = i < 30 ? 0 : 1;
    set.features.row(i) << (y == 0 ? 1.0 : -1.0) + 0.2 * rng.normal(), rng.normal(), rng.normal();
    set.labels.push_back(y);
  }
  ProbeConfig cfg;
  cfg.epochs = 50;
  cfg.batch_size = 16;
  cfg.seed = 4;
  const auto probe = linear_probe_train(set, 2, cfg);
  for (Eigen::Index i = 0; i < 60; ++i) {
    EXPECT_EQ(argmax(probe.logits(set.features.row(i).transpose())), set.labels[static_cast<std::size_t>(i)]);
  }
  const auto again = linear_probe_train(set, 2, cfg);
  EXPECT_EQ(again.W, probe.W);
  EXPECT_EQ(again.b, probe.b);
}

TEST(LinearProbe, SingleClassIsInvalid) {
  EmbeddingSet set{Matrix::Ones(4, 3), {0, 0, 0, 0}};
  expect_errc(Errc::invalid_dataset, [&] { linear_probe_train(set, 1, {}); });
  expect_errc(Errc::invalid_dataset, [&] { linear_probe_train(set, 2, {}); });
}

TEST(HeadConfig, TauRange) {
  EXPECT_THROW((HeadConfig{0.0}).validate(), Error);
  EXPECT_THROW((HeadConfig{10.5}).validate(), Error);
  EXPECT_NO_THROW((HeadConfig{10.0}).validate());
}
