#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tfalt/dataio.hpp"
#include "tfalt/numerics.hpp"
#include "tfalt/optim.hpp"
#include "tfalt/random.hpp"

namespace tfalt {

/// Softmax temperature shared by every cosine head.
struct HeadConfig {
  double tau = 0.01;

  void validate() const {
    if (!(tau > 0.0 && tau <= 10.0)) {
      fail(Errc::invalid_config, "tau must lie in (0, 10], got " + std::to_string(tau));
    }
  }
};

// ---------------------------------------------------------------------------
// Residual adapter: f_v = sigmoid(lambda) f' + (1 - sigmoid(lambda)) A f'
// ---------------------------------------------------------------------------

template <typename Scalar>
struct AdapterParamsT {
  MatrixX<Scalar> A;
  Scalar lambda = Scalar(0);

  Eigen::Index dim() const { return A.rows(); }

  static AdapterParamsT identity(Eigen::Index d) {
    return {MatrixX<Scalar>::Identity(d, d), Scalar(0)};
  }
};

using AdapterParams = AdapterParamsT<double>;

/// A = I + N(0, stddev^2) noise, lambda = 0.
AdapterParams init_adapter(Eigen::Index d, Rng& rng, double stddev = 1e-4);

/// Written as f' + (1 - s)(A f' - f') so that A = I returns f' bit-for-bit.
template <typename Scalar, typename Derived>
VectorX<Scalar> adapter_forward(const AdapterParamsT<Scalar>& p,
                                const Eigen::MatrixBase<Derived>& f_prime) {
  if (p.A.rows() != p.A.cols() || p.A.cols() != f_prime.size()) {
    fail(Errc::shape, "adapter_forward: adapter is " + std::to_string(p.A.rows()) + "x" +
                          std::to_string(p.A.cols()) + ", feature has dim " +
                          std::to_string(f_prime.size()));
  }
  const Scalar residual = sigmoid(-p.lambda);  // 1 - sigmoid(lambda)
  const VectorX<Scalar> h = p.A * f_prime;
  return f_prime + residual * (h - f_prime);
}

/// logit_c = cos(anchor_c, v) / tau
template <typename Scalar, typename Derived>
VectorX<Scalar> cosine_logits(const MatrixX<Scalar>& anchors, const Eigen::MatrixBase<Derived>& v,
                              Scalar tau) {
  if (anchors.cols() != v.size()) {
    fail(Errc::shape, "cosine_logits: anchors have dim " + std::to_string(anchors.cols()) +
                          ", vector has dim " + std::to_string(v.size()));
  }
  VectorX<Scalar> out(anchors.rows());
  for (Eigen::Index c = 0; c < anchors.rows(); ++c) {
    out(c) = cosine_sim(anchors.row(c).transpose(), v) / tau;
  }
  return out;
}

template <typename Derived>
Vector branch_logits(const AdapterParams& p, const PromptBank& bank,
                     const Eigen::MatrixBase<Derived>& f_prime, const HeadConfig& head) {
  return cosine_logits(bank.anchors(), adapter_forward(p, f_prime), head.tau);
}

template <typename Derived>
Vector zero_shot_logits(const PromptBank& bank, const Eigen::MatrixBase<Derived>& f_prime,
                        const HeadConfig& head) {
  return cosine_logits(bank.anchors(), f_prime, head.tau);
}

// ---------------------------------------------------------------------------
// Ensembler
// ---------------------------------------------------------------------------

enum class EnsembleMode { logit_wise, feature_wise };

const char* to_string(EnsembleMode mode) noexcept;
EnsembleMode parse_ensemble_mode(const std::string& name);

/// Logit-wise: K is C x 2C, bias C. Feature-wise: K is d x 2d, bias d.
template <typename Scalar>
struct EnsemblerParamsT {
  EnsembleMode mode = EnsembleMode::logit_wise;
  MatrixX<Scalar> K;
  VectorX<Scalar> bias;

  /// Width of one branch input (C or d).
  Eigen::Index width() const { return K.rows(); }

  /// K = [I/2  I/2], bias = 0.
  static EnsemblerParamsT averaging(EnsembleMode mode, Eigen::Index width) {
    EnsemblerParamsT e;
    e.mode = mode;
    e.K.setZero(width, 2 * width);
    e.K.leftCols(width).diagonal().setConstant(Scalar(0.5));
    e.K.rightCols(width).diagonal().setConstant(Scalar(0.5));
    e.bias.setZero(width);
    return e;
  }

  void validate(Eigen::Index num_classes, Eigen::Index dim) const {
    const Eigen::Index w = mode == EnsembleMode::logit_wise ? num_classes : dim;
    if (K.rows() != w || K.cols() != 2 * w || bias.size() != w) {
      fail(Errc::shape, std::string("ensembler (") + to_string(mode) + ") expects K " +
                            std::to_string(w) + "x" + std::to_string(2 * w) + " and bias " +
                            std::to_string(w) + ", got K " + std::to_string(K.rows()) + "x" +
                            std::to_string(K.cols()) + " and bias " + std::to_string(bias.size()));
    }
  }
};

using EnsemblerParams = EnsemblerParamsT<double>;

/// Frozen outputs of the WRS (w) and RUS (r) branches for one sample.
struct BranchOutputs {
  Vector feature_w;
  Vector feature_r;
  Vector logits_w;
  Vector logits_r;
};

/// Rows hold per-sample branch outputs.
struct BranchBatch {
  Matrix feature_w;
  Matrix feature_r;
  Matrix logits_w;
  Matrix logits_r;

  Eigen::Index size() const { return feature_w.rows(); }
  BranchOutputs row(Eigen::Index i) const {
    return {feature_w.row(i).transpose(), feature_r.row(i).transpose(),
            logits_w.row(i).transpose(), logits_r.row(i).transpose()};
  }
};

BranchOutputs branch_outputs(const AdapterParams& wrs, const AdapterParams& rus,
                             const PromptBank& bank, const Vector& f_prime,
                             const HeadConfig& head);
BranchBatch branch_outputs_batch(const AdapterParams& wrs, const AdapterParams& rus,
                           const PromptBank& bank, const Matrix& features,
                           const HeadConfig& head);

Vector ensemble_logits(const EnsemblerParams& e, const Vector& feature_w, const Vector& feature_r,
                       const Vector& logits_w, const Vector& logits_r, const PromptBank& bank,
                       const HeadConfig& head);

inline Vector ensemble_logits(const EnsemblerParams& e, const BranchOutputs& b,
                              const PromptBank& bank, const HeadConfig& head) {
  return ensemble_logits(e, b.feature_w, b.feature_r, b.logits_w, b.logits_r, bank, head);
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

template <typename Derived>
void check_label(const Eigen::MatrixBase<Derived>& logits, Label label) {
  if (static_cast<Eigen::Index>(label) >= logits.size()) {
    fail(Errc::invalid_argument, "label " + std::to_string(label) + " out of range for " +
                                     std::to_string(logits.size()) + " classes");
  }
}

/// -log softmax(logits)[label]
template <typename Derived>
typename Derived::Scalar ce_loss(const Eigen::MatrixBase<Derived>& logits, Label label) {
  check_label(logits, label);
  return log_sum_exp(logits) - logits(label);
}

/// -(1 - p_t)^gamma log p_t; gamma = 0 is cross-entropy.
template <typename Derived>
typename Derived::Scalar focal_loss(const Eigen::MatrixBase<Derived>& logits, Label label,
                                    typename Derived::Scalar gamma) {
  using Scalar = typename Derived::Scalar;
  check_label(logits, label);
  const Scalar log_pt = logits(label) - log_sum_exp(logits);
  const Scalar one_minus_pt = -std::expm1(log_pt);
  return -std::pow(one_minus_pt, gamma) * log_pt;
}

/// d focal_loss / d logits.
Vector focal_loss_grad(const Vector& logits, Label label, double gamma);

// ---------------------------------------------------------------------------
// Backward passes. Each stage has its own gradient type; the stage-2 type has
// no adapter members, so the frozen adapters cannot receive updates.
// ---------------------------------------------------------------------------

struct AdapterGrad {
  Matrix dA;
  double dlambda = 0.0;

  static AdapterGrad zeros(Eigen::Index d) { return {Matrix::Zero(d, d), 0.0}; }
};

struct EnsemblerGrad {
  Matrix dK;
  Vector dbias;

  static EnsemblerGrad zeros_like(const EnsemblerParams& e) {
    return {Matrix::Zero(e.K.rows(), e.K.cols()), Vector::Zero(e.bias.size())};
  }
};

struct Stage1Result {
  double loss = 0.0;
  AdapterGrad grad;
};

struct Stage2Result {
  double loss = 0.0;
  EnsemblerGrad grad;
};

/// CE over the cosine head, differentiated w.r.t. (A, lambda).
Stage1Result stage1_backward(const AdapterParams& p, const PromptBank& bank,
                             const Vector& f_prime, Label label, const HeadConfig& head);

/// Mean loss and mean gradient over `rows` of `features`.
Stage1Result stage1_batch_backward(const AdapterParams& p, const PromptBank& bank,
                                   const Matrix& features, const std::vector<Label>& labels,
                                   std::span<const std::size_t> rows, const HeadConfig& head);

/// Focal loss over the ensembled logits, differentiated w.r.t. (K, bias).
Stage2Result stage2_backward(const EnsemblerParams& e, const BranchOutputs& frozen,
                             const PromptBank& bank, Label label, const HeadConfig& head,
                             double gamma);

Stage2Result stage2_batch_backward(const EnsemblerParams& e, const BranchBatch& frozen,
                                   const PromptBank& bank, const std::vector<Label>& labels,
                                   std::span<const std::size_t> rows, const HeadConfig& head,
                                   double gamma);

// ---------------------------------------------------------------------------
// Linear-probe baseline: softmax regression on raw embeddings.
// ---------------------------------------------------------------------------

struct LinearProbe {
  Matrix W;  // C x d
  Vector b;  // C

  Vector logits(const Vector& x) const { return W * x + b; }
};

struct ProbeConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 128;
  SgdHyper sgd;
  std::uint64_t seed = 0;
};

LinearProbe linear_probe_train(const EmbeddingSet& train, std::size_t num_classes,
                               const ProbeConfig& cfg);

}  // namespace tfalt
