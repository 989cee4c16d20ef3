#include "tfalt/model.hpp"

#include <algorithm>
#include <numeric>

namespace tfalt {

const char* to_string(EnsembleMode mode) noexcept {
  return mode == EnsembleMode::logit_wise ? "logit" : "feature";
}

EnsembleMode parse_ensemble_mode(const std::string& name) {
  if (name == "logit" || name == "logit_wise") return EnsembleMode::logit_wise;
  if (name == "feature" || name == "feature_wise") return EnsembleMode::feature_wise;
  fail(Errc::invalid_argument, "unknown ensemble mode '" + name + "' (expected logit or feature)");
}

AdapterParams init_adapter(Eigen::Index d, Rng& rng, double stddev) {
  AdapterParams p = AdapterParams::identity(d);
  for (Eigen::Index r = 0; r < d; ++r) {
    for (Eigen::Index c = 0; c < d; ++c) p.A(r, c) += stddev * rng.normal();
  }
  return p;
}

BranchOutputs branch_outputs(const AdapterParams& wrs, const AdapterParams& rus,
                             const PromptBank& bank, const Vector& f_prime,
                             const HeadConfig& head) {
  BranchOutputs out;
  out.feature_w = adapter_forward(wrs, f_prime);
  out.feature_r = adapter_forward(rus, f_prime);
  out.logits_w = cosine_logits(bank.anchors(), out.feature_w, head.tau);
  out.logits_r = cosine_logits(bank.anchors(), out.feature_r, head.tau);
  return out;
}

BranchBatch branch_outputs_batch(const AdapterParams& wrs, const AdapterParams& rus,
                           const PromptBank& bank, const Matrix& features,
                           const HeadConfig& head) {
  const auto n = features.rows();
  const auto d = features.cols();
  const auto C = bank.num_classes();
  BranchBatch out{Matrix(n, d), Matrix(n, d), Matrix(n, C), Matrix(n, C)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto b = branch_outputs(wrs, rus, bank, Vector(features.row(i).transpose()), head);
    out.feature_w.row(i) = b.feature_w.transpose();
    out.feature_r.row(i) = b.feature_r.transpose();
    out.logits_w.row(i) = b.logits_w.transpose();
    out.logits_r.row(i) = b.logits_r.transpose();
  }
  return out;
}

namespace {

Vector concat(const Vector& a, const Vector& b) {
  Vector x(a.size() + b.size());
  x << a, b;
  return x;
}

// Ensembler input for the active mode.
Vector ensemble_input(const EnsemblerParams& e, const Vector& feature_w, const Vector& feature_r,
                      const Vector& logits_w, const Vector& logits_r) {
  const bool logit = e.mode == EnsembleMode::logit_wise;
  const Vector& a = logit ? logits_w : feature_w;
  const Vector& b = logit ? logits_r : feature_r;
  if (a.size() != e.width() || b.size() != e.width()) {
    fail(Errc::shape, std::string("ensemble_logits (") + to_string(e.mode) + "): branch width " +
                          std::to_string(a.size()) + "/" + std::to_string(b.size()) +
                          " does not match ensembler width " + std::to_string(e.width()));
  }
  return concat(a, b);
}

// Gradient of cos(anchor_c, v) / tau summed against upstream dlogits, w.r.t. v.
// Anchors are unit rows.
Vector cosine_head_backward(const Matrix& anchors, const Vector& v, const Vector& logits,
                            const Vector& dlogits, double tau) {
  const double n = v.norm();
  const Vector u = v / n;
  const Vector dcos = dlogits / tau;
  const Vector cos = logits * tau;
  return (anchors.transpose() * dcos - dcos.dot(cos) * u) / n;
}

}  // namespace

Vector ensemble_logits(const EnsemblerParams& e, const Vector& feature_w, const Vector& feature_r,
                       const Vector& logits_w, const Vector& logits_r, const PromptBank& bank,
                       const HeadConfig& head) {
  e.validate(bank.num_classes(), bank.dim());
  const Vector x = ensemble_input(e, feature_w, feature_r, logits_w, logits_r);
  const Vector fused = e.K * x + e.bias;
  if (e.mode == EnsembleMode::logit_wise) return fused;
  return cosine_logits(bank.anchors(), fused, head.tau);
}

Vector focal_loss_grad(const Vector& logits, Label label, double gamma) {
  check_label(logits, label);
  const Vector p = stable_softmax(logits);
  const double log_pt = logits(label) - log_sum_exp(logits);
  const double pt = std::exp(log_pt);
  const double q = -std::expm1(log_pt);
  // dL/dz_j = coef * (delta_tj - p_j)
  double coef = -std::pow(q, gamma);
  if (gamma != 0.0 && q > 0.0) coef += gamma * std::pow(q, gamma - 1.0) * pt * log_pt;
  Vector g = -coef * p;
  g(label) += coef;
  return g;
}

// ---------------------------------------------------------------------------

namespace {

double stage1_accumulate(const AdapterParams& p, const PromptBank& bank, const Vector& f_prime,
                         Label label, const HeadConfig& head, AdapterGrad& acc) {
  const double gate = sigmoid(p.lambda);
  const double residual = sigmoid(-p.lambda);
  const Vector h = matvec(p.A, f_prime);
  const Vector f = adapter_forward(p, f_prime);
  const Vector logits = cosine_logits(bank.anchors(), f, head.tau);
  const double loss = ce_loss(logits, label);

  Vector dlogits = stable_softmax(logits);
  dlogits(label) -= 1.0;
  const Vector df = cosine_head_backward(bank.anchors(), f, logits, dlogits, head.tau);

  // f = f' + residual * (A f' - f'), d residual / d lambda = -gate * residual
  acc.dA.noalias() += residual * df * f_prime.transpose();
  acc.dlambda += -gate * residual * (h - f_prime).dot(df);
  return loss;
}

double stage2_accumulate(const EnsemblerParams& e, const BranchOutputs& b, const PromptBank& bank,
                         Label label, const HeadConfig& head, double gamma, EnsemblerGrad& acc) {
  const Vector x = ensemble_input(e, b.feature_w, b.feature_r, b.logits_w, b.logits_r);
  const Vector fused = e.K * x + e.bias;
  Vector dfused;
  double loss;
  if (e.mode == EnsembleMode::logit_wise) {
    loss = focal_loss(fused, label, gamma);
    dfused = focal_loss_grad(fused, label, gamma);
  } else {
    const Vector logits = cosine_logits(bank.anchors(), fused, head.tau);
    loss = focal_loss(logits, label, gamma);
    dfused = cosine_head_backward(bank.anchors(), fused, logits,
                                  focal_loss_grad(logits, label, gamma), head.tau);
  }
  acc.dK.noalias() += dfused * x.transpose();
  acc.dbias += dfused;
  return loss;
}

void check_rows(const Matrix& features, const std::vector<Label>& labels,
                std::span<const std::size_t> rows) {
  if (static_cast<Eigen::Index>(labels.size()) != features.rows()) {
    fail(Errc::shape, "batch: labels and feature rows differ in count");
  }
  if (rows.empty()) fail(Errc::invalid_argument, "batch: empty row selection");
  for (auto r : rows) {
    if (r >= labels.size()) fail(Errc::shape, "batch: row index " + std::to_string(r) + " out of range");
  }
}

}  // namespace

Stage1Result stage1_backward(const AdapterParams& p, const PromptBank& bank,
                             const Vector& f_prime, Label label, const HeadConfig& head) {
  Stage1Result out{0.0, AdapterGrad::zeros(p.dim())};
  out.loss = stage1_accumulate(p, bank, f_prime, label, head, out.grad);
  return out;
}

Stage1Result stage1_batch_backward(const AdapterParams& p, const PromptBank& bank,
                                   const Matrix& features, const std::vector<Label>& labels,
                                   std::span<const std::size_t> rows, const HeadConfig& head) {
  check_rows(features, labels, rows);
  Stage1Result out{0.0, AdapterGrad::zeros(p.dim())};
  Vector f_prime(features.cols());
  for (auto r : rows) {
    f_prime = features.row(static_cast<Eigen::Index>(r)).transpose();
    out.loss += stage1_accumulate(p, bank, f_prime, labels[r], head, out.grad);
  }
  const double scale = 1.0 / static_cast<double>(rows.size());
  out.loss *= scale;
  out.grad.dA *= scale;
  out.grad.dlambda *= scale;
  return out;
}

Stage2Result stage2_backward(const EnsemblerParams& e, const BranchOutputs& frozen,
                             const PromptBank& bank, Label label, const HeadConfig& head,
                             double gamma) {
  e.validate(bank.num_classes(), bank.dim());
  Stage2Result out{0.0, EnsemblerGrad::zeros_like(e)};
  out.loss = stage2_accumulate(e, frozen, bank, label, head, gamma, out.grad);
  return out;
}

Stage2Result stage2_batch_backward(const EnsemblerParams& e, const BranchBatch& frozen,
                                   const PromptBank& bank, const std::vector<Label>& labels,
                                   std::span<const std::size_t> rows, const HeadConfig& head,
                                   double gamma) {
  e.validate(bank.num_classes(), bank.dim());
  check_rows(frozen.feature_w, labels, rows);
  Stage2Result out{0.0, EnsemblerGrad::zeros_like(e)};
  for (auto r : rows) {
    const auto b = frozen.row(static_cast<Eigen::Index>(r));
    out.loss += stage2_accumulate(e, b, bank, labels[r], head, gamma, out.grad);
  }
  const double scale = 1.0 / static_cast<double>(rows.size());
  out.loss *= scale;
  out.grad.dK *= scale;
  out.grad.dbias *= scale;
  return out;
}

// ---------------------------------------------------------------------------

LinearProbe linear_probe_train(const EmbeddingSet& train, std::size_t num_classes,
                               const ProbeConfig& cfg) {
  if (num_classes < 2) fail(Errc::invalid_dataset, "linear probe needs at least 2 classes");
  if (!train.has_labels()) fail(Errc::invalid_dataset, "linear probe needs a labeled set");
  const auto counts = class_counts(train.labels, num_classes);
  const auto present = std::count_if(counts.begin(), counts.end(), [](auto n) { return n > 0; });
  if (present < 2) fail(Errc::invalid_dataset, "linear probe needs samples from at least 2 classes");
  if (cfg.batch_size < 1) fail(Errc::invalid_config, "linear probe: batch_size must be >= 1");

  const auto C = static_cast<Eigen::Index>(num_classes);
  const auto d = train.dim();
  Rng init_rng = Rng::stream(cfg.seed, "init");
  Rng shuffle_rng = Rng::stream(cfg.seed, "shuffle");
  LinearProbe probe{Matrix(C, d), Vector::Zero(C)};
  for (Eigen::Index r = 0; r < C; ++r) {
    for (Eigen::Index c = 0; c < d; ++c) probe.W(r, c) = 1e-3 * init_rng.normal();
  }

  SgdHyper hyper = cfg.sgd;
  hyper.total_steps = std::max<std::size_t>(cfg.epochs, 1);
  hyper.validate();
  SgdState state;
  std::vector<std::size_t> order(static_cast<std::size_t>(train.size()));
  std::iota(order.begin(), order.end(), 0);
  Matrix dW(C, d);
  Vector db(C);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cosine_lr(epoch, hyper);
    shuffle_rng.shuffle(std::span(order));
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const auto end = std::min(order.size(), start + cfg.batch_size);
      dW.setZero();
      db.setZero();
      for (auto k = start; k < end; ++k) {
        const auto i = static_cast<Eigen::Index>(order[k]);
        const Vector x = train.features.row(i).transpose();
        Vector g = stable_softmax(probe.logits(x));
        g(train.labels[order[k]]) -= 1.0;
        dW.noalias() += g * x.transpose();
        db += g;
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      dW *= scale;
      db *= scale;
      const std::span<double> params[] = {param_span(probe.W), param_span(probe.b)};
      const std::span<const double> grads[] = {grad_span(dW), grad_span(db)};
      sgd_step(params, grads, state, hyper, lr);
    }
  }
  if (!all_finite(probe.W) || !all_finite(probe.b)) {
    fail(Errc::divergence, "linear probe diverged");
  }
  return probe;
}

}  // namespace tfalt
