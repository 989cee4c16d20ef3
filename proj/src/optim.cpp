#include "tfalt/optim.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace tfalt {

void SgdHyper::validate() const {
  if (!(lr0 > 0.0)) fail(Errc::invalid_config, "sgd: lr0 must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) fail(Errc::invalid_config, "sgd: momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) fail(Errc::invalid_config, "sgd: weight_decay must be >= 0");
  if (!(eta_min >= 0.0 && eta_min <= lr0)) fail(Errc::invalid_config, "sgd: eta_min must lie in [0, lr0]");
  if (total_steps < 1) fail(Errc::invalid_config, "sgd: total_steps must be >= 1");
}

double cosine_lr(std::size_t step, const SgdHyper& h) {
  if (step > h.total_steps) {
    fail(Errc::schedule_exhausted, "cosine_lr: step " + std::to_string(step) + " > total " +
                                       std::to_string(h.total_steps));
  }
  if (step == h.total_steps) return h.eta_min;
  const double t = static_cast<double>(step) / static_cast<double>(h.total_steps);
  return h.eta_min + 0.5 * (h.lr0 - h.eta_min) * (1.0 + std::cos(std::numbers::pi * t));
}

void sgd_step(std::span<const std::span<double>> params,
              std::span<const std::span<const double>> grads, SgdState& state,
              const SgdHyper& h, double lr) {
  if (params.size() != grads.size()) {
    fail(Errc::shape, "sgd_step: " + std::to_string(params.size()) + " parameters but " +
                          std::to_string(grads.size()) + " gradients");
  }
  if (state.velocity.empty()) {
    for (const auto& p : params) state.velocity.push_back(Vector::Zero(static_cast<Eigen::Index>(p.size())));
  }
  if (state.velocity.size() != params.size()) fail(Errc::shape, "sgd_step: optimizer state has wrong arity");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& v = state.velocity[i];
    if (params[i].size() != grads[i].size() || static_cast<Eigen::Index>(params[i].size()) != v.size()) {
      fail(Errc::shape, "sgd_step: tensor " + std::to_string(i) + " shape mismatch");
    }
    Eigen::Map<Vector> w(params[i].data(), v.size());
    const Eigen::Map<const Vector> g(grads[i].data(), v.size());
    v = h.momentum * v + (g + h.weight_decay * w);
    w -= lr * v;
  }
  ++state.step;
}

}  // namespace tfalt
