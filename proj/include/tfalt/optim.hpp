#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tfalt/numerics.hpp"

namespace tfalt {

struct SgdHyper {
  double lr0 = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double eta_min = 0.0;
  std::size_t total_steps = 1;

  void validate() const;
};

/// eta_min + (lr0 - eta_min)(1 + cos(pi t / T)) / 2
double cosine_lr(std::size_t step, const SgdHyper& h);

/// One velocity buffer per parameter tensor, created as zeros on first use.
struct SgdState {
  std::vector<Vector> velocity;
  std::size_t step = 0;
};

/// Coupled L2 and classic momentum:
///   g' = g + wd * w;  v = momentum * v + g';  w = w - lr * v
void sgd_step(std::span<const std::span<double>> params,
              std::span<const std::span<const double>> grads, SgdState& state,
              const SgdHyper& h, double lr);

template <typename Derived>
std::span<double> param_span(Eigen::PlainObjectBase<Derived>& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}

template <typename Derived>
std::span<const double> grad_span(const Eigen::PlainObjectBase<Derived>& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}

}  // namespace tfalt
