#include "tfalt/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace tfalt {

namespace {

Matrix gaussian(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale) {
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = scale * rng.normal();
  }
  return m;
}

PromptBank random_bank(Rng& rng, Eigen::Index C, Eigen::Index d) {
  std::vector<std::string> names(static_cast<std::size_t>(C), "c");
  return PromptBank(gaussian(rng, C, d, 1.0), names, names);
}

AdapterParams random_adapter(Rng& rng, Eigen::Index d) {
  AdapterParams p;
  p.A = Matrix::Identity(d, d) + gaussian(rng, d, d, 0.3);
  p.lambda = rng.normal();
  return p;
}

// Central difference of `loss` over every entry of `param`, folded into the
// running maximum relative error against `analytic`.
template <typename Param, typename Loss>
double fd_compare(Param& param, const Param& analytic, double h, Loss&& loss, std::size_t& count) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < param.size(); ++i) {
    const double saved = param.data()[i];
    param.data()[i] = saved + h;
    const double up = loss();
    param.data()[i] = saved - h;
    const double down = loss();
    param.data()[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    worst = std::max(worst, relative_error(analytic.data()[i], numeric));
    ++count;
  }
  return worst;
}

}  // namespace

double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / scale;
}

GradcheckResult run_gradcheck(const GradcheckConfig& cfg) {
  if (cfg.dims.empty() || cfg.classes.empty()) fail(Errc::invalid_config, "gradcheck: empty dims/classes");
  const HeadConfig head{cfg.tau};
  head.validate();
  Rng rng = Rng::stream(cfg.seed, "gradcheck");
  GradcheckResult res;
  for (std::size_t t = 0; t < cfg.trials; ++t) {
    const auto d = cfg.dims[t % cfg.dims.size()];
    const auto C = cfg.classes[(t / cfg.dims.size()) % cfg.classes.size()];
    const auto bank = random_bank(rng, C, d);
    const Vector f_prime = gaussian(rng, d, 1, 1.0);
    const auto label = static_cast<Label>(rng.below(static_cast<std::uint64_t>(C)));

    // Stage I: (A, lambda).
    AdapterParams p = random_adapter(rng, d);
    const auto s1 = stage1_backward(p, bank, f_prime, label, head);
    auto loss1 = [&] { return ce_loss(branch_logits(p, bank, f_prime, head), label); };
    res.stage1_A = std::max(res.stage1_A, fd_compare(p.A, s1.grad.dA, cfg.step, loss1, res.entries_checked));
    Vector lambda(1), dlambda(1);
    lambda << p.lambda;
    dlambda << s1.grad.dlambda;
    auto loss_lambda = [&] {
      AdapterParams q{p.A, lambda(0)};
      return ce_loss(branch_logits(q, bank, f_prime, head), label);
    };
    res.stage1_lambda = std::max(res.stage1_lambda, fd_compare(lambda, dlambda, cfg.step, loss_lambda, res.entries_checked));

    // Stage II: (K, bias) in both modes on frozen random branches.
    const AdapterParams wrs = random_adapter(rng, d);
    const AdapterParams rus = random_adapter(rng, d);
    const auto frozen = branch_outputs(wrs, rus, bank, f_prime, head);
    for (auto mode : {EnsembleMode::logit_wise, EnsembleMode::feature_wise}) {
      const Eigen::Index w = mode == EnsembleMode::logit_wise ? C : d;
      EnsemblerParams e = EnsemblerParams::averaging(mode, w);
      e.K += gaussian(rng, w, 2 * w, 0.1);
      e.bias = gaussian(rng, w, 1, 0.1);
      const auto s2 = stage2_backward(e, frozen, bank, label, head, cfg.gamma);
      auto loss2 = [&] { return focal_loss(ensemble_logits(e, frozen, bank, head), label, cfg.gamma); };
      double worst = fd_compare(e.K, s2.grad.dK, cfg.step, loss2, res.entries_checked);
      worst = std::max(worst, fd_compare(e.bias, s2.grad.dbias, cfg.step, loss2, res.entries_checked));
      double& slot = mode == EnsembleMode::logit_wise ? res.stage2_logit : res.stage2_feature;
      slot = std::max(slot, worst);
    }
  }
  res.max_rel_err = std::max({res.stage1_A, res.stage1_lambda, res.stage2_logit, res.stage2_feature});
  res.pass = res.max_rel_err < cfg.tolerance;
  return res;
}

}  // namespace tfalt
