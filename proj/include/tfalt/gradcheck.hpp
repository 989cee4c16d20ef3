#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tfalt/model.hpp"

namespace tfalt {

// Central finite differences over the forward losses, compared entry by entry
// against the analytic backward passes.
struct GradcheckConfig {
  std::size_t trials = 20;
  std::vector<Eigen::Index> dims = {4, 8};
  std::vector<Eigen::Index> classes = {3, 5};
  double step = 1e-5;
  double tolerance = 1e-5;
  double tau = 0.5;
  double gamma = 2.0;
  std::uint64_t seed = 0;
};

struct GradcheckResult {
  double max_rel_err = 0.0;
  double stage1_A = 0.0;
  double stage1_lambda = 0.0;
  double stage2_logit = 0.0;
  double stage2_feature = 0.0;
  std::size_t entries_checked = 0;
  bool pass = false;
};

/// |a - n| / max(|a|, |n|, 1e-8)
double relative_error(double analytic, double numeric);

GradcheckResult run_gradcheck(const GradcheckConfig& cfg);

}  // namespace tfalt
