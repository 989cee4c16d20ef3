#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tfalt/dataio.hpp"

namespace tfalt {

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Entry (i, j) counts samples of true class i predicted as j.
CountMatrix confusion(const std::vector<Label>& preds, const std::vector<Label>& labels,
                      std::size_t num_classes);

struct SubsetAccuracy {
  std::optional<double> many;
  std::optional<double> medium;
  std::optional<double> few;
};

struct EvalReport {
  CountMatrix confusion;
  double overall_acc = 0.0;
  std::vector<double> per_class_acc;
  SubsetAccuracy subset_acc;
  double macro_f1 = 0.0;
};

EvalReport report(const CountMatrix& confusion, const std::vector<Subset>& subsets);

/// Structured text form with keys overall_acc, macro_f1, per_class_acc,
/// subset_acc.{many,medium,few} and confusion. Absent subsets are null.
std::string to_json(const EvalReport& r);
EvalReport report_from_json(const std::string& text);

}  // namespace tfalt
