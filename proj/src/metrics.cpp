#include "tfalt/metrics.hpp"

#include <nlohmann/json.hpp>

namespace tfalt {

using json = nlohmann::ordered_json;

CountMatrix confusion(const std::vector<Label>& preds, const std::vector<Label>& labels,
                      std::size_t num_classes) {
  if (preds.size() != labels.size()) {
    fail(Errc::shape, "confusion: " + std::to_string(preds.size()) + " predictions for " +
                          std::to_string(labels.size()) + " labels");
  }
  const auto C = static_cast<Eigen::Index>(num_classes);
  CountMatrix m = CountMatrix::Zero(C, C);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] >= num_classes || labels[i] >= num_classes) {
      fail(Errc::label_out_of_range, "confusion: entry " + std::to_string(i) + " is outside " +
                                         std::to_string(num_classes) + " classes");
    }
    ++m(labels[i], preds[i]);
  }
  return m;
}

EvalReport report(const CountMatrix& confusion, const std::vector<Subset>& subsets) {
  const auto C = confusion.rows();
  if (C == 0 || confusion.cols() != C) fail(Errc::shape, "report: confusion must be square");
  if (static_cast<Eigen::Index>(subsets.size()) != C) {
    fail(Errc::shape, "report: subset assignment covers " + std::to_string(subsets.size()) +
                          " of " + std::to_string(C) + " classes");
  }
  EvalReport r;
  r.confusion = confusion;
  const auto row_sums = confusion.rowwise().sum().eval();
  const auto col_sums = confusion.colwise().sum().eval();
  const auto total = confusion.sum();
  std::int64_t correct = 0;
  double f1_sum = 0.0;
  double sums[3] = {0, 0, 0};
  int members[3] = {0, 0, 0};
  for (Eigen::Index c = 0; c < C; ++c) {
    if (row_sums(c) == 0) {
      fail(Errc::report, "report: class " + std::to_string(c) + " has no test samples");
    }
    const auto tp = confusion(c, c);
    correct += tp;
    const double recall = static_cast<double>(tp) / static_cast<double>(row_sums(c));
    const double precision = col_sums(c) > 0 ? static_cast<double>(tp) / static_cast<double>(col_sums(c)) : 0.0;
    r.per_class_acc.push_back(recall);
    if (precision + recall > 0.0) f1_sum += 2.0 * precision * recall / (precision + recall);
    const auto s = static_cast<int>(subsets[static_cast<std::size_t>(c)]);
    sums[s] += recall;
    ++members[s];
  }
  r.overall_acc = static_cast<double>(correct) / static_cast<double>(total);
  r.macro_f1 = f1_sum / static_cast<double>(C);
  auto mean = [&](Subset s) -> std::optional<double> {
    const auto i = static_cast<int>(s);
    if (members[i] == 0) return std::nullopt;
    return sums[i] / members[i];
  };
  r.subset_acc = {mean(Subset::many), mean(Subset::medium), mean(Subset::few)};
  return r;
}

std::string to_json(const EvalReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json doc;
  doc["overall_acc"] = r.overall_acc;
  doc["macro_f1"] = r.macro_f1;
  doc["per_class_acc"] = r.per_class_acc;
  doc["subset_acc"] = {{"many", opt(r.subset_acc.many)},
                       {"medium", opt(r.subset_acc.medium)},
                       {"few", opt(r.subset_acc.few)}};
  json rows = json::array();
  for (Eigen::Index i = 0; i < r.confusion.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < r.confusion.cols(); ++j) row.push_back(r.confusion(i, j));
    rows.push_back(std::move(row));
  }
  doc["confusion"] = std::move(rows);
  return doc.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
  EvalReport r;
  try {
    const auto doc = json::parse(text);
    r.overall_acc = doc.at("overall_acc").get<double>();
    r.macro_f1 = doc.at("macro_f1").get<double>();
    r.per_class_acc = doc.at("per_class_acc").get<std::vector<double>>();
    auto opt = [&](const char* k) -> std::optional<double> {
      const auto& v = doc.at("subset_acc").at(k);
      if (v.is_null()) return std::nullopt;
      return v.get<double>();
    };
    r.subset_acc = {opt("many"), opt("medium"), opt("few")};
    const auto& rows = doc.at("confusion");
    const auto C = static_cast<Eigen::Index>(rows.size());
    r.confusion.resize(C, C);
    for (Eigen::Index i = 0; i < C; ++i) {
      for (Eigen::Index j = 0; j < C; ++j) {
        r.confusion(i, j) = rows.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(j)).get<std::int64_t>();
      }
    }
  } catch (const json::exception& e) {
    fail(Errc::report, std::string("report document: ") + e.what());
  }
  return r;
}

}  // namespace tfalt
