#include "tfalt/sampling.hpp"

#include <algorithm>
#include <numeric>

namespace tfalt {

const char* to_string(SamplerKind kind) noexcept {
  switch (kind) {
    case SamplerKind::wrs: return "wrs";
    case SamplerKind::rus: return "rus";
    case SamplerKind::none: return "none";
  }
  return "?";
}

SamplerKind parse_sampler_kind(const std::string& name) {
  if (name == "wrs") return SamplerKind::wrs;
  if (name == "rus") return SamplerKind::rus;
  if (name == "none") return SamplerKind::none;
  fail(Errc::invalid_argument, "unknown sampler '" + name + "' (expected wrs, rus or none)");
}

namespace {

std::vector<std::size_t> nonempty_counts(const std::vector<Label>& labels, std::size_t num_classes) {
  auto counts = class_counts(labels, num_classes);
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) {
      fail(Errc::invalid_dataset, "class " + std::to_string(c) + " has no samples");
    }
  }
  return counts;
}

}  // namespace

std::vector<double> wrs_weights(const std::vector<Label>& labels, std::size_t num_classes) {
  const auto counts = nonempty_counts(labels, num_classes);
  // Each class carries total mass 1/C, split evenly among its samples.
  std::vector<double> w(labels.size());
  const double per_class = 1.0 / static_cast<double>(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    w[i] = per_class / static_cast<double>(counts[labels[i]]);
  }
  return w;
}

WrsSampler::WrsSampler(const std::vector<Label>& labels, std::size_t num_classes,
                       std::uint64_t seed)
    : rng_(seed) {
  const auto w = wrs_weights(labels, num_classes);
  cdf_.resize(w.size());
  std::partial_sum(w.begin(), w.end(), cdf_.begin());
}

IndexList WrsSampler::draw(std::size_t n_draws) {
  IndexList out(n_draws);
  const double total = cdf_.back();
  for (auto& idx : out) {
    const double u = rng_.uniform() * total;
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    idx = std::min(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
  }
  return out;
}

IndexList wrs_stream(const EmbeddingSet& set, std::size_t num_classes, std::size_t n_draws,
                     std::uint64_t seed) {
  WrsSampler sampler(set.labels, num_classes, seed);
  return sampler.draw(n_draws);
}

IndexList rus_select(const EmbeddingSet& set, std::size_t num_classes, std::uint64_t seed) {
  const auto counts = nonempty_counts(set.labels, num_classes);
  const auto keep = *std::min_element(counts.begin(), counts.end());
  std::vector<IndexList> by_class(num_classes);
  for (std::size_t i = 0; i < set.labels.size(); ++i) by_class[set.labels[i]].push_back(i);

  Rng rng(seed);
  IndexList out;
  out.reserve(keep * num_classes);
  for (auto& members : by_class) {
    // Partial Fisher-Yates: the first `keep` slots become a uniform subset.
    for (std::size_t i = 0; i < keep; ++i) {
      const auto j = i + static_cast<std::size_t>(rng.below(members.size() - i));
      std::swap(members[i], members[j]);
    }
    out.insert(out.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(keep));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace tfalt
