#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tfalt/dataio.hpp"
#include "tfalt/random.hpp"

namespace tfalt {

enum class SamplerKind { wrs, rus, none };

const char* to_string(SamplerKind kind) noexcept;
SamplerKind parse_sampler_kind(const std::string& name);

struct SamplerSpec {
  SamplerKind kind = SamplerKind::none;
  std::uint64_t seed = 0;
};

using IndexList = std::vector<std::size_t>;

/// Per-sample probabilities proportional to 1 / n_{y_i}; they sum to 1.
std::vector<double> wrs_weights(const std::vector<Label>& labels, std::size_t num_classes);

/// Draws with replacement from a fixed categorical distribution by inverse CDF.
class WrsSampler {
 public:
  WrsSampler(const std::vector<Label>& labels, std::size_t num_classes, std::uint64_t seed);

  IndexList draw(std::size_t n_draws);

 private:
  std::vector<double> cdf_;
  Rng rng_;
};

IndexList wrs_stream(const EmbeddingSet& set, std::size_t num_classes, std::size_t n_draws,
                     std::uint64_t seed);

/// Keeps min-class-count indices per class, uniformly without replacement.
/// The result is sorted ascending.
IndexList rus_select(const EmbeddingSet& set, std::size_t num_classes, std::uint64_t seed);

}  // namespace tfalt
