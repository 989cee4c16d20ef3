#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tfalt/numerics.hpp"

namespace tfalt {

using Label = std::uint32_t;

// ---------------------------------------------------------------------------
// TFAE binary matrix format
//
//   offset  size  field
//   0       4     magic "TFAE"
//   4       4     u32 version (= 1)
//   8       4     u32 flags: bit 0 has_labels, bits 8..15 dtype code
//   12      8     u64 rows
//   20      8     u64 cols
//   28      ...   rows*cols values, row-major (float32 for dtype 0,
//                 float64 for dtype 1)
//   ...     ...   rows * u32 labels when has_labels
//
// All integers and floats are little-endian.
// ---------------------------------------------------------------------------

enum class Dtype : std::uint8_t { float32 = 0, float64 = 1 };

inline constexpr std::uint32_t kTfaeVersion = 1;
inline constexpr std::size_t kTfaeHeaderBytes = 28;

struct TfaeHeader {
  std::uint32_t version = kTfaeVersion;
  bool has_labels = false;
  Dtype dtype = Dtype::float32;
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
};

struct TfaeBlock {
  TfaeHeader header;
  Matrix data;
  std::vector<Label> labels;  // empty unless header.has_labels
};

std::string encode_tfae(const Matrix& data, const std::vector<Label>* labels, Dtype dtype);
TfaeBlock decode_tfae(std::string_view bytes, const std::string& origin = "<memory>");

TfaeHeader read_tfae_header(const std::filesystem::path& path);
TfaeBlock read_tfae(const std::filesystem::path& path);
void write_tfae(const std::filesystem::path& path, const Matrix& data,
                const std::vector<Label>* labels, Dtype dtype);

/// Float64 matrix stored with dtype code 1; any other dtype is rejected.
Matrix read_matrix64(const std::filesystem::path& path);
void write_matrix64(const std::filesystem::path& path, const Matrix& data);

std::string read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::string_view bytes);

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// N x d features with optional labels.
struct EmbeddingSet {
  Matrix features;
  std::vector<Label> labels;

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }
  bool has_labels() const { return !labels.empty(); }
};

/// Per-class text anchors. Rows of `anchors` are unit-normalized on construction.
class PromptBank {
 public:
  PromptBank() = default;
  PromptBank(const Matrix& raw_anchors, std::vector<std::string> prompts,
             std::vector<std::string> class_names);

  const Matrix& anchors() const { return anchors_; }
  const std::vector<std::string>& prompts() const { return prompts_; }
  const std::vector<std::string>& class_names() const { return class_names_; }
  Eigen::Index num_classes() const { return anchors_.rows(); }
  Eigen::Index dim() const { return anchors_.cols(); }

 private:
  Matrix anchors_;
  std::vector<std::string> prompts_;
  std::vector<std::string> class_names_;
};

enum class Subset { many, medium, few };

const char* to_string(Subset s) noexcept;

struct SubsetThresholds {
  std::size_t many_min = 100;
  std::size_t few_max = 20;
};

struct ClassInfo {
  std::string name;
  std::size_t train_count = 0;
};

struct DatasetManifest {
  int version = 1;
  std::size_t dim = 0;
  std::string data_type;
  std::vector<ClassInfo> classes;
  SubsetThresholds thresholds;
  // Stored relative to the manifest; resolved against `root` on load.
  std::filesystem::path train_file = "train.tfae";
  std::filesystem::path test_file = "test.tfae";
  std::filesystem::path prompt_bank_file = "prompts.tfae";
  std::vector<std::string> prompts;
  std::filesystem::path root;

  std::size_t num_classes() const { return classes.size(); }
  std::vector<std::size_t> train_counts() const;
  std::filesystem::path train_path() const { return root / train_file; }
  std::filesystem::path test_path() const { return root / test_file; }
  std::filesystem::path prompt_bank_path() const { return root / prompt_bank_file; }
};

struct Dataset {
  DatasetManifest manifest;
  EmbeddingSet train;
  EmbeddingSet test;
  PromptBank bank;
};

struct SynthConfig {
  std::size_t num_classes = 10;
  std::size_t dim = 64;
  std::size_t head_count = 500;
  std::size_t tail_count = 5;
  double noise_sigma = 0.05;
  std::size_t test_per_class = 50;
  std::uint64_t distortion_seed = 7;
  std::uint64_t sample_seed = 11;
  SubsetThresholds thresholds;
  std::string data_type = "synthetic";

  void validate() const;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// "The category of this {data_type} image is {class_name}."
std::string make_prompt(std::string_view data_type, std::string_view class_name);

void write_embedding_file(const std::filesystem::path& path, const EmbeddingSet& set);

/// Reads a float32 or float64 TFAE file. When `num_classes` is given, every
/// label must be below it.
EmbeddingSet read_embedding_file(const std::filesystem::path& path,
                                 std::optional<std::size_t> num_classes = std::nullopt);

PromptBank read_prompt_bank(const std::filesystem::path& path,
                            std::vector<std::string> prompts,
                            std::vector<std::string> class_names);

DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

/// load_manifest plus the three referenced files.
Dataset load_dataset(const std::filesystem::path& manifest_path);

std::vector<Subset> assign_subsets(const std::vector<std::size_t>& train_counts,
                                   const SubsetThresholds& thresholds);

/// Geometric per-class counts from head_count down to tail_count.
std::vector<std::size_t> long_tail_counts(std::size_t num_classes, std::size_t head_count,
                                          std::size_t tail_count);

struct SynthDataset {
  EmbeddingSet train;
  EmbeddingSet test;
  PromptBank bank;
  Matrix raw_anchors;
  Matrix distortion;
  DatasetManifest manifest;
};

SynthDataset synth_generate(const SynthConfig& cfg);

/// Writes train/test/prompt-bank TFAE files and manifest.json into `dir`.
void write_dataset(const std::filesystem::path& dir, const SynthDataset& ds);

std::vector<std::size_t> class_counts(const std::vector<Label>& labels, std::size_t num_classes);

}  // namespace tfalt

namespace tfalt {

std::string to_json(const SynthConfig& cfg);
/// Keys absent from `text` keep the values in `base`.
SynthConfig synth_config_from_json(const std::string& text, SynthConfig base = {});

}  // namespace tfalt
