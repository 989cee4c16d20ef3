#include "tfalt/dataio.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tfalt/random.hpp"

namespace tfalt {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr char kMagic[4] = {'T', 'F', 'A', 'E'};
constexpr std::uint32_t kFlagHasLabels = 1u;
constexpr std::uint32_t kDtypeShift = 8;
constexpr std::uint32_t kDtypeMask = 0xFFu << kDtypeShift;

template <typename T>
void put_le(std::string& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>(u & 0xFF));
    u = static_cast<U>(u >> 8);
  }
}

template <typename T>
T get_le(std::string_view bytes, std::size_t offset) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
  }
  return value;
}

std::size_t dtype_bytes(Dtype dtype) { return dtype == Dtype::float64 ? 8 : 4; }

TfaeHeader decode_header(std::string_view bytes, const std::string& origin) {
  if (bytes.size() < 4 || bytes.substr(0, 4) != std::string_view(kMagic, 4)) {
    fail(Errc::bad_magic, origin + ": missing TFAE magic");
  }
  if (bytes.size() < kTfaeHeaderBytes) {
    fail(Errc::truncated, origin + ": header is shorter than " +
                              std::to_string(kTfaeHeaderBytes) + " bytes");
  }
  TfaeHeader h;
  h.version = get_le<std::uint32_t>(bytes, 4);
  if (h.version != kTfaeVersion) {
    fail(Errc::unsupported_version,
         origin + ": unsupported TFAE version " + std::to_string(h.version));
  }
  const auto flags = get_le<std::uint32_t>(bytes, 8);
  if ((flags & ~(kFlagHasLabels | kDtypeMask)) != 0) {
    fail(Errc::bad_flags, origin + ": unknown flag bits set");
  }
  const auto dtype = (flags & kDtypeMask) >> kDtypeShift;
  if (dtype > 1) {
    fail(Errc::dtype_mismatch, origin + ": unknown dtype code " + std::to_string(dtype));
  }
  h.has_labels = (flags & kFlagHasLabels) != 0;
  h.dtype = static_cast<Dtype>(dtype);
  h.rows = get_le<std::uint64_t>(bytes, 12);
  h.cols = get_le<std::uint64_t>(bytes, 20);
  if (h.rows == 0 || h.cols == 0) {
    fail(Errc::shape, origin + ": empty matrix");
  }
  return h;
}

// Expected file size, or nullopt on overflow.
std::optional<std::uint64_t> expected_size(const TfaeHeader& h) {
  constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t elem = dtype_bytes(h.dtype);
  if (h.rows > kMax / h.cols) return std::nullopt;
  const std::uint64_t count = h.rows * h.cols;
  if (count > (kMax - kTfaeHeaderBytes) / elem) return std::nullopt;
  std::uint64_t total = kTfaeHeaderBytes + count * elem;
  if (h.has_labels) {
    if (h.rows > (kMax - total) / 4) return std::nullopt;
    total += h.rows * 4;
  }
  return total;
}

}  // namespace

std::string read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::missing_file, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const fs::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::io, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(Errc::io, "write failed for " + path.string());
}

std::string encode_tfae(const Matrix& data, const std::vector<Label>* labels, Dtype dtype) {
  if (data.rows() == 0 || data.cols() == 0) fail(Errc::shape, "encode_tfae: empty matrix");
  if (!all_finite(data)) fail(Errc::invalid_dataset, "encode_tfae: non-finite entries");
  const bool has_labels = labels != nullptr && !labels->empty();
  if (has_labels && static_cast<Eigen::Index>(labels->size()) != data.rows()) {
    fail(Errc::shape, "encode_tfae: label count does not match rows");
  }
  std::string out;
  out.reserve(kTfaeHeaderBytes + data.size() * dtype_bytes(dtype) +
              (has_labels ? labels->size() * 4 : 0));
  out.append(kMagic, 4);
  put_le<std::uint32_t>(out, kTfaeVersion);
  std::uint32_t flags = static_cast<std::uint32_t>(dtype) << kDtypeShift;
  if (has_labels) flags |= kFlagHasLabels;
  put_le<std::uint32_t>(out, flags);
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(data.rows()));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(data.cols()));
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    for (Eigen::Index c = 0; c < data.cols(); ++c) {
      if (dtype == Dtype::float64) {
        put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(data(r, c)));
      } else {
        put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(data(r, c))));
      }
    }
  }
  if (has_labels) {
    for (Label l : *labels) put_le<std::uint32_t>(out, l);
  }
  return out;
}

TfaeBlock decode_tfae(std::string_view bytes, const std::string& origin) {
  TfaeBlock block;
  block.header = decode_header(bytes, origin);
  const auto& h = block.header;
  const auto total = expected_size(h);
  if (!total || bytes.size() < *total) {
    fail(Errc::truncated, origin + ": header declares " + std::to_string(h.rows) + "x" +
                              std::to_string(h.cols) + " but payload holds " +
                              std::to_string(bytes.size()) + " bytes");
  }
  if (bytes.size() > *total) {
    fail(Errc::truncated, origin + ": " + std::to_string(bytes.size() - *total) +
                              " trailing bytes after payload");
  }
  const auto rows = static_cast<Eigen::Index>(h.rows);
  const auto cols = static_cast<Eigen::Index>(h.cols);
  block.data.resize(rows, cols);
  std::size_t offset = kTfaeHeaderBytes;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (h.dtype == Dtype::float64) {
        block.data(r, c) = std::bit_cast<double>(get_le<std::uint64_t>(bytes, offset));
        offset += 8;
      } else {
        block.data(r, c) = std::bit_cast<float>(get_le<std::uint32_t>(bytes, offset));
        offset += 4;
      }
    }
  }
  if (!all_finite(block.data)) fail(Errc::invalid_dataset, origin + ": non-finite entries");
  if (h.has_labels) {
    block.labels.resize(h.rows);
    for (auto& l : block.labels) {
      l = get_le<std::uint32_t>(bytes, offset);
      offset += 4;
    }
  }
  return block;
}

TfaeHeader read_tfae_header(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::missing_file, "cannot open " + path.string());
  std::string head(kTfaeHeaderBytes, '\0');
  in.read(head.data(), static_cast<std::streamsize>(head.size()));
  head.resize(static_cast<std::size_t>(in.gcount()));
  return decode_header(head, path.string());
}

TfaeBlock read_tfae(const fs::path& path) { return decode_tfae(read_file_bytes(path), path.string()); }

void write_tfae(const fs::path& path, const Matrix& data, const std::vector<Label>* labels,
                Dtype dtype) {
  write_file_bytes(path, encode_tfae(data, labels, dtype));
}

Matrix read_matrix64(const fs::path& path) {
  auto block = read_tfae(path);
  if (block.header.dtype != Dtype::float64) {
    fail(Errc::dtype_mismatch, path.string() + ": expected float64 payload (dtype 1)");
  }
  return std::move(block.data);
}

void write_matrix64(const fs::path& path, const Matrix& data) {
  write_tfae(path, data, nullptr, Dtype::float64);
}

// ---------------------------------------------------------------------------

PromptBank::PromptBank(const Matrix& raw_anchors, std::vector<std::string> prompts,
                       std::vector<std::string> class_names)
    : anchors_(raw_anchors.rows(), raw_anchors.cols()),
      prompts_(std::move(prompts)),
      class_names_(std::move(class_names)) {
  if (raw_anchors.rows() < 2) fail(Errc::invalid_dataset, "prompt bank needs at least 2 classes");
  const auto c = static_cast<std::size_t>(raw_anchors.rows());
  if (prompts_.size() != c || class_names_.size() != c) {
    fail(Errc::invalid_dataset, "prompt bank: " + std::to_string(c) + " anchors but " +
                                    std::to_string(prompts_.size()) + " prompts and " +
                                    std::to_string(class_names_.size()) + " class names");
  }
  for (Eigen::Index r = 0; r < raw_anchors.rows(); ++r) {
    anchors_.row(r) = l2_normalize(raw_anchors.row(r).transpose()).transpose();
  }
}

const char* to_string(Subset s) noexcept {
  switch (s) {
    case Subset::many: return "many";
    case Subset::medium: return "medium";
    case Subset::few: return "few";
  }
  return "?";
}

std::vector<std::size_t> DatasetManifest::train_counts() const {
  std::vector<std::size_t> out;
  out.reserve(classes.size());
  for (const auto& c : classes) out.push_back(c.train_count);
  return out;
}

void SynthConfig::validate() const {
  if (num_classes < 2) fail(Errc::invalid_config, "synth: num_classes must be >= 2");
  if (dim < 2) fail(Errc::invalid_config, "synth: dim must be >= 2");
  if (dim < num_classes) {
    fail(Errc::invalid_config, "synth: dim " + std::to_string(dim) + " < num_classes " +
                                   std::to_string(num_classes) +
                                   "; orthonormal anchors are impossible");
  }
  if (tail_count < 1 || head_count < tail_count) {
    fail(Errc::invalid_config, "synth: need head_count >= tail_count >= 1");
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    fail(Errc::invalid_config, "synth: noise_sigma must be finite and >= 0");
  }
  if (test_per_class < 1) fail(Errc::invalid_config, "synth: test_per_class must be >= 1");
  if (thresholds.many_min <= thresholds.few_max) {
    fail(Errc::threshold, "synth: many_min must exceed few_max");
  }
  if (data_type.empty()) fail(Errc::invalid_config, "synth: data_type must be non-empty");
}

std::string make_prompt(std::string_view data_type, std::string_view class_name) {
  if (data_type.empty() || class_name.empty()) {
    fail(Errc::invalid_argument, "make_prompt: data type and class name must be non-empty");
  }
  std::string out = "The category of this ";
  out += data_type;
  out += " image is ";
  out += class_name;
  out += '.';
  return out;
}

void write_embedding_file(const fs::path& path, const EmbeddingSet& set) {
  if (set.dim() < 2) fail(Errc::shape, "embedding set needs dim >= 2");
  write_tfae(path, set.features, &set.labels, Dtype::float32);
}

EmbeddingSet read_embedding_file(const fs::path& path, std::optional<std::size_t> num_classes) {
  auto block = read_tfae(path);
  if (block.data.cols() < 2) fail(Errc::shape, path.string() + ": embedding dim must be >= 2");
  if (num_classes) {
    for (std::size_t i = 0; i < block.labels.size(); ++i) {
      if (block.labels[i] >= *num_classes) {
        fail(Errc::label_out_of_range, path.string() + ": row " + std::to_string(i) +
                                           " has label " + std::to_string(block.labels[i]) +
                                           " >= " + std::to_string(*num_classes) + " classes");
      }
    }
  }
  return {std::move(block.data), std::move(block.labels)};
}

PromptBank read_prompt_bank(const fs::path& path, std::vector<std::string> prompts,
                            std::vector<std::string> class_names) {
  auto block = read_tfae(path);
  return PromptBank(block.data, std::move(prompts), std::move(class_names));
}

std::vector<std::size_t> class_counts(const std::vector<Label>& labels, std::size_t num_classes) {
  std::vector<std::size_t> counts(num_classes, 0);
  for (Label l : labels) {
    if (l >= num_classes) {
      fail(Errc::label_out_of_range, "label " + std::to_string(l) + " >= " +
                                         std::to_string(num_classes));
    }
    ++counts[l];
  }
  return counts;
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

namespace {

template <typename T>
T require(const json& doc, const char* key, const std::string& origin) {
  if (!doc.contains(key)) fail(Errc::invalid_dataset, origin + ": missing key '" + key + "'");
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(Errc::invalid_dataset, origin + ": bad value for '" + key + "': " + e.what());
  }
}

void check_dim(const fs::path& file, std::size_t dim) {
  const auto h = read_tfae_header(file);
  if (h.cols != dim) {
    fail(Errc::dimension_mismatch, file.string() + " has dim " + std::to_string(h.cols) +
                                       " but manifest declares " + std::to_string(dim));
  }
}

}  // namespace

void save_manifest(const fs::path& path, const DatasetManifest& m) {
  json doc;
  doc["version"] = m.version;
  doc["dim"] = m.dim;
  doc["data_type"] = m.data_type;
  json classes = json::array();
  for (std::size_t i = 0; i < m.classes.size(); ++i) {
    json c;
    c["name"] = m.classes[i].name;
    c["train_count"] = m.classes[i].train_count;
    if (i < m.prompts.size()) c["prompt"] = m.prompts[i];
    classes.push_back(std::move(c));
  }
  doc["classes"] = std::move(classes);
  doc["subset_thresholds"] = {{"many_min", m.thresholds.many_min},
                              {"few_max", m.thresholds.few_max}};
  doc["files"] = {{"train", m.train_file.generic_string()},
                  {"test", m.test_file.generic_string()},
                  {"prompt_bank", m.prompt_bank_file.generic_string()}};
  write_file_bytes(path, doc.dump(2) + "\n");
}

DatasetManifest load_manifest(const fs::path& path) {
  const std::string origin = path.string();
  json doc;
  try {
    doc = json::parse(read_file_bytes(path));
  } catch (const json::parse_error& e) {
    fail(Errc::invalid_dataset, origin + ": " + e.what());
  }
  DatasetManifest m;
  m.root = path.parent_path();
  m.version = require<int>(doc, "version", origin);
  if (m.version != 1) {
    fail(Errc::unsupported_version, origin + ": unsupported manifest version " +
                                        std::to_string(m.version));
  }
  m.dim = require<std::size_t>(doc, "dim", origin);
  m.data_type = require<std::string>(doc, "data_type", origin);
  const auto classes = require<json>(doc, "classes", origin);
  if (!classes.is_array()) fail(Errc::invalid_dataset, origin + ": 'classes' must be a list");
  for (const auto& c : classes) {
    ClassInfo info;
    info.name = require<std::string>(c, "name", origin);
    info.train_count = require<std::size_t>(c, "train_count", origin);
    if (info.train_count < 1) {
      fail(Errc::invalid_dataset, origin + ": class '" + info.name + "' has no train samples");
    }
    m.prompts.push_back(c.contains("prompt") ? c.at("prompt").get<std::string>()
                                             : make_prompt(m.data_type, info.name));
    m.classes.push_back(std::move(info));
  }
  if (m.classes.size() < 2) fail(Errc::invalid_dataset, origin + ": need at least 2 classes");
  const auto thr = require<json>(doc, "subset_thresholds", origin);
  m.thresholds.many_min = require<std::size_t>(thr, "many_min", origin);
  m.thresholds.few_max = require<std::size_t>(thr, "few_max", origin);
  if (m.thresholds.many_min <= m.thresholds.few_max) {
    fail(Errc::threshold, origin + ": many_min (" + std::to_string(m.thresholds.many_min) +
                              ") must exceed few_max (" + std::to_string(m.thresholds.few_max) +
                              ")");
  }
  const auto files = require<json>(doc, "files", origin);
  m.train_file = require<std::string>(files, "train", origin);
  m.test_file = require<std::string>(files, "test", origin);
  m.prompt_bank_file = require<std::string>(files, "prompt_bank", origin);

  for (const auto& f : {m.train_path(), m.test_path(), m.prompt_bank_path()}) {
    if (!fs::exists(f)) fail(Errc::missing_file, origin + ": referenced file " + f.string() +
                                                     " does not exist");
    check_dim(f, m.dim);
  }
  const auto bank_header = read_tfae_header(m.prompt_bank_path());
  if (bank_header.rows != m.classes.size()) {
    fail(Errc::dimension_mismatch, origin + ": prompt bank has " +
                                       std::to_string(bank_header.rows) + " rows but manifest lists " +
                                       std::to_string(m.classes.size()) + " classes");
  }
  const auto train = read_embedding_file(m.train_path(), m.num_classes());
  const auto test = read_embedding_file(m.test_path(), m.num_classes());
  if (!train.has_labels() || !test.has_labels()) {
    fail(Errc::invalid_dataset, origin + ": train and test files must carry labels");
  }
  const auto counts = class_counts(train.labels, m.num_classes());
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] != m.classes[c].train_count) {
      fail(Errc::invalid_dataset, origin + ": class '" + m.classes[c].name + "' declares " +
                                      std::to_string(m.classes[c].train_count) +
                                      " train samples but the file holds " +
                                      std::to_string(counts[c]));
    }
  }
  return m;
}

Dataset load_dataset(const fs::path& manifest_path) {
  Dataset ds;
  ds.manifest = load_manifest(manifest_path);
  const auto& m = ds.manifest;
  ds.train = read_embedding_file(m.train_path(), m.num_classes());
  ds.test = read_embedding_file(m.test_path(), m.num_classes());
  std::vector<std::string> names;
  for (const auto& c : m.classes) names.push_back(c.name);
  ds.bank = read_prompt_bank(m.prompt_bank_path(), m.prompts, std::move(names));
  return ds;
}

std::vector<Subset> assign_subsets(const std::vector<std::size_t>& train_counts,
                                   const SubsetThresholds& thresholds) {
  std::vector<Subset> out;
  out.reserve(train_counts.size());
  for (auto n : train_counts) {
    if (n >= thresholds.many_min) {
      out.push_back(Subset::many);
    } else if (n <= thresholds.few_max) {
      out.push_back(Subset::few);
    } else {
      out.push_back(Subset::medium);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic long-tailed benchmark
// ---------------------------------------------------------------------------

std::vector<std::size_t> long_tail_counts(std::size_t num_classes, std::size_t head_count,
                                          std::size_t tail_count) {
  std::vector<std::size_t> counts(num_classes);
  const double ratio = static_cast<double>(tail_count) / static_cast<double>(head_count);
  for (std::size_t c = 0; c < num_classes; ++c) {
    const double t = num_classes > 1 ? static_cast<double>(c) / static_cast<double>(num_classes - 1) : 0.0;
    const auto n = static_cast<std::size_t>(std::llround(static_cast<double>(head_count) * std::pow(ratio, t)));
    counts[c] = std::max(n, tail_count);
  }
  counts.front() = head_count;
  counts.back() = tail_count;
  return counts;
}

namespace {

Matrix gaussian(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Matrix g(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) g(r, c) = rng.normal();
  }
  return g;
}

// First `cols` columns of a Haar-distributed orthogonal matrix.
Matrix random_orthonormal_columns(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  const Eigen::MatrixXd g = gaussian(rng, rows, cols);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
  const Eigen::MatrixXd r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
  for (Eigen::Index c = 0; c < cols; ++c) {
    if (r(c, c) < 0) q.col(c) *= -1.0;
  }
  return q;
}

// Features pass through float32 so that in-memory sets equal their files.
void round_to_float(Matrix& m) {
  m = m.cast<float>().cast<double>();
}

EmbeddingSet sample_set(Rng& rng, const Matrix& anchors, const Matrix& distortion,
                        const std::vector<std::size_t>& per_class, double sigma) {
  std::size_t total = 0;
  for (auto n : per_class) total += n;
  const auto d = anchors.cols();
  EmbeddingSet set;
  set.features.resize(static_cast<Eigen::Index>(total), d);
  set.labels.reserve(total);
  Eigen::Index row = 0;
  Vector x(d);
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    for (std::size_t i = 0; i < per_class[c]; ++i) {
      for (Eigen::Index k = 0; k < d; ++k) x(k) = anchors(static_cast<Eigen::Index>(c), k) + sigma * rng.normal();
      set.features.row(row++) = (distortion * x).transpose();
      set.labels.push_back(static_cast<Label>(c));
    }
  }
  round_to_float(set.features);
  return set;
}

}  // namespace

SynthDataset synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  const auto C = static_cast<Eigen::Index>(cfg.num_classes);
  const auto d = static_cast<Eigen::Index>(cfg.dim);

  SynthDataset out;
  Rng anchor_rng = Rng::stream(cfg.distortion_seed, "anchors");
  out.raw_anchors = random_orthonormal_columns(anchor_rng, d, C).transpose();
  round_to_float(out.raw_anchors);

  // Rotation composed with a diagonal scaling in [0.5, 2].
  Rng distortion_rng = Rng::stream(cfg.distortion_seed, "distortion");
  const Matrix rotation = random_orthonormal_columns(distortion_rng, d, d);
  Vector scales(d);
  for (Eigen::Index k = 0; k < d; ++k) scales(k) = distortion_rng.uniform(0.5, 2.0);
  out.distortion = rotation * scales.asDiagonal();

  const auto train_counts = long_tail_counts(cfg.num_classes, cfg.head_count, cfg.tail_count);
  const std::vector<std::size_t> test_counts(cfg.num_classes, cfg.test_per_class);
  Rng train_rng = Rng::stream(cfg.sample_seed, "train");
  Rng test_rng = Rng::stream(cfg.sample_seed, "test");
  out.train = sample_set(train_rng, out.raw_anchors, out.distortion, train_counts, cfg.noise_sigma);
  out.test = sample_set(test_rng, out.raw_anchors, out.distortion, test_counts, cfg.noise_sigma);

  auto& m = out.manifest;
  m.dim = cfg.dim;
  m.data_type = cfg.data_type;
  m.thresholds = cfg.thresholds;
  std::vector<std::string> names;
  for (std::size_t c = 0; c < cfg.num_classes; ++c) {
    ClassInfo info{"class_" + std::to_string(c), train_counts[c]};
    m.prompts.push_back(make_prompt(cfg.data_type, info.name));
    names.push_back(info.name);
    m.classes.push_back(std::move(info));
  }
  out.bank = PromptBank(out.raw_anchors, m.prompts, std::move(names));
  return out;
}

void write_dataset(const fs::path& dir, const SynthDataset& ds) {
  fs::create_directories(dir);
  auto m = ds.manifest;
  m.root = dir;
  write_embedding_file(m.train_path(), ds.train);
  write_embedding_file(m.test_path(), ds.test);
  write_tfae(m.prompt_bank_path(), ds.raw_anchors, nullptr, Dtype::float32);
  save_manifest(dir / "manifest.json", m);
}

}  // namespace tfalt

namespace tfalt {

std::string to_json(const SynthConfig& cfg) {
  json doc;
  doc["num_classes"] = cfg.num_classes;
  doc["dim"] = cfg.dim;
  doc["head_count"] = cfg.head_count;
  doc["tail_count"] = cfg.tail_count;
  doc["noise_sigma"] = cfg.noise_sigma;
  doc["test_per_class"] = cfg.test_per_class;
  doc["distortion_seed"] = cfg.distortion_seed;
  doc["sample_seed"] = cfg.sample_seed;
  doc["data_type"] = cfg.data_type;
  doc["subset_thresholds"] = {{"many_min", cfg.thresholds.many_min},
                              {"few_max", cfg.thresholds.few_max}};
  return doc.dump(2) + "\n";
}

SynthConfig synth_config_from_json(const std::string& text, SynthConfig cfg) {
  try {
    const auto doc = json::parse(text);
    for (const auto& [key, value] : doc.items()) {
      if (key == "num_classes") cfg.num_classes = value.get<std::size_t>();
      else if (key == "dim") cfg.dim = value.get<std::size_t>();
      else if (key == "head_count") cfg.head_count = value.get<std::size_t>();
      else if (key == "tail_count") cfg.tail_count = value.get<std::size_t>();
      else if (key == "noise_sigma") cfg.noise_sigma = value.get<double>();
      else if (key == "test_per_class") cfg.test_per_class = value.get<std::size_t>();
      else if (key == "distortion_seed") cfg.distortion_seed = value.get<std::uint64_t>();
      else if (key == "sample_seed") cfg.sample_seed = value.get<std::uint64_t>();
      else if (key == "data_type") cfg.data_type = value.get<std::string>();
      else if (key == "subset_thresholds") {
        cfg.thresholds.many_min = value.at("many_min").get<std::size_t>();
        cfg.thresholds.few_max = value.at("few_max").get<std::size_t>();
      } else {
        fail(Errc::invalid_config, "synth config: unknown key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    fail(Errc::invalid_config, std::string("synth config: ") + e.what());
  }
  return cfg;
}

}  // namespace tfalt
