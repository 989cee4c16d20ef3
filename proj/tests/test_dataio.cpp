#include <gtest/gtest.h>

#include <bit>
#include <filesystem>

#include "test_support.hpp"
#include "tfalt/dataio.hpp"
#include "tfalt/random.hpp"

using namespace tfalt;
using tfalt::testing::expect_errc;
using tfalt::testing::TempDir;
namespace fs = std::filesystem;

namespace {

EmbeddingSet random_set(Rng& rng, Eigen::Index n, Eigen::Index d, std::size_t C) {
  EmbeddingSet s;
  s.features.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < d; ++k) s.features(i, k) = 10.0 * rng.normal();
    s.labels.push_back(static_cast<Label>(rng.below(C)));
  }
  return s;
}

void write_synth(const fs::path& dir, SynthConfig cfg = {}) {
  cfg.head_count = 40;
  cfg.tail_count = 4;
  cfg.test_per_class = 5;
  cfg.thresholds = {20, 5};
  write_dataset(dir, synth_generate(cfg));
}

}  // namespace

TEST(MakePrompt, Template) {
  EXPECT_EQ(make_prompt("fundus", "mild"), "The category of this fundus image is mild.");
  EXPECT_EQ(make_prompt("dermoscopy", "melanoma"),
            "The category of this dermoscopy image is melanoma.");
  expect_errc(Errc::invalid_argument, [] { make_prompt("", "x"); });
  expect_errc(Errc::invalid_argument, [] { make_prompt("fundus", ""); });
}

TEST(Tfae, RoundTripIsBitIdenticalAtFloat32) {
  TempDir tmp;
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const auto n = 1 + static_cast<Eigen::Index>(rng.below(20));
    const auto d = 2 + static_cast<Eigen::Index>(rng.below(20));
    const auto set = random_set(rng, n, d, 6);
    const auto path = tmp / "set.tfae";
    write_embedding_file(path, set);
    const auto back = read_embedding_file(path, 6);
    ASSERT_EQ(back.features.rows(), n);
    ASSERT_EQ(back.features.cols(), d);
    EXPECT_EQ(back.labels, set.labels);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index k = 0; k < d; ++k) {
        EXPECT_EQ(std::bit_cast<std::uint32_t>(static_cast<float>(back.features(i, k))),
                  std::bit_cast<std::uint32_t>(static_cast<float>(set.features(i, k))));
      }
    }
    // A second write of the read-back set reproduces the same bytes.
    const auto again = tmp / "again.tfae";
    write_embedding_file(again, back);
    EXPECT_EQ(read_file_bytes(path), read_file_bytes(again));
  }
}

TEST(Tfae, HeaderLayoutIsLittleEndian) {
  Matrix m(1, 2);
  m << 1.0, -2.0;
  const std::vector<Label> labels{3};
  const auto bytes = encode_tfae(m, &labels, Dtype::float32);
  ASSERT_EQ(bytes.size(), 28u + 8u + 4u);
  EXPECT_EQ(bytes.substr(0, 4), "TFAE");
  EXPECT_EQ(bytes[4], 1);      // version
  EXPECT_EQ(bytes[8], 1);      // has_labels
  EXPECT_EQ(bytes[9], 0);      // dtype float32
  EXPECT_EQ(bytes[12], 1);     // rows
  EXPECT_EQ(bytes[20], 2);     // cols
  EXPECT_EQ(static_cast<unsigned char>(bytes[31]), 0x3F);  // 1.0f = 0x3F800000
  EXPECT_EQ(bytes[36], 3);     // label
}

TEST(Tfae, Float64RoundTripIsExact) {
  TempDir tmp;
  Matrix m(2, 3);
  m << 1.0 / 3.0, -1e-300, 7.25, 2.0 / 7.0, 1e300, -0.0;
  write_matrix64(tmp / "m.tfae", m);
  const Matrix back = read_matrix64(tmp / "m.tfae");
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    EXPECT_EQ(std::bit_cast<std::uint64_t>(back.data()[i]), std::bit_cast<std::uint64_t>(m.data()[i]));
  }
}

TEST(Tfae, FormatErrors) {
  TempDir tmp;
  Rng rng(2);
  const auto set = random_set(rng, 10, 4, 3);
  const auto good = encode_tfae(set.features, &set.labels, Dtype::float32);

  auto corrupt = good;
  corrupt.replace(0, 4, "XXXX");
  expect_errc(Errc::bad_magic, [&] { decode_tfae(corrupt); });

  auto version = good;
  version[4] = 2;
  expect_errc(Errc::unsupported_version, [&] { decode_tfae(version); });

  auto flags = good;
  flags[10] = 1;
  expect_errc(Errc::bad_flags, [&] { decode_tfae(flags); });

  // Declared 10 rows, payload holds 9.
  const auto nine = encode_tfae(set.features.topRows(9),
                                nullptr, Dtype::float32);
  auto truncated = nine;
  truncated[12] = 10;
  expect_errc(Errc::truncated, [&] { decode_tfae(truncated); });
  expect_errc(Errc::truncated, [&] { decode_tfae(good.substr(0, good.size() - 1)); });
  expect_errc(Errc::truncated, [&] { decode_tfae(good + "x"); });

  write_file_bytes(tmp / "f.tfae", good);
  expect_errc(Errc::label_out_of_range, [&] { read_embedding_file(tmp / "f.tfae", 2); });
  expect_errc(Errc::dtype_mismatch, [&] { read_matrix64(tmp / "f.tfae"); });
  expect_errc(Errc::missing_file, [&] { read_tfae(tmp / "nope.tfae"); });
}

TEST(AssignSubsets, Rules) {
  EXPECT_EQ(assign_subsets({500, 50, 5}, {100, 10}),
            (std::vector<Subset>{Subset::many, Subset::medium, Subset::few}));
  EXPECT_EQ(assign_subsets({100, 100}, {100, 10}),
            (std::vector<Subset>{Subset::many, Subset::many}));
  EXPECT_EQ(assign_subsets({9, 10, 11}, {11, 9}),
            (std::vector<Subset>{Subset::few, Subset::medium, Subset::many}));
}

TEST(AssignSubsets, PartitionsEveryClass) {
  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    std::vector<std::size_t> counts(12);
    for (auto& c : counts) c = 1 + rng.below(300);
    const SubsetThresholds th{1 + rng.below(200) + 50, rng.below(50)};
    const auto s = assign_subsets(counts, th);
    ASSERT_EQ(s.size(), counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) {
      const int hits = (counts[i] >= th.many_min) + (counts[i] <= th.few_max) +
                       (counts[i] > th.few_max && counts[i] < th.many_min);
      EXPECT_EQ(hits, 1);
    }
  }
}

TEST(Manifest, LoadsConsistentDataset) {
  TempDir tmp;
  write_synth(tmp.path());
  const auto m = load_manifest(tmp / "manifest.json");
  EXPECT_EQ(m.dim, 64u);
  EXPECT_EQ(m.num_classes(), 10u);
  EXPECT_EQ(m.prompts[3], "The category of this synthetic image is class_3.");
  const auto ds = load_dataset(tmp / "manifest.json");
  EXPECT_EQ(ds.bank.num_classes(), 10);
  EXPECT_EQ(ds.test.size(), 50);
}

TEST(Manifest, DimensionMismatch) {
  TempDir tmp;
  write_synth(tmp.path());
  // Replace the train file with 32-dim content.
  Rng rng(1);
  auto small = random_set(rng, 5, 32, 10);
  write_embedding_file(tmp / "train.tfae", small);
  expect_errc(Errc::dimension_mismatch, [&] { load_manifest(tmp / "manifest.json"); });
}

TEST(Manifest, ThresholdInversionAndMissingFile) {
  TempDir tmp;
  write_synth(tmp.path());
  auto m = load_manifest(tmp / "manifest.json");
  m.thresholds = {50, 100};
  save_manifest(tmp / "bad.json", m);
  expect_errc(Errc::threshold, [&] { load_manifest(tmp / "bad.json"); });

  m.thresholds = {20, 5};
  m.test_file = "missing.tfae";
  save_manifest(tmp / "missing.json", m);
  expect_errc(Errc::missing_file, [&] { load_manifest(tmp / "missing.json"); });
}

TEST(Manifest, CountMismatchIsRejected) {
  TempDir tmp;
  write_synth(tmp.path());
  auto m = load_manifest(tmp / "manifest.json");
  m.classes[0].train_count += 1;
  save_manifest(tmp / "bad.json", m);
  expect_errc(Errc::invalid_dataset, [&] { load_manifest(tmp / "bad.json"); });
}

TEST(Synth, CountsEndpointsAndMonotone) {
  SynthConfig cfg;
  const auto ds = synth_generate(cfg);
  const auto counts = class_counts(ds.train.labels, 10);
  EXPECT_EQ(counts.front(), 500u);
  EXPECT_EQ(counts.back(), 5u);
  for (std::size_t c = 1; c < counts.size(); ++c) EXPECT_LE(counts[c], counts[c - 1]);
  EXPECT_EQ(counts, ds.manifest.train_counts());

  for (std::size_t C : {2u, 3u, 7u, 25u}) {
    const auto lt = long_tail_counts(C, 317, 3);
    EXPECT_EQ(lt.front(), 317u);
    EXPECT_EQ(lt.back(), 3u);
    for (std::size_t c = 1; c < C; ++c) EXPECT_LE(lt[c], lt[c - 1]);
  }
}

TEST(Synth, BalancedTestSet) {
  SynthConfig cfg;
  cfg.test_per_class = 30;
  const auto ds = synth_generate(cfg);
  EXPECT_EQ(ds.test.size(), 300);
  for (auto n : class_counts(ds.test.labels, 10)) EXPECT_EQ(n, 30u);
}

TEST(Synth, AnchorsOrthonormalAndDistortionInvertible) {
  const auto ds = synth_generate({});
  const Matrix gram = ds.raw_anchors * ds.raw_anchors.transpose();
  EXPECT_LT((gram - Matrix::Identity(10, 10)).cwiseAbs().maxCoeff(), 1e-6);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(ds.distortion);
  const auto sv = svd.singularValues();
  EXPECT_GE(sv.minCoeff(), 0.5 - 1e-9);
  EXPECT_LE(sv.maxCoeff(), 2.0 + 1e-9);
}

TEST(Synth, DeterministicFiles) {
  TempDir a, b;
  write_dataset(a.path(), synth_generate({}));
  write_dataset(b.path(), synth_generate({}));
  for (const char* f : {"train.tfae", "test.tfae", "prompts.tfae", "manifest.json"}) {
    EXPECT_EQ(read_file_bytes(a / f), read_file_bytes(b / f)) << f;
  }
  SynthConfig other;
  other.sample_seed = 99;
  TempDir c;
  write_dataset(c.path(), synth_generate(other));
  EXPECT_NE(read_file_bytes(a / "train.tfae"), read_file_bytes(c / "train.tfae"));
}

TEST(Synth, InvalidConfig) {
  SynthConfig cfg;
  cfg.dim = 8;
  expect_errc(Errc::invalid_config, [&] { synth_generate(cfg); });
  cfg = {};
  cfg.tail_count = 600;
  expect_errc(Errc::invalid_config, [&] { synth_generate(cfg); });
  cfg = {};
  cfg.noise_sigma = -1;
  expect_errc(Errc::invalid_config, [&] { synth_generate(cfg); });
}

TEST(Synth, ConfigDocumentRoundTrip) {
  SynthConfig cfg;
  cfg.num_classes = 4;
  cfg.noise_sigma = 0.125;
  cfg.thresholds = {77, 3};
  const auto back = synth_config_from_json(to_json(cfg));
  EXPECT_EQ(to_json(back), to_json(cfg));
  expect_errc(Errc::invalid_config, [] { synth_config_from_json(R"({"bogus": 1})"); });
}
