#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tfalt/dataio.hpp"
#include "tfalt/metrics.hpp"
#include "tfalt/model.hpp"
#include "tfalt/optim.hpp"
#include "tfalt/sampling.hpp"

namespace tfalt {

struct RunConfig {
  std::size_t batch_size = 128;
  std::size_t epochs_stage1 = 200;
  std::size_t epochs_stage2 = 100;
  SgdHyper sgd;  // total_steps is derived per stage
  bool lr_per_batch = false;
  HeadConfig head;
  double gamma = 2.0;
  double adapter_init_std = 1e-4;
  std::uint64_t seed = 0;

  void validate() const;
};

std::string to_json(const RunConfig& cfg);
/// Keys absent from `text` keep the values in `base`; unknown keys are rejected.
RunConfig run_config_from_json(const std::string& text, RunConfig base = {});

/// Abort threshold on the epoch loss.
inline constexpr double kDivergenceLoss = 1e6;

struct TrainingMeta {
  std::size_t epochs = 0;
  std::uint64_t seed = 0;
  std::optional<double> final_loss;
  std::vector<double> loss_history;
};

struct Stage1Checkpoint {
  AdapterParams adapter;
  SamplerKind sampler = SamplerKind::wrs;
  HeadConfig head;
  TrainingMeta meta;
};

/// Points at a stage-1 checkpoint directory by path (relative to the stage-2
/// directory once saved) and content hash.
struct Stage1Ref {
  std::string path;
  std::string sha256;
};

struct Stage2Checkpoint {
  EnsemblerParams ensembler;
  Stage1Ref wrs;
  Stage1Ref rus;
  double gamma = 2.0;
  HeadConfig head;
  TrainingMeta meta;
};

struct Stage2Bundle {
  Stage2Checkpoint checkpoint;
  Stage1Checkpoint wrs;
  Stage1Checkpoint rus;
};

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

/// Adapter training on an arbitrary sampler, including SamplerKind::none
/// (the unbalanced ablation).
Stage1Checkpoint fit_adapter(const EmbeddingSet& train, const PromptBank& bank,
                             SamplerKind sampler, const RunConfig& cfg);

/// Stage I: sampler must be WRS or RUS.
Stage1Checkpoint train_stage1(const Dataset& data, SamplerKind sampler, const RunConfig& cfg);

/// Stage II: fits only the ensembler, with focal loss over the un-resampled
/// training set. The adapters are read-only inputs.
Stage2Checkpoint train_stage2(const Stage1Checkpoint& wrs, const Stage1Checkpoint& rus,
                              EnsembleMode mode, const Dataset& data, const RunConfig& cfg);

// ---------------------------------------------------------------------------
// Checkpoint directories: meta.json plus float64 TFAE parameter files whose
// SHA-256 digests are recorded in meta.json.
// ---------------------------------------------------------------------------

/// In-memory serialization: file name -> bytes, in a fixed order.
std::vector<std::pair<std::string, std::string>> serialize(const Stage1Checkpoint& ckpt);
std::vector<std::pair<std::string, std::string>> serialize(const Stage2Checkpoint& ckpt);

/// Digest over every member file, in serialization order.
std::string content_hash(const Stage1Checkpoint& ckpt);
std::string checkpoint_dir_hash(const std::filesystem::path& dir);

void save_checkpoint(const std::filesystem::path& dir, const Stage1Checkpoint& ckpt);
/// Reference paths are written relative to `dir`.
void save_checkpoint(const std::filesystem::path& dir, const Stage2Checkpoint& ckpt);

Stage1Checkpoint load_stage1_checkpoint(const std::filesystem::path& dir);
Stage2Checkpoint load_stage2_checkpoint(const std::filesystem::path& dir);
/// Loads a stage-2 checkpoint and both referenced stage-1 checkpoints,
/// verifying their content hashes.
Stage2Bundle load_stage2_bundle(const std::filesystem::path& dir);

/// Reads the "kind" field of a checkpoint directory ("stage1" or "stage2").
std::string checkpoint_kind(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Prediction and evaluation
// ---------------------------------------------------------------------------

std::vector<Label> predict_zero_shot(const PromptBank& bank, const Matrix& features,
                                     const HeadConfig& head);
std::vector<Label> predict_stage1(const Stage1Checkpoint& ckpt, const PromptBank& bank,
                                  const Matrix& features);
std::vector<Label> predict_stage2(const Stage2Checkpoint& ckpt, const AdapterParams& wrs,
                                  const AdapterParams& rus, const PromptBank& bank,
                                  const Matrix& features);
std::vector<Label> predict_probe(const LinearProbe& probe, const Matrix& features);

EvalReport evaluate(const std::vector<Label>& preds, const EmbeddingSet& test,
                    const DatasetManifest& manifest);

/// Linear probe on the raw training embeddings with the stage-I budget.
LinearProbe train_probe(const Dataset& data, const RunConfig& cfg);

void save_probe(const std::filesystem::path& dir, const LinearProbe& probe, const RunConfig& cfg);
LinearProbe load_probe(const std::filesystem::path& dir);

}  // namespace tfalt
