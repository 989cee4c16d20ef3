#include "tfalt/pipeline.hpp"

#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "tfalt/hash.hpp"

namespace tfalt {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

void RunConfig::validate() const {
  if (batch_size < 1) fail(Errc::invalid_config, "batch_size must be >= 1");
  SgdHyper h = sgd;
  h.total_steps = 1;
  h.validate();
  head.validate();
  if (!(gamma >= 0.0)) fail(Errc::invalid_config, "gamma must be >= 0");
  if (!(adapter_init_std >= 0.0)) fail(Errc::invalid_config, "adapter_init_std must be >= 0");
}

std::string to_json(const RunConfig& cfg) {
  json doc;
  doc["batch_size"] = cfg.batch_size;
  doc["epochs_stage1"] = cfg.epochs_stage1;
  doc["epochs_stage2"] = cfg.epochs_stage2;
  doc["lr"] = cfg.sgd.lr0;
  doc["momentum"] = cfg.sgd.momentum;
  doc["weight_decay"] = cfg.sgd.weight_decay;
  doc["eta_min"] = cfg.sgd.eta_min;
  doc["lr_per_batch"] = cfg.lr_per_batch;
  doc["tau"] = cfg.head.tau;
  doc["gamma"] = cfg.gamma;
  doc["adapter_init_std"] = cfg.adapter_init_std;
  doc["seed"] = cfg.seed;
  return doc.dump(2) + "\n";
}

RunConfig run_config_from_json(const std::string& text, RunConfig cfg) {
  try {
    const auto doc = json::parse(text);
    for (const auto& [key, v] : doc.items()) {
      if (key == "batch_size") cfg.batch_size = v.get<std::size_t>();
      else if (key == "epochs_stage1") cfg.epochs_stage1 = v.get<std::size_t>();
      else if (key == "epochs_stage2") cfg.epochs_stage2 = v.get<std::size_t>();
      else if (key == "lr") cfg.sgd.lr0 = v.get<double>();
      else if (key == "momentum") cfg.sgd.momentum = v.get<double>();
      else if (key == "weight_decay") cfg.sgd.weight_decay = v.get<double>();
      else if (key == "eta_min") cfg.sgd.eta_min = v.get<double>();
      else if (key == "lr_per_batch") cfg.lr_per_batch = v.get<bool>();
      else if (key == "tau") cfg.head.tau = v.get<double>();
      else if (key == "gamma") cfg.gamma = v.get<double>();
      else if (key == "adapter_init_std") cfg.adapter_init_std = v.get<double>();
      else if (key == "seed") cfg.seed = v.get<std::uint64_t>();
      else fail(Errc::invalid_config, "run config: unknown key '" + key + "'");
    }
  } catch (const json::exception& e) {
    fail(Errc::invalid_config, std::string("run config: ") + e.what());
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Training loops
// ---------------------------------------------------------------------------

namespace {

std::size_t batch_count(std::size_t n, std::size_t batch) { return (n + batch - 1) / batch; }

SgdHyper stage_schedule(const RunConfig& cfg, std::size_t epochs, std::size_t batches_per_epoch) {
  SgdHyper h = cfg.sgd;
  h.total_steps = std::max<std::size_t>(1, cfg.lr_per_batch ? epochs * batches_per_epoch : epochs);
  h.validate();
  return h;
}

void check_epoch_loss(double loss, std::size_t epoch, const char* stage) {
  if (!std::isfinite(loss) || loss > kDivergenceLoss) {
    fail(Errc::divergence, std::string(stage) + " diverged at epoch " + std::to_string(epoch) +
                               " (loss " + std::to_string(loss) + ")");
  }
}

// A collapsed or overflowing head after an update is reported as divergence.
template <typename F>
auto guarded_batch(std::size_t step, std::size_t epoch, const char* stage, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    if (step == 0 || e.code() != Errc::degenerate_vector) throw;
    fail(Errc::divergence, std::string(stage) + " diverged at epoch " + std::to_string(epoch) +
                               " (" + e.what() + ")");
  }
}

std::string stream_name(const char* purpose, SamplerKind kind) {
  return std::string(purpose) + "/" + to_string(kind);
}

}  // namespace

Stage1Checkpoint fit_adapter(const EmbeddingSet& train, const PromptBank& bank,
                             SamplerKind sampler, const RunConfig& cfg) {
  cfg.validate();
  if (!train.has_labels()) fail(Errc::invalid_dataset, "stage 1 needs a labeled training set");
  if (train.dim() != bank.dim()) {
    fail(Errc::dimension_mismatch, "training features have dim " + std::to_string(train.dim()) +
                                       " but prompt bank has dim " + std::to_string(bank.dim()));
  }
  const auto C = static_cast<std::size_t>(bank.num_classes());
  const auto N = static_cast<std::size_t>(train.size());

  Rng init_rng = Rng::stream(cfg.seed, stream_name("init", sampler));
  Rng shuffle_rng = Rng::stream(cfg.seed, stream_name("shuffle", sampler));
  const auto sampler_seed = Rng::stream(cfg.seed, stream_name("sampler", sampler)).next_u64();

  Stage1Checkpoint ckpt;
  ckpt.sampler = sampler;
  ckpt.head = cfg.head;
  ckpt.meta.epochs = cfg.epochs_stage1;
  ckpt.meta.seed = cfg.seed;
  ckpt.adapter = init_adapter(train.dim(), init_rng, cfg.adapter_init_std);

  std::optional<WrsSampler> wrs;
  IndexList pool;
  switch (sampler) {
    case SamplerKind::wrs:
      wrs.emplace(train.labels, C, sampler_seed);
      break;
    case SamplerKind::rus:
      pool = rus_select(train, C, sampler_seed);
      break;
    case SamplerKind::none:
      class_counts(train.labels, C);  // range check
      pool.resize(N);
      std::iota(pool.begin(), pool.end(), 0);
      break;
  }
  const std::size_t epoch_len = wrs ? N : pool.size();
  const auto hyper = stage_schedule(cfg, cfg.epochs_stage1, batch_count(epoch_len, cfg.batch_size));

  SgdState state;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs_stage1; ++epoch) {
    IndexList order;
    if (wrs) {
      order = wrs->draw(N);
    } else {
      order = pool;
      shuffle_rng.shuffle(std::span(order));
    }
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const auto end = std::min(order.size(), start + cfg.batch_size);
      const std::span<const std::size_t> rows(order.data() + start, end - start);
      auto res = guarded_batch(step, epoch, "stage 1", [&] {
        return stage1_batch_backward(ckpt.adapter, bank, train.features, train.labels, rows, cfg.head);
      });
      loss_sum += res.loss * static_cast<double>(rows.size());
      check_epoch_loss(res.loss, epoch, "stage 1");
      const double lr = cosine_lr(cfg.lr_per_batch ? step : epoch, hyper);
      const std::span<double> params[] = {param_span(ckpt.adapter.A),
                                          std::span<double>(&ckpt.adapter.lambda, 1)};
      const std::span<const double> grads[] = {grad_span(res.grad.dA),
                                               std::span<const double>(&res.grad.dlambda, 1)};
      sgd_step(params, grads, state, hyper, lr);
      ++step;
    }
    const double epoch_loss = loss_sum / static_cast<double>(order.size());
    check_epoch_loss(epoch_loss, epoch, "stage 1");
    if (!all_finite(ckpt.adapter.A) || !std::isfinite(ckpt.adapter.lambda)) {
      fail(Errc::divergence, "stage 1 diverged at epoch " + std::to_string(epoch) +
                                 " (non-finite parameters)");
    }
    ckpt.meta.loss_history.push_back(epoch_loss);
  }
  if (!ckpt.meta.loss_history.empty()) ckpt.meta.final_loss = ckpt.meta.loss_history.back();
  return ckpt;
}

Stage1Checkpoint train_stage1(const Dataset& data, SamplerKind sampler, const RunConfig& cfg) {
  if (sampler == SamplerKind::none) {
    fail(Errc::configuration, "stage 1 requires a re-balancing sampler (wrs or rus)");
  }
  return fit_adapter(data.train, data.bank, sampler, cfg);
}

Stage2Checkpoint train_stage2(const Stage1Checkpoint& wrs, const Stage1Checkpoint& rus,
                              EnsembleMode mode, const Dataset& data, const RunConfig& cfg) {
  cfg.validate();
  if (wrs.sampler != SamplerKind::wrs || rus.sampler != SamplerKind::rus) {
    fail(Errc::configuration, std::string("stage 2 needs one WRS and one RUS checkpoint, got ") +
                                  to_string(wrs.sampler) + " and " + to_string(rus.sampler));
  }
  if (wrs.adapter.dim() != rus.adapter.dim() || wrs.adapter.dim() != data.bank.dim()) {
    fail(Errc::configuration, "stage 2: adapter dims differ from each other or from the dataset");
  }
  if (wrs.head.tau != rus.head.tau) {
    fail(Errc::configuration, "stage 2: the two stage-1 checkpoints use different tau");
  }
  const std::string hash_w = content_hash(wrs);
  const std::string hash_r = content_hash(rus);

  const auto& train = data.train;
  const auto& bank = data.bank;
  RunConfig run = cfg;
  run.head = wrs.head;  // tau stays frozen with the adapters

  Stage2Checkpoint ckpt;
  ckpt.gamma = cfg.gamma;
  ckpt.head = run.head;
  ckpt.wrs.sha256 = hash_w;
  ckpt.rus.sha256 = hash_r;
  ckpt.meta.epochs = cfg.epochs_stage2;
  ckpt.meta.seed = cfg.seed;
  const Eigen::Index width = mode == EnsembleMode::logit_wise ? bank.num_classes() : bank.dim();
  ckpt.ensembler = EnsemblerParams::averaging(mode, width);

  const BranchBatch frozen = branch_outputs_batch(wrs.adapter, rus.adapter, bank, train.features, run.head);

  Rng shuffle_rng = Rng::stream(cfg.seed, std::string("shuffle/stage2/") + to_string(mode));
  IndexList order(static_cast<std::size_t>(train.size()));
  std::iota(order.begin(), order.end(), 0);
  const auto hyper = stage_schedule(run, cfg.epochs_stage2, batch_count(order.size(), cfg.batch_size));
  SgdState state;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs_stage2; ++epoch) {
    shuffle_rng.shuffle(std::span(order));
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const auto end = std::min(order.size(), start + cfg.batch_size);
      const std::span<const std::size_t> rows(order.data() + start, end - start);
      auto res = guarded_batch(step, epoch, "stage 2", [&] {
        return stage2_batch_backward(ckpt.ensembler, frozen, bank, train.labels, rows, run.head,
                                     cfg.gamma);
      });
      loss_sum += res.loss * static_cast<double>(rows.size());
      check_epoch_loss(res.loss, epoch, "stage 2");
      const double lr = cosine_lr(cfg.lr_per_batch ? step : epoch, hyper);
      const std::span<double> params[] = {param_span(ckpt.ensembler.K), param_span(ckpt.ensembler.bias)};
      const std::span<const double> grads[] = {grad_span(res.grad.dK), grad_span(res.grad.dbias)};
      sgd_step(params, grads, state, hyper, lr);
      ++step;
    }
    const double epoch_loss = loss_sum / static_cast<double>(order.size());
    check_epoch_loss(epoch_loss, epoch, "stage 2");
    if (!all_finite(ckpt.ensembler.K) || !all_finite(ckpt.ensembler.bias)) {
      fail(Errc::divergence, "stage 2 diverged at epoch " + std::to_string(epoch) +
                                 " (non-finite parameters)");
    }
    ckpt.meta.loss_history.push_back(epoch_loss);
  }
  if (!ckpt.meta.loss_history.empty()) ckpt.meta.final_loss = ckpt.meta.loss_history.back();

  if (content_hash(wrs) != hash_w || content_hash(rus) != hash_r) {
    fail(Errc::hash_mismatch, "stage 2 modified a frozen stage-1 adapter");
  }
  return ckpt;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

constexpr const char* kMetaFile = "meta.json";
constexpr const char* kAdapterFile = "adapter_A.tfae";
constexpr const char* kKFile = "ensembler_K.tfae";
constexpr const char* kBiasFile = "ensembler_bias.tfae";
constexpr int kCheckpointFormat = 1;

json training_json(const TrainingMeta& m) {
  json t;
  t["epochs"] = m.epochs;
  t["seed"] = m.seed;
  t["final_loss"] = m.final_loss ? json(*m.final_loss) : json(nullptr);
  t["loss_history"] = m.loss_history;
  return t;
}

TrainingMeta training_from_json(const json& t) {
  TrainingMeta m;
  m.epochs = t.at("epochs").get<std::size_t>();
  m.seed = t.at("seed").get<std::uint64_t>();
  if (!t.at("final_loss").is_null()) m.final_loss = t.at("final_loss").get<double>();
  m.loss_history = t.at("loss_history").get<std::vector<double>>();
  return m;
}

using MemberList = std::vector<std::pair<std::string, std::string>>;

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

json read_meta(const fs::path& dir) {
  const auto path = dir / kMetaFile;
  if (!fs::exists(path)) fail(Errc::missing_file, "checkpoint " + dir.string() + " has no " + kMetaFile);
  try {
    return json::parse(read_file_bytes(path));
  } catch (const json::parse_error& e) {
    fail(Errc::invalid_dataset, path.string() + ": " + e.what());
  }
}

// Reads a member file and checks it against the digest in meta.json.
std::string read_member(const fs::path& dir, const json& meta, const std::string& name) {
  const auto path = dir / name;
  if (!fs::exists(path)) fail(Errc::missing_file, "checkpoint member " + path.string() + " is missing");
  std::string bytes = read_file_bytes(path);
  const auto& files = meta.at("files");
  if (!files.contains(name)) fail(Errc::invalid_dataset, "meta.json does not list " + name);
  if (sha256_hex(bytes) != files.at(name).get<std::string>()) {
    fail(Errc::hash_mismatch, path.string() + " does not match its recorded digest");
  }
  return bytes;
}

Matrix decode_matrix64(const std::string& bytes, const std::string& origin) {
  auto block = decode_tfae(bytes, origin);
  if (block.header.dtype != Dtype::float64) {
    fail(Errc::dtype_mismatch, origin + ": expected float64 payload (dtype 1)");
  }
  return std::move(block.data);
}

void write_members(const fs::path& dir, const MemberList& members) {
  fs::create_directories(dir);
  for (const auto& [name, bytes] : members) write_file_bytes(dir / name, bytes);
}

template <typename F>
auto parse_meta(const fs::path& dir, F&& body) {
  try {
    return body();
  } catch (const json::exception& e) {
    fail(Errc::invalid_dataset, (dir / kMetaFile).string() + ": " + e.what());
  }
}

}  // namespace

MemberList serialize(const Stage1Checkpoint& ckpt) {
  std::string a_bytes = encode_tfae(ckpt.adapter.A, nullptr, Dtype::float64);
  json doc;
  doc["kind"] = "stage1";
  doc["format"] = kCheckpointFormat;
  doc["sampler"] = to_string(ckpt.sampler);
  doc["dim"] = ckpt.adapter.dim();
  doc["lambda"] = ckpt.adapter.lambda;
  doc["tau"] = ckpt.head.tau;
  doc["training"] = training_json(ckpt.meta);
  doc["files"] = {{kAdapterFile, sha256_hex(a_bytes)}};
  return {{kMetaFile, dump(doc)}, {kAdapterFile, std::move(a_bytes)}};
}

MemberList serialize(const Stage2Checkpoint& ckpt) {
  std::string k_bytes = encode_tfae(ckpt.ensembler.K, nullptr, Dtype::float64);
  const Matrix bias_row = ckpt.ensembler.bias.transpose();
  std::string b_bytes = encode_tfae(bias_row, nullptr, Dtype::float64);
  json doc;
  doc["kind"] = "stage2";
  doc["format"] = kCheckpointFormat;
  doc["mode"] = to_string(ckpt.ensembler.mode);
  doc["gamma"] = ckpt.gamma;
  doc["tau"] = ckpt.head.tau;
  doc["references"] = {{"wrs", {{"path", ckpt.wrs.path}, {"sha256", ckpt.wrs.sha256}}},
                       {"rus", {{"path", ckpt.rus.path}, {"sha256", ckpt.rus.sha256}}}};
  doc["training"] = training_json(ckpt.meta);
  doc["files"] = {{kKFile, sha256_hex(k_bytes)}, {kBiasFile, sha256_hex(b_bytes)}};
  return {{kMetaFile, dump(doc)}, {kKFile, std::move(k_bytes)}, {kBiasFile, std::move(b_bytes)}};
}

std::string content_hash(const Stage1Checkpoint& ckpt) {
  std::string all;
  for (const auto& [name, bytes] : serialize(ckpt)) all += bytes;
  return sha256_hex(all);
}

std::string checkpoint_dir_hash(const fs::path& dir) {
  const auto meta = read_meta(dir);
  std::string all = read_file_bytes(dir / kMetaFile);
  const auto kind = meta.value("kind", std::string());
  const std::vector<std::string> members =
      kind == "stage1" ? std::vector<std::string>{kAdapterFile}
                       : std::vector<std::string>{kKFile, kBiasFile};
  for (const auto& m : members) all += read_member(dir, meta, m);
  return sha256_hex(all);
}

void save_checkpoint(const fs::path& dir, const Stage1Checkpoint& ckpt) {
  write_members(dir, serialize(ckpt));
}

void save_checkpoint(const fs::path& dir, const Stage2Checkpoint& ckpt) {
  write_members(dir, serialize(ckpt));
}

std::string checkpoint_kind(const fs::path& dir) {
  const auto meta = read_meta(dir);
  return parse_meta(dir, [&] { return meta.at("kind").get<std::string>(); });
}

Stage1Checkpoint load_stage1_checkpoint(const fs::path& dir) {
  const auto meta = read_meta(dir);
  return parse_meta(dir, [&] {
    if (meta.at("kind").get<std::string>() != "stage1") {
      fail(Errc::configuration, dir.string() + " is not a stage-1 checkpoint");
    }
    Stage1Checkpoint ckpt;
    ckpt.sampler = parse_sampler_kind(meta.at("sampler").get<std::string>());
    if (ckpt.sampler == SamplerKind::none) {
      fail(Errc::invalid_dataset, dir.string() + ": stage-1 sampler must be wrs or rus");
    }
    ckpt.adapter.lambda = meta.at("lambda").get<double>();
    ckpt.head.tau = meta.at("tau").get<double>();
    ckpt.meta = training_from_json(meta.at("training"));
    ckpt.adapter.A = decode_matrix64(read_member(dir, meta, kAdapterFile), (dir / kAdapterFile).string());
    const auto d = meta.at("dim").get<Eigen::Index>();
    if (ckpt.adapter.A.rows() != d || ckpt.adapter.A.cols() != d) {
      fail(Errc::shape, dir.string() + ": adapter matrix is not " + std::to_string(d) + "x" + std::to_string(d));
    }
    return ckpt;
  });
}

Stage2Checkpoint load_stage2_checkpoint(const fs::path& dir) {
  const auto meta = read_meta(dir);
  return parse_meta(dir, [&] {
    if (meta.at("kind").get<std::string>() != "stage2") {
      fail(Errc::configuration, dir.string() + " is not a stage-2 checkpoint");
    }
    Stage2Checkpoint ckpt;
    ckpt.ensembler.mode = parse_ensemble_mode(meta.at("mode").get<std::string>());
    ckpt.gamma = meta.at("gamma").get<double>();
    ckpt.head.tau = meta.at("tau").get<double>();
    const auto& refs = meta.at("references");
    ckpt.wrs = {refs.at("wrs").at("path").get<std::string>(), refs.at("wrs").at("sha256").get<std::string>()};
    ckpt.rus = {refs.at("rus").at("path").get<std::string>(), refs.at("rus").at("sha256").get<std::string>()};
    ckpt.meta = training_from_json(meta.at("training"));
    ckpt.ensembler.K = decode_matrix64(read_member(dir, meta, kKFile), (dir / kKFile).string());
    const Matrix bias = decode_matrix64(read_member(dir, meta, kBiasFile), (dir / kBiasFile).string());
    if (bias.rows() != 1) fail(Errc::shape, dir.string() + ": bias must be stored as one row");
    ckpt.ensembler.bias = bias.row(0).transpose();
    const auto w = ckpt.ensembler.K.rows();
    if (ckpt.ensembler.K.cols() != 2 * w || ckpt.ensembler.bias.size() != w) {
      fail(Errc::shape, dir.string() + ": ensembler shapes are inconsistent");
    }
    return ckpt;
  });
}

Stage2Bundle load_stage2_bundle(const fs::path& dir) {
  Stage2Bundle bundle;
  bundle.checkpoint = load_stage2_checkpoint(dir);
  auto resolve = [&](const Stage1Ref& ref, const char* which) {
    if (ref.path.empty()) fail(Errc::dangling_reference, dir.string() + ": empty " + which + " reference");
    const fs::path p = fs::path(ref.path).is_absolute() ? fs::path(ref.path) : dir / ref.path;
    if (!fs::exists(p / kMetaFile)) {
      fail(Errc::dangling_reference, dir.string() + ": referenced " + which + " checkpoint " +
                                         p.string() + " does not exist");
    }
    if (checkpoint_dir_hash(p) != ref.sha256) {
      fail(Errc::hash_mismatch, dir.string() + ": " + which + " checkpoint " + p.string() +
                                    " does not match the recorded content hash");
    }
    return load_stage1_checkpoint(p);
  };
  bundle.wrs = resolve(bundle.checkpoint.wrs, "wrs");
  bundle.rus = resolve(bundle.checkpoint.rus, "rus");
  const auto& e = bundle.checkpoint.ensembler;
  const auto width = e.mode == EnsembleMode::logit_wise ? e.width() : bundle.wrs.adapter.dim();
  if (e.width() != width) fail(Errc::shape, dir.string() + ": ensembler width does not match the adapters");
  return bundle;
}

// ---------------------------------------------------------------------------
// Prediction
// ---------------------------------------------------------------------------

std::vector<Label> predict_zero_shot(const PromptBank& bank, const Matrix& features,
                                     const HeadConfig& head) {
  std::vector<Label> out(static_cast<std::size_t>(features.rows()));
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    out[static_cast<std::size_t>(i)] = static_cast<Label>(argmax(zero_shot_logits(bank, features.row(i).transpose(), head)));
  }
  return out;
}

std::vector<Label> predict_stage1(const Stage1Checkpoint& ckpt, const PromptBank& bank,
                                  const Matrix& features) {
  std::vector<Label> out(static_cast<std::size_t>(features.rows()));
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    out[static_cast<std::size_t>(i)] =
        static_cast<Label>(argmax(branch_logits(ckpt.adapter, bank, features.row(i).transpose(), ckpt.head)));
  }
  return out;
}

std::vector<Label> predict_stage2(const Stage2Checkpoint& ckpt, const AdapterParams& wrs,
                                  const AdapterParams& rus, const PromptBank& bank,
                                  const Matrix& features) {
  std::vector<Label> out(static_cast<std::size_t>(features.rows()));
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    const auto b = branch_outputs(wrs, rus, bank, Vector(features.row(i).transpose()), ckpt.head);
    out[static_cast<std::size_t>(i)] = static_cast<Label>(argmax(ensemble_logits(ckpt.ensembler, b, bank, ckpt.head)));
  }
  return out;
}

std::vector<Label> predict_probe(const LinearProbe& probe, const Matrix& features) {
  if (features.cols() != probe.W.cols()) {
    fail(Errc::dimension_mismatch, "probe expects dim " + std::to_string(probe.W.cols()));
  }
  std::vector<Label> out(static_cast<std::size_t>(features.rows()));
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    out[static_cast<std::size_t>(i)] = static_cast<Label>(argmax(probe.logits(features.row(i).transpose())));
  }
  return out;
}

EvalReport evaluate(const std::vector<Label>& preds, const EmbeddingSet& test,
                    const DatasetManifest& manifest) {
  const auto cm = confusion(preds, test.labels, manifest.num_classes());
  return report(cm, assign_subsets(manifest.train_counts(), manifest.thresholds));
}

LinearProbe train_probe(const Dataset& data, const RunConfig& cfg) {
  cfg.validate();
  ProbeConfig pc;
  pc.epochs = cfg.epochs_stage1;
  pc.batch_size = cfg.batch_size;
  pc.sgd = cfg.sgd;
  pc.seed = cfg.seed;
  return linear_probe_train(data.train, data.manifest.num_classes(), pc);
}

void save_probe(const fs::path& dir, const LinearProbe& probe, const RunConfig& cfg) {
  std::string w_bytes = encode_tfae(probe.W, nullptr, Dtype::float64);
  const Matrix b_row = probe.b.transpose();
  std::string b_bytes = encode_tfae(b_row, nullptr, Dtype::float64);
  json doc;
  doc["kind"] = "probe";
  doc["format"] = kCheckpointFormat;
  doc["epochs"] = cfg.epochs_stage1;
  doc["seed"] = cfg.seed;
  doc["files"] = {{"probe_W.tfae", sha256_hex(w_bytes)}, {"probe_b.tfae", sha256_hex(b_bytes)}};
  write_members(dir, {{kMetaFile, dump(doc)}, {"probe_W.tfae", std::move(w_bytes)},
                      {"probe_b.tfae", std::move(b_bytes)}});
}

LinearProbe load_probe(const fs::path& dir) {
  const auto meta = read_meta(dir);
  return parse_meta(dir, [&] {
    if (meta.at("kind").get<std::string>() != "probe") {
      fail(Errc::configuration, dir.string() + " is not a linear-probe checkpoint");
    }
    LinearProbe probe;
    probe.W = decode_matrix64(read_member(dir, meta, "probe_W.tfae"), (dir / "probe_W.tfae").string());
    const Matrix b = decode_matrix64(read_member(dir, meta, "probe_b.tfae"), (dir / "probe_b.tfae").string());
    if (b.rows() != 1 || b.cols() != probe.W.rows()) fail(Errc::shape, dir.string() + ": probe bias shape");
    probe.b = b.row(0).transpose();
    return probe;
  });
}

}  // namespace tfalt
