// tfalt: command-line driver for the two-stage long-tailed adapter pipeline.

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "tfalt/gradcheck.hpp"
#include "tfalt/pipeline.hpp"

namespace fs = std::filesystem;
using namespace tfalt;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitGradcheck = 4;

// Binds every RunConfig field to a flag. Values from --config are applied
// first; flags given on the command line override them.
struct RunFlags {
  RunConfig defaults;
  RunConfig values;
  std::string config_path;
  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> bindings;

  template <typename T>
  void bind(CLI::App* app, const std::string& name, T& slot, T RunConfig::*member,
            const std::string& help) {
    auto* opt = app->add_option(name, slot, help)->capture_default_str();
    bindings.emplace_back(opt, [&slot, member](RunConfig& c) { c.*member = slot; });
  }

  void attach(CLI::App* app) {
    values = defaults;
    app->add_option("--config", config_path, "Run config document (JSON); flags override it")
        ->check(CLI::ExistingFile);
    bind(app, "--batch-size", values.batch_size, &RunConfig::batch_size, "Mini-batch size");
    bind(app, "--epochs-stage1", values.epochs_stage1, &RunConfig::epochs_stage1, "Stage-I epochs");
    bind(app, "--epochs-stage2", values.epochs_stage2, &RunConfig::epochs_stage2, "Stage-II epochs");
    bind_sgd(app, "--lr", values.sgd.lr0, &SgdHyper::lr0, "Initial learning rate");
    bind_sgd(app, "--momentum", values.sgd.momentum, &SgdHyper::momentum, "SGD momentum");
    bind_sgd(app, "--weight-decay", values.sgd.weight_decay, &SgdHyper::weight_decay, "Coupled L2 weight decay");
    bind_sgd(app, "--eta-min", values.sgd.eta_min, &SgdHyper::eta_min, "Cosine schedule floor");
    auto* per_batch = app->add_flag("--lr-per-batch", values.lr_per_batch,
                                    "Step the cosine schedule per batch instead of per epoch");
    bindings.emplace_back(per_batch, [this](RunConfig& c) { c.lr_per_batch = values.lr_per_batch; });
    auto* tau = app->add_option("--tau", values.head.tau, "Softmax temperature")->capture_default_str();
    bindings.emplace_back(tau, [this](RunConfig& c) { c.head.tau = values.head.tau; });
    bind(app, "--gamma", values.gamma, &RunConfig::gamma, "Focal-loss gamma (stage II)");
    bind(app, "--seed", values.seed, &RunConfig::seed, "Root seed for sampler/init/shuffle streams");
  }

  void bind_sgd(CLI::App* app, const std::string& name, double& slot, double SgdHyper::*member,
                const std::string& help) {
    auto* opt = app->add_option(name, slot, help)->capture_default_str();
    bindings.emplace_back(opt, [&slot, member](RunConfig& c) { c.sgd.*member = slot; });
  }

  RunConfig resolve() const {
    RunConfig cfg = defaults;
    if (!config_path.empty()) cfg = run_config_from_json(read_file_bytes(config_path), defaults);
    for (const auto& [opt, apply] : bindings) {
      if (opt->count() > 0) apply(cfg);
    }
    cfg.validate();
    return cfg;
  }
};

void write_snapshot(const fs::path& path, const std::string& text) {
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  write_file_bytes(path, text);
}

std::string relative_to(const fs::path& target, const fs::path& base) {
  return fs::weakly_canonical(fs::absolute(target))
      .lexically_relative(fs::weakly_canonical(fs::absolute(base)))
      .generic_string();
}

void print_counts(const DatasetManifest& m, const EmbeddingSet& test) {
  const auto subsets = assign_subsets(m.train_counts(), m.thresholds);
  const auto test_counts = class_counts(test.labels, m.num_classes());
  std::cout << std::left << std::setw(8) << "class" << std::setw(16) << "name" << std::setw(8)
            << "train" << std::setw(8) << "test" << "subset\n";
  for (std::size_t c = 0; c < m.num_classes(); ++c) {
    std::cout << std::left << std::setw(8) << c << std::setw(16) << m.classes[c].name << std::setw(8)
              << m.classes[c].train_count << std::setw(8) << test_counts[c] << to_string(subsets[c])
              << "\n";
  }
}

void print_report(const EvalReport& r) {
  auto opt = [](const std::optional<double>& v) {
    std::ostringstream s;
    if (v) s << *v; else s << "n/a";
    return s.str();
  };
  std::cout << "overall_acc=" << r.overall_acc << " macro_f1=" << r.macro_f1
            << " many=" << opt(r.subset_acc.many) << " medium=" << opt(r.subset_acc.medium)
            << " few=" << opt(r.subset_acc.few) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Text-anchored residual adapters for long-tailed classification on precomputed embeddings"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate the synthetic long-tailed benchmark");
  std::string synth_config, synth_out;
  synth->add_option("--config", synth_config, "Synth config document (JSON); flags override it")
      ->check(CLI::ExistingFile);
  synth->add_option("--out", synth_out, "Output dataset directory")->required();
  std::vector<std::pair<CLI::Option*, std::function<void(SynthConfig&)>>> synth_bind;
  SynthConfig sv;
  auto sbind = [&](const std::string& name, auto& slot, auto apply, const std::string& help) {
    auto* opt = synth->add_option(name, slot, help)->capture_default_str();
    synth_bind.emplace_back(opt, apply);
  };
  sbind("--num-classes", sv.num_classes, [&](SynthConfig& c) { c.num_classes = sv.num_classes; }, "Number of classes C");
  sbind("--dim", sv.dim, [&](SynthConfig& c) { c.dim = sv.dim; }, "Embedding dimension d (>= C)");
  sbind("--head-count", sv.head_count, [&](SynthConfig& c) { c.head_count = sv.head_count; }, "Train samples of class 0");
  sbind("--tail-count", sv.tail_count, [&](SynthConfig& c) { c.tail_count = sv.tail_count; }, "Train samples of the last class");
  sbind("--noise", sv.noise_sigma, [&](SynthConfig& c) { c.noise_sigma = sv.noise_sigma; }, "Per-dimension noise sigma");
  sbind("--test-per-class", sv.test_per_class, [&](SynthConfig& c) { c.test_per_class = sv.test_per_class; }, "Balanced test samples per class");
  sbind("--distortion-seed", sv.distortion_seed, [&](SynthConfig& c) { c.distortion_seed = sv.distortion_seed; }, "Seed for anchors and distortion");
  sbind("--sample-seed", sv.sample_seed, [&](SynthConfig& c) { c.sample_seed = sv.sample_seed; }, "Seed for sample noise");
  sbind("--many-min", sv.thresholds.many_min, [&](SynthConfig& c) { c.thresholds.many_min = sv.thresholds.many_min; }, "Train count at or above which a class is 'many'");
  sbind("--few-max", sv.thresholds.few_max, [&](SynthConfig& c) { c.thresholds.few_max = sv.thresholds.few_max; }, "Train count at or below which a class is 'few'");
  sbind("--data-type", sv.data_type, [&](SynthConfig& c) { c.data_type = sv.data_type; }, "Data type used in prompts");

  // stage1
  auto* stage1 = app.add_subcommand("stage1", "Train one residual adapter on a re-balanced stream");
  RunFlags s1flags;
  std::string s1_manifest, s1_sampler, s1_out;
  stage1->add_option("--manifest", s1_manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  stage1->add_option("--sampler", s1_sampler, "Re-balancing sampler")->required()->check(CLI::IsMember({"wrs", "rus"}));
  stage1->add_option("--out", s1_out, "Checkpoint directory")->required();
  s1flags.attach(stage1);

  // stage2
  auto* stage2 = app.add_subcommand("stage2", "Fit the ensembler over two frozen stage-1 adapters");
  RunFlags s2flags;
  std::string s2_manifest, s2_wrs, s2_rus, s2_mode, s2_out;
  stage2->add_option("--manifest", s2_manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  stage2->add_option("--wrs", s2_wrs, "Stage-1 checkpoint trained with WRS")->required();
  stage2->add_option("--rus", s2_rus, "Stage-1 checkpoint trained with RUS")->required();
  stage2->add_option("--mode", s2_mode, "Ensemble level")->required()->check(CLI::IsMember({"logit", "feature"}));
  stage2->add_option("--out", s2_out, "Checkpoint directory")->required();
  s2flags.attach(stage2);

  // probe
  auto* probe = app.add_subcommand("probe", "Train the linear-probe baseline on raw embeddings");
  RunFlags pflags;
  std::string p_manifest, p_out;
  probe->add_option("--manifest", p_manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  probe->add_option("--out", p_out, "Checkpoint directory")->required();
  pflags.attach(probe);

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a model on the balanced test set");
  std::string e_manifest, e_model, e_ckpt, e_out;
  double e_tau = HeadConfig{}.tau;
  eval->add_option("--manifest", e_manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  eval->add_option("--model", e_model, "Model kind")->required()->check(CLI::IsMember({"zero-shot", "probe", "stage1", "stage2"}));
  eval->add_option("--checkpoint", e_ckpt, "Checkpoint directory (probe/stage1/stage2)");
  eval->add_option("--tau", e_tau, "Temperature for zero-shot evaluation")->capture_default_str();
  eval->add_option("--out", e_out, "Report document path")->required();

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "Compare analytic gradients with central finite differences");
  GradcheckConfig gc;
  gradcheck->add_option("--trials", gc.trials, "Random instances")->capture_default_str();
  gradcheck->add_option("--step", gc.step, "Finite-difference step")->capture_default_str();
  gradcheck->add_option("--tolerance", gc.tolerance, "Max relative error")->capture_default_str();
  gradcheck->add_option("--tau", gc.tau, "Temperature of the random instances")->capture_default_str();
  gradcheck->add_option("--gamma", gc.gamma, "Focal gamma for stage II")->capture_default_str();
  gradcheck->add_option("--seed", gc.seed, "Seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (*synth) {
      SynthConfig cfg;
      if (!synth_config.empty()) cfg = synth_config_from_json(read_file_bytes(synth_config));
      for (const auto& [opt, apply] : synth_bind) {
        if (opt->count() > 0) apply(cfg);
      }
      const auto ds = synth_generate(cfg);
      write_dataset(synth_out, ds);
      write_snapshot(fs::path(synth_out) / "config.json", to_json(cfg));
      print_counts(ds.manifest, ds.test);
      std::cout << "wrote " << (fs::path(synth_out) / "manifest.json").string() << "\n";
    } else if (*stage1) {
      const auto cfg = s1flags.resolve();
      const auto data = load_dataset(s1_manifest);
      const auto ckpt = train_stage1(data, parse_sampler_kind(s1_sampler), cfg);
      save_checkpoint(s1_out, ckpt);
      write_snapshot(fs::path(s1_out) / "config.json", to_json(cfg));
      std::cout << "stage1 " << s1_sampler << " final_loss="
                << (ckpt.meta.final_loss ? *ckpt.meta.final_loss : 0.0)
                << " lambda=" << ckpt.adapter.lambda << "\n";
    } else if (*stage2) {
      const auto cfg = s2flags.resolve();
      const auto data = load_dataset(s2_manifest);
      const auto wrs = load_stage1_checkpoint(s2_wrs);
      const auto rus = load_stage1_checkpoint(s2_rus);
      auto ckpt = train_stage2(wrs, rus, parse_ensemble_mode(s2_mode), data, cfg);
      ckpt.wrs.path = relative_to(s2_wrs, s2_out);
      ckpt.rus.path = relative_to(s2_rus, s2_out);
      if (checkpoint_dir_hash(s2_wrs) != ckpt.wrs.sha256 || checkpoint_dir_hash(s2_rus) != ckpt.rus.sha256) {
        fail(Errc::hash_mismatch, "stage-1 checkpoint files changed during stage 2");
      }
      save_checkpoint(s2_out, ckpt);
      write_snapshot(fs::path(s2_out) / "config.json", to_json(cfg));
      std::cout << "stage2 " << s2_mode << " final_loss="
                << (ckpt.meta.final_loss ? *ckpt.meta.final_loss : 0.0) << "\n";
    } else if (*probe) {
      const auto cfg = pflags.resolve();
      const auto data = load_dataset(p_manifest);
      const auto lp = train_probe(data, cfg);
      save_probe(p_out, lp, cfg);
      write_snapshot(fs::path(p_out) / "config.json", to_json(cfg));
      std::cout << "probe trained on " << data.train.size() << " samples\n";
    } else if (*eval) {
      const auto data = load_dataset(e_manifest);
      if (e_model != "zero-shot" && e_ckpt.empty()) {
        fail(Errc::invalid_argument, "--checkpoint is required for --model " + e_model);
      }
      std::vector<Label> preds;
      if (e_model == "zero-shot") {
        const HeadConfig head{e_tau};
        head.validate();
        preds = predict_zero_shot(data.bank, data.test.features, head);
      } else if (e_model == "probe") {
        preds = predict_probe(load_probe(e_ckpt), data.test.features);
      } else if (e_model == "stage1") {
        preds = predict_stage1(load_stage1_checkpoint(e_ckpt), data.bank, data.test.features);
      } else {
        const auto bundle = load_stage2_bundle(e_ckpt);
        preds = predict_stage2(bundle.checkpoint, bundle.wrs.adapter, bundle.rus.adapter, data.bank,
                               data.test.features);
      }
      const auto rep = evaluate(preds, data.test, data.manifest);
      write_snapshot(e_out, to_json(rep));
      nlohmann::ordered_json snap{{"manifest", e_manifest}, {"model", e_model},
                                  {"checkpoint", e_ckpt}, {"tau", e_tau}};
      write_snapshot(e_out + ".config.json", snap.dump(2) + "\n");
      print_report(rep);
    } else if (*gradcheck) {
      const auto res = run_gradcheck(gc);
      std::cout << (res.pass ? "PASS" : "FAIL") << " max_rel_err=" << res.max_rel_err
                << " entries=" << res.entries_checked << " (stage1 A " << res.stage1_A
                << ", lambda " << res.stage1_lambda << "; stage2 logit " << res.stage2_logit
                << ", feature " << res.stage2_feature << ")\n";
      return res.pass ? 0 : kExitGradcheck;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return e.code() == Errc::divergence ? kExitDivergence : kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
