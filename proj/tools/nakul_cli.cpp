// Copyright 2026 The NAKUL Authors. Apache 2.0 License.
//
// nakul: data generation, training, evaluation and analysis dumps.
//
// Exit codes: 0 ok, 2 config or usage, 3 training abort, 4 artifact load or
// shape mismatch, 5 verification failure.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nakul/checkpoint.hpp"
#include "nakul/config.hpp"
#include "nakul/csv.hpp"
#include "nakul/data.hpp"
#include "nakul/dataset_io.hpp"
#include "nakul/errors.hpp"
#include "nakul/flops.hpp"
#include "nakul/gradcheck.hpp"
#include "nakul/metrics.hpp"
#include "nakul/model.hpp"
#include "nakul/train.hpp"

namespace fs = std::filesystem;
using namespace nakul;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitAbort = 3;
constexpr int kExitLoad = 4;
constexpr int kExitVerify = 5;

std::string num(double v) { return format_number(v); }

// Model plus the graph it runs on, restored from a checkpoint.
struct Loaded {
  std::unique_ptr<NakulModel> model;
  graph::ElectrodeGraph graph;
};

Loaded load_model(const std::string& ckpt, const std::string& config_path) {
  const NamedTensors state = load_tensors(ckpt);
  ModelConfig mc = config_from_state(state);
  Loaded out;
  out.model = std::make_unique<NakulModel>(mc, 0);
  load_state(*out.model, state);
  // The graph is not part of the checkpoint; it comes from --config when given.
  RunConfig rc;
  if (!config_path.empty()) rc = load_config(config_path);
  if (rc.data.channels != mc.channels) {
    if (!config_path.empty()) {
      throw ShapeError("config has " + std::to_string(rc.data.channels) + " channels, checkpoint has " +
                       std::to_string(mc.channels));
    }
    rc.data.channels = mc.channels;
  }
  out.graph = make_graph(rc);
  return out;
}

void check_data(const Dataset& data, const ModelConfig& mc) {
  if (data.channels != mc.channels || data.length != mc.length) {
    throw ShapeError("dataset is " + std::to_string(data.channels) + "x" + std::to_string(data.length) +
                     ", model expects " + std::to_string(mc.channels) + "x" + std::to_string(mc.length));
  }
  if (data.classes > mc.classes) {
    throw ShapeError("dataset has " + std::to_string(data.classes) + " classes, model has " +
                     std::to_string(mc.classes));
  }
}

std::vector<std::size_t> all_indices(const Dataset& data) {
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

// Runs inference in batches; calls visit(first_index, logits, trace).
template <class Visit>
void for_batches(NakulModel& model, const graph::ElectrodeGraph& g, const Dataset& data, bool traced,
                 Visit visit) {
  const std::size_t bs = 32;
  for (std::size_t i = 0; i < data.size(); i += bs) {
    std::vector<std::size_t> idx;
    for (std::size_t j = i; j < std::min(data.size(), i + bs); ++j) idx.push_back(j);
    ModelTrace trace;
    const Tensor logits = model.logits(data.batch(idx), g, traced ? &trace : nullptr);
    visit(i, logits, trace);
  }
}

int cmd_gen_data(const std::string& config, const std::string& out, std::uint64_t seed) {
  RunConfig rc = load_config(config);
  const Dataset data = generate_synthetic(rc.data, seed);
  std::ostringstream manifest;
  manifest << to_text(rc) << "seed=" << seed << "\n";
  write_dataset(out, data, manifest.str());
  std::cout << "wrote " << data.size() << " trials to " << out << "\n";
  return 0;
}

int cmd_train(const std::string& config, const std::string& data_dir, const std::string& out,
              std::optional<std::size_t> epochs, std::optional<std::uint64_t> seed) {
  RunConfig rc = load_config(config);
  if (epochs) rc.train.epochs = *epochs;
  if (seed) rc.train.seed = *seed;
  rc.finalize();
  const Dataset data = read_dataset(data_dir);
  if (data.channels != rc.data.channels) throw ConfigError("data.channels", "does not match the dataset");
  if (data.length != rc.data.length) throw ConfigError("data.length", "does not match the dataset");
  if (data.classes != rc.data.classes) throw ConfigError("data.classes", "does not match the dataset");
  if (data.rate != rc.data.rate) throw ConfigError("data.rate", "does not match the dataset");

  const graph::ElectrodeGraph g = make_graph(rc);
  NakulModel model(rc.model, rc.train.seed);
  const Split split = stratified_split(data, rc.train.val_fraction, rc.train.seed);
  TrainHooks hooks;
  hooks.on_epoch = [](const EpochMetrics& m) {
    std::cerr << "epoch " << m.epoch << " train_loss " << num(m.train_loss) << " val_loss " << num(m.val_loss)
              << " val_acc " << num(m.val_acc) << "\n";
  };
  const TrainResult result = train(model, g, data, split, rc.train, hooks);

  const fs::path ckpt(out);
  if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
  save_checkpoint(out, model);
  std::ofstream metrics(ckpt.parent_path() / "metrics.csv", std::ios::binary);
  write_metrics_csv(metrics, result.history);
  if (!metrics) throw LoadError("cannot write metrics.csv next to " + out);
  std::cout << "best_epoch=" << result.best_epoch << " best_val_acc=" << num(result.best_val_acc)
            << " early_stopped=" << (result.early_stopped ? 1 : 0) << " skipped_steps=" << result.skipped_steps
            << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& data_dir, const std::string& config) {
  Loaded m = load_model(ckpt, config);
  const Dataset data = read_dataset(data_dir);
  check_data(data, m.model->config());
  std::vector<int> predicted;
  for_batches(*m.model, m.graph, data, false, [&](std::size_t, const Tensor& logits, const ModelTrace&) {
    const std::size_t B = logits.dim(0), n = logits.dim(1);
    for (std::size_t b = 0; b < B; ++b) {
      const double* row = logits.ptr() + b * n;
      predicted.push_back(int(std::max_element(row, row + n) - row));
    }
  });
  const std::vector<int> truth = data.labels(all_indices(data));
  const std::size_t classes = m.model->config().classes;
  const ConfusionMatrix cm = confusion_matrix(predicted, truth, classes);
  const std::vector<double> f1 = per_class_f1(cm);
  std::cout << "metric,value\n";
  std::cout << "accuracy," << num(accuracy(predicted, truth)) << "\n";
  std::cout << "macro_f1," << num(macro_f1(cm)) << "\n";
  for (std::size_t c = 0; c < classes; ++c) std::cout << "f1_class_" << c << "," << num(f1[c]) << "\n";
  std::cout << "\ntrue\\predicted";
  for (std::size_t c = 0; c < classes; ++c) std::cout << "," << c;
  std::cout << "\n";
  for (std::size_t r = 0; r < classes; ++r) {
    std::cout << r;
    for (std::size_t c = 0; c < classes; ++c) std::cout << "," << cm[r][c];
    std::cout << "\n";
  }
  return 0;
}

int cmd_grad_check(const std::string& config, std::size_t samples, std::uint64_t seed, const std::string& corrupt) {
  RunConfig rc = load_config(config);
  GradCheckOptions opts;
  opts.samples = samples;
  opts.seed = seed;
  opts.corrupt = corrupt;
  const auto results = check_all_modules(rc, opts);
  const double tol = 1e-3;
  std::cout << "module,samples,max_rel_error,status\n";
  const GradCheckResult* worst = nullptr;
  for (const auto& r : results) {
    const bool ok = r.max_rel_error < tol;
    std::cout << r.module << "," << r.samples << "," << num(r.max_rel_error) << "," << (ok ? "pass" : "FAIL") << "\n";
    if (!ok && (!worst || r.max_rel_error > worst->max_rel_error)) worst = &r;
  }
  if (worst) {
    std::ostringstream msg;
    msg << "gradient check failed: worst offender " << worst->module << " parameter " << worst->worst_parameter
        << "[" << worst->worst_index << "] analytic " << num(worst->worst_analytic) << " numeric "
        << num(worst->worst_numeric) << " rel_error " << num(worst->max_rel_error);
    throw VerificationFailure(msg.str());
  }
  return 0;
}

int cmd_dump_bands(const std::string& ckpt, const std::string& data_dir, const std::string& config,
                   std::size_t block) {
  Loaded m = load_model(ckpt, config);
  if (block >= m.model->blocks().size()) throw ShapeError("--block " + std::to_string(block) + " out of range");
  spectral::SpectralBranch& sb = m.model->blocks()[block].spectral;
  const std::vector<double> mu = sb.centers_hz();
  const std::vector<double> sigma = sb.widths_hz();
  std::vector<double> alpha(mu.size(), 0.0);
  std::size_t rows = 0;
  if (!data_dir.empty()) {
    const Dataset data = read_dataset(data_dir);
    check_data(data, m.model->config());
    for_batches(*m.model, m.graph, data, true, [&](std::size_t, const Tensor&, const ModelTrace& trace) {
      const Tensor& gate = trace.blocks[block].spectral.gate;
      if (gate.empty()) return;
      const std::size_t N = gate.dim(0), K = gate.dim(1);
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t k = 0; k < K; ++k) alpha[k] += gate[n * K + k];
      rows += N;
    });
  }
  std::cout << "band_index,mu_hz,sigma_hz,mean_alpha\n";
  for (std::size_t k = 0; k < mu.size(); ++k) {
    std::cout << k << "," << num(mu[k]) << "," << num(sigma[k]) << ",";
    // mean_alpha needs input data; left empty without --data.
    if (rows > 0) std::cout << num(alpha[k] / double(rows));
    std::cout << "\n";
  }
  return 0;
}

int cmd_dump_kernel_weights(const std::string& ckpt, const std::string& data_dir, const std::string& config,
                            std::size_t block) {
  Loaded m = load_model(ckpt, config);
  if (block >= m.model->blocks().size()) throw ShapeError("--block " + std::to_string(block) + " out of range");
  const Dataset data = read_dataset(data_dir);
  const ModelConfig& mc = m.model->config();
  check_data(data, mc);
  const double log_bins = std::log(double(mc.patches() / 2 + 1));
  std::cout << "sample";
  for (std::size_t k : mc.kernel_sizes) std::cout << ",alpha_" << k;
  std::cout << ",variance,entropy\n";
  // One row per (trial, channel) sequence: sample = trial * channels + channel.
  std::size_t sample = 0;
  for_batches(*m.model, m.graph, data, true, [&](std::size_t, const Tensor&, const ModelTrace& trace) {
    const dynamic::DynamicTrace& dt = trace.blocks[block].dynamic;
    if (dt.kernel_weights.empty()) return;
    const std::size_t N = dt.kernel_weights.dim(0), M = dt.kernel_weights.dim(1);
    for (std::size_t n = 0; n < N; ++n, ++sample) {
      std::cout << sample;
      for (std::size_t j = 0; j < M; ++j) std::cout << "," << num(dt.kernel_weights[n * M + j]);
      // stats hold log1p(variance) and entropy / log(bins).
      std::cout << "," << num(std::expm1(dt.stats[n * 2])) << "," << num(dt.stats[n * 2 + 1] * log_bins) << "\n";
    }
  });
  return 0;
}

std::vector<std::size_t> parse_lengths(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double v = 0.0;
    try {
      v = parse_number(item);
    } catch (const std::invalid_argument&) {
      v = -1.0;
    }
    if (!(v >= 2.0) || v != std::floor(v)) throw ConfigError("--lengths", "expects positive integers, got '" + item + "'");
    out.push_back(std::size_t(v));
  }
  if (out.empty()) throw ConfigError("--lengths", "is empty");
  return out;
}

int cmd_bench(const std::string& config, const std::string& lengths, std::size_t warmup, std::size_t repeats,
              std::size_t batch) {
  RunConfig rc = load_config(config);
  const graph::ElectrodeGraph g = make_graph(rc);
  std::cout << "patches,samples,median_ms,flops\n";
  for (std::size_t tp : parse_lengths(lengths)) {
    ModelConfig mc = rc.model;
    mc.length = tp * mc.patch;
    mc.validate();
    NakulModel model(mc, rc.train.seed);
    Rng rng = Rng::stream(rc.train.seed, "bench");
    Tensor x({batch, mc.channels, mc.length});
    for (auto& v : x.data()) v = rng.normal();
    std::vector<double> times;
    for (std::size_t r = 0; r < warmup + repeats; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      const Tensor y = model.logits(x, g);
      const auto t1 = std::chrono::steady_clock::now();
      if (r >= warmup) times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    std::nth_element(times.begin(), times.begin() + times.size() / 2, times.end());
    double median = times[times.size() / 2];
    if (times.size() % 2 == 0) {
      const double lo = *std::max_element(times.begin(), times.begin() + times.size() / 2);
      median = 0.5 * (median + lo);
    }
    std::cout << tp << "," << mc.length << "," << num(median) << "," << count_flops(mc, batch).total() << "\n";
    std::cout.flush();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NAKUL: spectral, dynamic and graph mixing for multichannel signals"};
  app.require_subcommand(1);

  std::string config, out, data_dir, ckpt, lengths = "128,256,512,1024,2048", corrupt;
  std::uint64_t seed = 0;
  std::size_t samples = 50, block = 0, warmup = 5, repeats = 20, batch = 1;
  std::optional<std::size_t> epochs;
  std::optional<std::uint64_t> train_seed;

  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic dataset");
  gen->add_option("--config", config, "Config file")->required();
  gen->add_option("--out", out, "Output directory")->required();
  gen->add_option("--seed", seed, "Data seed")->required();

  auto* tr = app.add_subcommand("train", "Train a model; writes metrics.csv beside the checkpoint");
  tr->add_option("--config", config, "Config file")->required();
  tr->add_option("--data", data_dir, "Dataset directory")->required();
  tr->add_option("--out", out, "Checkpoint path")->required();
  tr->add_option("--epochs", epochs, "Override train.epochs");
  tr->add_option("--seed", train_seed, "Override train.seed");

  auto* ev = app.add_subcommand("eval", "Accuracy, macro-F1, per-class F1 and confusion matrix");
  ev->add_option("--ckpt", ckpt, "Checkpoint")->required();
  ev->add_option("--data", data_dir, "Dataset directory")->required();
  ev->add_option("--config", config, "Config with graph settings (optional)");

  auto* gc = app.add_subcommand("grad-check", "Compare backward passes against finite differences");
  gc->add_option("--config", config, "Config file")->required();
  gc->add_option("--samples", samples, "Parameter entries per module");
  gc->add_option("--seed", seed, "Sampling seed");
  gc->add_option("--corrupt", corrupt, "Module given a wrong backward (negative control)");

  auto* db = app.add_subcommand("dump-bands", "Learned spectral bands as CSV");
  db->add_option("--ckpt", ckpt, "Checkpoint")->required();
  db->add_option("--data", data_dir, "Dataset for mean_alpha (optional)");
  db->add_option("--config", config, "Config with graph settings (optional)");
  db->add_option("--block", block, "Block index");

  auto* dk = app.add_subcommand("dump-kernel-weights", "Meta-network kernel weights per sequence as CSV");
  dk->add_option("--ckpt", ckpt, "Checkpoint")->required();
  dk->add_option("--data", data_dir, "Dataset directory")->required();
  dk->add_option("--config", config, "Config with graph settings (optional)");
  dk->add_option("--block", block, "Block index");

  auto* be = app.add_subcommand("bench", "Forward wall-clock time per patch count");
  be->add_option("--config", config, "Config file")->required();
  be->add_option("--lengths", lengths, "Comma-separated patch counts");
  be->add_option("--warmup", warmup, "Untimed runs per length");
  be->add_option("--repeats", repeats, "Timed runs per length")->check(CLI::PositiveNumber);
  be->add_option("--batch", batch, "Batch size")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }

  retain_freed_memory();
  try {
    if (gen->parsed()) return cmd_gen_data(config, out, seed);
    if (tr->parsed()) return cmd_train(config, data_dir, out, epochs, train_seed);
    if (ev->parsed()) return cmd_eval(ckpt, data_dir, config);
    if (gc->parsed()) return cmd_grad_check(config, samples, seed, corrupt);
    if (db->parsed()) return cmd_dump_bands(ckpt, data_dir, config, block);
    if (dk->parsed()) return cmd_dump_kernel_weights(ckpt, data_dir, config, block);
    if (be->parsed()) return cmd_bench(config, lengths, warmup, repeats, batch);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const TrainingAbort& e) {
    std::cerr << "training aborted: " << e.what() << "\n";
    return kExitAbort;
  } catch (const LoadError& e) {
    std::cerr << "load error: " << e.what() << "\n";
    return kExitLoad;
  } catch (const ShapeError& e) {
    std::cerr << "shape error: " << e.what() << "\n";
    return kExitLoad;
  } catch (const VerificationFailure& e) {
    std::cerr << e.what() << "\n";
    return kExitVerify;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "filesystem error: " << e.what() << "\n";
    return kExitLoad;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitLoad;
  }
  return 0;
}
