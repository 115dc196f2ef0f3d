// glamor_kit: command-line front end for the library.
//
// exit codes: 0 ok, 1 usage, 2 bad data, 3 selftest failure

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "glamor/dataset.hpp"
#include "glamor/errors.hpp"
#include "glamor/key_value.hpp"
#include "glamor/losses.hpp"
#include "glamor/model.hpp"
#include "glamor/model_config.hpp"
#include "glamor/parallel.hpp"
#include "glamor/reid_eval.hpp"
#include "glamor/sampler.hpp"
#include "glamor/schedule.hpp"
#include "glamor/sparsity.hpp"
#include "glamor/tensor_io.hpp"
#include "glamor/testing/suites.hpp"
#include "glamor/text_format.hpp"
#include "glamor/training.hpp"

namespace fs = std::filesystem;
using namespace glamor;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kData = 2;
constexpr int kSelftestFailed = 3;

// Thrown for flag combinations CLI11 cannot express.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

// Writes to stdout, and to `path` as well when one was given.
void emit(const std::string& text, const std::string& path) {
  std::cout << text;
  if (!path.empty()) {
    auto out = open_output(path);
    out << text;
  }
}

// A config file may leave num_classes out; then it is taken from the
// checkpoint's classifier so forward/sparsity work on anything train wrote.
ModelConfig load_model_config(const fs::path& path, const std::vector<CheckpointArray>* checkpoint) {
  KeyValueFile file = KeyValueFile::load(path);
  const bool has_classes = file.contains("num_classes");
  ModelConfig config = parse_model_config(file);
  parse_train_config(file);  // training keys are allowed in the same file
  file.reject_unused();
  if (!has_classes && checkpoint) {
    for (const auto& a : *checkpoint) {
      if (a.name == "classifier.weight" && config.feature_dim > 0) {
        config.num_classes = a.values.size() / config.feature_dim;
      }
    }
  }
  config.validate();
  return config;
}

std::vector<CheckpointArray> load_checkpoint_arrays(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return read_checkpoint(in);
  } catch (const DataError& e) {
    throw DataError::prefixed(e, path.string());
  }
}

std::string feature_rows(const Matrix& features) {
  std::ostringstream out;
  for (std::size_t r = 0; r < features.rows(); ++r) {
    for (std::size_t c = 0; c < features.cols(); ++c) {
      if (c > 0) out << '\t';
      out << format_real(features(r, c));
    }
    out << '\n';
  }
  return out.str();
}

// --- subcommands ------------------------------------------------------------

struct EvalArgs {
  std::string query, gallery, protocol = "veri", out;
};

int run_eval(const EvalArgs& a) {
  const EmbeddingSet query = load_embeddings(a.query);
  const EmbeddingSet gallery = load_embeddings(a.gallery);
  const RankingReport report = rank(query, gallery, parse_protocol(a.protocol));
  emit(format_report(report), a.out);
  return kOk;
}

struct MineArgs {
  std::string embeddings, out;
  std::size_t p = 0, k = 0;
  std::uint64_t seed = 0;
};

int run_mine(const MineArgs& a) {
  if ((a.p == 0) != (a.k == 0)) throw UsageError("--p and --k go together");
  const EmbeddingSet set = load_embeddings(a.embeddings);
  std::vector<std::int64_t> ids;
  for (const auto& s : set.samples) ids.push_back(s.identity);

  // Without --p/--k the whole file is one batch; with them, the first PK batch
  // the sampler draws for epoch 0. Row indices always refer to the file.
  std::vector<std::size_t> rows;
  if (a.p == 0 && a.k == 0) {
    for (std::size_t i = 0; i < set.size(); ++i) rows.push_back(i);
  } else {
    PKSamplerConfig sampler{a.p, a.k, a.seed};
    rows = pk_sample(ids, sampler, 0).front();
  }
  Matrix batch(rows.size(), set.dim());
  std::vector<std::int64_t> batch_ids;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < set.dim(); ++c) batch(r, c) = set.vectors(rows[r], c);
    batch_ids.push_back(ids[rows[r]]);
  }
  const BatchHardResult mined = batch_hard_mine(batch, batch_ids);
  std::ostringstream out;
  for (const auto& t : mined.triplets) {
    out << rows[t.anchor] << '\t' << rows[t.positive] << '\t' << rows[t.negative] << '\t'
        << format_real(t.d_ap) << '\t' << format_real(t.d_an) << '\n';
  }
  emit(out.str(), a.out);
  return kOk;
}

struct ScheduleArgs {
  std::string kind = "warmup1", out;
  double base_lr = 1e-4;
  std::size_t epochs = 0;
  std::size_t warmup_epochs = 10;
  double decay_gamma = 0.6;
  std::size_t decay_period = 20;
};

int run_schedule(const ScheduleArgs& a) {
  ScheduleConfig config;
  config.kind = parse_warmup_kind(a.kind);
  config.base_lr = a.base_lr;
  config.warmup_epochs = a.warmup_epochs;
  config.decay_gamma = a.decay_gamma;
  config.decay_period = a.decay_period;
  config.validate();
  std::ostringstream out;
  out << "epoch\tlr\n";
  for (std::size_t e = 0; e < a.epochs; ++e) out << e << '\t' << format_real(lr_at(config, e)) << '\n';
  emit(out.str(), a.out);
  return kOk;
}

struct ForwardArgs {
  std::string config, params, input, manifest, dump, out;
};

int run_forward(const ForwardArgs& a) {
  if (a.input.empty() == a.manifest.empty()) throw UsageError("give exactly one of --input and --manifest");
  const auto arrays = load_checkpoint_arrays(a.params);
  const ModelConfig config = load_model_config(a.config, &arrays);
  const ModelParams params = from_checkpoint(config, arrays);

  std::optional<Dataset> data;
  Tensor4 images;
  if (!a.manifest.empty()) {
    data = load_manifest_dataset(a.manifest);
    images = data->images;
  } else {
    images = load_tensor(a.input);
  }
  check_input(config, images.shape());
  const ForwardOutput result = forward(config, params, images, NormMode::inference);

  if (!a.dump.empty()) {
    fs::create_directories(a.dump);
    for (const auto& act : result.activations) save_tensor(fs::path(a.dump) / (act.name + ".tensor"), act.values);
  }
  if (data) {
    EmbeddingSet set{result.features, data->samples};
    std::ostringstream out;
    write_embeddings(out, set);
    emit(out.str(), a.out);
  } else {
    emit(feature_rows(result.features), a.out);
  }
  return kOk;
}

struct SparsityArgs {
  std::string config, params, images, out;
  double tau = 1e-6;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
};

int run_sparsity(const SparsityArgs& a) {
  const auto arrays = load_checkpoint_arrays(a.params);
  const ModelConfig config = load_model_config(a.config, &arrays);
  const ModelParams params = from_checkpoint(config, arrays);
  const Dataset data = load_manifest_dataset(a.images);
  check_input(config, data.images.shape());
  const std::size_t count = a.samples == 0 ? data.size() : a.samples;
  const SparsityReport report = sparsity_probe(config, params, data.images, a.tau, count, a.seed);
  emit(format_sparsity(report), a.out);
  return kOk;
}

struct SelftestArgs {
  std::string suite = "all";
};

int run_selftest(const SelftestArgs& a) {
  std::vector<std::string> suites;
  if (a.suite == "all") {
    suites = {"grads", "oracles", "protocol"};
  } else {
    suites = {a.suite};
  }
  std::size_t failed = 0, total = 0;
  for (const auto& suite : suites) {
    const auto start = std::chrono::steady_clock::now();
    const auto results = glamor::testing::run_suite(suite);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    for (const auto& r : results) {
      ++total;
      if (!r.passed) ++failed;
      std::cout << (r.passed ? "PASS" : "FAIL") << '\t' << suite << '\t' << r.name << "\tworst=" << r.worst;
      if (!r.detail.empty()) std::cout << '\t' << r.detail;
      std::cout << '\n';
    }
    std::cout << "suite " << suite << ": " << results.size() << " checks in " << format_fixed(secs, 2) << "s\n";
  }
  std::cout << (failed == 0 ? "selftest passed" : "selftest FAILED") << " (" << total - failed << '/' << total
            << ")\n";
  return failed == 0 ? kOk : kSelftestFailed;
}

struct TrainArgs {
  std::string config, manifest, out, log;
  std::size_t epochs = 0;
  std::uint64_t seed = 0;
  std::size_t eval_every = 1;
};

int run_train(const TrainArgs& a) {
  const Dataset data = load_manifest_dataset(a.manifest);
  KeyValueFile file = KeyValueFile::load(a.config);
  const bool has_classes = file.contains("num_classes");
  ModelConfig model = parse_model_config(file);
  const TrainConfig train_config = parse_train_config(file);
  file.reject_unused();
  if (!has_classes) model.num_classes = class_index(data).size();
  model.validate();
  train_config.validate();

  std::ostringstream log;
  auto on_epoch = [&](const EpochStats& s, const ModelParams& p) {
    std::ostringstream line;
    line << "epoch=" << s.epoch << " lr=" << format_real(s.lr) << " loss=" << format_fixed(s.mean_loss, 6);
    if (a.eval_every > 0 && ((s.epoch + 1) % a.eval_every == 0 || s.epoch + 1 == a.epochs)) {
      const RankingReport r = evaluate_held_in(model, train_config, p, data);
      line << " map=" << format_fixed(r.mean_ap, 6) << " rank1=" << format_fixed(r.rank(1), 6);
    }
    if (s.erase_misses > 0) line << " erase_misses=" << s.erase_misses;
    line << '\n';
    std::cout << line.str() << std::flush;
    log << line.str();
  };
  const TrainResult result = train(model, train_config, data, a.epochs, a.seed, on_epoch);
  save_params(a.out, result.params);
  if (!a.log.empty()) {
    auto out = open_output(a.log);
    out << log.str();
  }
  return kOk;
}

struct SynthArgs {
  std::string out;
  SyntheticConfig config;
};

int run_synth(const SynthArgs& a) {
  const Dataset data = make_synthetic_dataset(a.config);
  const fs::path manifest = save_dataset(data, a.out);
  std::cout << manifest.string() << '\n';
  return kOk;
}

int apply_thread_env() {
  const char* env = std::getenv("GLAMOR_KIT_THREADS");
  if (env == nullptr || *env == '\0') return kOk;
  try {
    const std::size_t n = parse_size(env);
    if (n == 0) throw DataError("zero");
    set_max_threads(n);
  } catch (const DataError&) {
    std::cerr << "glamor_kit: GLAMOR_KIT_THREADS must be a positive integer, got '" << env << "'\n";
    return kUsage;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"glamor-kit: re-id losses, attention, evaluation and a toy trainer"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "glamor-kit 0.1.0");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "rank query embeddings against a gallery");
  eval_cmd->add_option("--query", eval.query, "query embedding file")->required();
  eval_cmd->add_option("--gallery", eval.gallery, "gallery embedding file")->required();
  eval_cmd->add_option("--protocol", eval.protocol, "veri or plain")
      ->check(CLI::IsMember({"veri", "plain"}))
      ->capture_default_str();
  eval_cmd->add_option("--out", eval.out, "also write the report here");

  MineArgs mine;
  auto* mine_cmd = app.add_subcommand("mine", "batch-hard triplets: anchor, positive, negative, d_ap, d_an");
  mine_cmd->add_option("--embeddings", mine.embeddings, "embedding file")->required();
  mine_cmd->add_option("--p", mine.p, "identities per sampled batch (with --k)");
  mine_cmd->add_option("--k", mine.k, "instances per identity (with --p)");
  mine_cmd->add_option("--seed", mine.seed, "sampler seed")->capture_default_str();
  mine_cmd->add_option("--out", mine.out, "also write the table here");

  ScheduleArgs sched;
  auto* sched_cmd = app.add_subcommand("schedule", "per-epoch learning rate table");
  sched_cmd->add_option("--kind", sched.kind, "warmup1, warmup2 or none")
      ->check(CLI::IsMember({"warmup1", "warmup2", "none"}))
      ->capture_default_str();
  sched_cmd->add_option("--base-lr", sched.base_lr)->capture_default_str();
  sched_cmd->add_option("--epochs", sched.epochs, "rows to print")->required();
  sched_cmd->add_option("--warmup-epochs", sched.warmup_epochs)->capture_default_str();
  sched_cmd->add_option("--decay-gamma", sched.decay_gamma)->capture_default_str();
  sched_cmd->add_option("--decay-period", sched.decay_period)->capture_default_str();
  sched_cmd->add_option("--out", sched.out, "also write the table here");

  ForwardArgs fwd;
  auto* fwd_cmd = app.add_subcommand("forward", "inference-mode features for a tensor file or manifest");
  fwd_cmd->add_option("--config", fwd.config, "model config (key=value)")->required();
  fwd_cmd->add_option("--params", fwd.params, "checkpoint")->required();
  fwd_cmd->add_option("--input", fwd.input, "tensor file, N images; prints one feature row per image");
  fwd_cmd->add_option("--manifest", fwd.manifest, "dataset manifest; prints an embedding file");
  fwd_cmd->add_option("--dump-activations", fwd.dump, "write every probed activation as DIR/<layer>.tensor");
  fwd_cmd->add_option("--out", fwd.out, "also write the output here");

  SparsityArgs sp;
  auto* sp_cmd = app.add_subcommand("sparsity", "fraction of near-zero channel maps per layer");
  sp_cmd->add_option("--config", sp.config)->required();
  sp_cmd->add_option("--params", sp.params)->required();
  sp_cmd->add_option("--images", sp.images, "dataset manifest")->required();
  sp_cmd->add_option("--tau", sp.tau)->capture_default_str();
  sp_cmd->add_option("--samples", sp.samples, "images to probe (0 = all)")->capture_default_str();
  sp_cmd->add_option("--seed", sp.seed, "subset seed")->capture_default_str();
  sp_cmd->add_option("--out", sp.out, "also write the table here");

  SelftestArgs self;
  auto* self_cmd = app.add_subcommand("selftest", "gradient, oracle and protocol checks");
  self_cmd->add_option("--suite", self.suite)
      ->check(CLI::IsMember({"grads", "oracles", "protocol", "all"}))
      ->capture_default_str();

  TrainArgs tr;
  auto* tr_cmd = app.add_subcommand("train", "train with PK batches, trisoft loss and Adam");
  tr_cmd->add_option("--config", tr.config, "model and training keys (key=value)")->required();
  tr_cmd->add_option("--manifest", tr.manifest, "training set manifest")->required();
  tr_cmd->add_option("--epochs", tr.epochs)->required();
  tr_cmd->add_option("--seed", tr.seed)->capture_default_str();
  tr_cmd->add_option("--out", tr.out, "checkpoint to write")->required();
  tr_cmd->add_option("--log", tr.log, "also write the epoch log here");
  tr_cmd->add_option("--eval-every", tr.eval_every, "held-in map/rank1 every N epochs (0 = never)")
      ->capture_default_str();

  SynthArgs syn;
  auto* syn_cmd = app.add_subcommand("synth", "write the procedural dataset as tensor files + manifest");
  syn_cmd->add_option("--out", syn.out, "directory")->required();
  syn_cmd->add_option("--identities", syn.config.num_identities)->capture_default_str();
  syn_cmd->add_option("--per-identity", syn.config.images_per_identity)->capture_default_str();
  syn_cmd->add_option("--size", syn.config.image_size)->capture_default_str();
  syn_cmd->add_option("--channels", syn.config.channels)->capture_default_str();
  syn_cmd->add_option("--cameras", syn.config.num_cameras)->capture_default_str();
  syn_cmd->add_option("--seed", syn.config.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  if (const int rc = apply_thread_env(); rc != kOk) return rc;

  try {
    if (*eval_cmd) return run_eval(eval);
    if (*mine_cmd) return run_mine(mine);
    if (*sched_cmd) return run_schedule(sched);
    if (*fwd_cmd) return run_forward(fwd);
    if (*sp_cmd) return run_sparsity(sp);
    if (*self_cmd) return run_selftest(self);
    if (*tr_cmd) return run_train(tr);
    if (*syn_cmd) return run_synth(syn);
  } catch (const UsageError& e) {
    std::cerr << "glamor_kit: " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "glamor_kit: config: " << e.what() << '\n';
    return kUsage;
  } catch (const MiningError& e) {
    std::cerr << "glamor_kit: cannot mine: " << e.what() << " (identity " << e.identity() << ")\n";
    return kData;
  } catch (const Error& e) {
    std::cerr << "glamor_kit: " << e.what() << '\n';
    return kData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "glamor_kit: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}
