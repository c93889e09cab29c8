// Copyright 2026 The TERELU Workbench Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Command implementations behind the `terelu` executable. Each command takes
// its options as a struct and writes to caller-supplied streams, so tests can
// drive them without spawning a process.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "terelu/activations.hpp"
#include "terelu/data.hpp"
#include "terelu/gradcheck_suite.hpp"
#include "terelu/metrics_csv.hpp"
#include "terelu/network.hpp"

namespace terelu::experiment {

/// Environment variable naming the default directory holding the IDX files.
inline constexpr const char* kDataDirEnv = "TERELU_DATA_DIR";

/// Fixed shape of the synthetic blob dataset used by `--dataset blobs`.
inline constexpr std::size_t kBlobClasses = 4;
inline constexpr std::size_t kBlobDim = 8;
inline constexpr double kBlobSeparation = 8.0;

struct ExperimentConfig {
  std::string activation = "terelu";  // one of the eight kinds, or "maxout"
  double alpha = 1.0;                 // ELU / TERELU negative-branch scale
  double beta_init = 1.0;             // TERELU initial beta
  double mu = 1.0;                    // TERELU threshold
  double lrelu_alpha = 0.01;
  std::vector<double> srelu{1.0, 0.5, -1.0, 0.1};  // t_r, a_r, t_l, a_l
  std::vector<double> apl_a{0.5};
  std::vector<double> apl_b{1.0};
  double softplus_alpha = 1.0;
  double softplus_beta = 1.0;
  std::size_t maxout_k = 2;

  std::size_t depth = 54;
  std::size_t width = 64;
  bool bn = true;

  std::string dataset = "mnist";  // "mnist" or "blobs"
  std::size_t train_size = 10000;
  std::size_t val_size = 2000;
  std::size_t holdout = 10000;  // validation pool carved from the MNIST training file

  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::uint64_t seed = 1;

  std::string data_dir;  // empty: $TERELU_DATA_DIR, then ./data
  std::string out_csv = "metrics.csv";

  bool is_maxout() const { return activation == "maxout"; }

  TrainConfig train_config() const {
    return {learning_rate, momentum, batch_size, epochs, seed};
  }
};

inline std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + csv::format_double(v[i]);
  return s;
}

/// Effective configuration as ordered key/value pairs. Keys match the CLI flag
/// names and the config-file keys.
inline std::vector<std::pair<std::string, std::string>> describe(const ExperimentConfig& c) {
  const auto num = [](double v) { return csv::format_double(v); };
  return {
      {"activation", c.activation},
      {"alpha", num(c.alpha)},
      {"beta-init", num(c.beta_init)},
      {"mu", num(c.mu)},
      {"lrelu-alpha", num(c.lrelu_alpha)},
      {"srelu", join(c.srelu)},
      {"apl-a", join(c.apl_a)},
      {"apl-b", join(c.apl_b)},
      {"softplus-alpha", num(c.softplus_alpha)},
      {"softplus-beta", num(c.softplus_beta)},
      {"maxout-k", std::to_string(c.maxout_k)},
      {"depth", std::to_string(c.depth)},
      {"width", std::to_string(c.width)},
      {"bn", c.bn ? "true" : "false"},
      {"dataset", c.dataset},
      {"train-size", std::to_string(c.train_size)},
      {"val-size", std::to_string(c.val_size)},
      {"holdout", std::to_string(c.holdout)},
      {"epochs", std::to_string(c.epochs)},
      {"batch-size", std::to_string(c.batch_size)},
      {"learning-rate", num(c.learning_rate)},
      {"momentum", num(c.momentum)},
      {"seed", std::to_string(c.seed)},
      {"data-dir", c.data_dir},
      {"out-csv", c.out_csv},
  };
}

inline ActivationSpec make_activation(const ExperimentConfig& c) {
  const auto kind = parse_activation_kind(c.activation);
  if (!kind)
    throw std::invalid_argument("unknown activation '" + c.activation +
                                "'; expected relu, lrelu, elu, srelu, apl, softplus, tanh, "
                                "terelu or maxout");
  switch (*kind) {
    case ActivationKind::Relu: return ReluParams{};
    case ActivationKind::Lrelu: return LreluParams{c.lrelu_alpha};
    case ActivationKind::Elu: return EluParams{c.alpha};
    case ActivationKind::Srelu:
      if (c.srelu.size() != 4)
        throw std::invalid_argument("srelu needs four values: t_r,a_r,t_l,a_l");
      return SreluParams{c.srelu[0], c.srelu[1], c.srelu[2], c.srelu[3]};
    case ActivationKind::Apl: return AplParams{c.apl_a, c.apl_b};
    case ActivationKind::ParametricSoftplus: return SoftplusParams{c.softplus_alpha, c.softplus_beta};
    case ActivationKind::Tanh: return TanhParams{};
    case ActivationKind::Terelu: return TereluParams{c.alpha, c.beta_init, c.mu};
  }
  throw std::invalid_argument("unhandled activation");
}

inline Model make_model(const ExperimentConfig& c, std::size_t input_dim, std::size_t classes) {
  if (c.is_maxout()) {
    if (c.maxout_k < 2) throw std::invalid_argument("maxout-k must be >= 2");
    return build_maxout_net(c.depth, c.width, c.maxout_k, input_dim, classes, c.bn, c.seed);
  }
  return build_fcnn(c.depth, c.width, input_dim, classes, make_activation(c), c.bn, c.seed);
}

inline std::filesystem::path resolve_data_dir(const std::string& configured) {
  if (!configured.empty()) return configured;
  if (const char* env = std::getenv(kDataDirEnv); env && *env) return env;
  return "data";
}

inline std::vector<std::string> expected_filenames() {
  return {idx::kTrainImages, idx::kTrainLabels, idx::kTestImages, idx::kTestLabels};
}

/// Raised when the MNIST files are absent; the message lists what is expected.
class MissingDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Splits {
  Dataset train;
  Dataset val;
};

/// Training and validation sets for a config. MNIST: a seeded holdout of the
/// training file forms the validation pool, and stratified subsets of the
/// remainder and of the pool give the train and validation sets.
inline Splits load_splits(const ExperimentConfig& c) {
  if (c.dataset == "blobs") {
    const auto per_class = [](std::size_t n) { return std::max<std::size_t>(1, n / kBlobClasses); };
    return {synthetic_blobs(per_class(c.train_size), kBlobClasses, kBlobDim, kBlobSeparation,
                            c.seed + 2),
            synthetic_blobs(per_class(c.val_size), kBlobClasses, kBlobDim, kBlobSeparation,
                            c.seed + 3)};
  }
  if (c.dataset != "mnist")
    throw std::invalid_argument("unknown dataset '" + c.dataset + "'; expected mnist or blobs");
  const auto dir = resolve_data_dir(c.data_dir);
  const auto images = dir / idx::kTrainImages;
  const auto labels = dir / idx::kTrainLabels;
  if (!std::filesystem::exists(images) || !std::filesystem::exists(labels)) {
    std::string msg = "MNIST files not found in '" + dir.string() + "'. Expected:";
    for (const auto& f : expected_filenames()) msg += "\n  " + (dir / f).string();
    msg += "\nSet --data-dir or " + std::string(kDataDirEnv) + ".";
    throw MissingDataError(msg);
  }
  const Dataset full = load_mnist_idx(images, labels);
  auto [pool, holdout] = split_holdout(full, c.holdout, c.seed + 2);
  return {subset(pool, std::min(c.train_size, pool.size()), c.seed + 3),
          subset(holdout, std::min(c.val_size, holdout.size()), c.seed + 4)};
}

struct RunResult {
  std::vector<MetricsRow> rows;
  bool diverged = false;
  std::string error;
};

/// Trains per the config, writing one CSV row per epoch as it goes.
inline RunResult run_training(const ExperimentConfig& c, std::ostream& log) {
  c.train_config().validate();
  const Splits data = load_splits(c);
  Model model = make_model(c, data.train.dim(), data.train.class_count);
  csv::MetricsWriter writer(c.out_csv, describe(c), model.terelu_betas().size());
  Rng rng(c.seed + 1);
  RunResult result;
  log << "train: " << c.activation << " depth=" << c.depth << " width=" << c.width
      << " bn=" << (c.bn ? "on" : "off") << " train=" << data.train.size()
      << " val=" << data.val.size() << " epochs=" << c.epochs << " seed=" << c.seed << '\n';
  for (std::size_t e = 1; e <= c.epochs; ++e) {
    EpochResult tr;
    try {
      tr = train_epoch(model, data.train, c.train_config(), rng, e);
    } catch (const DivergenceError& err) {
      result.diverged = true;
      result.error = err.what();
      log << "abort: " << err.what() << '\n';
      return result;
    }
    const EpochResult va = evaluate(model, data.val);
    MetricsRow row{e, tr.loss, tr.accuracy, va.loss, va.accuracy, model.terelu_betas()};
    writer.write(row);
    log << "epoch " << e << " train_loss=" << csv::format_double(tr.loss)
        << " train_acc=" << csv::format_double(tr.accuracy)
        << " val_loss=" << csv::format_double(va.loss)
        << " val_acc=" << csv::format_double(va.accuracy) << '\n';
    result.rows.push_back(std::move(row));
  }
  const auto& last = result.rows.back();
  log << "final epoch=" << last.epoch << " train_acc=" << csv::format_double(last.train_acc)
      << " val_acc=" << csv::format_double(last.val_acc)
      << " val_loss=" << csv::format_double(last.val_loss) << '\n';
  return result;
}

/// `train` subcommand. Exit 0 on completion, 2 on divergence, 1 on other errors.
inline int cmd_train(const ExperimentConfig& c, std::ostream& out, std::ostream& err) {
  try {
    const RunResult r = run_training(c, out);
    if (r.diverged) {
      err << "error: training diverged: " << r.error << "\n";
      return 2;
    }
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

struct GradcheckOptions {
  std::optional<std::string> kind;
  std::size_t points = 200;
  std::uint64_t seed = 2024;
  gradcheck::DerivativeFn dx = act_dx;
};

/// `gradcheck` subcommand: prints one line per check, exit 0 iff all pass.
inline int cmd_gradcheck(const GradcheckOptions& o, std::ostream& out, std::ostream& err) {
  gradcheck::SuiteOptions so;
  so.points = o.points;
  so.seed = o.seed;
  so.dx = o.dx;
  if (o.kind) {
    so.only_kind = parse_activation_kind(*o.kind);
    if (!so.only_kind) {
      err << "error: unknown activation kind '" << *o.kind << "'\n";
      return 1;
    }
  }
  const auto reports = gradcheck::run_suite(so);
  bool all = true;
  out << std::left << std::setw(32) << "check" << std::setw(14) << "max_rel_err" << std::setw(10)
      << "tol" << "result\n";
  for (const auto& [name, r] : reports) {
    char line[160];
    std::snprintf(line, sizeof line, "%-32s%-14.3e%-10.0e%s\n", name.c_str(), r.max_rel_err,
                  r.tolerance, r.passed ? "PASS" : "FAIL");
    out << line;
    all = all && r.passed;
  }
  if (so.only_kind) {
    const auto spec = ActivationSpec::defaults(*so.only_kind);
    Rng rng(o.seed);
    const auto xs = gradcheck::sample_points(spec, o.points, rng);
    out << "per-branch breakdown for " << activation_name(*so.only_kind) << ":\n";
    gradcheck::print_branch_breakdown(out, spec, xs, o.dx);
  }
  out << (all ? "all checks passed\n" : "SOME CHECKS FAILED\n");
  return all ? 0 : 1;
}

/// `plot-data` subcommand: merges run CSVs into one long-format table.
inline int cmd_plot_data(const std::vector<std::string>& paths, bool include_beta,
                         std::ostream& out, std::ostream& err) {
  if (paths.empty()) {
    err << "error: no input CSVs\n";
    return 1;
  }
  std::vector<std::pair<std::string, csv::RunTable>> runs;
  try {
    for (const auto& p : paths) {
      std::string name = std::filesystem::path(p).stem().string();
      for (const auto& [existing, _] : runs)
        if (existing == name) name += "_" + std::to_string(runs.size());
      runs.emplace_back(name, csv::read_metrics_file(p));
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  csv::write_long(out, runs, include_beta);
  return 0;
}

/// `data-info` subcommand: reports where IDX files are looked up and what is there.
inline int cmd_data_info(const std::string& data_dir, std::ostream& out) {
  const char* env = std::getenv(kDataDirEnv);
  const auto dir = resolve_data_dir(data_dir);
  out << "environment variable: " << kDataDirEnv << " = " << (env ? env : "(unset)") << '\n';
  out << "data directory: " << dir.string() << '\n';
  bool all = true;
  for (const auto& f : expected_filenames()) {
    const auto path = dir / f;
    out << "  " << f << ": ";
    if (!std::filesystem::exists(path)) {
      out << "missing\n";
      all = false;
      continue;
    }
    try {
      const bool images = f.find("images") != std::string::npos;
      const auto arr = idx::parse(idx::read_file(path), images ? idx::kImageMagic : idx::kLabelMagic, f);
      out << "ok, dims";
      for (auto d : arr.dims) out << ' ' << d;
      out << '\n';
    } catch (const std::exception& e) {
      out << "invalid (" << e.what() << ")\n";
      all = false;
    }
  }
  return all ? 0 : 1;
}

}  // namespace terelu::experiment
