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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "terelu/experiment.hpp"

namespace {

using terelu::experiment::ExperimentConfig;

std::vector<double> parse_list(const std::string& text, const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw CLI::ValidationError("--" + key, "'" + item + "' is not a number");
    }
  }
  return out;
}

// Fills options the command line left unset from a flat `key = value` file.
// Keys are the long flag names without the leading dashes.
void apply_config_file(CLI::App& cmd, const std::string& path) {
  if (!std::filesystem::is_regular_file(path)) throw CLI::FileError::Missing(path);
  for (const auto& item : CLI::ConfigINI().from_file(path)) {
    const std::string key = item.fullname();
    CLI::Option* opt = nullptr;
    try {
      opt = cmd.get_option("--" + key);
    } catch (const CLI::OptionNotFound&) {
      throw CLI::ConfigError("unknown key '" + key + "' in " + path);
    }
    if (key == "config") throw CLI::ConfigError("config files cannot nest (" + path + ")");
    if (opt->count() > 0) continue;
    std::string value;
    for (std::size_t i = 0; i < item.inputs.size(); ++i) value += (i ? "," : "") + item.inputs[i];
    opt->add_result(value);
    opt->run_callback();
  }
}

CLI::App* add_train(CLI::App& app, ExperimentConfig& c, std::string& config_file,
                    std::string& srelu, std::string& apl_a, std::string& apl_b) {
  auto* train = app.add_subcommand("train", "Train a network and write per-epoch metrics CSV");
  train->add_option("--config", config_file, "key = value file; command-line flags take precedence");
  train->add_option("--activation", c.activation,
                    "relu | lrelu | elu | srelu | apl | softplus | tanh | terelu | maxout")
      ->capture_default_str();
  train->add_option("--alpha", c.alpha, "ELU/TERELU negative-branch scale")->capture_default_str();
  train->add_option("--beta-init", c.beta_init, "TERELU initial beta")->capture_default_str();
  train->add_option("--mu", c.mu, "TERELU threshold")->capture_default_str();
  train->add_option("--lrelu-alpha", c.lrelu_alpha, "leaky slope")->capture_default_str();
  train->add_option("--srelu", srelu, "t_r,a_r,t_l,a_l");
  train->add_option("--apl-a", apl_a, "APL hinge slopes, comma separated");
  train->add_option("--apl-b", apl_b, "APL hinge locations, comma separated");
  train->add_option("--softplus-alpha", c.softplus_alpha)->capture_default_str();
  train->add_option("--softplus-beta", c.softplus_beta)->capture_default_str();
  train->add_option("--maxout-k", c.maxout_k, "pieces per maxout unit")->capture_default_str();
  train->add_option("--depth", c.depth, "hidden layers")->capture_default_str();
  train->add_option("--width", c.width, "units per hidden layer")->capture_default_str();
  train->add_flag("--bn,!--no-bn", c.bn, "batch norm before each activation (default on)");
  train->add_option("--dataset", c.dataset, "mnist | blobs")->capture_default_str();
  train->add_option("--train-size", c.train_size)->capture_default_str();
  train->add_option("--val-size", c.val_size)->capture_default_str();
  train->add_option("--holdout", c.holdout, "MNIST training images reserved for validation")
      ->capture_default_str();
  train->add_option("--epochs", c.epochs)->capture_default_str();
  train->add_option("--batch-size", c.batch_size)->capture_default_str();
  train->add_option("--learning-rate", c.learning_rate)->capture_default_str();
  train->add_option("--momentum", c.momentum)->capture_default_str();
  train->add_option("--seed", c.seed)->capture_default_str();
  train->add_option("--data-dir", c.data_dir,
                    std::string("IDX directory (default $") + terelu::experiment::kDataDirEnv +
                        ", then ./data)");
  train->add_option("--out-csv", c.out_csv)->capture_default_str();
  return train;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TERELU activation workbench"};
  app.require_subcommand(1);

  ExperimentConfig config;
  std::string config_file, srelu, apl_a, apl_b;
  auto* train = add_train(app, config, config_file, srelu, apl_a, apl_b);

  terelu::experiment::GradcheckOptions gc;
  std::string gc_kind;
  auto* gradcheck = app.add_subcommand("gradcheck", "Run the finite-difference gradient suite");
  gradcheck->add_option("--kind", gc_kind, "restrict to one activation kind, with per-branch table");
  gradcheck->add_option("--points", gc.points, "sample points per activation")->capture_default_str();
  gradcheck->add_option("--seed", gc.seed)->capture_default_str();

  std::vector<std::string> plot_inputs;
  std::string plot_out;
  bool plot_beta = false;
  auto* plot = app.add_subcommand("plot-data", "Merge run CSVs into long format (run,epoch,metric,value)");
  plot->add_option("csv", plot_inputs, "metrics CSVs from train")->required();
  plot->add_option("--out", plot_out, "output file (default stdout)");
  plot->add_flag("--include-beta", plot_beta, "also emit beta_i columns");

  std::string info_dir;
  auto* info = app.add_subcommand("data-info", "Show where MNIST IDX files are expected");
  info->add_option("--data-dir", info_dir);

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("train")) {
      if (!config_file.empty()) apply_config_file(*train, config_file);
      if (!srelu.empty()) config.srelu = parse_list(srelu, "srelu");
      if (!apl_a.empty()) config.apl_a = parse_list(apl_a, "apl-a");
      if (!apl_b.empty()) config.apl_b = parse_list(apl_b, "apl-b");
      return terelu::experiment::cmd_train(config, std::cout, std::cerr);
    }
    if (app.got_subcommand("gradcheck")) {
      if (!gc_kind.empty()) gc.kind = gc_kind;
      return terelu::experiment::cmd_gradcheck(gc, std::cout, std::cerr);
    }
    if (app.got_subcommand("plot-data")) {
      if (plot_out.empty()) return terelu::experiment::cmd_plot_data(plot_inputs, plot_beta, std::cout, std::cerr);
      std::ofstream out(plot_out);
      if (!out) {
        std::cerr << "error: cannot write " << plot_out << '\n';
        return 1;
      }
      return terelu::experiment::cmd_plot_data(plot_inputs, plot_beta, out, std::cerr);
    }
    if (app.got_subcommand("data-info")) return terelu::experiment::cmd_data_info(info_dir, std::cout);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
