// Copyright 2026 The Interflow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// interflow: trains branch-fused CNNs from a config file.
//
//   interflow train --config exp.cfg [--method S1] [--dataset mnist] ...
//   interflow sweep-depth --depths 4..13 ...
//   interflow repeat --n 30 --exclude 13 ...
//
// Exit status: 0 success, 1 configuration or input error, 2 training abort.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "interflow/error.hpp"
#include "interflow/experiment.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitAbort = 2;

struct CommonOptions {
  std::string config;
  std::optional<std::string> method;
  std::optional<std::string> dataset;
  std::optional<std::string> data_dir;
  std::optional<std::string> epochs;
  std::optional<std::string> seed;
  std::optional<std::string> scale;
  std::optional<std::string> out;
  std::optional<std::string> jobs;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "key = value experiment file");
  cmd->add_option("--method", o.method, "Normal, S0..S9 or deep:<depth>:<branches>");
  cmd->add_option("--dataset", o.dataset,
                  "mnist, kmnist, fmnist, cifar10, cifar100 or synthetic");
  cmd->add_option("--data-dir", o.data_dir, "directory holding the dataset files");
  cmd->add_option("--epochs", o.epochs, "training epochs");
  cmd->add_option("--seed", o.seed, "model and training seed");
  cmd->add_option("--scale", o.scale, "fraction of the training set, in (0,1]");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--jobs", o.jobs, "worker threads for independent runs");
  cmd->add_option("--set", o.sets, "extra key=value config entries")
      ->take_all();
}

interflow::ExperimentSpec resolve(const CommonOptions& o) {
  interflow::ConfigOverrides overrides;
  auto put = [&](const char* key, const std::optional<std::string>& v) {
    if (v) overrides.emplace_back(key, *v);
  };
  for (const std::string& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw interflow::ConfigError("--set expects key=value, got '" + kv + "'", 0);
    }
    overrides.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
  }
  put("method", o.method);
  put("dataset", o.dataset);
  put("data_dir", o.data_dir);
  put("epochs", o.epochs);
  put("seed", o.seed);
  put("scale", o.scale);
  put("output_dir", o.out);
  put("jobs", o.jobs);
  return o.config.empty() ? interflow::parse_config("", overrides)
                          : interflow::load_config(o.config, overrides);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Train CNNs with fused per-stage branch classifiers"};
  app.require_subcommand(1);

  CommonOptions train_opts;
  CLI::App* train = app.add_subcommand("train", "train one model");
  add_common(train, train_opts);

  CommonOptions sweep_opts;
  std::string depths = "4..13";
  CLI::App* sweep = app.add_subcommand("sweep-depth",
                                       "train Normal models of several depths");
  add_common(sweep, sweep_opts);
  sweep->add_option("--depths", depths, "range a..b or list a,b,c");

  CommonOptions repeat_opts;
  std::size_t repetitions = 2;
  std::vector<std::size_t> exclude;
  CLI::App* repeat = app.add_subcommand(
      "repeat", "train with consecutive seeds and summarize the weights");
  add_common(repeat, repeat_opts);
  repeat->add_option("--n", repetitions, "number of runs")->required();
  repeat->add_option("--exclude", exclude, "1-based runs to leave out");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*train) {
      const interflow::ExperimentSpec spec = resolve(train_opts);
      const interflow::DatasetPair data = interflow::load_experiment_data(spec);
      std::cout << interflow::metrics_csv_header() << "\n";
      const interflow::RunRecord r = interflow::run_experiment(
          spec, data, [](const interflow::EpochMetrics& m) {
            std::cout << interflow::metrics_csv_line(m) << std::endl;
          });
      std::cerr << "final test accuracy " << r.final_test_accuracy()
                << ", outputs in " << spec.output_dir.string() << "\n";
    } else if (*sweep) {
      const interflow::ExperimentSpec spec = resolve(sweep_opts);
      const auto rows =
          interflow::depth_sweep(spec, interflow::parse_depth_list(depths));
      std::cout << interflow::depth_sweep_csv(rows);
    } else if (*repeat) {
      const interflow::ExperimentSpec spec = resolve(repeat_opts);
      std::cout << interflow::repeat_and_summarize(spec, repetitions, exclude);
    }
  } catch (const interflow::TrainingAborted& e) {
    std::cerr << "interflow: training aborted: " << e.what() << "\n";
    return kExitAbort;
  } catch (const interflow::ConfigError& e) {
    std::cerr << "interflow: config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "interflow: " << e.what() << "\n";
    return kExitConfig;
  }
  return 0;
}
