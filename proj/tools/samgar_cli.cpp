// Copyright 2026 The samgar Authors. All Rights Reserved.
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

// samgar: dataset generation, training, evaluation, sweeps and gradient
// checks from one config document.
//
// Exit codes: 0 success, 1 gradient check failed, 2 bad config or usage,
// 3 runtime failure (I/O, aborted training).

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sam/gradcheck.hpp"
#include "sam/pipeline/checkpoint.hpp"
#include "sam/pipeline/train.hpp"
#include "sam/run_config.hpp"
#include "sam/synthetic_scene.hpp"

namespace fs = std::filesystem;
using namespace sam;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string variant;
  std::string out;
  std::string dataset;
  std::string checkpoint;
  std::string axis;
  std::vector<double> values;
  int trials = 0;
  bool zero_w_z = false;
};

RunConfig load_config(const Options& o) {
  RunConfig rc;
  if (!o.config.empty()) {
    json doc;
    try {
      doc = json::parse(io::read_text(o.config));
    } catch (const json::parse_error& e) {
      throw ConfigError(o.config, std::string("not valid JSON: ") + e.what());
    }
    rc = parse_run_config(doc);
  }
  if (!o.variant.empty()) rc.variant = parse_variant(o.variant);
  if (o.seed) rc.seed = o.seed;
  rc.finalize();
  return rc;
}

std::string pick(const std::string& flag, const std::string& fallback) { return flag.empty() ? fallback : flag; }

void write_report(const fs::path& dir, const EvalReport& rep, const std::vector<std::string>& names) {
  io::write_text(dir / "report.json", json(rep).dump(1) + "\n");
  io::write_text(dir / "confusion.csv", confusion_csv(rep, names));
}

int cmd_generate(const Options& o) {
  const auto rc = load_config(o);
  const fs::path dir = pick(o.out, rc.dataset_dir);
  const auto summary = generate_dataset(rc.generator, dir, rc.n_train, rc.n_test);
  std::cout << "wrote " << rc.n_train << " train / " << rc.n_test << " test samples to " << dir.string() << "\n";
  std::cout << "train per class:";
  for (auto c : summary.train_per_class) std::cout << ' ' << c;
  std::cout << "\n";
  return 0;
}

template <typename T>
EvalReport train_run(const RunConfig& rc, const LoadedDataset& ds, const fs::path& out) {
  fs::create_directories(out);
  io::write_text(out / "config.json",
                 json{{"variant", to_string(rc.variant)}, {"generator", ds.config}, {"train", rc.train}}.dump(1) + "\n");
  std::ofstream metrics(out / "metrics.jsonl", std::ios::binary | std::ios::trunc);
  if (!metrics) throw io::IoError("cannot open for writing: " + (out / "metrics.jsonl").string());
  auto res = train<T>(rc.train, ds.train, ds.test, static_cast<std::size_t>(ds.config.feature_dim),
                      [&](const EpochRecord& r) {
                        metrics << to_json_record(r).dump() << '\n';
                        metrics.flush();
                        std::cerr << "epoch " << r.epoch << " test acc " << r.test.acc << " mean acc "
                                  << r.test.mean_acc << "\n";
                      });
  save_checkpoint(res.model, rc.train, out / "checkpoint");
  const auto& final_report = res.log.back().test;
  write_report(out, final_report, ds.class_names);
  return final_report;
}

int cmd_train(const Options& o) {
  const auto rc = load_config(o);
  const auto ds = load_dataset(pick(o.dataset, rc.dataset_dir), true);
  const fs::path out = pick(o.out, rc.report_dir);
  const auto rep = rc.single_precision ? train_run<float>(rc, ds, out) : train_run<double>(rc, ds, out);
  std::cout << "acc " << rep.acc << " mean_acc " << rep.mean_acc << "\n";
  return 0;
}

template <typename T>
EvalReport eval_run(const fs::path& ckpt, const LoadedDataset& ds) {
  const auto ck = load_checkpoint<T>(ckpt);
  if (ck.model.dims.raw_dim != static_cast<std::size_t>(ds.config.feature_dim) ||
      ck.model.dims.num_classes != static_cast<std::size_t>(ds.config.num_classes)) {
    throw io::IoError("checkpoint dims do not match the dataset");
  }
  return evaluate(ck.model, ds.test, ck.train);
}

int cmd_eval(const Options& o) {
  const auto rc = load_config(o);
  const auto ds = load_dataset(pick(o.dataset, rc.dataset_dir), true);
  const fs::path ckpt = pick(o.checkpoint, rc.checkpoint_dir);
  const auto rep = rc.single_precision ? eval_run<float>(ckpt, ds) : eval_run<double>(ckpt, ds);
  const fs::path out = pick(o.out, rc.report_dir);
  write_report(out, rep, ds.class_names);
  std::cout << "acc " << rep.acc << " mean_acc " << rep.mean_acc << "\n";
  return 0;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c == '\n' ? ' ' : c);
  return q + "\"";
}

int cmd_sweep(const Options& o) {
  const auto rc = load_config(o);
  SweepAxis axis;
  if (!o.axis.empty()) {
    axis = parse_sweep_axis(o.axis, "--axis");
  } else if (rc.sweep_axis) {
    axis = *rc.sweep_axis;
  } else {
    throw ConfigError("sweep.axis", "no axis given");
  }
  auto values = !o.values.empty() ? o.values : !rc.sweep_values.empty() ? rc.sweep_values : default_sweep_values(axis);
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());

  const auto ds = load_dataset(pick(o.dataset, rc.dataset_dir), true);
  const fs::path out = pick(o.out, rc.report_dir);
  std::ostringstream csv;
  csv << "value,acc,mean_acc,status\n";
  for (double v : values) {
    std::ostringstream value;
    value << v;
    try {
      TrainConfig cfg = rc.train;
      apply_sweep_value(cfg, axis, v);
      RunConfig point = rc;
      point.train = cfg;
      const auto dir = out / "points" / (std::string(to_string(axis)) + "=" + value.str());
      const auto rep = rc.single_precision ? train_run<float>(point, ds, dir) : train_run<double>(point, ds, dir);
      csv << value.str() << ',' << rep.acc << ',' << rep.mean_acc << ",ok\n";
    } catch (const std::exception& e) {
      std::cerr << "sweep point " << value.str() << " failed: " << e.what() << "\n";
      csv << value.str() << ",,," << csv_field(std::string("error: ") + e.what()) << '\n';
    }
  }
  io::write_text(out / "sweep.csv", csv.str());
  std::cout << csv.str();
  return 0;
}

int cmd_gradcheck(const Options& o) {
  const auto rc = load_config(o);
  GradCheckConfig gc;
  gc.instances = o.trials > 0 ? o.trials : rc.gradcheck_trials;
  gc.seed = rc.seed.value_or(0);
  gc.zero_w_z = o.zero_w_z;
  const auto report = run_gradcheck(gc);
  const std::string text = json(report).dump(1) + "\n";
  if (!o.out.empty()) io::write_text(fs::path(o.out) / "gradcheck.json", text);
  std::cout << text;
  return report.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"samgar: relational proposal selection for weakly labelled video"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON config document")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "seed for the generator and the trainer");
    sub->add_option("--variant", o.variant, "B1..B6 or custom");
    sub->add_option("--out", o.out, "output directory");
  };
  auto* gen = app.add_subcommand("generate", "write a synthetic dataset");
  auto* tr = app.add_subcommand("train", "train a model and write metrics, checkpoint and report");
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  auto* sw = app.add_subcommand("sweep", "train and evaluate over one parameter axis");
  auto* gc = app.add_subcommand("gradcheck", "finite-difference audit of every backward pass");
  for (auto* s : {gen, tr, ev, sw, gc}) common(s);
  for (auto* s : {tr, ev, sw}) s->add_option("--dataset", o.dataset, "dataset directory");
  ev->add_option("--checkpoint", o.checkpoint, "checkpoint directory");
  sw->add_option("--axis", o.axis, "Np, theta, Kp or Kf");
  sw->add_option("--values", o.values, "comma-separated values")->delimiter(',');
  gc->add_option("--trials", o.trials, "instances per suite")->check(CLI::PositiveNumber);
  gc->add_flag("--zero-wz", o.zero_w_z, "force W_z = 0 in every instance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_generate(o);
    if (tr->parsed()) return cmd_train(o);
    if (ev->parsed()) return cmd_eval(o);
    if (sw->parsed()) return cmd_sweep(o);
    if (gc->parsed()) return cmd_gradcheck(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
