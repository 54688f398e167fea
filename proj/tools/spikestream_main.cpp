// Copyright 2026 SpikeStream Contributors
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

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "spikestream/config.hpp"
#include "spikestream/distill.hpp"
#include "spikestream/encoders.hpp"
#include "spikestream/energy.hpp"
#include "spikestream/error.hpp"
#include "spikestream/finetune.hpp"
#include "spikestream/gradcheck.hpp"
#include "spikestream/io.hpp"
#include "spikestream/kernels.hpp"

namespace {

using namespace spikestream;

struct CliArgs {
  std::string verb;
  std::string config_path;
  std::vector<std::string> overrides;
  int64_t seed = -1;  // -1: take the config value
  std::string out_dir = ".";
};

Config resolve_config(const CliArgs& args) {
  Config cfg = Config::defaults();
  if (!args.config_path.empty()) cfg.load_file(args.config_path);
  for (const std::string& kv : args.overrides) cfg.set_kv(kv);
  if (args.seed >= 0) cfg.set("seed", std::to_string(args.seed));
  return cfg;
}

std::string out_path(const CliArgs& args, const std::string& name) {
  return (std::filesystem::path(args.out_dir) / name).string();
}

// Wall-clock goes only into this sidecar; every machine-readable output is
// byte-identical across runs with the same config and seed.
void write_sidecar(const CliArgs& args, const Config& cfg) {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char stamp[64];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  std::ostringstream os;
  os << "command=" << args.verb << "\n"
     << "timestamp=" << stamp << "\n"
     << "seed=" << cfg.get("seed") << "\n";
  io::write_text_file(out_path(args, "run_info.txt"), os.str());
}

const std::string& require_path(const Config& cfg, const std::string& key) {
  if (!cfg.has(key))
    throw config_error("required config key " + key + " is empty");
  return cfg.get(key);
}

DualStreamModel build_model(const Config& cfg) {
  return DualStreamModel(
      cfg, io::read_store(require_path(cfg, "data.word_embeddings")));
}

void save_model(const CliArgs& args, const Config& cfg,
                const DualStreamModel& model) {
  io::Checkpoint ckpt;
  ckpt.config_text = cfg.to_text();
  model.save_params(ckpt);
  io::write_checkpoint(out_path(args, "checkpoint.scck"), ckpt);
}

LabelSet load_labels(const Config& cfg) {
  return LabelSet::load(require_path(cfg, "data.labels"),
                        cfg.get("eval.template"));
}

int run_pretrain(const CliArgs& args, const Config& cfg) {
  const uint64_t seed = static_cast<uint64_t>(cfg.get_i64("seed"));
  DualStreamModel model = build_model(cfg);
  const auto train =
      io::load_manifest(require_path(cfg, "data.train_manifest"), -1);
  const auto labels = io::read_lines(require_path(cfg, "data.labels"));
  const auto templates = io::read_lines(require_path(cfg, "data.templates"));
  const auto prompts = render_prompts(labels, templates);

  const auto result = pretrain(
      model, train, prompts,
      io::read_store(require_path(cfg, "data.teacher_images")),
      io::read_store(require_path(cfg, "data.teacher_texts")),
      PretrainCfg::from_config(cfg), cfg, seed);
  io::write_text_file(out_path(args, "pretrain_log.tsv"),
                      loss_log_to_text(result.log, seed));
  save_model(args, cfg, model);
  std::cout << "pretrain: " << result.log.size() << " epochs logged, "
            << "checkpoint written to " << out_path(args, "checkpoint.scck")
            << "\n";
  return 0;
}

int run_finetune(const CliArgs& args, const Config& cfg) {
  const uint64_t seed = static_cast<uint64_t>(cfg.get_i64("seed"));
  DualStreamModel model = build_model(cfg);
  model.load_params(io::read_checkpoint(require_path(cfg, "checkpoint")));
  const LabelSet labels = load_labels(cfg);
  const auto train = io::load_manifest(
      require_path(cfg, "data.train_manifest"),
      static_cast<int64_t>(labels.size()));

  const auto result = finetune(
      model, train, labels,
      io::read_store(require_path(cfg, "data.teacher_probs")),
      FinetuneCfg::from_config(cfg), cfg, seed);
  io::write_text_file(out_path(args, "finetune_log.tsv"),
                      finetune_log_to_text(result.log, seed));
  save_model(args, cfg, model);
  if (!result.log.empty())
    std::cout << "finetune: final train accuracy "
              << result.log.back().train_accuracy << "\n";
  return 0;
}

int run_eval(const CliArgs& args, const Config& cfg) {
  const uint64_t seed = static_cast<uint64_t>(cfg.get_i64("seed"));
  DualStreamModel model = build_model(cfg);
  model.load_params(io::read_checkpoint(require_path(cfg, "checkpoint")));
  const LabelSet labels = load_labels(cfg);
  const auto items = io::load_manifest(
      require_path(cfg, "data.eval_manifest"),
      static_cast<int64_t>(labels.size()));
  const double acc = evaluate_accuracy(model, items, labels,
                                       cfg.get_f64("softmax.temperature"));
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", acc);
  std::ostringstream os;
  os << "# seed=" << seed << "\n"
     << "eval\t" << seed << "\t" << buf << "\n";
  io::write_text_file(out_path(args, "eval_report.tsv"), os.str());
  std::cout << "eval: accuracy " << buf << " over " << items.size()
            << " items\n";
  return 0;
}

int run_robustness(const CliArgs& args, const Config& cfg) {
  const uint64_t seed = static_cast<uint64_t>(cfg.get_i64("seed"));
  DualStreamModel model = build_model(cfg);
  model.load_params(io::read_checkpoint(require_path(cfg, "checkpoint")));
  const LabelSet labels = load_labels(cfg);
  const auto items = io::load_manifest(
      require_path(cfg, "data.eval_manifest"),
      static_cast<int64_t>(labels.size()));
  const double temperature = cfg.get_f64("softmax.temperature");

  std::vector<RobustRecord> records;
  const std::string& mode = cfg.get("robust.mode");
  if (mode == "expand") {
    const auto distractors =
        io::read_lines(require_path(cfg, "robust.aux_labels"));
    records = robustness_expand(model, items, labels, distractors,
                                cfg.get_ints("robust.factors"), temperature);
  } else if (mode == "replace") {
    std::vector<std::pair<std::string, std::string>> subs;
    for (const std::string& line :
         io::read_lines(require_path(cfg, "robust.replace_map"))) {
      const size_t tab = line.find('\t');
      if (tab == std::string::npos)
        throw data_error("replace map line is not orig<TAB>substitute: " +
                         line);
      subs.emplace_back(line.substr(0, tab), line.substr(tab + 1));
    }
    std::vector<uint64_t> seeds;
    for (int64_t s : cfg.get_ints("robust.seeds"))
      seeds.push_back(static_cast<uint64_t>(s));
    records = robustness_replace(model, items, labels, subs,
                                 cfg.get_ints("robust.rates"), seeds,
                                 temperature);
  } else {
    throw config_error("robust.mode must be expand or replace, got " + mode);
  }
  io::write_text_file(out_path(args, "robustness_report.tsv"),
                      robust_report_to_text(records, seed));
  std::cout << "robustness: " << records.size() << " records written\n";
  return 0;
}

int run_energy(const CliArgs& args, const Config& cfg) {
  const uint64_t seed = static_cast<uint64_t>(cfg.get_i64("seed"));
  energy::EnergyReport report;
  if (cfg.has("energy.force_gamma")) {
    report = energy::report_for_gamma(cfg.get_i64("time_steps"),
                                      cfg.get_f64("energy.force_gamma"));
  } else {
    DualStreamModel model = build_model(cfg);
    model.load_params(io::read_checkpoint(require_path(cfg, "checkpoint")));
    auto items = io::load_manifest(require_path(cfg, "data.eval_manifest"), -1);
    const int64_t cap = cfg.get_i64("energy.sample");
    if (cap > 0 && cap < static_cast<int64_t>(items.size()))
      items.resize(static_cast<size_t>(cap));
    std::vector<std::string> prompts;
    if (cfg.has("data.labels")) {
      const LabelSet labels = load_labels(cfg);
      for (size_t k = 0; k < labels.size(); ++k)
        prompts.push_back(labels.prompt(k));
    }
    report = energy::profile(model, items, prompts,
                             cfg.get_bool("energy.per_layer_mean"));
  }
  io::write_text_file(out_path(args, "energy_report.tsv"),
                      report.to_records(seed));
  io::write_text_file(out_path(args, "energy_table.txt"), report.to_table());
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", 100.0 * report.reduction_rate);
  std::cout << report.to_table();
  std::cout << "ECR\t" << buf << "%\n";
  return 0;
}

int run_gradcheck_cmd(const CliArgs& args, const Config& cfg) {
  const uint64_t seed = static_cast<uint64_t>(cfg.get_i64("seed"));
  const auto rows = run_gradcheck(seed, cfg.get_i64("gradcheck.trials"));
  std::ostringstream os;
  os << "# seed=" << seed << "\n";
  char buf[128];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof buf, "%s\t%.6e\t%s\n", row.op.c_str(),
                  row.max_rel_err, row.pass ? "pass" : "fail");
    os << buf;
  }
  io::write_text_file(out_path(args, "gradcheck.tsv"), os.str());
  std::cout << gradcheck_table(rows);
  if (!gradcheck_all_pass(rows))
    throw numeric_error("finite-difference check failed");
  std::cout << "gradcheck: all " << rows.size() << " ops within "
            << kGradCheckTolerance << " relative\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CliArgs args;
  CLI::App app{"spiking dual-stream classifier toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--config", args.config_path, "key=value config file");
  app.add_option("--set", args.overrides, "override, repeatable: key=value");
  app.add_option("--seed", args.seed, "seed recorded in all outputs");
  app.add_option("--out-dir", args.out_dir, "directory for artifacts");
  for (const char* verb :
       {"pretrain", "finetune", "eval", "robustness", "energy", "gradcheck"})
    app.add_subcommand(verb);

  CLI11_PARSE(app, argc, argv);
  args.verb = app.get_subcommands().front()->get_name();

  try {
    const Config cfg = resolve_config(args);
    kernels::set_threads(static_cast<int>(cfg.get_i64("threads")));
    kernels::set_mode(cfg.get_bool("parallel") ? kernels::Mode::kOpenMP
                                               : kernels::Mode::kSerial);
    std::filesystem::create_directories(args.out_dir);
    write_sidecar(args, cfg);

    if (args.verb == "pretrain") return run_pretrain(args, cfg);
    if (args.verb == "finetune") return run_finetune(args, cfg);
    if (args.verb == "eval") return run_eval(args, cfg);
    if (args.verb == "robustness") return run_robustness(args, cfg);
    if (args.verb == "energy") return run_energy(args, cfg);
    if (args.verb == "gradcheck") return run_gradcheck_cmd(args, cfg);
    throw config_error("unknown command " + args.verb);
  } catch (const Error& e) {
    std::cerr << "error\tkind=" << e.kind_name() << "\tmsg=" << e.what()
              << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error\tkind=internal\tmsg=" << e.what() << "\n";
    return 4;
  }
}
