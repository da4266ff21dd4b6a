// SPDX-License-Identifier: Apache-2.0
// Command-line front end; all engine work goes through the C API.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "ncg/ncg.h"

namespace {

using json = nlohmann::json;

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::string preset;
  std::int64_t seed = -1;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool needs_config = true) {
  auto* c = cmd->add_option("--config", o.config_path, "Config JSON path");
  if (needs_config) c->required();
  cmd->add_option("--seed", o.seed, "Override every seed in the config");
  cmd->add_option("--out", o.out_dir, "Override the output directory");
  cmd->add_option("--preset", o.preset,
                  "Override the model section with a named preset")
      ->check(CLI::IsMember({"noise-default", "har-ucinet"}));
}

// Builds the effective config: file contents with CLI overrides applied.
// Returns false (and prints) on unreadable file or invalid JSON.
bool effective_config(const CommonOpts& o, std::string& out) {
  json cfg = json::object();
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in) {
      std::cerr << "error: cannot read config " << o.config_path << "\n";
      return false;
    }
    std::stringstream ss;
    ss << in.rdbuf();
    cfg = json::parse(ss.str(), nullptr, false);
    if (cfg.is_discarded() || !cfg.is_object()) {
      std::cerr << "error: " << o.config_path << " is not a JSON object\n";
      return false;
    }
  }
  if (!o.out_dir.empty()) cfg["output"] = o.out_dir;
  if (!o.preset.empty()) cfg["model"] = {{"preset", o.preset}};
  if (o.seed >= 0) {
    if (cfg.contains("data") && cfg["data"].is_object() &&
        !cfg["data"].contains("train_csv"))
      cfg["data"]["seed"] = o.seed;
    if (!cfg.contains("train") || cfg["train"].is_object()) {
      if (!cfg.contains("train")) cfg["train"] = json::object();
      cfg["train"]["seed"] = o.seed;
    }
  }
  out = cfg.dump();
  return true;
}

int report(ncg_status st) {
  if (st != NCG_OK) std::cerr << "error: " << ncg_last_error() << "\n";
  return static_cast<int>(st);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ncg: self-supervised coarse-graining of timeseries"};
  app.require_subcommand(1);

  CommonOpts gen_o, train_o, eval_o, sweep_o;
  std::size_t threads = std::thread::hardware_concurrency();
  std::uint64_t gc_seed = 1;
  std::size_t gc_instances = 100;

  auto* gen = app.add_subcommand("generate", "Write a synthetic dataset");
  add_common(gen, gen_o);
  auto* tr = app.add_subcommand("train", "Train a model per config");
  add_common(tr, train_o);
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common(ev, eval_o);
  auto* sw = app.add_subcommand("sweep", "Train/eval a parameter grid");
  add_common(sw, sweep_o);
  sw->add_option("--threads", threads, "Parallel sweep cells");
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient audit");
  gc->add_option("--seed", gc_seed, "Random seed for the audit");
  gc->add_option("--instances", gc_instances, "Instances per op");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;  // usage errors are exit code 1
  }

  std::string cfg;
  if (gen->parsed()) {
    if (!effective_config(gen_o, cfg)) return 1;
    return report(ncg_generate(cfg.c_str()));
  }
  if (tr->parsed()) {
    if (!effective_config(train_o, cfg)) return 1;
    return report(ncg_train(cfg.c_str()));
  }
  if (ev->parsed()) {
    if (!effective_config(eval_o, cfg)) return 1;
    return report(ncg_eval(cfg.c_str()));
  }
  if (sw->parsed()) {
    if (!effective_config(sweep_o, cfg)) return 1;
    return report(ncg_sweep(cfg.c_str(), threads));
  }
  if (gc->parsed()) {
    std::string buf(16384, '\0');
    const ncg_status st =
        ncg_gradcheck(gc_seed, gc_instances, buf.data(), buf.size());
    std::fputs(buf.c_str(), stdout);
    return report(st);
  }
  return 1;
}
