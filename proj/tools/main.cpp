// Copyright contributors to the nfula project.
// SPDX-License-Identifier: Apache-2.0

#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nfula/config.hpp"
#include "nfula/error.hpp"
#include "nfula/experiment.hpp"

namespace {

struct CommonArgs {
  std::string config_file;
  std::vector<std::string> overrides;
};

// File config first, then --set overrides; later values win.
nfula::Config resolve(const CommonArgs& args) {
  nfula::Config cfg;
  if (!args.config_file.empty()) cfg = nfula::Config::parse_file(args.config_file);
  for (const std::string& kv : args.overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw nfula::ParseError("--set expects key=value, got `" + kv + "`");
    std::string key = kv.substr(0, eq);
    std::string value = kv.substr(eq + 1);
    while (!key.empty() && key.back() == ' ') key.pop_back();
    while (!value.empty() && value.front() == ' ') value.erase(value.begin());
    cfg.set(key, value);
  }
  return cfg;
}

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_file, "config file (key = value lines)");
  cmd->add_option("--set", args.overrides, "override a config key (key=value)")
      ->take_all();
}

// Shorthand flags store into the override list so precedence stays uniform.
void add_key_option(CLI::App* cmd, const std::string& flag, const std::string& key,
                    const std::string& help, CommonArgs& args) {
  cmd->add_option_function<std::string>(
      flag, [&args, key](const std::string& v) { args.overrides.push_back(key + "=" + v); },
      help);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"normalizing-flow Langevin sampling for imaging inverse problems"};
  app.require_subcommand(1);

  struct Sub {
    CLI::App* cmd;
    CommonArgs args;
    std::function<int(const nfula::Config&, std::ostream&)> run;
  };
  std::vector<Sub> subs(6);

  subs[0].cmd = app.add_subcommand("degrade", "simulate an observation y from a phantom");
  subs[0].run = nfula::cmd_degrade;
  subs[1].cmd = app.add_subcommand("train-flow", "train a coupling flow, saving a checkpoint");
  subs[1].run = nfula::cmd_train_flow;
  subs[2].cmd = app.add_subcommand("sample", "run Langevin chains against an observation");
  subs[2].run = nfula::cmd_sample;
  subs[3].cmd = app.add_subcommand("certify", "report Lipschitz certification for a checkpoint");
  subs[3].run = nfula::cmd_certify;
  subs[4].cmd = app.add_subcommand("diagnose", "compute chain diagnostics into report.csv");
  subs[4].run = nfula::cmd_diagnose;
  subs[5].cmd = app.add_subcommand("verify", "run self-contained verification suites");
  subs[5].run = nfula::cmd_verify;

  for (Sub& sub : subs) {
    add_common(sub.cmd, sub.args);
    add_key_option(sub.cmd, "--seed", "seed", "master seed", sub.args);
    add_key_option(sub.cmd, "--out", "out", "output directory", sub.args);
  }
  add_key_option(subs[0].cmd, "--problem", "problem", "deblur|inpaint|ct|toy2d", subs[0].args);
  add_key_option(subs[0].cmd, "--image", "image.source", "phantom name or .nft/.pgm path",
                 subs[0].args);
  add_key_option(subs[1].cmd, "--data", "data.dir", "directory of .nft/.pgm images",
                 subs[1].args);
  add_key_option(subs[1].cmd, "--generator", "data.generator",
                 "gauss2d|mixture2d|disks", subs[1].args);
  add_key_option(subs[1].cmd, "--epochs", "train.epochs", "total epochs to reach",
                 subs[1].args);
  add_key_option(subs[1].cmd, "--checkpoint", "checkpoint.path", "checkpoint file",
                 subs[1].args);
  add_key_option(subs[2].cmd, "--problem", "problem", "deblur|inpaint|ct|toy2d", subs[2].args);
  add_key_option(subs[2].cmd, "--y", "y.path", "observation tensor", subs[2].args);
  add_key_option(subs[2].cmd, "--checkpoint", "checkpoint.path", "flow checkpoint",
                 subs[2].args);
  add_key_option(subs[2].cmd, "--chains", "chains", "number of parallel chains",
                 subs[2].args);
  add_key_option(subs[2].cmd, "--delta", "sampler.delta", "step size", subs[2].args);
  add_key_option(subs[3].cmd, "--checkpoint", "checkpoint.path", "flow checkpoint",
                 subs[3].args);
  add_key_option(subs[4].cmd, "--chain", "chain.dir", "chain output directory",
                 subs[4].args);
  add_key_option(subs[4].cmd, "--chain2", "chain.dir2",
                 "second chain directory for W1 comparison", subs[4].args);
  add_key_option(subs[4].cmd, "--ref", "ref.path", "reference tensor for PSNR",
                 subs[4].args);

  std::string suite;
  subs[5].cmd->add_option("suite", suite,
                          "conjugate-gaussian|contraction|bias-scaling|finite-moments|"
                          "well-posedness|acf-units|all");

  CLI11_PARSE(app, argc, argv);

  try {
    for (Sub& sub : subs) {
      if (!sub.cmd->parsed()) continue;
      if (sub.cmd->get_name() == "verify" && !suite.empty())
        sub.args.overrides.push_back("suite=" + suite);
      nfula::Config cfg = resolve(sub.args);
      return sub.run(cfg, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
