#include <iostream>

#include "CLI11.hpp"
#include "nlmi/runtime.hpp"
#include "nlmi_cli/commands.hpp"

namespace {

void add_overrides(CLI::App* cmd, nlmi::cli::Overrides& o, std::string& nlmi_flag) {
  cmd->add_option("--seed", o.seed, "Root seed (overrides the config)");
  cmd->add_option("--out", o.out, "Output directory (overrides the config)");
  cmd->add_option("--layers", o.layers, "Number of message-passing layers K");
  cmd->add_option("--base", o.base, "Base convolution")->check(CLI::IsMember({"gcn", "gatedgcn"}));
  cmd->add_option("--nlmi", nlmi_flag, "NLMI encoding")->check(CLI::IsMember({"on", "off"}));
  cmd->add_option("--terms", o.terms, "Update terms, a subset of self,msg,enc");
}

}  // namespace

int main(int argc, char** argv) {
  using namespace nlmi::cli;
  nlmi::tune_allocator();

  CLI::App app{"Message-passing GNNs with neighbour-level message interaction encoding"};
  app.require_subcommand(1);

  GenOptions gen;
  std::string gen_nlmi;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a dataset from a spec or run config");
  gen_cmd->add_option("--config", gen.config, "Dataset spec or run config (JSON)")->required();
  add_overrides(gen_cmd, gen.overrides, gen_nlmi);

  TrainOptions train;
  std::string train_nlmi;
  auto* train_cmd = app.add_subcommand("train", "Train one model per seed of a run config");
  train_cmd->add_option("--config", train.config, "Run config (JSON)")->required();
  train_cmd->add_flag("--verbose,-v", train.verbose, "Log every epoch to stderr");
  add_overrides(train_cmd, train.overrides, train_nlmi);

  EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on one dataset split");
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--dataset", eval.dataset, "Dataset file")->required();
  eval_cmd->add_option("--split", eval.split, "train, val or test")->capture_default_str();
  eval_cmd->add_option("--batch-size", eval.batch_size, "Graphs per forward pass")->capture_default_str();

  GradcheckOptions grad;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of one random layer");
  grad_cmd->add_option("--variant", grad.variant, "gcn, nlmi-gcn, gatedgcn or nlmi-gatedgcn")->capture_default_str();
  grad_cmd->add_option("--dim", grad.dim, "Layer width d")->capture_default_str();
  grad_cmd->add_option("--nodes", grad.nodes, "Graph size")->capture_default_str();
  grad_cmd->add_option("--seed", grad.seed, "Seed for graph, inputs and weights")->capture_default_str();
  grad_cmd->add_option("--step", grad.step, "Central-difference step h")->capture_default_str();
  grad_cmd->add_option("--tol", grad.tolerance, "Maximum accepted relative error")->capture_default_str();

  TrainOptions ablate;
  std::string ablate_nlmi;
  auto* ablate_cmd = app.add_subcommand("ablate", "Compare the four update-term subsets");
  ablate_cmd->add_option("--config", ablate.config, "Run config (JSON)")->required();
  ablate_cmd->add_flag("--verbose,-v", ablate.verbose, "Log every epoch to stderr");
  add_overrides(ablate_cmd, ablate.overrides, ablate_nlmi);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  const auto to_bool = [](const std::string& s) -> std::optional<bool> {
    if (s.empty()) return std::nullopt;
    return s == "on";
  };
  gen.overrides.nlmi = to_bool(gen_nlmi);
  train.overrides.nlmi = to_bool(train_nlmi);
  ablate.overrides.nlmi = to_bool(ablate_nlmi);

  if (*gen_cmd) return cmd_gen(gen, std::cout, std::cerr);
  if (*train_cmd) return cmd_train(train, std::cout, std::cerr);
  if (*eval_cmd) return cmd_eval(eval, std::cout, std::cerr);
  if (*grad_cmd) return cmd_gradcheck(grad, std::cout, std::cerr);
  return cmd_ablate(ablate, std::cout, std::cerr);
}
