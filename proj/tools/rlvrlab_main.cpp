#include <CLI11.hpp>
#include <iostream>

#include "rlvr/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"rlvr-lab: mixed-policy GRPO laboratory on synthetic verifiable-reward tasks"};
  app.require_subcommand(1);

  rlvr::TrainArgs train_args;
  auto* train = app.add_subcommand("train", "run a training experiment from a config file");
  train->add_option("--config", train_args.config_path, "experiment config file")->required();
  train->add_option("--set", train_args.overrides, "override key=value (repeatable)");
  train->add_option("--out", train_args.out_dir, "output directory (beats config and RLVR_LAB_OUT)");
  std::uint64_t seeds_flag = 0;
  auto* seeds_opt = train->add_option("--seeds", seeds_flag, "number of seeds to run");
  train->add_option("--resume", train_args.resume_path, "checkpoint to continue from (single seed)");

  std::vector<std::string> compare_dirs;
  std::string compare_out;
  auto* compare = app.add_subcommand("compare", "summarize and compare completed run directories");
  compare->add_option("dirs", compare_dirs, "run directories")->expected(-2);
  compare->add_option("--out", compare_out, "directory for compare.csv / compare.txt");

  std::string verify_suite, verify_out;
  std::uint64_t verify_seed = 20250415;
  auto* verify = app.add_subcommand("verify", "run a verification suite");
  verify->add_option("--suite", verify_suite, "Gradients|Variance|Theorem|Advantages")->required();
  verify->add_option("--out", verify_out, "directory for reports");
  verify->add_option("--seed", verify_seed, "randomization seed for the suite");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      if (seeds_opt->count() > 0) train_args.seeds = seeds_flag;
      return rlvr::cmd_train(train_args, std::cout);
    }
    if (compare->parsed()) return rlvr::cmd_compare(compare_dirs, compare_out, std::cout);
    if (verify->parsed()) return rlvr::cmd_verify(verify_suite, verify_out, verify_seed, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
