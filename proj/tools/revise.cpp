#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "revise/cli/commands.hpp"

using namespace revise;

int main(int argc, char** argv) {
  CLI::App app{"Self-reflective video editing toy pipeline"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> overrides;
  std::string objective, judge, mode, output;
  double lambda = -1;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--set", overrides, "override a config key, e.g. --set train.epochs=5");
    sub->add_option("--output", output, "output directory (output_dir)");
  };
  auto* gen = app.add_subcommand("generate-data", "write train/val/test JSONL");
  auto* pre = app.add_subcommand("pretrain-critic", "pretrain the critic and check the readiness gate");
  auto* trn = app.add_subcommand("train", "train the generator");
  auto* evl = app.add_subcommand("evaluate", "score a generator checkpoint");
  auto* swp = app.add_subcommand("sweep-lambda", "train and evaluate over a list of lambda values");
  auto* cur = app.add_subcommand("curate", "build in-context triplets from clips");
  for (auto* sub : {gen, pre, trn, evl, swp, cur}) common(sub);
  trn->add_option("--objective", objective, "sft, uso or rwo")->check(CLI::IsMember({"sft", "uso", "rwo"}));
  trn->add_option("--lambda", lambda, "reason-loss weight");
  evl->add_option("--judge", judge, "oracle or remote")->check(CLI::IsMember({"oracle", "remote"}));
  evl->add_option("--mode", mode, "editing or in_context")->check(CLI::IsMember({"editing", "in_context"}));
  evl->add_option("--objective", objective, "which trained objective to evaluate")->check(CLI::IsMember({"sft", "uso", "rwo"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kValidation;
  }

  try {
    if (!output.empty()) overrides.push_back("output_dir=" + nlohmann::json(output).dump());
    if (!objective.empty()) overrides.push_back("train.objective=" + objective);
    if (lambda >= 0) overrides.push_back("train.lambda=" + nlohmann::json(lambda).dump());
    if (!judge.empty()) overrides.push_back("eval.judge=" + judge);
    if (!mode.empty()) overrides.push_back("eval.mode=" + mode);
    const cli::RunConfig cfg = cli::parse_run_config(cli::load_config(config_path, overrides));
    if (*gen) cli::cmd_generate_data(cfg, std::cout);
    if (*pre) cli::cmd_pretrain_critic(cfg, std::cout);
    if (*trn) cli::cmd_train(cfg, std::cout);
    if (*evl) cli::cmd_evaluate(cfg, std::cout);
    if (*swp) {
      const auto out = cli::cmd_sweep_lambda(cfg, std::cout);
      std::cout << out.csv;
      if (!out.failures.empty()) {
        std::cerr << "sweep-lambda: " << out.failures.size() << " member run(s) failed\n";
        return cli::kGate;
      }
    }
    if (*cur) cli::cmd_curate(cfg, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::exit_code(e);
  }
  return 0;
}
