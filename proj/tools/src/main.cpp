#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"

namespace {

void add_config_flags(CLI::App* cmd, cseg::cli::ConfigOpts& opts) {
  cmd->add_option("--config", opts.config_path, "run configuration file");
  cmd->add_option("--set", opts.set_overrides,
                  "override a config key, e.g. --set train.epochs_main=5");
  cmd->add_option("--seed", opts.seed, "override the run seed");
  cmd->add_option("--n-train", opts.n_train, "training split size");
  cmd->add_option("--n-val", opts.n_val, "validation split size");
  cmd->add_option("--n-test", opts.n_test, "test split size");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-stage liver/tumor segmentation on synthetic phantoms"};
  app.require_subcommand(1);

  cseg::cli::ConfigOpts gen_cfg;
  std::string gen_out;
  CLI::App* gen = app.add_subcommand("gen-data", "generate a phantom dataset");
  add_config_flags(gen, gen_cfg);
  gen->add_option("--out-dir", gen_out, "output directory")->required();

  cseg::cli::ConfigOpts train_cfg;
  std::string train_model, train_data, train_out;
  CLI::App* train = app.add_subcommand("train", "train a model");
  add_config_flags(train, train_cfg);
  train->add_option("--model", train_model, "one_step | sequential")->required();
  train->add_option("--data-dir", train_data, "dataset directory")->required();
  train->add_option("--out-dir", train_out, "output directory")->required();

  cseg::cli::PredictOpts predict_opts;
  CLI::App* predict = app.add_subcommand("predict", "segment images");
  add_config_flags(predict, predict_opts.config);
  predict->add_option("--model-a", predict_opts.model_a, "liver checkpoint");
  predict->add_option("--model-b", predict_opts.model_b, "tumor checkpoint");
  predict->add_option("--model-c", predict_opts.model_c, "one-step checkpoint");
  predict->add_option("--input", predict_opts.input, "PGM file or split directory")
      ->required();
  predict->add_option("--out-dir", predict_opts.out_dir, "output directory")
      ->required();

  cseg::cli::EvalOpts eval_opts;
  CLI::App* eval = app.add_subcommand("eval", "evaluate predictions");
  add_config_flags(eval, eval_opts.config);
  eval->add_option("--pred-dir", eval_opts.pred_dir, "predictions directory")
      ->required();
  eval->add_option("--truth-dir", eval_opts.truth_dir, "ground-truth directory")
      ->required();
  eval->add_option("--out-dir", eval_opts.out_dir, "output directory")->required();
  eval->add_option("--sweep-model-a", eval_opts.sweep_model_a,
                   "liver checkpoint for sweep mode");
  eval->add_option("--sweep-model-b", eval_opts.sweep_model_b,
                   "tumor checkpoint to sweep (repeatable)");
  eval->add_option("--sweep-data-dir", eval_opts.sweep_data_dir,
                   "split directory for sweep mode");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cseg::cli::cmd_gen_data(gen_cfg, gen_out);
    if (train->parsed())
      return cseg::cli::cmd_train(train_cfg, cseg::model_from_string(train_model),
                                  train_data, train_out);
    if (predict->parsed()) return cseg::cli::cmd_predict(predict_opts);
    if (eval->parsed()) return cseg::cli::cmd_eval(eval_opts);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 1;
}
