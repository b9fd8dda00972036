#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cascadeseg/run_config.hpp"

namespace cseg::cli {

/// Configuration sources shared by every subcommand. Precedence, lowest to
/// highest: built-in defaults, --config file, CASCADE_SEG_SEED, --set
/// overrides, dedicated flags.
struct ConfigOpts {
  std::string config_path;                  // empty: defaults only
  std::vector<std::string> set_overrides;   // key=value
  std::optional<std::uint64_t> seed;
  std::optional<int> n_train, n_val, n_test;
};

RunConfig resolve_config(const ConfigOpts& opts);

int cmd_gen_data(const ConfigOpts& opts, const std::string& out_dir);

int cmd_train(const ConfigOpts& opts, Model model, const std::string& data_dir,
              const std::string& out_dir);

struct PredictOpts {
  ConfigOpts config;
  std::string model_a, model_b;  // sequential
  std::string model_c;           // one-step
  std::string input;             // split dir, dir of PGMs, or one PGM file
  std::string out_dir;
};
int cmd_predict(const PredictOpts& opts);

struct EvalOpts {
  ConfigOpts config;
  std::string pred_dir;
  std::string truth_dir;
  std::string out_dir;
  // Alpha-sweep mode: re-evaluates tumor checkpoints against a split dir.
  std::string sweep_model_a;
  std::vector<std::string> sweep_model_b;
  std::string sweep_data_dir;
};
int cmd_eval(const EvalOpts& opts);

/// Loads an on-disk split (img/ + lbl/ PGM pairs) back into samples.
std::vector<Sample> load_split(const std::string& split_dir);

}  // namespace cseg::cli
