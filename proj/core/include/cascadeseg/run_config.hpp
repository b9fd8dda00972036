#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <string_view>

#include "cascadeseg/metrics.hpp"
#include "cascadeseg/phantom.hpp"
#include "cascadeseg/pipeline.hpp"
#include "cascadeseg/train.hpp"
#include "cascadeseg/unet.hpp"

namespace cseg {

enum class Model { one_step, sequential };

/// Flat `key = value` run configuration (UTF-8, `#` starts a comment, blank
/// lines ignored). Unknown keys are rejected; missing keys take the defaults
/// below. The single `seed` key drives data generation, initialization and
/// training.
struct RunConfig {
  std::uint64_t seed = 42;
  UNetConfig net;          // net.*       (head is picked per model at use)
  TrainConfig train;       // train.*
  PhantomSpec phantom;     // phantom.*   (size follows net.input_size)
  int n_train = 256;       // data.*
  int n_val = 32;
  int n_test = 32;
  CascadeThresholds thresholds;  // cascade.*
  WindowSpec window;             // window.*
  Band band;                     // eval.*
  int hist_bins = 49;
  Aggregation aggregation = Aggregation::pooled;

  /// Keys explicitly set by file or override; epochs defaults are
  /// model-dependent (one_step 40+20, sequential 50+20) unless set.
  std::set<std::string> explicit_keys;

  /// Training config with epochs resolved for the given model and seed and
  /// phantom kept in sync.
  TrainConfig resolved_train(Model model) const;
  PhantomSpec resolved_phantom() const;
};

/// Parses config text; diagnostics carry 1-based line numbers.
RunConfig parse_run_config(std::string_view text);

RunConfig load_run_config(const std::string& path);

/// Applies one `key=value` override (CLI --set, seed env override).
void apply_override(RunConfig& cfg, const std::string& key,
                    const std::string& value);

/// Full effective configuration, one `key = value` line per known key;
/// feeding the result back reproduces the run. Pass the model so the epoch
/// defaults render resolved.
std::string render_run_config(const RunConfig& cfg, Model model);

std::string to_string(Model model);
Model model_from_string(const std::string& name);

}  // namespace cseg
