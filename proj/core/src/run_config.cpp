#include "cascadeseg/run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "cascadeseg/csv.hpp"

namespace cseg {

namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const char* expected) {
  throw std::invalid_argument("config: key '" + key + "': cannot parse '" +
                              value + "' as " + expected);
}

long long parse_int(const std::string& key, const std::string& value) {
  long long v = 0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size())
    bad_value(key, value, "an integer");
  return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size())
    bad_value(key, value, "an unsigned integer");
  return v;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) bad_value(key, value, "a number");
    return v;
  } catch (const std::invalid_argument&) {
    bad_value(key, value, "a number");
  } catch (const std::out_of_range&) {
    bad_value(key, value, "a number");
  }
}

struct KeyHandler {
  const char* key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

std::string loss_mode_name(LossMode m) {
  switch (m) {
    case LossMode::plain: return "plain";
    case LossMode::fixed_alpha: return "fixed_alpha";
    case LossMode::balanced: return "balanced";
  }
  return "balanced";
}

const std::vector<KeyHandler>& registry() {
  static const std::vector<KeyHandler> handlers = [] {
    std::vector<KeyHandler> h;
    auto add = [&h](const char* key, auto set, auto get) {
      h.push_back({key, set, get});
    };
    auto add_int = [&add](const char* key, auto member_ptr) {
      add(key,
          [key, member_ptr](RunConfig& c, const std::string& v) {
            c.*member_ptr = static_cast<int>(parse_int(key, v));
          },
          [member_ptr](const RunConfig& c) { return std::to_string(c.*member_ptr); });
    };
    auto add_double = [&add](const char* key, auto object_ptr, auto member_ptr) {
      add(key,
          [key, object_ptr, member_ptr](RunConfig& c, const std::string& v) {
            (c.*object_ptr).*member_ptr = parse_double(key, v);
          },
          [object_ptr, member_ptr](const RunConfig& c) {
            return fmt_double((c.*object_ptr).*member_ptr);
          });
    };

    add("seed",
        [](RunConfig& c, const std::string& v) { c.seed = parse_u64("seed", v); },
        [](const RunConfig& c) { return std::to_string(c.seed); });

    add("net.input_size",
        [](RunConfig& c, const std::string& v) {
          c.net.input_size = static_cast<int>(parse_int("net.input_size", v));
        },
        [](const RunConfig& c) { return std::to_string(c.net.input_size); });
    add("net.depth",
        [](RunConfig& c, const std::string& v) {
          c.net.depth = static_cast<int>(parse_int("net.depth", v));
        },
        [](const RunConfig& c) { return std::to_string(c.net.depth); });
    add("net.base_channels",
        [](RunConfig& c, const std::string& v) {
          c.net.base_channels =
              static_cast<int>(parse_int("net.base_channels", v));
        },
        [](const RunConfig& c) { return std::to_string(c.net.base_channels); });
    add("net.dropout_rate",
        [](RunConfig& c, const std::string& v) {
          c.net.dropout_rate = parse_double("net.dropout_rate", v);
        },
        [](const RunConfig& c) { return fmt_double(c.net.dropout_rate); });

    add_double("train.lr_initial", &RunConfig::train, &TrainConfig::lr_initial);
    add_double("train.lr_finetune", &RunConfig::train, &TrainConfig::lr_finetune);
    add_double("train.momentum", &RunConfig::train, &TrainConfig::momentum);
    add("train.epochs_main",
        [](RunConfig& c, const std::string& v) {
          c.train.epochs_main =
              static_cast<int>(parse_int("train.epochs_main", v));
        },
        [](const RunConfig& c) { return std::to_string(c.train.epochs_main); });
    add("train.epochs_finetune",
        [](RunConfig& c, const std::string& v) {
          c.train.epochs_finetune =
              static_cast<int>(parse_int("train.epochs_finetune", v));
        },
        [](const RunConfig& c) {
          return std::to_string(c.train.epochs_finetune);
        });
    add("train.batch_size",
        [](RunConfig& c, const std::string& v) {
          c.train.batch_size = static_cast<int>(parse_int("train.batch_size", v));
        },
        [](const RunConfig& c) { return std::to_string(c.train.batch_size); });
    add("train.loss_mode",
        [](RunConfig& c, const std::string& v) {
          if (v == "plain") c.train.loss_mode = LossMode::plain;
          else if (v == "fixed_alpha") c.train.loss_mode = LossMode::fixed_alpha;
          else if (v == "balanced") c.train.loss_mode = LossMode::balanced;
          else bad_value("train.loss_mode", v, "plain | fixed_alpha | balanced");
        },
        [](const RunConfig& c) { return loss_mode_name(c.train.loss_mode); });
    add_double("train.fixed_alpha", &RunConfig::train, &TrainConfig::fixed_alpha);
    add("train.balanced_weighting",
        [](RunConfig& c, const std::string& v) {
          if (v == "inverse_frequency")
            c.train.balanced_weighting = BalancedWeighting::inverse_frequency;
          else if (v == "literal_background")
            c.train.balanced_weighting = BalancedWeighting::literal_background;
          else
            bad_value("train.balanced_weighting", v,
                      "inverse_frequency | literal_background");
        },
        [](const RunConfig& c) {
          return c.train.balanced_weighting == BalancedWeighting::inverse_frequency
                     ? "inverse_frequency"
                     : "literal_background";
        });
    add("train.stage2_mask_source",
        [](RunConfig& c, const std::string& v) {
          if (v == "predicted") c.train.stage2_ground_truth_mask = false;
          else if (v == "ground_truth") c.train.stage2_ground_truth_mask = true;
          else bad_value("train.stage2_mask_source", v, "predicted | ground_truth");
        },
        [](const RunConfig& c) {
          return c.train.stage2_ground_truth_mask ? "ground_truth" : "predicted";
        });
    add_double("train.joint_c", &RunConfig::train, &TrainConfig::joint_c);

    add_int("data.n_train", &RunConfig::n_train);
    add_int("data.n_val", &RunConfig::n_val);
    add_int("data.n_test", &RunConfig::n_test);

    auto add_phantom_pair_d = [&add](const char* lo_key, const char* hi_key,
                                     auto member_ptr) {
      add(lo_key,
          [lo_key, member_ptr](RunConfig& c, const std::string& v) {
            (c.phantom.*member_ptr).first = parse_double(lo_key, v);
          },
          [member_ptr](const RunConfig& c) {
            return fmt_double((c.phantom.*member_ptr).first);
          });
      add(hi_key,
          [hi_key, member_ptr](RunConfig& c, const std::string& v) {
            (c.phantom.*member_ptr).second = parse_double(hi_key, v);
          },
          [member_ptr](const RunConfig& c) {
            return fmt_double((c.phantom.*member_ptr).second);
          });
    };
    auto add_phantom_pair_i = [&add](const char* lo_key, const char* hi_key,
                                     auto member_ptr) {
      add(lo_key,
          [lo_key, member_ptr](RunConfig& c, const std::string& v) {
            (c.phantom.*member_ptr).first =
                static_cast<int>(parse_int(lo_key, v));
          },
          [member_ptr](const RunConfig& c) {
            return std::to_string((c.phantom.*member_ptr).first);
          });
      add(hi_key,
          [hi_key, member_ptr](RunConfig& c, const std::string& v) {
            (c.phantom.*member_ptr).second =
                static_cast<int>(parse_int(hi_key, v));
          },
          [member_ptr](const RunConfig& c) {
            return std::to_string((c.phantom.*member_ptr).second);
          });
    };
    auto add_phantom_d = [&add](const char* key, auto member_ptr) {
      add(key,
          [key, member_ptr](RunConfig& c, const std::string& v) {
            c.phantom.*member_ptr = parse_double(key, v);
          },
          [member_ptr](const RunConfig& c) {
            return fmt_double(c.phantom.*member_ptr);
          });
    };
    add_phantom_pair_d("phantom.liver_radius_lo", "phantom.liver_radius_hi",
                       &PhantomSpec::liver_radius_range);
    add_phantom_pair_i("phantom.tumor_count_lo", "phantom.tumor_count_hi",
                       &PhantomSpec::tumor_count_range);
    add_phantom_pair_d("phantom.tumor_radius_lo", "phantom.tumor_radius_hi",
                       &PhantomSpec::tumor_radius_range);
    add_phantom_d("phantom.background_mean", &PhantomSpec::background_mean);
    add_phantom_d("phantom.liver_mean", &PhantomSpec::liver_mean);
    add_phantom_d("phantom.tumor_mean", &PhantomSpec::tumor_mean);
    add_phantom_d("phantom.noise_sigma", &PhantomSpec::noise_sigma);
    add_phantom_pair_i("phantom.distractor_count_lo",
                       "phantom.distractor_count_hi",
                       &PhantomSpec::distractor_count_range);
    add_phantom_pair_d("phantom.distractor_radius_lo",
                       "phantom.distractor_radius_hi",
                       &PhantomSpec::distractor_radius_range);

    add("cascade.liver_threshold",
        [](RunConfig& c, const std::string& v) {
          c.thresholds.liver = parse_double("cascade.liver_threshold", v);
        },
        [](const RunConfig& c) { return fmt_double(c.thresholds.liver); });
    add("cascade.tumor_threshold",
        [](RunConfig& c, const std::string& v) {
          c.thresholds.tumor = parse_double("cascade.tumor_threshold", v);
        },
        [](const RunConfig& c) { return fmt_double(c.thresholds.tumor); });

    add("window.lo",
        [](RunConfig& c, const std::string& v) {
          c.window.lo = parse_double("window.lo", v);
        },
        [](const RunConfig& c) { return fmt_double(c.window.lo); });
    add("window.hi",
        [](RunConfig& c, const std::string& v) {
          c.window.hi = parse_double("window.hi", v);
        },
        [](const RunConfig& c) { return fmt_double(c.window.hi); });

    add("eval.band_lo",
        [](RunConfig& c, const std::string& v) {
          c.band.lo = parse_double("eval.band_lo", v);
        },
        [](const RunConfig& c) { return fmt_double(c.band.lo); });
    add("eval.band_hi",
        [](RunConfig& c, const std::string& v) {
          c.band.hi = parse_double("eval.band_hi", v);
        },
        [](const RunConfig& c) { return fmt_double(c.band.hi); });
    add_int("eval.hist_bins", &RunConfig::hist_bins);
    add("eval.aggregation",
        [](RunConfig& c, const std::string& v) {
          if (v == "pooled") c.aggregation = Aggregation::pooled;
          else if (v == "per_image") c.aggregation = Aggregation::per_image;
          else bad_value("eval.aggregation", v, "pooled | per_image");
        },
        [](const RunConfig& c) {
          return c.aggregation == Aggregation::pooled ? "pooled" : "per_image";
        });
    return h;
  }();
  return handlers;
}

const KeyHandler* find_handler(const std::string& key) {
  for (const KeyHandler& h : registry())
    if (key == h.key) return &h;
  return nullptr;
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace

TrainConfig RunConfig::resolved_train(Model model) const {
  TrainConfig t = train;
  t.seed = seed;
  if (!explicit_keys.contains("train.epochs_main"))
    t.epochs_main = model == Model::one_step ? 40 : 50;
  if (!explicit_keys.contains("train.epochs_finetune")) t.epochs_finetune = 20;
  return t;
}

PhantomSpec RunConfig::resolved_phantom() const {
  PhantomSpec p = phantom;
  p.size = net.input_size;
  p.seed = seed;
  return p;
}

void apply_override(RunConfig& cfg, const std::string& key,
                    const std::string& value) {
  const KeyHandler* handler = find_handler(key);
  if (!handler)
    throw std::invalid_argument("config: unknown key '" + key + "'");
  handler->set(cfg, value);
  cfg.explicit_keys.insert(key);
}

RunConfig parse_run_config(std::string_view text) {
  RunConfig cfg;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(
        pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    ++line_no;
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;

    const std::size_t hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;

    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(line_no) +
                                  ": expected 'key = value', got '" + stripped +
                                  "'");
    const std::string key = trim(std::string_view(stripped).substr(0, eq));
    const std::string value = trim(std::string_view(stripped).substr(eq + 1));
    try {
      apply_override(cfg, key, value);
    } catch (const std::invalid_argument& err) {
      throw std::invalid_argument(std::string(err.what()) + " (line " +
                                  std::to_string(line_no) + ")");
    }
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string render_run_config(const RunConfig& cfg, Model model) {
  RunConfig resolved = cfg;
  resolved.train = cfg.resolved_train(model);
  std::string out = "# effective configuration (model " + to_string(model) +
                    "); rerunning with this file reproduces the run\n";
  for (const KeyHandler& h : registry())
    out += std::string(h.key) + " = " + h.get(resolved) + "\n";
  return out;
}

std::string to_string(Model model) {
  return model == Model::one_step ? "one_step" : "sequential";
}

Model model_from_string(const std::string& name) {
  if (name == "one_step") return Model::one_step;
  if (name == "sequential") return Model::sequential;
  throw std::invalid_argument("model must be one_step or sequential, got '" +
                              name + "'");
}

}  // namespace cseg
