#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include "cascadeseg/checkpoint.hpp"
#include "cascadeseg/csv.hpp"
#include "cascadeseg/pgm.hpp"
#include "cascadeseg/train.hpp"

namespace fs = std::filesystem;

namespace cseg::cli {

namespace {

constexpr const char* kMarkerName = "_INCOMPLETE";

/// Present while a command is writing; removed on success so a leftover
/// marker flags partial output.
class OutputMarker {
 public:
  explicit OutputMarker(const fs::path& out_dir) : path_(out_dir / kMarkerName) {
    fs::create_directories(out_dir);
    std::ofstream marker(path_);
    marker << "command in progress or failed; outputs may be partial\n";
  }
  void complete() { fs::remove(path_); }

 private:
  fs::path path_;
};

std::string index_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d", i);
  return std::string(buf) + ".pgm";
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::vector<fs::path> sorted_pgms(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".pgm")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  return files;
}

Tensor load_image_checked(const fs::path& path, int expected_size) {
  Tensor image = load_image_pgm(path.string());
  if (image.dim(0) != expected_size || image.dim(1) != expected_size)
    throw std::runtime_error(path.string() + ": image is " +
                             std::to_string(image.dim(1)) + "x" +
                             std::to_string(image.dim(0)) +
                             " but the configured input size is " +
                             std::to_string(expected_size) + "x" +
                             std::to_string(expected_size));
  return image;
}

UNet load_network(const std::string& path, Head expected_head) {
  Checkpoint ckpt = load_checkpoint(path);
  if (!ckpt.config)
    throw std::runtime_error(path + ": checkpoint carries no config record");
  if (ckpt.config->head != expected_head)
    throw std::runtime_error(path + ": checkpoint head does not match the model");
  return network_from_checkpoint(ckpt);
}

Tensor plane_from_probs(const Tensor& probs3, int channel) {
  const int h = probs3.dim(1), w = probs3.dim(2);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  std::vector<double> data(
      probs3.values().begin() + channel * plane,
      probs3.values().begin() + (channel + 1) * plane);
  return Tensor::from_data({h, w}, std::move(data));
}

}  // namespace

RunConfig resolve_config(const ConfigOpts& opts) {
  RunConfig cfg;
  if (!opts.config_path.empty()) cfg = load_run_config(opts.config_path);
  if (const char* env = std::getenv("CASCADE_SEG_SEED"); env && *env)
    apply_override(cfg, "seed", env);
  for (const std::string& kv : opts.set_overrides) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (opts.seed) apply_override(cfg, "seed", std::to_string(*opts.seed));
  if (opts.n_train) apply_override(cfg, "data.n_train", std::to_string(*opts.n_train));
  if (opts.n_val) apply_override(cfg, "data.n_val", std::to_string(*opts.n_val));
  if (opts.n_test) apply_override(cfg, "data.n_test", std::to_string(*opts.n_test));
  return cfg;
}

std::vector<Sample> load_split(const std::string& split_dir) {
  const fs::path img_dir = fs::path(split_dir) / "img";
  const fs::path lbl_dir = fs::path(split_dir) / "lbl";
  if (!fs::is_directory(img_dir) || !fs::is_directory(lbl_dir))
    throw std::runtime_error(split_dir + ": expected img/ and lbl/ subdirectories");
  std::vector<Sample> samples;
  for (const fs::path& img_path : sorted_pgms(img_dir)) {
    const fs::path lbl_path = lbl_dir / img_path.filename();
    if (!fs::exists(lbl_path))
      throw std::runtime_error("missing label file " + lbl_path.string());
    Sample s;
    s.image = load_image_pgm(img_path.string());
    s.labels = load_label_pgm(lbl_path.string());
    samples.push_back(std::move(s));
  }
  if (samples.empty())
    throw std::runtime_error(split_dir + ": no PGM files found");
  return samples;
}

int cmd_gen_data(const ConfigOpts& opts, const std::string& out_dir) {
  const RunConfig cfg = resolve_config(opts);
  const PhantomSpec spec = cfg.resolved_phantom();
  spec.validate();

  OutputMarker marker(out_dir);
  const struct {
    const char* name;
    int count;
  } splits[3] = {{"train", cfg.n_train}, {"val", cfg.n_val}, {"test", cfg.n_test}};

  std::uint64_t index = 0;
  for (const auto& split : splits) {
    const fs::path img_dir = fs::path(out_dir) / split.name / "img";
    const fs::path lbl_dir = fs::path(out_dir) / split.name / "lbl";
    fs::create_directories(img_dir);
    fs::create_directories(lbl_dir);
    for (int i = 0; i < split.count; ++i, ++index) {
      const Sample sample = generate_phantom(spec, index);
      save_image_pgm(sample.image, (img_dir / index_name(i)).string());
      save_label_pgm(sample.labels, (lbl_dir / index_name(i)).string());
    }
  }
  write_text(fs::path(out_dir) / "config.resolved",
             render_run_config(cfg, Model::sequential));
  marker.complete();
  std::cout << "wrote " << cfg.n_train << "+" << cfg.n_val << "+" << cfg.n_test
            << " samples to " << out_dir << "\n";
  return 0;
}

int cmd_train(const ConfigOpts& opts, Model model, const std::string& data_dir,
              const std::string& out_dir) {
  const RunConfig cfg = resolve_config(opts);
  const TrainConfig train_cfg = cfg.resolved_train(model);
  train_cfg.validate();

  const std::vector<Sample> train_set =
      load_split((fs::path(data_dir) / "train").string());
  const std::vector<Sample> val_set =
      load_split((fs::path(data_dir) / "val").string());
  for (const Sample& s : train_set)
    if (s.labels.height != cfg.net.input_size)
      throw std::runtime_error(
          "dataset images are " + std::to_string(s.labels.height) +
          "px but net.input_size is " + std::to_string(cfg.net.input_size));

  OutputMarker marker(out_dir);
  if (model == Model::sequential) {
    UNetConfig net_cfg = cfg.net;
    net_cfg.head = Head::binary_sigmoid;
    Rng init_a = Rng::for_stream(cfg.seed, 1);
    Rng init_b = Rng::for_stream(cfg.seed, 2);
    UNet liver_net(net_cfg, init_a);
    UNet tumor_net(net_cfg, init_b);

    SequentialReports reports =
        train_sequential(liver_net, tumor_net, train_set, val_set, train_cfg,
                         cfg.thresholds, cfg.window);

    reports.liver.checkpoint_path = (fs::path(out_dir) / "modelA.segc").string();
    reports.tumor.checkpoint_path = (fs::path(out_dir) / "modelB.segc").string();
    save_checkpoint(liver_net.parameters(), net_cfg, reports.liver.checkpoint_path);
    save_checkpoint(tumor_net.parameters(), net_cfg, reports.tumor.checkpoint_path);
    const TrainReport* all[2] = {&reports.liver, &reports.tumor};
    write_epochs_csv(all, (fs::path(out_dir) / "epochs.csv").string());
    std::cout << "sequential training done in "
              << fmt_double(reports.liver.wall_seconds + reports.tumor.wall_seconds)
              << "s\n";
  } else {
    UNetConfig net_cfg = cfg.net;
    net_cfg.head = Head::softmax3;
    Rng init_c = Rng::for_stream(cfg.seed, 1);
    UNet net(net_cfg, init_c);

    TrainReport report = train_one_step(net, train_set, val_set, train_cfg);

    report.checkpoint_path = (fs::path(out_dir) / "modelC.segc").string();
    save_checkpoint(net.parameters(), net_cfg, report.checkpoint_path);
    const TrainReport* all[1] = {&report};
    write_epochs_csv(all, (fs::path(out_dir) / "epochs.csv").string());
    std::cout << "one-step training done in " << fmt_double(report.wall_seconds)
              << "s\n";
  }
  write_text(fs::path(out_dir) / "config.resolved", render_run_config(cfg, model));
  marker.complete();
  return 0;
}

int cmd_predict(const PredictOpts& opts) {
  const RunConfig cfg = resolve_config(opts.config);
  const bool sequential = !opts.model_a.empty() || !opts.model_b.empty();
  if (sequential && opts.model_c.empty() &&
      (opts.model_a.empty() || opts.model_b.empty()))
    throw std::invalid_argument(
        "predict: sequential mode needs both --model-a and --model-b");
  if (!sequential && opts.model_c.empty())
    throw std::invalid_argument(
        "predict: pass --model-a/--model-b or --model-c");

  std::vector<fs::path> inputs;
  const fs::path in_path(opts.input);
  if (fs::is_directory(in_path)) {
    const fs::path img_dir =
        fs::is_directory(in_path / "img") ? in_path / "img" : in_path;
    inputs = sorted_pgms(img_dir);
    if (inputs.empty())
      throw std::runtime_error(opts.input + ": no PGM files found");
  } else if (fs::is_regular_file(in_path)) {
    inputs.push_back(in_path);
  } else {
    throw std::runtime_error(opts.input + ": no such file or directory");
  }

  OutputMarker marker(opts.out_dir);
  const fs::path out_dir(opts.out_dir);
  if (sequential) {
    const UNet liver_net = load_network(opts.model_a, Head::binary_sigmoid);
    const UNet tumor_net = load_network(opts.model_b, Head::binary_sigmoid);
    for (const fs::path& path : inputs) {
      const Tensor image =
          load_image_checked(path, liver_net.config().input_size);
      const SequentialPrediction pred = sequential_predict(
          liver_net, tumor_net, image, cfg.thresholds, cfg.window);
      const std::string stem = path.stem().string();
      save_label_pgm(pred.labels, (out_dir / (stem + "_label.pgm")).string());
      save_image_pgm(pred.liver_prob, (out_dir / (stem + "_prob_liver.pgm")).string());
      save_image_pgm(pred.tumor_prob, (out_dir / (stem + "_prob_tumor.pgm")).string());
    }
  } else {
    const UNet net = load_network(opts.model_c, Head::softmax3);
    for (const fs::path& path : inputs) {
      const Tensor image = load_image_checked(path, net.config().input_size);
      const OneStepPrediction pred = one_step_predict(net, image);
      const std::string stem = path.stem().string();
      save_label_pgm(pred.labels, (out_dir / (stem + "_label.pgm")).string());
      save_image_pgm(plane_from_probs(pred.probs, 1),
                     (out_dir / (stem + "_prob_liver.pgm")).string());
      save_image_pgm(plane_from_probs(pred.probs, 0),
                     (out_dir / (stem + "_prob_tumor.pgm")).string());
    }
  }
  write_text(out_dir / "config.resolved",
             render_run_config(cfg, sequential ? Model::sequential : Model::one_step));
  marker.complete();
  std::cout << "predicted " << inputs.size() << " image(s) into " << opts.out_dir
            << "\n";
  return 0;
}

int cmd_eval(const EvalOpts& opts) {
  const RunConfig cfg = resolve_config(opts.config);
  const fs::path pred_dir(opts.pred_dir);
  const fs::path truth_root(opts.truth_dir);
  const fs::path truth_dir =
      fs::is_directory(truth_root / "lbl") ? truth_root / "lbl" : truth_root;

  std::vector<std::string> stems;
  for (const fs::path& p : sorted_pgms(pred_dir)) {
    const std::string name = p.filename().string();
    constexpr const char* suffix = "_label.pgm";
    if (name.size() > 10 && name.ends_with(suffix))
      stems.push_back(name.substr(0, name.size() - 10));
  }
  if (stems.empty())
    throw std::runtime_error(opts.pred_dir + ": no *_label.pgm predictions found");

  std::vector<std::string> missing;
  for (const std::string& stem : stems)
    if (!fs::exists(truth_dir / (stem + ".pgm")))
      missing.push_back(stem + ".pgm");
  if (!missing.empty()) {
    std::string msg = "eval: missing truth files:";
    for (const std::string& m : missing) msg += " " + m;
    throw std::runtime_error(msg);
  }

  std::vector<LabelMap> predictions, truths;
  std::vector<Tensor> tumor_probs;
  bool have_probs = true;
  for (const std::string& stem : stems) {
    predictions.push_back(
        load_label_pgm((pred_dir / (stem + "_label.pgm")).string()));
    truths.push_back(load_label_pgm((truth_dir / (stem + ".pgm")).string()));
    const fs::path prob_path = pred_dir / (stem + "_prob_tumor.pgm");
    if (fs::exists(prob_path) && have_probs)
      tumor_probs.push_back(load_image_pgm(prob_path.string()));
    else
      have_probs = false;
  }
  if (!have_probs) tumor_probs.clear();

  OutputMarker marker(opts.out_dir);
  const fs::path out_dir(opts.out_dir);
  const MetricsReport report = evaluate_model(predictions, truths, tumor_probs,
                                              cfg.band, cfg.aggregation);
  write_report_csv(report, (out_dir / "report.csv").string());

  std::vector<BinaryMask> tumor_truth;
  for (const LabelMap& t : truths)
    tumor_truth.push_back(derive_masks(t).tumor);
  const auto curve = tumor_probs.empty()
                         ? std::nullopt
                         : restricted_roc(tumor_probs, tumor_truth, cfg.band);
  write_roc_csv(curve ? *curve : RocCurve{},
                (out_dir / "roc_tumor.csv").string());
  write_histogram_csv(probability_histogram(tumor_probs, cfg.band, cfg.hist_bins),
                      (out_dir / "hist_tumor.csv").string());

  // Sweep mode: one restricted ROC per tumor checkpoint over a split.
  if (!opts.sweep_model_b.empty()) {
    if (opts.sweep_model_a.empty() || opts.sweep_data_dir.empty())
      throw std::invalid_argument(
          "eval: sweep mode needs --sweep-model-a and --sweep-data-dir");
    const UNet liver_net = load_network(opts.sweep_model_a, Head::binary_sigmoid);
    const std::vector<Sample> samples = load_split(opts.sweep_data_dir);
    for (const std::string& ckpt_path : opts.sweep_model_b) {
      const UNet tumor_net = load_network(ckpt_path, Head::binary_sigmoid);
      std::vector<Tensor> probs;
      std::vector<BinaryMask> truth;
      for (const Sample& s : samples) {
        const SequentialPrediction pred = sequential_predict(
            liver_net, tumor_net, s.image, cfg.thresholds, cfg.window);
        probs.push_back(pred.tumor_prob);
        truth.push_back(derive_masks(s.labels).tumor);
      }
      const auto sweep_curve = restricted_roc(probs, truth, cfg.band);
      const std::string stem = fs::path(ckpt_path).stem().string();
      write_roc_csv(sweep_curve ? *sweep_curve : RocCurve{},
                    (out_dir / ("roc_tumor_" + stem + ".csv")).string());
    }
  }

  write_text(out_dir / "config.resolved",
             render_run_config(cfg, Model::sequential));
  marker.complete();
  std::cout << "evaluation written to " << opts.out_dir << "\n";
  return 0;
}

}  // namespace cseg::cli
