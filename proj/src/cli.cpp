#include "ild/cli.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "CLI11.hpp"
#include "json.hpp"

#include "ild/calibrate.hpp"
#include "ild/csv.hpp"
#include "ild/dataset.hpp"
#include "ild/detect.hpp"
#include "ild/mathx.hpp"
#include "ild/miest.hpp"
#include "ild/models.hpp"
#include "ild/rng.hpp"
#include "ild/synth.hpp"

namespace ild {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string iso_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int default_threads() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

std::string default_output_dir() {
  const char* env = std::getenv("ILD_OUTPUT_DIR");
  return (env != nullptr && *env != '\0') ? env : ".";
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory '" + dir + "': " + ec.message());
}

void write_json_atomic(const std::string& path, const json& j) {
  atomic_write_text(path, j.dump(2) + "\n");
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("malformed config '" + path + "': " + e.what());
  }
  if (!j.is_object()) throw std::runtime_error("config '" + path + "' must be a JSON object");
  return j;
}

// every key must be on the command's whitelist; the offending key is named
void check_keys(const json& j, const std::vector<std::string>& allowed,
                const std::string& scope) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
      const std::string name = scope.empty() ? it.key() : scope + "." + it.key();
      throw std::runtime_error("unknown config key '" + name + "'");
    }
  }
}

// config fills a value only when the flag was not given on the command line
template <typename T>
void overlay(const CLI::App* cmd, const std::string& flag, const json& c,
             const std::string& key, T& v) {
  if (!c.contains(key) || cmd->count(flag) > 0) return;
  try {
    v = c.at(key).get<T>();
  } catch (const json::exception& e) {
    throw std::runtime_error("config key '" + key + "': " + e.what());
  }
}

// config-only knob (no corresponding flag)
template <typename T>
void take(const json& c, const std::string& key, T& v, const std::string& scope = "") {
  if (!c.contains(key)) return;
  try {
    v = c.at(key).get<T>();
  } catch (const json::exception& e) {
    const std::string name = scope.empty() ? key : scope + "." + key;
    throw std::runtime_error("config key '" + name + "': " + e.what());
  }
}

Technique technique_from(const std::string& s) {
  if (s == "perturbation") return Technique::perturbation;
  if (s == "proximity") return Technique::proximity;
  throw std::runtime_error("unknown technique '" + s + "' (perturbation, proximity)");
}

GenMethod gen_method_from(const std::string& s) {
  if (s == "balanced") return GenMethod::balanced;
  if (s == "minority") return GenMethod::minority;
  if (s == "majority") return GenMethod::majority;
  throw std::runtime_error("unknown gen-method '" + s + "' (balanced, minority, majority)");
}

LogLossForm form_from(const std::string& s) {
  if (s == "predictive-entropy") return LogLossForm::predictive_entropy;
  if (s == "cross-entropy") return LogLossForm::cross_entropy;
  throw std::runtime_error("unknown form '" + s + "' (predictive-entropy, cross-entropy)");
}

PcNorm pc_norm_from(const std::string& s) {
  if (s == "scaled_exp") return PcNorm::scaled_exp;
  if (s == "weighted_sum") return PcNorm::weighted_sum;
  throw std::runtime_error("unknown pc-norm '" + s + "' (scaled_exp, weighted_sum)");
}

Optimizer optimizer_from(const std::string& s) {
  if (s == "sgd") return Optimizer::sgd;
  if (s == "rmsprop") return Optimizer::rmsprop;
  if (s == "adam") return Optimizer::adam;
  throw std::runtime_error("unknown optimizer '" + s + "' (sgd, rmsprop, adam)");
}

const std::vector<std::string> kRangeKeys = {
    "min_layers", "max_layers", "min_units", "max_units", "min_lr", "max_lr",
    "min_l2", "max_l2", "epochs", "batch_size", "min_components",
    "max_components", "min_reg", "max_reg", "min_k", "max_k"};

HyperRanges ranges_from(const json& c, HyperRanges base) {
  check_keys(c, kRangeKeys, "ranges");
  take(c, "min_layers", base.min_layers, "ranges");
  take(c, "max_layers", base.max_layers, "ranges");
  take(c, "min_units", base.min_units, "ranges");
  take(c, "max_units", base.max_units, "ranges");
  take(c, "min_lr", base.min_lr, "ranges");
  take(c, "max_lr", base.max_lr, "ranges");
  take(c, "min_l2", base.min_l2, "ranges");
  take(c, "max_l2", base.max_l2, "ranges");
  take(c, "epochs", base.epochs, "ranges");
  take(c, "batch_size", base.batch_size, "ranges");
  take(c, "min_components", base.min_components, "ranges");
  take(c, "max_components", base.max_components, "ranges");
  take(c, "min_reg", base.min_reg, "ranges");
  take(c, "max_reg", base.max_reg, "ranges");
  take(c, "min_k", base.min_k, "ranges");
  take(c, "max_k", base.max_k, "ranges");
  return base;
}

GmmMiHyper gmm_hyper_from(const json& c) {
  GmmMiHyper g;
  check_keys(c, {"max_components", "covariance", "reg"}, "gmm");
  take(c, "max_components", g.max_components, "gmm");
  if (c.contains("covariance")) g.cov = cov_type_from_string(c.at("covariance").get<std::string>());
  take(c, "reg", g.reg, "gmm");
  return g;
}

// desk-scale training defaults; the library default is sized for publication
// quality runs and takes minutes per dataset
MineHyper mine_hyper_from(const json& c) {
  MineHyper m;
  m.epochs = 2000;
  m.patience = 200;
  check_keys(c, {"hidden_layers", "units", "learning_rate", "l2", "epochs",
                 "patience", "ensemble"},
             "mine");
  take(c, "hidden_layers", m.hidden_layers, "mine");
  take(c, "units", m.units, "mine");
  take(c, "learning_rate", m.learning_rate, "mine");
  take(c, "l2", m.l2, "mine");
  take(c, "epochs", m.epochs, "mine");
  take(c, "patience", m.patience, "mine");
  take(c, "ensemble", m.ensemble, "mine");
  return m;
}

NetHyper pc_hyper_from(const json& c) {
  NetHyper h;
  check_keys(c, {"hidden_layers", "units", "learning_rate", "epochs",
                 "batch_size", "l2", "pc_norm", "optimizer"},
             "pc");
  take(c, "hidden_layers", h.hidden_layers, "pc");
  take(c, "units", h.units, "pc");
  take(c, "learning_rate", h.learning_rate, "pc");
  take(c, "epochs", h.epochs, "pc");
  take(c, "batch_size", h.batch_size, "pc");
  take(c, "l2", h.l2, "pc");
  if (c.contains("pc_norm")) h.pc_norm = pc_norm_from(c.at("pc_norm").get<std::string>());
  if (c.contains("optimizer")) h.optimizer = optimizer_from(c.at("optimizer").get<std::string>());
  return h;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// ---------------------------------------------------------------- synth-gen

struct SynthArgs {
  std::string technique = "perturbation";
  std::string gen_method = "balanced";
  int classes = 2;
  int dims = 2;
  double noise = 0.0;
  double imbalance = 0.5;
  int base = 1000;
  std::uint64_t seed = 42;
  std::string config;
  std::string output;
  std::string stem = "data";
};

int cmd_synth_gen(const CLI::App* cmd, SynthArgs a) {
  const json c = load_config(a.config);
  check_keys(c, {"technique", "gen_method", "classes", "dims", "noise",
                 "imbalance", "base", "seed", "output", "stem"},
             "");
  overlay(cmd, "--technique", c, "technique", a.technique);
  overlay(cmd, "--gen-method", c, "gen_method", a.gen_method);
  overlay(cmd, "--classes", c, "classes", a.classes);
  overlay(cmd, "--dims", c, "dims", a.dims);
  overlay(cmd, "--noise", c, "noise", a.noise);
  overlay(cmd, "--imbalance", c, "imbalance", a.imbalance);
  overlay(cmd, "--base", c, "base", a.base);
  overlay(cmd, "--seed", c, "seed", a.seed);
  overlay(cmd, "--output", c, "output", a.output);
  overlay(cmd, "--stem", c, "stem", a.stem);
  if (a.output.empty()) a.output = default_output_dir();

  SynthConfig sc;
  sc.technique = technique_from(a.technique);
  sc.gen_method = gen_method_from(a.gen_method);
  sc.num_classes = a.classes;
  sc.dims = a.dims;
  sc.noise = a.noise;
  sc.imbalance = a.imbalance;
  sc.samples_per_class_base = a.base;
  sc.seed = a.seed;
  sc.validate();

  const auto [ds, gt] = generate_system(sc);
  ensure_dir(a.output);
  const std::string csv_path = (fs::path(a.output) / (a.stem + ".csv")).string();
  const std::string side_path = (fs::path(a.output) / (a.stem + ".json")).string();
  write_csv_dataset(ds, csv_path, "y");

  json side;
  side["command"] = "synth-gen";
  side["config"] = {{"technique", a.technique}, {"gen_method", a.gen_method},
                    {"classes", a.classes},     {"dims", a.dims},
                    {"noise", a.noise},         {"imbalance", a.imbalance},
                    {"base", a.base},           {"seed", a.seed}};
  side["csv"] = a.stem + ".csv";
  side["n"] = ds.n();
  side["truth_bits"] = ground_truth_mi(ds, gt);
  side["h_y_bits"] = entropy_bits(gt.p_y);
  side["p_y"] = std::vector<double>(gt.p_y.data(), gt.p_y.data() + gt.p_y.size());
  side["metadata"] = {{"created", iso_now()}};
  write_json_atomic(side_path, side);

  std::printf("wrote %s (%d rows, %d classes) and %s\n", csv_path.c_str(),
              ds.n(), ds.num_classes, side_path.c_str());
  return 0;
}

// -------------------------------------------------------------- mi-estimate

struct EstArgs {
  std::string method = "log-loss";
  std::string input;
  std::string label_col = "y";
  int folds = 10;
  int budget = 16;
  std::string calibration = "isotonic";
  std::string form = "predictive-entropy";
  std::uint64_t seed = 42;
  int threads = default_threads();
  std::string config;
  std::string output;
};

const std::vector<std::string> kModelMethods = {"mid-point", "log-loss", "cal-log-loss"};
const std::vector<std::string> kOpMethods = {"gmm", "mine", "pc-softmax"};

int cmd_mi_estimate(const CLI::App* cmd, EstArgs a) {
  const json c = load_config(a.config);
  check_keys(c, {"method", "input", "label_col", "folds", "budget",
                 "calibration", "form", "seed", "threads", "output", "ranges",
                 "gmm", "mine", "pc"},
             "");
  overlay(cmd, "--method", c, "method", a.method);
  overlay(cmd, "--input", c, "input", a.input);
  overlay(cmd, "--label-col", c, "label_col", a.label_col);
  overlay(cmd, "--folds", c, "folds", a.folds);
  overlay(cmd, "--budget", c, "budget", a.budget);
  overlay(cmd, "--calibration", c, "calibration", a.calibration);
  overlay(cmd, "--form", c, "form", a.form);
  overlay(cmd, "--seed", c, "seed", a.seed);
  overlay(cmd, "--threads", c, "threads", a.threads);
  overlay(cmd, "--output", c, "output", a.output);

  const bool model_backed =
      std::find(kModelMethods.begin(), kModelMethods.end(), a.method) != kModelMethods.end();
  const bool op_backed =
      std::find(kOpMethods.begin(), kOpMethods.end(), a.method) != kOpMethods.end();
  if (!model_backed && !op_backed) {
    throw std::runtime_error(
        "unknown method '" + a.method +
        "' (mid-point, log-loss, cal-log-loss, gmm, mine, pc-softmax)");
  }
  if (a.input.empty()) throw std::runtime_error("missing --input (or config key 'input')");

  const Dataset ds = read_csv_dataset(a.input, a.label_col);

  json rep;
  rep["command"] = "mi-estimate";
  rep["method"] = a.method;
  rep["input"] = a.input;
  rep["label_col"] = a.label_col;
  rep["n"] = ds.n();
  rep["dims"] = ds.dim();
  rep["classes"] = ds.num_classes;
  rep["h_y_bits"] = entropy_bits(class_marginal(ds));
  rep["seed"] = a.seed;

  if (model_backed) {
    // the detection pipeline doubles as the estimator: hyperparameter search
    // picks one model, K outer folds give the per-fold estimates
    IldConfig icfg;
    icfg.approach = a.method;
    icfg.top_j = 1;
    icfg.outer_folds = a.folds;
    icfg.hpo_budget = a.budget;
    icfg.calibration = cal_method_from_string(a.calibration);
    icfg.logloss_form = form_from(a.form);
    icfg.threads = a.threads;
    icfg.ranges = ranges_from(c.value("ranges", json::object()), icfg.ranges);
    const DetectionReport r = run_ild(ds, icfg, a.seed);
    const auto& best = r.candidates.at(0);
    rep["value_bits"] = mean_of(best.fold_estimates);
    rep["per_fold"] = best.fold_estimates;
    rep["folds"] = a.folds;
    rep["model"] = {{"family", best.family},
                    {"hp", best.hp},
                    {"validation_score", best.validation_score}};
    if (a.method != "mid-point") rep["form"] = a.form;
    if (a.method == "cal-log-loss") rep["calibration"] = a.calibration;
  } else {
    MiEstimate est;
    if (a.method == "gmm") {
      est = mi_gmm(ds, gmm_hyper_from(c.value("gmm", json::object())),
                   derive_seed(a.seed, 0x601));
    } else if (a.method == "mine") {
      est = mi_mine(ds, mine_hyper_from(c.value("mine", json::object())),
                    derive_seed(a.seed, 0x602), a.threads);
    } else {
      est = mi_pcsoftmax(ds, pc_hyper_from(c.value("pc", json::object())),
                         derive_seed(a.seed, 0x603));
    }
    rep["value_bits"] = est.value;
    rep["model"] = est.model;
    rep["out_of_range"] = est.out_of_range;
  }

  rep["metadata"] = {{"created", iso_now()}};
  if (a.output.empty()) {
    std::printf("%s\n", rep.dump(2).c_str());
  } else {
    write_json_atomic(a.output, rep);
    std::printf("wrote %s (value_bits %.6f)\n", a.output.c_str(),
                rep["value_bits"].get<double>());
  }
  return 0;
}

// ------------------------------------------------------------------- detect

struct DetectArgs {
  std::string approach = "log-loss";
  std::string input;
  std::string label_col = "y";
  double alpha = 0.01;
  int top_j = 10;
  int folds = 10;
  int budget = 100;
  int inner_repeats = 3;
  double inner_fraction = 0.3;
  std::string calibration = "isotonic";
  std::string form = "cross-entropy";
  std::string pc_norm = "scaled_exp";
  int mine_epochs = 200;
  int mine_patience = 50;
  std::uint64_t seed = 42;
  int threads = default_threads();
  std::string config;
  std::string output;
};

IldConfig detect_config(const DetectArgs& a, const json& c) {
  IldConfig icfg;
  icfg.approach = a.approach;
  icfg.alpha = a.alpha;
  icfg.top_j = a.top_j;
  icfg.outer_folds = a.folds;
  icfg.hpo_budget = a.budget;
  icfg.inner_repeats = a.inner_repeats;
  icfg.inner_fraction = a.inner_fraction;
  icfg.calibration = cal_method_from_string(a.calibration);
  icfg.logloss_form = form_from(a.form);
  icfg.pc_norm = pc_norm_from(a.pc_norm);
  icfg.mine_epochs = a.mine_epochs;
  icfg.mine_patience = a.mine_patience;
  icfg.threads = a.threads;
  icfg.ranges = ranges_from(c.value("ranges", json::object()), icfg.ranges);
  icfg.validate();
  return icfg;
}

void print_report_summary(const DetectionReport& r, const std::string& name) {
  std::printf("%-24s %-14s %s  (tau %d, threshold %d, alpha %g)\n",
              name.c_str(), r.approach.c_str(), r.leak ? "LEAK" : "no-leak",
              r.tau, r.threshold, r.alpha);
  std::printf("  %-4s %-16s %12s %12s %s\n", "rank", "family", "val-score",
              "p-value", "rejected");
  for (std::size_t i = 0; i < r.candidates.size(); ++i) {
    const auto& cand = r.candidates[i];
    std::printf("  %-4zu %-16s %12.5f %12.4g %s\n", i + 1,
                cand.family.c_str(), cand.validation_score,
                cand.test.p_value, cand.rejected ? "yes" : "no");
  }
}

int detect_single(const DetectArgs& a, const IldConfig& icfg) {
  const Dataset ds = read_csv_dataset(a.input, a.label_col);
  const DetectionReport r = run_ild(ds, icfg, a.seed);

  json out = r.to_json();
  out["command"] = "detect";
  out["mode"] = "single";
  out["input"] = a.input;
  out["metadata"] = {{"created", iso_now()}};
  if (!a.output.empty()) write_json_atomic(a.output, out);

  print_report_summary(r, fs::path(a.input).filename().string());
  if (!a.output.empty()) std::printf("wrote %s\n", a.output.c_str());
  return r.leak ? 2 : 0;
}

// directory mode: <dir>/labels.csv lists "file,z" rows, z=1 meaning the
// system is known to leak; every listed CSV becomes one system
std::vector<std::pair<std::string, bool>> read_labels_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open labels file '" + path + "'");
  std::vector<std::pair<std::string, bool>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw std::runtime_error("labels file: expected 'file,z' in line '" + line + "'");
    std::string name = line.substr(0, comma);
    std::string z = line.substr(comma + 1);
    const auto trim = [](std::string& s) {
      while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.erase(s.begin());
      while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.pop_back();
    };
    trim(name);
    trim(z);
    if (first) {
      first = false;
      if (name == "file" && z == "z") continue;  // header row
    }
    if (z != "0" && z != "1")
      throw std::runtime_error("labels file: z must be 0 or 1, got '" + z + "'");
    rows.emplace_back(name, z == "1");
  }
  if (rows.empty()) throw std::runtime_error("labels file '" + path + "' lists no systems");
  return rows;
}

int detect_suite(const DetectArgs& a, const IldConfig& icfg) {
  const auto rows = read_labels_file((fs::path(a.input) / "labels.csv").string());
  std::vector<IldSystem> systems;
  for (const auto& [name, z] : rows) {
    IldSystem s;
    s.data = read_csv_dataset((fs::path(a.input) / name).string(), a.label_col);
    s.leaky = z;
    s.name = name;
    systems.push_back(std::move(s));
  }

  const IldEvaluation ev = evaluate_ild(systems, icfg, a.seed);

  json out;
  out["command"] = "detect";
  out["mode"] = "suite";
  out["input"] = a.input;
  out["approach"] = icfg.approach;
  out["metrics"] = {{"accuracy", ev.metrics.accuracy},
                    {"fpr", ev.metrics.fpr},
                    {"fnr", ev.metrics.fnr}};
  json sys_rows = json::array();
  json reports = json::array();
  bool any_leak = false;
  for (std::size_t i = 0; i < systems.size(); ++i) {
    json row;
    row["name"] = systems[i].name;
    row["z"] = systems[i].leaky ? 1 : 0;
    if (!ev.errors[i].empty()) {
      row["error"] = ev.errors[i];
      std::printf("%-24s z=%d  ERROR %s\n", systems[i].name.c_str(),
                  systems[i].leaky ? 1 : 0, ev.errors[i].c_str());
    } else {
      const DetectionReport& r = ev.reports[i];
      row["decision"] = r.leak ? "leak" : "no-leak";
      row["tau"] = r.tau;
      row["threshold"] = r.threshold;
      any_leak = any_leak || r.leak;
      reports.push_back(r.to_json());
      std::printf("%-24s z=%d  %-8s (tau %d, threshold %d)\n",
                  systems[i].name.c_str(), systems[i].leaky ? 1 : 0,
                  r.leak ? "LEAK" : "no-leak", r.tau, r.threshold);
    }
    sys_rows.push_back(std::move(row));
  }
  out["systems"] = std::move(sys_rows);
  out["reports"] = std::move(reports);
  out["metadata"] = {{"created", iso_now()}};

  std::printf("accuracy %.3f  fpr %.3f  fnr %.3f\n", ev.metrics.accuracy,
              ev.metrics.fpr, ev.metrics.fnr);
  if (!a.output.empty()) {
    write_json_atomic(a.output, out);
    std::printf("wrote %s\n", a.output.c_str());
  }
  return any_leak ? 2 : 0;
}

int cmd_detect(const CLI::App* cmd, DetectArgs a) {
  const json c = load_config(a.config);
  check_keys(c, {"approach", "input", "label_col", "alpha", "top_j", "folds",
                 "budget", "inner_repeats", "inner_fraction", "calibration",
                 "form", "pc_norm", "mine_epochs", "mine_patience", "seed",
                 "threads", "output", "ranges"},
             "");
  overlay(cmd, "--approach", c, "approach", a.approach);
  overlay(cmd, "--input", c, "input", a.input);
  overlay(cmd, "--label-col", c, "label_col", a.label_col);
  overlay(cmd, "--alpha", c, "alpha", a.alpha);
  overlay(cmd, "--top-j", c, "top_j", a.top_j);
  overlay(cmd, "--folds", c, "folds", a.folds);
  overlay(cmd, "--budget", c, "budget", a.budget);
  overlay(cmd, "--inner-repeats", c, "inner_repeats", a.inner_repeats);
  overlay(cmd, "--inner-fraction", c, "inner_fraction", a.inner_fraction);
  overlay(cmd, "--calibration", c, "calibration", a.calibration);
  overlay(cmd, "--form", c, "form", a.form);
  overlay(cmd, "--pc-norm", c, "pc_norm", a.pc_norm);
  overlay(cmd, "--mine-epochs", c, "mine_epochs", a.mine_epochs);
  overlay(cmd, "--mine-patience", c, "mine_patience", a.mine_patience);
  overlay(cmd, "--seed", c, "seed", a.seed);
  overlay(cmd, "--threads", c, "threads", a.threads);
  overlay(cmd, "--output", c, "output", a.output);
  if (a.input.empty()) throw std::runtime_error("missing --input (or config key 'input')");

  const IldConfig icfg = detect_config(a, c);
  if (fs::is_directory(a.input)) return detect_suite(a, icfg);
  return detect_single(a, icfg);
}

// ---------------------------------------------------------------- benchmark

struct BenchArgs {
  int seeds = 1;
  int base = 1000;
  int budget = 6;
  std::uint64_t seed = 42;
  int threads = default_threads();
  std::string config;
  std::string output;
};

int cmd_benchmark(const CLI::App* cmd, BenchArgs a) {
  const json c = load_config(a.config);
  check_keys(c, {"techniques", "gen_methods", "classes", "dims", "noise",
                 "imbalance", "methods", "seeds", "base", "budget", "folds",
                 "inner_repeats", "form", "calibration", "seed", "threads",
                 "output", "ranges", "gmm", "mine", "pc"},
             "");
  overlay(cmd, "--seeds", c, "seeds", a.seeds);
  overlay(cmd, "--base", c, "base", a.base);
  overlay(cmd, "--budget", c, "budget", a.budget);
  overlay(cmd, "--seed", c, "seed", a.seed);
  overlay(cmd, "--threads", c, "threads", a.threads);
  overlay(cmd, "--output", c, "output", a.output);
  if (a.output.empty())
    a.output = (fs::path(default_output_dir()) / "benchmark.csv").string();

  std::vector<std::string> techniques = {"perturbation"};
  std::vector<std::string> gen_methods = {"auto"};
  std::vector<int> classes = {2};
  std::vector<int> dims = {2};
  std::vector<double> noise = {0.0};
  std::vector<double> imbalance = {0.5};
  std::vector<std::string> methods = {"log-loss"};
  int folds = 5;
  int inner_repeats = 2;
  std::string form = "predictive-entropy";
  std::string calibration = "isotonic";
  take(c, "techniques", techniques);
  take(c, "gen_methods", gen_methods);
  take(c, "classes", classes);
  take(c, "dims", dims);
  take(c, "noise", noise);
  take(c, "imbalance", imbalance);
  take(c, "methods", methods);
  take(c, "folds", folds);
  take(c, "inner_repeats", inner_repeats);
  take(c, "form", form);
  take(c, "calibration", calibration);
  if (a.seeds < 1) throw std::runtime_error("seeds must be >= 1");

  // sweep-sized search ranges; full publication ranges come from the config
  HyperRanges bench_ranges;
  bench_ranges.epochs = 60;
  bench_ranges.max_units = 32;
  bench_ranges = ranges_from(c.value("ranges", json::object()), bench_ranges);

  std::vector<std::string> model_methods, op_methods;
  for (const auto& m : methods) {
    if (std::find(kModelMethods.begin(), kModelMethods.end(), m) != kModelMethods.end()) {
      model_methods.push_back(m);
    } else if (std::find(kOpMethods.begin(), kOpMethods.end(), m) != kOpMethods.end()) {
      op_methods.push_back(m);
    } else {
      throw std::runtime_error(
          "unknown method '" + m +
          "' (mid-point, log-loss, cal-log-loss, gmm, mine, pc-softmax)");
    }
  }

  std::string csv = "technique,method,M,d,r,epsilon,seed,truth_bits,estimate_bits,nmae\n";
  int rows_written = 0;
  int cell_idx = -1;
  for (const auto& tech : techniques)
    for (const auto& gm : gen_methods)
      for (int m_cls : classes)
        for (int d : dims)
          for (double eps : noise)
            for (double r : imbalance) {
              ++cell_idx;
              // r above 1/M is infeasible; clamp and treat the clamped value
              // as the cell's imbalance so every row stays self-consistent
              const double r_eff = std::min(r, 1.0 / m_cls);
              const bool balanced = r_eff >= 1.0 / m_cls - 1e-12;
              const std::string gm_eff =
                  gm == "auto" ? (balanced ? "balanced" : "majority") : gm;
              for (int rep = 0; rep < a.seeds; ++rep) {
                const std::uint64_t ds_seed =
                    derive_seed(a.seed, 0xbe, static_cast<std::uint64_t>(cell_idx),
                                static_cast<std::uint64_t>(rep));
                try {
                  SynthConfig sc;
                  sc.technique = technique_from(tech);
                  sc.gen_method = gen_method_from(gm_eff);
                  sc.num_classes = m_cls;
                  sc.dims = d;
                  sc.noise = eps;
                  sc.imbalance = r_eff;
                  sc.samples_per_class_base = a.base;
                  sc.seed = ds_seed;
                  sc.validate();
                  const auto [ds, gt] = generate_system(sc);
                  const double truth = ground_truth_mi(ds, gt);
                  const double h_y = entropy_bits(gt.p_y);

                  std::map<std::string, double> est;
                  if (!model_methods.empty()) {
                    IldConfig icfg;
                    icfg.approach = model_methods.front();
                    icfg.top_j = 1;
                    icfg.outer_folds = folds;
                    icfg.hpo_budget = a.budget;
                    icfg.inner_repeats = inner_repeats;
                    icfg.calibration = cal_method_from_string(calibration);
                    icfg.logloss_form = form_from(form);
                    icfg.threads = a.threads;
                    icfg.ranges = bench_ranges;
                    const auto reps = run_ild_multi(ds, icfg, model_methods, ds_seed);
                    for (std::size_t i = 0; i < model_methods.size(); ++i)
                      est[model_methods[i]] =
                          mean_of(reps[i].candidates.at(0).fold_estimates);
                  }
                  for (const auto& m : op_methods) {
                    if (m == "gmm") {
                      est[m] = mi_gmm(ds, gmm_hyper_from(c.value("gmm", json::object())),
                                      derive_seed(ds_seed, 0x601))
                                   .value;
                    } else if (m == "mine") {
                      est[m] = mi_mine(ds, mine_hyper_from(c.value("mine", json::object())),
                                       derive_seed(ds_seed, 0x602), a.threads)
                                   .value;
                    } else {
                      est[m] = mi_pcsoftmax(ds, pc_hyper_from(c.value("pc", json::object())),
                                            derive_seed(ds_seed, 0x603))
                                   .value;
                    }
                  }

                  for (const auto& m : methods) {
                    csv += tech + "," + m + "," + std::to_string(m_cls) + "," +
                           std::to_string(d) + "," + fmt_double(r_eff) + "," +
                           fmt_double(eps) + "," + std::to_string(ds_seed) + "," +
                           fmt_double(truth) + "," + fmt_double(est.at(m)) + "," +
                           fmt_double(std::fabs(truth - est.at(m)) / h_y) + "\n";
                    ++rows_written;
                  }
                } catch (const std::exception& e) {
                  std::fprintf(stderr,
                               "benchmark: cell technique=%s M=%d d=%d eps=%g "
                               "r=%g rep=%d skipped: %s\n",
                               tech.c_str(), m_cls, d, eps, r, rep, e.what());
                }
              }
            }

  const fs::path parent = fs::path(a.output).parent_path();
  if (!parent.empty()) ensure_dir(parent.string());
  atomic_write_text(a.output, csv);
  std::printf("wrote %s (%d rows)\n", a.output.c_str(), rows_written);
  return 0;
}

}  // namespace

int parse_and_dispatch(int argc, const char* const* argv) {
  CLI::App app{"information leakage detection toolkit"};
  app.name("ild");
  app.require_subcommand(1);

  SynthArgs sa;
  CLI::App* synth = app.add_subcommand("synth-gen", "generate a synthetic labeled dataset");
  synth->add_option("--technique", sa.technique, "perturbation or proximity");
  synth->add_option("--gen-method", sa.gen_method, "balanced, minority, or majority");
  synth->add_option("--classes", sa.classes, "number of label classes M");
  synth->add_option("--dims", sa.dims, "feature dimensionality d");
  synth->add_option("--noise", sa.noise, "privacy noise level in [0,1]");
  synth->add_option("--imbalance", sa.imbalance, "minority class rate r in (0, 1/M]");
  synth->add_option("--base", sa.base, "samples per class base count");
  synth->add_option("--seed", sa.seed, "root seed");
  synth->add_option("--config", sa.config, "JSON config file (flags win)");
  synth->add_option("-o,--output", sa.output, "output directory");
  synth->add_option("--stem", sa.stem, "output file stem");

  EstArgs ea;
  CLI::App* est = app.add_subcommand("mi-estimate", "estimate label-feature mutual information");
  est->add_option("--method", ea.method,
                  "mid-point, log-loss, cal-log-loss, gmm, mine, pc-softmax");
  est->add_option("--input", ea.input, "dataset CSV");
  est->add_option("--label-col", ea.label_col, "label column name or index");
  est->add_option("--folds", ea.folds, "outer folds (model methods)");
  est->add_option("--budget", ea.budget, "hyperparameter search budget");
  est->add_option("--calibration", ea.calibration, "calibrator for cal-log-loss");
  est->add_option("--form", ea.form, "predictive-entropy or cross-entropy");
  est->add_option("--seed", ea.seed, "root seed");
  est->add_option("--threads", ea.threads, "worker threads");
  est->add_option("--config", ea.config, "JSON config file (flags win)");
  est->add_option("-o,--output", ea.output, "report JSON path (default stdout)");

  DetectArgs da;
  CLI::App* det = app.add_subcommand("detect", "test a dataset (or a directory of them) for leakage");
  det->add_option("--approach", da.approach, "detection approach");
  det->add_option("--input", da.input, "dataset CSV, or directory with labels.csv");
  det->add_option("--label-col", da.label_col, "label column name or index");
  det->add_option("--alpha", da.alpha, "family-wise error rate");
  det->add_option("--top-j", da.top_j, "candidate models kept for testing");
  det->add_option("--folds", da.folds, "outer folds");
  det->add_option("--budget", da.budget, "hyperparameter search budget");
  det->add_option("--inner-repeats", da.inner_repeats, "search MCCV repeats");
  det->add_option("--inner-fraction", da.inner_fraction, "search MCCV validation fraction");
  det->add_option("--calibration", da.calibration, "calibrator for cal-log-loss");
  det->add_option("--form", da.form, "fold estimate form for log-loss approaches");
  det->add_option("--pc-norm", da.pc_norm, "scaled_exp or weighted_sum");
  det->add_option("--mine-epochs", da.mine_epochs, "statistics network epochs");
  det->add_option("--mine-patience", da.mine_patience, "statistics network early-stop patience");
  det->add_option("--seed", da.seed, "root seed");
  det->add_option("--threads", da.threads, "worker threads");
  det->add_option("--config", da.config, "JSON config file (flags win)");
  det->add_option("-o,--output", da.output, "report JSON path");

  BenchArgs ba;
  CLI::App* bench = app.add_subcommand("benchmark", "sweep a synthetic grid and write estimate rows");
  bench->add_option("--seeds", ba.seeds, "replicate datasets per cell");
  bench->add_option("--base", ba.base, "samples per class base count");
  bench->add_option("--budget", ba.budget, "hyperparameter search budget per dataset");
  bench->add_option("--seed", ba.seed, "root seed");
  bench->add_option("--threads", ba.threads, "worker threads");
  bench->add_option("--config", ba.config, "JSON config file with the grid");
  bench->add_option("-o,--output", ba.output, "output CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints usage or the error
    return code == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed()) return cmd_synth_gen(synth, sa);
    if (est->parsed()) return cmd_mi_estimate(est, ea);
    if (det->parsed()) return cmd_detect(det, da);
    return cmd_benchmark(bench, ba);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

}  // namespace ild
