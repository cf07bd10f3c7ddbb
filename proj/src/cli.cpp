#include "vub/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "vub/attacks.hpp"
#include "vub/dataset.hpp"
#include "vub/format_error.hpp"
#include "vub/model_io.hpp"
#include "vub/oracle.hpp"
#include "vub/oracle_io.hpp"
#include "vub/parallel.hpp"
#include "vub/random.hpp"
#include "vub/training.hpp"

namespace vub::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

/// Bad arguments or config values detected after parsing.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<double> parse_list(const std::string& s, const char* what) {
  std::vector<double> out;
  if (s.empty()) return out;
  try {
    for (std::string_view f : text::split_commas(s)) out.push_back(text::parse_double(f, 0));
  } catch (const FormatError&) {
    throw UsageError(std::string(what) + ": expected a comma-separated list of numbers");
  }
  return out;
}

std::vector<std::size_t> parse_sizes(const std::string& s, std::size_t expected, const char* what) {
  std::vector<std::size_t> out;
  try {
    for (std::string_view f : text::split_commas(s)) {
      out.push_back(static_cast<std::size_t>(text::parse_integer(f, 0)));
    }
  } catch (const FormatError&) {
    throw UsageError(std::string(what) + ": expected comma-separated positive integers");
  }
  if (out.size() != expected || std::find(out.begin(), out.end(), 0) != out.end()) {
    throw UsageError(std::string(what) + ": expected " + std::to_string(expected) +
                     " positive integers");
  }
  return out;
}

void write_json(const ordered_json& j, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

/// Existing JSON object at `path`, or an empty object.
ordered_json read_json_object(const fs::path& path) {
  if (!fs::exists(path)) return ordered_json::object();
  std::ifstream in(path);
  ordered_json j = ordered_json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw UsageError("existing output " + path.string() + " is not a JSON object");
  }
  return j;
}

ordered_json standardizer_json(const Standardizer& s) {
  return {{"mean", std::vector<double>(s.mean.begin(), s.mean.end())},
          {"scale", std::vector<double>(s.scale.begin(), s.scale.end())}};
}

Dataset apply_standardizer_file(const Dataset& data, const std::string& path) {
  if (path.empty()) return data;
  std::ifstream in(path);
  if (!in) throw FormatError(FormatErrorKind::io, 0, "cannot open " + path);
  const ordered_json j = ordered_json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.contains("mean") || !j.contains("scale")) {
    throw FormatError(FormatErrorKind::malformed_header, 0, path + ": not a standardizer file");
  }
  const auto mean = j["mean"].get<std::vector<double>>();
  const auto scale = j["scale"].get<std::vector<double>>();
  Standardizer s;
  s.mean = Eigen::Map<const Eigen::RowVectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
  s.scale =
      Eigen::Map<const Eigen::RowVectorXd>(scale.data(), static_cast<Eigen::Index>(scale.size()));
  return s.apply(data);
}

ordered_json report_json(const AttackReport& r) {
  ordered_json j;
  j["method"] = r.method;
  j["n_evaluated"] = r.n_evaluated;
  j["n_originally_correct"] = r.n_originally_correct;
  j["n_successful_attacks"] = r.n_successful_attacks;
  j["success_rate"] = r.success_rate;
  if (r.method == "fgs") {
    j["epsilon"] = r.epsilon;
  } else {
    j["mean_l2_of_success"] =
        r.mean_l2_of_success ? ordered_json(*r.mean_l2_of_success) : ordered_json(nullptr);
    j["target"] = r.target;
    j["c"] = r.c;
    j["steps"] = r.steps;
    j["step_size"] = r.step_size;
  }
  j["seed"] = r.seed;
  return j;
}

const char* loss_name(LossKind k) { return k == LossKind::vub ? "vub" : "vib"; }

// ---------------------------------------------------------------------------

struct GenDataOptions {
  std::size_t k = 4;
  std::size_t d = 16;
  std::size_t n = 5000;
  double separation = 3.0;
  std::uint64_t seed = 1;
  std::string out;
};

void add_gen_data(CLI::App& app, GenDataOptions& o) {
  app.add_option("--k", o.k, "number of classes")->capture_default_str();
  app.add_option("--d", o.d, "feature dimension")->capture_default_str();
  app.add_option("--n", o.n, "number of samples")->capture_default_str();
  app.add_option("--sep", o.separation, "mean-to-boundary distance in noise std units")
      ->capture_default_str();
  app.add_option("--seed", o.seed)->capture_default_str();
  app.add_option("--out", o.out, "output .vubds path")->required();
}

int cmd_gen_data(const GenDataOptions& o, std::ostream& out) {
  if (o.k < 1 || o.d < 1 || o.n < o.k || !(o.separation >= 0.0)) {
    throw UsageError("gen-data: need k >= 1, d >= 1, n >= k and sep >= 0");
  }
  const Dataset ds = gen_gaussian_mixture(o.k, o.d, o.n, o.separation, o.seed);
  const fs::path path(o.out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_dataset(ds, path);
  out << "wrote " << ds.size() << " samples (d=" << ds.dim() << ", k=" << ds.classes() << ") to "
      << o.out << '\n';
  return kSuccess;
}

// ---------------------------------------------------------------------------

struct TrainOptions {
  std::string data;
  std::string eval_data;
  double train_fraction = 0.8;
  std::optional<std::uint64_t> split_seed;
  bool standardize = false;
  std::string loss = "vub";
  double beta = 1e-3;
  double lr = 1e-4;
  double lr_decay = 0.97;
  std::size_t decay_every = 2;
  std::size_t batch_size = 32;
  std::size_t epochs = 200;
  std::uint64_t seed = 1;
  std::string optimizer = "adam";
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t mc_train = 1;
  std::size_t mc_eval = 1;
  std::size_t hidden = 0;
  std::size_t latent = 0;
  std::string out_dir = "run";
};

void add_train(CLI::App& app, TrainOptions& o) {
  app.add_option("--data", o.data, "training .vubds (split unless --eval-data given)")->required();
  app.add_option("--eval-data", o.eval_data, "separate evaluation .vubds");
  app.add_option("--train-fraction", o.train_fraction)->capture_default_str();
  app.add_option("--split-seed", o.split_seed, "defaults to --seed");
  app.add_flag("--standardize", o.standardize, "per-feature standardization fit on the train split");
  app.add_option("--loss", o.loss, "vib or vub")
      ->check(CLI::IsMember({"vib", "vub"}))
      ->capture_default_str();
  app.add_option("--beta", o.beta)->capture_default_str();
  app.add_option("--lr", o.lr, "base learning rate")->capture_default_str();
  app.add_option("--lr-decay", o.lr_decay)->capture_default_str();
  app.add_option("--decay-every", o.decay_every, "epochs per decay step")->capture_default_str();
  app.add_option("--batch-size", o.batch_size)->capture_default_str();
  app.add_option("--epochs", o.epochs)->capture_default_str();
  app.add_option("--seed", o.seed)->capture_default_str();
  app.add_option("--optimizer", o.optimizer)
      ->check(CLI::IsMember({"adam", "sgd"}))
      ->capture_default_str();
  app.add_option("--adam-beta1", o.adam_beta1)->capture_default_str();
  app.add_option("--adam-beta2", o.adam_beta2)->capture_default_str();
  app.add_option("--adam-eps", o.adam_eps)->capture_default_str();
  app.add_option("--mc-train", o.mc_train, "noise draws per training sample")->capture_default_str();
  app.add_option("--mc-eval", o.mc_eval, "noise draws per evaluation sample")->capture_default_str();
  app.add_option("--hidden", o.hidden, "hidden width (0: feature dim)")->capture_default_str();
  app.add_option("--latent", o.latent, "latent size K (0: feature dim / 2)")->capture_default_str();
  app.add_option("--out-dir", o.out_dir)->capture_default_str();
}

ordered_json train_config_json(const TrainOptions& o) {
  return {{"data", o.data},
          {"eval_data", o.eval_data},
          {"train_fraction", o.train_fraction},
          {"split_seed", o.split_seed.value_or(o.seed)},
          {"standardize", o.standardize},
          {"loss", o.loss},
          {"beta", o.beta},
          {"lr", o.lr},
          {"lr_decay", o.lr_decay},
          {"decay_every", o.decay_every},
          {"batch_size", o.batch_size},
          {"epochs", o.epochs},
          {"seed", o.seed},
          {"optimizer", o.optimizer},
          {"adam_beta1", o.adam_beta1},
          {"adam_beta2", o.adam_beta2},
          {"adam_eps", o.adam_eps},
          {"mc_train", o.mc_train},
          {"mc_eval", o.mc_eval},
          {"hidden", o.hidden},
          {"latent", o.latent},
          {"out_dir", o.out_dir}};
}

int cmd_train(const TrainOptions& o, std::ostream& out, std::ostream& err) {
  TrainConfig cfg;
  cfg.loss_kind = o.loss == "vib" ? LossKind::vib : LossKind::vub;
  cfg.beta = o.beta;
  cfg.base_lr = o.lr;
  cfg.lr_decay = o.lr_decay;
  cfg.decay_every = o.decay_every;
  cfg.batch_size = o.batch_size;
  cfg.epochs = o.epochs;
  cfg.seed = o.seed;
  cfg.optimizer = o.optimizer == "sgd" ? OptimizerKind::sgd : OptimizerKind::adam;
  cfg.adam = {o.adam_beta1, o.adam_beta2, o.adam_eps};
  cfg.mc_samples_train = o.mc_train;
  cfg.mc_samples_eval = o.mc_eval;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("train: ") + e.what());
  }
  if (o.eval_data.empty() && !(o.train_fraction > 0.0 && o.train_fraction < 1.0)) {
    throw UsageError("train: --train-fraction must lie in (0, 1)");
  }

  const Dataset all = load_dataset(o.data);
  std::optional<Dataset> train_set;
  std::optional<Dataset> eval_set;
  if (o.eval_data.empty()) {
    auto [tr, ev] = split(all, o.train_fraction, o.split_seed.value_or(o.seed));
    train_set.emplace(std::move(tr));
    eval_set.emplace(std::move(ev));
  } else {
    train_set.emplace(all);
    eval_set.emplace(load_dataset(o.eval_data));
  }

  const fs::path dir(o.out_dir);
  fs::create_directories(dir);
  if (o.standardize) {
    const Standardizer s = Standardizer::fit(*train_set);
    train_set.emplace(s.apply(*train_set));
    eval_set.emplace(s.apply(*eval_set));
    write_json(standardizer_json(s), dir / "standardizer.json");
  }

  const std::size_t d = train_set->dim();
  const std::size_t k = std::max(train_set->classes(), eval_set->classes());
  const std::size_t hidden = o.hidden > 0 ? o.hidden : d;
  const std::size_t latent = o.latent > 0 ? o.latent : std::max<std::size_t>(d / 2, 1);
  const Model init = init_model(d, hidden, latent, k, derive_seed(o.seed, 0x494e4954));

  const auto start = std::chrono::steady_clock::now();
  TrainResult result;
  try {
    result = train(init, *train_set, *eval_set, cfg);
  } catch (const TrainingDiverged& e) {
    ordered_json diag;
    diag["error"] = e.what();
    diag["epoch"] = e.epoch();
    diag["batch"] = e.batch();
    diag["completed_epochs"] = e.trace().size();
    diag["resolved_config"] = train_config_json(o);
    write_json(diag, dir / "diverged.json");
    std::ofstream trace(dir / "trace.csv");
    write_trace_csv(e.trace(), trace);
    err << e.what() << '\n';
    return kFailure;
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  save_model(result.model, dir / "model.vubm");
  {
    std::ofstream trace(dir / "trace.csv");
    write_trace_csv(result.trace, trace);
  }
  ordered_json metrics;
  const bool any = !result.trace.empty();
  const EvalMetrics final_eval =
      any ? EvalMetrics{result.trace.back().eval_acc, result.trace.back().eval_ce, 0.0}
          : evaluate(result.model, *eval_set, cfg.mc_samples_eval, derive_seed(o.seed, 0x4556));
  metrics["final_eval_acc"] = final_eval.accuracy;
  metrics["final_eval_ce"] = final_eval.mean_ce;
  metrics["beta"] = o.beta;
  metrics["loss_kind"] = loss_name(cfg.loss_kind);
  metrics["seed"] = o.seed;
  metrics["label_entropy"] = result.label_entropy;
  metrics["n_train"] = train_set->size();
  metrics["n_eval"] = eval_set->size();
  metrics["epochs_completed"] = result.trace.size();
  metrics["wall_time_s"] = wall;
  metrics["resolved_config"] = train_config_json(o);
  write_json(metrics, dir / "metrics.json");

  out << "trained " << loss_name(cfg.loss_kind) << " beta=" << o.beta << " for "
      << result.trace.size() << " epochs: eval_acc=" << final_eval.accuracy
      << " eval_ce=" << final_eval.mean_ce << " (" << wall << " s)\n";
  return kSuccess;
}

// ---------------------------------------------------------------------------

struct EvalOptions {
  std::string model;
  std::string data;
  std::string standardizer;
  std::size_t mc_samples = 1;
  std::uint64_t seed = 1;
  std::string out;
};

void add_eval(CLI::App& app, EvalOptions& o) {
  app.add_option("--model", o.model, "VUBM1 model file")->required();
  app.add_option("--data", o.data, ".vubds dataset")->required();
  app.add_option("--standardizer", o.standardizer, "standardizer.json written by train");
  app.add_option("--mc-samples", o.mc_samples)->capture_default_str();
  app.add_option("--seed", o.seed)->capture_default_str();
  app.add_option("--out", o.out, "metrics JSON (merged when it exists)")->required();
}

ordered_json eval_config_json(const EvalOptions& o) {
  return {{"model", o.model},           {"data", o.data}, {"standardizer", o.standardizer},
          {"mc_samples", o.mc_samples}, {"seed", o.seed}, {"out", o.out}};
}

int cmd_eval(const EvalOptions& o, std::ostream& out) {
  if (o.mc_samples < 1) throw UsageError("eval: --mc-samples must be >= 1");
  const Model model = load_model(o.model);
  const Dataset data = apply_standardizer_file(load_dataset(o.data), o.standardizer);
  const EvalMetrics m = evaluate(model, data, o.mc_samples, o.seed);
  const InfoPlanePoint ip = info_plane_point(model, data, o.seed);

  ordered_json j = read_json_object(o.out);
  j["evaluation"] = {{"accuracy", m.accuracy},
                     {"mean_ce", m.mean_ce},
                     {"mean_classifier_entropy", m.mean_classifier_entropy},
                     {"rate_estimate", ip.rate_estimate},
                     {"distortion_analog", ip.distortion_analog},
                     {"n", data.size()},
                     {"mc_samples", o.mc_samples},
                     {"seed", o.seed}};
  j["resolved_config"] = eval_config_json(o);
  write_json(j, o.out);
  out << "accuracy=" << m.accuracy << " mean_ce=" << m.mean_ce << '\n';
  return kSuccess;
}

// ---------------------------------------------------------------------------

struct AttackOptions {
  std::string method = "fgs";
  std::string model;
  std::string data;
  std::string standardizer;
  double eps = 0.1;
  std::size_t grad_draws = 1;
  int target = 0;
  double c = 1.0;
  std::size_t steps = 200;
  double step_size = 0.01;
  std::uint64_t seed = 1;
  std::size_t jobs = 1;
  std::string out;
};

void add_attack(CLI::App& app, AttackOptions& o) {
  app.add_option("--method", o.method, "fgs or l2")
      ->check(CLI::IsMember({"fgs", "l2"}))
      ->capture_default_str();
  app.add_option("--model", o.model, "VUBM1 model file")->required();
  app.add_option("--data", o.data, ".vubds dataset")->required();
  app.add_option("--standardizer", o.standardizer, "standardizer.json written by train");
  app.add_option("--eps", o.eps, "FGS step size")->capture_default_str();
  app.add_option("--grad-draws", o.grad_draws, "noise draws averaged in the FGS gradient")
      ->capture_default_str();
  app.add_option("--target", o.target, "target class for l2")->capture_default_str();
  app.add_option("--c", o.c, "l2 margin weight")->capture_default_str();
  app.add_option("--steps", o.steps, "l2 descent steps")->capture_default_str();
  app.add_option("--step-size", o.step_size, "l2 descent step size")->capture_default_str();
  app.add_option("--seed", o.seed)->capture_default_str();
  app.add_option("--jobs", o.jobs, "worker threads")->capture_default_str();
  app.add_option("--out", o.out, "metrics JSON (report appended under \"attacks\")")->required();
}

ordered_json attack_config_json(const AttackOptions& o) {
  return {{"method", o.method}, {"model", o.model},     {"data", o.data},
          {"standardizer", o.standardizer}, {"eps", o.eps}, {"grad_draws", o.grad_draws},
          {"target", o.target}, {"c", o.c},             {"steps", o.steps},
          {"step_size", o.step_size}, {"seed", o.seed}, {"jobs", o.jobs},
          {"out", o.out}};
}

int cmd_attack(const AttackOptions& o, std::ostream& out) {
  if (o.method == "fgs" && !(o.eps >= 0.0)) throw UsageError("attack: --eps must be >= 0");
  if (o.method == "l2") {
    if (o.steps < 1) throw UsageError("attack: --steps must be >= 1");
    if (!(o.c > 0.0)) throw UsageError("attack: --c must be > 0");
    if (!(o.step_size >= 0.0)) throw UsageError("attack: --step-size must be >= 0");
  }
  if (o.grad_draws < 1) throw UsageError("attack: --grad-draws must be >= 1");
  const Model model = load_model(o.model);
  const Dataset data = apply_standardizer_file(load_dataset(o.data), o.standardizer);

  AttackReport report;
  if (o.method == "fgs") {
    report = attack_sweep_fgs(model, data, o.eps, o.seed, o.jobs, o.grad_draws);
  } else {
    if (o.target < 0 || static_cast<std::size_t>(o.target) >= model.dims.n_classes) {
      throw UsageError("attack: --target out of range for the model");
    }
    report = attack_sweep_l2(model, data, o.target, {o.steps, o.c, o.step_size}, o.seed, o.jobs);
  }

  ordered_json j = read_json_object(o.out);
  ordered_json entry = report_json(report);
  entry["resolved_config"] = attack_config_json(o);
  if (!j.contains("attacks") || !j["attacks"].is_array()) j["attacks"] = ordered_json::array();
  j["attacks"].push_back(entry);
  j["resolved_config"] = attack_config_json(o);
  write_json(j, o.out);

  out << report.method << ": " << report.n_successful_attacks << "/"
      << report.n_originally_correct << " successful (rate " << report.success_rate << ")";
  if (report.method == "l2") {
    out << ", mean l2 ";
    if (report.mean_l2_of_success) {
      out << *report.mean_l2_of_success;
    } else {
      out << "n/a";
    }
  }
  out << '\n';
  return kSuccess;
}

// ---------------------------------------------------------------------------

struct VerifyOptions {
  std::size_t instances = 1000;
  std::string betas = "1e-3,1e-2,1e-1,1";
  std::size_t max_x = 6;
  std::size_t max_y = 4;
  std::size_t max_z = 5;
  std::string sizes;
  double concentration = 1.0;
  std::uint64_t seed = 1;
  std::string sign = "subtract";
  std::string instance;
  std::size_t jobs = 1;
  std::string out;
};

void add_verify(CLI::App& app, VerifyOptions& o) {
  app.add_option("--instances", o.instances, "number of random instances")->capture_default_str();
  app.add_option("--betas", o.betas, "comma-separated beta grid")->capture_default_str();
  app.add_option("--max-x", o.max_x, "largest |X| drawn")->capture_default_str();
  app.add_option("--max-y", o.max_y, "largest |Y| drawn")->capture_default_str();
  app.add_option("--max-z", o.max_z, "largest |Z| drawn")->capture_default_str();
  app.add_option("--sizes", o.sizes, "fixed sizes x,y,z instead of random ones");
  app.add_option("--concentration", o.concentration, "Dirichlet concentration")
      ->capture_default_str();
  app.add_option("--seed", o.seed)->capture_default_str();
  app.add_option("--sign-convention", o.sign,
                 "subtract: subtract the min term (default); add: add it, reporting the looser order")
      ->check(CLI::IsMember({"subtract", "add"}))
      ->capture_default_str();
  app.add_option("--instance", o.instance, "verify one vubinst file instead of random instances");
  app.add_option("--jobs", o.jobs, "worker threads")->capture_default_str();
  app.add_option("--out", o.out, "report JSON")->required();
}

ordered_json verify_config_json(const VerifyOptions& o) {
  return {{"instances", o.instances}, {"betas", o.betas},
          {"max_x", o.max_x},         {"max_y", o.max_y},
          {"max_z", o.max_z},         {"sizes", o.sizes},
          {"concentration", o.concentration}, {"seed", o.seed},
          {"sign_convention", o.sign}, {"instance", o.instance},
          {"jobs", o.jobs},           {"out", o.out}};
}

int cmd_verify_bounds(const VerifyOptions& o, std::ostream& out) {
  const std::vector<double> betas = parse_list(o.betas, "--betas");
  if (betas.empty()) throw UsageError("verify-bounds: --betas is empty");
  for (double b : betas) {
    if (!(b >= 0.0)) throw UsageError("verify-bounds: betas must be >= 0");
  }
  if (!(o.concentration > 0.0)) throw UsageError("verify-bounds: --concentration must be > 0");
  if (o.max_x < 1 || o.max_y < 1 || o.max_z < 1) {
    throw UsageError("verify-bounds: --max-x/--max-y/--max-z must be >= 1");
  }
  std::optional<oracle::InstanceSizes> fixed;
  if (!o.sizes.empty()) {
    const auto s = parse_sizes(o.sizes, 3, "--sizes");
    fixed = oracle::InstanceSizes{s[0], s[1], s[2]};
  }
  const auto sign = o.sign == "add" ? oracle::SignConvention::add_min
                                    : oracle::SignConvention::subtract_min;

  std::vector<oracle::OrderingReport> reports;
  std::vector<double> identity_error;  // |rate - I(Z;X) - KL(P(z)||R)|
  if (!o.instance.empty()) {
    const oracle::DiscreteInstance inst = oracle::load_instance(o.instance);
    reports.push_back(oracle::verify_ordering(inst, betas, sign));
  } else {
    if (o.instances < 1) throw UsageError("verify-bounds: --instances must be >= 1");
    reports.resize(o.instances);
    parallel_for(o.instances, o.jobs, [&](std::size_t i) {
      const std::uint64_t s = derive_seed(o.seed, i);
      oracle::InstanceSizes sizes;
      if (fixed) {
        sizes = *fixed;
      } else {
        Rng rng(derive_seed(s, 0x53495a45));
        sizes = {1 + rng() % o.max_x, 1 + rng() % o.max_y, 1 + rng() % o.max_z};
      }
      reports[i] = oracle::verify_ordering(oracle::random_instance(s, sizes, o.concentration),
                                           betas, sign);
    });
  }

  std::size_t checks = 0, chain_pass = 0, bound_pass = 0;
  double worst_lower = std::numeric_limits<double>::infinity();  // min l_vub - l_ib
  double worst_upper = std::numeric_limits<double>::infinity();  // min l_vib - l_vub
  double max_gap = 0.0;
  for (const auto& r : reports) {
    max_gap = std::max(max_gap, std::abs(r.gap));
    for (const auto& e : r.entries) {
      ++checks;
      chain_pass += e.chain_holds ? 1 : 0;
      bound_pass += e.upper_bound_holds ? 1 : 0;
      worst_lower = std::min(worst_lower, e.l_vub - e.l_ib);
      worst_upper = std::min(worst_upper, e.l_vib - e.l_vub);
    }
  }

  const bool added_min = sign == oracle::SignConvention::add_min;
  const std::size_t failures = added_min ? checks - bound_pass : checks - chain_pass;
  ordered_json j;
  j["sign_convention"] = o.sign;
  j["instances"] = reports.size();
  j["betas"] = betas;
  j["checks"] = checks;
  j["passed"] = checks - failures;
  j["failed"] = failures;
  j["pass_fraction"] = static_cast<double>(checks - failures) / static_cast<double>(checks);
  j["chain_holds"] = chain_pass;
  j["upper_bound_holds"] = bound_pass;
  j["worst_vub_minus_ib"] = worst_lower;
  j["worst_vib_minus_vub"] = worst_upper;
  j["max_abs_gap"] = max_gap;
  if (added_min) j["looser_than_vib"] = checks - chain_pass;
  j["tolerance"] = oracle::kOrderingTolerance;
  j["resolved_config"] = verify_config_json(o);
  write_json(j, o.out);

  out << "verify-bounds (" << o.sign << "): " << checks - failures << "/" << checks
      << " checks passed";
  if (added_min) out << ", " << checks - chain_pass << " with VUB looser than VIB";
  out << '\n';
  return failures == 0 ? kSuccess : kFailure;
}

// ---------------------------------------------------------------------------

struct CurveOptions {
  std::string joint;
  std::string random_joint = "3,2";
  std::uint64_t seed = 1;
  std::size_t z_card = 0;
  std::string betas;
  double beta_min = 0.0;
  double beta_max = 10.0;
  std::size_t beta_count = 21;
  std::size_t iters = 20000;
  double tol = 1e-12;
  std::string out;
};

void add_curve(CLI::App& app, CurveOptions& o) {
  app.add_option("--joint", o.joint, "vubjoint file (otherwise a random joint)");
  app.add_option("--random-joint", o.random_joint, "sizes x,y of a seeded Dirichlet(1) joint")
      ->capture_default_str();
  app.add_option("--seed", o.seed)->capture_default_str();
  app.add_option("--z-card", o.z_card, "|Z| (0: |X|)")->capture_default_str();
  app.add_option("--betas", o.betas, "explicit comma-separated beta grid, L = I(Z;X) - beta I(Z;Y)");
  app.add_option("--beta-min", o.beta_min)->capture_default_str();
  app.add_option("--beta-max", o.beta_max)->capture_default_str();
  app.add_option("--beta-count", o.beta_count)->capture_default_str();
  app.add_option("--iters", o.iters, "max fixed-point iterations per beta")->capture_default_str();
  app.add_option("--tol", o.tol, "max-change convergence threshold")->capture_default_str();
  app.add_option("--out", o.out, "CSV output")->required();
}

int cmd_info_curve(const CurveOptions& o, std::ostream& out) {
  std::vector<double> betas;
  if (!o.betas.empty()) {
    betas = parse_list(o.betas, "--betas");
  } else {
    if (o.beta_count < 1 || !(o.beta_max >= o.beta_min)) {
      throw UsageError("info-curve: need --beta-count >= 1 and --beta-max >= --beta-min");
    }
    for (std::size_t i = 0; i < o.beta_count; ++i) {
      const double t = o.beta_count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(o.beta_count - 1);
      betas.push_back(o.beta_min + t * (o.beta_max - o.beta_min));
    }
  }
  for (double b : betas) {
    if (!(b >= 0.0)) throw UsageError("info-curve: betas must be >= 0");
  }
  if (o.iters < 1 || !(o.tol > 0.0)) throw UsageError("info-curve: need --iters >= 1, --tol > 0");

  std::optional<oracle::DiscreteJoint> joint;
  if (!o.joint.empty()) {
    joint.emplace(oracle::load_joint(o.joint));
  } else {
    const auto s = parse_sizes(o.random_joint, 2, "--random-joint");
    Rng rng(o.seed);
    const VectorXd flat = oracle::sample_dirichlet(rng, s[0] * s[1], 1.0);
    joint.emplace(MatrixXd(flat.reshaped<Eigen::RowMajor>(static_cast<Eigen::Index>(s[0]),
                                                          static_cast<Eigen::Index>(s[1]))));
  }
  const std::size_t z_card = o.z_card > 0 ? o.z_card : static_cast<std::size_t>(joint->nx());
  const auto curve = oracle::ib_curve(*joint, z_card, betas, o.iters, o.tol, o.seed);

  const fs::path path(o.out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream csv(path);
  if (!csv) throw std::runtime_error("cannot write " + o.out);
  csv << "beta,rate,distortion\n";
  std::size_t unconverged = 0;
  for (const auto& p : curve) {
    csv << text::format_double(p.beta) << ',' << text::format_double(p.rate) << ','
        << text::format_double(p.distortion) << '\n';
    unconverged += p.converged ? 0 : 1;
  }
  out << "info-curve: " << curve.size() << " points, I(X;Y)="
      << oracle::mutual_information(joint->table());
  if (unconverged > 0) out << ", " << unconverged << " not converged";
  out << '\n';
  return kSuccess;
}

// ---------------------------------------------------------------------------

std::optional<std::string> find_config_path(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return std::nullopt;
}

}  // namespace

std::vector<std::string> config_to_args(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(FormatErrorKind::io, 0, "cannot open config " + path);
  std::vector<std::string> args;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError(FormatErrorKind::malformed_header, line_no, "expected key=value");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw FormatError(FormatErrorKind::malformed_header, line_no, "empty key");
    std::replace(key.begin(), key.end(), '_', '-');
    // boolean flags: `standardize=true` sets, `standardize=false` leaves unset
    if (value == "false") continue;
    args.push_back("--" + key);
    if (value != "true") args.push_back(value);
  }
  return args;
}

int run(const std::vector<std::string>& input_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Variational information bottleneck workbench"};
  app.name("vubctl");
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  GenDataOptions gen;
  TrainOptions tr;
  EvalOptions ev;
  AttackOptions at;
  VerifyOptions vb;
  CurveOptions ic;
  std::string config_path;

  auto add = [&](const char* name, const char* desc, auto&& setup, auto& opts) {
    CLI::App* sub = app.add_subcommand(name, desc);
    setup(*sub, opts);
    sub->add_option("--config", config_path, "key=value file; command-line flags win");
    return sub;
  };
  CLI::App* s_gen = add("gen-data", "generate a gaussian-mixture dataset", add_gen_data, gen);
  CLI::App* s_train = add("train", "train a VIB/VUB stochastic classifier", add_train, tr);
  CLI::App* s_eval = add("eval", "evaluate a model on a dataset", add_eval, ev);
  CLI::App* s_attack = add("attack", "adversarial robustness sweep", add_attack, at);
  CLI::App* s_verify =
      add("verify-bounds", "check L_IB <= L_VUB <= L_VIB on random discrete instances",
          add_verify, vb);
  CLI::App* s_curve = add("info-curve", "trace the information curve of a discrete joint",
                          add_curve, ic);

  std::vector<std::string> args;
  try {
    args = input_args;
    if (const auto cfg = find_config_path(input_args); cfg && !input_args.empty()) {
      // Config values go right after the subcommand so later flags override them.
      const std::vector<std::string> from_file = config_to_args(*cfg);
      args.insert(args.begin() + 1, from_file.begin(), from_file.end());
    }
  } catch (const FormatError& e) {
    err << "vubctl: config: " << e.what() << '\n';
    return kUsage;
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kSuccess;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }

  try {
    if (s_gen->parsed()) return cmd_gen_data(gen, out);
    if (s_train->parsed()) return cmd_train(tr, out, err);
    if (s_eval->parsed()) return cmd_eval(ev, out);
    if (s_attack->parsed()) return cmd_attack(at, out);
    if (s_verify->parsed()) return cmd_verify_bounds(vb, out);
    if (s_curve->parsed()) return cmd_info_curve(ic, out);
  } catch (const UsageError& e) {
    err << "vubctl: " << e.what() << '\n';
    return kUsage;
  } catch (const FormatError& e) {
    err << "vubctl: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "vubctl: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}

}  // namespace vub::cli
