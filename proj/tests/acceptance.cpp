// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Tolerances, budgets and attack settings are pinned below.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numbers>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "fd_oracle.hpp"
#include "json.hpp"
#include "vub/attacks.hpp"
#include "vub/cli.hpp"
#include "vub/dataset.hpp"
#include "vub/format_error.hpp"
#include "vub/model_io.hpp"
#include "vub/oracle.hpp"
#include "vub/training.hpp"

namespace fs = std::filesystem;
using namespace vub;
using Clock = std::chrono::steady_clock;

namespace {

// criterion 1-3
constexpr std::size_t kInstances = 1000;
constexpr std::size_t kMaxX = 6, kMaxY = 4, kMaxZ = 5;
constexpr double kChainTolerance = 1e-9;
constexpr double kIdentityTolerance = 1e-12;
constexpr double kSweepBudgetS = 30.0;
const std::vector<double> kBetas{1e-3, 1e-2, 1e-1, 1.0};

// criterion 4
constexpr std::size_t kGradientCases = 24;  // half VIB, half VUB
constexpr double kGradientTolerance = 1e-4;
constexpr double kGradientBudgetS = 10.0;

// criterion 5
constexpr std::size_t kKlParameterSets = 10;
constexpr std::size_t kKlDraws = 1000000;
constexpr double kKlRelTolerance = 0.01;

// criterion 6, 7, 9
constexpr double kDeskAccuracy = 0.95;
constexpr double kDeskBudgetS = 60.0;
constexpr std::size_t kDeskEpochs = 200;
constexpr double kPriorEntropyTolerance = 1e-5;

// criterion 8
constexpr std::size_t kRobustSeeds = 5;
constexpr double kRobustBeta = 1e-2;
constexpr double kFgsEpsilon = 0.25;
constexpr int kL2Target = 0;
const L2AttackParams kL2Params{500, 50.0, 0.01};
constexpr std::uint64_t kAttackSeed = 7;

// criterion 10
constexpr double kMonotoneTolerance = 1e-6;
constexpr double kZeroRateTolerance = 1e-6;
constexpr double kNoiselessTolerance = 1e-3;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (code != 0 && code != cli::kUsage) std::fprintf(stderr, "%s", err.str().c_str());
  return code;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const fs::path& work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "vub_acceptance";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

// ---------------------------------------------------------------------------
// 1-3: one sweep over random instances, three verdicts.

struct SweepStats {
  std::size_t checks = 0;
  std::size_t chain_pass = 0;
  double worst_rate_identity = 0.0;
  double worst_gap_identity = 0.0;
  double seconds = 0.0;
};

const SweepStats& sweep() {
  static const SweepStats stats = [] {
    SweepStats s;
    const auto t0 = Clock::now();
    for (std::size_t i = 0; i < kInstances; ++i) {
      const std::uint64_t seed = derive_seed(20240, i);
      Rng rng(derive_seed(seed, 1));
      const oracle::InstanceSizes sizes{1 + rng() % kMaxX, 1 + rng() % kMaxY, 1 + rng() % kMaxZ};
      const oracle::DiscreteInstance inst = oracle::random_instance(seed, sizes, 1.0);

      const oracle::Induced ind = oracle::induced_distributions(inst);
      const double kl_pz = oracle::kl_divergence(ind.p_z, inst.prior.probs());
      const double izx = oracle::mutual_information(ind.joint_zx);
      s.worst_rate_identity = std::max(
          s.worst_rate_identity, std::abs(oracle::rate_bound_exact(inst) - izx - kl_pz));

      const double min_term = oracle::distortion_bound_exact(inst).min_term();
      for (double beta : kBetas) {
        const double ib = oracle::l_ib_exact(inst, beta);
        const double vub = oracle::l_vub_exact(inst, beta);
        const double vib = oracle::l_vib_exact(inst, beta);
        ++s.checks;
        if (ib <= vub + kChainTolerance && vub <= vib + kChainTolerance) ++s.chain_pass;
        s.worst_gap_identity = std::max(s.worst_gap_identity, std::abs((vib - vub) - min_term));
      }
    }
    s.seconds = seconds_since(t0);
    return s;
  }();
  return stats;
}

Outcome bound_chain() {
  const SweepStats& s = sweep();
  return {s.chain_pass == s.checks && s.seconds < kSweepBudgetS,
          fmt("%zu/%zu chain checks hold (tol %g), %.2f s (budget %g s)", s.chain_pass, s.checks,
              kChainTolerance, s.seconds, kSweepBudgetS)};
}

Outcome rate_identity() {
  const SweepStats& s = sweep();
  return {s.worst_rate_identity <= kIdentityTolerance,
          fmt("max |rate - I(Z;X) - KL(P(z)||R)| = %.3g (tol %g)", s.worst_rate_identity,
              kIdentityTolerance)};
}

Outcome gap_identity() {
  const SweepStats& s = sweep();
  return {s.worst_gap_identity <= kIdentityTolerance,
          fmt("max |(vib - vub) - min term| = %.3g over %zu (instance, beta) pairs (tol %g)",
              s.worst_gap_identity, s.checks, kIdentityTolerance)};
}

// ---------------------------------------------------------------------------

Outcome gradients() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (std::size_t i = 0; i < kGradientCases; ++i) {
    const LossKind kind = i % 2 ? LossKind::vub : LossKind::vib;
    worst = std::max(worst, testing::max_gradient_error(testing::random_grad_case(1000 + i, kind)));
  }
  const double secs = seconds_since(t0);
  return {worst < kGradientTolerance && secs < kGradientBudgetS,
          fmt("%zu cases, max relative error %.3g (tol %g), %.2f s (budget %g s)", kGradientCases,
              worst, kGradientTolerance, secs, kGradientBudgetS)};
}

// ---------------------------------------------------------------------------

Outcome kl_monte_carlo() {
  Rng params_rng(55);
  double worst = 0.0;
  for (std::size_t set = 0; set < kKlParameterSets; ++set) {
    const Eigen::Index k = 1 + static_cast<Eigen::Index>(params_rng() % 4);
    GaussianParams g{standard_normal(params_rng, k), VectorXd(k)};
    for (Eigen::Index i = 0; i < k; ++i) g.logvar(i) = 2.0 * params_rng.uniform() - 1.0;

    // log q(z) - log p(z) from the densities, never from the closed form
    Rng rng(derive_seed(56, set));
    double sum = 0.0;
    for (std::size_t n = 0; n < kKlDraws; ++n) {
      const VectorXd z = reparameterize(g, standard_normal(rng, k));
      double log_ratio = 0.0;
      for (Eigen::Index i = 0; i < k; ++i) {
        const double var = std::exp(g.logvar(i));
        const double d = z(i) - g.mu(i);
        log_ratio += -0.5 * std::log(var) - 0.5 * d * d / var + 0.5 * z(i) * z(i);
      }
      sum += log_ratio;
    }
    const double closed = kl_std_normal(g).value;
    worst = std::max(worst, std::abs(sum / static_cast<double>(kKlDraws) - closed) / closed);
  }
  return {worst < kKlRelTolerance,
          fmt("%zu parameter sets x %zu draws, max relative deviation %.4f (tol %g)",
              kKlParameterSets, kKlDraws, worst, kKlRelTolerance)};
}

// ---------------------------------------------------------------------------
// 6, 7, 9 share the desk run.

struct DeskRun {
  bool ok = false;
  double seconds = 0.0;
  nlohmann::json metrics;
  fs::path dir;
};

const fs::path& desk_data() {
  static const fs::path path = [] {
    fs::path p = work_dir() / "mix.vubds";
    cli({"gen-data", "--k", "4", "--d", "16", "--n", "5000", "--sep", "3", "--seed", "1", "--out",
         p.string()});
    return p;
  }();
  return path;
}

const DeskRun& desk_run() {
  static const DeskRun run = [] {
    DeskRun r;
    r.dir = work_dir() / "desk";
    const auto t0 = Clock::now();
    r.ok = cli({"train", "--loss", "vub", "--beta", "0.001", "--data", desk_data().string(),
                "--epochs", std::to_string(kDeskEpochs), "--seed", "1", "--out-dir",
                r.dir.string()}) == 0;
    r.seconds = seconds_since(t0);
    if (r.ok) r.metrics = nlohmann::json::parse(slurp(r.dir / "metrics.json"));
    return r;
  }();
  return run;
}

Outcome desk_training() {
  const DeskRun& r = desk_run();
  if (!r.ok) return {false, "train command failed"};
  const double acc = r.metrics["final_eval_acc"].get<double>();
  const std::size_t n_train = r.metrics["n_train"].get<std::size_t>();
  const std::size_t n_eval = r.metrics["n_eval"].get<std::size_t>();
  return {acc >= kDeskAccuracy && r.seconds < kDeskBudgetS && n_train == 4000 && n_eval == 1000,
          fmt("eval accuracy %.4f (need >= %g), %zu train / %zu eval, %.1f s (budget %g s)", acc,
              kDeskAccuracy, n_train, n_eval, r.seconds, kDeskBudgetS)};
}

Outcome tightness() {
  const DeskRun& r = desk_run();
  if (!r.ok) return {false, "desk run unavailable"};
  // Same run in-process with the diagnostic on; the recorded model must match
  // the one the command wrote, so the batches are the ones it trained on.
  const Dataset all = load_dataset(desk_data());
  const auto [train_set, eval_set] = split(all, 0.8, 1);
  TrainConfig c;
  c.loss_kind = LossKind::vub;
  c.beta = 1e-3;
  c.epochs = kDeskEpochs;
  c.seed = 1;
  c.record_tightness = true;
  const Model init = init_model(16, 16, 8, 4, derive_seed(1, 0x494e4954));
  const TrainResult res = train(init, train_set, eval_set, c);
  const bool same_run = res.model == load_model(r.dir / "model.vubm");

  std::size_t ordered = 0;
  double worst_gap = 0.0;
  for (const TightnessSample& s : res.tightness) {
    if (s.vub_total <= s.vib_total) ++ordered;
    worst_gap = std::max(worst_gap, std::abs((s.vib_total - s.vub_total) - s.min_term));
  }
  return {same_run && ordered == res.tightness.size() && worst_gap <= kIdentityTolerance &&
              !res.tightness.empty(),
          fmt("%zu/%zu batches with vub <= vib, max |gap - min term| = %.3g (tol %g), "
              "model matches command output: %s",
              ordered, res.tightness.size(), worst_gap, kIdentityTolerance,
              same_run ? "yes" : "no")};
}

Outcome info_plane() {
  const double h = prior_entropy(2);
  const double independent = std::log(2.0 * std::numbers::pi) + 1.0;
  const DeskRun& r = desk_run();
  if (!r.ok) return {false, "desk run unavailable"};

  std::istringstream in(slurp(r.dir / "trace.csv"));
  std::string line;
  std::getline(in, line);
  const bool header_ok = line.find("rate_estimate,distortion_analog") != std::string::npos;
  std::size_t rows = 0;
  bool finite = true;
  while (std::getline(in, line)) {
    ++rows;
    std::vector<double> cols;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) cols.push_back(std::stod(cell));
    finite = finite && cols.size() == 11 && std::isfinite(cols[8]) && std::isfinite(cols[9]);
  }
  const bool pass = std::abs(h - 2.837877) <= kPriorEntropyTolerance &&
                    std::abs(h - independent) <= 1e-12 && header_ok && rows == kDeskEpochs &&
                    finite;
  return {pass, fmt("H(R) for K=2 = %.7f (target 2.837877, tol %g), %zu trace rows for %zu "
                    "epochs, rate/distortion finite: %s",
                    h, kPriorEntropyTolerance, rows, kDeskEpochs, finite ? "yes" : "no")};
}

// ---------------------------------------------------------------------------

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Outcome robustness() {
  std::vector<double> fgs_vub, fgs_base, l2_vub, l2_base;
  for (std::size_t s = 1; s <= kRobustSeeds; ++s) {
    const std::string seed = std::to_string(s);
    const fs::path vub_dir = work_dir() / ("robust_vub_" + seed);
    const fs::path base_dir = work_dir() / ("robust_base_" + seed);
    if (cli({"train", "--loss", "vub", "--beta", fmt("%g", kRobustBeta), "--data",
             desk_data().string(), "--seed", seed, "--out-dir", vub_dir.string()}) != 0 ||
        cli({"train", "--loss", "vib", "--beta", "0", "--data", desk_data().string(), "--seed",
             seed, "--out-dir", base_dir.string()}) != 0) {
      return {false, "training failed"};
    }
    const Dataset eval_set = split(load_dataset(desk_data()), 0.8, s).second;
    for (auto [dir, fgs, l2] : {std::tuple{vub_dir, &fgs_vub, &l2_vub},
                                std::tuple{base_dir, &fgs_base, &l2_base}}) {
      const Model m = load_model(dir / "model.vubm");
      fgs->push_back(attack_sweep_fgs(m, eval_set, kFgsEpsilon, kAttackSeed).success_rate);
      const AttackReport r = attack_sweep_l2(m, eval_set, kL2Target, kL2Params, kAttackSeed);
      l2->push_back(r.mean_l2_of_success.value_or(0.0));
    }
  }
  const double fv = median(fgs_vub), fb = median(fgs_base);
  const double lv = median(l2_vub), lb = median(l2_base);
  return {fv < fb && lv > lb,
          fmt("median FGS success (eps %g): VUB beta=%g %.4f vs baseline %.4f; median targeted "
              "L2 (c %g, %zu steps): VUB %.4f vs baseline %.4f",
              kFgsEpsilon, kRobustBeta, fv, fb, kL2Params.c, kL2Params.steps, lv, lb)};
}

// ---------------------------------------------------------------------------

Outcome info_curve() {
  Rng rng(310);
  const VectorXd cells = oracle::sample_dirichlet(rng, 6, 1.0);
  const oracle::DiscreteJoint joint(Eigen::Map<const MatrixXd>(cells.data(), 3, 2));
  std::vector<double> grid;
  for (int i = 0; i <= 40; ++i) grid.push_back(0.5 * i);
  const auto curve = oracle::ib_curve(joint, 3, grid, 20000, 1e-12, 1);

  double worst_drop = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    worst_drop = std::max(worst_drop, curve[i - 1].distortion - curve[i].distortion);
  }
  const double zero_rate = curve.front().rate;

  const oracle::DiscreteJoint noiseless((MatrixXd(2, 2) << 0.5, 0.0, 0.0, 0.5).finished());
  const std::vector<double> big{1000.0};
  const double top = oracle::ib_curve(noiseless, 2, big, 20000, 1e-12, 1).front().distortion;
  const double ixy = std::log(2.0);

  return {worst_drop <= kMonotoneTolerance && zero_rate < kZeroRateTolerance &&
              std::abs(top - ixy) <= kNoiselessTolerance,
          fmt("largest distortion drop %.3g (tol %g), beta=0 rate %.3g (tol %g), noiseless "
              "I(Z;Y) %.6f vs I(X;Y) %.6f (tol %g)",
              worst_drop, kMonotoneTolerance, zero_rate, kZeroRateTolerance, top, ixy,
              kNoiselessTolerance)};
}

// ---------------------------------------------------------------------------

Outcome round_trips() {
  std::vector<std::string> problems;
  const Dataset ds = gen_gaussian_mixture(4, 16, 500, 3.0, 12);
  const fs::path ds_path = work_dir() / "rt.vubds";
  save_dataset(ds, ds_path);
  const Dataset back = load_dataset(ds_path);
  const double ds_err = (back.features() - ds.features()).cwiseAbs().maxCoeff();
  if (ds_err > 1e-9 || back.labels() != ds.labels()) problems.push_back("dataset round trip");

  Model m = init_model(16, 16, 8, 4, 3);
  m.enc_b1.setConstant(0.1);
  m.head_b(2) = -std::numbers::pi;
  const fs::path m_path = work_dir() / "rt.vubm";
  save_model(m, m_path);
  if (!(load_model(m_path) == m)) problems.push_back("model round trip");

  std::ofstream(work_dir() / "bad.vubds") << "vubds,v1,3,2,2\n0.1,0.2,1\n0.3,0.4,0\n0.5,x,1\n";
  try {
    load_dataset(work_dir() / "bad.vubds");
    problems.push_back("malformed dataset accepted");
  } catch (const FormatError& e) {
    if (e.line() != 4 || std::string(e.what()).find("line 4") == std::string::npos) {
      problems.push_back("dataset error without line number");
    }
  }
  std::ostringstream out, err;
  const int code = cli::run({"train", "--data", (work_dir() / "bad.vubds").string(), "--out-dir",
                             (work_dir() / "bad_run").string()},
                            out, err);
  if (code != cli::kUsage || err.str().find("line 4") == std::string::npos) {
    problems.push_back("CLI did not exit 2 with a line number");
  }

  std::ofstream(work_dir() / "bad.vubm", std::ios::binary) << "VUBM1\x01";
  if (cli({"eval", "--model", (work_dir() / "bad.vubm").string(), "--data",
           (work_dir() / "rt.vubds").string(), "--out", (work_dir() / "bad.json").string()}) !=
      cli::kUsage) {
    problems.push_back("truncated model did not exit 2");
  }

  std::string detail = fmt("dataset max abs error %.3g (tol 1e-9), model exact: %s", ds_err,
                           load_model(m_path) == m ? "yes" : "no");
  for (const std::string& p : problems) detail += "; FAILED: " + p;
  return {problems.empty(), detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"bound chain sweep", bound_chain},
      {"rate bound identity", rate_identity},
      {"vub-vib gap identity", gap_identity},
      {"gradient suite", gradients},
      {"KL Monte Carlo consistency", kl_monte_carlo},
      {"desk-scale training", desk_training},
      {"empirical tightness", tightness},
      {"robustness direction", robustness},
      {"information-plane trace", info_plane},
      {"information-curve solver", info_curve},
      {"format round trips", round_trips},
  };

  std::size_t failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("[%s] %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  fs::remove_all(work_dir());
  return failed == 0 ? 0 : 1;
}
