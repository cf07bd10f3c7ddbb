#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

#include "doctest.h"
#include "vub/dataset.hpp"
#include "vub/training.hpp"

using namespace vub;

namespace {

Dataset small_mixture(std::uint64_t seed, std::size_t n = 200) {
  return gen_gaussian_mixture(3, 4, n, 2.0, seed);
}

TrainConfig quick_config(LossKind kind) {
  TrainConfig c;
  c.loss_kind = kind;
  c.beta = 1e-3;
  c.base_lr = 1e-2;
  c.epochs = 5;
  c.batch_size = 16;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_CASE("learning rate schedule") {
  TrainConfig c;
  CHECK(lr_schedule(0, c) == doctest::Approx(1e-4));
  CHECK(lr_schedule(1, c) == doctest::Approx(1e-4));
  CHECK(lr_schedule(2, c) == doctest::Approx(0.97e-4));
  CHECK(lr_schedule(10, c) == doctest::Approx(1e-4 * std::pow(0.97, 5)).epsilon(1e-12));
  CHECK(lr_schedule(10, c) == doctest::Approx(8.5873e-5).epsilon(1e-4));
}

TEST_CASE("config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = TrainConfig{};
  c.beta = -1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = TrainConfig{};
  c.lr_decay = 1.5;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("adam first step moves each coordinate by about lr against the gradient") {
  TrainConfig c;
  VectorXd p = VectorXd::Zero(3);
  VectorXd g(3);
  g << 2.0, -0.5, 1e-3;
  OptimizerState s;
  optimizer_step(p, g, s, 0.1, c);
  CHECK(s.t == 1);
  CHECK(p(0) == doctest::Approx(-0.1).epsilon(1e-6));
  CHECK(p(1) == doctest::Approx(0.1).epsilon(1e-6));
  CHECK(p(2) == doctest::Approx(-0.1).epsilon(1e-4));

  // second step by hand
  const VectorXd m = 0.9 * 0.1 * g + 0.1 * g;
  const VectorXd v = 0.999 * 0.001 * g.cwiseProduct(g) + 0.001 * g.cwiseProduct(g);
  const VectorXd expect =
      p.array() - 0.1 * (m.array() / (1 - 0.81)) / ((v.array() / (1 - 0.999 * 0.999)).sqrt() + 1e-8);
  optimizer_step(p, g, s, 0.1, c);
  CHECK((p - expect).cwiseAbs().maxCoeff() < 1e-12);

  TrainConfig sgd;
  sgd.optimizer = OptimizerKind::sgd;
  VectorXd q = VectorXd::Ones(3);
  OptimizerState s2;
  optimizer_step(q, g, s2, 0.5, sgd);
  CHECK(q(0) == doctest::Approx(0.0));
}

TEST_CASE("zero epochs returns the initial model") {
  const Dataset ds = small_mixture(1);
  const Model m = init_model(4, 4, 2, 3, 1);
  TrainConfig c = quick_config(LossKind::vub);
  c.epochs = 0;
  const TrainResult r = train(m, ds, ds, c);
  CHECK(r.model == m);
  CHECK(r.trace.empty());
}

TEST_CASE("training is deterministic and logs one row per epoch") {
  const auto [tr, ev] = split(small_mixture(2), 0.75, 1);
  const Model m = init_model(4, 4, 2, 3, 5);
  const TrainConfig c = quick_config(LossKind::vub);
  const TrainResult a = train(m, tr, ev, c);
  const TrainResult b = train(m, tr, ev, c);
  CHECK(a.model == b.model);
  REQUIRE(a.trace.size() == 5);
  for (std::size_t e = 0; e < a.trace.size(); ++e) {
    CHECK(a.trace[e].epoch == e);
    CHECK(a.trace[e].train_loss.total == b.trace[e].train_loss.total);
    CHECK(std::isfinite(a.trace[e].rate_estimate));
    CHECK(std::isfinite(a.trace[e].distortion_analog));
  }
  CHECK(a.label_entropy == doctest::Approx(label_entropy(tr.labels(), 3)));

  TrainConfig other = c;
  other.seed = 4;
  CHECK_FALSE(train(m, tr, ev, other).model == a.model);
}

TEST_CASE("training improves a separable task") {
  const auto [tr, ev] = split(gen_gaussian_mixture(3, 4, 600, 3.0, 8), 0.8, 2);
  const Model m = init_model(4, 4, 2, 3, 9);
  for (LossKind kind : {LossKind::vib, LossKind::vub}) {
    TrainConfig c = quick_config(kind);
    c.epochs = 20;
    const TrainResult r = train(m, tr, ev, c);
    CHECK(r.trace.back().eval_acc > 0.85);
    CHECK(r.trace.back().train_loss.ce < r.trace.front().train_loss.ce);
  }
}

TEST_CASE("tightness diagnostic") {
  const auto [tr, ev] = split(small_mixture(3), 0.75, 1);
  TrainConfig c = quick_config(LossKind::vub);
  c.record_tightness = true;
  c.epochs = 2;
  const TrainResult r = train(init_model(4, 4, 2, 3, 2), tr, ev, c);
  const std::size_t batches_per_epoch = (tr.size() + c.batch_size - 1) / c.batch_size;
  CHECK(r.tightness.size() == 2 * batches_per_epoch);
  for (const TightnessSample& s : r.tightness) {
    CHECK(s.vub_total <= s.vib_total);
    CHECK(std::abs((s.vib_total - s.vub_total) - s.min_term) < 1e-12);
  }
}

TEST_CASE("divergence is reported with the partial trace") {
  const auto [tr, ev] = split(small_mixture(4), 0.75, 1);
  TrainConfig c = quick_config(LossKind::vib);
  c.optimizer = OptimizerKind::sgd;
  c.base_lr = 1e300;
  c.epochs = 5;
  try {
    train(init_model(4, 4, 2, 3, 2), tr, ev, c);
    FAIL("expected divergence");
  } catch (const TrainingDiverged& e) {
    CHECK(e.trace().size() == e.epoch());
  }
}

TEST_CASE("dimension mismatch is rejected") {
  const Dataset ds = small_mixture(1);
  CHECK_THROWS_AS(train(init_model(5, 4, 2, 3, 1), ds, ds, quick_config(LossKind::vib)),
                  std::invalid_argument);
}

TEST_CASE("evaluate with a zero head predicts class 0 with uniform output") {
  Model m = init_model(4, 4, 2, 3, 1);
  m.head_w.setZero();
  m.head_b.setZero();
  const Dataset ds = small_mixture(5, 300);
  const EvalMetrics em = evaluate(m, ds, 3, 1);
  std::size_t zeros = 0;
  for (int y : ds.labels()) zeros += y == 0;
  CHECK(em.accuracy == doctest::Approx(static_cast<double>(zeros) / 300.0));
  CHECK(em.mean_ce == doctest::Approx(std::log(3.0)));
  CHECK(em.mean_classifier_entropy == doctest::Approx(std::log(3.0)));
}

TEST_CASE("information plane point") {
  const double log_2pie = std::log(2.0 * std::numbers::pi * std::numbers::e);
  CHECK(prior_entropy(2) == doctest::Approx(log_2pie).epsilon(1e-14));
  CHECK(prior_entropy(2) == doctest::Approx(2.837877).epsilon(1e-6));

  Model m = Model::zeros(Dims{4, 4, 2, 3});
  m.enc_b2 << 0.0, 0.0, -2.0, -2.0;
  const Dataset ds = small_mixture(6, 30);
  const InfoPlanePoint p = info_plane_point(m, ds, 1);
  CHECK(p.rate_estimate == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(p.distortion_analog == doctest::Approx(1.0 / std::log(3.0)));

  // a confident, correct model hits the cap rather than infinity
  Model sure = Model::zeros(Dims{4, 4, 2, 2});
  sure.head_b << 1000.0, 0.0;
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(2, 4);
  const Dataset all_zero(f, {0, 0}, 2);
  CHECK(info_plane_point(sure, all_zero, 1).distortion_analog == kDistortionAnalogCap);
}

TEST_CASE("trace csv") {
  TraceLog trace(2);
  trace[1].epoch = 1;
  trace[1].lr = 0.5;
  std::ostringstream out;
  write_trace_csv(trace, out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line ==
        "epoch,loss_total,loss_kl,loss_ce,loss_min_term,train_acc,eval_acc,eval_ce,"
        "rate_estimate,distortion_analog,lr");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 10);
  }
  CHECK(rows == 2);
}
