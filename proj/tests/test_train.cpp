#include <cmath>
#include <random>

#include "dc2ac/train.hpp"
#include "doctest.h"
#include "test_cases.hpp"

using namespace dc2ac;
using dc2ac::testing::two_bus;
using Eigen::Index;

namespace {

TrainConfig small_config() {
  TrainConfig c;
  c.hidden = {16, 16};
  c.batch_size = 8;
  c.lr = 1e-3;
  c.seed = 4;
  return c;
}

const Dataset& lossy_dataset() {
  static const Dataset ds = [] {
    SamplerConfig s;
    s.seed = 8;
    return generate_dataset(two_bus(0.01, 0.1, 1.0), 200, s);
  }();
  return ds;
}

// random last layer so the prediction moves away from nominal
void perturb_output(Mlp& m, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-scale, scale);
  auto w = m.weight(m.num_layers() - 1);
  for (Index i = 0; i < w.rows(); ++i)
    for (Index j = 0; j < w.cols(); ++j) w(i, j) = d(rng);
}

SampleRecord record_from(const Vec& pd, const DcPrimal& target) {
  SampleRecord r;
  r.pd = pd;
  r.qd = Vec::Zero(pd.size());
  r.pg = target.pg;
  r.pf = target.pf;
  r.va = target.va;
  return r;
}

}  // namespace

TEST_CASE("demand features are relative to the reference demand") {
  auto g = two_bus(0.0, 0.1, 0.8);
  Vec pd(1);
  pd << 0.6;
  CHECK(demand_features(g, pd)[0] == doctest::Approx(0.75).epsilon(1e-15));
  CHECK_THROWS_AS(demand_features(g, Vec::Zero(2)), std::invalid_argument);
}

TEST_CASE("training configuration is validated") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.lr = 0.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.bounds.b_scale_hi = 0.9;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("untrained DC2AC reproduces nominal DC-OPF") {
  auto g = two_bus(0.01, 0.1, 1.0);
  TrainConfig c = small_config();
  Mlp m = make_dc2ac_model(g, c);
  const Vec y = m.forward(Vec::Constant(1, 0.9));
  const DcParams nom = DcParams::nominal(g);
  CHECK(std::abs(y[0] - nom.gs[0]) <= 1e-12);
  CHECK(std::abs(y[2] - nom.b[0]) <= 1e-12 * std::abs(nom.b[0]));
  // windows: gs ± 0.05·Σpd_ref, b between 2b and b/2
  CHECK(m.lower()[0] == doctest::Approx(-0.05));
  CHECK(m.upper()[1] == doctest::Approx(0.05));
  CHECK(m.lower()[2] == doctest::Approx(2.0 * nom.b[0]));
  CHECK(m.upper()[2] == doctest::Approx(0.5 * nom.b[0]));
  CHECK(m.metadata.at("kind") == "dc2ac");
}

TEST_CASE("gradient vanishes when the targets are the nominal DC solution") {
  auto g = two_bus(0.0, 0.1, 1.0);
  Mlp m = make_dc2ac_model(g, small_config());
  const Vec pd = Vec::Constant(1, 0.8);
  const DcSolution nominal = solve_dcopf(g, DcParams::nominal(g), pd);
  const auto grad = dc2ac_sample_gradient(m, g, record_from(pd, nominal.primal()));
  REQUIRE(grad);
  CHECK(grad->loss <= 1e-16);
  CHECK(grad->grad.cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("end-to-end gradient matches finite differences") {
  for (double r : {0.0, 0.02}) {
    auto g = two_bus(r, 0.1, 1.0);
    TrainConfig c = small_config();
    Mlp m = make_dc2ac_model(g, c);
    perturb_output(m, 3, 0.05);
    SampleRecord rec = lossy_dataset().records[5];
    const auto an = dc2ac_sample_gradient(m, g, rec, 1e-10);
    REQUIRE(an);
    const Vec base = m.params();
    const double h = 1e-5;
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<Index> pick(0, m.num_params() - 1);
    Vec fd(60), ag(60);
    for (Index s = 0; s < 60; ++s) {
      // half the probes hit the output layer, where gradients are largest
      const Index p = s % 2 ? pick(rng) : m.num_params() - 1 - (s % (3 * 17));
      Vec q = base;
      q[p] += h;
      m.set_params(q);
      const double up = *dc2ac_sample_loss(m, g, rec, 1e-10);
      q[p] = base[p] - h;
      m.set_params(q);
      const double down = *dc2ac_sample_loss(m, g, rec, 1e-10);
      fd[s] = (up - down) / (2 * h);
      ag[s] = an->grad[p];
    }
    m.set_params(base);
    CHECK(fd.norm() > 1e-6);
    CHECK((ag - fd).norm() <= 1e-3 * fd.norm());
  }
}

TEST_CASE("a step with zero learning rate only reports the loss") {
  auto g = two_bus(0.01, 0.1, 1.0);
  const Dataset& ds = lossy_dataset();
  TrainConfig c = small_config();
  Mlp m = make_dc2ac_model(g, c);
  const Vec before = m.params();
  AdamState st(m.num_params(), 0.0);
  const std::vector<std::size_t> batch{0, 1, 2, 3};
  const StepResult r = dc2ac_step(g, ds, batch, m, st, c);
  CHECK(m.params() == before);
  CHECK(r.used == 4);
  CHECK(r.skipped == 0);
  double mean = 0.0;
  for (auto k : batch) mean += *dc2ac_sample_loss(m, g, ds.records[k]);
  CHECK(r.loss == doctest::Approx(mean / 4).epsilon(1e-12));
  CHECK(r.loss > 0.0);
}

TEST_CASE("batch step follows the mean per-sample gradient") {
  auto g = two_bus(0.01, 0.1, 1.0);
  const Dataset& ds = lossy_dataset();
  TrainConfig c = small_config();
  Mlp m = make_dc2ac_model(g, c);
  perturb_output(m, 5, 0.05);
  const std::vector<std::size_t> batch{3, 9, 11};
  Vec mean = Vec::Zero(m.num_params());
  for (auto k : batch) mean += dc2ac_sample_gradient(m, g, ds.records[k])->grad / 3.0;
  const Vec before = m.params();
  AdamState st(m.num_params(), 1e-4);
  c.workers = 2;
  dc2ac_step(g, ds, batch, m, st, c);
  const Vec delta = m.params() - before;
  // a first Adam step is −lr·sign(g) wherever |g| ≫ ε
  for (Index k = 0; k < mean.size(); ++k) {
    if (std::abs(mean[k]) > 1e-6) CHECK(delta[k] == doctest::Approx(-1e-4 * (mean[k] > 0 ? 1 : -1)).epsilon(1e-2));
  }
}

TEST_CASE("DC2AC training on the two-bus case") {
  auto g = two_bus(0.01, 0.1, 1.0);
  const Dataset& ds = lossy_dataset();
  TrainConfig c = small_config();
  c.epochs = 5;
  const TrainResult a = train_dc2ac(ds, g, c);
  REQUIRE(a.history.epochs.size() == 6);
  CHECK(a.history.completed() == 5);
  CHECK(a.history.best_validation_loss() <= a.history.epochs[0].validation_loss);
  CHECK(a.history.epochs.back().validation_loss <= a.history.epochs[0].validation_loss);
  for (const auto& e : a.history.epochs) CHECK(e.skipped == 0);

  // predictions stay inside the configured windows
  for (auto k : ds.validation) {
    const Vec y = a.model.forward(demand_features(g, ds.records[k].pd));
    for (Index j = 0; j < y.size(); ++j) {
      CHECK(y[j] >= a.model.lower()[j]);
      CHECK(y[j] <= a.model.upper()[j]);
    }
  }

  c.workers = 3;
  const TrainResult b = train_dc2ac(ds, g, c);
  CHECK(b.model.params() == a.model.params());
  for (std::size_t e = 0; e < a.history.epochs.size(); ++e) {
    CHECK(b.history.epochs[e].train_loss == a.history.epochs[e].train_loss);
    CHECK(b.history.epochs[e].validation_loss == a.history.epochs[e].validation_loss);
  }
}

TEST_CASE("early stopping returns the best validation model") {
  auto g = two_bus(0.01, 0.1, 1.0);
  const Dataset& ds = lossy_dataset();
  TrainConfig c = small_config();
  c.lr = 0.5;  // large enough to overshoot
  c.epochs = 30;
  c.patience = 2;
  const TrainResult r = train_dc2ac(ds, g, c);
  const auto& h = r.history;
  CHECK(h.completed() <= 30);
  if (h.stopped_early) CHECK(h.completed() == h.best_epoch + 2);
  double best = h.epochs[0].validation_loss;
  for (const auto& e : h.epochs) best = std::min(best, e.validation_loss);
  CHECK(h.best_validation_loss() == best);
  double loss = 0.0;
  for (auto k : ds.validation) loss += *dc2ac_sample_loss(r.model, g, ds.records[k]);
  CHECK(loss / static_cast<double>(ds.validation.size()) == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("training refuses a dataset from another case") {
  auto other = two_bus(0.02, 0.1, 1.0);
  CHECK_THROWS_AS(train_dc2ac(lossy_dataset(), other, small_config()), DatasetError);
  CHECK_THROWS_AS(train_proxy(lossy_dataset(), other, small_config()), DatasetError);
}

TEST_CASE("proxy learns a constant target") {
  auto g = two_bus(0.01, 0.1, 1.0);
  Dataset ds = lossy_dataset();
  for (auto& r : ds.records) {
    r.pg = ds.records[0].pg;
    r.pf = ds.records[0].pf;
    r.va = ds.records[0].va;
  }
  TrainConfig c = small_config();
  c.epochs = 3;
  const TrainResult r = train_proxy(ds, g, c);
  CHECK(r.history.best_validation_loss() <= 1e-12);
  CHECK(r.model.metadata.at("kind") == "proxy");
}

TEST_CASE("proxy beats the mean predictor and is reproducible") {
  auto g = two_bus(0.01, 0.1, 1.0);
  const Dataset& ds = lossy_dataset();
  Vec mean = Vec::Zero(stacked_target(ds.records[0]).size());
  for (auto k : ds.train) mean += stacked_target(ds.records[k]);
  mean /= static_cast<double>(ds.train.size());
  double baseline = 0.0;
  for (auto k : ds.validation) baseline += mse_loss(mean, stacked_target(ds.records[k])).loss;
  baseline /= static_cast<double>(ds.validation.size());

  TrainConfig c = small_config();
  c.epochs = 20;
  const TrainResult a = train_proxy(ds, g, c);
  CHECK(a.history.best_validation_loss() <= baseline);
  const TrainResult b = train_proxy(ds, g, c);
  CHECK(a.model.params() == b.model.params());

  // va at the reference bus is fixed at zero
  const DcPrimal p = predict_proxy(a.model, g, ds.records[0].pd);
  CHECK(p.va[static_cast<Index>(g.ref_bus)] == 0.0);
  CHECK(p.pg.size() == 1);
  CHECK(p.va.size() == 2);
}

TEST_CASE("proxy gradient matches finite differences") {
  auto g = two_bus(0.01, 0.1, 1.0);
  const Dataset& ds = lossy_dataset();
  TrainConfig c = small_config();
  Mlp m = make_proxy_model(g, ds, c);
  perturb_output(m, 6, 0.2);
  const SampleRecord& rec = ds.records[7];
  const SampleGradient an = proxy_sample_gradient(m, g, rec);
  const Vec base = m.params();
  const double h = 1e-5;
  Vec fd(m.num_params());
  for (Index p = 0; p < m.num_params(); ++p) {
    Vec q = base;
    q[p] += h;
    m.set_params(q);
    const double up = proxy_sample_loss(m, g, rec);
    q[p] = base[p] - h;
    m.set_params(q);
    fd[p] = (up - proxy_sample_loss(m, g, rec)) / (2 * h);
  }
  CHECK((an.grad - fd).norm() <= 1e-6 * fd.norm());
}

TEST_CASE("evaluation conventions") {
  auto g = two_bus(0.01, 0.1, 1.0);
  const Dataset& ds = lossy_dataset();
  const auto rep = evaluate(ds, ds.validation, g, {Method::DcOpf}, {});
  CHECK(rep.win_rate(Method::DcOpf, Method::DcOpf, Group::Pg) == 0.5);
  CHECK(rep.at(Method::DcOpf).failures == 0);
  CHECK(rep.at(Method::DcOpf).mean_pg > 0.0);
  CHECK_THROWS_AS(evaluate(ds, ds.validation, g, {Method::Dc2ac}, {}), std::invalid_argument);
  CHECK_THROWS_AS(rep.at(Method::Proxy), std::invalid_argument);
  CHECK(parse_method("dc2ac") == Method::Dc2ac);
  CHECK_THROWS_AS(parse_method("ipopt"), std::invalid_argument);

  // total demand and L1 values against an independent recomputation
  const SampleRecord& r = ds.records[ds.validation[0]];
  const DcSolution dc = solve_dcopf(g, DcParams::nominal(g), r.pd);
  CHECK(rep.total_demand[0] == doctest::Approx(r.pd.sum()).epsilon(1e-15));
  CHECK(rep.at(Method::DcOpf).l1_va[0] ==
        doctest::Approx(std::abs(dc.va[0] - r.va[0]) + std::abs(dc.va[1] - r.va[1])).epsilon(1e-12));
}

TEST_CASE("lossless two-bus: DC-OPF matches the AC targets") {
  auto g = two_bus(0.0, 0.1, 1.0);
  SamplerConfig s;
  s.seed = 12;
  const Dataset ds = generate_dataset(g, 30, s);
  const auto rep = evaluate(ds, ds.validation, g, {Method::DcOpf}, {});
  CHECK(rep.at(Method::DcOpf).l1_pg.maxCoeff() <= 1e-5);
}

TEST_CASE("evaluation is pure and the CSVs are stable") {
  auto g = two_bus(0.01, 0.1, 1.0);
  const Dataset& ds = lossy_dataset();
  TrainConfig c = small_config();
  c.epochs = 2;
  const TrainResult d = train_dc2ac(ds, g, c);
  const TrainResult p = train_proxy(ds, g, c);
  const EvaluationModels models{&d.model, &p.model};
  const std::vector<Method> all{Method::DcOpf, Method::Proxy, Method::Dc2ac};
  const auto a = evaluate(ds, ds.validation, g, all, models);
  const auto b = evaluate(ds, ds.validation, g, all, models, 3);
  CHECK(metrics_csv(a) == metrics_csv(b));
  CHECK(summary_csv(a) == summary_csv(b));
  const std::string csv = metrics_csv(a);
  CHECK(csv.rfind("method,record,sample,total_demand,l1_pg,l1_pf,l1_va\n", 0) == 0);
  CHECK(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) == 1 + 3 * ds.validation.size());
  for (Method x : all) {
    for (Method y : all) {
      const double w = a.win_rate(x, y, Group::Pf);
      CHECK(w >= 0.0);
      CHECK(w <= 1.0);
      CHECK(w + a.win_rate(y, x, Group::Pf) == doctest::Approx(1.0));
    }
  }
}

TEST_CASE("history CSV") {
  TrainHistory h;
  h.epochs.push_back({0, 0.5, 0.25, 0.1, 0});
  h.epochs.push_back({1, 0.125, std::nan(""), 0.2, 3});
  const std::string csv = history_csv(h);
  CHECK(csv == "epoch,train_loss,validation_loss,seconds,skipped\n0,0.5,0.25,0.100000,0\n1,0.125,nan,0.200000,3\n");
}
