#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>

#include "dc2ac/diffgrad.hpp"
#include "dc2ac/train.hpp"
#include "parallel.hpp"

namespace dc2ac {

namespace {

using Index = Eigen::Index;

constexpr std::uint64_t kEpochStream = 0xe90c0000u;

Mlp base_model(const GridCase& grid, const TrainConfig& config, const Vec& lower, const Vec& upper,
               const Vec& start) {
  Mlp mlp(static_cast<Index>(grid.num_loads()), config.hidden, lower, upper, config.seed);
  mlp.weight(mlp.num_layers() - 1).setZero();
  mlp.set_output_target(start);
  return mlp;
}

void check_case(const Dataset& ds, const GridCase& grid) {
  const std::string h = case_hash(grid);
  if (ds.manifest.case_hash != h) {
    throw DatasetError("dataset was generated for case " + ds.manifest.case_hash.substr(0, 12) + " but case " +
                       h.substr(0, 12) + " was given");
  }
}

// proxy output → (pg, pf, va) with va_ref = 0
DcPrimal expand_proxy(const GridCase& grid, const Vec& y) {
  const auto G = static_cast<Index>(grid.num_generators()), E = static_cast<Index>(grid.num_branches()),
             N = static_cast<Index>(grid.num_buses());
  const auto ref = static_cast<Index>(grid.ref_bus);
  DcPrimal p{y.head(G), y.segment(G, E), Vec::Zero(N)};
  for (Index i = 0, k = G + E; i < N; ++i)
    if (i != ref) p.va[i] = y[k++];
  return p;
}

Vec proxy_cotangent(const GridCase& grid, const Vec& stacked_grad) {
  const auto G = static_cast<Index>(grid.num_generators()), E = static_cast<Index>(grid.num_branches()),
             N = static_cast<Index>(grid.num_buses());
  const auto ref = static_cast<Index>(grid.ref_bus);
  Vec out(G + E + N - 1);
  out.head(G + E) = stacked_grad.head(G + E);
  for (Index i = 0, k = G + E; i < N; ++i)
    if (i != ref) out[k++] = stacked_grad[G + E + i];
  return out;
}

using GradientFn = std::function<std::optional<SampleGradient>(const Mlp&, const SampleRecord&)>;
using LossFn = std::function<std::optional<double>(const Mlp&, const SampleRecord&)>;

StepResult apply_step(const Dataset& ds, const std::vector<std::size_t>& batch, Mlp& model, AdamState& state,
                      std::size_t workers, const GradientFn& fn) {
  std::vector<std::optional<SampleGradient>> slots(batch.size());
  parallel_for(batch.size(), workers, [&](std::size_t k) { slots[k] = fn(model, ds.records.at(batch[k])); });
  StepResult r;
  Vec sum = Vec::Zero(model.num_params());
  double loss = 0.0;
  for (const auto& s : slots) {
    if (!s) {
      ++r.skipped;
      continue;
    }
    sum += s->grad;
    loss += s->loss;
    ++r.used;
  }
  if (r.used == 0) return r;
  r.loss = loss / static_cast<double>(r.used);
  adam_step(model, sum / static_cast<double>(r.used), state);
  return r;
}

struct MeanLoss {
  double loss = 0.0;
  std::size_t skipped = 0;
};

MeanLoss mean_loss(const Dataset& ds, const std::vector<std::size_t>& records, const Mlp& model, std::size_t workers,
                   const LossFn& fn) {
  std::vector<std::optional<double>> slots(records.size());
  parallel_for(records.size(), workers, [&](std::size_t k) { slots[k] = fn(model, ds.records.at(records[k])); });
  MeanLoss m;
  double sum = 0.0;
  std::size_t used = 0;
  for (const auto& s : slots) {
    if (!s) {
      ++m.skipped;
      continue;
    }
    sum += *s;
    ++used;
  }
  m.loss = used ? sum / static_cast<double>(used) : std::numeric_limits<double>::quiet_NaN();
  return m;
}

TrainResult fit(const Dataset& ds, Mlp model, const TrainConfig& config, const GradientFn& grad_fn,
                const LossFn& loss_fn) {
  if (ds.train.empty()) throw DatasetError("dataset has no training records");
  if (ds.validation.empty()) throw DatasetError("dataset has no validation records");
  using Clock = std::chrono::steady_clock;
  TrainResult out;
  TrainHistory& h = out.history;
  AdamState state(model.num_params(), config.lr);

  const auto t0 = Clock::now();
  const MeanLoss init_train = mean_loss(ds, ds.train, model, config.workers, loss_fn);
  const MeanLoss init_val = mean_loss(ds, ds.validation, model, config.workers, loss_fn);
  h.epochs.push_back({0, init_train.loss, init_val.loss, std::chrono::duration<double>(Clock::now() - t0).count(),
                      init_train.skipped + init_val.skipped});
  Vec best = model.params();
  double best_loss = init_val.loss;
  std::size_t since_best = 0;

  std::vector<std::size_t> order = ds.train;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = Clock::now();
    std::mt19937_64 rng = sample_rng(config.seed, kEpochStream + epoch);
    order = ds.train;
    for (std::size_t k = order.size(); k > 1; --k) {
      std::uniform_int_distribution<std::size_t> pick(0, k - 1);
      std::swap(order[k - 1], order[pick(rng)]);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    double loss_sum = 0.0;
    std::size_t used = 0;
    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      const std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(b),
                                           order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), b + config.batch_size)));
      const StepResult s = apply_step(ds, batch, model, state, config.workers, grad_fn);
      loss_sum += s.loss * static_cast<double>(s.used);
      used += s.used;
      rec.skipped += s.skipped;
    }
    rec.train_loss = used ? loss_sum / static_cast<double>(used) : std::numeric_limits<double>::quiet_NaN();
    rec.validation_loss = std::numeric_limits<double>::quiet_NaN();
    const bool evaluate_now = epoch % config.eval_every == 0 || epoch == config.epochs;
    if (evaluate_now) {
      const MeanLoss v = mean_loss(ds, ds.validation, model, config.workers, loss_fn);
      rec.validation_loss = v.loss;
      rec.skipped += v.skipped;
    }
    rec.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    h.epochs.push_back(rec);
    if (rec.skipped > 0) {
      std::fprintf(stderr, "warning: epoch %zu skipped %zu samples (LP or linearization failure)\n", epoch,
                   rec.skipped);
    }
    if (!evaluate_now) continue;
    if (rec.validation_loss < best_loss || std::isnan(best_loss)) {
      best_loss = rec.validation_loss;
      best = model.params();
      h.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      h.stopped_early = epoch < config.epochs;
      break;
    }
  }
  model.set_params(best);
  out.model = std::move(model);
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs == 0 || batch_size == 0 || patience == 0 || eval_every == 0 || workers == 0) {
    throw std::invalid_argument("epochs, batch size, patience, eval cadence and workers must be positive");
  }
  if (!(lr > 0.0) || !std::isfinite(lr)) throw std::invalid_argument("learning rate must be positive");
  if (hidden.empty()) throw std::invalid_argument("at least one hidden layer is required");
  for (auto w : hidden)
    if (w <= 0) throw std::invalid_argument("hidden widths must be positive");
  if (!(bounds.b_scale_lo > 0.0 && bounds.b_scale_lo < 1.0 && bounds.b_scale_hi > 1.0 && std::isfinite(bounds.b_scale_hi))) {
    throw std::invalid_argument("susceptance scale window must satisfy 0 < lo < 1 < hi");
  }
  if (!(bounds.gs_window > 0.0) || !std::isfinite(bounds.gs_window)) {
    throw std::invalid_argument("shunt window must be positive");
  }
  if (!(lp_tol > 0.0)) throw std::invalid_argument("LP tolerance must be positive");
}

Vec demand_features(const GridCase& grid, const Vec& pd) {
  if (pd.size() != static_cast<Index>(grid.num_loads())) throw std::invalid_argument("demand vector size mismatch");
  Vec x(pd.size());
  for (Index l = 0; l < pd.size(); ++l) {
    const double ref = grid.loads[static_cast<std::size_t>(l)].pd_ref;
    x[l] = ref != 0.0 ? pd[l] / ref : pd[l];
  }
  return x;
}

Vec stack_primal(const DcPrimal& p) {
  Vec out(p.pg.size() + p.pf.size() + p.va.size());
  out << p.pg, p.pf, p.va;
  return out;
}

Vec stacked_target(const SampleRecord& r) { return stack_primal({r.pg, r.pf, r.va}); }

Mlp make_dc2ac_model(const GridCase& grid, const TrainConfig& config) {
  config.validate();
  const DcParams nominal = DcParams::nominal(grid);
  const auto N = nominal.gs.size(), E = nominal.b.size();
  double total = 0.0;
  for (const Load& l : grid.loads) total += std::abs(l.pd_ref);
  const double window = config.bounds.gs_window * std::max(total, 1e-6);
  Vec lo(N + E), hi(N + E), start(N + E);
  for (Index i = 0; i < N; ++i) {
    lo[i] = nominal.gs[i] - window;
    hi[i] = nominal.gs[i] + window;
  }
  for (Index e = 0; e < E; ++e) {
    const double a = config.bounds.b_scale_lo * nominal.b[e], b = config.bounds.b_scale_hi * nominal.b[e];
    lo[N + e] = std::min(a, b);
    hi[N + e] = std::max(a, b);
  }
  start << nominal.gs, nominal.b;
  Mlp mlp = base_model(grid, config, lo, hi, start);
  mlp.metadata["kind"] = "dc2ac";
  mlp.metadata["case_hash"] = case_hash(grid);
  return mlp;
}

Mlp make_proxy_model(const GridCase& grid, const Dataset& ds, const TrainConfig& config) {
  config.validate();
  check_case(ds, grid);
  if (ds.train.empty()) throw DatasetError("dataset has no training records");
  const auto G = static_cast<Index>(grid.num_generators()), E = static_cast<Index>(grid.num_branches()),
             N = static_cast<Index>(grid.num_buses());
  const Index out = G + E + N - 1;
  Vec lo = Vec::Constant(out, -kUnbounded), hi = Vec::Constant(out, kUnbounded);
  Vec mean = Vec::Zero(G + E + N);
  for (auto k : ds.train) mean += stacked_target(ds.records.at(k));
  mean /= static_cast<double>(ds.train.size());
  Vec start = proxy_cotangent(grid, mean);
  for (Index g = 0; g < G; ++g) {
    const Generator& gen = grid.generators[static_cast<std::size_t>(g)];
    const double width = gen.pg_max - gen.pg_min;
    if (!(width > 1e-9) || !std::isfinite(width)) continue;
    lo[g] = gen.pg_min;
    hi[g] = gen.pg_max;
    start[g] = std::clamp(start[g], gen.pg_min + 1e-6 * width, gen.pg_max - 1e-6 * width);
  }
  Mlp mlp = base_model(grid, config, lo, hi, start);
  mlp.metadata["kind"] = "proxy";
  mlp.metadata["case_hash"] = case_hash(grid);
  return mlp;
}

DcParams dc2ac_params(const GridCase& grid, const Vec& y) {
  const auto N = static_cast<Index>(grid.num_buses()), E = static_cast<Index>(grid.num_branches());
  if (y.size() != N + E) throw std::invalid_argument("DC2AC output has the wrong size for this case");
  return {y.head(N), y.tail(E)};
}

std::optional<DcSolution> predict_dc2ac(const Mlp& model, const GridCase& grid, const Vec& pd, double lp_tol) {
  const DcParams p = dc2ac_params(grid, model.forward(demand_features(grid, pd)));
  DcSolution sol = solve_dcopf(grid, p, pd, lp_tol);
  if (!sol.optimal()) return std::nullopt;
  return sol;
}

DcPrimal predict_proxy(const Mlp& model, const GridCase& grid, const Vec& pd) {
  return expand_proxy(grid, model.forward(demand_features(grid, pd)));
}

std::optional<SampleGradient> dc2ac_sample_gradient(const Mlp& model, const GridCase& grid, const SampleRecord& record,
                                                    double lp_tol) {
  Mlp::Cache cache;
  const DcParams p = dc2ac_params(grid, model.forward(demand_features(grid, record.pd), cache));
  const DcSolution sol = solve_dcopf(grid, p, record.pd, lp_tol);
  if (!sol.optimal()) return std::nullopt;
  const MseResult m = mse_loss(stack_primal(sol.primal()), stacked_target(record));
  const auto G = sol.pg.size(), E = sol.pf.size(), N = sol.va.size();
  ParamGradient dp;
  try {
    const KktLinearization lin = linearize_kkt(grid, p, sol);
    dp = lin.adjoint_gradient({m.grad.head(G), m.grad.segment(G, E), m.grad.tail(N)});
  } catch (const DiffError&) {
    return std::nullopt;
  }
  Vec dy(N + E);
  dy << dp.d_gs, dp.d_b;
  return SampleGradient{m.loss, model.backward(cache, dy)};
}

std::optional<double> dc2ac_sample_loss(const Mlp& model, const GridCase& grid, const SampleRecord& record,
                                        double lp_tol) {
  auto sol = predict_dc2ac(model, grid, record.pd, lp_tol);
  if (!sol) return std::nullopt;
  return mse_loss(stack_primal(sol->primal()), stacked_target(record)).loss;
}

SampleGradient proxy_sample_gradient(const Mlp& model, const GridCase& grid, const SampleRecord& record) {
  Mlp::Cache cache;
  const DcPrimal pred = expand_proxy(grid, model.forward(demand_features(grid, record.pd), cache));
  const MseResult m = mse_loss(stack_primal(pred), stacked_target(record));
  return {m.loss, model.backward(cache, proxy_cotangent(grid, m.grad))};
}

double proxy_sample_loss(const Mlp& model, const GridCase& grid, const SampleRecord& record) {
  return mse_loss(stack_primal(predict_proxy(model, grid, record.pd)), stacked_target(record)).loss;
}

StepResult dc2ac_step(const GridCase& grid, const Dataset& ds, const std::vector<std::size_t>& batch, Mlp& model,
                      AdamState& state, const TrainConfig& config) {
  return apply_step(ds, batch, model, state, config.workers, [&](const Mlp& m, const SampleRecord& r) {
    return dc2ac_sample_gradient(m, grid, r, config.lp_tol);
  });
}

StepResult proxy_step(const GridCase& grid, const Dataset& ds, const std::vector<std::size_t>& batch, Mlp& model,
                      AdamState& state, const TrainConfig& config) {
  return apply_step(ds, batch, model, state, config.workers, [&](const Mlp& m, const SampleRecord& r) {
    return std::optional<SampleGradient>(proxy_sample_gradient(m, grid, r));
  });
}

TrainResult train_dc2ac(const Dataset& ds, const GridCase& grid, const TrainConfig& config) {
  check_case(ds, grid);
  return fit(
      ds, make_dc2ac_model(grid, config), config,
      [&](const Mlp& m, const SampleRecord& r) { return dc2ac_sample_gradient(m, grid, r, config.lp_tol); },
      [&](const Mlp& m, const SampleRecord& r) { return dc2ac_sample_loss(m, grid, r, config.lp_tol); });
}

TrainResult train_proxy(const Dataset& ds, const GridCase& grid, const TrainConfig& config) {
  return fit(
      ds, make_proxy_model(grid, ds, config), config,
      [&](const Mlp& m, const SampleRecord& r) { return std::optional<SampleGradient>(proxy_sample_gradient(m, grid, r)); },
      [&](const Mlp& m, const SampleRecord& r) { return std::optional<double>(proxy_sample_loss(m, grid, r)); });
}

std::string history_csv(const TrainHistory& history) {
  std::string out = "epoch,train_loss,validation_loss,seconds,skipped\n";
  char buf[160];
  for (const EpochRecord& e : history.epochs) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.6f,%zu\n", e.epoch, e.train_loss, e.validation_loss, e.seconds,
                  e.skipped);
    out += buf;
  }
  return out;
}

}  // namespace dc2ac
