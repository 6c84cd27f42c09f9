#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dc2ac/datagen.hpp"
#include "dc2ac/dcopf.hpp"
#include "dc2ac/nnet.hpp"

namespace dc2ac {

/// Output windows of the DC2AC network: b̃_e between b_scale_lo·b_e and
/// b_scale_hi·b_e, and g̃s_i within gs_i ± gs_window·Σpd_ref.
struct OutputBoundSettings {
  double b_scale_lo = 0.5;
  double b_scale_hi = 2.0;
  double gs_window = 0.05;
};

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 16;
  double lr = 1e-4;
  std::uint64_t seed = 1;
  std::vector<Eigen::Index> hidden{64, 64, 64};
  OutputBoundSettings bounds;
  std::size_t patience = 10;  // epochs without validation improvement
  std::size_t eval_every = 1;
  std::size_t workers = 1;
  double lp_tol = 1e-8;

  /// Throws std::invalid_argument on non-positive counts, lr ≤ 0 or bad windows.
  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;  // NaN on epochs without evaluation
  double seconds = 0.0;
  std::size_t skipped = 0;  // samples dropped because the LP or its linearization failed
};

/// Entry 0 holds the losses of the initial network; entries 1.. are epochs.
struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  bool stopped_early = false;

  std::size_t completed() const { return epochs.empty() ? 0 : epochs.size() - 1; }
  double best_validation_loss() const { return epochs.at(best_epoch).validation_loss; }
};

struct TrainResult {
  Mlp model;
  TrainHistory history;
};

/// pd / pd_ref per load (pd itself where pd_ref is zero).
Vec demand_features(const GridCase& grid, const Vec& pd);

/// Stacked (pg, pf, va) of a record.
Vec stacked_target(const SampleRecord& record);
Vec stack_primal(const DcPrimal& p);

/// Network mapping features to [g̃s (N); b̃ (E)]. Hidden layers use the
/// shared seeded init; the last layer starts at zero weights with its bias at
/// the nominal parameters, so the untrained model reproduces plain DC-OPF.
Mlp make_dc2ac_model(const GridCase& grid, const TrainConfig& config);

/// Network mapping features to [pg (G); pf (E); va (non-reference buses)].
/// pg heads are bounded by the generator limits. Same hidden init as
/// make_dc2ac_model; the last layer starts at zero weights with its bias at
/// the mean training target.
Mlp make_proxy_model(const GridCase& grid, const Dataset& ds, const TrainConfig& config);

DcParams dc2ac_params(const GridCase& grid, const Vec& y);

/// DC-OPF solution at the parameters the network predicts for pd.
/// Returns nullopt if the LP is not solved to optimality.
std::optional<DcSolution> predict_dc2ac(const Mlp& model, const GridCase& grid, const Vec& pd, double lp_tol = 1e-8);
DcPrimal predict_proxy(const Mlp& model, const GridCase& grid, const Vec& pd);

struct SampleGradient {
  double loss = 0.0;
  Vec grad;  // flat parameter gradient
};

/// Loss and its gradient through network, DC-OPF layer and MSE. nullopt when
/// the LP fails or its KKT system cannot be linearized.
std::optional<SampleGradient> dc2ac_sample_gradient(const Mlp& model, const GridCase& grid, const SampleRecord& record,
                                                    double lp_tol = 1e-8);
std::optional<double> dc2ac_sample_loss(const Mlp& model, const GridCase& grid, const SampleRecord& record,
                                        double lp_tol = 1e-8);
SampleGradient proxy_sample_gradient(const Mlp& model, const GridCase& grid, const SampleRecord& record);
double proxy_sample_loss(const Mlp& model, const GridCase& grid, const SampleRecord& record);

struct StepResult {
  double loss = 0.0;  // mean over samples used
  std::size_t used = 0;
  std::size_t skipped = 0;
};

/// One Adam update on the mean gradient of the batch records.
StepResult dc2ac_step(const GridCase& grid, const Dataset& ds, const std::vector<std::size_t>& batch, Mlp& model,
                      AdamState& state, const TrainConfig& config);
StepResult proxy_step(const GridCase& grid, const Dataset& ds, const std::vector<std::size_t>& batch, Mlp& model,
                      AdamState& state, const TrainConfig& config);

/// Both throw DatasetError when the dataset was built for another case and
/// return the best-validation model.
TrainResult train_dc2ac(const Dataset& ds, const GridCase& grid, const TrainConfig& config);
TrainResult train_proxy(const Dataset& ds, const GridCase& grid, const TrainConfig& config);

std::string history_csv(const TrainHistory& history);

// -- evaluation (evaluate.cpp) --

enum class Method { DcOpf, Proxy, Dc2ac };
enum class Group { Pg, Pf, Va };

std::string method_name(Method m);
/// Accepts "dcopf", "proxy", "dc2ac"; throws std::invalid_argument otherwise.
Method parse_method(const std::string& name);

struct MethodErrors {
  Method method = Method::DcOpf;
  Vec l1_pg, l1_pf, l1_va;  // +inf where the method produced no prediction
  std::size_t failures = 0;
  double mean_pg = 0.0, mean_pf = 0.0, mean_va = 0.0;  // over finite entries

  const Vec& group(Group g) const { return g == Group::Pg ? l1_pg : (g == Group::Pf ? l1_pf : l1_va); }
  double mean(Group g) const { return g == Group::Pg ? mean_pg : (g == Group::Pf ? mean_pf : mean_va); }
};

struct MetricsReport {
  std::vector<std::size_t> records;
  std::vector<std::uint64_t> sample_index;
  Vec total_demand;
  std::vector<MethodErrors> methods;

  const MethodErrors& at(Method m) const;
  /// Fraction of samples where a has the smaller error than b, ties counted 0.5.
  double win_rate(Method a, Method b, Group g) const;
};

struct EvaluationModels {
  const Mlp* dc2ac = nullptr;
  const Mlp* proxy = nullptr;
};

/// L1 errors against the AC-OPF targets of the given records. Throws
/// std::invalid_argument if a requested method has no model.
MetricsReport evaluate(const Dataset& ds, const std::vector<std::size_t>& records, const GridCase& grid,
                       const std::vector<Method>& methods, const EvaluationModels& models, std::size_t workers = 1,
                       double lp_tol = 1e-8);

/// One row per (method, sample).
std::string metrics_csv(const MetricsReport& report);
/// Means, failures and pairwise win rates.
std::string summary_csv(const MetricsReport& report);

}  // namespace dc2ac
