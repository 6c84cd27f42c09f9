#include <algorithm>
#include <cmath>
#include <optional>

#include "dc2ac/datagen.hpp"
#include "parallel.hpp"

namespace dc2ac {

namespace {

using Index = Eigen::Index;

constexpr std::uint64_t kSplitStream = 0x5eed5b11u;

std::optional<SampleRecord> run_sample(const GridCase& grid, const SamplerConfig& config,
                                       const GenerateOptions& options, std::uint64_t index) {
  std::mt19937_64 rng = sample_rng(config.seed, index);
  LoadSample s = sample_loads(grid, config, rng);
  SampleRecord rec;
  rec.sample_index = index;
  try {
    AcSolution sol = solve_acopf(grid, s.pd, s.qd, options.ac);
    if (!check_ac_feasibility(grid, s.pd, s.qd, sol, options.feasibility_tol).pass) return std::nullopt;
    rec.pd = std::move(s.pd);
    rec.qd = std::move(s.qd);
    rec.pg = sol.pg;
    rec.pf = sol.pf;
    rec.va = sol.va;
    rec.objective = sol.objective;
    rec.kkt_residual = sol.kkt_residual;
    rec.iterations = sol.iterations;
  } catch (const AcError&) {
    return std::nullopt;
  }
  return rec;
}

}  // namespace

void SamplerConfig::validate() const {
  if (!(global_lo > 0.0) || !(global_lo <= global_hi) || !std::isfinite(global_hi)) {
    throw std::invalid_argument("global range must satisfy 0 < lo <= hi");
  }
  if (!(local_range >= 0.0 && local_range < 1.0)) {
    throw std::invalid_argument("local range must lie in [0, 1)");
  }
}

std::mt19937_64 sample_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

LoadSample sample_loads(const GridCase& grid, const SamplerConfig& config, std::mt19937_64& rng) {
  config.validate();
  const auto L = static_cast<Index>(grid.num_loads());
  LoadSample s;
  s.pd.resize(L);
  s.qd.resize(L);
  std::uniform_real_distribution<double> global(config.global_lo, config.global_hi);
  std::uniform_real_distribution<double> local(-config.local_range, config.local_range);
  s.alpha = config.global_lo == config.global_hi ? config.global_lo : global(rng);
  for (Index l = 0; l < L; ++l) {
    const double eps = config.local_range > 0.0 ? local(rng) : 0.0;
    s.pd[l] = scaled_load(grid.loads[static_cast<std::size_t>(l)].pd_ref, s.alpha, eps);
    s.qd[l] = scaled_load(grid.loads[static_cast<std::size_t>(l)].qd_ref, s.alpha, eps);
  }
  return s;
}

void assign_split(Dataset& ds, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw std::invalid_argument("train fraction must lie in (0, 1)");
  std::vector<std::size_t> order(ds.records.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::mt19937_64 rng = sample_rng(ds.manifest.sampler.seed, kSplitStream);
  // Fisher-Yates
  for (std::size_t k = order.size(); k > 1; --k) {
    std::uniform_int_distribution<std::size_t> pick(0, k - 1);
    std::swap(order[k - 1], order[pick(rng)]);
  }
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(order.size())));
  ds.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  ds.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(ds.train.begin(), ds.train.end());
  std::sort(ds.validation.begin(), ds.validation.end());
  ds.manifest.train_fraction = train_fraction;
}

Dataset generate_dataset(const GridCase& grid, std::size_t n, const SamplerConfig& config,
                         const GenerateOptions& options) {
  if (n == 0) throw std::invalid_argument("sample count must be at least 1");
  config.validate();

  std::vector<std::optional<SampleRecord>> slots(n);
  parallel_for(n, options.workers, [&](std::size_t k) { slots[k] = run_sample(grid, config, options, k); });

  Dataset ds;
  DatasetManifest& m = ds.manifest;
  m.case_name = grid.name;
  m.case_hash = case_hash(grid);
  m.num_buses = grid.num_buses();
  m.num_branches = grid.num_branches();
  m.num_generators = grid.num_generators();
  m.num_loads = grid.num_loads();
  m.attempted = n;
  m.sampler = config;
  m.ac_tol = options.ac.tol;
  for (auto& slot : slots) {
    if (slot) ds.records.push_back(std::move(*slot));
  }
  m.converged = ds.records.size();
  m.failed = n - m.converged;
  if (2 * m.converged < n) {
    throw DatasetError("only " + std::to_string(m.converged) + " of " + std::to_string(n) +
                       " AC-OPF samples converged; check the case and sampler ranges");
  }
  assign_split(ds, options.train_fraction);
  return ds;
}

}  // namespace dc2ac
