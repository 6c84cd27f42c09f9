#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "dc2ac/acopf.hpp"
#include "dc2ac/grid.hpp"

namespace dc2ac {

/// pd_j = α · (1 + ε_j) · pd_ref_j with α ~ U(global_lo, global_hi) once per
/// sample and ε_j ~ U(−local_range, local_range) per load. qd uses the same factors.
struct SamplerConfig {
  double global_lo = 0.7;
  double global_hi = 1.1;
  double local_range = 0.15;
  std::uint64_t seed = 1;

  /// Throws std::invalid_argument unless 0 < lo ≤ hi and 0 ≤ local_range < 1.
  void validate() const;
};

struct LoadSample {
  Vec pd, qd;
  double alpha = 1.0;
};

inline double scaled_load(double ref, double alpha, double eps) { return alpha * (1.0 + eps) * ref; }

LoadSample sample_loads(const GridCase& grid, const SamplerConfig& config, std::mt19937_64& rng);

/// Generator seeded for sample `index`; sample streams do not depend on
/// worker scheduling.
std::mt19937_64 sample_rng(std::uint64_t seed, std::uint64_t index);

/// A converged AC-OPF sample. Targets are per generator (pg), branch (pf)
/// and bus (va).
struct SampleRecord {
  Vec pd, qd;
  Vec pg, pf, va;
  double objective = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;
  std::uint64_t sample_index = 0;  // position in the attempted sequence
};

struct DatasetManifest {
  std::string case_name;
  std::string case_hash;
  std::size_t num_buses = 0, num_branches = 0, num_generators = 0, num_loads = 0;
  std::size_t attempted = 0;
  std::size_t converged = 0;
  std::size_t failed = 0;
  SamplerConfig sampler;
  double train_fraction = 0.8;
  double ac_tol = 1e-6;

  double convergence_rate() const { return attempted ? static_cast<double>(converged) / static_cast<double>(attempted) : 0.0; }
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<SampleRecord> records;
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GenerateOptions {
  std::size_t workers = 1;
  double train_fraction = 0.8;
  AcOptions ac;
  double feasibility_tol = 1e-5;
};

/// Attempts n samples. Samples whose AC-OPF fails or whose solution does not
/// pass check_ac_feasibility are dropped and counted. Throws DatasetError when
/// fewer than half converge.
Dataset generate_dataset(const GridCase& grid, std::size_t n, const SamplerConfig& config,
                         const GenerateOptions& options = {});

/// Shuffled split of record positions with the sampler seed.
void assign_split(Dataset& ds, double train_fraction);

// -- dataset file I/O (dataset_io.cpp), see docs/formats.md --

std::string serialize_dataset(const Dataset& ds);
Dataset parse_dataset(const std::string& bytes);
void save_dataset(const Dataset& ds, const std::string& path);

/// Throws DatasetError on bad magic, version, checksum or truncation.
Dataset load_dataset(const std::string& path);
/// Also refuses a dataset built from a different case.
Dataset load_dataset(const std::string& path, const GridCase& grid);

/// One row per record with split, demands and targets.
void export_dataset_csv(const Dataset& ds, const std::string& path);

}  // namespace dc2ac
