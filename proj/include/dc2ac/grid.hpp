#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dc2ac {

/// Π-model branch admittances, all in per-unit.
struct PiAdmittance {
  double gff = 0.0, bff = 0.0;
  double gft = 0.0, bft = 0.0;
  double gtf = 0.0, btf = 0.0;
  double gtt = 0.0, btt = 0.0;
};

enum class BusKind { PQ, PV, Ref };

struct Bus {
  int id = 0;  // external bus number, kept for reporting
  BusKind kind = BusKind::PQ;
  double gs = 0.0;
  double bs = 0.0;
  double vm_min = 0.9;
  double vm_max = 1.1;
};

struct Branch {
  std::size_t from = 0;
  std::size_t to = 0;
  double r = 0.0;
  double x = 0.0;
  double b_charge = 0.0;
  double tap = 1.0;
  double shift = 0.0;  // rad
  double s_max = 0.0;
  double dva_min = 0.0;
  double dva_max = 0.0;
  PiAdmittance pi;  // derived, see finalize_case
};

struct Generator {
  std::size_t bus = 0;
  double pg_min = 0.0, pg_max = 0.0;
  double qg_min = 0.0, qg_max = 0.0;
  double cost = 0.0;    // $/p.u.
  double vm_set = 1.0;  // voltage setpoint used by the power flow
};

struct Load {
  std::size_t bus = 0;
  double pd_ref = 0.0;
  double qd_ref = 0.0;
};

/// Static network data in per-unit on base_mva. Immutable after finalize_case.
struct GridCase {
  std::string name;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Generator> generators;
  std::vector<Load> loads;
  std::size_t ref_bus = 0;
  double base_mva = 100.0;
  double shed_cost = 0.0;

  std::size_t num_buses() const { return buses.size(); }
  std::size_t num_branches() const { return branches.size(); }
  std::size_t num_generators() const { return generators.size(); }
  std::size_t num_loads() const { return loads.size(); }

  std::vector<double> reference_pd() const;
  std::vector<double> reference_qd() const;
  double total_reference_pd() const;
};

/// Raised for both syntax and semantic problems in case data.
class CaseError : public std::runtime_error {
 public:
  enum class Kind { Syntax, Semantic };

  CaseError(Kind kind, std::string message, std::size_t line = 0, std::size_t column = 0);

  Kind kind() const { return kind_; }
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  Kind kind_;
  std::size_t line_;
  std::size_t column_;
};

PiAdmittance derive_pi_admittance(const Branch& branch);

/// Series susceptance used by the DC flow equation, Im(1/(r+jx))/tap.
/// Negative for inductive branches.
double dc_susceptance(const Branch& branch);

/// Throws CaseError(Semantic) naming the first offending element.
void validate_case(const GridCase& grid);

/// Fills derived data (Π admittances, default shed cost, bus kinds) and validates.
void finalize_case(GridCase& grid);

inline constexpr double kDefaultAngleLimit = 0.5235987755982988;  // π/6
inline constexpr double kShedCostFactor = 100.0;

// -- case file I/O (case_io.cpp) --

struct ParsedCase {
  GridCase grid;
  std::vector<std::string> warnings;
};

/// Strict subset of the MATPOWER text format. Quantities are converted to per-unit.
ParsedCase parse_matpower(std::string_view text);

/// Versioned JSON case format; see docs/formats.md.
GridCase parse_native(std::string_view text);
std::string serialize_native(const GridCase& grid);

/// Dispatches on content: native JSON if the text starts with '{', MATPOWER otherwise.
ParsedCase parse_case(std::string_view text);
ParsedCase load_case_file(const std::string& path);

/// SHA-256 of the canonical native serialization.
std::string case_hash(const GridCase& grid);

}  // namespace dc2ac
