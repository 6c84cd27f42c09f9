#include <cctype>
#include <cmath>
#include <cstdlib>
#include <map>
#include <numbers>
#include <optional>

#include "dc2ac/grid.hpp"
#include "dc2ac/hash.hpp"
#include "json.hpp"

namespace dc2ac {

namespace {

using Kind = CaseError::Kind;
using Matrix = std::vector<std::vector<double>>;

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr int kNativeVersion = 1;
constexpr double kUnlimitedRatingMva = 9999.0;

// Cursor over MATPOWER text that tracks line/column for diagnostics.
class Scanner {
 public:
  explicit Scanner(std::string_view text) : text_(text) {}

  bool at_end() {
    skip_blank(true);
    return pos_ >= text_.size();
  }

  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  void advance() {
    if (pos_ >= text_.size()) return;
    if (text_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  // Skips spaces, tabs, comments and (optionally) newlines and '...' continuations.
  void skip_blank(bool newlines) {
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == '%' || c == '#') {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
      } else if (c == ' ' || c == '\t' || c == '\r' || (newlines && c == '\n')) {
        advance();
      } else if (text_.substr(pos_, 3) == "...") {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
        advance();
      } else {
        break;
      }
    }
  }

  std::string identifier() {
    std::string out;
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.') {
        out.push_back(c);
        advance();
      } else {
        break;
      }
    }
    return out;
  }

  std::string rest_of_line() {
    std::string out;
    while (pos_ < text_.size() && text_[pos_] != '\n') {
      out.push_back(text_[pos_]);
      advance();
    }
    return out;
  }

  std::optional<double> number() {
    std::size_t start = pos_;
    std::size_t end = start;
    if (end < text_.size() && (text_[end] == '+' || text_[end] == '-')) ++end;
    std::string_view tail = text_.substr(end);
    double sign = (start < end && text_[start] == '-') ? -1.0 : 1.0;
    if (tail.substr(0, 3) == "Inf" || tail.substr(0, 3) == "inf") {
      while (pos_ < end + 3) advance();
      return sign * HUGE_VAL;
    }
    std::string buf(text_.substr(start, std::min<std::size_t>(64, text_.size() - start)));
    char* stop = nullptr;
    double v = std::strtod(buf.c_str(), &stop);
    std::size_t used = static_cast<std::size_t>(stop - buf.c_str());
    if (used == 0) return std::nullopt;
    for (std::size_t k = 0; k < used; ++k) advance();
    return v;
  }

  [[noreturn]] void fail(const std::string& message) const {
    throw CaseError(Kind::Syntax, message, line_, col_);
  }

  void expect(char c) {
    skip_blank(false);
    if (peek() != c) fail(std::string("expected '") + c + "'");
    advance();
  }

  std::size_t line() const { return line_; }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t col_ = 1;
};

Matrix parse_matrix(Scanner& s) {
  // '[' already consumed
  Matrix rows;
  std::vector<double> row;
  auto flush = [&] {
    if (!row.empty()) rows.push_back(std::move(row));
    row.clear();
  };
  while (true) {
    s.skip_blank(false);
    char c = s.peek();
    if (c == '\0') s.fail("unterminated matrix");
    if (c == ']') {
      s.advance();
      flush();
      return rows;
    }
    if (c == ';' || c == '\n') {
      s.advance();
      flush();
      continue;
    }
    if (c == ',') {
      s.advance();
      continue;
    }
    auto v = s.number();
    if (!v) s.fail(std::string("unexpected character '") + c + "' in matrix");
    row.push_back(*v);
  }
}

void skip_value(Scanner& s) {
  int depth = 0;
  while (true) {
    char c = s.peek();
    if (c == '\0') {
      if (depth > 0) s.fail("unterminated bracket");
      return;
    }
    if (c == '[' || c == '{' || c == '(') ++depth;
    if (c == ']' || c == '}' || c == ')') --depth;
    if (c == '\'') {
      s.advance();
      while (s.peek() != '\'' && s.peek() != '\0' && s.peek() != '\n') s.advance();
    }
    if (depth == 0 && (c == ';' || c == '\n')) return;
    if (c == '%' && depth == 0) return;
    s.advance();
  }
}

const std::vector<double>& require_row(const Matrix& m, std::size_t i, std::size_t min_cols,
                                       const char* table) {
  if (m[i].size() < min_cols) {
    throw CaseError(Kind::Semantic, std::string(table) + " row " + std::to_string(i + 1) +
                                        ": expected at least " + std::to_string(min_cols) +
                                        " columns");
  }
  return m[i];
}

GridCase build_from_tables(const std::string& name, double base_mva, const Matrix& bus,
                           const Matrix& gen, const Matrix& branch, const Matrix& gencost,
                           std::vector<std::string>& warnings) {
  GridCase grid;
  grid.name = name;
  grid.base_mva = base_mva;
  if (!(base_mva > 0.0)) throw CaseError(Kind::Semantic, "baseMVA must be positive");

  std::map<int, std::size_t> index_of;
  for (std::size_t i = 0; i < bus.size(); ++i) {
    const auto& row = require_row(bus, i, 13, "bus");
    const int id = static_cast<int>(row[0]);
    if (index_of.count(id)) {
      throw CaseError(Kind::Semantic, "bus " + std::to_string(i + 1) + ": duplicate bus number " +
                                          std::to_string(id));
    }
    Bus b;
    b.id = id;
    switch (static_cast<int>(row[1])) {
      case 1: b.kind = BusKind::PQ; break;
      case 2: b.kind = BusKind::PV; break;
      case 3: b.kind = BusKind::Ref; break;
      default:
        throw CaseError(Kind::Semantic,
                        "bus " + std::to_string(i + 1) + ": unsupported bus type " +
                            std::to_string(static_cast<int>(row[1])));
    }
    b.gs = row[4] / base_mva;
    b.bs = row[5] / base_mva;
    b.vm_max = row[11];
    b.vm_min = row[12];
    index_of[id] = grid.buses.size();
    if (b.kind == BusKind::Ref) grid.ref_bus = grid.buses.size();
    grid.buses.push_back(b);
    if (row[2] != 0.0 || row[3] != 0.0) {
      grid.loads.push_back({index_of[id], row[2] / base_mva, row[3] / base_mva});
    }
  }

  auto lookup = [&](double external, const std::string& what, std::size_t idx) {
    auto it = index_of.find(static_cast<int>(external));
    if (it == index_of.end()) {
      throw CaseError(Kind::Semantic, what + " " + std::to_string(idx + 1) +
                                          ": references unknown bus " +
                                          std::to_string(static_cast<int>(external)));
    }
    return it->second;
  };

  if (!gencost.empty() && gencost.size() < gen.size()) {
    throw CaseError(Kind::Semantic, "gencost has fewer rows than gen");
  }
  for (std::size_t g = 0; g < gen.size(); ++g) {
    const auto& row = require_row(gen, g, 10, "gen");
    std::size_t bus_index = lookup(row[0], "gen", g);
    if (row[7] <= 0.0) {
      warnings.push_back("gen " + std::to_string(g + 1) + " out of service, skipped");
      continue;
    }
    Generator gn;
    gn.bus = bus_index;
    gn.qg_max = row[3] / base_mva;
    gn.qg_min = row[4] / base_mva;
    gn.vm_set = row[5];
    gn.pg_max = row[8] / base_mva;
    gn.pg_min = row[9] / base_mva;
    if (!gencost.empty()) {
      const auto& cost = require_row(gencost, g, 4, "gencost");
      const int model = static_cast<int>(cost[0]);
      const auto ncost = static_cast<std::size_t>(cost[3]);
      if (model != 2) {
        throw CaseError(Kind::Semantic, "gencost " + std::to_string(g + 1) +
                                            ": only polynomial (model 2) costs are supported");
      }
      if (cost.size() < 4 + ncost) {
        throw CaseError(Kind::Semantic, "gencost " + std::to_string(g + 1) + ": too few coefficients");
      }
      // Coefficients are stored highest order first; only c1 may be non-zero beyond c0.
      for (std::size_t k = 0; k + 2 < ncost; ++k) {
        if (cost[4 + k] != 0.0) {
          throw CaseError(Kind::Semantic, "gencost " + std::to_string(g + 1) +
                                              ": non-linear cost terms are not supported");
        }
      }
      double linear = ncost >= 2 ? cost[4 + ncost - 2] : 0.0;
      if (ncost >= 1 && cost[4 + ncost - 1] != 0.0) {
        warnings.push_back("gencost " + std::to_string(g + 1) + ": constant term ignored");
      }
      gn.cost = linear * base_mva;
    }
    grid.generators.push_back(gn);
  }

  for (std::size_t e = 0; e < branch.size(); ++e) {
    const auto& row = require_row(branch, e, 11, "branch");
    Branch br;
    br.from = lookup(row[0], "branch", e);
    br.to = lookup(row[1], "branch", e);
    if (row[10] <= 0.0) {
      warnings.push_back("branch " + std::to_string(e + 1) + " out of service, skipped");
      continue;
    }
    br.r = row[2];
    br.x = row[3];
    br.b_charge = row[4];
    double rate = row[5];
    if (rate <= 0.0) {
      warnings.push_back("branch " + std::to_string(e + 1) + ": no thermal rating, using " +
                         std::to_string(static_cast<int>(kUnlimitedRatingMva)) + " MVA");
      rate = kUnlimitedRatingMva;
    }
    br.s_max = rate / base_mva;
    br.tap = row[8] == 0.0 ? 1.0 : row[8];
    br.shift = row[9] * kDegToRad;
    br.dva_min = -kDefaultAngleLimit;
    br.dva_max = kDefaultAngleLimit;
    if (row.size() >= 13) {
      // MATPOWER uses ±360 to mean "unconstrained"; keep the default in that case.
      if (row[11] > -360.0) br.dva_min = row[11] * kDegToRad;
      if (row[12] < 360.0) br.dva_max = row[12] * kDegToRad;
    }
    grid.branches.push_back(br);
  }

  finalize_case(grid);
  return grid;
}

std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

const char* kind_name(BusKind k) {
  switch (k) {
    case BusKind::PQ: return "pq";
    case BusKind::PV: return "pv";
    case BusKind::Ref: return "ref";
  }
  return "pq";
}

BusKind kind_from(const std::string& s) {
  if (s == "pq") return BusKind::PQ;
  if (s == "pv") return BusKind::PV;
  if (s == "ref") return BusKind::Ref;
  throw CaseError(Kind::Semantic, "unknown bus kind '" + s + "'");
}

}  // namespace

ParsedCase parse_matpower(std::string_view text) {
  Scanner s(text);
  ParsedCase out;
  std::string name = "case";
  double base_mva = 100.0;
  bool have_base = false;
  Matrix bus, gen, branch, gencost;
  bool have_bus = false, have_gen = false, have_branch = false;

  while (!s.at_end()) {
    std::size_t line = s.line();
    std::string ident = s.identifier();
    if (ident.empty()) s.fail(std::string("unexpected character '") + s.peek() + "'");
    if (ident == "function") {
      std::string rest = s.rest_of_line();
      auto eq = rest.find('=');
      std::string tail = eq == std::string::npos ? rest : rest.substr(eq + 1);
      auto first = tail.find_first_not_of(" \t");
      auto last = tail.find_last_not_of(" \t\r;");
      if (first != std::string::npos) name = tail.substr(first, last - first + 1);
      continue;
    }
    if (ident == "end" || ident == "return") {
      s.rest_of_line();
      continue;
    }
    s.skip_blank(false);
    s.expect('=');
    s.skip_blank(false);

    auto read_matrix = [&]() {
      s.skip_blank(false);
      if (s.peek() != '[') s.fail("expected '[' to open matrix for " + ident);
      s.advance();
      return parse_matrix(s);
    };

    if (ident == "mpc.baseMVA") {
      auto v = s.number();
      if (!v) s.fail("expected number for mpc.baseMVA");
      base_mva = *v;
      have_base = true;
    } else if (ident == "mpc.bus") {
      bus = read_matrix();
      have_bus = true;
    } else if (ident == "mpc.gen") {
      gen = read_matrix();
      have_gen = true;
    } else if (ident == "mpc.branch") {
      branch = read_matrix();
      have_branch = true;
    } else if (ident == "mpc.gencost") {
      gencost = read_matrix();
    } else if (ident == "mpc.version") {
      skip_value(s);
    } else {
      out.warnings.push_back("line " + std::to_string(line) + ": ignored field " + ident);
      skip_value(s);
    }
    s.skip_blank(false);
    if (s.peek() == ';') s.advance();
  }

  if (!have_bus) throw CaseError(Kind::Syntax, "missing mpc.bus table");
  if (!have_gen) throw CaseError(Kind::Syntax, "missing mpc.gen table");
  if (!have_branch) throw CaseError(Kind::Syntax, "missing mpc.branch table");
  if (!have_base) out.warnings.push_back("mpc.baseMVA missing, assuming 100");

  out.grid = build_from_tables(name, base_mva, bus, gen, branch, gencost, out.warnings);
  return out;
}

std::string serialize_native(const GridCase& grid) {
  using nlohmann::json;
  json j;
  j["format"] = "dc2ac-case";
  j["version"] = kNativeVersion;
  j["name"] = grid.name;
  j["base_mva"] = grid.base_mva;
  j["shed_cost"] = grid.shed_cost;
  j["ref_bus"] = grid.ref_bus;
  json buses = json::array();
  for (const auto& b : grid.buses) {
    buses.push_back({{"id", b.id}, {"kind", kind_name(b.kind)}, {"gs", b.gs}, {"bs", b.bs},
                     {"vm_min", b.vm_min}, {"vm_max", b.vm_max}});
  }
  json branches = json::array();
  for (const auto& br : grid.branches) {
    branches.push_back({{"from", br.from}, {"to", br.to}, {"r", br.r}, {"x", br.x},
                        {"b_charge", br.b_charge}, {"tap", br.tap}, {"shift", br.shift},
                        {"s_max", br.s_max}, {"dva_min", br.dva_min}, {"dva_max", br.dva_max}});
  }
  json gens = json::array();
  for (const auto& g : grid.generators) {
    gens.push_back({{"bus", g.bus}, {"pg_min", g.pg_min}, {"pg_max", g.pg_max},
                    {"qg_min", g.qg_min}, {"qg_max", g.qg_max}, {"cost", g.cost},
                    {"vm_set", g.vm_set}});
  }
  json loads = json::array();
  for (const auto& l : grid.loads) {
    loads.push_back({{"bus", l.bus}, {"pd", l.pd_ref}, {"qd", l.qd_ref}});
  }
  j["buses"] = std::move(buses);
  j["branches"] = std::move(branches);
  j["generators"] = std::move(gens);
  j["loads"] = std::move(loads);
  return j.dump(1) + "\n";
}

GridCase parse_native(std::string_view text) {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& err) {
    auto [line, col] = line_column(text, err.byte > 0 ? err.byte - 1 : 0);
    throw CaseError(Kind::Syntax, std::string("malformed native case: ") + err.what(), line, col);
  }
  try {
    if (j.value("format", std::string{}) != "dc2ac-case") {
      throw CaseError(Kind::Semantic, "not a dc2ac-case document");
    }
    if (j.at("version").get<int>() != kNativeVersion) {
      throw CaseError(Kind::Semantic, "unsupported native case version " +
                                          std::to_string(j.at("version").get<int>()));
    }
    GridCase grid;
    grid.name = j.value("name", std::string("case"));
    grid.base_mva = j.at("base_mva").get<double>();
    grid.shed_cost = j.at("shed_cost").get<double>();
    grid.ref_bus = j.at("ref_bus").get<std::size_t>();
    for (const auto& b : j.at("buses")) {
      grid.buses.push_back({b.at("id").get<int>(), kind_from(b.at("kind").get<std::string>()),
                            b.at("gs").get<double>(), b.at("bs").get<double>(),
                            b.at("vm_min").get<double>(), b.at("vm_max").get<double>()});
    }
    for (const auto& b : j.at("branches")) {
      Branch br;
      br.from = b.at("from").get<std::size_t>();
      br.to = b.at("to").get<std::size_t>();
      br.r = b.at("r").get<double>();
      br.x = b.at("x").get<double>();
      br.b_charge = b.at("b_charge").get<double>();
      br.tap = b.at("tap").get<double>();
      br.shift = b.at("shift").get<double>();
      br.s_max = b.at("s_max").get<double>();
      br.dva_min = b.at("dva_min").get<double>();
      br.dva_max = b.at("dva_max").get<double>();
      grid.branches.push_back(br);
    }
    for (const auto& g : j.at("generators")) {
      grid.generators.push_back({g.at("bus").get<std::size_t>(), g.at("pg_min").get<double>(),
                                 g.at("pg_max").get<double>(), g.at("qg_min").get<double>(),
                                 g.at("qg_max").get<double>(), g.at("cost").get<double>(),
                                 g.at("vm_set").get<double>()});
    }
    for (const auto& l : j.at("loads")) {
      grid.loads.push_back({l.at("bus").get<std::size_t>(), l.at("pd").get<double>(),
                            l.at("qd").get<double>()});
    }
    finalize_case(grid);
    return grid;
  } catch (const json::exception& err) {
    throw CaseError(Kind::Semantic, std::string("native case field error: ") + err.what());
  }
}

ParsedCase parse_case(std::string_view text) {
  auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string_view::npos && text[first] == '{') {
    return {parse_native(text), {}};
  }
  return parse_matpower(text);
}

ParsedCase load_case_file(const std::string& path) { return parse_case(read_file(path)); }

std::string case_hash(const GridCase& grid) { return sha256_hex(serialize_native(grid)); }

}  // namespace dc2ac
