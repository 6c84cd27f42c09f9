#include <algorithm>

#include "dc2ac/plot.hpp"
#include "doctest.h"

using namespace dc2ac;

namespace {

std::size_t count(const std::string& s, const std::string& what) {
  std::size_t n = 0;
  for (auto pos = s.find(what); pos != std::string::npos; pos = s.find(what, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("CSV parsing") {
  const CsvTable t = parse_csv("a,b,c\r\n1,2.5,nan\n\n-3,inf,4e-3\n");
  CHECK(t.header == std::vector<std::string>{"a", "b", "c"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.number(0, 1) == 2.5);
  CHECK(std::isnan(t.number(0, 2)));
  CHECK(std::isinf(t.number(1, 1)));
  CHECK(t.column("c") == 2);
  CHECK_THROWS_AS(t.column("d"), PlotError);
  CHECK_THROWS_AS(parse_csv(""), PlotError);
  CHECK_THROWS_AS(parse_csv("a,b\n"), PlotError);
  CHECK_THROWS_AS(parse_csv("a,b\n1\n"), PlotError);
  CHECK_THROWS_AS(parse_csv("a,b\n1,x\n").number(0, 1), PlotError);
}

TEST_CASE("scatter output") {
  std::vector<ScatterSeries> s{{"dcopf", {1.0, 2.0, 3.0}, {0.1, 0.2, 0.0}}, {"dc2ac", {1.0, 2.0}, {0.01, 1e-4}}};
  const std::string svg = scatter_svg(s, "t", "x", "y");
  CHECK(svg == scatter_svg(s, "t", "x", "y"));
  // four positive points plus two legend marks; the zero error is left out
  CHECK(count(svg, "r=\"2.5\"") == 4);
  CHECK(count(svg, "r=\"4\"") == 2);
  CHECK(svg.find(">1e-4<") != std::string::npos);
  CHECK(svg.find(">1e0<") != std::string::npos);
  CHECK(svg.find("<svg") == 0);
  CHECK(svg.rfind("</svg>\n") == svg.size() - 7);
  const std::string escaped = scatter_svg({{"a<b", {1.0}, {1.0}}}, "t&t", "x", "y");
  CHECK(escaped.find("a&lt;b") != std::string::npos);
  CHECK(escaped.find("t&amp;t") != std::string::npos);
}

TEST_CASE("convergence curves") {
  CurveSeries a{"dc2ac", {0, 1, 2}, {1e-3, 1e-4, 5e-5}, {9e-4, 1e-4, std::nan("")}};
  const std::string svg = convergence_svg({a}, "loss");
  CHECK(count(svg, "<polyline") == 2);
  CHECK(count(svg, "stroke-dasharray") == 2);  // training curve and its legend sample
  CHECK(svg.find("dc2ac validation") != std::string::npos);
}

TEST_CASE("metrics and history tables") {
  const CsvTable m = parse_csv(
      "method,record,sample,total_demand,l1_pg,l1_pf,l1_va\n"
      "dcopf,0,0,2.0,0.1,0.2,0.3\n"
      "dc2ac,0,0,2.0,0.01,0.02,0.03\n");
  const std::string svg = plot_metrics(m, Group::Pf);
  CHECK(svg.find("(pf)") != std::string::npos);
  CHECK(count(svg, "r=\"2.5\"") == 2);
  CHECK_THROWS_AS(plot_metrics(parse_csv("epoch,train_loss\n1,2\n"), Group::Pg), PlotError);

  const CsvTable h = parse_csv("epoch,train_loss,validation_loss,seconds,skipped\n0,1,1,0.1,0\n1,0.5,0.4,0.1,0\n");
  CHECK(plot_histories({{"run", h}}).find("run train") != std::string::npos);
}
