#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <map>
#include <sstream>

#include "dc2ac/plot.hpp"

namespace dc2ac {

namespace {

constexpr double kWidth = 720, kHeight = 480;
constexpr double kLeft = 80, kRight = 160, kTop = 40, kBottom = 60;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  bool empty() const { return lo > hi; }
};

// Linear x, log10 y.
class Axes {
 public:
  Axes(Range x, Range y) {
    if (x.empty()) x = {0.0, 1.0};
    if (y.empty()) y = {1.0, 10.0};
    if (x.hi - x.lo <= 1e-12 * std::max(1.0, std::abs(x.lo))) {
      const double pad = std::max(0.5, 0.05 * std::abs(x.lo));
      x = {x.lo - pad, x.hi + pad};
    } else {
      const double pad = 0.03 * (x.hi - x.lo);
      x = {x.lo - pad, x.hi + pad};
    }
    x_ = x;
    ylo_ = std::floor(std::log10(y.lo));
    yhi_ = std::ceil(std::log10(y.hi));
    if (yhi_ <= ylo_) yhi_ = ylo_ + 1;
  }

  double px(double x) const { return kLeft + (x - x_.lo) / (x_.hi - x_.lo) * (kWidth - kLeft - kRight); }
  double py(double y) const {
    return kHeight - kBottom - (std::log10(y) - ylo_) / (yhi_ - ylo_) * (kHeight - kTop - kBottom);
  }

  std::string frame(const std::string& title, const std::string& x_label, const std::string& y_label) const {
    std::string s;
    const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
    s += "<rect x=\"" + fmt("%.2f", x0) + "\" y=\"" + fmt("%.2f", y1) + "\" width=\"" + fmt("%.2f", x1 - x0) +
         "\" height=\"" + fmt("%.2f", y0 - y1) + "\" fill=\"none\" stroke=\"#333\"/>\n";
    const int decades = static_cast<int>(yhi_ - ylo_);
    const int stride = std::max(1, decades / 8);
    for (int d = 0; d <= decades; d += stride) {
      const double v = std::pow(10.0, ylo_ + d);
      const double y = py(v);
      s += "<line x1=\"" + fmt("%.2f", x0) + "\" y1=\"" + fmt("%.2f", y) + "\" x2=\"" + fmt("%.2f", x1) + "\" y2=\"" +
           fmt("%.2f", y) + "\" stroke=\"#ddd\"/>\n";
      s += "<text x=\"" + fmt("%.2f", x0 - 6) + "\" y=\"" + fmt("%.2f", y + 4) +
           "\" text-anchor=\"end\" font-size=\"11\">1e" + std::to_string(static_cast<int>(ylo_) + d) + "</text>\n";
    }
    for (int t = 0; t <= 5; ++t) {
      const double v = x_.lo + (x_.hi - x_.lo) * t / 5.0;
      const double x = px(v);
      s += "<line x1=\"" + fmt("%.2f", x) + "\" y1=\"" + fmt("%.2f", y0) + "\" x2=\"" + fmt("%.2f", x) + "\" y2=\"" +
           fmt("%.2f", y0 + 5) + "\" stroke=\"#333\"/>\n";
      s += "<text x=\"" + fmt("%.2f", x) + "\" y=\"" + fmt("%.2f", y0 + 18) +
           "\" text-anchor=\"middle\" font-size=\"11\">" + fmt("%.4g", v) + "</text>\n";
    }
    s += "<text x=\"" + fmt("%.2f", (x0 + x1) / 2) + "\" y=\"" + fmt("%.2f", kHeight - 18) +
         "\" text-anchor=\"middle\" font-size=\"13\">" + escape(x_label) + "</text>\n";
    s += "<text x=\"18\" y=\"" + fmt("%.2f", (y0 + y1) / 2) + "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 " +
         fmt("%.2f", (y0 + y1) / 2) + ")\">" + escape(y_label) + "</text>\n";
    s += "<text x=\"" + fmt("%.2f", (x0 + x1) / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" +
         escape(title) + "</text>\n";
    return s;
  }

 private:
  Range x_;
  double ylo_ = 0, yhi_ = 1;
};

std::string open_svg() {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt("%.0f", kWidth) + "\" height=\"" +
         fmt("%.0f", kHeight) + "\" viewBox=\"0 0 " + fmt("%.0f", kWidth) + " " + fmt("%.0f", kHeight) +
         "\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

std::string legend_entry(std::size_t k, const std::string& name, const std::string& sample) {
  const double x = kWidth - kRight + 16, y = kTop + 12 + 20.0 * static_cast<double>(k);
  std::string s = sample;
  std::size_t pos;
  while ((pos = s.find("@X")) != std::string::npos) s.replace(pos, 2, fmt("%.2f", x));
  while ((pos = s.find("@Y")) != std::string::npos) s.replace(pos, 2, fmt("%.2f", y));
  return s + "<text x=\"" + fmt("%.2f", x + 34) + "\" y=\"" + fmt("%.2f", y + 4) + "\" font-size=\"12\">" +
         escape(name) + "</text>\n";
}

bool plottable(double x, double y) { return std::isfinite(x) && std::isfinite(y) && y > 0.0; }

std::string polyline(const Axes& ax, const std::vector<double>& x, const std::vector<double>& y, const char* color,
                     bool dashed) {
  std::string pts;
  std::size_t count = 0;
  for (std::size_t k = 0; k < x.size() && k < y.size(); ++k) {
    if (!plottable(x[k], y[k])) continue;
    if (count++) pts += ' ';
    pts += fmt("%.2f", ax.px(x[k])) + "," + fmt("%.2f", ax.py(y[k]));
  }
  if (count == 0) return {};
  std::string s = "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.8\"" +
                  (dashed ? " stroke-dasharray=\"6 4\"" : "") + " points=\"" + pts + "\"/>\n";
  if (count == 1) {
    // a single point has no visible line
    const auto comma = pts.find(',');
    s += "<circle cx=\"" + pts.substr(0, comma) + "\" cy=\"" + pts.substr(comma + 1) + "\" r=\"3\" fill=\"" + color +
         "\"/>\n";
  }
  return s;
}

}  // namespace

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t k = 0; k < header.size(); ++k)
    if (header[k] == name) return k;
  throw PlotError("CSV has no column '" + name + "'");
}

double CsvTable::number(std::size_t row, std::size_t col) const {
  const std::string& cell = rows.at(row).at(col);
  if (cell == "nan" || cell == "-nan") return std::numeric_limits<double>::quiet_NaN();
  if (cell == "inf") return std::numeric_limits<double>::infinity();
  if (cell == "-inf") return -std::numeric_limits<double>::infinity();
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (cell.empty() || end != cell.c_str() + cell.size()) {
    throw PlotError("row " + std::to_string(row + 2) + ": '" + cell + "' is not a number");
  }
  return v;
}

CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw PlotError("CSV row " + std::to_string(t.rows.size() + 2) + " has " + std::to_string(cells.size()) +
                      " fields, header has " + std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  if (t.header.empty()) throw PlotError("CSV is empty");
  if (t.rows.empty()) throw PlotError("CSV has a header but no data rows");
  return t;
}

std::string scatter_svg(const std::vector<ScatterSeries>& series, const std::string& title, const std::string& x_label,
                        const std::string& y_label) {
  Range xr, yr;
  for (const auto& s : series)
    for (std::size_t k = 0; k < s.x.size() && k < s.y.size(); ++k)
      if (plottable(s.x[k], s.y[k])) {
        xr.add(s.x[k]);
        yr.add(s.y[k]);
      }
  const Axes ax(xr, yr);
  std::string svg = open_svg() + ax.frame(title, x_label, y_label);
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kColors[i % std::size(kColors)];
    svg += "<g fill=\"" + std::string(color) + "\" fill-opacity=\"0.7\">\n";
    for (std::size_t k = 0; k < series[i].x.size() && k < series[i].y.size(); ++k) {
      if (!plottable(series[i].x[k], series[i].y[k])) continue;
      svg += "<circle cx=\"" + fmt("%.2f", ax.px(series[i].x[k])) + "\" cy=\"" + fmt("%.2f", ax.py(series[i].y[k])) +
             "\" r=\"2.5\"/>\n";
    }
    svg += "</g>\n";
    svg += legend_entry(i, series[i].name,
                        "<circle cx=\"@X\" cy=\"@Y\" r=\"4\" fill=\"" + std::string(color) + "\"/>\n");
  }
  return svg + "</svg>\n";
}

std::string convergence_svg(const std::vector<CurveSeries>& series, const std::string& title) {
  Range xr, yr;
  for (const auto& s : series) {
    for (std::size_t k = 0; k < s.epoch.size(); ++k) {
      for (double v : {k < s.train.size() ? s.train[k] : -1.0, k < s.validation.size() ? s.validation[k] : -1.0}) {
        if (plottable(s.epoch[k], v)) {
          xr.add(s.epoch[k]);
          yr.add(v);
        }
      }
    }
  }
  const Axes ax(xr, yr);
  std::string svg = open_svg() + ax.frame(title, "epoch", "loss");
  std::size_t entry = 0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kColors[i % std::size(kColors)];
    svg += polyline(ax, series[i].epoch, series[i].train, color, true);
    svg += polyline(ax, series[i].epoch, series[i].validation, color, false);
    const std::string train_sample = "<line x1=\"@X\" y1=\"@Y\" x2=\"" + fmt("%.2f", kWidth - kRight + 44) +
                               "\" y2=\"@Y\" stroke=\"" + color + "\" stroke-width=\"1.8\" stroke-dasharray=\"6 4\"/>\n";
    const std::string val_sample = "<line x1=\"@X\" y1=\"@Y\" x2=\"" + fmt("%.2f", kWidth - kRight + 44) +
                             "\" y2=\"@Y\" stroke=\"" + color + "\" stroke-width=\"1.8\"/>\n";
    svg += legend_entry(entry++, series[i].name + " train", train_sample);
    svg += legend_entry(entry++, series[i].name + " validation", val_sample);
  }
  return svg + "</svg>\n";
}

std::string plot_metrics(const CsvTable& metrics, Group group) {
  const std::size_t method = metrics.column("method"), demand = metrics.column("total_demand");
  const char* name = group == Group::Pg ? "l1_pg" : (group == Group::Pf ? "l1_pf" : "l1_va");
  const std::size_t err = metrics.column(name);
  std::vector<ScatterSeries> series;
  std::map<std::string, std::size_t> index;
  for (std::size_t r = 0; r < metrics.rows.size(); ++r) {
    const std::string& m = metrics.rows[r][method];
    auto [it, fresh] = index.emplace(m, series.size());
    if (fresh) series.push_back({m, {}, {}});
    series[it->second].x.push_back(metrics.number(r, demand));
    series[it->second].y.push_back(metrics.number(r, err));
  }
  const std::string g = name + 3;
  return scatter_svg(series, "Accuracy vs. total demand (" + g + ")", "total demand (p.u.)", "L1 error " + g + " (p.u.)");
}

std::string plot_histories(const std::vector<std::pair<std::string, CsvTable>>& histories) {
  std::vector<CurveSeries> series;
  for (const auto& [label, t] : histories) {
    const std::size_t e = t.column("epoch"), tr = t.column("train_loss"), va = t.column("validation_loss");
    CurveSeries s{label, {}, {}, {}};
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      s.epoch.push_back(t.number(r, e));
      s.train.push_back(t.number(r, tr));
      s.validation.push_back(t.number(r, va));
    }
    series.push_back(std::move(s));
  }
  return convergence_svg(series, "Training (dashed) and validation (solid) loss");
}

}  // namespace dc2ac
