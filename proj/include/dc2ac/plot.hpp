#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dc2ac/train.hpp"

namespace dc2ac {

class PlotError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column position by name; throws PlotError if absent.
  std::size_t column(const std::string& name) const;
  /// Parses a numeric cell ("nan" and "inf" included); throws PlotError.
  double number(std::size_t row, std::size_t col) const;
};

/// Plain comma-separated text without quoting. Throws PlotError on empty
/// input, a missing header or ragged rows.
CsvTable parse_csv(const std::string& text);

struct ScatterSeries {
  std::string name;
  std::vector<double> x, y;
};

struct CurveSeries {
  std::string name;
  std::vector<double> epoch, train, validation;
};

/// Scatter with a logarithmic y axis. Points with y ≤ 0 or non-finite
/// coordinates are left out.
std::string scatter_svg(const std::vector<ScatterSeries>& series, const std::string& title, const std::string& x_label,
                        const std::string& y_label);

/// Loss curves on a logarithmic y axis: training dashed, validation solid,
/// one colour per series.
std::string convergence_svg(const std::vector<CurveSeries>& series, const std::string& title);

/// L1 error of one group against total demand, one series per method.
std::string plot_metrics(const CsvTable& metrics, Group group);

/// One series per (label, history table).
std::string plot_histories(const std::vector<std::pair<std::string, CsvTable>>& histories);

}  // namespace dc2ac
