// Uniform time grids and named real-valued sample channels.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "qcm/errors.hpp"

namespace qcm {

// t_i = i*h for i = 0..n_steps; the origin is always t = 0.
struct TimeGrid {
  double h = 0.0;
  int n_steps = 0;

  double t(int i) const { return h * i; }
  double t(std::size_t i) const { return h * static_cast<double>(i); }
  double t_max() const { return h * n_steps; }
  std::size_t size() const { return static_cast<std::size_t>(n_steps) + 1; }
};

inline TimeGrid make_grid(double t_max, double h) {
  if (!(h > 0)) throw config_error("grid: step must be positive");
  if (t_max < 0) throw config_error("grid: t_max must be nonnegative");
  const auto n = static_cast<int>(std::llround(t_max / h));
  if (std::abs(n * h - t_max) > 1e-9 * std::max(1.0, t_max))
    throw config_error("grid: t_max is not an integer multiple of h");
  return {h, n};
}

struct TimeSeries {
  TimeGrid grid;
  std::vector<std::string> names;
  std::vector<std::vector<double>> cols;

  explicit TimeSeries(TimeGrid g = {}) : grid(g) {}

  int add_channel(const std::string& name) {
    names.push_back(name);
    cols.emplace_back(grid.size(), 0.0);
    return static_cast<int>(cols.size()) - 1;
  }
  int add_channel(const std::string& name, std::vector<double> values) {
    if (values.size() != grid.size())
      throw config_error("time series: channel '" + name + "' length does not match the grid");
    names.push_back(name);
    cols.push_back(std::move(values));
    return static_cast<int>(cols.size()) - 1;
  }
  int channels() const { return static_cast<int>(cols.size()); }
  int samples() const { return static_cast<int>(grid.size()); }

  double& at(int ch, int i) { return cols.at(ch).at(i); }
  double at(int ch, int i) const { return cols.at(ch).at(i); }

  int channel_index(const std::string& name) const {
    for (size_t k = 0; k < names.size(); ++k)
      if (names[k] == name) return static_cast<int>(k);
    throw config_error("time series: no channel named '" + name + "'");
  }
  const std::vector<double>& channel(const std::string& name) const {
    return cols.at(channel_index(name));
  }
};

}  // namespace qcm
