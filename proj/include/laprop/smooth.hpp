#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "laprop/csv.hpp"

namespace laprop {

/// Centered moving average. Kernels truncated at the edges are renormalized,
/// so the row count is preserved and constant columns stay constant.
inline std::vector<double> smooth_box(std::span<const double> values, std::int64_t window) {
  if (window < 1) throw std::invalid_argument("smooth window must be >= 1");
  const auto n = static_cast<std::int64_t>(values.size());
  const std::int64_t left = (window - 1) / 2;
  const std::int64_t right = window - 1 - left;
  std::vector<double> out(values.size());
  for (std::int64_t i = 0; i < n; ++i) {
    const std::int64_t lo = std::max<std::int64_t>(0, i - left);
    const std::int64_t hi = std::min<std::int64_t>(n - 1, i + right);
    double sum = 0.0;
    for (std::int64_t j = lo; j <= hi; ++j) sum += values[j];
    out[i] = sum / static_cast<double>(hi - lo + 1);
  }
  return out;
}

/// Centered Gaussian kernel truncated at 4 sigma and renormalized per row.
inline std::vector<double> smooth_gaussian(std::span<const double> values, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian sigma must be > 0");
  const auto n = static_cast<std::int64_t>(values.size());
  const auto radius = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(4.0 * sigma)));
  std::vector<double> kernel(radius + 1);
  for (std::int64_t j = 0; j <= radius; ++j)
    kernel[j] = std::exp(-0.5 * static_cast<double>(j * j) / (sigma * sigma));
  std::vector<double> out(values.size());
  for (std::int64_t i = 0; i < n; ++i) {
    double sum = 0.0, weight = 0.0;
    const std::int64_t lo = std::max<std::int64_t>(0, i - radius);
    const std::int64_t hi = std::min<std::int64_t>(n - 1, i + radius);
    for (std::int64_t j = lo; j <= hi; ++j) {
      const double w = kernel[std::abs(j - i)];
      sum += w * values[j];
      weight += w;
    }
    out[i] = sum / weight;
  }
  return out;
}

namespace detail {

inline bool parse_double(const std::string& cell, double& value) {
  if (cell.empty()) return false;
  char* end = nullptr;
  value = std::strtod(cell.c_str(), &end);
  return end == cell.c_str() + cell.size();
}

}  // namespace detail

/// Apply box (window > 0) or Gaussian (sigma > 0) smoothing to every fully
/// numeric column of a CSV file; other columns pass through untouched.
inline void smooth_csv(const std::string& input_path, const std::string& output_path,
                       std::int64_t window, double sigma) {
  if ((window > 0) == (sigma > 0.0))
    throw std::invalid_argument("choose exactly one of window or gaussian sigma");
  CsvTable table = read_csv(input_path);
  bool any_numeric = false;
  for (std::size_t col = 0; col < table.header.size(); ++col) {
    std::vector<double> values(table.rows.size());
    bool numeric = !table.rows.empty();
    for (std::size_t r = 0; r < table.rows.size() && numeric; ++r)
      numeric = detail::parse_double(table.rows[r][col], values[r]);
    if (!numeric) continue;
    any_numeric = true;
    const auto smoothed =
        window > 0 ? smooth_box(values, window) : smooth_gaussian(values, sigma);
    for (std::size_t r = 0; r < table.rows.size(); ++r)
      table.rows[r][col] = format_double(smoothed[r]);
  }
  if (!any_numeric && !table.rows.empty())
    throw FormatError(input_path + ": no numeric column to smooth");
  write_csv(output_path, table);
}

}  // namespace laprop
