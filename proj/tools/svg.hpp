#pragma once

// Minimal SVG line plots and histograms for run reports.

#include <filesystem>
#include <string>
#include <vector>

namespace sgid::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct Axes {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  bool markers = false;
};

void line_plot(const std::filesystem::path& path, const Axes& axes, const std::vector<Series>& series);
void histogram(const std::filesystem::path& path, const Axes& axes, const std::vector<double>& values,
               std::size_t bins = 40);

}  // namespace sgid::svg
