#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ifnet::plot {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct Panel {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  bool log_y = false;
};

/// Renders panels side by side into an RGB PNG.
void render(const std::vector<Panel>& panels, const std::filesystem::path& path);

/// Chooses figures from the CSV's columns:
///   training log (epoch, gr, nc, pc, total, ...)   -> loss_vs_epoch.png
///   time-step report (time_step, mae_r, ...)       -> error_vs_time_step.png
///   robustness sweep (axis, value, mae_r, ...)     -> robustness_<axis>.png per axis
/// Throws ParseError (nothing written) on malformed input, no data rows or an unknown schema.
std::vector<std::filesystem::path> plot_report(const std::filesystem::path& csv_path,
                                               const std::filesystem::path& out_dir);

}  // namespace ifnet::plot
