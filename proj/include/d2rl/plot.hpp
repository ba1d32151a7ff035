#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace d2rl {

// Writes sum_rate.svg, ma_reward.svg, gradients.svg and time.svg into
// out_dir for a set of metric CSVs (timing CSVs are read from next to them).
// Every input is parsed before anything is written, so a bad input leaves no
// files behind. Output depends only on the inputs.
std::vector<std::filesystem::path> emit_plots(const std::vector<std::filesystem::path>& csvs,
                                              const std::filesystem::path& out_dir,
                                              std::size_t ma_window = 100);

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool faint = false;
};

std::string line_chart_svg(const std::string& title, const std::string& y_label,
                           const std::vector<Series>& series);

struct BarGroup {
  std::string label;
  std::vector<double> values;  // one per bar name
};

std::string bar_chart_svg(const std::string& title, const std::vector<std::string>& bar_names,
                          const std::vector<BarGroup>& groups);

}  // namespace d2rl
