#include "d2rl/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "d2rl/metrics.hpp"

namespace d2rl {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 170.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                         "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string f2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

std::string open_svg(const std::string& title) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + f2(kWidth) + "\" height=\"" +
         f2(kHeight) + "\" font-family=\"sans-serif\" font-size=\"12\">\n" +
         "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n" + "<text x=\"" +
         f2(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" + escape(title) +
         "</text>\n";
}

struct Range {
  double lo, hi;
};

Range padded(double lo, double hi) {
  if (!(hi > lo)) {
    const double pad = std::max(1.0, std::abs(lo) * 0.1);
    return {lo - pad, hi + pad};
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

std::string axes(Range xr, Range yr, const std::string& y_label) {
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  std::string s = "<rect x=\"" + f2(kLeft) + "\" y=\"" + f2(kTop) + "\" width=\"" + f2(pw) +
                  "\" height=\"" + f2(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fy = i / 4.0;
    const double y = kTop + ph * (1.0 - fy);
    s += "<text x=\"" + f2(kLeft - 6) + "\" y=\"" + f2(y + 4) + "\" text-anchor=\"end\">" +
         tick(yr.lo + fy * (yr.hi - yr.lo)) + "</text>\n";
    const double x = kLeft + pw * fy;
    s += "<text x=\"" + f2(x) + "\" y=\"" + f2(kTop + ph + 18) + "\" text-anchor=\"middle\">" +
         tick(xr.lo + fy * (xr.hi - xr.lo)) + "</text>\n";
  }
  s += "<text x=\"" + f2(kLeft + pw / 2) + "\" y=\"" + f2(kHeight - 10) +
       "\" text-anchor=\"middle\">epoch</text>\n";
  s += "<text transform=\"translate(16," + f2(kTop + ph / 2) +
       ") rotate(-90)\" text-anchor=\"middle\">" + escape(y_label) + "</text>\n";
  return s;
}

std::string legend(const std::vector<std::string>& labels) {
  std::string s;
  const double x = kWidth - kRight + 12;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double y = kTop + 14 + 18.0 * static_cast<double>(i);
    s += "<rect x=\"" + f2(x) + "\" y=\"" + f2(y - 9) + "\" width=\"12\" height=\"10\" fill=\"" +
         kColors[i % 10] + "\"/>\n";
    s += "<text x=\"" + f2(x + 18) + "\" y=\"" + f2(y) + "\">" + escape(labels[i]) + "</text>\n";
  }
  return s;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

}  // namespace

std::string line_chart_svg(const std::string& title, const std::string& y_label,
                           const std::vector<Series>& series) {
  double xlo = INFINITY, xhi = -INFINITY, ylo = INFINITY, yhi = -INFINITY;
  for (const auto& s : series) {
    for (double v : s.x) xlo = std::min(xlo, v), xhi = std::max(xhi, v);
    for (double v : s.y) ylo = std::min(ylo, v), yhi = std::max(yhi, v);
  }
  if (!std::isfinite(xlo)) xlo = 0, xhi = 1, ylo = 0, yhi = 1;
  const Range xr{xlo, xhi > xlo ? xhi : xlo + 1};
  const Range yr = padded(ylo, yhi);
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  std::string svg = open_svg(title) + axes(xr, yr, y_label);
  std::vector<std::string> labels;
  std::size_t color = 0;
  for (const auto& s : series) {
    const char* c = kColors[color % 10];
    std::string pts;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      const double x = kLeft + pw * (s.x[i] - xr.lo) / (xr.hi - xr.lo);
      const double y = kTop + ph * (1.0 - (s.y[i] - yr.lo) / (yr.hi - yr.lo));
      if (!pts.empty()) pts += ' ';
      pts += f2(x) + "," + f2(y);
    }
    svg += std::string("<polyline fill=\"none\" stroke=\"") + c + "\" stroke-width=\"" +
           (s.faint ? "0.8\" stroke-opacity=\"0.3" : "1.8") + "\" points=\"" + pts + "\"/>\n";
    if (!s.faint) {
      labels.push_back(s.label);
      ++color;
    }
  }
  svg += legend(labels);
  svg += "</svg>\n";
  return svg;
}

std::string bar_chart_svg(const std::string& title, const std::vector<std::string>& bar_names,
                          const std::vector<BarGroup>& groups) {
  double hi = 0.0;
  for (const auto& g : groups) {
    for (double v : g.values) hi = std::max(hi, v);
  }
  if (!(hi > 0.0)) hi = 1.0;
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  std::string svg = open_svg(title);
  svg += "<rect x=\"" + f2(kLeft) + "\" y=\"" + f2(kTop) + "\" width=\"" + f2(pw) +
         "\" height=\"" + f2(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double y = kTop + ph * (1.0 - i / 4.0);
    svg += "<text x=\"" + f2(kLeft - 6) + "\" y=\"" + f2(y + 4) + "\" text-anchor=\"end\">" +
           tick(hi * i / 4.0) + "</text>\n";
  }
  const double group_w = groups.empty() ? pw : pw / static_cast<double>(groups.size());
  const double bar_w = 0.8 * group_w / static_cast<double>(std::max<std::size_t>(1, bar_names.size()));
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double gx = kLeft + group_w * static_cast<double>(g) + 0.1 * group_w;
    for (std::size_t b = 0; b < groups[g].values.size(); ++b) {
      const double h = ph * std::max(0.0, groups[g].values[b]) / hi;
      svg += "<rect x=\"" + f2(gx + bar_w * static_cast<double>(b)) + "\" y=\"" +
             f2(kTop + ph - h) + "\" width=\"" + f2(bar_w) + "\" height=\"" + f2(h) +
             "\" fill=\"" + kColors[b % 10] + "\"/>\n";
    }
    svg += "<text x=\"" + f2(gx + 0.4 * group_w) + "\" y=\"" + f2(kTop + ph + 18) +
           "\" text-anchor=\"middle\">" + escape(groups[g].label) + "</text>\n";
  }
  svg += legend(bar_names);
  svg += "</svg>\n";
  return svg;
}

std::vector<std::filesystem::path> emit_plots(const std::vector<std::filesystem::path>& csvs,
                                              const std::filesystem::path& out_dir,
                                              std::size_t ma_window) {
  if (csvs.empty()) throw std::runtime_error("plot: no CSV files given");
  struct Input {
    std::string label;
    CsvTable metrics;
    CsvTable timing;
  };
  std::vector<Input> inputs;
  for (const auto& p : csvs) {
    Input in{p.stem().string(), read_csv(p), {}};
    if (in.metrics.rows.empty()) throw std::runtime_error("plot: " + p.string() + " has no data rows");
    for (const char* col : {"epoch", "mean_sum_rate", "ma_reward"}) in.metrics.column_index(col);
    if (gradient_layers(in.metrics) == 0) {
      throw std::runtime_error("plot: " + p.string() + " is missing column 'grad_w_1'");
    }
    const auto tp = timing_path(p);
    in.timing = read_csv(tp);
    in.timing.column_index("epoch_seconds");
    in.timing.column_index("cumulative_seconds");
    inputs.push_back(std::move(in));
  }

  std::filesystem::create_directories(out_dir);
  std::vector<Series> rate, reward;
  for (const auto& in : inputs) {
    const auto epochs = in.metrics.column("epoch");
    const auto rates = in.metrics.column("mean_sum_rate");
    rate.push_back({in.label + " (raw)", epochs, rates, true});
    rate.push_back({in.label, epochs, moving_average(rates, ma_window), false});
    reward.push_back({in.label, epochs, in.metrics.column("ma_reward"), false});
  }

  std::vector<std::string> layer_names;
  std::vector<BarGroup> grads;
  std::size_t layers = 0;
  for (const auto& in : inputs) layers = std::max(layers, gradient_layers(in.metrics));
  for (const auto& in : inputs) {
    const auto updated = in.metrics.column("updated");
    BarGroup w{in.label + " W", std::vector<double>(layers, 0.0)};
    BarGroup b{in.label + " b", std::vector<double>(layers, 0.0)};
    double count = 0.0;
    for (std::size_t r = 0; r < in.metrics.rows.size(); ++r) {
      if (updated[r] == 0.0) continue;
      count += 1.0;
      for (std::size_t l = 0; l < gradient_layers(in.metrics); ++l) {
        w.values[l] += in.metrics.rows[r][in.metrics.column_index("grad_w_" + std::to_string(l + 1))];
        b.values[l] += in.metrics.rows[r][in.metrics.column_index("grad_b_" + std::to_string(l + 1))];
      }
    }
    if (count > 0.0) {
      for (auto& v : w.values) v /= count;
      for (auto& v : b.values) v /= count;
    }
    grads.push_back(std::move(w));
    grads.push_back(std::move(b));
  }
  for (std::size_t l = 1; l <= layers; ++l) layer_names.push_back("layer " + std::to_string(l));

  std::vector<BarGroup> times;
  for (const auto& in : inputs) {
    const auto cum = in.timing.column("cumulative_seconds");
    const auto per = in.timing.column("epoch_seconds");
    double mean = 0.0;
    for (double v : per) mean += v;
    if (!per.empty()) mean /= static_cast<double>(per.size());
    times.push_back({in.label, {cum.empty() ? 0.0 : cum.back(), mean * 1000.0}});
  }

  const std::vector<std::filesystem::path> out{out_dir / "sum_rate.svg", out_dir / "ma_reward.svg",
                                               out_dir / "gradients.svg", out_dir / "time.svg"};
  write_file(out[0], line_chart_svg("Sum rate", "sum rate (bits/s/Hz)", rate));
  write_file(out[1], line_chart_svg("Moving-average reward", "MA reward", reward));
  write_file(out[2], bar_chart_svg("Mean actor gradient |sum| per layer", layer_names, grads));
  write_file(out[3], bar_chart_svg("Wall time", {"total (s)", "per epoch (ms)"}, times));
  return out;
}

}  // namespace d2rl
