#include "stability.hpp"

#include <algorithm>
#include <deque>

#include "slmgac/errors.hpp"

namespace slmgac::cli {

std::vector<double> window_amplitudes(const std::vector<double>& series, std::size_t window) {
  if (window == 0) throw ContractError("window must be positive");
  if (series.empty()) return {};
  if (series.size() <= window) {
    const auto [lo, hi] = std::minmax_element(series.begin(), series.end());
    return {*hi - *lo};
  }
  // Monotone deques give O(n) sliding max and min.
  std::deque<std::size_t> maxq, minq;
  std::vector<double> out;
  out.reserve(series.size() - window + 1);
  for (std::size_t i = 0; i < series.size(); ++i) {
    while (!maxq.empty() && series[maxq.back()] <= series[i]) maxq.pop_back();
    while (!minq.empty() && series[minq.back()] >= series[i]) minq.pop_back();
    maxq.push_back(i);
    minq.push_back(i);
    if (maxq.front() + window <= i) maxq.pop_front();
    if (minq.front() + window <= i) minq.pop_front();
    if (i + 1 >= window) out.push_back(series[maxq.front()] - series[minq.front()]);
  }
  return out;
}

AmplitudeStats amplitude_stats(const std::string& run, const std::vector<double>& series,
                               std::size_t window, std::size_t bins) {
  if (bins == 0) throw ContractError("bins must be positive");
  AmplitudeStats s;
  s.run = run;
  s.points = series.size();
  const auto amps = window_amplitudes(series, window);
  s.windows = amps.size();
  const double width = 1.0 / static_cast<double>(bins);
  for (std::size_t b = 0; b <= bins; ++b) s.bin_edges.push_back(static_cast<double>(b) * width);
  s.density.assign(bins, 0.0);
  if (amps.empty()) return s;
  s.min = *std::min_element(amps.begin(), amps.end());
  s.max = *std::max_element(amps.begin(), amps.end());
  for (double a : amps) {
    s.mean += a;
    const auto b = std::min(bins - 1, static_cast<std::size_t>(std::clamp(a, 0.0, 1.0) / width));
    s.density[b] += 1.0;
  }
  s.mean /= static_cast<double>(amps.size());
  for (double& d : s.density) d /= static_cast<double>(amps.size()) * width;
  return s;
}

nlohmann::json to_json(const AmplitudeStats& s) {
  return {{"run", s.run},         {"points", s.points}, {"windows", s.windows},
          {"mean", s.mean},       {"max", s.max},       {"min", s.min},
          {"bin_edges", s.bin_edges}, {"density", s.density}};
}

}  // namespace slmgac::cli
