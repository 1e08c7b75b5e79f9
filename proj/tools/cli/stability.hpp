#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace slmgac::cli {

/// max - min of every contiguous window of `window` values, sliding by one.
/// A series shorter than the window yields a single amplitude over all of it.
std::vector<double> window_amplitudes(const std::vector<double>& series, std::size_t window);

struct AmplitudeStats {
  std::string run;
  std::size_t points = 0;
  std::size_t windows = 0;
  double mean = 0.0;
  double max = 0.0;
  double min = 0.0;
  std::vector<double> bin_edges;  // bins + 1 edges over [0, 1]
  std::vector<double> density;    // normalized so that sum(density * width) = 1
};

AmplitudeStats amplitude_stats(const std::string& run, const std::vector<double>& series,
                               std::size_t window, std::size_t bins);

nlohmann::json to_json(const AmplitudeStats& s);

}  // namespace slmgac::cli
