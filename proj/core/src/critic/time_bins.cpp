#include "slmgac/critic/time_bins.hpp"

#include <algorithm>
#include <numeric>

#include "slmgac/errors.hpp"

namespace slmgac::critic {

TimeBinSpec TimeBinSpec::single_interval() {
  TimeBinSpec s;
  s.live = {0, 1200};
  s.video = {0, 1200};
  return s;
}

std::vector<double> TimeBinSpec::starts(Medium m) const {
  const auto& b = boundaries(m);
  std::vector<double> out(b.begin(), b.end() - 1);
  out.push_back(0.0);
  return out;
}

std::vector<double> TimeBinSpec::ends(Medium m) const {
  const auto& b = boundaries(m);
  std::vector<double> out(b.begin() + 1, b.end());
  out.push_back(0.0);
  return out;
}

void TimeBinSpec::validate() const {
  for (const auto* b : {&live, &video}) {
    if (b->size() < 2) throw ConfigError("time bins: need at least two boundaries");
    if ((*b)[0] != 0.0) throw ConfigError("time bins: first boundary must be 0");
    for (std::size_t i = 1; i < b->size(); ++i) {
      if (!((*b)[i] > (*b)[i - 1])) throw ConfigError("time bins: boundaries must increase");
    }
  }
  if (live.size() != video.size()) {
    throw ConfigError("time bins: live and video need the same number of intervals");
  }
}

void to_json(nlohmann::json& j, const TimeBinSpec& s) {
  j = nlohmann::json{{"live", s.live}, {"video", s.video}};
}

void from_json(const nlohmann::json& j, TimeBinSpec& s) {
  if (j.contains("live")) j.at("live").get_to(s.live);
  if (j.contains("video")) j.at("video").get_to(s.video);
}

BinAssignment bin_of(double y, Medium m, int action, const TimeBinSpec& spec) {
  if (m == Medium::live && action == 0) return {spec.reserved_index(), 0.0};
  const auto& b = spec.boundaries(m);
  if (!(y >= 0.0 && y <= b.back())) {
    throw ContractError("bin_of: watch time " + std::to_string(y) + " outside [0, " +
                        std::to_string(b.back()) + "]");
  }
  // First boundary strictly greater than y; the closed last interval takes y == upper.
  auto it = std::upper_bound(b.begin(), b.end(), y);
  std::size_t k = it == b.end() ? b.size() - 2 : static_cast<std::size_t>(it - b.begin()) - 1;
  return {k, (y - b[k]) / (b[k + 1] - b[k])};
}

std::vector<double> one_hot(std::size_t index, std::size_t width) {
  if (index >= width) throw ContractError("one_hot: index out of range");
  std::vector<double> o(width, 0.0);
  o[index] = 1.0;
  return o;
}

double reconstruct(std::span<const double> o, double delta, std::span<const double> starts,
                   std::span<const double> ends) {
  if (o.size() != starts.size() || o.size() != ends.size()) {
    throw DimensionError("reconstruct: one-hot and boundary lengths differ");
  }
  double y = 0.0;
  for (std::size_t k = 0; k < o.size(); ++k) y += o[k] * (starts[k] + delta * (ends[k] - starts[k]));
  return y;
}

double reconstruct(const BinAssignment& bin, Medium m, const TimeBinSpec& spec) {
  const auto st = spec.starts(m);
  const auto en = spec.ends(m);
  return st.at(bin.index) + bin.delta * (en.at(bin.index) - st.at(bin.index));
}

BinPrior::BinPrior(const TimeBinSpec& spec, int K) : spec_(spec), K_(K) {
  if (K < 1) throw ConfigError("bin prior: K must be at least 1");
  counts_.assign(static_cast<std::size_t>(K) * 4, std::vector<double>(spec.width(), 0.0));
}

std::size_t BinPrior::cell(int group, Medium m, int action) const {
  if (group < 0 || group >= K_) throw RoutingError("bin prior: group out of range");
  if (action != 0 && action != 1) throw ContractError("bin prior: action must be 0 or 1");
  return static_cast<std::size_t>(group) * 4 + (m == Medium::live ? 0 : 2) +
         static_cast<std::size_t>(action);
}

void BinPrior::add(int group, Medium m, int action, std::size_t index) {
  counts_.at(cell(group, m, action)).at(index) += 1.0;
}

void BinPrior::finalize() {
  const std::size_t w = spec_.width();
  weights_.assign(counts_.size(), std::vector<double>(w, 0.0));
  for (int g = 0; g < K_; ++g) {
    for (Medium m : {Medium::live, Medium::video}) {
      for (int a = 0; a < 2; ++a) {
        auto& out = weights_[cell(g, m, a)];
        if (m == Medium::live && a == 0) {
          out[spec_.reserved_index()] = 1.0;
          continue;
        }
        std::vector<double> c = counts_[cell(g, m, a)];
        double total = std::accumulate(c.begin(), c.end(), 0.0);
        if (total == 0.0) {
          for (int h = 0; h < K_; ++h) {
            const auto& other = counts_[cell(h, m, a)];
            for (std::size_t k = 0; k < w; ++k) c[k] += other[k];
          }
          total = std::accumulate(c.begin(), c.end(), 0.0);
        }
        if (total == 0.0) {
          std::fill(c.begin(), c.end() - 1, 1.0);
          total = static_cast<double>(w - 1);
        }
        for (std::size_t k = 0; k < w; ++k) out[k] = c[k] / total;
      }
    }
  }
}

const std::vector<double>& BinPrior::weights(int group, Medium m, int action) const {
  if (weights_.empty()) throw ContractError("bin prior: finalize() not called");
  return weights_[cell(group, m, action)];
}

}  // namespace slmgac::critic
