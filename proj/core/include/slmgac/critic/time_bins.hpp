#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

namespace slmgac::critic {

enum class Medium { live, video };

/// Watch-time discretization. Each medium has N real intervals given by N+1
/// boundaries plus one reserved bin at index N, so one-hots have width N+1.
/// The reserved live bin encodes "no injection" (action 0); the reserved video
/// bin is never produced.
struct TimeBinSpec {
  std::vector<double> live{0, 6, 15, 30, 60, 100, 600, 1200};
  std::vector<double> video{0, 3, 10, 25, 50, 100, 600, 1200};

  /// One interval [0, 1200] per medium: regression of y / 1200.
  static TimeBinSpec single_interval();

  const std::vector<double>& boundaries(Medium m) const { return m == Medium::live ? live : video; }
  std::size_t width() const { return live.size(); }
  std::size_t reserved_index() const { return width() - 1; }
  /// Left edges y_st and right edges y_end, length width(); zero at the reserved bin.
  std::vector<double> starts(Medium m) const;
  std::vector<double> ends(Medium m) const;
  double upper(Medium m) const { return boundaries(m).back(); }

  /// Throws ConfigError unless boundaries strictly increase from 0 and both
  /// media have the same number of intervals.
  void validate() const;
};

void to_json(nlohmann::json& j, const TimeBinSpec& s);
void from_json(const nlohmann::json& j, TimeBinSpec& s);

struct BinAssignment {
  std::size_t index = 0;
  double delta = 0.0;

  bool operator==(const BinAssignment&) const = default;
};

/// Interval [b_k, b_{k+1}) holding y (the last interval is closed) and the
/// within-bin ratio. Live watch under action 0 maps to the reserved bin with
/// ratio 0. Throws ContractError for y outside [0, upper].
BinAssignment bin_of(double y, Medium m, int action, const TimeBinSpec& spec);

std::vector<double> one_hot(std::size_t index, std::size_t width);

/// o^T (y_st + delta (y_end - y_st)).
double reconstruct(std::span<const double> o, double delta, std::span<const double> starts,
                   std::span<const double> ends);
double reconstruct(const BinAssignment& bin, Medium m, const TimeBinSpec& spec);

/// Empirical bin frequencies per (group, medium, action). Used as the one-hot
/// stand-in when a critic is queried at an action whose watch time was not
/// observed. Unseen cells fall back to the pooled frequencies over groups and
/// then to a uniform spread over the real intervals.
class BinPrior {
 public:
  BinPrior() = default;
  BinPrior(const TimeBinSpec& spec, int K);

  void add(int group, Medium m, int action, std::size_t index);
  /// Normalizes the counts; weights() is valid afterwards.
  void finalize();

  const std::vector<double>& weights(int group, Medium m, int action) const;
  int K() const { return K_; }

 private:
  std::size_t cell(int group, Medium m, int action) const;

  TimeBinSpec spec_;
  int K_ = 0;
  std::vector<std::vector<double>> counts_;
  std::vector<std::vector<double>> weights_;
};

}  // namespace slmgac::critic
