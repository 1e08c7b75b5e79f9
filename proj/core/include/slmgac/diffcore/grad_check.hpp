#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "slmgac/diffcore/tensor.hpp"

namespace slmgac::diffcore {

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  /// 0 checks every entry. Otherwise entries with a non-zero analytic gradient
  /// are preferred, then the remainder is filled at random up to this count.
  std::size_t max_entries_per_param = 0;
  std::uint64_t seed = 0;
  /// Lower bound on the denominator of the relative error, so parameters with
  /// an all-zero gradient compare absolute round-off instead of 0/0.
  double zero_floor = 1e-6;
};

struct GradCheckEntry {
  std::string path;
  std::size_t entries_checked = 0;
  double analytic_norm = 0.0;
  double numeric_norm = 0.0;
  double relative_error = 0.0;
  bool ok = true;
};

struct GradCheckReport {
  double tolerance = 0.0;
  std::vector<GradCheckEntry> entries;

  bool passed() const;
  double worst_error() const;
  std::string summary() const;
};

/// Compares backprop gradients with central differences.
///
/// `backprop` must zero nothing itself: grad_check zeroes all gradients, calls
/// `backprop` once (forward + backward) and reads the accumulated gradients.
/// `loss` must be a deterministic forward-only evaluation of the same scalar.
/// Relative error per parameter is ||a - n|| / max(||a||, ||n||, zero_floor)
/// over the checked entries.
GradCheckReport grad_check(const ParamRefs& params, const std::function<double()>& loss,
                           const std::function<void()>& backprop,
                           const GradCheckOptions& options = {});

}  // namespace slmgac::diffcore
