#include "slmgac/diffcore/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "slmgac/errors.hpp"
#include "slmgac/random.hpp"

namespace slmgac::diffcore {

bool GradCheckReport::passed() const {
  return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.ok; });
}

double GradCheckReport::worst_error() const {
  double w = 0.0;
  for (const auto& e : entries) w = std::max(w, e.relative_error);
  return w;
}

std::string GradCheckReport::summary() const {
  std::ostringstream os;
  os << "grad_check tolerance " << tolerance << ", worst " << worst_error();
  for (const auto& e : entries) {
    if (!e.ok) os << "\n  FAIL " << e.path << " rel " << e.relative_error;
  }
  return os.str();
}

namespace {

std::vector<std::size_t> pick_entries(const Tensor& grad, std::size_t limit, Rng& rng) {
  std::vector<std::size_t> all(grad.size());
  std::iota(all.begin(), all.end(), 0);
  if (limit == 0 || limit >= all.size()) return all;
  std::vector<std::size_t> nonzero, zero;
  for (std::size_t i : all) (grad[i] != 0.0 ? nonzero : zero).push_back(i);
  std::shuffle(nonzero.begin(), nonzero.end(), rng);
  std::shuffle(zero.begin(), zero.end(), rng);
  std::vector<std::size_t> picked;
  const std::size_t from_nonzero = std::min(nonzero.size(), limit - limit / 4);
  picked.insert(picked.end(), nonzero.begin(), nonzero.begin() + from_nonzero);
  for (std::size_t i = 0; picked.size() < limit && i < zero.size(); ++i) picked.push_back(zero[i]);
  for (std::size_t i = from_nonzero; picked.size() < limit && i < nonzero.size(); ++i) {
    picked.push_back(nonzero[i]);
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

double checked_loss(const std::function<double()>& loss) {
  const double v = loss();
  if (!std::isfinite(v)) throw NumericFault("grad_check: non-finite forward value");
  return v;
}

}  // namespace

GradCheckReport grad_check(const ParamRefs& params, const std::function<double()>& loss,
                           const std::function<void()>& backprop,
                           const GradCheckOptions& options) {
  zero_grads(params);
  backprop();
  checked_loss(loss);

  Rng rng = make_rng(options.seed, 0x67c);
  GradCheckReport report;
  report.tolerance = options.tolerance;
  for (const auto& [path, p] : params) {
    const Tensor analytic = p->grad;
    const auto idx = pick_entries(analytic, options.max_entries_per_param, rng);
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t i : idx) {
      const double saved = p->value[i];
      p->value[i] = saved + options.step;
      const double up = checked_loss(loss);
      p->value[i] = saved - options.step;
      const double down = checked_loss(loss);
      p->value[i] = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      diff2 += (analytic[i] - numeric) * (analytic[i] - numeric);
      a2 += analytic[i] * analytic[i];
      n2 += numeric * numeric;
    }
    GradCheckEntry e;
    e.path = path;
    e.entries_checked = idx.size();
    e.analytic_norm = std::sqrt(a2);
    e.numeric_norm = std::sqrt(n2);
    const double scale = std::max(e.analytic_norm, e.numeric_norm);
    const double diff = std::sqrt(diff2);
    e.relative_error = diff / std::max(scale, options.zero_floor);
    e.ok = e.relative_error <= options.tolerance;
    report.entries.push_back(std::move(e));
  }
  zero_grads(params);
  return report;
}

}  // namespace slmgac::diffcore
