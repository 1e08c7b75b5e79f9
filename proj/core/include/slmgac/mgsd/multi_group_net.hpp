#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "slmgac/diffcore/layers.hpp"

namespace slmgac::mgsd {

/// Layer widths of the three group-routed towers. Each list gives the output
/// width of successive dense layers applied to h'_s.
struct TowerTemplates {
  std::vector<std::size_t> actor{128, 63, 31, 2};
  std::vector<std::size_t> rpn{128, 64, 32, 8};
  std::vector<std::size_t> qrn{128, 64, 32, 2};
};

void to_json(nlohmann::json& j, const TowerTemplates& t);
void from_json(const nlohmann::json& j, TowerTemplates& t);

/// Final width of each tower, keyed "actor", "rpn", "qrn".
std::map<std::string, std::size_t> head_output_dims(const TowerTemplates& templates);

/// K independent MLP heads of identical shape. Row i of a batch goes through
/// layer_norm and then heads[groups[i]]; no parameters are shared across heads.
class MultiGroupNet {
 public:
  struct Cache {
    std::vector<int> groups;
    std::vector<std::vector<Eigen::Index>> rows;  // batch rows per group
    std::vector<diffcore::LayerNormCache> norm;
    std::vector<diffcore::Mlp::Cache> heads;
  };

  MultiGroupNet() = default;
  MultiGroupNet(std::size_t K, std::size_t in_dim, const std::vector<std::size_t>& widths,
                diffcore::Activation final, bool layer_norm, Rng& rng);

  diffcore::Matrix forward(const diffcore::Matrix& input, const std::vector<int>& groups,
                           Cache* cache = nullptr) const;
  /// Single-row convenience wrapper.
  diffcore::Matrix route_forward(const diffcore::Matrix& row, int group) const;
  /// Accumulates gradients in the routed heads only; returns d loss / d input.
  diffcore::Matrix backward(const diffcore::Matrix& grad_output, const Cache& cache);

  void collect(const std::string& prefix, diffcore::ParamRefs& out);
  void collect_head(int group, const std::string& prefix, diffcore::ParamRefs& out);

  std::size_t K() const { return heads_.size(); }
  std::size_t in_dim() const { return in_dim_; }
  std::size_t out_dim() const { return heads_.front().out_dim(); }
  bool layer_norm() const { return layer_norm_; }
  std::vector<std::size_t> widths() const { return heads_.front().widths(); }
  const diffcore::Mlp& head(int group) const { return heads_.at(static_cast<std::size_t>(group)); }
  diffcore::Mlp& head(int group) { return heads_.at(static_cast<std::size_t>(group)); }

 private:
  void check_group(int group) const;

  std::size_t in_dim_ = 0;
  bool layer_norm_ = true;
  std::vector<diffcore::Mlp> heads_;
};

}  // namespace slmgac::mgsd
