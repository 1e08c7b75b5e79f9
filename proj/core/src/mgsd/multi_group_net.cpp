#include "slmgac/mgsd/multi_group_net.hpp"

#include "slmgac/errors.hpp"

namespace slmgac::mgsd {

using diffcore::Matrix;

void to_json(nlohmann::json& j, const TowerTemplates& t) {
  j = nlohmann::json{{"actor", t.actor}, {"rpn", t.rpn}, {"qrn", t.qrn}};
}

void from_json(const nlohmann::json& j, TowerTemplates& t) {
  if (j.contains("actor")) j.at("actor").get_to(t.actor);
  if (j.contains("rpn")) j.at("rpn").get_to(t.rpn);
  if (j.contains("qrn")) j.at("qrn").get_to(t.qrn);
}

std::map<std::string, std::size_t> head_output_dims(const TowerTemplates& templates) {
  const auto last = [](const std::vector<std::size_t>& w, const char* name) {
    if (w.empty()) throw ConfigError(std::string("tower template ") + name + " is empty");
    return w.back();
  };
  return {{"actor", last(templates.actor, "actor")},
          {"rpn", last(templates.rpn, "rpn")},
          {"qrn", last(templates.qrn, "qrn")}};
}

MultiGroupNet::MultiGroupNet(std::size_t K, std::size_t in_dim,
                             const std::vector<std::size_t>& widths, diffcore::Activation final,
                             bool layer_norm, Rng& rng)
    : in_dim_(in_dim), layer_norm_(layer_norm) {
  if (K == 0) throw ConfigError("multi-group net: K must be at least 1");
  heads_.reserve(K);
  for (std::size_t g = 0; g < K; ++g) {
    heads_.emplace_back(in_dim, widths, diffcore::Activation::relu, final, rng);
  }
}

void MultiGroupNet::check_group(int group) const {
  if (group < 0 || static_cast<std::size_t>(group) >= heads_.size()) {
    throw RoutingError("group " + std::to_string(group) + " outside [0, " +
                       std::to_string(heads_.size()) + ")");
  }
}

Matrix MultiGroupNet::forward(const Matrix& input, const std::vector<int>& groups,
                              Cache* cache) const {
  if (static_cast<std::size_t>(input.rows()) != groups.size()) {
    throw DimensionError("multi-group net: " + std::to_string(input.rows()) + " rows but " +
                         std::to_string(groups.size()) + " group ids");
  }
  if (static_cast<std::size_t>(input.cols()) != in_dim_) {
    throw DimensionError("multi-group net: input width " + std::to_string(input.cols()) +
                         ", expected " + std::to_string(in_dim_));
  }
  std::vector<std::vector<Eigen::Index>> rows(heads_.size());
  for (std::size_t i = 0; i < groups.size(); ++i) {
    check_group(groups[i]);
    rows[static_cast<std::size_t>(groups[i])].push_back(static_cast<Eigen::Index>(i));
  }
  if (cache) {
    cache->groups = groups;
    cache->norm.assign(heads_.size(), {});
    cache->heads.assign(heads_.size(), {});
  }

  Matrix out(input.rows(), static_cast<Eigen::Index>(out_dim()));
  for (std::size_t g = 0; g < heads_.size(); ++g) {
    if (rows[g].empty()) continue;
    Matrix x = input(rows[g], Eigen::all);
    if (layer_norm_) x = diffcore::layer_norm(x, cache ? &cache->norm[g] : nullptr);
    out(rows[g], Eigen::all) = heads_[g].forward(x, cache ? &cache->heads[g] : nullptr);
  }
  if (cache) cache->rows = std::move(rows);
  return out;
}

Matrix MultiGroupNet::route_forward(const Matrix& row, int group) const {
  return forward(row, std::vector<int>(static_cast<std::size_t>(row.rows()), group));
}

Matrix MultiGroupNet::backward(const Matrix& grad_output, const Cache& cache) {
  Matrix grad_input = Matrix::Zero(grad_output.rows(), static_cast<Eigen::Index>(in_dim_));
  for (std::size_t g = 0; g < heads_.size(); ++g) {
    if (cache.rows[g].empty()) continue;
    Matrix grad = heads_[g].backward(grad_output(cache.rows[g], Eigen::all),
                                     cache.heads[g]);
    if (layer_norm_) grad = diffcore::layer_norm_backward(grad, cache.norm[g]);
    grad_input(cache.rows[g], Eigen::all) = grad;
  }
  return grad_input;
}

void MultiGroupNet::collect(const std::string& prefix, diffcore::ParamRefs& out) {
  for (std::size_t g = 0; g < heads_.size(); ++g) {
    collect_head(static_cast<int>(g), prefix, out);
  }
}

void MultiGroupNet::collect_head(int group, const std::string& prefix, diffcore::ParamRefs& out) {
  check_group(group);
  heads_[static_cast<std::size_t>(group)].collect(prefix + "/head" + std::to_string(group), out);
}

}  // namespace slmgac::mgsd
