#include "cfts/nn/adam.hpp"

#include <cmath>

#include "cfts/core/series.hpp"

namespace cfts::nn {

bool Adam::step(std::span<ParamTensor* const> params) {
  for (const auto* p : params) {
    if (!p->grad.allFinite()) return false;
  }
  if (m_.empty()) {
    for (const auto* p : params) {
      m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (m_.size() != params.size()) throw Error("adam: parameter list changed between steps");
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    auto& m = m_[i];
    auto& v = v_[i];
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * p.grad;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * p.grad.cwiseAbs2();
    p.value.array() -= cfg_.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg_.eps);
  }
  return true;
}

namespace {

nlohmann::json flat(const Matrix& m) { return std::vector<double>(m.data(), m.data() + m.size()); }

}  // namespace

nlohmann::json Adam::to_json() const {
  nlohmann::json m = nlohmann::json::array(), v = nlohmann::json::array();
  for (std::size_t i = 0; i < m_.size(); ++i) {
    m.push_back(flat(m_[i]));
    v.push_back(flat(v_[i]));
  }
  return {{"step", t_},
          {"lr", cfg_.lr},
          {"betas", {cfg_.beta1, cfg_.beta2}},
          {"eps", cfg_.eps},
          {"m", m},
          {"v", v}};
}

void Adam::from_json(const nlohmann::json& j, std::span<ParamTensor* const> params) {
  cfg_.lr = j.at("lr").get<double>();
  const auto betas = j.at("betas").get<std::vector<double>>();
  if (betas.size() != 2) throw Error("adam: betas must have two entries");
  cfg_.beta1 = betas[0];
  cfg_.beta2 = betas[1];
  cfg_.eps = j.at("eps").get<double>();
  t_ = j.at("step").get<std::int64_t>();
  m_.clear();
  v_.clear();
  const auto& m = j.at("m");
  const auto& v = j.at("v");
  if (m.empty() && v.empty()) return;
  if (m.size() != params.size() || v.size() != params.size()) throw Error("adam: moment count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i]->value;
    auto load = [&](const nlohmann::json& src) {
      const auto vals = src.get<std::vector<double>>();
      if (static_cast<Index>(vals.size()) != p.size()) throw Error("adam: moment shape mismatch");
      Matrix out(p.rows(), p.cols());
      std::copy(vals.begin(), vals.end(), out.data());
      return out;
    };
    m_.push_back(load(m[i]));
    v_.push_back(load(v[i]));
  }
}

}  // namespace cfts::nn
