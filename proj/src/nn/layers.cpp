#include "cfts/nn/layers.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "cfts/core/series.hpp"

namespace cfts::nn {

void zero_grad(std::span<ParamTensor* const> params) {
  for (auto* p : params) p->grad.setZero();
}

std::size_t parameter_count(std::span<ParamTensor* const> params) {
  std::size_t n = 0;
  for (auto* p : params) n += static_cast<std::size_t>(p->value.size());
  return n;
}

void init_uniform(ParamTensor& p, Index fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Index>(fan_in, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = dist(rng);
  p.grad.setZero();
}

// ---- Dense ---------------------------------------------------------------

Dense::Dense(Index in, Index out, const std::string& name, std::mt19937_64& rng)
    : weight(name + ".weight", out, in), bias(name + ".bias", out, 1) {
  init_uniform(weight, in, rng);
  init_uniform(bias, in, rng);
}

Matrix Dense::forward(const Matrix& x) const {
  if (x.rows() != in_features()) throw Error("dense: input has " + std::to_string(x.rows()) +
                                             " features, expected " + std::to_string(in_features()));
  Matrix y = weight.value * x;
  y.colwise() += bias.value.col(0);
  return y;
}

Matrix Dense::backward(const Matrix& x, const Matrix& dy, BackwardOptions opt) {
  if (dy.rows() != out_features() || dy.cols() != x.cols()) throw Error("dense: gradient shape mismatch");
  if (opt.param_grads) {
    weight.grad.noalias() += dy * x.transpose();
    bias.grad.col(0) += dy.rowwise().sum();
  }
  if (!opt.input_grad) return {};
  return weight.value.transpose() * dy;
}

// ---- Lstm ----------------------------------------------------------------

Lstm::Lstm(Index in, Index hidden, bool rev, const std::string& name, std::mt19937_64& rng)
    : wx(name + ".wx", 4 * hidden, in), wh(name + ".wh", 4 * hidden, hidden), b(name + ".b", 4 * hidden, 1),
      reverse(rev) {
  const Index fan_in = in + hidden;
  init_uniform(wx, fan_in, rng);
  init_uniform(wh, fan_in, rng);
  init_uniform(b, fan_in, rng);
}

Sequence Lstm::forward(const Sequence& x, Cache* cache) const {
  const auto T = static_cast<Index>(x.size());
  if (T == 0) throw Error("lstm: empty sequence");
  const Index B = x.front().cols();
  const Index H = hidden_size();
  for (const auto& xt : x) {
    if (xt.rows() != input_size() || xt.cols() != B) throw Error("lstm: input shape mismatch");
  }

  Sequence hidden(static_cast<std::size_t>(T));
  if (cache) {
    cache->gates.assign(static_cast<std::size_t>(T), Matrix());
    cache->cell.assign(static_cast<std::size_t>(T), Matrix());
    cache->tanh_c.assign(static_cast<std::size_t>(T), Matrix());
  }
  Matrix h = Matrix::Zero(H, B);
  Matrix c = Matrix::Zero(H, B);
  Matrix z(4 * H, B);
  for (Index step = 0; step < T; ++step) {
    const auto t = static_cast<std::size_t>(reverse ? T - 1 - step : step);
    z.noalias() = wx.value * x[t];
    z.noalias() += wh.value * h;
    z.colwise() += b.value.col(0);
    for (Index j = 0; j < B; ++j) {
      for (Index r = 0; r < H; ++r) {
        z(r, j) = sigmoid(z(r, j));
        z(H + r, j) = sigmoid(z(H + r, j));
        z(2 * H + r, j) = std::tanh(z(2 * H + r, j));
        z(3 * H + r, j) = sigmoid(z(3 * H + r, j));
      }
    }
    c = z.middleRows(H, H).cwiseProduct(c) + z.topRows(H).cwiseProduct(z.middleRows(2 * H, H));
    Matrix tc = c.array().tanh().matrix();
    h = z.bottomRows(H).cwiseProduct(tc);
    hidden[t] = h;
    if (cache) {
      cache->gates[t] = z;
      cache->cell[t] = c;
      cache->tanh_c[t] = std::move(tc);
    }
  }
  if (cache) cache->hidden = hidden;
  return hidden;
}

Sequence Lstm::backward(const Sequence& x, const Cache& cache, const Sequence& dh, BackwardOptions opt) {
  const auto T = static_cast<Index>(x.size());
  if (static_cast<Index>(dh.size()) != T || static_cast<Index>(cache.hidden.size()) != T) {
    throw Error("lstm: backward sequence length mismatch");
  }
  const Index B = x.front().cols();
  const Index H = hidden_size();

  Sequence dx;
  if (opt.input_grad) dx.assign(static_cast<std::size_t>(T), Matrix());
  Matrix dh_next = Matrix::Zero(H, B);
  Matrix dc_next = Matrix::Zero(H, B);
  Matrix dz(4 * H, B);
  const Matrix zeros = Matrix::Zero(H, B);

  // Walk the steps in the opposite order of the forward recurrence.
  for (Index step = T - 1; step >= 0; --step) {
    const auto t = static_cast<std::size_t>(reverse ? T - 1 - step : step);
    const bool first = step == 0;
    const auto prev = static_cast<std::size_t>(reverse ? t + 1 : t - 1);
    const Matrix& c_prev = first ? zeros : cache.cell[prev];
    const Matrix& h_prev = first ? zeros : cache.hidden[prev];
    const Matrix& g = cache.gates[t];
    const Matrix& tc = cache.tanh_c[t];

    const Matrix dht = dh[t] + dh_next;
    for (Index j = 0; j < B; ++j) {
      for (Index r = 0; r < H; ++r) {
        const double gi = g(r, j), gf = g(H + r, j), gg = g(2 * H + r, j), go = g(3 * H + r, j);
        const double tcv = tc(r, j);
        const double d_h = dht(r, j);
        const double dc = d_h * go * (1.0 - tcv * tcv) + dc_next(r, j);
        dz(r, j) = dc * gg * gi * (1.0 - gi);
        dz(H + r, j) = dc * c_prev(r, j) * gf * (1.0 - gf);
        dz(2 * H + r, j) = dc * gi * (1.0 - gg * gg);
        dz(3 * H + r, j) = d_h * tcv * go * (1.0 - go);
        dc_next(r, j) = dc * gf;
      }
    }
    if (opt.param_grads) {
      wx.grad.noalias() += dz * x[t].transpose();
      if (!first) wh.grad.noalias() += dz * h_prev.transpose();
      b.grad.col(0) += dz.rowwise().sum();
    }
    if (opt.input_grad) dx[t] = wx.value.transpose() * dz;
    dh_next.noalias() = wh.value.transpose() * dz;
  }
  return dx;
}

// ---- BiLstm --------------------------------------------------------------

BiLstm::BiLstm(Index in, Index hidden, const std::string& name, std::mt19937_64& rng)
    : fwd(in, hidden, false, name + ".fwd", rng), bwd(in, hidden, true, name + ".bwd", rng) {}

Sequence BiLstm::forward(const Sequence& x, Cache* cache) const {
  Sequence hf = fwd.forward(x, cache ? &cache->fwd : nullptr);
  Sequence hb = bwd.forward(x, cache ? &cache->bwd : nullptr);
  const Index H = hidden_size();
  Sequence out(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) {
    out[t].resize(2 * H, hf[t].cols());
    out[t].topRows(H) = hf[t];
    out[t].bottomRows(H) = hb[t];
  }
  return out;
}

Sequence BiLstm::backward(const Sequence& x, const Cache& cache, const Sequence& dh, BackwardOptions opt) {
  const Index H = hidden_size();
  Sequence dhf(dh.size()), dhb(dh.size());
  for (std::size_t t = 0; t < dh.size(); ++t) {
    if (dh[t].rows() != 2 * H) throw Error("bilstm: gradient shape mismatch");
    dhf[t] = dh[t].topRows(H);
    dhb[t] = dh[t].bottomRows(H);
  }
  Sequence dx = fwd.backward(x, cache.fwd, dhf, opt);
  Sequence dxb = bwd.backward(x, cache.bwd, dhb, opt);
  if (opt.input_grad) {
    for (std::size_t t = 0; t < dx.size(); ++t) dx[t] += dxb[t];
  }
  return dx;
}

ParamRefs BiLstm::parameters() {
  ParamRefs out = fwd.parameters();
  for (auto* p : bwd.parameters()) out.push_back(p);
  return out;
}

// ---- ResidualHead --------------------------------------------------------

std::string to_string(HeadKind kind) {
  switch (kind) {
    case HeadKind::dual_relu: return "dual_relu";
    case HeadKind::linear_diff: return "linear_diff";
    case HeadKind::tanh_full: return "tanh_full";
  }
  return "dual_relu";
}

HeadKind head_kind_from_string(const std::string& s) {
  if (s == "dual_relu") return HeadKind::dual_relu;
  if (s == "linear_diff") return HeadKind::linear_diff;
  if (s == "tanh_full") return HeadKind::tanh_full;
  throw Error("unknown head kind: " + s);
}

ResidualHead::ResidualHead(Index in, Index out, HeadKind k, double s, const std::string& name,
                           std::mt19937_64& rng)
    : fc1(in, out, name + ".fc1", rng), kind(k), scale(s) {
  if (kind != HeadKind::tanh_full) fc2 = Dense(in, out, name + ".fc2", rng);
  if (kind == HeadKind::dual_relu) {
    fc1.bias.value.setConstant(kDualReluBiasInit);
    fc2.bias.value.setConstant(kDualReluBiasInit);
  }
}

Matrix ResidualHead::forward(const Matrix& h, Cache* cache) const {
  Matrix a = fc1.forward(h);
  Matrix out;
  switch (kind) {
    case HeadKind::dual_relu: {
      Matrix b = fc2.forward(h);
      out = a.cwiseMax(0.0) - b.cwiseMax(0.0);
      if (cache) cache->pre2 = std::move(b);
      break;
    }
    case HeadKind::linear_diff: {
      Matrix b = fc2.forward(h);
      out = a - b;
      if (cache) cache->pre2 = std::move(b);
      break;
    }
    case HeadKind::tanh_full:
      out = scale * a.array().tanh().matrix();
      break;
  }
  if (cache) cache->pre1 = std::move(a);
  return out;
}

Matrix ResidualHead::backward(const Matrix& h, const Cache& cache, const Matrix& dy, BackwardOptions opt) {
  Matrix dh;
  switch (kind) {
    case HeadKind::dual_relu: {
      const Matrix da = dy.cwiseProduct((cache.pre1.array() > 0.0).cast<double>().matrix());
      const Matrix db = -dy.cwiseProduct((cache.pre2.array() > 0.0).cast<double>().matrix());
      dh = fc1.backward(h, da, opt);
      Matrix dh2 = fc2.backward(h, db, opt);
      if (opt.input_grad) dh += dh2;
      break;
    }
    case HeadKind::linear_diff: {
      dh = fc1.backward(h, dy, opt);
      Matrix dh2 = fc2.backward(h, -dy, opt);
      if (opt.input_grad) dh += dh2;
      break;
    }
    case HeadKind::tanh_full: {
      const Matrix th = cache.pre1.array().tanh().matrix();
      const Matrix da = scale * dy.cwiseProduct((1.0 - th.array().square()).matrix());
      dh = fc1.backward(h, da, opt);
      break;
    }
  }
  return dh;
}

double ResidualHead::min_abs_preactivation(const Cache& cache) {
  double m = std::numeric_limits<double>::infinity();
  if (cache.pre1.size() > 0) m = std::min(m, cache.pre1.cwiseAbs().minCoeff());
  if (cache.pre2.size() > 0) m = std::min(m, cache.pre2.cwiseAbs().minCoeff());
  return m;
}

ParamRefs ResidualHead::parameters() {
  ParamRefs out = fc1.parameters();
  if (kind != HeadKind::tanh_full) {
    for (auto* p : fc2.parameters()) out.push_back(p);
  }
  return out;
}

}  // namespace cfts::nn
