#pragma once

#include <cmath>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace cfts::nn {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Time-major batch: element t holds the (features x batch) slice at step t.
using Sequence = std::vector<Matrix>;

/// A named parameter array and its gradient accumulator.
struct ParamTensor {
  std::string name;
  Matrix value;
  Matrix grad;

  ParamTensor() = default;
  ParamTensor(std::string n, Index rows, Index cols)
      : name(std::move(n)), value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)) {}
};

using ParamRefs = std::vector<ParamTensor*>;

void zero_grad(std::span<ParamTensor* const> params);
std::size_t parameter_count(std::span<ParamTensor* const> params);

/// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
void init_uniform(ParamTensor& p, Index fan_in, std::mt19937_64& rng);

struct BackwardOptions {
  bool param_grads = true;
  bool input_grad = true;
};

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// Affine map y = W x + b applied to every column of x.
class Dense {
 public:
  Dense() = default;
  Dense(Index in, Index out, const std::string& name, std::mt19937_64& rng);

  Index in_features() const { return weight.value.cols(); }
  Index out_features() const { return weight.value.rows(); }

  Matrix forward(const Matrix& x) const;
  /// Accumulates dW, db; returns dL/dx when requested (empty otherwise).
  Matrix backward(const Matrix& x, const Matrix& dy, BackwardOptions opt = {});

  ParamRefs parameters() { return {&weight, &bias}; }

  ParamTensor weight;
  ParamTensor bias;
};

/// One direction of an LSTM layer. Gate order in the stacked weights is
/// input, forget, cell, output.
class Lstm {
 public:
  struct Cache {
    Sequence gates;   // activated gates per step, (4H x B)
    Sequence cell;    // c_t
    Sequence tanh_c;  // tanh(c_t)
    Sequence hidden;  // h_t
  };

  Lstm() = default;
  Lstm(Index in, Index hidden, bool reverse, const std::string& name, std::mt19937_64& rng);

  Index hidden_size() const { return wh.value.cols(); }
  Index input_size() const { return wx.value.cols(); }

  /// Hidden states indexed by time in input order regardless of direction.
  Sequence forward(const Sequence& x, Cache* cache) const;
  Sequence backward(const Sequence& x, const Cache& cache, const Sequence& dh, BackwardOptions opt = {});

  ParamRefs parameters() { return {&wx, &wh, &b}; }

  ParamTensor wx;
  ParamTensor wh;
  ParamTensor b;
  bool reverse = false;
};

/// Forward and reverse LSTMs whose states are stacked per step (2H x B).
class BiLstm {
 public:
  struct Cache {
    Lstm::Cache fwd;
    Lstm::Cache bwd;
  };

  BiLstm() = default;
  BiLstm(Index in, Index hidden, const std::string& name, std::mt19937_64& rng);

  Index hidden_size() const { return fwd.hidden_size(); }
  Index output_size() const { return 2 * fwd.hidden_size(); }

  Sequence forward(const Sequence& x, Cache* cache) const;
  Sequence backward(const Sequence& x, const Cache& cache, const Sequence& dh, BackwardOptions opt = {});

  ParamRefs parameters();

  Lstm fwd;
  Lstm bwd;
};

enum class HeadKind {
  dual_relu,    // relu(fc1 h) - relu(fc2 h)
  linear_diff,  // fc1 h - fc2 h
  tanh_full,    // scale * tanh(fc1 h), a full instance rather than a residual
};

std::string to_string(HeadKind kind);
HeadKind head_kind_from_string(const std::string& s);

/// Starting bias of both dual_relu branches. Keeps the branches active at
/// initialization so the residual is not stuck at zero from the first step.
inline constexpr double kDualReluBiasInit = 0.5;

/// Output head of the generator, applied column-wise to hidden states.
class ResidualHead {
 public:
  struct Cache {
    Matrix pre1;
    Matrix pre2;
  };

  ResidualHead() = default;
  ResidualHead(Index in, Index out, HeadKind kind, double scale, const std::string& name, std::mt19937_64& rng);

  Matrix forward(const Matrix& h, Cache* cache) const;
  Matrix backward(const Matrix& h, const Cache& cache, const Matrix& dy, BackwardOptions opt = {});

  /// Smallest |pre-activation| across both branches; used to stay clear of
  /// ReLU kinks in gradient checks.
  static double min_abs_preactivation(const Cache& cache);

  ParamRefs parameters();

  Dense fc1;
  Dense fc2;
  HeadKind kind = HeadKind::dual_relu;
  double scale = 1.0;
};

}  // namespace cfts::nn
