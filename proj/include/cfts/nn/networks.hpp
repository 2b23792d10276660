#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfts/core/series.hpp"
#include "cfts/nn/layers.hpp"

namespace cfts::nn {

enum class NetworkKind { generator, discriminator, classifier };

std::string to_string(NetworkKind kind);
NetworkKind network_kind_from_string(const std::string& s);

struct NetworkSpec {
  NetworkKind kind = NetworkKind::generator;
  Index signals = 1;
  Index length = 2;
  Index hidden = 32;
  HeadKind head = HeadKind::dual_relu;  // generator only
  double output_scale = 1.0;            // tanh_full only
};

/// Packs per-sample (V x T) series into a time-major batch.
Sequence to_time_major(std::span<const Series> batch);
std::vector<Series> from_time_major(const Sequence& seq);

/// Bidirectional LSTM encoder followed by a time-distributed output head
/// producing one (V x T) output per input series.
class Generator {
 public:
  struct Cache {
    Sequence input;
    BiLstm::Cache encoder;
    Sequence hidden;
    std::vector<ResidualHead::Cache> head;
  };

  Generator() = default;
  Generator(const NetworkSpec& spec, std::uint64_t seed);

  const NetworkSpec& spec() const { return spec_; }

  std::vector<Series> forward(std::span<const Series> inputs, Cache* cache) const;
  Series forward(const Series& input) const;
  void backward(const Cache& cache, std::span<const Series> d_out, BackwardOptions opt = {});

  /// Zeroes every head parameter, so every output is exactly 0.
  void zero_head();

  ParamRefs parameters();

  static double min_abs_preactivation(const Cache& cache);

  BiLstm encoder;
  ResidualHead head;

 private:
  NetworkSpec spec_;
};

/// Bidirectional LSTM, mean-pooled over time, dense layer, sigmoid. Serves
/// as both the discriminator and the pre-trained classifier.
class SequenceClassifier {
 public:
  struct Cache {
    Sequence input;
    BiLstm::Cache encoder;
    Sequence hidden;
    Matrix pooled;
    Eigen::RowVectorXd logits;
  };

  SequenceClassifier() = default;
  SequenceClassifier(const NetworkSpec& spec, std::uint64_t seed);

  const NetworkSpec& spec() const { return spec_; }

  /// Probability of class 1 for every input.
  Eigen::RowVectorXd forward(std::span<const Series> inputs, Cache* cache) const;
  double predict_proba(const Series& x) const;
  Label predict(const Series& x) const { return predict_proba(x) >= 0.5 ? 1 : 0; }

  /// `d_logits` is dL/dlogit per sample; returns dL/dinput per sample when
  /// requested.
  std::vector<Series> backward(const Cache& cache, const Eigen::RowVectorXd& d_logits, BackwardOptions opt = {});

  ParamRefs parameters();

  BiLstm encoder;
  Dense out;

 private:
  NetworkSpec spec_;
};

nlohmann::json spec_to_json(const NetworkSpec& spec);
NetworkSpec spec_from_json(const nlohmann::json& j);

nlohmann::json params_to_json(std::span<ParamTensor* const> params);
void params_from_json(const nlohmann::json& j, std::span<ParamTensor* const> params);

}  // namespace cfts::nn
