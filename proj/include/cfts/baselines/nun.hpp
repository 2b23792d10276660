#pragma once

#include <span>

#include "cfts/cf/train.hpp"
#include "cfts/core/series.hpp"
#include "cfts/nn/networks.hpp"

namespace cfts::baselines {

/// Index of the nearest training instance (flattened L2) predicted
/// differently from `query_pred`; ties go to the smaller index.
std::size_t find_nun_index(const Series& query, Label query_pred, const MtsDataset& train,
                           std::span<const Label> train_pred);

const MtsInstance& find_nun(const MtsInstance& query, const MtsDataset& train,
                            const nn::SequenceClassifier& classifier);

struct NunResult {
  cf::CfResult result;
  std::size_t segments_used = 0;
  bool fallback = false;  // the NUN itself was returned
};

/// Greedy window substitution from the NUN, windows ranked by the binary
/// entropy of the classifier on the isolated window.
NunResult nun_substitute_cf(const MtsInstance& query, const MtsInstance& nun,
                            const nn::SequenceClassifier& classifier, Eigen::Index window_len,
                            std::size_t max_segments);

}  // namespace cfts::baselines
