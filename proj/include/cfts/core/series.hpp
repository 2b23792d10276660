#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace cfts {

/// Base error for every failure surfaced by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Signals are rows, time steps are columns: values(v, t).
using Series = Eigen::MatrixXd;

/// Binary class label.
using Label = int;

inline Label other_label(Label l) { return l == 0 ? 1 : 0; }

struct MtsInstance {
  Series values;
  Label label = 0;
  std::string id;

  Eigen::Index signals() const { return values.rows(); }
  Eigen::Index length() const { return values.cols(); }
};

struct DatasetMeta {
  std::string name;
  Eigen::Index signals = 0;
  Eigen::Index length = 0;
  std::vector<Label> classes{0, 1};
};

struct MtsDataset {
  std::vector<MtsInstance> instances;
  DatasetMeta meta;

  std::size_t size() const { return instances.size(); }
  bool empty() const { return instances.empty(); }
  const MtsInstance& operator[](std::size_t i) const { return instances[i]; }
  std::size_t count(Label label) const;
};

/// Checks the per-instance and shared-shape invariants; throws Error.
void validate(const MtsInstance& inst);
void validate(const MtsDataset& ds);

enum class Split { train, test };
std::string to_string(Split split);

/// Reads `<dir>/meta.json` and `<dir>/<split>.csv`.
MtsDataset load_dataset(const std::filesystem::path& dir, Split split);

/// Writes `<dir>/meta.json` and `<dir>/<split>.csv`; creates `dir` if needed.
void save_dataset(const MtsDataset& ds, const std::filesystem::path& dir, Split split);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double x);

struct SynthConfig {
  std::size_t n_train = 200;
  std::size_t n_test = 100;
  Eigen::Index signals = 3;
  Eigen::Index length = 50;
  Eigen::Index bump_signal = 0;
  Eigen::Index bump_start = 20;  // 0-based
  Eigen::Index bump_length = 10;
  double bump_amplitude = 5.0;
  double noise_sigma = 0.5;
  std::uint64_t seed = 7;
  std::string name = "synthetic";
};

void validate(const SynthConfig& cfg);

/// Class 0 is pure Gaussian noise; class 1 adds a rectangular bump on one
/// signal. Labels alternate 0,1,0,1,... so both splits are balanced.
std::pair<MtsDataset, MtsDataset> synth_dataset(const SynthConfig& cfg);

/// Exact, order-preserving partition into (queried_label, other label).
std::pair<MtsDataset, MtsDataset> split_by_label(const MtsDataset& ds, Label queried_label);

/// Per-instance, per-signal z-normalization. Constant signals become zero.
MtsDataset z_normalize(const MtsDataset& ds);

/// Flattened squared Euclidean distance between two equal-shape series.
double squared_l2(const Series& a, const Series& b);

/// Deterministic 64-bit mixing used to derive independent RNG streams.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace cfts
