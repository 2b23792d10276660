#pragma once

// Small random generators for property tests.

#include <cstdint>
#include <random>
#include <vector>

#include "cfts/core/series.hpp"

namespace gen {

struct Rng {
  std::mt19937_64 eng;
  explicit Rng(std::uint64_t seed) : eng(seed) {}

  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(eng); }
  double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng); }
  double normal(double sigma = 1.0) { return std::normal_distribution<double>(0.0, sigma)(eng); }
  bool coin() { return integer(0, 1) == 1; }

  std::vector<double> vec(std::size_t n, double lo = -3, double hi = 3) {
    std::vector<double> v(n);
    for (auto& x : v) x = real(lo, hi);
    return v;
  }

  /// Values on a coarse grid, so ties show up often.
  std::vector<double> grid_vec(std::size_t n, int levels = 4) {
    std::vector<double> v(n);
    for (auto& x : v) x = integer(0, levels);
    return v;
  }

  cfts::Series series(Eigen::Index v, Eigen::Index t, double sigma = 1.0) {
    cfts::Series s(v, t);
    for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = normal(sigma);
    return s;
  }

  cfts::MtsDataset dataset(std::size_t n, Eigen::Index v, Eigen::Index t) {
    cfts::MtsDataset ds;
    ds.meta = {"random", v, t, {0, 1}};
    for (std::size_t i = 0; i < n; ++i) {
      ds.instances.push_back({series(v, t), i < 2 ? static_cast<int>(i) : integer(0, 1), "r:" + std::to_string(i)});
    }
    return ds;
  }
};

inline std::vector<double> flatten(const cfts::Series& s) { return {s.data(), s.data() + s.size()}; }

}  // namespace gen
