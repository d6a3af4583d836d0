#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <unistd.h>

#include "ivt/dataset.hpp"
#include "ivt/network.hpp"
#include "ivt/rng.hpp"
#include "ivt/stream.hpp"

namespace ivt::testing {

inline LabeledDataset random_batch(std::size_t n, std::size_t dim, const std::vector<int>& classes,
                                   std::uint64_t seed) {
  Rng rng(seed);
  LabeledDataset d;
  d.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < d.features.rows(); ++i) {
    for (Eigen::Index j = 0; j < d.features.cols(); ++j) d.features(i, j) = rng.normal();
  }
  for (std::size_t i = 0; i < n; ++i) d.labels.push_back(classes[rng.below(classes.size())]);
  return d;
}

// Fills every coordinate with N(0, scale^2) so heads are not all zero.
inline ParamVector randomized(ParamVector p, std::uint64_t seed, double scale = 0.5) {
  Rng rng(seed);
  for (Eigen::Index i = 0; i < p.values().size(); ++i) p.values()[i] = scale * rng.normal();
  return p;
}

// Central differences with step h of a scalar function of the parameter vector.
inline Eigen::VectorXd finite_difference(const std::function<double(const ParamVector&)>& f,
                                         const ParamVector& at, double h = 1e-5) {
  Eigen::VectorXd g(at.values().size());
  ParamVector probe = at;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double x = at.values()[i];
    probe.values()[i] = x + h;
    const double up = f(probe);
    probe.values()[i] = x - h;
    const double down = f(probe);
    probe.values()[i] = x;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// Max over coordinates of |a - b| / max(|a|, |b|, floor).
inline double max_relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                                 double floor = 1e-4) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

// The small benchmark used across the trainer and geometry tests.
inline TaskStream gaussian_stream(double separation = 5.0, std::size_t classes = 6,
                                  std::size_t base = 2, std::size_t tasks = 3,
                                  std::uint64_t seed = 11, std::size_t train_per_class = 200,
                                  std::size_t test_per_class = 100) {
  GaussianSpec g;
  g.dim = 2;
  g.classes = classes;
  g.separation = separation;
  g.train_per_class = train_per_class;
  g.test_per_class = test_per_class;
  g.seed = seed;
  const auto data = synth_gaussian_tasks(g);
  return make_incremental_stream(data.train, data.test, base, tasks, 1993);
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("ivt_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace ivt::testing
