#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "lanepe/rng.hpp"
#include "lanepe/tensor.hpp"

namespace lanepe::testing {

inline void fill_uniform(const TensorPtr& t, SeededRng& rng, double lo = -1.0,
                         double hi = 1.0) {
  for (double& v : t->data) v = rng.uniform(lo, hi);
}

inline double rel_err(double a, double b) {
  // relative once either side is sizable; the 1e-4 floor keeps genuinely
  // zero gradients from dividing by zero
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-4});
}

struct GradCheckResult {
  double max_rel_err = 0.0;
  int checked = 0;
};

// Central finite differences, entry by entry, against analytic gradients.
// forward_loss runs a fresh forward pass and returns the loss value;
// backward_fill zeroes grads, runs a recorded forward + backward.
inline GradCheckResult check_gradients(
    const std::vector<TensorPtr>& params,
    const std::function<double()>& forward_loss,
    const std::function<void()>& backward_fill, double h = 1e-5) {
  backward_fill();
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) analytic.push_back(p->grad);

  GradCheckResult res;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& p = *params[pi];
    for (std::size_t i = 0; i < p.data.size(); ++i) {
      const double saved = p.data[i];
      p.data[i] = saved + h;
      const double up = forward_loss();
      p.data[i] = saved - h;
      const double down = forward_loss();
      p.data[i] = saved;
      const double fd = (up - down) / (2.0 * h);
      res.max_rel_err = std::max(res.max_rel_err, rel_err(analytic[pi][i], fd));
      ++res.checked;
    }
  }
  return res;
}

// One random-direction probe: compares v . grad with the central difference
// of the loss along v. Cheap enough to run by the hundred on full networks.
inline double directional_probe(const std::vector<TensorPtr>& params,
                                const std::function<double()>& forward_loss,
                                const std::function<void()>& backward_fill,
                                SeededRng& rng, double h = 1e-5) {
  backward_fill();
  std::vector<std::vector<double>> dirs;
  double norm2 = 0.0;
  for (const auto& p : params) {
    std::vector<double> d(p->data.size());
    for (double& v : d) {
      v = rng.uniform(-1.0, 1.0);
      norm2 += v * v;
    }
    dirs.push_back(std::move(d));
  }
  const double inv_norm = 1.0 / std::sqrt(norm2);
  double analytic = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi)
    for (std::size_t i = 0; i < dirs[pi].size(); ++i) {
      dirs[pi][i] *= inv_norm;
      analytic += dirs[pi][i] * params[pi]->grad[i];
    }

  const auto shift = [&](double s) {
    for (std::size_t pi = 0; pi < params.size(); ++pi)
      for (std::size_t i = 0; i < dirs[pi].size(); ++i)
        params[pi]->data[i] += s * dirs[pi][i];
  };
  shift(h);
  const double up = forward_loss();
  shift(-2.0 * h);
  const double down = forward_loss();
  shift(h);
  const double fd = (up - down) / (2.0 * h);
  return rel_err(analytic, fd);
}

}  // namespace lanepe::testing
