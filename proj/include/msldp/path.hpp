#pragma once

#include <span>
#include <vector>

namespace msldp {

/// Uniform time grid with states (flattened, dim entries per time) and accumulated Girsanov log-weight.
struct DiscretePath {
  int dim = 1;
  std::vector<double> times;
  std::vector<double> states;
  double logweight = 0.0;
  std::vector<double> logweights;  // running log-weight at each stored time (simulated paths only)

  std::size_t size() const { return times.size(); }
  std::span<const double> state(std::size_t k) const { return {states.data() + k * dim, static_cast<std::size_t>(dim)}; }
  std::span<double> state(std::size_t k) { return {states.data() + k * dim, static_cast<std::size_t>(dim)}; }
};

/// Uniform grid on [0, T] with M intervals; states filled by linear interpolation between x0 and x1.
DiscretePath straight_path(const std::vector<double>& x0, const std::vector<double>& x1, double T, int M);

}  // namespace msldp
