#include "msldp/path.hpp"

#include <stdexcept>

namespace msldp {

DiscretePath straight_path(const std::vector<double>& x0, const std::vector<double>& x1, double T, int M) {
  if (x0.size() != x1.size() || x0.empty()) throw std::invalid_argument("straight_path: endpoint dimensions differ");
  if (M < 1 || !(T > 0.0)) throw std::invalid_argument("straight_path: need M >= 1 and T > 0");
  DiscretePath p;
  p.dim = static_cast<int>(x0.size());
  p.times.resize(M + 1);
  p.states.resize(static_cast<std::size_t>(M + 1) * p.dim);
  for (int k = 0; k <= M; ++k) {
    const double s = static_cast<double>(k) / M;
    p.times[k] = T * s;
    for (int i = 0; i < p.dim; ++i) p.states[k * p.dim + i] = (1.0 - s) * x0[i] + s * x1[i];
  }
  return p;
}

}  // namespace msldp
