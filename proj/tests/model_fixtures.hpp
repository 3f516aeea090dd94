#pragma once

#include <string>

#include "msldp/model.hpp"

namespace fixtures {

// First-order Langevin dX = [-(eps/delta) Q'(X/delta) - V'(X)] dt + sqrt(2 D eps) dW.
inline msldp::ModelSpec langevin(const std::string& Q, const std::string& V = "0", double D = 1.0) {
  msldp::ModelSpec s;
  s.dim = 1;
  s.definitions = {{"Q", Q}, {"V", V}};
  s.constants = {{"D", D}};
  s.b = {"-diff(Q, y)"};
  s.c = {"-diff(V, x)"};
  s.sigma = {"sqrt(2*D)"};
  s.x0 = {-1.0};
  return s;
}

inline msldp::ModelSpec one_dim(const std::string& b, const std::string& c, const std::string& sigma) {
  msldp::ModelSpec s;
  s.dim = 1;
  s.b = {b};
  s.c = {c};
  s.sigma = {sigma};
  s.x0 = {0.0};
  return s;
}

}  // namespace fixtures
