#pragma once

#include "lqg_adapt/plant.hpp"

namespace fixtures {

using lqg_adapt::CostParams;
using lqg_adapt::Matrix;
using lqg_adapt::SystemParams;

inline SystemParams webserver() {
  SystemParams p;
  p.A.resize(2, 2);
  p.B.resize(2, 2);
  p.C.resize(2, 2);
  p.A << 0.54, -0.11, -0.026, 0.63;
  p.B << -85, 4.4, -2.5, 2.8;
  p.C << 0.2, 0.3, 0.3, 0.2;
  return p;
}

inline CostParams webserver_cost() {
  CostParams c;
  c.Q = Matrix::Zero(2, 2);
  c.Q.diagonal() << 5, 1;
  c.R = Matrix::Zero(2, 2);
  c.R.diagonal() << 1.0 / 2500.0, 1e-6;
  return c;
}

inline Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

inline SystemParams scalar_system(double a, double b, double c) {
  return {scalar(a), scalar(b), scalar(c)};
}

}  // namespace fixtures
