#pragma once

#include <span>
#include <utility>
#include <vector>

#include "lqg_adapt/control_math.hpp"
#include "lqg_adapt/plant.hpp"

namespace lqg_adapt {

/// Input-output record of one run, indexed by time step.
class History {
 public:
  History(Eigen::Index ny, Eigen::Index nu) : ny_(ny), nu_(nu) {}

  void push(const Vector& y, const Vector& u);
  std::size_t size() const { return ys_.size(); }
  const Vector& y(std::size_t t) const { return ys_[t]; }
  const Vector& u(std::size_t t) const { return us_[t]; }
  Eigen::Index ny() const { return ny_; }
  Eigen::Index nu() const { return nu_; }

 private:
  Eigen::Index ny_;
  Eigen::Index nu_;
  std::vector<Vector> ys_;
  std::vector<Vector> us_;
};

/// phi_t = [y_{t-1}; ...; y_{t-H}; u_{t-1}; ...; u_{t-H}], outputs newest
/// first and then inputs newest first. Needs t >= H and steps 0..t-1 stored.
Vector build_regressor(const History& history, std::size_t t, std::size_t H);

/// Markov-parameter block estimate. Columns of M_hat are H blocks of
/// C Abar^i F followed by H blocks of C Abar^i B.
struct MarkovEstimate {
  Matrix M_hat;  // ny x (ny + nu) H
  Matrix V;      // Phi'Phi + lambda I
  double lambda = 0.0;
  std::size_t n_samples = 0;
};

/// M_hat' = (Phi'Phi + lambda I)^-1 Phi'Y over paired rows (phi_i, y_i).
MarkovEstimate rls_markov(std::span<const Vector> regressors, std::span<const Vector> outputs,
                          double lambda);

/// Running Phi'Phi and Phi'Y with rank-one updates; solved on demand.
class MarkovAccumulator {
 public:
  MarkovAccumulator(Eigen::Index regressor_dim, Eigen::Index ny);

  void add(const Vector& phi, const Vector& y);
  MarkovEstimate estimate(double lambda) const;

  Matrix gram() const { return gram_.selfadjointView<Eigen::Lower>(); }
  std::size_t n_samples() const { return n_; }

 private:
  Matrix gram_;    // Phi'Phi, lower triangle
  Matrix cross_;   // Phi'Y
  std::size_t n_ = 0;
};

/// Exact [CF, C Abar F, ..., C Abar^{H-1} F, CB, ..., C Abar^{H-1} B] with
/// Abar = A - FC.
Matrix markov_from_params(const SystemParams& params, const Matrix& F, std::size_t H);

struct RealizedModel {
  Matrix A_hat;
  Matrix B_hat;
  Matrix C_hat;
  Matrix L_hat;
  Matrix F_hat;  // A_hat L_hat
  Vector hankel_sv;
  bool a_hat_singular = false;     // L_hat came from a truncated pseudo-inverse
  bool truncation_warning = false; // ||(A_hat - F_hat C_hat)^H|| > 1e-6

  SystemParams params() const { return {A_hat, B_hat, C_hat}; }
};

struct HankelSplit {
  std::size_t d1 = 0;
  std::size_t d2 = 0;
};

/// d1 = ceil((H-1)/2), d2 = H - 1 - d1.
HankelSplit default_split(std::size_t H);

/// Ho-Kalman style realization of (A, B, C, L) from a Markov block, up to a
/// similarity transform. Requires d1, d2 >= nx and d1 + d2 + 1 = H (BadSplit);
/// throws RankDeficient when the nx-th Hankel singular value is below
/// 1e-10 sigma_max.
RealizedModel ho_kalman(const Matrix& M_hat, Eigen::Index nx, Eigen::Index ny, Eigen::Index nu,
                        std::size_t H, HankelSplit split);

inline RealizedModel ho_kalman(const MarkovEstimate& me, Eigen::Index nx, Eigen::Index ny,
                               Eigen::Index nu, std::size_t H, HankelSplit split) {
  return ho_kalman(me.M_hat, nx, ny, nu, H, split);
}

/// Smallest singular value of the raw Gram V - lambda I.
double min_sv_gram(const MarkovEstimate& me);
double min_sv_gram(const Matrix& gram);

/// Spectral norm of M_hat - truth.
double markov_error(const MarkovEstimate& me, const Matrix& truth);
double markov_error(const Matrix& M_hat, const Matrix& truth);

}  // namespace lqg_adapt
