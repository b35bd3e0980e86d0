#include "lqg_adapt/sysid.hpp"

#include <algorithm>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace lqg_adapt {

void History::push(const Vector& y, const Vector& u) {
  if (y.size() != ny_ || u.size() != nu_) {
    throw Error(ErrorCode::kDimensionMismatch, "history record does not match (ny, nu)");
  }
  ys_.push_back(y);
  us_.push_back(u);
}

Vector build_regressor(const History& history, std::size_t t, std::size_t H) {
  if (t < H || history.size() < t) {
    throw Error(ErrorCode::kInsufficientHistory,
                "regressor at t=" + std::to_string(t) + " with H=" + std::to_string(H) +
                    " needs steps 0..t-1, have " + std::to_string(history.size()));
  }
  const auto ny = history.ny();
  const auto nu = history.nu();
  const auto h = static_cast<Eigen::Index>(H);
  Vector phi(h * (ny + nu));
  for (Eigen::Index i = 0; i < h; ++i) {
    const std::size_t past = t - 1 - static_cast<std::size_t>(i);
    phi.segment(i * ny, ny) = history.y(past);
    phi.segment(h * ny + i * nu, nu) = history.u(past);
  }
  return phi;
}

MarkovAccumulator::MarkovAccumulator(Eigen::Index regressor_dim, Eigen::Index ny)
    : gram_(Matrix::Zero(regressor_dim, regressor_dim)),
      cross_(Matrix::Zero(regressor_dim, ny)) {}

void MarkovAccumulator::add(const Vector& phi, const Vector& y) {
  if (phi.size() != gram_.rows() || y.size() != cross_.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "regressor or output does not conform");
  }
  gram_.selfadjointView<Eigen::Lower>().rankUpdate(phi);
  cross_.noalias() += phi * y.transpose();
  ++n_;
}

MarkovEstimate MarkovAccumulator::estimate(double lambda) const {
  if (n_ == 0) throw Error(ErrorCode::kEmptyData, "no samples accumulated");
  if (!(lambda > 0.0)) throw Error(ErrorCode::kEmptyData, "lambda must be positive");
  MarkovEstimate me;
  me.lambda = lambda;
  me.n_samples = n_;
  me.V = gram_.selfadjointView<Eigen::Lower>();
  me.V.diagonal().array() += lambda;
  me.M_hat = me.V.llt().solve(cross_).transpose();
  return me;
}

MarkovEstimate rls_markov(std::span<const Vector> regressors, std::span<const Vector> outputs,
                          double lambda) {
  if (regressors.empty() || regressors.size() != outputs.size()) {
    throw Error(ErrorCode::kEmptyData, "need at least one (phi, y) pair and matching counts");
  }
  const auto d = regressors.front().size();
  const auto ny = outputs.front().size();
  Matrix Phi(static_cast<Eigen::Index>(regressors.size()), d);
  Matrix Y(static_cast<Eigen::Index>(outputs.size()), ny);
  for (std::size_t i = 0; i < regressors.size(); ++i) {
    if (regressors[i].size() != d || outputs[i].size() != ny) {
      throw Error(ErrorCode::kDimensionMismatch, "ragged regressor or output sequence");
    }
    Phi.row(static_cast<Eigen::Index>(i)) = regressors[i].transpose();
    Y.row(static_cast<Eigen::Index>(i)) = outputs[i].transpose();
  }
  if (!(lambda > 0.0)) throw Error(ErrorCode::kEmptyData, "lambda must be positive");
  MarkovEstimate me;
  me.lambda = lambda;
  me.n_samples = regressors.size();
  me.V = Phi.transpose() * Phi;
  me.V.diagonal().array() += lambda;
  me.M_hat = me.V.llt().solve(Phi.transpose() * Y).transpose();
  return me;
}

Matrix markov_from_params(const SystemParams& params, const Matrix& F, std::size_t H) {
  params.check_dimensions();
  if (F.rows() != params.nx() || F.cols() != params.ny()) {
    throw Error(ErrorCode::kDimensionMismatch, "F must be nx x ny");
  }
  const auto ny = params.ny();
  const auto nu = params.nu();
  const auto h = static_cast<Eigen::Index>(H);
  const Matrix Abar = params.A - F * params.C;
  Matrix M(ny, (ny + nu) * h);
  Matrix CAi = params.C;  // C Abar^i
  for (Eigen::Index i = 0; i < h; ++i) {
    M.middleCols(i * ny, ny) = CAi * F;
    M.middleCols(h * ny + i * nu, nu) = CAi * params.B;
    CAi = CAi * Abar;
  }
  return M;
}

HankelSplit default_split(std::size_t H) {
  HankelSplit s;
  s.d1 = H / 2;  // ceil((H-1)/2)
  s.d2 = H - 1 - s.d1;
  return s;
}

RealizedModel ho_kalman(const Matrix& M_hat, Eigen::Index nx, Eigen::Index ny, Eigen::Index nu,
                        std::size_t H, HankelSplit split) {
  const auto d1 = static_cast<Eigen::Index>(split.d1);
  const auto d2 = static_cast<Eigen::Index>(split.d2);
  if (d1 < nx || d2 < nx || split.d1 + split.d2 + 1 != H) {
    throw Error(ErrorCode::kBadSplit, "need d1 >= nx, d2 >= nx and d1 + d2 + 1 = H; got d1=" +
                                          std::to_string(d1) + ", d2=" + std::to_string(d2) +
                                          ", H=" + std::to_string(H));
  }
  const auto h = static_cast<Eigen::Index>(H);
  if (M_hat.rows() != ny || M_hat.cols() != (ny + nu) * h) {
    throw Error(ErrorCode::kDimensionMismatch, "Markov block must be ny x (ny+nu)H");
  }
  auto f_block = [&](Eigen::Index i) { return M_hat.middleCols(i * ny, ny); };
  auto g_block = [&](Eigen::Index i) { return M_hat.middleCols(h * ny + i * nu, nu); };

  // Hankel matrices with d1 block rows and d2+1 block columns, block (i, j)
  // holding Markov parameter i + j. H- keeps columns 0..d2-1 of both, H+
  // keeps columns 1..d2.
  const Eigen::Index rows = d1 * ny;
  const Eigen::Index cols_minus = d2 * (ny + nu);
  Matrix h_minus(rows, cols_minus);
  Matrix h_plus(rows, cols_minus);
  for (Eigen::Index i = 0; i < d1; ++i) {
    for (Eigen::Index j = 0; j < d2; ++j) {
      h_minus.block(i * ny, j * ny, ny, ny) = f_block(i + j);
      h_minus.block(i * ny, d2 * ny + j * nu, ny, nu) = g_block(i + j);
      h_plus.block(i * ny, j * ny, ny, ny) = f_block(i + j + 1);
      h_plus.block(i * ny, d2 * ny + j * nu, ny, nu) = g_block(i + j + 1);
    }
  }
  if (!h_minus.allFinite()) throw Error(ErrorCode::kNonFiniteInput, "Markov block is not finite");

  Eigen::JacobiSVD<Matrix> svd(h_minus, Eigen::ComputeThinU | Eigen::ComputeThinV);
  RealizedModel out;
  out.hankel_sv = svd.singularValues();
  const double smax = out.hankel_sv.size() > 0 ? out.hankel_sv(0) : 0.0;
  if (out.hankel_sv.size() < nx || smax == 0.0 || out.hankel_sv(nx - 1) < 1e-10 * smax) {
    throw Error(ErrorCode::kRankDeficient,
                "Hankel matrix has no well-conditioned rank-" + std::to_string(nx) + " part");
  }

  const Vector sqrt_sv = out.hankel_sv.head(nx).cwiseSqrt();
  const Matrix obs = svd.matrixU().leftCols(nx) * sqrt_sv.asDiagonal();
  const Matrix ctrl = sqrt_sv.asDiagonal() * svd.matrixV().leftCols(nx).transpose();

  out.C_hat = obs.topRows(ny);
  const Matrix F_ctrl = ctrl.leftCols(ny);
  out.B_hat = ctrl.middleCols(d2 * ny, nu);

  const Matrix abar = pseudo_inverse(obs) * h_plus * pseudo_inverse(ctrl);
  out.A_hat = abar + F_ctrl * out.C_hat;

  // L from the first nx x ny block of A^+ O^+ H-; O^+ H- = ctrl, so this is
  // A^+ F.
  out.a_hat_singular = numerical_rank(out.A_hat) < nx;
  out.L_hat = (pseudo_inverse(out.A_hat) * pseudo_inverse(obs) * h_minus).leftCols(ny);
  out.F_hat = out.A_hat * out.L_hat;

  Matrix abar_pow = Matrix::Identity(nx, nx);
  const Matrix abar_hat = out.A_hat - out.F_hat * out.C_hat;
  for (std::size_t k = 0; k < H; ++k) abar_pow = abar_pow * abar_hat;
  out.truncation_warning = !(abar_pow.norm() <= 1e-6);
  return out;
}

double min_sv_gram(const Matrix& gram) {
  if (gram.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  return std::max(eig.eigenvalues().minCoeff(), 0.0);
}

double min_sv_gram(const MarkovEstimate& me) {
  Matrix raw = me.V;
  raw.diagonal().array() -= me.lambda;
  return min_sv_gram(raw);
}

double markov_error(const Matrix& M_hat, const Matrix& truth) {
  if (M_hat.rows() != truth.rows() || M_hat.cols() != truth.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "Markov blocks differ in shape");
  }
  const Matrix diff = M_hat - truth;
  if (diff.isZero(0.0)) return 0.0;
  return Eigen::JacobiSVD<Matrix>(diff).singularValues()(0);
}

double markov_error(const MarkovEstimate& me, const Matrix& truth) {
  return markov_error(me.M_hat, truth);
}

}  // namespace lqg_adapt
