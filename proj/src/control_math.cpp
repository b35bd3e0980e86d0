#include "lqg_adapt/control_math.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

namespace lqg_adapt {

std::string_view ToString(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNonConvergence: return "NonConvergence";
    case ErrorCode::kSingularInnerBlock: return "SingularInnerBlock";
    case ErrorCode::kInvalidNoise: return "InvalidNoise";
    case ErrorCode::kUnstableArgument: return "UnstableArgument";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNotPsd: return "NotPSD";
    case ErrorCode::kAssumptionViolated: return "AssumptionViolated";
    case ErrorCode::kNonFiniteInput: return "NonFiniteInput";
    case ErrorCode::kDiverged: return "Diverged";
    case ErrorCode::kInsufficientHistory: return "InsufficientHistory";
    case ErrorCode::kEmptyData: return "EmptyData";
    case ErrorCode::kRankDeficient: return "RankDeficient";
    case ErrorCode::kBadSplit: return "BadSplit";
    case ErrorCode::kSingularInnovation: return "SingularInnovation";
    case ErrorCode::kGainUnstable: return "GainUnstable";
    case ErrorCode::kRealizationFailed: return "RealizationFailed";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kValidationError: return "ValidationError";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

namespace {

std::string shape(const Matrix& X) {
  return std::to_string(X.rows()) + "x" + std::to_string(X.cols());
}

void check_dare_inputs(const Matrix& A, const Matrix& B, const Matrix& Qc, const Matrix& R) {
  const auto n = A.rows();
  if (A.cols() != n || B.rows() != n || Qc.rows() != n || Qc.cols() != n ||
      R.rows() != B.cols() || R.cols() != B.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "DARE operands A " + shape(A) + ", B " + shape(B) +
                                                   ", Qc " + shape(Qc) + ", R " + shape(R));
  }
  if (!all_finite(A) || !all_finite(B) || !all_finite(Qc) || !all_finite(R)) {
    throw Error(ErrorCode::kNonFiniteInput, "DARE operands contain NaN or Inf");
  }
}

// Ric(P) = Qc + A'PA - A'PB (B'PB + R)^-1 B'PA
Matrix riccati_map(const Matrix& A, const Matrix& B, const Matrix& Qc, const Matrix& R,
                   const Matrix& P) {
  const Matrix inner = B.transpose() * P * B + R;
  Eigen::LDLT<Matrix> ldlt(inner);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= 1e-14 * std::max(1.0, ldlt.vectorD().cwiseAbs().maxCoeff())) {
    throw Error(ErrorCode::kSingularInnerBlock, "B'PB + R is numerically singular");
  }
  const Matrix BtPA = B.transpose() * P * A;
  return symmetrize(Qc + A.transpose() * P * A - BtPA.transpose() * ldlt.solve(BtPA));
}

bool residual_ok(double residual, const Matrix& P, double tol) {
  return std::isfinite(residual) && residual <= tol * (1.0 + P.norm());
}

// Structured doubling: H_k converges quadratically to the stabilizing P.
bool doubling(const Matrix& A, const Matrix& B, const Matrix& Qc, const Matrix& R, double tol,
              Matrix& P, int& iterations) {
  const auto n = A.rows();
  Eigen::LLT<Matrix> r_llt(R);
  if (r_llt.info() != Eigen::Success) return false;
  Matrix Ak = A;
  Matrix Gk = B * r_llt.solve(B.transpose());
  Matrix Hk = Qc;
  const Matrix I = Matrix::Identity(n, n);
  for (int k = 0; k < 64; ++k) {
    Eigen::PartialPivLU<Matrix> lu(I + Gk * Hk);
    const Matrix WinvA = lu.solve(Ak);
    const Matrix WinvG = lu.solve(Gk);
    const Matrix Hnext = symmetrize(Hk + Ak.transpose() * Hk * WinvA);
    const Matrix Gnext = symmetrize(Gk + Ak * WinvG * Ak.transpose());
    const Matrix Anext = Ak * WinvA;
    iterations = k + 1;
    if (!all_finite(Hnext)) return false;
    const double change = (Hnext - Hk).norm();
    Hk = Hnext;
    Gk = Gnext;
    Ak = Anext;
    if (change <= tol * (1.0 + Hk.norm())) {
      P = Hk;
      return true;
    }
  }
  return false;
}

}  // namespace

bool all_finite(const Matrix& X) { return X.allFinite(); }

double control_dare_residual(const Matrix& A, const Matrix& B, const Matrix& Qc, const Matrix& R,
                             const Matrix& P) {
  return (P - riccati_map(A, B, Qc, R, P)).norm();
}

DareSolution solve_control_dare(const Matrix& A, const Matrix& B, const Matrix& Qc,
                                const Matrix& R, const RiccatiOptions& options) {
  check_dare_inputs(A, B, Qc, R);
  if (Eigen::LLT<Matrix>(R).info() != Eigen::Success) {
    throw Error(ErrorCode::kSingularInnerBlock, "R is not positive definite");
  }

  DareSolution out;
  Matrix P;
  int sda_iterations = 0;
  if (doubling(A, B, Qc, R, options.tol, P, sda_iterations)) {
    // One fixed-point sweep removes the last rounding asymmetries of doubling.
    const Matrix polished = riccati_map(A, B, Qc, R, P);
    const double residual = (polished - riccati_map(A, B, Qc, R, polished)).norm();
    if (residual_ok(residual, polished, options.tol)) {
      out.value = polished;
      out.residual_norm = residual;
      out.iterations = sda_iterations + 1;
      return out;
    }
  }

  P = Qc;
  for (int k = 0; k < options.max_iter; ++k) {
    const Matrix next = riccati_map(A, B, Qc, R, P);
    if (!all_finite(next)) break;
    const double change = (next - P).norm();
    P = next;
    if (change <= options.tol * (1.0 + P.norm())) {
      out.value = P;
      out.residual_norm = control_dare_residual(A, B, Qc, R, P);
      out.iterations = sda_iterations + k + 1;
      return out;
    }
  }
  throw Error(ErrorCode::kNonConvergence,
              "control DARE did not converge within " + std::to_string(options.max_iter) +
                  " iterations");
}

DareSolution solve_filter_dare(const Matrix& A, const Matrix& C, double sigma_w, double sigma_z,
                               const RiccatiOptions& options) {
  if (!(sigma_w > 0.0) || !(sigma_z > 0.0)) {
    throw Error(ErrorCode::kInvalidNoise, "noise standard deviations must be positive");
  }
  if (A.rows() != A.cols() || C.cols() != A.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "filter DARE operands A " + shape(A) + ", C " +
                                                   shape(C));
  }
  const auto n = A.rows();
  const auto m = C.rows();
  return solve_control_dare(A.transpose(), C.transpose(),
                            sigma_w * sigma_w * Matrix::Identity(n, n),
                            sigma_z * sigma_z * Matrix::Identity(m, m), options);
}

Matrix dlyap(const Matrix& X, const Matrix& Y, double tol) {
  if (X.rows() != X.cols() || Y.rows() != X.rows() || Y.cols() != X.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "dlyap operands X " + shape(X) + ", Y " + shape(Y));
  }
  const double rho = spectral_radius(X);
  if (!(rho < 1.0)) {
    throw Error(ErrorCode::kUnstableArgument,
                "dlyap requires rho(X) < 1, got " + std::to_string(rho));
  }
  // Squared Smith iteration: S_{k+1} = S_k + (X'^{2^k}) S_k X^{2^k}.
  Matrix S = symmetrize(Y);
  Matrix Xk = X;
  for (int k = 0; k < 128; ++k) {
    const Matrix increment = Xk.transpose() * S * Xk;
    S = symmetrize(S + increment);
    Xk = Xk * Xk;
    if (increment.norm() <= tol * std::max(S.norm(), 1e-300)) break;
  }
  return S;
}

Matrix controllability_matrix(const Matrix& A, const Matrix& B) {
  if (A.rows() != A.cols() || B.rows() != A.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "controllability_matrix A " + shape(A) + ", B " +
                                                   shape(B));
  }
  const auto n = A.rows();
  const auto m = B.cols();
  Matrix out(n, n * m);
  Matrix block = B;
  for (Eigen::Index k = 0; k < n; ++k) {
    out.middleCols(k * m, m) = block;
    block = A * block;
  }
  return out;
}

Matrix observability_matrix(const Matrix& A, const Matrix& C) {
  if (A.rows() != A.cols() || C.cols() != A.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "observability_matrix A " + shape(A) + ", C " +
                                                   shape(C));
  }
  const auto n = A.rows();
  const auto p = C.rows();
  Matrix out(n * p, n);
  Matrix block = C;
  for (Eigen::Index k = 0; k < n; ++k) {
    out.middleRows(k * p, p) = block;
    block = block * A;
  }
  return out;
}

int numerical_rank(const Matrix& X, double rel_tol) {
  if (X.size() == 0) return 0;
  const Vector sv = Eigen::JacobiSVD<Matrix>(X).singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > rel_tol * sv(0)) ++rank;
  }
  return rank;
}

double spectral_radius(const Matrix& X) {
  if (X.rows() != X.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "spectral_radius needs a square matrix, got " +
                                                   shape(X));
  }
  if (X.size() == 0) return 0.0;
  if (!all_finite(X)) return std::numeric_limits<double>::infinity();
  Eigen::EigenSolver<Matrix> solver(X, /*computeEigenvectors=*/false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

Matrix pseudo_inverse(const Matrix& X, double rel_tol) {
  Eigen::JacobiSVD<Matrix> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  Vector inv = Vector::Zero(sv.size());
  const double cutoff = sv.size() > 0 ? rel_tol * sv(0) : 0.0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cutoff && sv(i) > 0.0) inv(i) = 1.0 / sv(i);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Vector Rng::standard_normal(Eigen::Index n) {
  Vector z(n);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = normal();
  return z;
}

Vector sample_gaussian(const Vector& mean, const Matrix& covariance, Rng& rng) {
  const auto n = mean.size();
  if (covariance.rows() != n || covariance.cols() != n) {
    throw Error(ErrorCode::kDimensionMismatch,
                "sample_gaussian covariance " + shape(covariance) + " for mean of length " +
                    std::to_string(n));
  }
  const Vector z = rng.standard_normal(n);
  if (covariance.isZero(0.0)) return mean;

  const Matrix sym = symmetrize(covariance);
  Eigen::LLT<Matrix> llt(sym);
  if (llt.info() == Eigen::Success) return mean + llt.matrixL() * z;

  double jitter = 1e-10 * std::max(sym.trace(), 0.0) / static_cast<double>(n);
  for (int attempt = 0; attempt < 4 && jitter > 0.0; ++attempt, jitter *= 10.0) {
    llt.compute(sym + jitter * Matrix::Identity(n, n));
    if (llt.info() == Eigen::Success) return mean + llt.matrixL() * z;
  }
  throw Error(ErrorCode::kNotPsd, "covariance is not positive semi-definite");
}

}  // namespace lqg_adapt
