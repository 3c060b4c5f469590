#include "ope/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "ope/errors.hpp"

namespace ope {

void require_square(const Matrix& m, const char* where) {
  if (m.rows() != m.cols()) {
    throw DimensionError(std::string(where) + ": expected a square matrix, got " +
                         std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

void require_finite(const Matrix& m, const char* where) {
  if (!m.allFinite()) {
    throw NumericalError(std::string(where) + ": matrix has non-finite entries");
  }
}

Spectrum spectrum(const Matrix& a) {
  require_square(a, "spectrum");
  require_finite(a, "spectrum");
  Spectrum out;
  const Eigen::Index d = a.rows();
  if (d == 0) return out;
  Eigen::EigenSolver<Matrix> solver;
  solver.setMaxIterations(static_cast<Eigen::Index>(100 * d * d));
  solver.compute(a, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("spectrum: shifted QR iteration did not converge");
  }
  const auto& ev = solver.eigenvalues();
  out.eigenvalues.assign(ev.data(), ev.data() + ev.size());
  for (const auto& z : out.eigenvalues) out.spectral_radius = std::max(out.spectral_radius, std::abs(z));
  return out;
}

double spectral_radius(const Matrix& a) { return spectrum(a).spectral_radius; }

Vector singular_values(const Matrix& a) {
  require_finite(a, "singular_values");
  if (a.size() == 0) return Vector();
  Eigen::JacobiSVD<Matrix> svd(a);
  return svd.singularValues();
}

double min_singular_value(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  // A wide matrix has min(m, n) singular values; the smallest of those is
  // what the rank decisions need.
  return singular_values(a).minCoeff();
}

double op_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  return singular_values(a).maxCoeff();
}

double condition_number(const Matrix& a) {
  const Vector s = singular_values(a);
  if (s.size() == 0) return 1.0;
  const double lo = s.minCoeff();
  if (lo == 0.0) return std::numeric_limits<double>::infinity();
  return s.maxCoeff() / lo;
}

Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

Matrix solve_dlyap(const Matrix& a) {
  require_square(a, "solve_dlyap");
  require_finite(a, "solve_dlyap");
  const Eigen::Index d = a.rows();
  const double rho = spectral_radius(a);
  if (rho >= 1.0 - 1e-9) {
    throw StabilityError("solve_dlyap: no Lyapunov solution exists, spectral radius " +
                             std::to_string(rho) + " >= 1",
                         rho);
  }
  // Column-major vec: vec(A^T X A) = (A^T kron A^T) vec(X).
  const Matrix at = a.transpose();
  const Eigen::Index n = d * d;
  Matrix system = Matrix::Identity(n, n);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      system.block(i * d, j * d, d, d) -= at(i, j) * at;
    }
  }
  const Matrix identity = Matrix::Identity(d, d);
  const Vector rhs = Eigen::Map<const Vector>(identity.data(), n);
  const Vector x = system.partialPivLu().solve(rhs);
  Matrix p = Eigen::Map<const Matrix>(x.data(), d, d);
  return symmetrize(p);
}

Matrix pinv(const Matrix& a, double rank_tol) {
  require_finite(a, "pinv");
  if (a.size() == 0) return Matrix(a.cols(), a.rows());
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double cutoff = rank_tol * s.maxCoeff();
  Vector inv = Vector::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff && s(i) > 0.0) inv(i) = 1.0 / s(i);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

namespace {

Eigen::SelfAdjointEigenSolver<Matrix> spd_decompose(const Matrix& s, const char* where) {
  require_square(s, where);
  require_finite(s, where);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(s));
  if (eig.info() != Eigen::Success) throw NumericalError(std::string(where) + ": eigensolver failed");
  const double lo = s.rows() == 0 ? 1.0 : eig.eigenvalues().minCoeff();
  if (lo <= kCovarianceFloor) {
    throw SingularCovarianceError(std::string(where) + ": smallest eigenvalue " + std::to_string(lo) +
                                  " is below the covariance floor");
  }
  return eig;
}

}  // namespace

Matrix spd_inverse_sqrt(const Matrix& s) {
  const auto eig = spd_decompose(s, "spd_inverse_sqrt");
  const Vector w = eig.eigenvalues().array().rsqrt();
  return symmetrize(eig.eigenvectors() * w.asDiagonal() * eig.eigenvectors().transpose());
}

Matrix spd_sqrt(const Matrix& s) {
  const auto eig = spd_decompose(s, "spd_sqrt");
  const Vector w = eig.eigenvalues().array().sqrt();
  return symmetrize(eig.eigenvectors() * w.asDiagonal() * eig.eigenvectors().transpose());
}

double lambda_max_symmetric(const Matrix& s) {
  require_square(s, "lambda_max_symmetric");
  if (s.rows() == 0) return 0.0;
  return Eigen::SelfAdjointEigenSolver<Matrix>(symmetrize(s), Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
}

double lambda_min_symmetric(const Matrix& s) {
  require_square(s, "lambda_min_symmetric");
  if (s.rows() == 0) return 0.0;
  return Eigen::SelfAdjointEigenSolver<Matrix>(symmetrize(s), Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

std::vector<double> matrix_power_log_norms(const Matrix& a, int k_max) {
  require_square(a, "matrix_power_norms");
  require_finite(a, "matrix_power_norms");
  if (k_max < 0) throw PreconditionError("matrix_power_norms: K must be nonnegative");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(k_max) + 1);
  const double neg_inf = -std::numeric_limits<double>::infinity();
  if (a.rows() == 0) {
    out.assign(static_cast<std::size_t>(k_max) + 1, 0.0);
    return out;
  }
  Matrix power = Matrix::Identity(a.rows(), a.cols());
  double log_scale = 0.0;
  out.push_back(0.0);
  for (int k = 1; k <= k_max; ++k) {
    if (out.back() == neg_inf) {
      out.push_back(neg_inf);
      continue;
    }
    power = power * a;
    const double n = op_norm(power);
    if (n == 0.0) {
      out.push_back(neg_inf);
      continue;
    }
    log_scale += std::log(n);
    power /= n;
    out.push_back(log_scale);
  }
  return out;
}

std::vector<double> matrix_power_norms(const Matrix& a, int k_max) {
  std::vector<double> logs = matrix_power_log_norms(a, k_max);
  for (double& v : logs) v = std::exp(v);
  return logs;
}

}  // namespace ope
