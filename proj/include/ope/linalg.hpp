#pragma once

// Dense small-matrix numerics shared by every module. Dimensions are
// expected to stay at d <= 64; all routines are dense and cubic (or worse).

#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace ope {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Relative rank tolerance used wherever a pseudoinverse or rank decision is made.
inline constexpr double kDefaultRankTol = 1e-10;

/// Eigenvalue threshold below which a covariance is treated as singular.
inline constexpr double kCovarianceFloor = 1e-12;

struct Spectrum {
  std::vector<std::complex<double>> eigenvalues;
  double spectral_radius = 0.0;
};

/// Throws DimensionError if `m` is not square, NumericalError on NaN/Inf entries.
void require_square(const Matrix& m, const char* where);
void require_finite(const Matrix& m, const char* where);

/// Eigenvalues via Hessenberg reduction and shifted QR (100 d^2 iteration cap).
Spectrum spectrum(const Matrix& a);
double spectral_radius(const Matrix& a);

Vector singular_values(const Matrix& a);
double min_singular_value(const Matrix& a);
double op_norm(const Matrix& a);
/// sigma_max / sigma_min; infinity for singular input.
double condition_number(const Matrix& a);

/// Solves X = A^T X A + I. Throws StabilityError when rho(A) >= 1 - 1e-9.
Matrix solve_dlyap(const Matrix& a);

/// Moore-Penrose pseudoinverse; singular values below rank_tol * sigma_max are dropped.
Matrix pinv(const Matrix& a, double rank_tol = kDefaultRankTol);

/// S^{-1/2} and S^{1/2} for symmetric positive definite S.
/// Throw SingularCovarianceError if lambda_min(S) <= 1e-12.
Matrix spd_inverse_sqrt(const Matrix& s);
Matrix spd_sqrt(const Matrix& s);

double lambda_max_symmetric(const Matrix& s);
double lambda_min_symmetric(const Matrix& s);

/// ||A^k||_op for k = 0..K. Powers are renormalized as they are formed so that
/// the running product never overflows; the returned norms may still be inf
/// when the true value exceeds the double range.
std::vector<double> matrix_power_norms(const Matrix& a, int k_max);

/// Same as matrix_power_norms but returns log ||A^k|| (-inf for a zero power).
std::vector<double> matrix_power_log_norms(const Matrix& a, int k_max);

Matrix symmetrize(const Matrix& a);

}  // namespace ope
