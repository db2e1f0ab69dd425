#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "sdidkit/error.hpp"

namespace sdidkit {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Least-squares fit with the pieces needed for sandwich variances.
struct OlsFit {
  VectorXd coef;
  VectorXd resid;
  MatrixXd bread;  // (X'X)^{-1}
  double rss = 0.0;
  Index n = 0;
  Index k = 0;
};

namespace detail {

/// First column (in order) that lies in the span of the columns before it.
inline Index first_dependent_column(const MatrixXd& x, double rel_tol = 1e-10) {
  MatrixXd basis(x.rows(), x.cols());
  Index rank = 0;
  for (Index j = 0; j < x.cols(); ++j) {
    VectorXd v = x.col(j);
    const double norm0 = v.norm();
    for (int pass = 0; pass < 2; ++pass)
      for (Index b = 0; b < rank; ++b) v -= basis.col(b).dot(v) * basis.col(b);
    const double norm1 = v.norm();
    if (norm0 == 0.0 || norm1 <= rel_tol * norm0) return j;
    basis.col(rank++) = v / norm1;
  }
  return -1;
}

}  // namespace detail

/// Ordinary least squares via column-pivoted Householder QR.
///
/// Throws IdentificationError naming the first column that is collinear with the
/// columns before it. `names` may be empty, in which case columns are numbered.
inline OlsFit ols_fit(const MatrixXd& x, const VectorXd& y, const std::vector<std::string>& names = {}) {
  if (x.rows() != y.size()) throw InputError("design and response lengths differ");
  if (x.rows() < x.cols()) throw IdentificationError("fewer observations than regressors");
  Eigen::ColPivHouseholderQR<MatrixXd> qr(x);
  qr.setThreshold(1e-11);
  if (qr.rank() < x.cols()) {
    Index j = detail::first_dependent_column(x);
    if (j < 0) j = qr.colsPermutation().indices()(x.cols() - 1);
    const std::string label =
        j < static_cast<Index>(names.size()) ? names[static_cast<std::size_t>(j)] : "column " + std::to_string(j);
    throw IdentificationError("rank-deficient design: '" + label + "' is collinear with earlier columns");
  }
  OlsFit fit;
  fit.n = x.rows();
  fit.k = x.cols();
  fit.coef = qr.solve(y);
  fit.resid = y - x * fit.coef;
  fit.rss = fit.resid.squaredNorm();
  // (X'X)^{-1} = P R^{-1} R^{-T} P'
  const Index k = x.cols();
  MatrixXd r = qr.matrixR().topLeftCorner(k, k).template triangularView<Eigen::Upper>();
  MatrixXd rinv = r.template triangularView<Eigen::Upper>().solve(MatrixXd::Identity(k, k));
  MatrixXd inner = rinv * rinv.transpose();
  const auto& perm = qr.colsPermutation();
  fit.bread = perm * inner * perm.transpose();
  return fit;
}

/// Classical homoskedastic covariance s^2 (X'X)^{-1}.
inline MatrixXd classical_vcov(const OlsFit& fit) {
  const double s2 = fit.rss / static_cast<double>(fit.n - fit.k);
  return s2 * fit.bread;
}

/// Symmetric (pseudo-)inverse square root of a symmetric PSD matrix. Eigenvalues
/// below `tol` times the largest are treated as zero; `rank_out` receives the
/// number of retained eigenvalues.
inline MatrixXd sym_inverse_sqrt(const MatrixXd& a, double tol, Index* rank_out = nullptr) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(a);
  const VectorXd& ev = es.eigenvalues();
  const double top = std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
  VectorXd d(ev.size());
  Index rank = 0;
  for (Index i = 0; i < ev.size(); ++i) {
    if (ev(i) > tol * top) {
      d(i) = 1.0 / std::sqrt(ev(i));
      ++rank;
    } else {
      d(i) = 0.0;
    }
  }
  if (rank_out) *rank_out = rank;
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

inline double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>{}, p);
}

inline double student_t_quantile(double p, double df) {
  return boost::math::quantile(boost::math::students_t_distribution<double>{df}, p);
}

/// Upper-tail probability of an F(df1, df2) statistic.
inline double f_upper_tail(double f, double df1, double df2) {
  if (!(f > 0.0)) return 1.0;
  if (!std::isfinite(f)) return 0.0;
  return std::clamp(boost::math::cdf(boost::math::complement(boost::math::fisher_f_distribution<double>{df1, df2}, f)),
                    0.0, 1.0);
}

inline double chi_squared_upper_tail(double x, double df) {
  if (!(x > 0.0)) return 1.0;
  if (!std::isfinite(x)) return 0.0;
  return std::clamp(boost::math::cdf(boost::math::complement(boost::math::chi_squared_distribution<double>{df}, x)),
                    0.0, 1.0);
}

}  // namespace sdidkit
