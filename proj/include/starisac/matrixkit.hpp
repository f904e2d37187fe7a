#pragma once

// Complex-matrix utilities shared by the channel model and the optimization
// algorithms: Kronecker/Hadamard products, column-major vectorization,
// real/imaginary stacking, Hermitian rank-one recovery and Gaussian
// randomization. All functions are pure; RNG streams are explicit arguments.

#include <Eigen/Dense>

#include <complex>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace starisac {

using cxd  = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;
using Rng  = std::mt19937_64;

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Unit-variance circularly symmetric complex Gaussian draw.
inline cxd cgauss(Rng& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  const double re = n01(rng);
  const double im = n01(rng);
  return cxd(re, im) / std::sqrt(2.0);
}

inline CMat random_complex_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  CMat m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = cgauss(rng);
  return m;
}

inline CVec random_complex_vector(Eigen::Index n, Rng& rng) {
  return random_complex_matrix(n, 1, rng);
}

/// Random Hermitian PSD matrix assembled from `rank` outer products.
inline CMat random_psd(Eigen::Index n, Eigen::Index rank, Rng& rng) {
  CMat a = CMat::Zero(n, n);
  for (Eigen::Index r = 0; r < rank; ++r) {
    CVec u = random_complex_vector(n, rng);
    a += u * u.adjoint();
  }
  return a;
}

inline CMat kron(const CMat& a, const CMat& b) {
  CMat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline CMat hadamard(const CMat& a, const CMat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError("hadamard: operands must have equal dimensions");
  return a.cwiseProduct(b);
}

/// Column-major vectorization.
inline CVec vec(const CMat& a) {
  return Eigen::Map<const CVec>(a.data(), a.size());
}

inline CMat unvec(const CVec& v, Eigen::Index rows, Eigen::Index cols) {
  if (v.size() != rows * cols) throw ShapeError("unvec: size mismatch");
  return Eigen::Map<const CMat>(v.data(), rows, cols);
}

/// [Re(p); Im(p)] stacking of a complex vector.
inline RVec real_stack(const CVec& p) {
  RVec out(2 * p.size());
  out.head(p.size()) = p.real();
  out.tail(p.size()) = p.imag();
  return out;
}

inline CVec complex_unstack(const RVec& v) {
  if (v.size() % 2 != 0) throw ShapeError("complex_unstack: length must be even");
  const Eigen::Index n = v.size() / 2;
  CVec out(n);
  out.real() = v.head(n);
  out.imag() = v.tail(n);
  return out;
}

/// Real embedding [[Re P, -Im P], [Im P, Re P]] of a square complex matrix.
/// For Hermitian P the embedding is symmetric and satisfies
/// real_stack(v)' * real_embedding(P) * real_stack(v) == v' P v.
inline RMat real_embedding(const CMat& p) {
  if (p.rows() != p.cols()) throw ShapeError("real_embedding: matrix must be square");
  const Eigen::Index n = p.rows();
  RMat out(2 * n, 2 * n);
  out.topLeftCorner(n, n) = p.real();
  out.topRightCorner(n, n) = -p.imag();
  out.bottomLeftCorner(n, n) = p.imag();
  out.bottomRightCorner(n, n) = p.real();
  return out;
}

/// Converts a stacked real vector p (length 2*L^2) into the L x L matrix S
/// with Re(pbar^H vec(v v^H)) == Re(v^H S v) for every v, where
/// pbar^H = p(1:L^2)^T - j p(L^2+1:2L^2)^T.
inline CMat unstack_to_matrix(const RVec& p) {
  const auto len = static_cast<double>(p.size());
  const auto side = static_cast<Eigen::Index>(std::llround(std::sqrt(len / 2.0)));
  if (2 * side * side != p.size())
    throw ShapeError("unstack_to_matrix: length must be 2*L^2");
  const CVec pbar = complex_unstack(p);
  return unvec(pbar, side, side).adjoint();
}

inline CMat hermitize(const CMat& a) { return 0.5 * (a + a.adjoint()); }

inline bool is_hermitian(const CMat& a, double tol_scale = 1e-10) {
  if (a.rows() != a.cols()) return false;
  const double dev = (a - a.adjoint().eval()).cwiseAbs().maxCoeff();
  return dev <= tol_scale * (1.0 + a.norm());
}

struct RankOneRecovery {
  CVec vector;   // sqrt(lambda_1) * u_1, phase-canonicalized
  double ratio;  // lambda_1 / trace
};

/// Leading eigenpair of a Hermitian PSD matrix, scaled so that
/// vector * vector^H approximates the input when it is near rank one.
/// The recovered vector is rotated so its largest-magnitude entry is
/// real nonnegative.
inline RankOneRecovery leading_rank1(const CMat& a) {
  if (!is_hermitian(a)) throw ValidationError("leading_rank1: input is not Hermitian");
  const CMat h = hermitize(a);
  Eigen::SelfAdjointEigenSolver<CMat> eig(h);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("leading_rank1: eigendecomposition failed");
  const Eigen::Index n = h.rows();
  const double lmax = std::max(eig.eigenvalues()(n - 1), 0.0);
  const double tr = h.real().trace();
  RankOneRecovery out;
  if (tr <= 0.0 || lmax <= 0.0) {
    out.vector = CVec::Zero(n);
    out.ratio = 0.0;
    return out;
  }
  CVec v = std::sqrt(lmax) * eig.eigenvectors().col(n - 1);
  Eigen::Index imax = 0;
  v.cwiseAbs().maxCoeff(&imax);
  const double mag = std::abs(v(imax));
  if (mag > 0.0) v *= std::conj(v(imax)) / mag;
  out.vector = v;
  out.ratio = lmax / tr;
  return out;
}

struct RecoveryFailure : std::runtime_error {
  CVec best_candidate;
  double best_objective;
  RecoveryFailure(std::string msg, CVec candidate, double objective)
      : std::runtime_error(std::move(msg)),
        best_candidate(std::move(candidate)),
        best_objective(objective) {}
};

/// Gaussian randomization over CN(0, V). Each candidate is rescaled so its
/// last coordinate equals one (matching the [v; 1] lifting), passed through
/// `project`, and scored with `objective` when `feasible` accepts it. The
/// best feasible candidate wins; the leading eigenvector is always evaluated
/// as candidate zero. Deterministic for a fixed seed.
inline CVec gaussian_randomize(const CMat& v_cov,
                               const std::function<CVec(const CVec&)>& project,
                               const std::function<bool(const CVec&)>& feasible,
                               const std::function<double(const CVec&)>& objective,
                               int trials, Rng& rng) {
  if (trials < 1) throw ValidationError("gaussian_randomize: trials must be >= 1");
  if (!is_hermitian(v_cov)) throw ValidationError("gaussian_randomize: V is not Hermitian");
  const CMat h = hermitize(v_cov);
  Eigen::SelfAdjointEigenSolver<CMat> eig(h);
  const Eigen::Index n = h.rows();
  const double floor_lam = 1e-12 * std::max(eig.eigenvalues()(n - 1), 0.0);
  CMat sampler(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double lam = eig.eigenvalues()(i) > floor_lam ? eig.eigenvalues()(i) : 0.0;
    sampler.col(i) = std::sqrt(lam) * eig.eigenvectors().col(i);
  }

  bool have_feasible = false;
  CVec best = CVec::Zero(n);
  double best_obj = -std::numeric_limits<double>::infinity();
  CVec best_any = CVec::Zero(n);
  double best_any_obj = -std::numeric_limits<double>::infinity();

  auto consider = [&](const CVec& raw) {
    const double scale = raw.norm();
    if (scale <= 0.0) return;
    if (std::abs(raw(n - 1)) < 1e-12 * scale) return;
    CVec cand = project(raw / raw(n - 1));
    const double obj = objective(cand);
    if (feasible(cand)) {
      if (!have_feasible || obj > best_obj) {
        best = cand;
        best_obj = obj;
        have_feasible = true;
      }
    } else if (obj > best_any_obj) {
      best_any = cand;
      best_any_obj = obj;
    }
  };

  const double lmax = std::max(eig.eigenvalues()(n - 1), 0.0);
  if (lmax > 0.0) consider(std::sqrt(lmax) * eig.eigenvectors().col(n - 1));
  for (int t = 0; t < trials; ++t) {
    CVec draw(n);
    for (Eigen::Index i = 0; i < n; ++i) draw(i) = cgauss(rng);
    consider(sampler * draw);
  }
  if (!have_feasible)
    throw RecoveryFailure("gaussian_randomize: no feasible candidate found", best_any,
                          best_any_obj);
  return best;
}

}  // namespace starisac
