#pragma once

#include <starisac/matrixkit.hpp>

#include <cmath>

namespace testutil {

using starisac::CMat;
using starisac::CVec;
using starisac::Rng;
using starisac::cxd;

inline double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(1.0, std::abs(want));
}

inline double rel_fro(const CMat& got, const CMat& want) {
  const double denom = std::max(1e-300, want.norm());
  return (got - want).norm() / denom;
}

// Hermitian matrix with a prescribed spectrum, random eigenbasis.
inline CMat hermitian_with_spectrum(const Eigen::VectorXd& evals, Rng& rng) {
  const Eigen::Index n = evals.size();
  CMat g = starisac::random_complex_matrix(n, n, rng);
  Eigen::HouseholderQR<CMat> qr(g);
  CMat q = qr.householderQ();
  return q * evals.asDiagonal() * q.adjoint();
}

}  // namespace testutil
