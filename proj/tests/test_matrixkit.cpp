#include <catch2/catch_amalgamated.hpp>

#include <starisac/matrixkit.hpp>

#include "support/oracles.hpp"
#include "support/testutil.hpp"

using namespace starisac;
using testutil::rel_fro;

TEST_CASE("kron identity and scalar cases") {
  CMat i2 = CMat::Identity(2, 2);
  REQUIRE(rel_fro(kron(i2, i2), CMat::Identity(4, 4)) == 0.0);

  Rng rng(7);
  CMat b = random_complex_matrix(3, 2, rng);
  CMat two(1, 1);
  two(0, 0) = 2.0;
  REQUIRE(rel_fro(kron(two, b), 2.0 * b) < 1e-15);
}

TEST_CASE("kron block structure") {
  Rng rng(8);
  CMat a = random_complex_matrix(2, 3, rng);
  CMat b = random_complex_matrix(3, 2, rng);
  CMat k = kron(a, b);
  REQUIRE(k.rows() == 6);
  REQUIRE(k.cols() == 6);
  REQUIRE(rel_fro(k.block(3, 4, 3, 2), a(1, 2) * b) < 1e-15);
}

TEST_CASE("trace of four-product equals Kronecker-vec form") {
  // Tr(e f g h) = vec(h^T)^T (g^T kron e) vec(f), brute-force on both sides.
  Rng rng(11);
  for (int inst = 0; inst < 20; ++inst) {
    CMat e = random_complex_matrix(2, 2, rng);
    CMat f = random_complex_matrix(2, 2, rng);
    CMat g = random_complex_matrix(2, 2, rng);
    CMat h = random_complex_matrix(2, 2, rng);
    const cxd lhs = oracles::trace4_bruteforce(e, f, g, h);
    const CVec vh = vec(h.transpose().eval());
    const CVec vf = vec(f);
    const cxd rhs = (vh.transpose() * kron(g.transpose(), e) * vf)(0, 0);
    REQUIRE(std::abs(lhs - rhs) <= 1e-10 * (1.0 + std::abs(lhs)));
  }
}

TEST_CASE("trace cyclicity on random conformable triples") {
  Rng rng(12);
  for (int inst = 0; inst < 10; ++inst) {
    CMat a = random_complex_matrix(3, 4, rng);
    CMat b = random_complex_matrix(4, 2, rng);
    CMat c = random_complex_matrix(2, 3, rng);
    const cxd t1 = (a * b * c).trace();
    const cxd t2 = (b * c * a).trace();
    const cxd t3 = (c * a * b).trace();
    REQUIRE(std::abs(t1 - t2) <= 1e-10 * (1.0 + std::abs(t1)));
    REQUIRE(std::abs(t1 - t3) <= 1e-10 * (1.0 + std::abs(t1)));
  }
}

TEST_CASE("hadamard basics and diagonal identity") {
  Rng rng(13);
  CMat a = random_complex_matrix(3, 3, rng);
  REQUIRE(rel_fro(hadamard(a, CMat::Ones(3, 3)), a) == 0.0);
  REQUIRE(hadamard(a, CMat::Zero(3, 3)).norm() == 0.0);
  REQUIRE_THROWS_AS(hadamard(a, CMat::Ones(2, 3)), ShapeError);

  // diag(a) B diag(c) == (a c^T) o B
  CVec av = random_complex_vector(3, rng);
  CVec cv = random_complex_vector(3, rng);
  CMat b = random_complex_matrix(3, 3, rng);
  CMat lhs = av.asDiagonal() * b * cv.asDiagonal();
  CMat rhs = hadamard(av * cv.transpose(), b);
  REQUIRE(rel_fro(lhs, rhs) < 1e-14);
}

TEST_CASE("vec is column-major and invertible") {
  CMat a(2, 2);
  a << 1.0, 2.0, 3.0, 4.0;
  CVec v = vec(a);
  REQUIRE(v(0) == cxd(1.0));
  REQUIRE(v(1) == cxd(3.0));
  REQUIRE(v(2) == cxd(2.0));
  REQUIRE(v(3) == cxd(4.0));

  Rng rng(14);
  CVec col = random_complex_vector(5, rng);
  REQUIRE((vec(col) - col).norm() == 0.0);

  CMat m = random_complex_matrix(4, 4, rng);
  REQUIRE(rel_fro(unvec(vec(m), 4, 4), m) == 0.0);
}

TEST_CASE("real stacking preserves quadratic forms") {
  Rng rng(15);

  SECTION("real vector and real symmetric matrix") {
    RVec xr = RVec::Random(4);
    RMat pr = RMat::Random(4, 4);
    pr = (pr + pr.transpose()).eval();
    CVec x = xr.cast<cxd>();
    CMat p = pr.cast<cxd>();
    RMat pe = real_embedding(p);
    REQUIRE(rel_fro(pe.topLeftCorner(4, 4).cast<cxd>(), pr.cast<cxd>()) == 0.0);
    REQUIRE(pe.topRightCorner(4, 4).norm() == 0.0);
    const double lhs = std::real((x.adjoint() * p * x)(0, 0));
    const RVec xs = real_stack(x);
    const double rhs = xs.dot(pe * xs);
    REQUIRE(std::abs(lhs - rhs) <= 1e-10 * (1.0 + std::abs(lhs)));
  }

  SECTION("purely imaginary vector, Hermitian matrix") {
    CVec x = cxd(0.0, 1.0) * RVec::Random(4).cast<cxd>();
    CMat p = hermitize(random_complex_matrix(4, 4, rng));
    const cxd q = (x.adjoint() * p * x)(0, 0);
    REQUIRE(std::abs(q.imag()) < 1e-12);
    const RVec xs = real_stack(x);
    const double rhs = xs.dot(real_embedding(p) * xs);
    REQUIRE(std::abs(q.real() - rhs) <= 1e-10 * (1.0 + std::abs(q.real())));
  }

  SECTION("random complex instances") {
    for (int inst = 0; inst < 20; ++inst) {
      CVec x = random_complex_vector(4, rng);
      CMat p = hermitize(random_complex_matrix(4, 4, rng));
      const double lhs = std::real((x.adjoint() * p * x)(0, 0));
      const RVec xs = real_stack(x);
      const double rhs = xs.dot(real_embedding(p) * xs);
      REQUIRE(std::abs(lhs - rhs) <= 1e-10 * (1.0 + std::abs(lhs)));
    }
  }
}

TEST_CASE("stack round trip is exact") {
  Rng rng(16);
  CVec v = random_complex_vector(9, rng);
  REQUIRE((complex_unstack(real_stack(v)) - v).norm() <= 1e-12);
  REQUIRE(real_stack(v).size() % 2 == 0);
}

TEST_CASE("unstack_to_matrix definition cases") {
  RVec p(2);
  p << 3.5, -1.25;
  CMat m = unstack_to_matrix(p);
  REQUIRE(m.rows() == 1);
  REQUIRE(std::abs(m(0, 0) - cxd(3.5, 1.25)) < 1e-15);

  REQUIRE(unstack_to_matrix(RVec::Zero(18)).norm() == 0.0);
  REQUIRE_THROWS_AS(unstack_to_matrix(RVec::Zero(7)), ShapeError);
}

TEST_CASE("unstack_to_matrix satisfies its defining identity at L=3") {
  // Re(pbar^H vec(v v^H)) == Re(v^H S v) for the reshaped S.
  Rng rng(17);
  const Eigen::Index L = 3;
  RVec p = RVec::Random(2 * L * L);
  const CMat s = unstack_to_matrix(p);
  const CVec pbar = complex_unstack(p);
  for (int inst = 0; inst < 50; ++inst) {
    CVec v = random_complex_vector(L, rng);
    const CVec vhat = vec((v * v.adjoint()).eval());
    const double lhs = std::real(pbar.adjoint().dot(vhat.conjugate()));
    const double lhs2 = std::real((pbar.adjoint() * vhat)(0, 0));
    const double rhs = std::real((v.adjoint() * s * v)(0, 0));
    REQUIRE(std::abs(lhs2 - rhs) <= 1e-10 * (1.0 + std::abs(rhs)));
    (void)lhs;
  }
}

TEST_CASE("leading_rank1 recovers rank-one inputs") {
  Rng rng(18);
  CVec w = random_complex_vector(4, rng);
  auto rec = leading_rank1((w * w.adjoint()).eval());
  REQUIRE(rec.ratio == Catch::Approx(1.0).margin(1e-12));
  // Same canonical phase convention applied to the reference vector.
  Eigen::Index imax = 0;
  w.cwiseAbs().maxCoeff(&imax);
  CVec wc = w * (std::conj(w(imax)) / std::abs(w(imax)));
  REQUIRE((rec.vector - wc).norm() <= 1e-8 * wc.norm());
  REQUIRE(rel_fro(rec.vector * rec.vector.adjoint(), w * w.adjoint()) <= 1e-8);
}

TEST_CASE("leading_rank1 on identity reports split spectrum") {
  auto rec = leading_rank1(CMat::Identity(2, 2));
  REQUIRE(rec.ratio == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("leading_rank1 ratio matches characteristic-polynomial oracle") {
  Rng rng(19);
  for (int inst = 0; inst < 10; ++inst) {
    CMat a = random_psd(3, 3, rng);
    auto rec = leading_rank1(a);
    auto ev = oracles::hermitian3_eigenvalues(a);
    const double want = ev[2] / (ev[0] + ev[1] + ev[2]);
    REQUIRE(rec.ratio == Catch::Approx(want).epsilon(1e-8));
  }
}

TEST_CASE("leading_rank1 rejects non-Hermitian input") {
  Rng rng(20);
  CMat a = random_complex_matrix(3, 3, rng);
  a(0, 1) += cxd(1.0, 1.0);
  REQUIRE_THROWS_AS(leading_rank1(a), ValidationError);
}

namespace {
CVec identity_projection(const CVec& v) { return v; }
bool always_feasible(const CVec&) { return true; }
double norm_objective(const CVec& v) { return -v.norm(); }
}  // namespace

TEST_CASE("gaussian_randomize returns the eigenvector direction for rank-one V") {
  Rng rng(21);
  CVec w = random_complex_vector(4, rng);
  w(3) = cxd(1.0, 0.3);  // keep the last coordinate well away from zero
  CMat v_cov = w * w.adjoint();
  Rng stream(5);
  CVec got = gaussian_randomize(v_cov, identity_projection, always_feasible,
                                norm_objective, 17, stream);
  CVec want = w / w(3);
  REQUIRE((got - want).norm() <= 1e-8 * want.norm());
}

TEST_CASE("gaussian_randomize with one trial returns a projected draw") {
  CMat v_cov = CMat::Identity(3, 3);
  Rng stream(42);
  CVec got = gaussian_randomize(
      v_cov, identity_projection, always_feasible,
      [](const CVec& v) { return v.norm(); }, 1, stream);
  REQUIRE(std::abs(got(2) - cxd(1.0)) < 1e-14);
}

TEST_CASE("gaussian_randomize is a pure function of V, predicate, trials, seed") {
  CMat v_cov = CMat::Identity(3, 3);
  auto run = [&] {
    Rng stream(123);
    return gaussian_randomize(v_cov, identity_projection, always_feasible,
                              norm_objective, 500, stream);
  };
  CVec a = run();
  CVec b = run();
  REQUIRE((a - b).norm() == 0.0);
}

TEST_CASE("gaussian_randomize surfaces recovery failure with the best candidate") {
  CMat v_cov = CMat::Identity(2, 2);
  Rng stream(9);
  bool threw = false;
  try {
    gaussian_randomize(
        v_cov, identity_projection, [](const CVec&) { return false; },
        norm_objective, 25, stream);
  } catch (const RecoveryFailure& e) {
    threw = true;
    REQUIRE(e.best_candidate.size() == 2);
  }
  REQUIRE(threw);
}
