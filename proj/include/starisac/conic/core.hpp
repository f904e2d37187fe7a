#pragma once

// Core cone program solver. Standard form:
//
//   minimize    c'x
//   subject to  A x = b,   x = (x_free, x_cone),   x_cone in K
//
// where K is a product of a nonnegative orthant, second-order cones and
// real symmetric PSD cones. Solved through the homogeneous self-dual
// embedding with Nesterov-Todd scaling and a Mehrotra predictor-corrector,
// so primal or dual infeasibility comes out as a certificate instead of a
// divergence. Dense Eigen linear algebra throughout; constraint
// coefficients on PSD blocks may carry a rank-one factor list, which the
// Schur assembly exploits.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace starisac::conic {

using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

enum class CoreStatus { optimal, primal_infeasible, dual_infeasible, numerical_failure };

struct PsdCoeff {
  RMat dense;  // symmetric; zero-size when absent
  std::vector<std::pair<double, RVec>> factors;  // sum of w * u u'

  bool present() const { return dense.size() > 0 || !factors.empty(); }

  double inner(const RMat& x) const {
    double acc = 0.0;
    if (dense.size() > 0) acc += (dense.array() * x.array()).sum();
    for (const auto& [w, u] : factors) acc += w * u.dot(x * u);
    return acc;
  }

  void add_into(RMat& acc, double scale) const {
    if (dense.size() > 0) acc += scale * dense;
    for (const auto& [w, u] : factors) acc.noalias() += (scale * w) * (u * u.transpose());
  }

  RMat materialize(int side) const {
    RMat m = RMat::Zero(side, side);
    add_into(m, 1.0);
    return m;
  }
};

struct CoreRow {
  RVec free;                                  // may be zero-size
  std::vector<std::pair<int, double>> lin;    // sparse entries
  std::vector<std::pair<int, RVec>> soc;      // per-block segments
  std::vector<std::pair<int, PsdCoeff>> psd;  // per-block coefficients
};

struct CoreProblem {
  int n_free = 0;
  int n_lin = 0;
  std::vector<int> soc_dims;
  std::vector<int> psd_sides;
  std::vector<CoreRow> rows;
  RVec b;
  CoreRow cost;
  double cost_const = 0.0;

  int num_rows() const { return static_cast<int>(rows.size()); }
};

struct ConeVal {
  RVec lin;
  std::vector<RVec> soc;
  std::vector<RMat> psd;

  static ConeVal zeros(const CoreProblem& p) {
    ConeVal v;
    v.lin = RVec::Zero(p.n_lin);
    for (int d : p.soc_dims) v.soc.push_back(RVec::Zero(d));
    for (int s : p.psd_sides) v.psd.push_back(RMat::Zero(s, s));
    return v;
  }

  double dot(const ConeVal& o) const {
    double acc = lin.dot(o.lin);
    for (size_t i = 0; i < soc.size(); ++i) acc += soc[i].dot(o.soc[i]);
    for (size_t i = 0; i < psd.size(); ++i)
      acc += (psd[i].array() * o.psd[i].array()).sum();
    return acc;
  }

  double squared_norm() const { return dot(*this); }

  void axpy(double a, const ConeVal& o) {
    lin += a * o.lin;
    for (size_t i = 0; i < soc.size(); ++i) soc[i] += a * o.soc[i];
    for (size_t i = 0; i < psd.size(); ++i) psd[i] += a * o.psd[i];
  }

  void scale(double a) {
    lin *= a;
    for (auto& u : soc) u *= a;
    for (auto& m : psd) m *= a;
  }
};

struct PrimalVal {
  RVec free;
  ConeVal cone;
};

struct CoreOptions {
  double feastol = 1e-8;
  double reltol = 1e-8;
  double abstol = 1e-10;
  int max_iter = 120;
  double step_fraction = 0.99;
};

struct CoreResult {
  CoreStatus status = CoreStatus::numerical_failure;
  PrimalVal x;
  RVec y;
  ConeVal z;
  ConeVal s;
  double primal_objective = std::numeric_limits<double>::quiet_NaN();
  double gap = std::numeric_limits<double>::quiet_NaN();
  double primal_residual = std::numeric_limits<double>::quiet_NaN();
  double dual_residual = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
};

namespace detail {

inline double soc_residual(const RVec& u) { return u(0) - u.tail(u.size() - 1).norm(); }

// Largest t with point + t*dir staying in the cone; point strictly interior.
inline double soc_max_step(const RVec& point, const RVec& dir) {
  const auto jdot = [](const RVec& a, const RVec& b) {
    return a(0) * b(0) - a.tail(a.size() - 1).dot(b.tail(b.size() - 1));
  };
  const double c0 = jdot(point, point);
  const double c1 = jdot(point, dir);
  const double c2 = jdot(dir, dir);
  double alpha = std::numeric_limits<double>::infinity();
  // Roots of c2 t^2 + 2 c1 t + c0 = 0 mark the hyperbolic boundary.
  const double disc = c1 * c1 - c2 * c0;
  if (std::abs(c2) < 1e-300) {
    if (c1 < 0.0) alpha = -c0 / (2.0 * c1);
  } else if (disc >= 0.0) {
    const double sq = std::sqrt(disc);
    const double qv = -(c1 + (c1 >= 0 ? sq : -sq));
    const double r1 = qv / c2;
    const double r2 = (std::abs(qv) > 0) ? c0 / qv : -1.0;
    for (double r : {r1, r2})
      if (r > 0.0) alpha = std::min(alpha, r);
  }
  if (dir(0) < 0.0) alpha = std::min(alpha, -point(0) / dir(0));
  return alpha;
}

inline double lp_max_step(const RVec& point, const RVec& dir) {
  double alpha = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < point.size(); ++i)
    if (dir(i) < 0.0) alpha = std::min(alpha, -point(i) / dir(i));
  return alpha;
}

inline double psd_max_step(const RVec& lambda_diag, const RMat& dir) {
  const Eigen::Index n = lambda_diag.size();
  RMat m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      m(i, j) = dir(i, j) / std::sqrt(lambda_diag(i) * lambda_diag(j));
  Eigen::SelfAdjointEigenSolver<RMat> eig(0.5 * (m + m.transpose()),
                                          Eigen::EigenvaluesOnly);
  const double lmin = eig.eigenvalues()(0);
  return lmin >= 0.0 ? std::numeric_limits<double>::infinity() : -1.0 / lmin;
}

struct Scaling {
  // LP
  RVec lp_w2;      // s ./ z
  RVec lp_lambda;  // sqrt(s .* z)
  // SOC
  struct Soc {
    double beta = 1.0;
    RVec wbar;
    RVec lambda;
  };
  std::vector<Soc> soc;
  // PSD: W(M) = R^-1 M R^-T with R'SR = R^-1 Z R^-T = diag(lambda).
  struct Psd {
    RMat r;
    RMat r_inv;
    RVec lambda;
  };
  std::vector<Psd> psd;
};

inline RVec soc_apply_w(const Scaling::Soc& sc, const RVec& u, bool inverse) {
  // W u = beta (2 wbar wbar' - J) u ; W^-1 u = (1/beta)(2 J wbar wbar' J - J) u
  const Eigen::Index d = u.size();
  RVec ju(d);
  ju(0) = u(0);
  ju.tail(d - 1) = -u.tail(d - 1);
  if (!inverse) return sc.beta * (2.0 * sc.wbar * sc.wbar.dot(u) - ju);
  RVec jw(d);
  jw(0) = sc.wbar(0);
  jw.tail(d - 1) = -sc.wbar.tail(d - 1);
  return (2.0 * jw * jw.dot(u) - ju) / sc.beta;
}

inline RVec soc_jprod(const RVec& a, const RVec& b) {
  RVec out(a.size());
  out(0) = a.dot(b);
  out.tail(a.size() - 1) = a(0) * b.tail(b.size() - 1) + b(0) * a.tail(a.size() - 1);
  return out;
}

inline RVec soc_jsolve(const RVec& lam, const RVec& v) {
  const Eigen::Index d = lam.size();
  const double det = lam(0) * lam(0) - lam.tail(d - 1).squaredNorm();
  RVec out(d);
  out(0) = (lam(0) * v(0) - lam.tail(d - 1).dot(v.tail(d - 1))) / det;
  out.tail(d - 1) = (v.tail(d - 1) - out(0) * lam.tail(d - 1)) / lam(0);
  return out;
}

}  // namespace detail

class CoreSolver {
 public:
  explicit CoreSolver(const CoreProblem& p, CoreOptions opts = {})
      : p_(p), opts_(opts) {
    if (p_.num_rows() == 0)
      throw std::invalid_argument("cone program needs at least one constraint row");
    row_free_ = RMat::Zero(p_.num_rows(), p_.n_free);
    for (int i = 0; i < p_.num_rows(); ++i)
      if (p_.rows[i].free.size() > 0) row_free_.row(i) = p_.rows[i].free.transpose();
    cost_free_ = RVec::Zero(p_.n_free);
    if (p_.cost.free.size() > 0) cost_free_ = p_.cost.free;
    degree_ = p_.n_lin + static_cast<int>(p_.soc_dims.size());
    for (int s : p_.psd_sides) degree_ += s;
  }

  CoreResult solve() {
    CoreResult best;
    double best_score = std::numeric_limits<double>::infinity();
    try {
      init_point();
      for (int iter = 0; iter <= opts_.max_iter; ++iter) {
        Residuals res = residuals();
        const double mu = (s_.dot(z_) + tau_ * kappa_) / (degree_ + 1);

        const double pcost = inner_full(p_.cost, x_) / tau_;
        const double gap = s_.dot(z_) / (tau_ * tau_);
        const double relgap = gap / std::max(1.0, std::abs(pcost));
        const double pres =
            std::max(res.ry.norm() / std::max(1.0, bnorm_),
                     std::sqrt(res.rz.squared_norm())) / tau_;
        const double dres = rx_norm(res) / (tau_ * std::max(1.0, cnorm_));

        const double score = pres + dres + relgap;
        if (score < best_score) {
          best_score = score;
          best = snapshot(CoreStatus::numerical_failure, pcost, gap, pres, dres, iter);
        }

        if (pres <= opts_.feastol && dres <= opts_.feastol &&
            (gap <= opts_.abstol || relgap <= opts_.reltol))
          return snapshot(CoreStatus::optimal, pcost, gap, pres, dres, iter);

        // Infeasibility certificates from the homogeneous iterate.
        const double by = p_.b.dot(y_);
        if (by < 0.0 && dual_eq_residual() / (-by) <= opts_.feastol)
          return snapshot(CoreStatus::primal_infeasible, pcost, gap, pres, dres, iter);
        const double cx = inner_full(p_.cost, x_);
        if (cx < 0.0 && primal_ray_residual() / (-cx) <= opts_.feastol)
          return snapshot(CoreStatus::dual_infeasible, pcost, gap, pres, dres, iter);

        if (iter == opts_.max_iter) break;

        compute_scaling();
        factorize();

        PrimalVal x1;
        RVec y1;
        ConeVal z1;
        kkt_solve(negate_cost_vec(), p_.b, ConeVal::zeros(p_), x1, y1, z1);

        // Predictor.
        ConeVal ds_target = scaled_lambda_sq_neg();
        Direction aff = direction(res, x1, y1, z1, ds_target, -tau_ * kappa_);
        const double alpha_aff = std::min(1.0, max_step(aff));
        const double mu_aff = mu_after(aff, alpha_aff);
        const double sigma =
            std::pow(std::max(0.0, std::min(1.0, mu_aff / mu)), 3.0);

        // Corrector.
        ds_target = scaled_lambda_sq_neg();
        add_sigma_mu(ds_target, sigma * mu);
        ds_target.axpy(-1.0, corrector(aff));
        const double dtk = -tau_ * kappa_ + sigma * mu - aff.dtau * aff.dkappa;
        Direction dir = direction(res, x1, y1, z1, ds_target, dtk);

        const double alpha = std::min(1.0, opts_.step_fraction * max_step(dir));
        if (!std::isfinite(alpha) || alpha <= 0.0) return best;

        x_.free += alpha * dir.dx.free;
        x_.cone.axpy(alpha, dir.dx.cone);
        y_ += alpha * dir.dy;
        z_.axpy(alpha, dir.dz);
        s_.axpy(alpha, dir.ds);
        tau_ += alpha * dir.dtau;
        kappa_ += alpha * dir.dkappa;
        if (!(tau_ > 0.0) || !(kappa_ > 0.0)) return best;
      }
    } catch (const std::exception&) {
      return best;
    }
    return best;
  }

 private:
  struct Residuals {
    PrimalVal rx;  // -A'y - G'z - c tau, over free and cone coordinates
    RVec ry;       // A x - b tau
    ConeVal rz;    // s - x_cone  (h = 0)
    double rt = 0.0;
  };

  struct Direction {
    PrimalVal dx;
    RVec dy;
    ConeVal dz;
    ConeVal ds;
    double dtau = 0.0;
    double dkappa = 0.0;
  };

  double inner_full(const CoreRow& row, const PrimalVal& v) const {
    double acc = 0.0;
    if (row.free.size() > 0) acc += row.free.dot(v.free);
    for (const auto& [idx, val] : row.lin) acc += val * v.cone.lin(idx);
    for (const auto& [blk, seg] : row.soc) acc += seg.dot(v.cone.soc[blk]);
    for (const auto& [blk, cf] : row.psd) acc += cf.inner(v.cone.psd[blk]);
    return acc;
  }

  void add_row_cone(const CoreRow& row, double scale, ConeVal& acc) const {
    for (const auto& [idx, val] : row.lin) acc.lin(idx) += scale * val;
    for (const auto& [blk, seg] : row.soc) acc.soc[blk] += scale * seg;
    for (const auto& [blk, cf] : row.psd) cf.add_into(acc.psd[blk], scale);
  }

  RVec apply_a(const PrimalVal& v) const {
    RVec out(p_.num_rows());
    for (int i = 0; i < p_.num_rows(); ++i) out(i) = inner_full(p_.rows[i], v);
    return out;
  }

  void apply_at(const RVec& y, RVec& out_free, ConeVal& out_cone) const {
    out_free = row_free_.transpose() * y;
    out_cone = ConeVal::zeros(p_);
    for (int i = 0; i < p_.num_rows(); ++i) add_row_cone(p_.rows[i], y(i), out_cone);
  }

  PrimalVal negate_cost_vec() const {
    PrimalVal v;
    v.free = -cost_free_;
    v.cone = ConeVal::zeros(p_);
    add_row_cone(p_.cost, -1.0, v.cone);
    return v;
  }

  Residuals residuals() const {
    Residuals r;
    RVec at_free;
    ConeVal at_cone;
    apply_at(y_, at_free, at_cone);
    r.rx.free = -at_free - cost_free_ * tau_;
    r.rx.cone = ConeVal::zeros(p_);
    r.rx.cone.axpy(-1.0, at_cone);
    r.rx.cone.axpy(1.0, z_);
    add_row_cone(p_.cost, -tau_, r.rx.cone);
    r.ry = apply_a(x_) - p_.b * tau_;
    r.rz = s_;
    r.rz.axpy(-1.0, x_.cone);
    r.rt = kappa_ + inner_full(p_.cost, x_) + p_.b.dot(y_);
    return r;
  }

  double rx_norm(const Residuals& r) const {
    return std::sqrt(r.rx.free.squaredNorm() + r.rx.cone.squared_norm());
  }

  double dual_eq_residual() const {
    RVec at_free;
    ConeVal at_cone;
    apply_at(y_, at_free, at_cone);
    at_cone.axpy(-1.0, z_);
    return std::sqrt(at_free.squaredNorm() + at_cone.squared_norm()) /
           std::max(1.0, cnorm_);
  }

  double primal_ray_residual() const {
    const RVec ax = apply_a(x_);
    ConeVal gx = s_;
    gx.axpy(-1.0, x_.cone);
    return std::max(ax.norm() / std::max(1.0, bnorm_),
                    std::sqrt(gx.squared_norm()));
  }

  CoreResult snapshot(CoreStatus st, double pcost, double gap, double pres, double dres,
                      int iter) const {
    CoreResult r;
    r.x = x_;
    r.y = y_;
    r.z = z_;
    r.s = s_;
    if (st != CoreStatus::primal_infeasible && st != CoreStatus::dual_infeasible) {
      r.x.free /= tau_;
      r.x.cone.scale(1.0 / tau_);
      r.y /= tau_;
      r.z.scale(1.0 / tau_);
      r.s.scale(1.0 / tau_);
    }
    r.status = st;
    r.primal_objective = pcost + p_.cost_const;
    r.gap = gap;
    r.primal_residual = pres;
    r.dual_residual = dres;
    r.iterations = iter;
    return r;
  }

  void compute_scaling() {
    sc_.lp_w2.resize(p_.n_lin);
    sc_.lp_lambda.resize(p_.n_lin);
    for (int i = 0; i < p_.n_lin; ++i) {
      sc_.lp_w2(i) = s_.lin(i) / z_.lin(i);
      sc_.lp_lambda(i) = std::sqrt(s_.lin(i) * z_.lin(i));
    }
    sc_.soc.assign(p_.soc_dims.size(), {});
    for (size_t k = 0; k < p_.soc_dims.size(); ++k) {
      const RVec& s = s_.soc[k];
      const RVec& z = z_.soc[k];
      const auto jn = [](const RVec& u) {
        return std::sqrt(
            std::max(1e-300, u(0) * u(0) - u.tail(u.size() - 1).squaredNorm()));
      };
      const double a = jn(s);
      const double b = jn(z);
      const RVec st = s / a;
      const RVec zt = z / b;
      const double gamma = std::sqrt((1.0 + st.dot(zt)) / 2.0);
      RVec jz(zt.size());
      jz(0) = zt(0);
      jz.tail(zt.size() - 1) = -zt.tail(zt.size() - 1);
      auto& sc = sc_.soc[k];
      sc.wbar = (st + jz) / (2.0 * gamma);
      sc.beta = std::sqrt(a / b);
      sc.lambda = detail::soc_apply_w(sc, z, false);
    }
    sc_.psd.assign(p_.psd_sides.size(), {});
    for (size_t k = 0; k < p_.psd_sides.size(); ++k) {
      Eigen::LLT<RMat> ls(s_.psd[k]);
      Eigen::LLT<RMat> lz(z_.psd[k]);
      if (ls.info() != Eigen::Success || lz.info() != Eigen::Success)
        throw std::runtime_error("scaling: cone block lost positive definiteness");
      const RMat lsm = ls.matrixL();
      const RMat lzm = lz.matrixL();
      Eigen::BDCSVD<RMat> svd(lsm.transpose() * lzm,
                              Eigen::ComputeFullU | Eigen::ComputeFullV);
      auto& sc = sc_.psd[k];
      sc.lambda = svd.singularValues();
      if (sc.lambda.minCoeff() <= 0.0)
        throw std::runtime_error("scaling: singular NT point");
      sc.r = lzm * svd.matrixV() * sc.lambda.cwiseSqrt().cwiseInverse().asDiagonal();
      sc.r_inv = sc.lambda.cwiseSqrt().asDiagonal() * svd.matrixV().transpose() *
                 lzm.triangularView<Eigen::Lower>().solve(
                     RMat::Identity(lzm.rows(), lzm.cols()));
    }
  }

  void identity_scaling() {
    sc_.lp_w2 = RVec::Ones(p_.n_lin);
    sc_.lp_lambda = RVec::Ones(p_.n_lin);
    sc_.soc.assign(p_.soc_dims.size(), {});
    for (size_t k = 0; k < p_.soc_dims.size(); ++k) {
      auto& sc = sc_.soc[k];
      sc.beta = 1.0;
      sc.wbar = RVec::Zero(p_.soc_dims[k]);
      sc.wbar(0) = 1.0;
      sc.lambda = sc.wbar;
    }
    sc_.psd.assign(p_.psd_sides.size(), {});
    for (size_t k = 0; k < p_.psd_sides.size(); ++k) {
      auto& sc = sc_.psd[k];
      sc.r = RMat::Identity(p_.psd_sides[k], p_.psd_sides[k]);
      sc.r_inv = sc.r;
      sc.lambda = RVec::Ones(p_.psd_sides[k]);
    }
  }

  ConeVal apply_w(const ConeVal& v) const {
    ConeVal out = v;
    out.lin = sc_.lp_w2.cwiseSqrt().cwiseProduct(v.lin);
    for (size_t k = 0; k < out.soc.size(); ++k)
      out.soc[k] = detail::soc_apply_w(sc_.soc[k], v.soc[k], false);
    for (size_t k = 0; k < out.psd.size(); ++k)
      out.psd[k] = sc_.psd[k].r_inv * v.psd[k] * sc_.psd[k].r_inv.transpose();
    return out;
  }

  ConeVal apply_w_inv_t(const ConeVal& v) const {
    ConeVal out = v;
    out.lin = v.lin.cwiseQuotient(sc_.lp_w2.cwiseSqrt());
    for (size_t k = 0; k < out.soc.size(); ++k)
      out.soc[k] = detail::soc_apply_w(sc_.soc[k], v.soc[k], true);
    for (size_t k = 0; k < out.psd.size(); ++k)
      out.psd[k] = sc_.psd[k].r.transpose() * v.psd[k] * sc_.psd[k].r;
    return out;
  }

  ConeVal apply_wt(const ConeVal& v) const {
    ConeVal out = v;
    out.lin = sc_.lp_w2.cwiseSqrt().cwiseProduct(v.lin);
    for (size_t k = 0; k < out.soc.size(); ++k)
      out.soc[k] = detail::soc_apply_w(sc_.soc[k], v.soc[k], false);
    for (size_t k = 0; k < out.psd.size(); ++k)
      out.psd[k] = sc_.psd[k].r_inv.transpose() * v.psd[k] * sc_.psd[k].r_inv;
    return out;
  }

  ConeVal apply_w2(const ConeVal& v) const {
    ConeVal out = v;
    out.lin = sc_.lp_w2.cwiseProduct(v.lin);
    for (size_t k = 0; k < out.soc.size(); ++k)
      out.soc[k] = detail::soc_apply_w(
          sc_.soc[k], detail::soc_apply_w(sc_.soc[k], v.soc[k], false), false);
    for (size_t k = 0; k < out.psd.size(); ++k) {
      const RMat tinv = sc_.psd[k].r_inv.transpose() * sc_.psd[k].r_inv;
      out.psd[k] = tinv * v.psd[k] * tinv;
    }
    return out;
  }

  ConeVal scaled_lambda_sq_neg() const {
    ConeVal out;
    out.lin = -sc_.lp_lambda.cwiseProduct(sc_.lp_lambda);
    for (const auto& sc : sc_.soc)
      out.soc.push_back(-detail::soc_jprod(sc.lambda, sc.lambda));
    for (const auto& sc : sc_.psd)
      out.psd.push_back(-RMat(sc.lambda.cwiseProduct(sc.lambda).asDiagonal()));
    return out;
  }

  void add_sigma_mu(ConeVal& v, double sm) const {
    v.lin.array() += sm;
    for (auto& u : v.soc) u(0) += sm;
    for (auto& m : v.psd) m.diagonal().array() += sm;
  }

  ConeVal lambda_solve(const ConeVal& v) const {
    ConeVal out = v;
    out.lin = v.lin.cwiseQuotient(sc_.lp_lambda);
    for (size_t k = 0; k < out.soc.size(); ++k)
      out.soc[k] = detail::soc_jsolve(sc_.soc[k].lambda, v.soc[k]);
    for (size_t k = 0; k < out.psd.size(); ++k) {
      const RVec& lam = sc_.psd[k].lambda;
      for (Eigen::Index i = 0; i < out.psd[k].rows(); ++i)
        for (Eigen::Index j = 0; j < out.psd[k].cols(); ++j)
          out.psd[k](i, j) = 2.0 * v.psd[k](i, j) / (lam(i) + lam(j));
    }
    return out;
  }

  ConeVal jordan_product(const ConeVal& a, const ConeVal& b) const {
    ConeVal out;
    out.lin = a.lin.cwiseProduct(b.lin);
    for (size_t k = 0; k < a.soc.size(); ++k)
      out.soc.push_back(detail::soc_jprod(a.soc[k], b.soc[k]));
    for (size_t k = 0; k < a.psd.size(); ++k)
      out.psd.push_back(0.5 * (a.psd[k] * b.psd[k] + b.psd[k] * a.psd[k]));
    return out;
  }

  void factorize() {
    const int m = p_.num_rows();
    const int nf = p_.n_free;
    RMat h = RMat::Zero(m, m);

    if (p_.n_lin > 0) {
      for (int i = 0; i < m; ++i)
        for (const auto& [ci, vi] : p_.rows[i].lin)
          for (int j = i; j < m; ++j)
            for (const auto& [cj, vj] : p_.rows[j].lin)
              if (ci == cj) h(i, j) += vi * vj * sc_.lp_w2(ci);
    }

    for (size_t k = 0; k < p_.soc_dims.size(); ++k) {
      std::vector<std::pair<int, RVec>> scaled;
      for (int i = 0; i < m; ++i)
        for (const auto& [blk, seg] : p_.rows[i].soc)
          if (blk == static_cast<int>(k))
            scaled.emplace_back(i, detail::soc_apply_w(sc_.soc[k], seg, false));
      for (size_t a = 0; a < scaled.size(); ++a)
        for (size_t b = a; b < scaled.size(); ++b)
          h(std::min(scaled[a].first, scaled[b].first),
            std::max(scaled[a].first, scaled[b].first)) +=
              scaled[a].second.dot(scaled[b].second);
    }

    // PSD blocks: H_ij += Tr(Ai T Aj T), T = R^-T R^-1. Factored parts go
    // through one gram matrix of T-mapped factor vectors; dense parts through
    // explicit congruences (rare rows).
    for (size_t k = 0; k < p_.psd_sides.size(); ++k) {
      const int kk = static_cast<int>(k);
      const RMat tinv = sc_.psd[k].r_inv.transpose() * sc_.psd[k].r_inv;
      struct Fac {
        int row;
        double w;
      };
      std::vector<Fac> fmeta;
      std::vector<const RVec*> fvecs;
      std::vector<std::pair<int, const PsdCoeff*>> block_rows;
      for (int i = 0; i < m; ++i)
        for (const auto& [blk, cf] : p_.rows[i].psd) {
          if (blk != kk) continue;
          block_rows.emplace_back(i, &cf);
          for (const auto& [w, u] : cf.factors) {
            fmeta.push_back({i, w});
            fvecs.push_back(&u);
          }
        }
      if (!fvecs.empty()) {
        RMat fstack(p_.psd_sides[k], static_cast<int>(fvecs.size()));
        for (size_t a = 0; a < fvecs.size(); ++a) fstack.col(a) = *fvecs[a];
        const RMat gram = fstack.transpose() * (tinv * fstack);
        for (size_t a = 0; a < fvecs.size(); ++a)
          for (size_t b = 0; b < fvecs.size(); ++b) {
            if (fmeta[a].row > fmeta[b].row) continue;
            h(fmeta[a].row, fmeta[b].row) +=
                fmeta[a].w * fmeta[b].w * gram(a, b) * gram(a, b);
          }
      }
      for (const auto& [i, cfi] : block_rows) {
        if (cfi->dense.size() == 0) continue;
        const RMat y = tinv * cfi->dense * tinv;
        for (const auto& [j, cfj] : block_rows) {
          // dense_i x factors_j for all j; dense_i x dense_j counted once;
          // the self pair needs its dense/factor cross term twice.
          double fpart = 0.0;
          for (const auto& [w, u] : cfj->factors) fpart += w * u.dot(y * u);
          double v = (i == j ? 2.0 : 1.0) * fpart;
          if (cfj->dense.size() > 0 && j >= i)
            v += (cfj->dense.array() * y.array()).sum();
          if (v != 0.0) h(std::min(i, j), std::max(i, j)) += v;
        }
      }
    }

    RMat saddle = RMat::Zero(m + nf, m + nf);
    saddle.topLeftCorner(m, m) = -RMat(h.selfadjointView<Eigen::Upper>());
    const double reg = 1e-12 * (1.0 + h.diagonal().cwiseAbs().maxCoeff());
    saddle.topLeftCorner(m, m).diagonal().array() -= reg;
    if (nf > 0) {
      saddle.topRightCorner(m, nf) = row_free_;
      saddle.bottomLeftCorner(nf, m) = row_free_.transpose();
      saddle.bottomRightCorner(nf, nf).diagonal().array() += reg;
    }
    lu_.compute(saddle);
  }

  // Solves  A'uy + G'uz = bx ;  A ux = by ;  G ux - W'W uz = bz.
  void kkt_solve(const PrimalVal& bx, const RVec& by, const ConeVal& bz, PrimalVal& ux,
                 RVec& uy, ConeVal& uz) const {
    const int m = p_.num_rows();
    const int nf = p_.n_free;
    const ConeVal w2bx = apply_w2(bx.cone);
    RVec rhs(m + nf);
    for (int i = 0; i < m; ++i) {
      double acc = by(i);
      const CoreRow& row = p_.rows[i];
      for (const auto& [ci, vi] : row.lin) acc += vi * (bz.lin(ci) - w2bx.lin(ci));
      for (const auto& [blk, seg] : row.soc) acc += seg.dot(bz.soc[blk] - w2bx.soc[blk]);
      for (const auto& [blk, cf] : row.psd)
        acc += cf.inner(bz.psd[blk]) - cf.inner(w2bx.psd[blk]);
      rhs(i) = acc;
    }
    if (nf > 0) rhs.tail(nf) = bx.free;
    const RVec sol = lu_.solve(rhs);
    uy = sol.head(m);
    ux.free = nf > 0 ? RVec(sol.tail(nf)) : RVec(0);
    uz = ConeVal::zeros(p_);
    for (int i = 0; i < m; ++i) add_row_cone(p_.rows[i], uy(i), uz);
    uz.axpy(-1.0, bx.cone);
    ux.cone = apply_w2(uz);
    ux.cone.scale(-1.0);
    ux.cone.axpy(-1.0, bz);
  }

  Direction direction(const Residuals& res, const PrimalVal& x1, const RVec& y1,
                      const ConeVal& z1, const ConeVal& ds_target, double dtk_target) {
    Direction d;
    const ConeVal wls = apply_wt(lambda_solve(ds_target));
    PrimalVal bx;
    bx.free = res.rx.free;
    bx.cone = res.rx.cone;
    ConeVal bz = ConeVal::zeros(p_);
    bz.axpy(-1.0, res.rz);
    bz.axpy(-1.0, wls);
    PrimalVal x2;
    RVec y2;
    ConeVal z2;
    kkt_solve(bx, -res.ry, bz, x2, y2, z2);

    const double cx1 = inner_full(p_.cost, x1);
    const double cx2 = inner_full(p_.cost, x2);
    const double denom = cx1 + p_.b.dot(y1) - kappa_ / tau_;
    d.dtau = (-res.rt - dtk_target / tau_ - (cx2 + p_.b.dot(y2))) / denom;

    d.dx.free = x2.free + d.dtau * x1.free;
    d.dx.cone = x2.cone;
    d.dx.cone.axpy(d.dtau, x1.cone);
    d.dy = y2 + d.dtau * y1;
    d.dz = z2;
    d.dz.axpy(d.dtau, z1);
    d.ds = wls;
    const ConeVal w2dz = apply_w2(d.dz);
    d.ds.axpy(-1.0, w2dz);
    d.dkappa = (dtk_target - kappa_ * d.dtau) / tau_;
    return d;
  }

  ConeVal corrector(const Direction& aff) const {
    return jordan_product(apply_w_inv_t(aff.ds), apply_w(aff.dz));
  }

  double max_step(const Direction& d) const {
    const ConeVal ds_sc = apply_w_inv_t(d.ds);
    const ConeVal dz_sc = apply_w(d.dz);
    double alpha = detail::lp_max_step(sc_.lp_lambda, ds_sc.lin);
    alpha = std::min(alpha, detail::lp_max_step(sc_.lp_lambda, dz_sc.lin));
    for (size_t k = 0; k < p_.soc_dims.size(); ++k) {
      alpha = std::min(alpha, detail::soc_max_step(sc_.soc[k].lambda, ds_sc.soc[k]));
      alpha = std::min(alpha, detail::soc_max_step(sc_.soc[k].lambda, dz_sc.soc[k]));
    }
    for (size_t k = 0; k < p_.psd_sides.size(); ++k) {
      alpha = std::min(alpha, detail::psd_max_step(sc_.psd[k].lambda, ds_sc.psd[k]));
      alpha = std::min(alpha, detail::psd_max_step(sc_.psd[k].lambda, dz_sc.psd[k]));
    }
    if (d.dtau < 0.0) alpha = std::min(alpha, -tau_ / d.dtau);
    if (d.dkappa < 0.0) alpha = std::min(alpha, -kappa_ / d.dkappa);
    return alpha;
  }

  double mu_after(const Direction& d, double a) const {
    ConeVal s2 = s_;
    s2.axpy(a, d.ds);
    ConeVal z2 = z_;
    z2.axpy(a, d.dz);
    const double tk = (tau_ + a * d.dtau) * (kappa_ + a * d.dkappa);
    return (s2.dot(z2) + tk) / (degree_ + 1);
  }

  void init_point() {
    bnorm_ = p_.b.norm();
    ConeVal ccone = ConeVal::zeros(p_);
    add_row_cone(p_.cost, 1.0, ccone);
    cnorm_ = std::sqrt(ccone.squared_norm() + cost_free_.squaredNorm());

    identity_scaling();
    factorize();
    PrimalVal bx0;
    bx0.free = RVec::Zero(p_.n_free);
    bx0.cone = ConeVal::zeros(p_);
    PrimalVal xh;
    RVec yh;
    ConeVal zh;
    kkt_solve(bx0, p_.b, ConeVal::zeros(p_), xh, yh, zh);
    x_ = xh;
    s_ = x_.cone;
    shift_into_interior(s_);
    PrimalVal xt;
    RVec yt;
    ConeVal zt;
    kkt_solve(negate_cost_vec(), RVec::Zero(p_.num_rows()), ConeVal::zeros(p_), xt, yt,
              zt);
    y_ = yt;
    z_ = zt;
    shift_into_interior(z_);
    tau_ = 1.0;
    kappa_ = 1.0;
  }

  void shift_into_interior(ConeVal& v) const {
    double worst = 0.0;
    if (v.lin.size() > 0) worst = std::min(worst, v.lin.minCoeff());
    for (const auto& u : v.soc) worst = std::min(worst, detail::soc_residual(u));
    for (const auto& mtx : v.psd) {
      Eigen::SelfAdjointEigenSolver<RMat> eig(0.5 * (mtx + mtx.transpose()),
                                              Eigen::EigenvaluesOnly);
      worst = std::min(worst, eig.eigenvalues()(0));
    }
    if (worst > 1e-8) return;
    const double shift = 1.0 - worst;
    v.lin.array() += shift;
    for (auto& u : v.soc) u(0) += shift;
    for (auto& mtx : v.psd) mtx.diagonal().array() += shift;
  }

  const CoreProblem& p_;
  CoreOptions opts_;
  RMat row_free_;
  RVec cost_free_;
  int degree_ = 0;
  double bnorm_ = 0.0, cnorm_ = 0.0;

  PrimalVal x_;
  RVec y_;
  ConeVal z_, s_;
  double tau_ = 1.0, kappa_ = 1.0;
  detail::Scaling sc_;
  Eigen::PartialPivLU<RMat> lu_;
};

inline CoreResult solve_core(const CoreProblem& p, CoreOptions opts = {}) {
  CoreSolver solver(p, opts);
  return solver.solve();
}

}  // namespace starisac::conic
