#include "archmat/mma.hpp"

#include <algorithm>
#include <cmath>

namespace archmat {

namespace {

struct Subproblem {
  int n, m;
  Vec low, upp, alfa, beta, p0, q0;
  Mat p, q;
  double a0;
  Vec a, b, c, d;
};

struct Point {
  Vec x, y;
  double z;
  Vec lam, xsi, eta, mu;
  double zet;
  Vec s;
};

Vec residual(const Subproblem& sp, const Point& pt, double epsi) {
  const Vec ux1 = sp.upp - pt.x, xl1 = pt.x - sp.low;
  const Vec plam = sp.p0 + sp.p.transpose() * pt.lam;
  const Vec qlam = sp.q0 + sp.q.transpose() * pt.lam;
  const Vec gvec = sp.p * ux1.cwiseInverse() + sp.q * xl1.cwiseInverse();
  const Vec dpsidx = plam.cwiseQuotient(ux1.cwiseProduct(ux1)) - qlam.cwiseQuotient(xl1.cwiseProduct(xl1));
  const int n = sp.n, m = sp.m;
  Vec r(3 * n + 4 * m + 2);
  r.segment(0, n) = dpsidx - pt.xsi + pt.eta;
  r.segment(n, m) = sp.c + sp.d.cwiseProduct(pt.y) - pt.mu - pt.lam;
  r(n + m) = sp.a0 - pt.zet - sp.a.dot(pt.lam);
  r.segment(n + m + 1, m) = gvec - sp.a * pt.z - pt.y + pt.s - sp.b;
  r.segment(n + 2 * m + 1, n) = pt.xsi.cwiseProduct(pt.x - sp.alfa).array() - epsi;
  r.segment(2 * n + 2 * m + 1, n) = pt.eta.cwiseProduct(sp.beta - pt.x).array() - epsi;
  r.segment(3 * n + 2 * m + 1, m) = pt.mu.cwiseProduct(pt.y).array() - epsi;
  r(3 * n + 3 * m + 1) = pt.zet * pt.z - epsi;
  r.segment(3 * n + 3 * m + 2, m) = pt.lam.cwiseProduct(pt.s).array() - epsi;
  return r;
}

double max_ratio(const Vec& step, const Vec& base, double sign) {
  double best = 0.0;
  for (Eigen::Index i = 0; i < step.size(); ++i) best = std::max(best, sign * 1.01 * step(i) / base(i));
  return best;
}

// Primal-dual interior point solve of the MMA subproblem.
Point subsolv(const Subproblem& sp, double epsimin) {
  const int n = sp.n, m = sp.m;
  Point pt;
  pt.x = 0.5 * (sp.alfa + sp.beta);
  pt.y = Vec::Ones(m);
  pt.z = 1.0;
  pt.lam = Vec::Ones(m);
  pt.xsi = (pt.x - sp.alfa).cwiseInverse().cwiseMax(1.0);
  pt.eta = (sp.beta - pt.x).cwiseInverse().cwiseMax(1.0);
  pt.mu = (0.5 * sp.c).cwiseMax(1.0);
  pt.zet = 1.0;
  pt.s = Vec::Ones(m);

  double epsi = 1.0;
  while (epsi > epsimin) {
    Vec res = residual(sp, pt, epsi);
    double resnorm = res.norm();
    double resmax = res.cwiseAbs().maxCoeff();
    for (int it = 0; it < 200 && resmax > 0.9 * epsi; ++it) {
      const Vec ux1 = sp.upp - pt.x, xl1 = pt.x - sp.low;
      const Vec ux2 = ux1.cwiseProduct(ux1), xl2 = xl1.cwiseProduct(xl1);
      const Vec ux3 = ux1.cwiseProduct(ux2), xl3 = xl1.cwiseProduct(xl2);
      const Vec plam = sp.p0 + sp.p.transpose() * pt.lam;
      const Vec qlam = sp.q0 + sp.q.transpose() * pt.lam;
      const Vec gvec = sp.p * ux1.cwiseInverse() + sp.q * xl1.cwiseInverse();
      const Mat gg = sp.p * ux2.cwiseInverse().asDiagonal() - sp.q * xl2.cwiseInverse().asDiagonal();
      const Vec dpsidx = plam.cwiseQuotient(ux2) - qlam.cwiseQuotient(xl2);
      const Vec xa = pt.x - sp.alfa, bx = sp.beta - pt.x;
      const Vec delx = dpsidx - epsi * xa.cwiseInverse() + epsi * bx.cwiseInverse();
      const Vec dely = sp.c + sp.d.cwiseProduct(pt.y) - pt.lam - epsi * pt.y.cwiseInverse();
      const double delz = sp.a0 - sp.a.dot(pt.lam) - epsi / pt.z;
      const Vec dellam = gvec - sp.a * pt.z - pt.y - sp.b + epsi * pt.lam.cwiseInverse();
      const Vec diagx = 2.0 * (plam.cwiseQuotient(ux3) + qlam.cwiseQuotient(xl3)) + pt.xsi.cwiseQuotient(xa) +
                        pt.eta.cwiseQuotient(bx);
      const Vec diagy = sp.d + pt.mu.cwiseQuotient(pt.y);
      const Vec diaglamyi = pt.s.cwiseQuotient(pt.lam) + diagy.cwiseInverse();

      Vec dx, dlam;
      double dz;
      if (m < n) {
        Vec bb(m + 1);
        bb.head(m) = dellam + dely.cwiseQuotient(diagy) - gg * delx.cwiseQuotient(diagx);
        bb(m) = delz;
        Mat aa(m + 1, m + 1);
        aa.topLeftCorner(m, m) = Mat(diaglamyi.asDiagonal()) + gg * diagx.cwiseInverse().asDiagonal() * gg.transpose();
        aa.topRightCorner(m, 1) = sp.a;
        aa.bottomLeftCorner(1, m) = sp.a.transpose();
        aa(m, m) = -pt.zet / pt.z;
        const Vec sol = aa.partialPivLu().solve(bb);
        dlam = sol.head(m);
        dz = sol(m);
        dx = -delx.cwiseQuotient(diagx) - (gg.transpose() * dlam).cwiseQuotient(diagx);
      } else {
        const Vec dinv = diaglamyi.cwiseInverse();
        const Vec dellamyi = dellam + dely.cwiseQuotient(diagy);
        Mat aa(n + 1, n + 1);
        aa.topLeftCorner(n, n) = Mat(diagx.asDiagonal()) + gg.transpose() * dinv.asDiagonal() * gg;
        const Vec axz = -gg.transpose() * sp.a.cwiseProduct(dinv);
        aa.topRightCorner(n, 1) = axz;
        aa.bottomLeftCorner(1, n) = axz.transpose();
        aa(n, n) = pt.zet / pt.z + sp.a.dot(sp.a.cwiseProduct(dinv));
        Vec bb(n + 1);
        bb.head(n) = -(delx + gg.transpose() * dellamyi.cwiseProduct(dinv));
        bb(n) = -(delz - sp.a.dot(dellamyi.cwiseProduct(dinv)));
        const Vec sol = aa.partialPivLu().solve(bb);
        dx = sol.head(n);
        dz = sol(n);
        dlam = (gg * dx).cwiseProduct(dinv) - dz * sp.a.cwiseProduct(dinv) + dellamyi.cwiseProduct(dinv);
      }
      const Vec dy = -dely.cwiseQuotient(diagy) + dlam.cwiseQuotient(diagy);
      const Vec dxsi = -pt.xsi + epsi * xa.cwiseInverse() - pt.xsi.cwiseProduct(dx).cwiseQuotient(xa);
      const Vec deta = -pt.eta + epsi * bx.cwiseInverse() + pt.eta.cwiseProduct(dx).cwiseQuotient(bx);
      const Vec dmu = -pt.mu + epsi * pt.y.cwiseInverse() - pt.mu.cwiseProduct(dy).cwiseQuotient(pt.y);
      const double dzet = -pt.zet + epsi / pt.z - pt.zet * dz / pt.z;
      const Vec ds = -pt.s + epsi * pt.lam.cwiseInverse() - pt.s.cwiseProduct(dlam).cwiseQuotient(pt.lam);

      double stm = 1.0;
      stm = std::max(stm, max_ratio(dy, pt.y, -1.0));
      stm = std::max(stm, -1.01 * dz / pt.z);
      stm = std::max(stm, max_ratio(dlam, pt.lam, -1.0));
      stm = std::max(stm, max_ratio(dxsi, pt.xsi, -1.0));
      stm = std::max(stm, max_ratio(deta, pt.eta, -1.0));
      stm = std::max(stm, max_ratio(dmu, pt.mu, -1.0));
      stm = std::max(stm, -1.01 * dzet / pt.zet);
      stm = std::max(stm, max_ratio(ds, pt.s, -1.0));
      stm = std::max(stm, max_ratio(dx, xa, -1.0));
      stm = std::max(stm, max_ratio(dx, bx, 1.0));
      double steg = 1.0 / stm;

      const Point old = pt;
      double resnew = 2.0 * resnorm;
      for (int back = 0; back < 50 && resnew > resnorm; ++back) {
        pt.x = old.x + steg * dx;
        pt.y = old.y + steg * dy;
        pt.z = old.z + steg * dz;
        pt.lam = old.lam + steg * dlam;
        pt.xsi = old.xsi + steg * dxsi;
        pt.eta = old.eta + steg * deta;
        pt.mu = old.mu + steg * dmu;
        pt.zet = old.zet + steg * dzet;
        pt.s = old.s + steg * ds;
        res = residual(sp, pt, epsi);
        resnew = res.norm();
        steg *= 0.5;
      }
      resnorm = resnew;
      resmax = res.cwiseAbs().maxCoeff();
    }
    epsi *= 0.1;
  }
  return pt;
}

}  // namespace

Mma::Mma(int n, int m, Vec xmin, Vec xmax, MmaParams params)
    : n_(n), m_(m), xmin_(std::move(xmin)), xmax_(std::move(xmax)), prm_(params) {
  if (n < 1 || m < 0) throw domain_error("MMA needs at least one variable and a nonnegative constraint count");
  if (xmin_.size() != n || xmax_.size() != n) throw domain_error("MMA bounds differ in size from the variables");
  if ((xmax_ - xmin_).minCoeff() <= 0.0) throw domain_error("MMA upper bounds must exceed lower bounds");
  lam_ = Vec::Zero(m);
}

Vec Mma::update(const Vec& x, double f0, const Vec& df0, const Vec& fval, const Mat& dfdx) {
  (void)f0;
  if (x.size() != n_ || df0.size() != n_ || fval.size() != m_ || dfdx.rows() != m_ || dfdx.cols() != n_)
    throw domain_error("MMA input dimensions are inconsistent");
  if (!df0.allFinite() || !fval.allFinite() || !dfdx.allFinite())
    throw analysis_error("non-finite objective or constraint gradient passed to MMA");
  ++iter_;
  const Vec range = xmax_ - xmin_;
  if (iter_ <= 2) {
    low_ = x - prm_.asyinit * range;
    upp_ = x + prm_.asyinit * range;
  } else {
    for (int j = 0; j < n_; ++j) {
      const double zzz = (x(j) - xold1_(j)) * (xold1_(j) - xold2_(j));
      const double factor = zzz > 0.0 ? prm_.asyincr : (zzz < 0.0 ? prm_.asydecr : 1.0);
      low_(j) = x(j) - factor * (xold1_(j) - low_(j));
      upp_(j) = x(j) + factor * (upp_(j) - xold1_(j));
      low_(j) = std::clamp(low_(j), x(j) - 10.0 * range(j), x(j) - prm_.asymin * range(j));
      upp_(j) = std::clamp(upp_(j), x(j) + prm_.asymin * range(j), x(j) + 10.0 * range(j));
    }
  }

  Subproblem sp;
  sp.n = n_;
  sp.m = m_;
  sp.low = low_;
  sp.upp = upp_;
  sp.alfa = (low_ + prm_.albefa * (x - low_)).cwiseMax(x - prm_.move * range).cwiseMax(xmin_);
  sp.beta = (upp_ - prm_.albefa * (upp_ - x)).cwiseMin(x + prm_.move * range).cwiseMin(xmax_);
  const Vec xmami = range.cwiseMax(1e-5);
  const Vec ux1 = upp_ - x, xl1 = x - low_;
  const Vec ux2 = ux1.cwiseProduct(ux1), xl2 = xl1.cwiseProduct(xl1);
  const Vec p0 = df0.cwiseMax(0.0), q0 = (-df0).cwiseMax(0.0);
  const Vec pq0 = 0.001 * (p0 + q0) + prm_.raa0 * xmami.cwiseInverse();
  sp.p0 = (p0 + pq0).cwiseProduct(ux2);
  sp.q0 = (q0 + pq0).cwiseProduct(xl2);
  Mat p = dfdx.cwiseMax(0.0), q = (-dfdx).cwiseMax(0.0);
  const Mat pq = 0.001 * (p + q) + prm_.raa0 * Vec::Ones(m_) * xmami.cwiseInverse().transpose();
  sp.p = (p + pq) * ux2.asDiagonal();
  sp.q = (q + pq) * xl2.asDiagonal();
  sp.b = sp.p * ux1.cwiseInverse() + sp.q * xl1.cwiseInverse() - fval;
  sp.a0 = prm_.a0;
  sp.a = Vec::Zero(m_);
  sp.c = Vec::Constant(m_, prm_.c);
  sp.d = Vec::Constant(m_, prm_.d);

  Vec xnew;
  fallback_ = false;
  try {
    const Point pt = subsolv(sp, prm_.epsimin);
    xnew = pt.x;
    lam_ = pt.lam;
    if (!xnew.allFinite()) throw analysis_error("non-finite subproblem solution");
  } catch (const Error&) {
    // Conservative move-limited steepest-descent step.
    fallback_ = true;
    xnew = x;
    for (int j = 0; j < n_; ++j) {
      const double g = df0(j);
      xnew(j) = std::clamp(x(j) - (g > 0 ? 1.0 : (g < 0 ? -1.0 : 0.0)) * 0.2 * prm_.move * range(j), sp.alfa(j),
                           sp.beta(j));
    }
  }
  xnew = xnew.cwiseMax(sp.alfa).cwiseMin(sp.beta);
  xold2_ = iter_ > 1 ? xold1_ : x;
  xold1_ = x;
  return xnew;
}

double mma_kkt_residual(const Vec& x, const Vec& xmin, const Vec& xmax, const Vec& df0, const Vec& fval,
                        const Mat& dfdx, const Vec& lam) {
  const Vec grad = df0 + dfdx.transpose() * lam;
  double r2 = 0.0;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    // Projected gradient with respect to the box.
    double g = grad(j);
    if (x(j) <= xmin(j) + 1e-12) g = std::min(g, 0.0);
    if (x(j) >= xmax(j) - 1e-12) g = std::max(g, 0.0);
    r2 += g * g;
  }
  for (Eigen::Index i = 0; i < fval.size(); ++i) {
    r2 += std::pow(std::max(fval(i), 0.0), 2);
    r2 += std::pow(lam(i) * fval(i), 2);
    r2 += std::pow(std::min(lam(i), 0.0), 2);
  }
  return std::sqrt(r2);
}

}  // namespace archmat
