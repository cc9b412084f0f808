#include "dlmp/conic.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace dlmp::conic {

void ConicProgram::check() const {
  const Index n = c.size();
  if (A.rows() > 0 && A.cols() != n) throw std::invalid_argument("A has wrong column count");
  if (G.rows() > 0 && G.cols() != n) throw std::invalid_argument("G has wrong column count");
  if (b.size() != A.rows()) throw std::invalid_argument("b does not match A");
  if (h.size() != G.rows()) throw std::invalid_argument("h does not match G");
  Index cone_rows = num_linear;
  for (Index d : soc_dims) {
    if (d < 1) throw std::invalid_argument("second-order cone of size < 1");
    cone_rows += d;
  }
  if (cone_rows != G.rows()) throw std::invalid_argument("cone sizes do not cover G");
}

std::string to_string(SolverStatus status) {
  switch (status) {
    case SolverStatus::Optimal: return "optimal";
    case SolverStatus::PrimalInfeasible: return "primal_infeasible";
    case SolverStatus::DualInfeasible: return "dual_infeasible";
    case SolverStatus::MaxIterations: return "max_iterations";
    case SolverStatus::NumericalError: return "numerical_error";
  }
  return "unknown";
}

namespace {

/// Nesterov-Todd scaling of one second-order cone.
struct SocScaling {
  Index offset = 0;
  Index dim = 0;
  double eta = 1.0;
  VectorXd wbar;  // normalized scaling point, wbar' J wbar = 1
};

/// s' J s computed as (s0 - |s1|)(s0 + |s1|) to limit cancellation.
double soc_residual(const Eigen::Ref<const VectorXd>& u) {
  const double tail = u.size() > 1 ? u.tail(u.size() - 1).norm() : 0.0;
  return (u(0) - tail) * (u(0) + tail);
}

/// Cone geometry: Jordan products, scaling, and step lengths.
class Cone {
 public:
  Cone(Index num_linear, const std::vector<Index>& soc_dims) : num_linear_(num_linear) {
    Index offset = num_linear;
    for (Index d : soc_dims) {
      SocScaling s;
      s.offset = offset;
      s.dim = d;
      s.wbar = VectorXd::Zero(d);
      s.wbar(0) = 1.0;
      socs_.push_back(s);
      offset += d;
    }
    dim_ = offset;
    lp_w_ = VectorXd::Ones(num_linear);
  }

  Index dim() const { return dim_; }
  Index num_linear() const { return num_linear_; }
  const std::vector<SocScaling>& socs() const { return socs_; }
  Index degree() const { return num_linear_ + static_cast<Index>(socs_.size()); }

  VectorXd identity() const {
    VectorXd e = VectorXd::Zero(dim_);
    e.head(num_linear_).setOnes();
    for (const auto& c : socs_) e(c.offset) = 1.0;
    return e;
  }

  /// Smallest "eigenvalue" of u: min over LP entries and s0 - |s1| of cones.
  double min_eigen(const VectorXd& u) const {
    double m = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < num_linear_; ++i) m = std::min(m, u(i));
    for (const auto& c : socs_) {
      const double tail = c.dim > 1 ? u.segment(c.offset + 1, c.dim - 1).norm() : 0.0;
      m = std::min(m, u(c.offset) - tail);
    }
    return m;
  }

  /// Shift u into the interior of the cone (ECOS-style initialization).
  void push_into_cone(VectorXd& u) const {
    const double alpha = -min_eigen(u);
    if (alpha >= 0.0) u += (1.0 + alpha) * identity();
  }

  /// Updates scalings from (s, z); returns lambda = W z.
  VectorXd update_scaling(const VectorXd& s, const VectorXd& z) {
    VectorXd lambda(dim_);
    for (Index i = 0; i < num_linear_; ++i) {
      lp_w_(i) = std::sqrt(s(i) / z(i));
      lambda(i) = std::sqrt(s(i) * z(i));
    }
    for (auto& c : socs_) {
      const auto sk = s.segment(c.offset, c.dim);
      const auto zk = z.segment(c.offset, c.dim);
      const double s_res = std::sqrt(std::max(soc_residual(sk), 1e-300));
      const double z_res = std::sqrt(std::max(soc_residual(zk), 1e-300));
      const VectorXd sbar = sk / s_res;
      const VectorXd zbar = zk / z_res;
      const double gamma = std::sqrt(std::max((1.0 + sbar.dot(zbar)) / 2.0, 1e-300));
      VectorXd w = sbar;
      w(0) += zbar(0);
      if (c.dim > 1) w.tail(c.dim - 1) -= zbar.tail(c.dim - 1);
      w /= 2.0 * gamma;
      // Re-normalize: w0 = sqrt(1 + |w1|^2) keeps W well defined under roundoff.
      if (c.dim > 1) w(0) = std::sqrt(1.0 + w.tail(c.dim - 1).squaredNorm());
      else w(0) = 1.0;
      c.wbar = w;
      c.eta = std::sqrt(s_res / z_res);
      lambda.segment(c.offset, c.dim) = apply_w_block(c, zk);
    }
    return lambda;
  }

  VectorXd apply_w(const VectorXd& v) const {
    VectorXd out(dim_);
    out.head(num_linear_) = lp_w_.cwiseProduct(v.head(num_linear_));
    for (const auto& c : socs_) out.segment(c.offset, c.dim) = apply_w_block(c, v.segment(c.offset, c.dim));
    return out;
  }

  VectorXd apply_winv(const VectorXd& v) const {
    VectorXd out(dim_);
    out.head(num_linear_) = v.head(num_linear_).cwiseQuotient(lp_w_);
    for (const auto& c : socs_) {
      const auto vk = v.segment(c.offset, c.dim);
      VectorXd r(c.dim);
      if (c.dim == 1) {
        r(0) = vk(0) / c.eta;
      } else {
        const auto w1 = c.wbar.tail(c.dim - 1);
        const auto v1 = vk.tail(c.dim - 1);
        const double w1v1 = w1.dot(v1);
        r(0) = c.wbar(0) * vk(0) - w1v1;
        r.tail(c.dim - 1) = -vk(0) * w1 + v1 + (w1v1 / (1.0 + c.wbar(0))) * w1;
        r /= c.eta;
      }
      out.segment(c.offset, c.dim) = r;
    }
    return out;
  }

  VectorXd apply_w2(const VectorXd& v) const { return apply_w(apply_w(v)); }

  /// Dense W^2 block of one second-order cone.
  Eigen::MatrixXd w2_block(const SocScaling& c) const {
    Eigen::MatrixXd W(c.dim, c.dim);
    for (Index j = 0; j < c.dim; ++j) {
      VectorXd e = VectorXd::Zero(c.dim);
      e(j) = 1.0;
      W.col(j) = apply_w_block(c, e);
    }
    return W * W;
  }

  const VectorXd& lp_w() const { return lp_w_; }

  /// Jordan product u o v.
  VectorXd product(const VectorXd& u, const VectorXd& v) const {
    VectorXd out(dim_);
    out.head(num_linear_) = u.head(num_linear_).cwiseProduct(v.head(num_linear_));
    for (const auto& c : socs_) {
      const auto uk = u.segment(c.offset, c.dim);
      const auto vk = v.segment(c.offset, c.dim);
      out(c.offset) = uk.dot(vk);
      if (c.dim > 1) {
        out.segment(c.offset + 1, c.dim - 1) =
            uk(0) * vk.tail(c.dim - 1) + vk(0) * uk.tail(c.dim - 1);
      }
    }
    return out;
  }

  /// Solves lambda o x = d for x.
  VectorXd divide(const VectorXd& lambda, const VectorXd& d) const {
    VectorXd out(dim_);
    out.head(num_linear_) = d.head(num_linear_).cwiseQuotient(lambda.head(num_linear_));
    for (const auto& c : socs_) {
      const auto lk = lambda.segment(c.offset, c.dim);
      const auto dk = d.segment(c.offset, c.dim);
      if (c.dim == 1) {
        out(c.offset) = dk(0) / lk(0);
        continue;
      }
      const auto l1 = lk.tail(c.dim - 1);
      const double det = soc_residual(lk);
      const double x0 = (lk(0) * dk(0) - l1.dot(dk.tail(c.dim - 1))) / det;
      out(c.offset) = x0;
      out.segment(c.offset + 1, c.dim - 1) = (dk.tail(c.dim - 1) - x0 * l1) / lk(0);
    }
    return out;
  }

  /// Largest alpha with u + alpha du in the cone (infinity if unbounded).
  double max_step(const VectorXd& u, const VectorXd& du) const {
    double alpha = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < num_linear_; ++i) {
      if (du(i) < 0.0) alpha = std::min(alpha, -u(i) / du(i));
    }
    for (const auto& c : socs_) {
      alpha = std::min(alpha, soc_step(u.segment(c.offset, c.dim), du.segment(c.offset, c.dim)));
    }
    return alpha;
  }

 private:
  static VectorXd apply_w_block(const SocScaling& c, const Eigen::Ref<const VectorXd>& v) {
    VectorXd r(c.dim);
    if (c.dim == 1) {
      r(0) = c.eta * v(0);
      return r;
    }
    const auto w1 = c.wbar.tail(c.dim - 1);
    const auto v1 = v.tail(c.dim - 1);
    const double w1v1 = w1.dot(v1);
    r(0) = c.wbar(0) * v(0) + w1v1;
    r.tail(c.dim - 1) = v(0) * w1 + v1 + (w1v1 / (1.0 + c.wbar(0))) * w1;
    return c.eta * r;
  }

  static double soc_step(const Eigen::Ref<const VectorXd>& u, const Eigen::Ref<const VectorXd>& d) {
    const Index n = u.size();
    if (n == 1) return d(0) < 0.0 ? -u(0) / d(0) : std::numeric_limits<double>::infinity();
    // Normalize so that u' J u = 1, then find the first root of
    // q(a) = 1 + 2 a (u'Jd) + a^2 (d'Jd).
    const double unorm = std::sqrt(std::max(soc_residual(u), 1e-300));
    const VectorXd un = u / unorm;
    const VectorXd dn = d / unorm;
    const double a = dn(0) * dn(0) - dn.tail(n - 1).squaredNorm();
    const double b = un(0) * dn(0) - un.tail(n - 1).dot(dn.tail(n - 1));
    const double inf = std::numeric_limits<double>::infinity();
    // In the frame where u is the identity the step is 1 / (|d1'| - d0').
    // Equivalent closed form: roots of a x^2 + 2 b x + 1.
    double step = inf;
    if (std::abs(a) < 1e-300) {
      if (b < 0.0) step = -0.5 / b;
    } else {
      const double disc = b * b - a;
      if (disc >= 0.0) {
        const double sq = std::sqrt(disc);
        const double q = -(b + std::copysign(sq, b));
        const double r1 = q / a;
        const double r2 = (q != 0.0) ? 1.0 / q : inf;
        for (double r : {r1, r2}) {
          if (r > 0.0) step = std::min(step, r);
        }
      }
    }
    return step;
  }

  Index num_linear_;
  Index dim_ = 0;
  std::vector<SocScaling> socs_;
  VectorXd lp_w_;
};

/// Quasi-definite KKT system
///   [ 0   A'  G'  ]
///   [ A   0   0   ]
///   [ G   0  -W^2 ]
/// factored with static regularization and refined against the exact matrix.
class KktSolver {
 public:
  KktSolver(const SpMat& A, const SpMat& G, const Cone& cone, double reg, int refine)
      : A_(A), G_(G), At_(A.transpose()), Gt_(G.transpose()), reg_(reg), refine_(refine) {
    n_ = std::max(A.cols(), G.cols());
    p_ = A.rows();
    m_ = G.rows();
    const Index dim = n_ + p_ + m_;
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(A.nonZeros() + G.nonZeros() + dim + 16 * cone.socs().size());
    for (Index i = 0; i < n_; ++i) trips.emplace_back(i, i, reg_);
    for (Index i = 0; i < p_; ++i) trips.emplace_back(n_ + i, n_ + i, -reg_);
    for (Index k = 0; k < A.outerSize(); ++k)
      for (SpMat::InnerIterator it(A, k); it; ++it) trips.emplace_back(n_ + it.row(), it.col(), it.value());
    for (Index k = 0; k < G.outerSize(); ++k)
      for (SpMat::InnerIterator it(G, k); it; ++it) trips.emplace_back(n_ + p_ + it.row(), it.col(), it.value());
    const Index zoff = n_ + p_;
    for (Index i = 0; i < cone.num_linear(); ++i) trips.emplace_back(zoff + i, zoff + i, -1.0);
    for (const auto& c : cone.socs()) {
      for (Index j = 0; j < c.dim; ++j)
        for (Index i = j; i < c.dim; ++i) trips.emplace_back(zoff + c.offset + i, zoff + c.offset + j, -1.0);
    }
    K_.resize(dim, dim);
    K_.setFromTriplets(trips.begin(), trips.end());
    K_.makeCompressed();
    // Remember where the scaling block lives so updates touch values only.
    for (Index i = 0; i < cone.num_linear(); ++i) lp_slots_.push_back(&K_.coeffRef(zoff + i, zoff + i));
    for (const auto& c : cone.socs()) {
      std::vector<double*> slots;
      for (Index j = 0; j < c.dim; ++j)
        for (Index i = j; i < c.dim; ++i) slots.push_back(&K_.coeffRef(zoff + c.offset + i, zoff + c.offset + j));
      soc_slots_.push_back(std::move(slots));
    }
    ldlt_.analyzePattern(K_);
  }

  bool factor(const Cone& cone) {
    cone_ = &cone;
    const VectorXd& w = cone.lp_w();
    for (Index i = 0; i < cone.num_linear(); ++i) *lp_slots_[i] = -(w(i) * w(i)) - reg_;
    for (std::size_t k = 0; k < cone.socs().size(); ++k) {
      const auto& c = cone.socs()[k];
      const Eigen::MatrixXd W2 = cone.w2_block(c);
      std::size_t slot = 0;
      for (Index j = 0; j < c.dim; ++j)
        for (Index i = j; i < c.dim; ++i) *soc_slots_[k][slot++] = -W2(i, j) - (i == j ? reg_ : 0.0);
    }
    ldlt_.factorize(K_);
    return ldlt_.info() == Eigen::Success;
  }

  /// Solves the unregularized system for [dx; dy; dz].
  VectorXd solve(const VectorXd& rhs) const {
    VectorXd sol = ldlt_.solve(rhs);
    for (int it = 0; it < refine_; ++it) {
      const VectorXd res = rhs - multiply(sol);
      if (res.lpNorm<Eigen::Infinity>() <= 1e-14 * (1.0 + rhs.lpNorm<Eigen::Infinity>())) break;
      sol += ldlt_.solve(res);
    }
    return sol;
  }

  Index n() const { return n_; }
  Index p() const { return p_; }
  Index m() const { return m_; }

 private:
  VectorXd multiply(const VectorXd& v) const {
    const auto x = v.head(n_);
    const auto y = v.segment(n_, p_);
    const VectorXd z = v.tail(m_);
    VectorXd out(n_ + p_ + m_);
    out.head(n_) = At_ * y + Gt_ * z;
    out.segment(n_, p_) = A_ * x;
    out.tail(m_) = G_ * x - cone_->apply_w2(z);
    return out;
  }

  const SpMat& A_;
  const SpMat& G_;
  SpMat At_, Gt_;
  Index n_ = 0, p_ = 0, m_ = 0;
  double reg_;
  int refine_;
  SpMat K_;
  std::vector<double*> lp_slots_;
  std::vector<std::vector<double*>> soc_slots_;
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
  const Cone* cone_ = nullptr;
};

/// Ruiz equilibration of [A; G]; rows of one cone share a factor.
struct Equilibration {
  VectorXd col, row_a, row_g;
  double cost = 1.0;
};

Equilibration equilibrate(SpMat& A, SpMat& G, const Cone& cone, int iters) {
  Equilibration e;
  const Index n = std::max(A.cols(), G.cols());
  e.col = VectorXd::Ones(n);
  e.row_a = VectorXd::Ones(A.rows());
  e.row_g = VectorXd::Ones(G.rows());
  auto safe_sqrt = [](double v) { return v < 1e-6 ? 1.0 : std::sqrt(v); };
  for (int it = 0; it < iters; ++it) {
    VectorXd cmax = VectorXd::Zero(n), amax = VectorXd::Zero(A.rows()), gmax = VectorXd::Zero(G.rows());
    for (Index k = 0; k < A.outerSize(); ++k)
      for (SpMat::InnerIterator it2(A, k); it2; ++it2) {
        const double v = std::abs(it2.value());
        cmax(it2.col()) = std::max(cmax(it2.col()), v);
        amax(it2.row()) = std::max(amax(it2.row()), v);
      }
    for (Index k = 0; k < G.outerSize(); ++k)
      for (SpMat::InnerIterator it2(G, k); it2; ++it2) {
        const double v = std::abs(it2.value());
        cmax(it2.col()) = std::max(cmax(it2.col()), v);
        gmax(it2.row()) = std::max(gmax(it2.row()), v);
      }
    for (const auto& c : cone.socs()) {
      const double mx = gmax.segment(c.offset, c.dim).maxCoeff();
      gmax.segment(c.offset, c.dim).setConstant(mx);
    }
    for (Index i = 0; i < n; ++i) cmax(i) = 1.0 / safe_sqrt(cmax(i));
    for (Index i = 0; i < amax.size(); ++i) amax(i) = 1.0 / safe_sqrt(amax(i));
    for (Index i = 0; i < gmax.size(); ++i) gmax(i) = 1.0 / safe_sqrt(gmax(i));
    A = amax.asDiagonal() * A * cmax.asDiagonal();
    G = gmax.asDiagonal() * G * cmax.asDiagonal();
    e.col = e.col.cwiseProduct(cmax);
    e.row_a = e.row_a.cwiseProduct(amax);
    e.row_g = e.row_g.cwiseProduct(gmax);
  }
  return e;
}

struct Residuals {
  double pres = 0.0, dres = 0.0, pcost = 0.0, dcost = 0.0, gap = 0.0, relgap = 0.0;
  double pinf = std::numeric_limits<double>::infinity();
  double dinf = std::numeric_limits<double>::infinity();
};

}  // namespace

ConicSolution solve(const ConicProgram& prog, const SolverSettings& cfg) {
  prog.check();
  const Index n = prog.num_vars();
  const Index p = prog.num_eq();
  const Index m = prog.num_ineq();

  Cone cone(prog.num_linear, prog.soc_dims);
  SpMat A = prog.A;
  SpMat G = prog.G;
  if (A.cols() != n) A.resize(0, n);
  if (G.cols() != n) G.resize(0, n);
  const Equilibration eq = equilibrate(A, G, cone, cfg.equil_iters);
  VectorXd c = prog.c.cwiseProduct(eq.col);
  const VectorXd b = prog.b.cwiseProduct(eq.row_a);
  const VectorXd h = prog.h.cwiseProduct(eq.row_g);
  const double cscale = std::max(1.0, c.lpNorm<Eigen::Infinity>());
  c /= cscale;

  const double bnorm = std::max(1.0, b.norm());
  const double hnorm = std::max(1.0, h.norm());
  const double cnorm = std::max(1.0, c.norm());

  KktSolver kkt(A, G, cone, cfg.static_reg, cfg.refine_iters);
  const SpMat At = A.transpose();
  const SpMat Gt = G.transpose();

  ConicSolution out;

  // Initial point with W = I.
  if (!kkt.factor(cone)) {
    out.status = SolverStatus::NumericalError;
    return out;
  }
  VectorXd rhs(n + p + m);
  rhs << VectorXd::Zero(n), b, h;
  VectorXd sol = kkt.solve(rhs);
  VectorXd x = sol.head(n);
  VectorXd s = -sol.tail(m);
  cone.push_into_cone(s);
  rhs << -c, VectorXd::Zero(p), VectorXd::Zero(m);
  sol = kkt.solve(rhs);
  VectorXd y = sol.segment(n, p);
  VectorXd z = sol.tail(m);
  cone.push_into_cone(z);
  double tau = 1.0, kappa = 1.0;

  const double degree = static_cast<double>(cone.degree()) + 1.0;
  Residuals res;
  auto evaluate = [&](Residuals& r, VectorXd& rx, VectorXd& ry, VectorXd& rz, double& rt) {
    const VectorXd hrx = At * y + Gt * z;
    const VectorXd hry = A * x;
    const VectorXd hrz = G * x + s;
    rx = hrx + c * tau;
    ry = hry - b * tau;
    rz = hrz - h * tau;
    const double cx = c.dot(x);
    const double by_hz = b.dot(y) + h.dot(z);
    rt = kappa + cx + by_hz;
    r.pres = std::max(ry.size() ? ry.norm() / bnorm : 0.0, rz.size() ? rz.norm() / hnorm : 0.0) / tau;
    r.dres = rx.norm() / cnorm / tau;
    r.pcost = cx / tau;
    r.dcost = -by_hz / tau;
    r.gap = s.dot(z) / (tau * tau);
    if (r.pcost < 0.0) r.relgap = r.gap / -r.pcost;
    else if (r.dcost > 0.0) r.relgap = r.gap / r.dcost;
    else r.relgap = std::numeric_limits<double>::infinity();
    r.pinf = by_hz < 0.0 ? hrx.norm() / cnorm / -by_hz : std::numeric_limits<double>::infinity();
    r.dinf = cx < 0.0 ? std::max(hry.size() ? hry.norm() / bnorm : 0.0, hrz.norm() / hnorm) / -cx
                      : std::numeric_limits<double>::infinity();
  };

  VectorXd rx, ry, rz;
  double rt = 0.0;
  out.status = SolverStatus::MaxIterations;
  int iter = 0;
  for (; iter <= cfg.max_iters; ++iter) {
    evaluate(res, rx, ry, rz, rt);
    if (cfg.verbose) {
      std::cerr << std::setw(3) << iter << std::scientific << std::setprecision(3) << "  pcost "
                << res.pcost * cscale << "  dcost " << res.dcost * cscale << "  gap " << res.gap
                << "  pres " << res.pres << "  dres " << res.dres << "  k/t " << kappa / tau << "\n";
    }
    if (res.pres < cfg.feastol && res.dres < cfg.feastol &&
        (res.gap < cfg.abstol || res.relgap < cfg.reltol)) {
      out.status = SolverStatus::Optimal;
      break;
    }
    if (res.pinf < cfg.feastol && kappa > tau) {
      out.status = SolverStatus::PrimalInfeasible;
      break;
    }
    if (res.dinf < cfg.feastol && kappa > tau) {
      out.status = SolverStatus::DualInfeasible;
      break;
    }
    if (iter == cfg.max_iters) break;

    const VectorXd lambda = cone.update_scaling(s, z);
    if (!kkt.factor(cone)) {
      out.status = SolverStatus::NumericalError;
      break;
    }
    const double mu = (s.dot(z) + tau * kappa) / degree;

    // Direction multiplying dtau.
    rhs << -c, b, h;
    const VectorXd d1 = kkt.solve(rhs);
    const VectorXd x1 = d1.head(n), y1 = d1.segment(n, p), z1 = d1.tail(m);
    const double denom_base = c.dot(x1) + b.dot(y1) + h.dot(z1);

    auto direction = [&](double eta, const VectorXd& ds, double dtau_rhs, VectorXd& dx, VectorXd& dy,
                         VectorXd& dz, VectorXd& dsl, double& dtau, double& dkappa) {
      const VectorXd w_ldiv = cone.apply_w(cone.divide(lambda, ds));
      rhs << -eta * rx, -eta * ry, -eta * rz - w_ldiv;
      const VectorXd d2 = kkt.solve(rhs);
      const double num = -eta * rt - dtau_rhs / tau - (c.dot(d2.head(n)) + b.dot(d2.segment(n, p)) + h.dot(d2.tail(m)));
      dtau = num / (denom_base - kappa / tau);
      dx = d2.head(n) + dtau * x1;
      dy = d2.segment(n, p) + dtau * y1;
      dz = d2.tail(m) + dtau * z1;
      dsl = w_ldiv - cone.apply_w2(dz);
      dkappa = (dtau_rhs - kappa * dtau) / tau;
    };

    auto step_length = [&](const VectorXd& dsl, const VectorXd& dz, double dtau, double dkappa) {
      double a = std::min(cone.max_step(s, dsl), cone.max_step(z, dz));
      if (dtau < 0.0) a = std::min(a, -tau / dtau);
      if (dkappa < 0.0) a = std::min(a, -kappa / dkappa);
      return a;
    };

    // Predictor.
    VectorXd dx, dy, dz, dsl;
    double dtau = 0.0, dkappa = 0.0;
    const VectorXd lam_sq = cone.product(lambda, lambda);
    direction(1.0, -lam_sq, -tau * kappa, dx, dy, dz, dsl, dtau, dkappa);
    const double alpha_aff = std::min(1.0, step_length(dsl, dz, dtau, dkappa));
    const double sigma = std::clamp(std::pow(1.0 - alpha_aff, 3.0), 0.0, 1.0);

    // Corrector.
    const VectorXd ds_aff = cone.apply_winv(dsl);
    const VectorXd dz_aff = cone.apply_w(dz);
    VectorXd ds_rhs = -lam_sq - cone.product(ds_aff, dz_aff) + sigma * mu * cone.identity();
    const double dt_rhs = -tau * kappa - dtau * dkappa + sigma * mu;
    direction(1.0 - sigma, ds_rhs, dt_rhs, dx, dy, dz, dsl, dtau, dkappa);
    double alpha = step_length(dsl, dz, dtau, dkappa);
    alpha = std::min(1.0, cfg.step_fraction * alpha);
    if (!(alpha > 1e-12) || !std::isfinite(alpha)) {
      out.status = SolverStatus::NumericalError;
      break;
    }

    x += alpha * dx;
    y += alpha * dy;
    z += alpha * dz;
    s += alpha * dsl;
    tau += alpha * dtau;
    kappa += alpha * dkappa;
  }

  if ((out.status == SolverStatus::NumericalError || out.status == SolverStatus::MaxIterations) &&
      res.pres < cfg.feastol_inaccurate && res.dres < cfg.feastol_inaccurate &&
      (res.gap < cfg.abstol_inaccurate || res.relgap < cfg.reltol_inaccurate)) {
    out.status = SolverStatus::Optimal;
    out.reduced_accuracy = true;
  }
  out.iterations = iter;
  out.primal_residual = res.pres;
  out.dual_residual = res.dres;
  out.gap = res.gap * cscale;
  // Undo cost scaling and equilibration.
  if (out.status == SolverStatus::PrimalInfeasible) {
    const double scale = -(b.dot(y) + h.dot(z));
    VectorXd cert(p + m);
    cert << eq.row_a.cwiseProduct(y) / scale, eq.row_g.cwiseProduct(z) / scale;
    out.certificate = cert;
  } else if (out.status == SolverStatus::DualInfeasible) {
    out.certificate = eq.col.cwiseProduct(x) / -c.dot(x);
  }
  out.x = eq.col.cwiseProduct(x) / tau;
  out.y = eq.row_a.cwiseProduct(y) * (cscale / tau);
  out.z = eq.row_g.cwiseProduct(z) * (cscale / tau);
  out.s = s.cwiseQuotient(eq.row_g) / tau;
  out.primal_objective = prog.c.dot(out.x);
  out.dual_objective = -(prog.b.dot(out.y) + prog.h.dot(out.z));
  return out;
}

void write_cbf(const ConicProgram& prog, std::ostream& out) {
  prog.check();
  out << std::setprecision(17);
  out << "VER\n3\n\nOBJSENSE\nMIN\n\n";
  out << "VAR\n" << prog.num_vars() << " 1\nF " << prog.num_vars() << "\n\n";
  // Rows: A x - b in L=, then h - G x in L+ / Q.
  std::size_t num_cones = (prog.num_eq() > 0 ? 1 : 0) + (prog.num_linear > 0 ? 1 : 0) + prog.soc_dims.size();
  out << "CON\n" << prog.num_eq() + prog.num_ineq() << " " << num_cones << "\n";
  if (prog.num_eq() > 0) out << "L= " << prog.num_eq() << "\n";
  if (prog.num_linear > 0) out << "L+ " << prog.num_linear << "\n";
  for (Index d : prog.soc_dims) out << "Q " << d << "\n";
  out << "\n";

  std::vector<std::tuple<Index, Index, double>> entries;
  for (Index k = 0; k < prog.A.outerSize(); ++k)
    for (SpMat::InnerIterator it(prog.A, k); it; ++it)
      if (it.value() != 0.0) entries.emplace_back(it.row(), it.col(), it.value());
  for (Index k = 0; k < prog.G.outerSize(); ++k)
    for (SpMat::InnerIterator it(prog.G, k); it; ++it)
      if (it.value() != 0.0) entries.emplace_back(prog.num_eq() + it.row(), it.col(), -it.value());
  std::sort(entries.begin(), entries.end());

  out << "OBJACOORD\n" << (prog.c.array() != 0.0).count() << "\n";
  for (Index j = 0; j < prog.num_vars(); ++j)
    if (prog.c(j) != 0.0) out << j << " " << prog.c(j) << "\n";
  out << "\nACOORD\n" << entries.size() << "\n";
  for (const auto& [r, col, v] : entries) out << r << " " << col << " " << v << "\n";
  std::vector<std::pair<Index, double>> consts;
  for (Index i = 0; i < prog.num_eq(); ++i)
    if (prog.b(i) != 0.0) consts.emplace_back(i, -prog.b(i));
  for (Index i = 0; i < prog.num_ineq(); ++i)
    if (prog.h(i) != 0.0) consts.emplace_back(prog.num_eq() + i, prog.h(i));
  out << "\nBCOORD\n" << consts.size() << "\n";
  for (const auto& [r, v] : consts) out << r << " " << v << "\n";
}

}  // namespace dlmp::conic
