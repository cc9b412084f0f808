#pragma once

#include <utility>
#include <vector>

#include "dlmp/conic.hpp"

namespace dlmp::conic {

/// Sparse affine expression sum_k coef_k * x[var_k] + constant.
struct Affine {
  std::vector<std::pair<Index, double>> terms;
  double constant = 0.0;

  Affine() = default;
  Affine(double c) : constant(c) {}
  Affine& add(Index var, double coef) {
    if (coef != 0.0) terms.emplace_back(var, coef);
    return *this;
  }
  static Affine var(Index v, double coef = 1.0) {
    Affine a;
    a.add(v, coef);
    return a;
  }
};

/// Incrementally builds a ConicProgram. Linear inequalities and cones may be
/// added in any order; build() places linear rows first as the solver expects
/// and the returned handles stay valid (see ineq_row()).
class ProgramBuilder {
 public:
  Index add_var(double cost = 0.0) {
    cost_.push_back(cost);
    return static_cast<Index>(cost_.size()) - 1;
  }
  Index num_vars() const { return static_cast<Index>(cost_.size()); }
  void set_cost(Index var, double cost) { cost_[var] = cost; }
  double cost(Index var) const { return cost_[var]; }

  /// expr == 0. Returns the equality row.
  Index add_eq(const Affine& expr) {
    for (const auto& [v, c] : expr.terms) eq_.emplace_back(eq_rows_, v, c);
    eq_rhs_.push_back(-expr.constant);
    return eq_rows_++;
  }

  /// expr >= 0. Returns a handle for ineq_row().
  Index add_nonneg(const Affine& expr) {
    for (const auto& [v, c] : expr.terms) lin_.emplace_back(lin_rows_, v, -c);
    lin_rhs_.push_back(expr.constant);
    return lin_rows_++;
  }

  /// elems[0] >= || elems[1:] ||. Returns a handle to the first cone row.
  Index add_soc(const std::vector<Affine>& elems) {
    const Index first = soc_rows_;
    for (const auto& e : elems) {
      for (const auto& [v, c] : e.terms) soc_.emplace_back(soc_rows_, v, -c);
      soc_rhs_.push_back(e.constant);
      ++soc_rows_;
    }
    soc_dims_.push_back(static_cast<Index>(elems.size()));
    return kSocFlag | first;
  }

  /// Final row of G for a handle returned by add_nonneg or add_soc.
  Index ineq_row(Index handle) const {
    return (handle & kSocFlag) ? lin_rows_ + (handle & ~kSocFlag) : handle;
  }

  Index num_eq() const { return eq_rows_; }
  Index num_linear() const { return lin_rows_; }

  ConicProgram build() const {
    ConicProgram p;
    const Index n = num_vars();
    p.c = Eigen::Map<const VectorXd>(cost_.data(), n);
    p.A.resize(eq_rows_, n);
    p.A.setFromTriplets(eq_.begin(), eq_.end());
    p.b = Eigen::Map<const VectorXd>(eq_rhs_.data(), eq_rows_);
    std::vector<Eigen::Triplet<double>> g = lin_;
    g.reserve(lin_.size() + soc_.size());
    for (const auto& t : soc_) g.emplace_back(t.row() + lin_rows_, t.col(), t.value());
    p.G.resize(lin_rows_ + soc_rows_, n);
    p.G.setFromTriplets(g.begin(), g.end());
    p.h.resize(lin_rows_ + soc_rows_);
    for (Index i = 0; i < lin_rows_; ++i) p.h(i) = lin_rhs_[i];
    for (Index i = 0; i < soc_rows_; ++i) p.h(lin_rows_ + i) = soc_rhs_[i];
    p.num_linear = lin_rows_;
    p.soc_dims = soc_dims_;
    return p;
  }

 private:
  static constexpr Index kSocFlag = Index(1) << 40;

  std::vector<double> cost_;
  std::vector<Eigen::Triplet<double>> eq_, lin_, soc_;
  std::vector<double> eq_rhs_, lin_rhs_, soc_rhs_;
  std::vector<Index> soc_dims_;
  Index eq_rows_ = 0, lin_rows_ = 0, soc_rows_ = 0;
};

}  // namespace dlmp::conic
