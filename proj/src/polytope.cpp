#include "polytope.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace cgame {

bool satisfies(const std::vector<LinearConstraint>& constraints, const std::vector<double>& x, double eps) {
  for (const auto& c : constraints) {
    double lhs = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) lhs += c.a[k] * x[k];
    if (c.equality ? std::abs(lhs - c.b) > eps : lhs > c.b + eps) return false;
  }
  return true;
}

namespace {

bool near(const std::vector<double>& a, const std::vector<double>& b, double eps) {
  for (std::size_t k = 0; k < a.size(); ++k)
    if (std::abs(a[k] - b[k]) > eps) return false;
  return true;
}

// Calls fn on every k-subset of {0..n-1} in lexicographic order.
template <typename Fn>
void for_each_subset(std::size_t n, std::size_t k, Fn&& fn) {
  if (k > n) return;
  std::vector<std::size_t> idx(k);
  for (std::size_t i = 0; i < k; ++i) idx[i] = i;
  while (true) {
    fn(idx);
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == n - k + i - 1) --i;
    if (i == 0) return;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

// Nearby fraction with a small denominator, to drop solver round-off.
double snap(double z) {
  for (int d = 1; d <= 12; ++d) {
    const double k = std::round(z * d);
    if (std::abs(z - k / d) < 1e-12) return k / d;
  }
  return z;
}

}  // namespace

std::vector<std::vector<double>> polytope_vertices(std::size_t dim, const std::vector<LinearConstraint>& constraints,
                                                   double eps) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;

  // Constant rows either hold trivially or make the region empty.
  std::vector<const LinearConstraint*> eqs, ineqs;
  for (const auto& c : constraints) {
    const bool zero = std::all_of(c.a.begin(), c.a.end(), [eps](double v) { return std::abs(v) <= eps; });
    if (zero) {
      if (c.equality ? std::abs(c.b) > eps : c.b < -eps) return {};
      continue;
    }
    (c.equality ? eqs : ineqs).push_back(&c);
  }

  // Parametrise the affine hull of the equalities: x = x0 + N t.
  VectorXd x0 = VectorXd::Zero(static_cast<Eigen::Index>(dim));
  MatrixXd basis = MatrixXd::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  if (!eqs.empty()) {
    MatrixXd e(static_cast<Eigen::Index>(eqs.size()), static_cast<Eigen::Index>(dim));
    VectorXd f(static_cast<Eigen::Index>(eqs.size()));
    for (std::size_t r = 0; r < eqs.size(); ++r) {
      for (std::size_t k = 0; k < dim; ++k) e(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = eqs[r]->a[k];
      f(static_cast<Eigen::Index>(r)) = eqs[r]->b;
    }
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(e);
    x0 = cod.solve(f);
    if ((e * x0 - f).cwiseAbs().maxCoeff() > 1e-7) return {};
    Eigen::FullPivLU<MatrixXd> lu(e);
    lu.setThreshold(1e-10);
    basis = lu.kernel();
    if (lu.rank() == static_cast<Eigen::Index>(dim)) basis = MatrixXd::Zero(static_cast<Eigen::Index>(dim), 0);
  }
  const std::size_t k = static_cast<std::size_t>(basis.cols());

  // Inequalities in t-space: (a N) t <= b - a x0.
  MatrixXd a(static_cast<Eigen::Index>(ineqs.size()), static_cast<Eigen::Index>(k));
  VectorXd b(static_cast<Eigen::Index>(ineqs.size()));
  for (std::size_t r = 0; r < ineqs.size(); ++r) {
    VectorXd row(static_cast<Eigen::Index>(dim));
    for (std::size_t c = 0; c < dim; ++c) row(static_cast<Eigen::Index>(c)) = ineqs[r]->a[c];
    a.row(static_cast<Eigen::Index>(r)) = (row.transpose() * basis);
    b(static_cast<Eigen::Index>(r)) = ineqs[r]->b - row.dot(x0);
  }

  std::vector<std::vector<double>> out;
  auto consider = [&](const VectorXd& t) {
    if (ineqs.size() && ((a * t) - b).maxCoeff() > 1e-9) return;
    VectorXd x = x0 + basis * t;
    std::vector<double> v(x.data(), x.data() + x.size());
    for (double& z : v) z = snap(z);
    if (!satisfies(constraints, v, 1e-7)) return;
    for (const auto& w : out)
      if (near(w, v, eps * 10)) return;
    out.push_back(std::move(v));
  };

  if (k == 0) {
    consider(VectorXd::Zero(0));
    return out;
  }
  for_each_subset(ineqs.size(), k, [&](const std::vector<std::size_t>& idx) {
    MatrixXd m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    VectorXd rhs(static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < k; ++i) {
      m.row(static_cast<Eigen::Index>(i)) = a.row(static_cast<Eigen::Index>(idx[i]));
      rhs(static_cast<Eigen::Index>(i)) = b(static_cast<Eigen::Index>(idx[i]));
    }
    Eigen::FullPivLU<MatrixXd> lu(m);
    lu.setThreshold(1e-10);
    if (!lu.isInvertible()) return;
    consider(lu.solve(rhs));
  });
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace cgame
