#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

namespace oracle {

double mean(const Vec& z, const Vec& p) {
  double m = 0.0;
  for (std::size_t s = 0; s < z.size(); ++s) m += p[s] * z[s];
  return m;
}

double avar_sorted_tail(const Vec& z, const Vec& p, double alpha) {
  std::vector<std::size_t> idx(z.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return z[a] > z[b]; });
  double left = alpha, acc = 0.0;
  for (std::size_t s : idx) {
    const double take = std::min(left, p[s]);
    acc += take * z[s];
    left -= take;
    if (left <= 0.0) break;
  }
  return acc / alpha;
}

double mean_semideviation(const Vec& z, const Vec& p, double order, double kappa) {
  const double m = mean(z, p);
  double acc = 0.0;
  for (std::size_t s = 0; s < z.size(); ++s) acc += p[s] * std::pow(std::max(z[s] - m, 0.0), order);
  return m + kappa * std::pow(acc, 1.0 / order);
}

double higher_order(const Vec& z, const Vec& p, double alpha, double order) {
  auto f = [&](double t) {
    double acc = 0.0;
    for (std::size_t s = 0; s < z.size(); ++s) acc += p[s] * std::pow(std::max(z[s] - t, 0.0), order);
    return t + std::pow(acc, 1.0 / order) / alpha;
  };
  const double zmin = *std::min_element(z.begin(), z.end());
  const double zmax = *std::max_element(z.begin(), z.end());
  double d = zmax - zmin + 1.0;
  double lo = zmin;
  while (f(lo - d) < f(lo) && d < 1e12) {
    lo -= d;
    d *= 2.0;
  }
  double a = lo - d, b = zmax;
  for (int k = 0; k < 400 && b - a > 1e-13 * (1.0 + std::abs(a) + std::abs(b)); ++k) {
    const double m1 = a + (b - a) / 3.0, m2 = b - (b - a) / 3.0;
    if (f(m1) <= f(m2))
      b = m2;
    else
      a = m1;
  }
  return f(0.5 * (a + b));
}

double joint_cdf(const Eigen::MatrixXd& x, const Vec& p, const Eigen::VectorXd& v) {
  double F = 0.0;
  for (Eigen::Index s = 0; s < x.rows(); ++s) {
    bool below = true;
    for (Eigen::Index i = 0; i < x.cols(); ++i) below = below && x(s, i) <= v(i);
    if (below) F += p[static_cast<std::size_t>(s)];
  }
  return F;
}

std::vector<Eigen::VectorXd> full_grid(const Eigen::MatrixXd& x) {
  const Eigen::Index m = x.cols();
  std::vector<Vec> axes(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) {
    auto& a = axes[static_cast<std::size_t>(i)];
    for (Eigen::Index s = 0; s < x.rows(); ++s) a.push_back(x(s, i));
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
  }
  std::vector<Eigen::VectorXd> grid;
  std::vector<std::size_t> pos(static_cast<std::size_t>(m), 0);
  while (true) {
    Eigen::VectorXd v(m);
    for (Eigen::Index i = 0; i < m; ++i) v(i) = axes[static_cast<std::size_t>(i)][pos[static_cast<std::size_t>(i)]];
    grid.push_back(v);
    std::size_t i = 0;
    while (i < pos.size() && ++pos[i] == axes[i].size()) pos[i++] = 0;
    if (i == pos.size()) break;
  }
  return grid;
}

std::vector<Eigen::VectorXd> p_efficient_brute(const Eigen::MatrixXd& x, const Vec& p, double level) {
  std::vector<Eigen::VectorXd> feasible;
  for (const auto& v : full_grid(x))
    if (joint_cdf(x, p, v) >= level - 1e-12) feasible.push_back(v);
  std::vector<Eigen::VectorXd> out;
  for (const auto& v : feasible) {
    bool dominated = false;
    for (const auto& u : feasible)
      if ((u.array() <= v.array()).all() && (u.array() < v.array()).any()) dominated = true;
    if (!dominated) out.push_back(v);
  }
  return out;
}

double vmavar_brute(const Eigen::MatrixXd& x, const Vec& p, double alpha, const Eigen::VectorXd& c) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& v : full_grid(x)) {
    if (joint_cdf(x, p, v) < 1.0 - alpha - 1e-12) continue;
    double tail = 0.0;
    for (Eigen::Index s = 0; s < x.rows(); ++s)
      tail += p[static_cast<std::size_t>(s)] * c.dot((x.row(s).transpose() - v).cwiseMax(0.0));
    best = std::min(best, c.dot(v) + tail / alpha);
  }
  return best;
}

double mavar_brute(const Eigen::MatrixXd& x, const Vec& p, double level, const Eigen::VectorXd& w) {
  double mass = 0.0, acc = 0.0;
  for (Eigen::Index s = 0; s < x.rows(); ++s) {
    const Eigen::VectorXd xs = x.row(s).transpose();
    if (joint_cdf(x, p, xs) >= level - 1e-12) {
      mass += p[static_cast<std::size_t>(s)];
      acc += p[static_cast<std::size_t>(s)] * w.dot(xs);
    }
  }
  return mass > 0.0 ? acc / mass : std::numeric_limits<double>::quiet_NaN();
}

namespace {

// Accelerated projected gradient with adaptive restart.
PgResult fista(const Eigen::MatrixXd& H, const Eigen::VectorXd& c, Eigen::VectorXd x,
               const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& project, double tol, int max_iter) {
  const double L = std::max(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(H).eigenvalues().maxCoeff(), 1e-12);
  Eigen::VectorXd y = x;
  double t = 1.0;
  auto obj = [&](const Eigen::VectorXd& v) { return 0.5 * v.dot(H * v) + c.dot(v); };
  for (int k = 0; k < max_iter; ++k) {
    const Eigen::VectorXd next = project(y - (H * y + c) / L);
    if (obj(next) > obj(x)) {
      t = 1.0;
      y = x;
      continue;
    }
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = next + ((t - 1.0) / tn) * (next - x);
    x = next;
    t = tn;
    if ((x - project(x - (H * x + c) / L)).norm() <= tol) break;
  }
  return {x, obj(x)};
}

}  // namespace

PgResult projected_gradient_box(const Eigen::MatrixXd& H, const Eigen::VectorXd& c, const Eigen::VectorXd& lower,
                                const Eigen::VectorXd& upper, double tol, int max_iter) {
  auto project = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd { return v.cwiseMax(lower).cwiseMin(upper); };
  return fista(H, c, project(Eigen::VectorXd::Zero(c.size())), project, tol, max_iter);
}

PgResult projected_gradient_simplex(const Eigen::MatrixXd& H, const Eigen::VectorXd& c, double total, double tol,
                                    int max_iter) {
  auto project = [total](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    Vec u(v.data(), v.data() + v.size());
    std::sort(u.begin(), u.end(), std::greater<>());
    double acc = 0.0, theta = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) {
      acc += u[j];
      const double th = (acc - total) / static_cast<double>(j + 1);
      if (u[j] - th > 0.0) theta = th;
    }
    return (v.array() - theta).cwiseMax(0.0).matrix();
  };
  const Eigen::Index n = c.size();
  return fista(H, c, Eigen::VectorXd::Constant(n, total / static_cast<double>(n)), project, tol, max_iter);
}

}  // namespace oracle
