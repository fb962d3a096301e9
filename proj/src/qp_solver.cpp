#include "sysrisk/qp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>

#include "sysrisk/errors.hpp"

namespace sysrisk {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Which constraint of the original problem produced a reduced-variable bound.
struct BoundSource {
  enum class Kind { None, Original, Row } kind = Kind::None;
  Eigen::Index row = -1;
  double coef = 0.0;
};

// A row of the reduced equality system, traced back to the original problem.
struct RowOrigin {
  bool inequality = false;
  Eigen::Index index = 0;
};

struct ReducedProblem {
  Eigen::Index n_orig = 0;
  Eigen::Index n = 0;                      // reduced variables (kept originals + slacks)
  std::vector<Eigen::Index> orig_of;       // reduced -> original, -1 for slacks
  std::vector<Eigen::Index> slack_row;     // reduced -> inequality row, -1 otherwise
  std::vector<Eigen::Index> reduced_of;    // original -> reduced, -1 when fixed
  Eigen::VectorXd fixed_value;             // per original; meaningful when fixed
  std::vector<BoundSource> lower_src, upper_src;  // per original

  Eigen::MatrixXd H;  // n x n, may be empty
  bool diagonal_h = true;
  Eigen::VectorXd h_diag;
  Eigen::VectorXd c;
  Eigen::VectorXd l, u;
  SparseRows A;
  Eigen::VectorXd b;
  std::vector<RowOrigin> row_origin;
};

// Forward elimination on sparse rows; flags rows that are linear combinations
// of earlier rows. Returns nullopt when a dependent row has an inconsistent
// right-hand side.
std::optional<std::vector<bool>> independent_rows(const std::vector<std::vector<std::pair<Eigen::Index, double>>>& rows,
                                                  const std::vector<double>& rhs, Eigen::Index n) {
  struct Pivot {
    Eigen::Index col;
    std::vector<std::pair<Eigen::Index, double>> entries;
    double rhs;
  };
  std::vector<Pivot> pivots;
  std::vector<bool> keep(rows.size(), false);
  Eigen::VectorXd work = Eigen::VectorXd::Zero(n);
  std::vector<char> touched(static_cast<std::size_t>(n), 0);
  std::vector<Eigen::Index> support;

  double rhs_scale = 1.0;
  for (double v : rhs) rhs_scale = std::max(rhs_scale, std::abs(v));

  for (std::size_t r = 0; r < rows.size(); ++r) {
    double norm0 = 0.0;
    support.clear();
    for (auto [j, v] : rows[r]) {
      work(j) += v;
      if (!touched[static_cast<std::size_t>(j)]) {
        touched[static_cast<std::size_t>(j)] = 1;
        support.push_back(j);
      }
      norm0 = std::max(norm0, std::abs(v));
    }
    double b = rhs[r];
    for (const auto& piv : pivots) {
      const double lead = work(piv.col);
      if (lead == 0.0) continue;
      const double f = lead / piv.entries.front().second;
      for (auto [j, v] : piv.entries) {
        work(j) -= f * v;
        if (!touched[static_cast<std::size_t>(j)]) {
          touched[static_cast<std::size_t>(j)] = 1;
          support.push_back(j);
        }
      }
      work(piv.col) = 0.0;
      b -= f * piv.rhs;
    }
    Eigen::Index best = -1;
    double best_abs = 0.0;
    for (Eigen::Index j : support) {
      const double a = std::abs(work(j));
      if (a > best_abs) {
        best_abs = a;
        best = j;
      }
    }
    const double tol = 1e-9 * std::max(1.0, norm0);
    if (best < 0 || best_abs <= tol) {
      if (std::abs(b) > 1e-8 * rhs_scale) return std::nullopt;
    } else {
      Pivot piv{best, {}, b};
      piv.entries.emplace_back(best, work(best));
      for (Eigen::Index j : support)
        if (j != best && std::abs(work(j)) > tol * 1e-6) piv.entries.emplace_back(j, work(j));
      pivots.push_back(std::move(piv));
      keep[r] = true;
    }
    for (Eigen::Index j : support) {
      work(j) = 0.0;
      touched[static_cast<std::size_t>(j)] = 0;
    }
  }
  return keep;
}

enum class PresolveResult { Ok, Infeasible };

PresolveResult presolve(const QpProblem& p, ReducedProblem& red) {
  const Eigen::Index n = p.variables();
  red.n_orig = n;
  Eigen::VectorXd l = p.lower;
  Eigen::VectorXd u = Eigen::VectorXd::Constant(n, kInf);
  red.lower_src.assign(static_cast<std::size_t>(n), {});
  red.upper_src.assign(static_cast<std::size_t>(n), {});
  for (Eigen::Index j = 0; j < n; ++j)
    if (std::isfinite(l(j))) red.lower_src[static_cast<std::size_t>(j)].kind = BoundSource::Kind::Original;

  const Eigen::Index q = p.ineqA.rows();
  std::vector<Eigen::Index> general_ineq;
  double b_scale = 1.0;
  if (q > 0) b_scale = std::max(b_scale, p.ineqB.cwiseAbs().maxCoeff());
  for (Eigen::Index r = 0; r < q; ++r) {
    Eigen::Index nnz = 0, col = -1;
    for (Eigen::Index j = 0; j < n; ++j)
      if (p.ineqA(r, j) != 0.0) {
        ++nnz;
        col = j;
      }
    if (nnz == 0) {
      if (p.ineqB(r) < -1e-9 * b_scale) return PresolveResult::Infeasible;
      continue;
    }
    if (nnz > 1) {
      general_ineq.push_back(r);
      continue;
    }
    const double a = p.ineqA(r, col);
    const double bound = p.ineqB(r) / a;
    auto& src = a > 0.0 ? red.upper_src[static_cast<std::size_t>(col)]
                        : red.lower_src[static_cast<std::size_t>(col)];
    if (a > 0.0 && bound < u(col)) {
      u(col) = bound;
      src = {BoundSource::Kind::Row, r, a};
    } else if (a < 0.0 && bound > l(col)) {
      l(col) = bound;
      src = {BoundSource::Kind::Row, r, a};
    }
  }

  red.fixed_value = Eigen::VectorXd::Zero(n);
  red.reduced_of.assign(static_cast<std::size_t>(n), -1);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double gap = u(j) - l(j);
    const bool finite = std::isfinite(l(j)) && std::isfinite(u(j));
    if (finite && gap < -1e-9 * (1.0 + std::abs(l(j)))) return PresolveResult::Infeasible;
    if (finite && gap <= 1e-12 * (1.0 + std::abs(l(j)))) {
      red.fixed_value(j) = l(j);
      continue;
    }
    red.reduced_of[static_cast<std::size_t>(j)] = static_cast<Eigen::Index>(red.orig_of.size());
    red.orig_of.push_back(j);
    red.slack_row.push_back(-1);
  }
  for (Eigen::Index r : general_ineq) {
    red.orig_of.push_back(-1);
    red.slack_row.push_back(r);
  }
  red.n = static_cast<Eigen::Index>(red.orig_of.size());

  red.l.resize(red.n);
  red.u.resize(red.n);
  red.c.resize(red.n);
  const bool has_h = p.quadratic.size() > 0;
  Eigen::VectorXd fixed_x = red.fixed_value;
  Eigen::VectorXd grad_shift = Eigen::VectorXd::Zero(n);
  if (has_h) {
    Eigen::VectorXd xf = Eigen::VectorXd::Zero(n);
    for (Eigen::Index j = 0; j < n; ++j)
      if (red.reduced_of[static_cast<std::size_t>(j)] < 0) xf(j) = fixed_x(j);
    grad_shift = p.quadratic * xf;
  }
  for (Eigen::Index k = 0; k < red.n; ++k) {
    const Eigen::Index j = red.orig_of[static_cast<std::size_t>(k)];
    if (j >= 0) {
      red.l(k) = l(j);
      red.u(k) = u(j);
      red.c(k) = p.linear(j) + grad_shift(j);
    } else {
      red.l(k) = 0.0;
      red.u(k) = kInf;
      red.c(k) = 0.0;
    }
  }
  red.diagonal_h = true;
  red.h_diag = Eigen::VectorXd::Zero(red.n);
  if (has_h) {
    red.H = Eigen::MatrixXd::Zero(red.n, red.n);
    for (Eigen::Index a = 0; a < red.n; ++a) {
      const Eigen::Index ja = red.orig_of[static_cast<std::size_t>(a)];
      if (ja < 0) continue;
      for (Eigen::Index b = 0; b < red.n; ++b) {
        const Eigen::Index jb = red.orig_of[static_cast<std::size_t>(b)];
        if (jb < 0) continue;
        const double v = p.quadratic(ja, jb);
        red.H(a, b) = v;
        if (a != b && v != 0.0) red.diagonal_h = false;
      }
      red.h_diag(a) = red.H(a, a);
    }
    if (red.diagonal_h) red.H.resize(0, 0);
  }

  // Equality rows, then general inequality rows with their slack.
  std::vector<std::vector<std::pair<Eigen::Index, double>>> rows;
  std::vector<double> rhs;
  std::vector<RowOrigin> origin;
  auto add_row = [&](const Eigen::MatrixXd& M, const Eigen::VectorXd& bvec, Eigen::Index r,
                     bool inequality, Eigen::Index slack) {
    std::vector<std::pair<Eigen::Index, double>> entries;
    double b = bvec(r);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double v = M(r, j);
      if (v == 0.0) continue;
      const Eigen::Index k = red.reduced_of[static_cast<std::size_t>(j)];
      if (k < 0) b -= v * fixed_x(j);
      else entries.emplace_back(k, v);
    }
    if (slack >= 0) entries.emplace_back(slack, 1.0);
    rows.push_back(std::move(entries));
    rhs.push_back(b);
    origin.push_back({inequality, r});
  };
  for (Eigen::Index r = 0; r < p.eqA.rows(); ++r) add_row(p.eqA, p.eqB, r, false, -1);
  for (Eigen::Index k = 0; k < red.n; ++k)
    if (red.slack_row[static_cast<std::size_t>(k)] >= 0)
      add_row(p.ineqA, p.ineqB, red.slack_row[static_cast<std::size_t>(k)], true, k);

  const auto keep = independent_rows(rows, rhs, red.n);
  if (!keep) return PresolveResult::Infeasible;

  std::vector<Eigen::Triplet<double>> trips;
  std::vector<double> kept_rhs;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (!(*keep)[r]) continue;
    const auto row = static_cast<Eigen::Index>(kept_rhs.size());
    for (auto [k, v] : rows[r]) trips.emplace_back(row, k, v);
    kept_rhs.push_back(rhs[r]);
    red.row_origin.push_back(origin[r]);
  }
  red.A.resize(static_cast<Eigen::Index>(kept_rhs.size()), red.n);
  red.A.setFromTriplets(trips.begin(), trips.end());
  red.A.makeCompressed();
  red.b = Eigen::Map<Eigen::VectorXd>(kept_rhs.data(), static_cast<Eigen::Index>(kept_rhs.size()));
  return PresolveResult::Ok;
}

struct IpmResult {
  Eigen::VectorXd x, y, zl, zu;
  QpStatus status = QpStatus::IterationLimit;
  int iterations = 0;
};

// Newton system for the reduced problem, eliminated to normal equations
// (A K^-1 A') dy = rp - A K^-1 rhs with K = H + D.
class NewtonSolver {
 public:
  NewtonSolver(const ReducedProblem& red) : red_(red) {}

  bool factor(const Eigen::VectorXd& d) {
    const Eigen::Index n = red_.n;
    const double reg = 1e-11;
    if (red_.diagonal_h) {
      kinv_ = (red_.h_diag + d).array().max(reg).inverse().matrix();
      dense_k_ = false;
      if (red_.A.rows() > 0) {
        SparseRows scaled = red_.A * kinv_.asDiagonal();
        Eigen::SparseMatrix<double> m = scaled * red_.A.transpose();
        normal_ = Eigen::MatrixXd(m);
      }
    } else {
      Eigen::MatrixXd k = red_.H;
      k.diagonal().array() += reg * (1.0 + red_.H.diagonal().cwiseAbs().maxCoeff());
      k.diagonal() += d;
      kllt_.compute(k);
      if (kllt_.info() != Eigen::Success) return false;
      dense_k_ = true;
      if (red_.A.rows() > 0) {
        Eigen::MatrixXd at = Eigen::MatrixXd(red_.A.transpose());
        kllt_.matrixL().solveInPlace(at);
        normal_ = at.transpose() * at;
      }
    }
    (void)n;
    if (red_.A.rows() > 0) {
      const double scale = 1.0 + normal_.diagonal().cwiseAbs().maxCoeff();
      for (double shift : {1e-14, 1e-12, 1e-10, 1e-8}) {
        Eigen::MatrixXd m = normal_;
        m.diagonal().array() += shift * scale;
        mllt_.compute(m);
        if (mllt_.info() == Eigen::Success) return true;
      }
      return false;
    }
    return true;
  }

  // Solves (H+D) dx - A' dy = r1, A dx = r2.
  void solve(const Eigen::VectorXd& r1, const Eigen::VectorXd& r2, Eigen::VectorXd& dx,
             Eigen::VectorXd& dy) const {
    const Eigen::VectorXd w = apply_kinv(r1);
    if (red_.A.rows() > 0) {
      dy = mllt_.solve(r2 - red_.A * w);
      dx = apply_kinv(r1 + red_.A.transpose() * dy);
    } else {
      dy.resize(0);
      dx = w;
    }
  }

 private:
  Eigen::VectorXd apply_kinv(const Eigen::VectorXd& v) const {
    if (!dense_k_) return kinv_.cwiseProduct(v);
    return kllt_.solve(v);
  }

  const ReducedProblem& red_;
  Eigen::VectorXd kinv_;
  bool dense_k_ = false;
  Eigen::LLT<Eigen::MatrixXd> kllt_;
  Eigen::MatrixXd normal_;
  Eigen::LLT<Eigen::MatrixXd> mllt_;
};

IpmResult interior_point(const ReducedProblem& red, double tol, int max_iterations) {
  const Eigen::Index n = red.n;
  const Eigen::Index m = red.A.rows();
  IpmResult res;
  std::vector<char> has_l(static_cast<std::size_t>(n)), has_u(static_cast<std::size_t>(n));
  Eigen::Index n_bounds = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    has_l[static_cast<std::size_t>(j)] = std::isfinite(red.l(j));
    has_u[static_cast<std::size_t>(j)] = std::isfinite(red.u(j));
    n_bounds += has_l[static_cast<std::size_t>(j)] + has_u[static_cast<std::size_t>(j)];
  }
  const Eigen::VectorXd lmask = Eigen::Map<const Eigen::Array<char, Eigen::Dynamic, 1>>(has_l.data(), n).cast<double>();
  const Eigen::VectorXd umask = Eigen::Map<const Eigen::Array<char, Eigen::Dynamic, 1>>(has_u.data(), n).cast<double>();

  const double c_scale = std::max(1.0, red.c.size() ? red.c.cwiseAbs().maxCoeff() : 0.0);
  const double b_scale = std::max(1.0, m ? red.b.cwiseAbs().maxCoeff() : 0.0);

  Eigen::VectorXd x(n), zl = Eigen::VectorXd::Zero(n), zu = Eigen::VectorXd::Zero(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const bool lo = has_l[static_cast<std::size_t>(j)], up = has_u[static_cast<std::size_t>(j)];
    if (lo && up) x(j) = 0.5 * (red.l(j) + red.u(j));
    else if (lo) x(j) = red.l(j) + 1.0;
    else if (up) x(j) = red.u(j) - 1.0;
    else x(j) = 0.0;
    if (lo) zl(j) = c_scale;
    if (up) zu(j) = c_scale;
  }
  Eigen::VectorXd y = Eigen::VectorXd::Zero(m);

  auto hx = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    if (red.diagonal_h) return red.h_diag.cwiseProduct(v);
    return red.H * v;
  };

  NewtonSolver newton(red);
  const bool quadratic = !red.diagonal_h || (red.h_diag.size() > 0 && red.h_diag.cwiseAbs().maxCoeff() > 0.0);
  Eigen::VectorXd dx, dy, dx_aff, dy_aff;

  for (int it = 0; it < max_iterations; ++it) {
    res.iterations = it;
    const Eigen::VectorXd sl = (x - red.l).cwiseProduct(lmask) + (Eigen::VectorXd::Ones(n) - lmask);
    const Eigen::VectorXd su = (red.u - x).cwiseProduct(umask) + (Eigen::VectorXd::Ones(n) - umask);
    // Masked slack vectors use 1 where no bound exists; the multipliers are 0 there.
    Eigen::VectorXd sl_safe = sl, su_safe = su;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!has_l[static_cast<std::size_t>(j)]) sl_safe(j) = 1.0;
      if (!has_u[static_cast<std::size_t>(j)]) su_safe(j) = 1.0;
    }
    const Eigen::VectorXd rp = m ? Eigen::VectorXd(red.b - red.A * x) : Eigen::VectorXd();
    const Eigen::VectorXd rd = red.c + hx(x) - (m ? Eigen::VectorXd(red.A.transpose() * y) : Eigen::VectorXd::Zero(n)) - zl + zu;
    const double comp = n_bounds ? (sl_safe.cwiseProduct(zl).sum() + su_safe.cwiseProduct(zu).sum()) : 0.0;
    const double mu = n_bounds ? comp / static_cast<double>(n_bounds) : 0.0;
    const double comp_max = n_bounds ? std::max(sl_safe.cwiseProduct(zl).maxCoeff(), su_safe.cwiseProduct(zu).maxCoeff()) : 0.0;
    const double rp_norm = m ? rp.cwiseAbs().maxCoeff() : 0.0;
    const double rd_norm = n ? rd.cwiseAbs().maxCoeff() : 0.0;

    if (rp_norm <= tol * b_scale && rd_norm <= tol * c_scale && comp_max <= 1e-2 * tol) {
      res.status = QpStatus::Optimal;
      break;
    }
    const double x_norm = n ? x.cwiseAbs().maxCoeff() : 0.0;
    const double dual_norm = std::max({m ? y.cwiseAbs().maxCoeff() : 0.0, n ? zl.maxCoeff() : 0.0,
                                       n ? zu.maxCoeff() : 0.0});
    if (x_norm > 1e10 * b_scale && rd_norm < 1e-6 * x_norm) {
      res.status = QpStatus::Unbounded;
      break;
    }
    if (dual_norm > 1e10 * c_scale && rp_norm > tol * b_scale) {
      res.status = QpStatus::Infeasible;
      break;
    }
    if (x_norm > 1e12 * b_scale) {
      res.status = QpStatus::Unbounded;
      break;
    }

    const Eigen::VectorXd d = zl.cwiseQuotient(sl_safe).cwiseProduct(lmask) +
                              zu.cwiseQuotient(su_safe).cwiseProduct(umask);
    if (!newton.factor(d)) {
      res.status = QpStatus::IterationLimit;
      break;
    }

    auto directions = [&](const Eigen::VectorXd& tl, const Eigen::VectorXd& tu, Eigen::VectorXd& ddx,
                          Eigen::VectorXd& ddy, Eigen::VectorXd& dzl, Eigen::VectorXd& dzu) {
      Eigen::VectorXd rhs = -rd;
      rhs += (tl.cwiseQuotient(sl_safe) - zl).cwiseProduct(lmask);
      rhs -= (tu.cwiseQuotient(su_safe) - zu).cwiseProduct(umask);
      newton.solve(rhs, m ? rp : Eigen::VectorXd(), ddx, ddy);
      dzl = ((tl - sl_safe.cwiseProduct(zl) - zl.cwiseProduct(ddx)).cwiseQuotient(sl_safe)).cwiseProduct(lmask);
      dzu = ((tu - su_safe.cwiseProduct(zu) + zu.cwiseProduct(ddx)).cwiseQuotient(su_safe)).cwiseProduct(umask);
    };
    auto max_step = [&](const Eigen::VectorXd& ddx, const Eigen::VectorXd& dzl, const Eigen::VectorXd& dzu,
                        double& ap, double& ad) {
      ap = 1.0;
      ad = 1.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (has_l[static_cast<std::size_t>(j)]) {
          if (ddx(j) < 0.0) ap = std::min(ap, -sl_safe(j) / ddx(j));
          if (dzl(j) < 0.0) ad = std::min(ad, -zl(j) / dzl(j));
        }
        if (has_u[static_cast<std::size_t>(j)]) {
          if (ddx(j) > 0.0) ap = std::min(ap, su_safe(j) / ddx(j));
          if (dzu(j) < 0.0) ad = std::min(ad, -zu(j) / dzu(j));
        }
      }
    };

    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd dzl_aff, dzu_aff;
    directions(zero, zero, dx_aff, dy_aff, dzl_aff, dzu_aff);
    double ap_aff, ad_aff;
    max_step(dx_aff, dzl_aff, dzu_aff, ap_aff, ad_aff);
    if (quadratic) ap_aff = ad_aff = std::min(ap_aff, ad_aff);

    double sigma = 0.0;
    Eigen::VectorXd tl = zero, tu = zero;
    if (n_bounds) {
      const Eigen::VectorXd sl_a = sl_safe + ap_aff * dx_aff;
      const Eigen::VectorXd su_a = su_safe - ap_aff * dx_aff;
      const double mu_aff = ((sl_a.cwiseProduct(zl + ad_aff * dzl_aff)).cwiseProduct(lmask).sum() +
                             (su_a.cwiseProduct(zu + ad_aff * dzu_aff)).cwiseProduct(umask).sum()) /
                            static_cast<double>(n_bounds);
      sigma = std::pow(std::max(mu_aff, 0.0) / mu, 3.0);
      sigma = std::min(sigma, 1.0);
      tl = (Eigen::VectorXd::Constant(n, sigma * mu) - dx_aff.cwiseProduct(dzl_aff)).cwiseProduct(lmask);
      tu = (Eigen::VectorXd::Constant(n, sigma * mu) + dx_aff.cwiseProduct(dzu_aff)).cwiseProduct(umask);
    }
    Eigen::VectorXd dzl, dzu;
    directions(tl, tu, dx, dy, dzl, dzu);
    double ap, ad;
    max_step(dx, dzl, dzu, ap, ad);
    const double eta = 0.99;
    ap = std::min(1.0, eta * ap);
    ad = std::min(1.0, eta * ad);
    if (quadratic) ap = ad = std::min(ap, ad);

    x += ap * dx;
    if (m) y += ad * dy;
    zl += ad * dzl;
    zu += ad * dzu;
    res.iterations = it + 1;
  }
  res.x = x;
  res.y = y;
  res.zl = zl;
  res.zu = zu;
  return res;
}

QpSolution expand(const QpProblem& p, const ReducedProblem& red, const IpmResult& ipm) {
  const Eigen::Index n = p.variables();
  QpSolution sol;
  sol.status = ipm.status;
  sol.iterations = ipm.iterations;
  sol.x = red.fixed_value;
  for (Eigen::Index k = 0; k < red.n; ++k) {
    const Eigen::Index j = red.orig_of[static_cast<std::size_t>(k)];
    if (j >= 0) sol.x(j) = ipm.x(k);
  }
  sol.eqDuals = Eigen::VectorXd::Zero(p.eqA.rows());
  sol.ineqDuals = Eigen::VectorXd::Zero(p.ineqA.rows());
  sol.boundDuals = Eigen::VectorXd::Zero(n);

  for (std::size_t r = 0; r < red.row_origin.size(); ++r) {
    const auto& o = red.row_origin[r];
    if (!o.inequality) sol.eqDuals(o.index) = -ipm.y(static_cast<Eigen::Index>(r));
  }
  for (Eigen::Index k = 0; k < red.n; ++k) {
    const Eigen::Index row = red.slack_row[static_cast<std::size_t>(k)];
    if (row >= 0) sol.ineqDuals(row) = ipm.zl(k);
  }
  auto assign_lower = [&](Eigen::Index j, double value) {
    const auto& src = red.lower_src[static_cast<std::size_t>(j)];
    if (src.kind == BoundSource::Kind::Original) sol.boundDuals(j) = value;
    else if (src.kind == BoundSource::Kind::Row) sol.ineqDuals(src.row) = value / -src.coef;
  };
  auto assign_upper = [&](Eigen::Index j, double value) {
    const auto& src = red.upper_src[static_cast<std::size_t>(j)];
    if (src.kind == BoundSource::Kind::Row) sol.ineqDuals(src.row) = value / src.coef;
  };
  for (Eigen::Index k = 0; k < red.n; ++k) {
    const Eigen::Index j = red.orig_of[static_cast<std::size_t>(k)];
    if (j < 0) continue;
    assign_lower(j, ipm.zl(k));
    assign_upper(j, ipm.zu(k));
  }

  Eigen::VectorXd grad = p.linear;
  if (p.quadratic.size() > 0) grad += p.quadratic * sol.x;
  if (p.eqA.rows() > 0) grad += p.eqA.transpose() * sol.eqDuals;
  // Fixed variables: the bound multiplier absorbs the remaining reduced cost.
  Eigen::VectorXd general_ineq = sol.ineqDuals;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (red.reduced_of[static_cast<std::size_t>(j)] >= 0) continue;
    const auto& lo = red.lower_src[static_cast<std::size_t>(j)];
    const auto& up = red.upper_src[static_cast<std::size_t>(j)];
    if (lo.kind == BoundSource::Kind::Row) general_ineq(lo.row) = 0.0;
    if (up.kind == BoundSource::Kind::Row) general_ineq(up.row) = 0.0;
  }
  if (p.ineqA.rows() > 0) grad += p.ineqA.transpose() * general_ineq;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (red.reduced_of[static_cast<std::size_t>(j)] >= 0) continue;
    const double g = grad(j);
    if (g >= 0.0) assign_lower(j, g);
    else assign_upper(j, -g);
  }

  sol.objective = p.linear.dot(sol.x) + p.constant;
  if (p.quadratic.size() > 0) sol.objective += 0.5 * sol.x.dot(p.quadratic * sol.x);
  return sol;
}

}  // namespace

std::string_view to_string(QpStatus status) {
  switch (status) {
    case QpStatus::Optimal: return "Optimal";
    case QpStatus::Infeasible: return "Infeasible";
    case QpStatus::Unbounded: return "Unbounded";
    case QpStatus::IterationLimit: return "IterationLimit";
  }
  return "?";
}

double KktResiduals::max() const {
  return std::max({stationarity, primal, complementarity, dual_sign});
}

void QpProblem::validate() const {
  const Eigen::Index n = variables();
  if (lower.size() != n) throw InputError("lower bound vector has wrong length");
  if (quadratic.size() > 0) {
    if (quadratic.rows() != n || quadratic.cols() != n) throw InputError("quadratic term has wrong shape");
    if ((quadratic - quadratic.transpose()).cwiseAbs().maxCoeff() > 1e-10)
      throw InputError("quadratic term is not symmetric");
    // Pivoted LDLT preserves inertia; fall back to eigenvalues when it reports trouble.
    const double scale = std::max(1.0, quadratic.diagonal().cwiseAbs().maxCoeff());
    Eigen::LDLT<Eigen::MatrixXd> ldlt(quadratic);
    double min_pivot = ldlt.info() == Eigen::Success ? ldlt.vectorD().minCoeff() : -kInf;
    if (min_pivot < -1e-8 * scale)
      min_pivot = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(quadratic, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
    if (min_pivot < -1e-8) throw InputError("quadratic term is not positive semidefinite");
  }
  if (eqA.rows() > 0 && eqA.cols() != n) throw InputError("equality matrix has wrong width");
  if (eqA.rows() != eqB.size()) throw InputError("equality rows and right-hand side differ");
  if (ineqA.rows() > 0 && ineqA.cols() != n) throw InputError("inequality matrix has wrong width");
  if (ineqA.rows() != ineqB.size()) throw InputError("inequality rows and right-hand side differ");
  for (Eigen::Index j = 0; j < n; ++j)
    if (std::isnan(lower(j)) || lower(j) == kInf) throw InputError("invalid lower bound");
}

QpProblem QpProblem::nonnegative(Eigen::Index n) {
  QpProblem p;
  p.linear = Eigen::VectorXd::Zero(n);
  p.lower = Eigen::VectorXd::Zero(n);
  p.eqA.resize(0, n);
  p.ineqA.resize(0, n);
  return p;
}

QpSolution solve_qp(const QpProblem& problem, double tol, int max_iterations) {
  if (!(tol > 0.0)) throw ParameterError("solver tolerance must be positive");
  problem.validate();
  const Eigen::Index n = problem.variables();
  if (max_iterations <= 0) max_iterations = static_cast<int>(std::max<Eigen::Index>(100, 50 * n));

  ReducedProblem red;
  if (presolve(problem, red) == PresolveResult::Infeasible) {
    QpSolution sol;
    sol.status = QpStatus::Infeasible;
    sol.x = Eigen::VectorXd::Zero(n);
    sol.eqDuals = Eigen::VectorXd::Zero(problem.eqA.rows());
    sol.ineqDuals = Eigen::VectorXd::Zero(problem.ineqA.rows());
    sol.boundDuals = Eigen::VectorXd::Zero(n);
    return sol;
  }
  const IpmResult ipm = interior_point(red, tol, max_iterations);
  return expand(problem, red, ipm);
}

QpSolution solve_lp(const QpProblem& problem, double tol, int max_iterations) {
  if (problem.quadratic.size() > 0 && problem.quadratic.cwiseAbs().maxCoeff() != 0.0)
    throw ContractError("solve_lp called with a nonzero quadratic term");
  return solve_qp(problem, tol, max_iterations);
}

KktResiduals kkt_residuals(const QpProblem& p, const QpSolution& s) {
  KktResiduals r;
  Eigen::VectorXd grad = p.linear - s.boundDuals;
  if (p.quadratic.size() > 0) grad += p.quadratic * s.x;
  if (p.eqA.rows() > 0) grad += p.eqA.transpose() * s.eqDuals;
  if (p.ineqA.rows() > 0) grad += p.ineqA.transpose() * s.ineqDuals;
  r.stationarity = grad.size() ? grad.cwiseAbs().maxCoeff() : 0.0;
  if (p.eqA.rows() > 0) r.primal = (p.eqA * s.x - p.eqB).cwiseAbs().maxCoeff();
  if (p.ineqA.rows() > 0) {
    const Eigen::VectorXd slack = p.ineqB - p.ineqA * s.x;
    r.primal = std::max(r.primal, (-slack).cwiseMax(0.0).maxCoeff());
    r.complementarity = std::max(r.complementarity, s.ineqDuals.cwiseProduct(slack).cwiseAbs().maxCoeff());
    r.dual_sign = std::max(r.dual_sign, (-s.ineqDuals).cwiseMax(0.0).maxCoeff());
  }
  for (Eigen::Index j = 0; j < p.variables(); ++j) {
    if (std::isfinite(p.lower(j))) {
      r.primal = std::max(r.primal, p.lower(j) - s.x(j));
      r.complementarity = std::max(r.complementarity, std::abs(s.boundDuals(j) * (s.x(j) - p.lower(j))));
    } else {
      r.dual_sign = std::max(r.dual_sign, std::abs(s.boundDuals(j)));
    }
    r.dual_sign = std::max(r.dual_sign, -s.boundDuals(j));
  }
  return r;
}

}  // namespace sysrisk

namespace sysrisk {

BoxQpResult solve_box_qp(const Eigen::MatrixXd& H, const Eigen::VectorXd& g, const Eigen::VectorXd& lower,
                         const Eigen::VectorXd& upper, const Eigen::VectorXd& start, int max_iterations,
                         BoxQpCache* cache) {
  const Eigen::Index n = g.size();
  BoxQpResult res;
  BoxQpCache local;
  if (!cache) cache = &local;
  Eigen::VectorXd x = start.cwiseMax(lower).cwiseMin(upper);
  const double scale = 1.0 + (n ? H.diagonal().cwiseAbs().maxCoeff() : 0.0);
  const double delta = 1e-13 * scale;

  // 0 free, -1 held at lower, +1 held at upper.
  std::vector<int> state(static_cast<std::size_t>(n), 0);
  Eigen::VectorXd grad = H * x + g;
  const double gtol = 1e-12 * (1.0 + g.cwiseAbs().maxCoeff() + scale * x.cwiseAbs().maxCoeff());
  for (Eigen::Index j = 0; j < n; ++j) {
    if (x(j) <= lower(j) && grad(j) >= 0.0) state[static_cast<std::size_t>(j)] = -1;
    else if (x(j) >= upper(j) && grad(j) <= 0.0) state[static_cast<std::size_t>(j)] = 1;
  }

  std::vector<Eigen::Index> free_idx;
  Eigen::MatrixXd hf;
  Eigen::VectorXd rhs, d;
  for (int it = 0; it < max_iterations; ++it) {
    res.iterations = it + 1;
    free_idx.clear();
    for (Eigen::Index j = 0; j < n; ++j)
      if (state[static_cast<std::size_t>(j)] == 0) free_idx.push_back(j);
    const auto nf = static_cast<Eigen::Index>(free_idx.size());

    bool stationary = true;
    if (nf > 0) {
      rhs.resize(nf);
      for (Eigen::Index a = 0; a < nf; ++a) rhs(a) = -grad(free_idx[static_cast<std::size_t>(a)]);
      stationary = rhs.cwiseAbs().maxCoeff() <= gtol;
    }
    if (!stationary) {
      if (!cache->valid || cache->free != free_idx) {
        hf.resize(nf, nf);
        for (Eigen::Index a = 0; a < nf; ++a) {
          for (Eigen::Index b = 0; b < nf; ++b)
            hf(a, b) = H(free_idx[static_cast<std::size_t>(a)], free_idx[static_cast<std::size_t>(b)]);
          hf(a, a) += delta;
        }
        cache->factor.compute(hf);
        cache->free = free_idx;
        cache->valid = true;
      }
      d = cache->factor.solve(rhs);
      double alpha = 1.0;
      Eigen::Index block = -1;
      int block_side = 0;
      for (Eigen::Index a = 0; a < nf; ++a) {
        const Eigen::Index j = free_idx[static_cast<std::size_t>(a)];
        if (d(a) < 0.0 && std::isfinite(lower(j))) {
          const double t = (lower(j) - x(j)) / d(a);
          if (t < alpha) {
            alpha = t;
            block = j;
            block_side = -1;
          }
        } else if (d(a) > 0.0 && std::isfinite(upper(j))) {
          const double t = (upper(j) - x(j)) / d(a);
          if (t < alpha) {
            alpha = t;
            block = j;
            block_side = 1;
          }
        }
      }
      if (!std::isfinite(d.squaredNorm()) || (block < 0 && d.cwiseAbs().maxCoeff() > 1e12 * (1.0 + x.cwiseAbs().maxCoeff())))
      {
        res.x = x;
        res.gradient = grad;
        return res;  // no minimizer in the free subspace
      }
      alpha = std::max(alpha, 0.0);
      for (Eigen::Index a = 0; a < nf; ++a) x(free_idx[static_cast<std::size_t>(a)]) += alpha * d(a);
      if (block >= 0) {
        x(block) = block_side < 0 ? lower(block) : upper(block);
        state[static_cast<std::size_t>(block)] = block_side;
      }
      grad = H * x + g;
      if (block >= 0) continue;
      // Full Newton step: the free gradient is zero up to regularization.
    }
    // Release the held bound whose multiplier has the wrong sign by the widest margin.
    Eigen::Index release = -1;
    double worst = gtol;
    for (Eigen::Index j = 0; j < n; ++j) {
      const int s = state[static_cast<std::size_t>(j)];
      const double v = s < 0 ? -grad(j) : s > 0 ? grad(j) : 0.0;
      if (v > worst) {
        worst = v;
        release = j;
      }
    }
    if (release < 0) {
      bool done = true;
      for (Eigen::Index a = 0; a < nf && done; ++a)
        done = std::abs(grad(free_idx[static_cast<std::size_t>(a)])) <= 1e-9 * (1.0 + g.cwiseAbs().maxCoeff());
      if (done) {
        res.optimal = true;
        break;
      }
      continue;
    }
    state[static_cast<std::size_t>(release)] = 0;
  }
  res.x = x;
  res.gradient = grad;
  return res;
}

}  // namespace sysrisk
