#pragma once

// Primal-dual interior-point solver for standard-form conic programs
//
//   minimize  c'x   subject to  A x = b,  x in K,
//
// where K is a product of free, nonnegative and second-order cones laid out
// as consecutive blocks of x. Internally the problem is embedded in a
// homogeneous self-dual model (so infeasibility yields certificates) and
// solved by Mehrotra predictor-corrector steps under Nesterov-Todd scaling.

#include <Eigen/Sparse>
#include <Eigen/OrderingMethods>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pnk {

enum class ConeKind { Free, Nonneg, SecondOrder };

struct ConeBlock {
  ConeKind kind = ConeKind::Nonneg;
  int dim = 0;
};

struct ConeProblem {
  Eigen::VectorXd c;
  Eigen::SparseMatrix<double> A;  // rows = constraints, cols = variables
  Eigen::VectorXd b;
  std::vector<ConeBlock> cones;
  std::vector<std::string> names;  // optional, one per variable

  int num_vars() const { return static_cast<int>(c.size()); }
  int num_rows() const { return static_cast<int>(b.size()); }

  void validate() const {
    int total = 0;
    for (const auto& k : cones) {
      if (k.dim < 0) throw std::invalid_argument("cone with negative dimension");
      if (k.kind == ConeKind::SecondOrder && k.dim < 2)
        throw std::invalid_argument("second-order cone needs dimension >= 2");
      total += k.dim;
    }
    if (total != num_vars()) throw std::invalid_argument("cone dimensions do not partition x");
    if (A.cols() != num_vars() || A.rows() != num_rows())
      throw std::invalid_argument("constraint matrix shape does not match c and b");
    if (!names.empty() && static_cast<int>(names.size()) != num_vars())
      throw std::invalid_argument("name map size does not match variable count");
  }
};

enum class ConeStatus { Optimal, PrimalInfeasible, DualInfeasible, IterationLimit, NumericalFailure };

inline const char* to_string(ConeStatus s) {
  switch (s) {
    case ConeStatus::Optimal: return "optimal";
    case ConeStatus::PrimalInfeasible: return "primal-infeasible";
    case ConeStatus::DualInfeasible: return "dual-infeasible";
    case ConeStatus::IterationLimit: return "iteration-limit";
    case ConeStatus::NumericalFailure: return "numerical-failure";
  }
  return "unknown";
}

struct ConeResiduals {
  double primal = 0.0;
  double dual = 0.0;
  double gap = 0.0;
};

/// For status Optimal, (x, y, s) is a primal-dual solution with dual
/// c - A'y = s, s in K*. For PrimalInfeasible, (y, s) is a Farkas ray with
/// A'y + s = 0, b'y = 1. For DualInfeasible, x is a ray with Ax = 0, c'x = -1.
struct ConeSolution {
  ConeStatus status = ConeStatus::NumericalFailure;
  Eigen::VectorXd x;
  Eigen::VectorXd y;
  Eigen::VectorXd s;
  double objective = std::numeric_limits<double>::quiet_NaN();
  ConeResiduals res;
  int iterations = 0;
};

struct ConeOptions {
  double tol = 1e-8;
  int max_iter = 200;
  double regularization = 1e-8;
  int refinement_passes = 2;
  // On numerical failure the solve restarts with ten times the regularization.
  int regularization_retries = 2;
};

/// Relative residuals of (x, y, s), recomputed from the data alone:
/// primal ||Ax-b||/(1+||b||), dual ||c-A'y-s||/(1+||c||),
/// gap |c'x-b'y|/(1+|c'x|+|b'y|).
inline ConeResiduals residuals(const ConeProblem& p, const ConeSolution& sol) {
  if (sol.x.size() != p.num_vars() || sol.s.size() != p.num_vars() || sol.y.size() != p.num_rows())
    throw std::invalid_argument("solution dimensions do not match problem");
  ConeResiduals r;
  r.primal = (p.A * sol.x - p.b).norm() / (1.0 + p.b.norm());
  r.dual = (p.c - p.A.transpose() * sol.y - sol.s).norm() / (1.0 + p.c.norm());
  const double pc = p.c.dot(sol.x);
  const double dc = p.b.dot(sol.y);
  r.gap = std::abs(pc - dc) / (1.0 + std::abs(pc) + std::abs(dc));
  return r;
}

/// Distance-style violation of x in K: the largest amount by which a
/// nonnegative coordinate is negative or a cone head falls short of its tail norm.
inline double cone_violation(const ConeProblem& p, const Eigen::VectorXd& x) {
  double worst = 0.0;
  int at = 0;
  for (const auto& k : p.cones) {
    if (k.kind == ConeKind::Nonneg) {
      for (int i = 0; i < k.dim; ++i) worst = std::max(worst, -x[at + i]);
    } else if (k.kind == ConeKind::SecondOrder) {
      worst = std::max(worst, x.segment(at + 1, k.dim - 1).norm() - x[at]);
    }
    at += k.dim;
  }
  return worst;
}

/// Plain-text dump: sizes, c, A as (row col value) triplets, b, cone layout.
inline void write_cone_problem(std::ostream& out, const ConeProblem& p) {
  out.precision(17);
  out << "vars " << p.num_vars() << " rows " << p.num_rows() << " nnz " << p.A.nonZeros() << '\n';
  out << "c";
  for (int j = 0; j < p.num_vars(); ++j) out << ' ' << p.c[j];
  out << "\nA\n";
  for (int j = 0; j < p.A.outerSize(); ++j)
    for (Eigen::SparseMatrix<double>::InnerIterator it(p.A, j); it; ++it)
      out << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
  out << "b";
  for (int i = 0; i < p.num_rows(); ++i) out << ' ' << p.b[i];
  out << "\ncones";
  for (const auto& k : p.cones)
    out << ' ' << (k.kind == ConeKind::Free ? 'f' : k.kind == ConeKind::Nonneg ? 'l' : 'q') << k.dim;
  out << '\n';
}

/// Incremental construction of a ConeProblem. Variables are appended in
/// blocks; each add_* call returns the index of the first new variable.
class ConeBuilder {
 public:
  int add_free(int n = 1, const std::string& name = {}) { return add(ConeKind::Free, n, name); }
  int add_nonneg(int n = 1, const std::string& name = {}) { return add(ConeKind::Nonneg, n, name); }
  int add_soc(int dim, const std::string& name = {}) { return add(ConeKind::SecondOrder, dim, name); }

  void set_cost(int var, double value) { c_[var] = value; }

  /// Append a row sum(coef * x[var]) = rhs; returns the row index.
  int add_row(std::initializer_list<std::pair<int, double>> terms, double rhs) {
    for (const auto& [v, a] : terms) add_term(rows_, v, a);
    return finish_row(rhs);
  }
  int add_row(std::span<const std::pair<int, double>> terms, double rhs) {
    for (const auto& [v, a] : terms) add_term(rows_, v, a);
    return finish_row(rhs);
  }

  int num_vars() const { return static_cast<int>(c_.size()); }
  int num_rows() const { return rows_; }

  ConeProblem build() const {
    ConeProblem p;
    const int n = num_vars();
    p.c = Eigen::Map<const Eigen::VectorXd>(c_.data(), n);
    p.b = Eigen::Map<const Eigen::VectorXd>(b_.data(), rows_);
    p.A.resize(rows_, n);
    p.A.setFromTriplets(trip_.begin(), trip_.end());
    p.A.makeCompressed();
    for (const auto& k : blocks_) {
      // Merge runs of scalar blocks of the same kind.
      if (k.kind != ConeKind::SecondOrder && !p.cones.empty() && p.cones.back().kind == k.kind)
        p.cones.back().dim += k.dim;
      else
        p.cones.push_back(k);
    }
    if (named_) {
      p.names = names_;
      for (int j = 0; j < n; ++j)
        if (p.names[j].empty()) p.names[j] = "x" + std::to_string(j);
    }
    return p;
  }

 private:
  int add(ConeKind kind, int n, const std::string& name) {
    const int first = num_vars();
    blocks_.push_back({kind, n});
    c_.resize(first + n, 0.0);
    names_.resize(first + n);
    if (!name.empty()) {
      named_ = true;
      for (int i = 0; i < n; ++i) names_[first + i] = n == 1 ? name : name + "[" + std::to_string(i) + "]";
    }
    return first;
  }
  void add_term(int row, int var, double a) {
    if (a != 0.0) trip_.emplace_back(row, var, a);
  }
  int finish_row(double rhs) {
    b_.push_back(rhs);
    return rows_++;
  }

  std::vector<double> c_;
  std::vector<double> b_;
  std::vector<Eigen::Triplet<double>> trip_;
  std::vector<ConeBlock> blocks_;
  std::vector<std::string> names_;
  bool named_ = false;
  int rows_ = 0;
};

namespace detail {

using Vec = Eigen::VectorXd;

// Cone-space layout: the non-free coordinates of x, in order.
struct ConeLayout {
  struct Block {
    ConeKind kind;
    int start;  // offset in cone space
    int dim;
  };
  std::vector<Block> blocks;    // one per nonneg coordinate run or SOC
  std::vector<int> var;         // cone-space position -> variable index
  std::vector<char> is_free;    // per variable
  int degree = 0;

  explicit ConeLayout(const ConeProblem& p) : is_free(p.num_vars(), 0) {
    int at = 0;
    for (const auto& k : p.cones) {
      if (k.kind == ConeKind::Free) {
        for (int i = 0; i < k.dim; ++i) is_free[at + i] = 1;
      } else if (k.dim > 0) {
        blocks.push_back({k.kind, static_cast<int>(var.size()), k.dim});
        for (int i = 0; i < k.dim; ++i) var.push_back(at + i);
        degree += k.kind == ConeKind::Nonneg ? k.dim : 1;
      }
      at += k.dim;
    }
  }
  int size() const { return static_cast<int>(var.size()); }
};

inline double soc_det(const double* u, int d) {
  double t = 0.0;
  for (int i = 1; i < d; ++i) t += u[i] * u[i];
  t = std::sqrt(t);
  return (u[0] - t) * (u[0] + t);
}

// Largest a >= 0 with u + a*du in the cone (infinity if unbounded).
inline double max_step(const ConeLayout& L, const Vec& u, const Vec& du) {
  double amax = std::numeric_limits<double>::infinity();
  for (const auto& b : L.blocks) {
    if (b.kind == ConeKind::Nonneg) {
      for (int i = b.start; i < b.start + b.dim; ++i)
        if (du[i] < 0.0) amax = std::min(amax, -u[i] / du[i]);
      continue;
    }
    const double* x = u.data() + b.start;
    const double* d = du.data() + b.start;
    // det(u + a du) = cc + bb a + aa a^2, head u0 + a d0.
    double aa = d[0] * d[0], bb = x[0] * d[0], cc = soc_det(x, b.dim);
    for (int i = 1; i < b.dim; ++i) {
      aa -= d[i] * d[i];
      bb -= x[i] * d[i];
    }
    bb *= 2.0;
    cc = std::max(cc, 0.0);
    double a = std::numeric_limits<double>::infinity();
    const double disc = bb * bb - 4.0 * aa * cc;
    if (aa == 0.0) {
      if (bb < 0.0) a = -cc / bb;
    } else if (disc >= 0.0) {
      const double q = -0.5 * (bb + std::copysign(std::sqrt(disc), bb));
      for (double r : {q / aa, q != 0.0 ? cc / q : std::numeric_limits<double>::infinity()})
        if (r >= 0.0) a = std::min(a, r);
    }
    if (d[0] < 0.0) a = std::min(a, -x[0] / d[0]);
    amax = std::min(amax, a);
  }
  return amax;
}

// Nesterov-Todd scaling point for the current (s, z), with lambda = W z = W^{-1} s.
struct NtScaling {
  Vec w;         // nonneg: sqrt(s/z); SOC: normalized w-bar
  Vec eta;       // per block (SOC only used)
  Vec lambda;

  void update(const ConeLayout& L, const Vec& s, const Vec& z) {
    const int n = L.size();
    w.resize(n);
    lambda.resize(n);
    eta.resize(static_cast<int>(L.blocks.size()));
    for (std::size_t k = 0; k < L.blocks.size(); ++k) {
      const auto& b = L.blocks[k];
      if (b.kind == ConeKind::Nonneg) {
        for (int i = b.start; i < b.start + b.dim; ++i) {
          w[i] = std::sqrt(s[i] / z[i]);
          lambda[i] = std::sqrt(s[i] * z[i]);
        }
        continue;
      }
      const int d = b.dim;
      const double* sp = s.data() + b.start;
      const double* zp = z.data() + b.start;
      const double sr = std::sqrt(std::max(soc_det(sp, d), 1e-300));
      const double zr = std::sqrt(std::max(soc_det(zp, d), 1e-300));
      double dot = 0.0;
      for (int i = 0; i < d; ++i) dot += (sp[i] / sr) * (zp[i] / zr);
      const double gamma = std::sqrt(std::max((1.0 + dot) / 2.0, 1e-300));
      double* wp = w.data() + b.start;
      wp[0] = (sp[0] / sr + zp[0] / zr) / (2.0 * gamma);
      for (int i = 1; i < d; ++i) wp[i] = (sp[i] / sr - zp[i] / zr) / (2.0 * gamma);
      // Renormalize so that det(w) = 1 exactly.
      double tail = 0.0;
      for (int i = 1; i < d; ++i) tail += wp[i] * wp[i];
      wp[0] = std::sqrt(1.0 + tail);
      eta[static_cast<int>(k)] = std::sqrt(sr / zr);
    }
    apply_w(L, z, lambda, false);
    for (const auto& b : L.blocks)
      if (b.kind == ConeKind::Nonneg)
        for (int i = b.start; i < b.start + b.dim; ++i) lambda[i] = std::sqrt(s[i] * z[i]);
  }

  // out = W v (inverse: W^{-1} v).
  void apply_w(const ConeLayout& L, const Vec& v, Vec& out, bool inverse) const {
    out.resize(v.size());
    for (std::size_t k = 0; k < L.blocks.size(); ++k) {
      const auto& b = L.blocks[k];
      if (b.kind == ConeKind::Nonneg) {
        for (int i = b.start; i < b.start + b.dim; ++i) out[i] = inverse ? v[i] / w[i] : v[i] * w[i];
        continue;
      }
      const double* wp = w.data() + b.start;
      const double* vp = v.data() + b.start;
      double* op = out.data() + b.start;
      const double sg = inverse ? -1.0 : 1.0;
      const double e = inverse ? 1.0 / eta[static_cast<int>(k)] : eta[static_cast<int>(k)];
      double wv = 0.0;
      for (int i = 1; i < b.dim; ++i) wv += wp[i] * vp[i];
      const double coef = sg * vp[0] + wv / (1.0 + wp[0]);
      op[0] = e * (wp[0] * vp[0] + sg * wv);
      for (int i = 1; i < b.dim; ++i) op[i] = e * (vp[i] + coef * wp[i]);
    }
  }
};

// u o v (Jordan product) blockwise.
inline Vec cone_prod(const ConeLayout& L, const Vec& u, const Vec& v) {
  Vec out(u.size());
  for (const auto& b : L.blocks) {
    if (b.kind == ConeKind::Nonneg) {
      for (int i = b.start; i < b.start + b.dim; ++i) out[i] = u[i] * v[i];
      continue;
    }
    const int s = b.start;
    double d = 0.0;
    for (int i = 0; i < b.dim; ++i) d += u[s + i] * v[s + i];
    out[s] = d;
    for (int i = 1; i < b.dim; ++i) out[s + i] = u[s] * v[s + i] + v[s] * u[s + i];
  }
  return out;
}

// Solve lambda o x = r for x.
inline Vec cone_div(const ConeLayout& L, const Vec& lambda, const Vec& r) {
  Vec out(r.size());
  for (const auto& b : L.blocks) {
    if (b.kind == ConeKind::Nonneg) {
      for (int i = b.start; i < b.start + b.dim; ++i) out[i] = r[i] / lambda[i];
      continue;
    }
    const int s = b.start;
    const double* l = lambda.data() + s;
    const double* rr = r.data() + s;
    double lr = 0.0;
    for (int i = 1; i < b.dim; ++i) lr += l[i] * rr[i];
    const double x0 = (l[0] * rr[0] - lr) / soc_det(l, b.dim);
    out[s] = x0;
    for (int i = 1; i < b.dim; ++i) out[s + i] = (rr[i] - x0 * l[i]) / l[0];
  }
  return out;
}

inline void add_identity(const ConeLayout& L, Vec& v, double a) {
  for (const auto& b : L.blocks) {
    if (b.kind == ConeKind::Nonneg)
      for (int i = b.start; i < b.start + b.dim; ++i) v[i] += a;
    else
      v[b.start] += a;
  }
}

// Shift u into the interior of K: u + (1 + max(0, -min eigenvalue)) e if needed.
inline void push_interior(const ConeLayout& L, Vec& u) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& b : L.blocks) {
    if (b.kind == ConeKind::Nonneg) {
      for (int i = b.start; i < b.start + b.dim; ++i) worst = std::max(worst, -u[i]);
    } else {
      worst = std::max(worst, u.segment(b.start + 1, b.dim - 1).norm() - u[b.start]);
    }
  }
  if (L.blocks.empty()) return;
  if (worst >= 0.0) add_identity(L, u, 1.0 + worst);
}

// Sparse LDL' factorization of a quasi-definite matrix (up-looking, with an
// elimination tree), fill-reducing AMD permutation, and dynamic
// regularization: a pivot whose sign disagrees with the expected one, or that
// is tiny, is replaced by +-delta.
class QuasiDefiniteLdl {
 public:
  // Pattern of the lower triangle as (row, col) pairs with row >= col;
  // sign[i] is +1 for the positive-definite block and -1 otherwise.
  void analyze(int n, const std::vector<int>& rows, const std::vector<int>& cols, std::vector<int> sign) {
    n_ = n;
    const std::size_t nz = rows.size();
    Eigen::SparseMatrix<double> pat(n, n);
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(nz);
    for (std::size_t k = 0; k < nz; ++k) t.emplace_back(rows[k], cols[k], 1.0);
    pat.setFromTriplets(t.begin(), t.end());
    Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> amd;
    Eigen::AMDOrdering<int> ordering;
    ordering(pat, amd);
    const Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> inv = amd.inverse();
    perm_.resize(n);
    for (int i = 0; i < n; ++i) perm_[i] = inv.indices()[i];
    sign_.resize(n);
    for (int i = 0; i < n; ++i) sign_[perm_[i]] = sign[i];

    // Upper-triangular CSC of the permuted matrix; slot_[k] locates entry k.
    std::vector<std::pair<long long, std::size_t>> key(nz);
    for (std::size_t k = 0; k < nz; ++k) {
      int a = perm_[rows[k]], b = perm_[cols[k]];
      if (a > b) std::swap(a, b);
      key[k] = {static_cast<long long>(b) * n + a, k};
    }
    std::sort(key.begin(), key.end());
    ap_.assign(n + 1, 0);
    ai_.resize(nz);
    slot_.resize(nz);
    for (std::size_t q = 0; q < nz; ++q) {
      const int col = static_cast<int>(key[q].first / n);
      ai_[q] = static_cast<int>(key[q].first % n);
      slot_[key[q].second] = q;
      ++ap_[col + 1];
    }
    for (int j = 0; j < n; ++j) ap_[j + 1] += ap_[j];
    ax_.assign(nz, 0.0);

    // Elimination tree and column counts of L.
    etree_.assign(n, -1);
    lnz_.assign(n, 0);
    std::vector<int> work(n, -1);
    for (int j = 0; j < n; ++j) {
      work[j] = j;
      for (int p = ap_[j]; p < ap_[j + 1]; ++p) {
        int i = ai_[p];
        while (work[i] != j) {
          if (etree_[i] == -1) etree_[i] = j;
          ++lnz_[i];
          work[i] = j;
          i = etree_[i];
        }
      }
    }
    lp_.assign(n + 1, 0);
    for (int i = 0; i < n; ++i) lp_[i + 1] = lp_[i] + lnz_[i];
    li_.resize(lp_[n]);
    lx_.resize(lp_[n]);
    d_.resize(n);
    dinv_.resize(n);
  }

  double* value(std::size_t entry) { return &ax_[slot_[entry]]; }

  void factor(double eps, double delta) {
    const int n = n_;
    std::vector<double> y(n, 0.0);
    std::vector<char> mark(n, 0);
    std::vector<int> yidx(n), ebuf(n), next(lp_.begin(), lp_.end() - 1);
    for (int k = 0; k < n; ++k) {
      int nnzy = 0;
      d_[k] = 0.0;
      for (int p = ap_[k]; p < ap_[k + 1]; ++p) {
        const int bi = ai_[p];
        if (bi == k) {
          d_[k] = ax_[p];
          continue;
        }
        y[bi] = ax_[p];
        if (mark[bi]) continue;
        mark[bi] = 1;
        int ne = 0;
        ebuf[ne++] = bi;
        for (int nx = etree_[bi]; nx != -1 && nx < k && !mark[nx]; nx = etree_[nx]) {
          mark[nx] = 1;
          ebuf[ne++] = nx;
        }
        while (ne) yidx[nnzy++] = ebuf[--ne];
      }
      for (int i = nnzy - 1; i >= 0; --i) {
        const int c = yidx[i];
        const double yc = y[c];
        for (int j = lp_[c]; j < next[c]; ++j) y[li_[j]] -= lx_[j] * yc;
        li_[next[c]] = k;
        const double l = yc * dinv_[c];
        lx_[next[c]] = l;
        d_[k] -= yc * l;
        ++next[c];
        y[c] = 0.0;
        mark[c] = 0;
      }
      if (sign_[k] * d_[k] <= eps) d_[k] = sign_[k] * delta;
      dinv_[k] = 1.0 / d_[k];
    }
  }

  void solve(Eigen::VectorXd& b) const {
    Eigen::VectorXd x(n_);
    for (int i = 0; i < n_; ++i) x[perm_[i]] = b[i];
    for (int i = 0; i < n_; ++i)
      for (int j = lp_[i]; j < lp_[i + 1]; ++j) x[li_[j]] -= lx_[j] * x[i];
    for (int i = 0; i < n_; ++i) x[i] *= dinv_[i];
    for (int i = n_ - 1; i >= 0; --i)
      for (int j = lp_[i]; j < lp_[i + 1]; ++j) x[i] -= lx_[j] * x[li_[j]];
    for (int i = 0; i < n_; ++i) b[i] = x[perm_[i]];
  }

 private:
  int n_ = 0;
  std::vector<int> perm_, sign_, ap_, ai_, etree_, lnz_, lp_, li_;
  std::vector<std::size_t> slot_;
  std::vector<double> ax_, lx_, d_, dinv_;
};

// KKT system [[dI, A', -E'], [A, -dI, 0], [-E, 0, -(W^2 + dI)]] with fixed
// sparsity; the regularized factor is corrected by iterative refinement
// against the unregularized matrix.
class KktSystem {
 public:
  KktSystem(const ConeProblem& p, const ConeLayout& L, double delta, int passes)
      : p_(p), L_(L), n_(p.num_vars()), m_(p.num_rows()), k_(L.size()), delta_(delta), passes_(passes) {
    const int N = n_ + m_ + k_;
    std::vector<int> rows, cols;
    std::vector<double> init;
    auto push = [&](int r, int c, double v) {
      rows.push_back(r);
      cols.push_back(c);
      init.push_back(v);
      return rows.size() - 1;
    };
    for (int j = 0; j < n_; ++j) push(j, j, delta_);
    for (int j = 0; j < p.A.outerSize(); ++j)
      for (Eigen::SparseMatrix<double>::InnerIterator it(p.A, j); it; ++it) push(n_ + it.row(), it.col(), it.value());
    for (int i = 0; i < m_; ++i) push(n_ + i, n_ + i, -delta_);
    const int z0 = n_ + m_;
    std::vector<std::size_t> diag, off;
    for (int q = 0; q < k_; ++q) {
      push(z0 + q, L.var[q], -1.0);
      diag.push_back(push(z0 + q, z0 + q, -1.0));
    }
    for (const auto& b : L.blocks)
      if (b.kind == ConeKind::SecondOrder)
        for (int i = 0; i < b.dim; ++i)
          for (int j = 0; j < i; ++j) off.push_back(push(z0 + b.start + i, z0 + b.start + j, 0.0));
    std::vector<int> sign(N, -1);
    for (int j = 0; j < n_; ++j) sign[j] = 1;
    ldl_.analyze(N, rows, cols, std::move(sign));
    for (std::size_t e = 0; e < init.size(); ++e) *ldl_.value(e) = init[e];
    for (auto e : diag) diag_.push_back(ldl_.value(e));
    for (auto e : off) off_.push_back(ldl_.value(e));
  }

  // Load W^2 for the current scaling and factor.
  void factor(const NtScaling& W) {
    w2diag_.setZero(k_);
    blocks_.clear();
    std::size_t off = 0;
    for (std::size_t k = 0; k < L_.blocks.size(); ++k) {
      const auto& b = L_.blocks[k];
      if (b.kind == ConeKind::Nonneg) {
        for (int i = b.start; i < b.start + b.dim; ++i) w2diag_[i] = W.w[i] * W.w[i];
        continue;
      }
      // W^2 = eta^2 (2 w w' - J).
      const double e2 = W.eta[static_cast<int>(k)] * W.eta[static_cast<int>(k)];
      Eigen::MatrixXd H(b.dim, b.dim);
      for (int i = 0; i < b.dim; ++i)
        for (int j = 0; j <= i; ++j) {
          double v = 2.0 * W.w[b.start + i] * W.w[b.start + j];
          if (i == j) v += i == 0 ? -1.0 : 1.0;
          H(i, j) = H(j, i) = e2 * v;
        }
      for (int i = 0; i < b.dim; ++i) {
        w2diag_[b.start + i] = H(i, i);
        for (int j = 0; j < i; ++j) *off_[off++] = -H(i, j);
      }
      blocks_.push_back(std::move(H));
    }
    for (int q = 0; q < k_; ++q) *diag_[q] = -(w2diag_[q] + delta_);
    ldl_.factor(1e-13, delta_);
  }

  // Solve [[0, A', -E'], [A, 0, 0], [-E, 0, -W^2]] [dx; dy; dz] = [rx; ry; rz].
  void solve(const Vec& rx, const Vec& ry, const Vec& rz, Vec& dx, Vec& dy, Vec& dz) const {
    Vec rhs(n_ + m_ + k_);
    rhs << rx, ry, rz;
    Vec sol = rhs;
    ldl_.solve(sol);
    const double scale = 1.0 + rhs.lpNorm<Eigen::Infinity>();
    for (int pass = 0; pass < passes_; ++pass) {
      Vec r = rhs - apply(sol);
      if (r.lpNorm<Eigen::Infinity>() <= 1e-11 * scale) break;
      ldl_.solve(r);
      sol += r;
    }
    dx = sol.head(n_);
    dy = sol.segment(n_, m_);
    dz = sol.tail(k_);
  }

 private:
  Vec apply(const Vec& v) const {
    Vec out(n_ + m_ + k_);
    const auto x = v.head(n_);
    const auto y = v.segment(n_, m_);
    const auto z = v.tail(k_);
    out.head(n_) = p_.A.transpose() * y;
    for (int q = 0; q < k_; ++q) out[L_.var[q]] -= z[q];
    out.segment(n_, m_) = p_.A * x;
    for (int q = 0; q < k_; ++q) out[n_ + m_ + q] = -x[L_.var[q]] - w2diag_[q] * z[q];
    std::size_t h = 0;
    for (const auto& b : L_.blocks) {
      if (b.kind != ConeKind::SecondOrder) continue;
      const auto& H = blocks_[h++];
      for (int i = 0; i < b.dim; ++i)
        for (int j = 0; j < b.dim; ++j)
          if (i != j) out[n_ + m_ + b.start + i] -= H(i, j) * z[b.start + j];
    }
    return out;
  }

  const ConeProblem& p_;
  const ConeLayout& L_;
  int n_, m_, k_;
  double delta_;
  int passes_;
  QuasiDefiniteLdl ldl_;
  std::vector<double*> diag_;
  std::vector<double*> off_;
  Vec w2diag_;
  std::vector<Eigen::MatrixXd> blocks_;
};

inline Vec gather(const ConeLayout& L, const Vec& x) {
  Vec out(L.size());
  for (int i = 0; i < L.size(); ++i) out[i] = x[L.var[i]];
  return out;
}

inline Vec scatter(const ConeLayout& L, const Vec& v, int n) {
  Vec out = Vec::Zero(n);
  for (int i = 0; i < L.size(); ++i) out[L.var[i]] += v[i];
  return out;
}

inline ConeSolution ipm(const ConeProblem& p, const ConeOptions& opt) {
  using detail::Vec;
  p.validate();
  if (!(opt.tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
  const int n = p.num_vars();
  const int m = p.num_rows();
  const detail::ConeLayout L(p);
  const int nk = L.size();
  const auto& A = p.A;
  const Vec& b = p.b;
  const Vec& c = p.c;
  const double nb = b.norm(), nc = c.norm();

  // Internal form: A x = b, s = E x (E selects cone coordinates), s in K.
  // Dual: A'y - E'z + c = 0, z in K. Standard dual is y_std = -y, s_std = E'z.
  auto E = [&](const Vec& x) { return detail::gather(L, x); };
  auto Et = [&](const Vec& v) { return detail::scatter(L, v, n); };

  detail::KktSystem kkt(p, L, opt.regularization, opt.refinement_passes);
  detail::NtScaling W;
  ConeSolution out;

  auto finish = [&](ConeStatus st, const Vec& x, const Vec& y, const Vec& z, int it) {
    out.status = st;
    out.x = x;
    out.y = -y;
    out.s = Et(z);
    out.iterations = it;
    out.objective = c.dot(out.x);
    out.res = residuals(p, out);
    return out;
  };

  // Initial point: least-norm cone slack for the primal, least-norm z for the dual.
  W.w = Vec::Ones(nk);
  W.eta = Vec::Ones(static_cast<int>(L.blocks.size()));
  for (const auto& blk : L.blocks)
    if (blk.kind == ConeKind::SecondOrder) {
      W.w.segment(blk.start, blk.dim).setZero();
      W.w[blk.start] = 1.0;
    }
  kkt.factor(W);
  Vec x, y, z, dxt, dyt;
  kkt.solve(Vec::Zero(n), b, Vec::Zero(nk), x, y, z);
  Vec s = E(x);
  detail::push_interior(L, s);
  kkt.solve(-c, Vec::Zero(m), Vec::Zero(nk), dxt, y, z);
  detail::push_interior(L, z);
  double tau = 1.0, kappa = 1.0;

  const double degree = L.degree + 1.0;
  Vec best_x = x, best_y = y, best_z = z;
  double best_merit = std::numeric_limits<double>::infinity(), last_merit = best_merit;
  int polish = 0;
  auto fallback = [&](ConeStatus st, int it) {
    return finish(best_merit <= opt.tol ? ConeStatus::Optimal : st, best_x, best_y, best_z, it);
  };
  int it = 0;
  for (; it <= opt.max_iter; ++it) {
    // Residuals of the embedding.
    const Vec Ex = E(x);
    const Vec r1 = A.transpose() * y - Et(z) + c * tau;
    const Vec r2 = -(A * x) + b * tau;
    const Vec r3 = s - Ex;
    const double cx = c.dot(x), by = b.dot(y);
    const double r4 = kappa + cx + by;
    const double mu = (s.dot(z) + tau * kappa) / degree;

    // Termination on the de-homogenized iterate.
    const double pres = std::max((r2 / tau).norm(), (r3 / tau).norm()) / (1.0 + nb);
    const double dres = (r1 / tau).norm() / (1.0 + nc);
    const double pcost = cx / tau, dcost = -by / tau;
    const double gap = std::abs(pcost - dcost) / (1.0 + std::abs(pcost) + std::abs(dcost));
    const double merit = std::max({pres, dres, gap});
    if (merit < best_merit) {
      best_merit = merit;
      best_x = x / tau;
      best_y = y / tau;
      best_z = z / tau;
    }
    if (merit <= opt.tol) {
      // A few polishing steps usually buy extra digits for free.
      if (merit <= 1e-3 * opt.tol || (polish > 0 && merit > 0.5 * last_merit) || polish >= 3)
        return finish(ConeStatus::Optimal, best_x, best_y, best_z, it);
      ++polish;
    }
    last_merit = merit;
    // Certificates: -b'y > 0 with A'y - E'z ~ 0 proves primal infeasibility;
    // c'x < 0 with Ax ~ 0, Ex in K proves dual infeasibility.
    if (kappa > tau) {
      const double neg_by = -by;
      if (neg_by > 0.0 && (A.transpose() * y - Et(z)).norm() <= opt.tol * neg_by * std::max(1.0, nc))
        return finish(ConeStatus::PrimalInfeasible, Vec::Zero(n), y / neg_by, z / neg_by, it);
      if (cx < 0.0 && (A * x).norm() <= opt.tol * -cx * std::max(1.0, nb) && (s - Ex).norm() <= opt.tol * -cx)
        return finish(ConeStatus::DualInfeasible, x / -cx, Vec::Zero(m), Vec::Zero(nk), it);
    }
    if (it == opt.max_iter) break;

    W.update(L, s, z);
    kkt.factor(W);

    // Direction for the tau column: K [x1; y1; z1] = [-c; b; 0].
    Vec x1, y1, z1;
    kkt.solve(-c, b, Vec::Zero(nk), x1, y1, z1);
    const double s1 = c.dot(x1) + b.dot(y1);

    auto direction = [&](double d, const Vec& rs, double rt, Vec& dx, Vec& dy, Vec& dz, Vec& ds, double& dtau,
                         double& dkappa) {
      // K [dx; dy; dz] = [-d r1; d r2; -d r3 + W(lambda \ rs)], third block G dx - W^2 dz.
      const Vec wq = [&] {
        Vec q = detail::cone_div(L, W.lambda, rs), wq_;
        W.apply_w(L, q, wq_, false);
        return wq_;
      }();
      const Vec bz = -d * r3 + wq;
      Vec x2, y2, z2;
      kkt.solve(-d * r1, d * r2, bz, x2, y2, z2);
      const double s2 = c.dot(x2) + b.dot(y2);
      dtau = (rt + tau * (d * r4 + s2)) / (kappa - tau * s1);
      dx = x2 + dtau * x1;
      dy = y2 + dtau * y1;
      dz = z2 + dtau * z1;
      // ds = -W (W dz + lambda \ rs)
      Vec wdz, tmp;
      W.apply_w(L, dz, wdz, false);
      W.apply_w(L, wdz + detail::cone_div(L, W.lambda, rs), tmp, false);
      ds = -tmp;
      dkappa = (rt - kappa * dtau) / tau;
    };

    auto step_to_boundary = [&](const Vec& ds, const Vec& dz, double dtau, double dkappa) {
      double a = std::min(detail::max_step(L, s, ds), detail::max_step(L, z, dz));
      if (dtau < 0.0) a = std::min(a, -tau / dtau);
      if (dkappa < 0.0) a = std::min(a, -kappa / dkappa);
      return a;
    };

    // Predictor.
    const Vec ll = detail::cone_prod(L, W.lambda, W.lambda);
    Vec dxa, dya, dza, dsa;
    double dta, dka;
    direction(1.0, ll, -tau * kappa, dxa, dya, dza, dsa, dta, dka);
    const double aa = std::min(1.0, step_to_boundary(dsa, dza, dta, dka));
    const double sigma = std::clamp(std::pow(1.0 - aa, 3), 0.0, 1.0);

    // Corrector with Mehrotra second-order term.
    Vec winv_dsa, w_dza;
    W.apply_w(L, dsa, winv_dsa, true);
    W.apply_w(L, dza, w_dza, false);
    Vec rs = ll + detail::cone_prod(L, winv_dsa, w_dza);
    detail::add_identity(L, rs, -sigma * mu);
    const double rt = -tau * kappa + sigma * mu - dta * dka;
    Vec dx, dy, dz, ds;
    double dtau, dkappa;
    direction(1.0 - sigma, rs, rt, dx, dy, dz, ds, dtau, dkappa);
    const double amax = step_to_boundary(ds, dz, dtau, dkappa);
    const double alpha = std::min(1.0, 0.99 * amax);
    if (!(alpha > 1e-12) || !std::isfinite(alpha) || !dx.allFinite())
      return fallback(ConeStatus::NumericalFailure, it);

    x += alpha * dx;
    y += alpha * dy;
    z += alpha * dz;
    s += alpha * ds;
    tau += alpha * dtau;
    kappa += alpha * dkappa;
  }
  return fallback(ConeStatus::IterationLimit, it);
}

}  // namespace detail

/// Solve a ConeProblem. Never throws on numerical trouble; the status says
/// what happened and x/y/s hold the last (or certificate) iterate.
inline ConeSolution solve_conic(const ConeProblem& p, const ConeOptions& opt = {}) {
  auto o = opt;
  auto sol = detail::ipm(p, o);
  for (int r = 0; r < opt.regularization_retries && sol.status == ConeStatus::NumericalFailure; ++r) {
    o.regularization *= 10.0;
    sol = detail::ipm(p, o);
  }
  return sol;
}

}  // namespace pnk
