#include "potkit/envelope.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

namespace potkit {

namespace {

using Vec = Eigen::VectorXd;

// Sub-system A_VV x = b for a node subset, sparse or dense by operator kind.
class Subsystem {
 public:
  Subsystem(const DiscreteOperator& dop, const std::vector<bool>& V) : dop_(dop) {
    const std::int64_t n = dop.size();
    if (static_cast<std::int64_t>(V.size()) != n) throw std::invalid_argument("node set size mismatch");
    local_.assign(static_cast<std::size_t>(n), -1);
    for (std::int64_t i = 0; i < n; ++i) {
      if (V[static_cast<std::size_t>(i)]) {
        local_[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(nodes_.size());
        nodes_.push_back(i);
      }
    }
    const auto m = static_cast<Eigen::Index>(nodes_.size());
    if (m == 0) return;
    const SparseMatrix& A = dop.A();
    if (dop.op().is_local()) {
      std::vector<Eigen::Triplet<double>> trip;
      for (Eigen::Index r = 0; r < m; ++r) {
        for (SparseMatrix::InnerIterator it(A, nodes_[static_cast<std::size_t>(r)]); it; ++it) {
          const auto c = local_[static_cast<std::size_t>(it.col())];
          if (c >= 0) trip.emplace_back(r, static_cast<Eigen::Index>(c), it.value());
        }
      }
      Eigen::SparseMatrix<double> S(m, m);
      S.setFromTriplets(trip.begin(), trip.end());
      sparse_.compute(S);
      if (sparse_.info() != Eigen::Success) throw std::runtime_error("singular principal sub-solve");
    } else {
      Eigen::MatrixXd D = Eigen::MatrixXd::Zero(m, m);
      for (Eigen::Index r = 0; r < m; ++r) {
        for (SparseMatrix::InnerIterator it(A, nodes_[static_cast<std::size_t>(r)]); it; ++it) {
          const auto c = local_[static_cast<std::size_t>(it.col())];
          if (c >= 0) D(r, static_cast<Eigen::Index>(c)) = it.value();
        }
      }
      dense_.compute(D);
      if (dense_.info() != Eigen::Success) throw std::runtime_error("singular principal sub-solve");
      is_dense_ = true;
    }
  }

  const std::vector<std::int64_t>& nodes() const { return nodes_; }
  std::int64_t local(std::int64_t i) const { return local_[static_cast<std::size_t>(i)]; }

  Vec solve(const Vec& b) const {
    if (nodes_.empty()) return Vec();
    return is_dense_ ? Vec(dense_.solve(b)) : Vec(sparse_.solve(b));
  }

 private:
  const DiscreteOperator& dop_;
  std::vector<std::int64_t> nodes_;
  std::vector<std::int64_t> local_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> sparse_;
  Eigen::LLT<Eigen::MatrixXd> dense_;
  bool is_dense_ = false;
};

double jacobi_radius(const DiscreteOperator& dop) {
  const Grid& g = dop.grid();
  if (dop.op().is_local()) {
    // Jacobi radius of the bounding-box lattice bounds that of any subdomain
    double mu = 0.0;
    for (int k = 0; k < g.dim(); ++k) {
      const double m = static_cast<double>(g.shape()[k] - 2);
      mu += std::cos(std::numbers::pi / (m + 1.0));
    }
    return mu / g.dim();
  }
  // power iteration on the nonnegative kernel P
  const std::int64_t n = dop.size();
  std::vector<double> v(static_cast<std::size_t>(n), 1.0), w(static_cast<std::size_t>(n));
  double mu = 0.0;
  for (int it = 0; it < 200; ++it) {
    double nrm = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
      w[static_cast<std::size_t>(i)] = dop.apply_P_row(i, v.data());
      nrm = std::max(nrm, w[static_cast<std::size_t>(i)]);
    }
    if (!(nrm > 0.0)) return 0.0;
    mu = nrm;
    for (std::int64_t i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = w[static_cast<std::size_t>(i)] / nrm;
  }
  return std::min(mu, 1.0);
}

double sweep_serial(const DiscreteOperator& dop, const double* g, double* w, double omega) {
  double delta = 0.0;
  const std::int64_t n = dop.size();
  for (std::int64_t i = 0; i < n; ++i) {
    const double y = dop.apply_P_row(i, w);
    const double nw = std::max(g[i], w[i] + omega * (y - w[i]));
    delta = std::max(delta, std::abs(nw - w[i]));
    w[i] = nw;
  }
  return delta;
}

double sweep_colored(const DiscreteOperator& dop, const double* g, double* w, double omega) {
  double delta = 0.0;
  for (const auto& color : dop.colors()) {
    const auto m = static_cast<std::int64_t>(color.size());
    const std::int64_t* idx = color.data();
#pragma omp parallel for reduction(max : delta) schedule(static) if (m > 4096)
    for (std::int64_t k = 0; k < m; ++k) {
      const std::int64_t i = idx[k];
      const double y = dop.apply_P_row(i, w);
      const double nw = std::max(g[i], w[i] + omega * (y - w[i]));
      delta = std::max(delta, std::abs(nw - w[i]));
      w[i] = nw;
    }
  }
  return delta;
}

// Primal-dual active-set refinement of an approximate reduite.
bool polish(const DiscreteOperator& dop, const GridField& g, GridField& w, double tol, std::int64_t& steps) {
  const std::int64_t n = dop.size();
  std::vector<bool> V(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) V[static_cast<std::size_t>(i)] = w[i] - g[i] > 10.0 * tol;
  GridField best = w;
  double best_res = complementarity_residual(dop, w, g);
  double scale = 1.0;
  for (double v : g.values()) scale = std::max(scale, v);
  for (int it = 0; it < 30 && best_res > 1e-13 * scale; ++it) {
    ++steps;
    GridField cand = harmonic_extension(dop, V, g);
    const double res = complementarity_residual(dop, cand, g);
    if (res < best_res) {
      best_res = res;
      best = cand;
    }
    std::vector<bool> next(static_cast<std::size_t>(n));
    bool same = true;
    for (std::int64_t i = 0; i < n; ++i) {
      // lambda_i / A_ii = w_i - (P w)_i on the contact set, ~0 on V
      const double lam = cand[i] - dop.apply_P_row(i, cand.values().data());
      const bool contact = V[static_cast<std::size_t>(i)] ? (cand[i] <= g[i]) : (lam > 0.0);
      next[static_cast<std::size_t>(i)] = !contact;
      same = same && next[static_cast<std::size_t>(i)] == V[static_cast<std::size_t>(i)];
    }
    if (same) break;
    V = std::move(next);
  }
  if (best_res <= tol) {
    w = std::move(best);
    return true;
  }
  return false;
}

}  // namespace

double optimal_omega(const DiscreteOperator& dop) {
  const double mu = jacobi_radius(dop);
  return 2.0 / (1.0 + std::sqrt(std::max(0.0, 1.0 - mu * mu)));
}

double complementarity_residual(const DiscreteOperator& dop, const GridField& w, const GridField& g) {
  double r = 0.0;
  const std::int64_t n = dop.size();
  const double* wv = w.values().data();
#pragma omp parallel for reduction(max : r) schedule(static) if (n > 16384)
  for (std::int64_t i = 0; i < n; ++i) {
    const double a = w[i] - g[i];
    const double b = w[i] - dop.apply_P_row(i, wv);
    r = std::max(r, std::abs(std::min(a, b)));
  }
  return r;
}

ReduiteResult reduite(const DiscreteOperator& dop, const GridField& g, const ReduiteOptions& opt) {
  const std::int64_t n = dop.size();
  if (g.size() != n) throw std::invalid_argument("reduite: obstacle size mismatch");
  for (double v : g.values()) {
    if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("reduite: obstacle must be finite and >= 0");
  }
  ReduiteResult res;
  res.omega = opt.omega > 0.0 ? opt.omega : optimal_omega(dop);
  if (!(res.omega > 0.0 && res.omega < 2.0)) throw std::invalid_argument("reduite: omega must lie in (0, 2)");
  GridField w = g;
  double* wv = w.values().data();
  const double* gv = g.values().data();
  for (std::int64_t s = 0; s < opt.max_sweeps; ++s) {
    const double delta = opt.parallel ? sweep_colored(dop, gv, wv, res.omega) : sweep_serial(dop, gv, wv, res.omega);
    res.iterations = s + 1;
    if (delta < opt.tol) {
      res.converged = true;
      break;
    }
  }
  if (!res.converged) {
    std::ostringstream msg;
    msg << "reduite: no convergence within " << opt.max_sweeps << " sweeps";
    throw NonConvergence(msg.str());
  }
  if (opt.polish && dop.op().is_local()) polish(dop, g, w, opt.tol, res.polish_steps);
  res.residual = complementarity_residual(dop, w, g);
  res.continuation.resize(static_cast<std::size_t>(n));
  res.harmonic.resize(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    res.continuation[static_cast<std::size_t>(i)] = w[i] > g[i];
    res.harmonic[static_cast<std::size_t>(i)] = std::abs(w[i] - dop.apply_P_row(i, w.values().data())) <= opt.tol;
  }
  res.envelope = std::move(w);
  return res;
}

GridField harmonic_extension(const DiscreteOperator& dop, const std::vector<bool>& V, const GridField& g) {
  Subsystem sub(dop, V);
  const auto& nodes = sub.nodes();
  GridField out = g;
  if (nodes.empty()) return out;
  Vec b(static_cast<Eigen::Index>(nodes.size()));
  const SparseMatrix& A = dop.A();
  for (std::size_t r = 0; r < nodes.size(); ++r) {
    double s = 0.0;
    for (SparseMatrix::InnerIterator it(A, nodes[r]); it; ++it) {
      if (sub.local(it.col()) < 0) s -= it.value() * g[it.col()];
    }
    b[static_cast<Eigen::Index>(r)] = s;
  }
  const Vec x = sub.solve(b);
  for (std::size_t r = 0; r < nodes.size(); ++r) out[nodes[r]] = x[static_cast<Eigen::Index>(r)];
  return out;
}

GridField killed_potential(const DiscreteOperator& dop, const std::vector<bool>& V, const GridField& f) {
  Subsystem sub(dop, V);
  const auto& nodes = sub.nodes();
  GridField out(dop.grid_ptr(), 0.0);
  if (nodes.empty()) return out;
  Vec b(static_cast<Eigen::Index>(nodes.size()));
  for (std::size_t r = 0; r < nodes.size(); ++r) b[static_cast<Eigen::Index>(r)] = f[nodes[r]];
  const Vec x = sub.solve(b);
  for (std::size_t r = 0; r < nodes.size(); ++r) out[nodes[r]] = x[static_cast<Eigen::Index>(r)];
  return out;
}

CappedField cap_infinite(const GridField& u) {
  CappedField out{u, 0.0, {}};
  const Grid& g = u.grid();
  for (std::int64_t i = 0; i < u.size(); ++i) {
    if (std::isfinite(u[i])) continue;
    const auto l = g.lattice_of(i);
    double c = 0.0;
    for (int k = 0; k < g.dim(); ++k) {
      for (int s : {-1, 1}) {
        const auto nb = g.neighbor(l, k, s);
        const auto j = nb >= 0 ? g.interior_of(nb) : -1;
        if (j >= 0 && std::isfinite(u[j])) c = std::max(c, std::abs(u[j]));
      }
    }
    out.values[i] = u[i] > 0 ? c : -c;
    out.cap = std::max(out.cap, c);
    out.capped_nodes.push_back(i);
  }
  return out;
}

double d1_norm(const DiscreteOperator& dop, const GridField& u, const GridField& rho, const ReduiteOptions& opt,
               ReduiteResult* detail) {
  GridField a = u;
  for (auto& v : a.values()) v = std::abs(v);
  ReduiteResult r = reduite(dop, a, opt);
  const double val = r.envelope.weighted_integral(rho);
  if (detail) *detail = std::move(r);
  return val;
}

TailCurve tail_curve(const DiscreteOperator& dop, const GridField& u, const GridField& rho,
                     const std::vector<double>& levels, double target, const ReduiteOptions& opt) {
  for (std::size_t k = 1; k < levels.size(); ++k) {
    if (!(levels[k] > levels[k - 1])) throw std::invalid_argument("tail_curve: levels must increase");
  }
  TailCurve tc;
  tc.target = target;
  CappedField capped = cap_infinite(u);
  for (auto& v : capped.values.values()) v = std::abs(v);
  tc.cap = capped.cap;
  const bool has_atoms = !capped.capped_nodes.empty();
  for (double n : levels) {
    tc.levels.push_back(n);
    if (has_atoms && n >= capped.cap) {
      std::ostringstream msg;
      msg << "level n=" << n << " unresolvable: superlevel set is below one cell (cap " << capped.cap << ")";
      tc.warnings.push_back(msg.str());
      tc.values.push_back(std::numeric_limits<double>::quiet_NaN());
      tc.resolvable.push_back(false);
      tc.iterations.push_back(0);
      continue;
    }
    GridField g = capped.values;
    for (auto& v : g.values()) v = std::max(v - n, 0.0);
    ReduiteResult r;
    tc.values.push_back(d1_norm(dop, g, rho, opt, &r));
    tc.resolvable.push_back(true);
    tc.iterations.push_back(r.iterations);
  }
  tc.limit = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t k = 0; k < tc.values.size(); ++k) {
    const double n = tc.levels[k];
    tc.corrected.push_back(has_atoms ? tc.values[k] / (1.0 - n / tc.cap) : tc.values[k]);
    if (tc.resolvable[k] && (!has_atoms || n <= 0.5 * tc.cap || std::isnan(tc.limit))) tc.limit = tc.corrected[k];
  }
  if (std::isnan(tc.limit)) {
    tc.verdict = "undetermined";
  } else if (target > 0.0) {
    tc.verdict = tc.limit >= 0.5 * target ? "concentrated-like" : "diffuse-like";
  } else {
    tc.verdict = tc.limit > 1e-8 ? "concentrated-like" : "diffuse-like";
  }
  return tc;
}

FvpDiagnostic fvp_diagnostic(const DiscreteOperator& dop, const GridField& u, const GridField& rho,
                             const std::function<double(double)>& phi, const std::vector<double>& caps,
                             const ReduiteOptions& opt) {
  FvpDiagnostic out;
  CappedField capped = cap_infinite(u);
  for (double k : caps) {
    if (!(k > 0.0)) throw std::invalid_argument("fvp_diagnostic: caps must be positive");
    GridField g = capped.values;
    for (auto& v : g.values()) v = phi(std::min(std::abs(v), k));
    const double val = reduite(dop, g, opt).envelope.weighted_integral(rho);
    out.caps.push_back(k);
    out.values.push_back(val);
    out.normalised.push_back(val / (phi(k) / k));
  }
  const std::size_t m = out.values.size();
  if (m < 2) {
    out.trend = "inconclusive";
    return out;
  }
  const double last = out.values[m - 1];
  const double prev = out.values[m - 2];
  if (last == 0.0 || std::abs(last - prev) <= 0.01 * std::abs(last)) {
    out.trend = "bounded";
    return out;
  }
  // growth that keeps pace with phi(k)/k across the whole scan
  const double r0 = out.normalised.front();
  const double r1 = out.normalised.back();
  const bool tracks = r0 > 0.0 && std::abs(r1 / r0 - 1.0) < 0.25;
  out.trend = tracks && last > prev ? "divergent" : "inconclusive";
  return out;
}

}  // namespace potkit
