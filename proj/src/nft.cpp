#include "nfdm/nft.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace nfdm {

namespace {

struct Vec3 {
  cplx v[3];
};

// One Jost trajectory: the solution vector, its lambda derivative, and the
// natural log of the scale factor that has been divided out so far. Value
// and derivative are rebalanced together because the matching step mixes
// them linearly.
struct Trajectory {
  Vec3 val{};
  Vec3 der{};
  double logs = 0.0;

  void rebalance() {
    double mx = 0.0;
    for (int i = 0; i < 3; ++i) {
      mx = std::max(mx, std::abs(val.v[i]));
      mx = std::max(mx, std::abs(der.v[i]));
    }
    if (mx > 1e120 || (mx > 0.0 && mx < 1e-120)) {
      const double inv = 1.0 / mx;
      for (int i = 0; i < 3; ++i) {
        val.v[i] *= inv;
        der.v[i] *= inv;
      }
      logs += std::log(mx);
    }
  }
};

// y = (I + a U(q, lambda)) x with U the scattering matrix; a carries the
// half step and the scheme sign.
inline Vec3 apply(const Vec3& x, double a, cplx q1, cplx q2, cplx ilam) {
  Vec3 y;
  const cplx ail = a * ilam;
  y.v[0] = x.v[0] - ail * x.v[0] + a * (q1 * x.v[1] + q2 * x.v[2]);
  y.v[1] = x.v[1] + ail * x.v[1] - a * std::conj(q1) * x.v[0];
  y.v[2] = x.v[2] + ail * x.v[2] - a * std::conj(q2) * x.v[0];
  return y;
}

// Solves (I + a U(q, lambda)) x = r. The matrix couples component 1 to the
// others but leaves components 2 and 3 diagonal, so the system reduces to
// one scalar division per component plus a Schur complement for x1.
inline Vec3 solve(const Vec3& r, double a, cplx q1, cplx q2, cplx ilam) {
  const cplx m0 = 1.0 - a * ilam;
  const cplx d = 1.0 + a * ilam;
  const double p = std::norm(q1) + std::norm(q2);
  const cplx denom = m0 + (a * a) * p / d;
  Vec3 x;
  x.v[0] = (r.v[0] - a * (q1 * r.v[1] + q2 * r.v[2]) / d) / denom;
  x.v[1] = (r.v[1] + a * std::conj(q1) * x.v[0]) / d;
  x.v[2] = (r.v[2] + a * std::conj(q2) * x.v[0]) / d;
  return x;
}

// d(U)/dlambda applied to v, times the half step: hh * diag(-i, i, i) v.
inline Vec3 dlambda_term(const Vec3& v, double hh) {
  Vec3 y;
  y.v[0] = cplx(0.0, -hh) * v.v[0];
  y.v[1] = cplx(0.0, hh) * v.v[1];
  y.v[2] = cplx(0.0, hh) * v.v[2];
  return y;
}

inline Vec3 add(const Vec3& a, const Vec3& b) {
  return {a.v[0] + b.v[0], a.v[1] + b.v[1], a.v[2] + b.v[2]};
}

// 3x3 complex solve by Gaussian elimination with partial pivoting.
std::array<cplx, 3> solve3(std::array<std::array<cplx, 3>, 3> m, std::array<cplx, 3> r) {
  for (int c = 0; c < 3; ++c) {
    int piv = c;
    for (int i = c + 1; i < 3; ++i) {
      if (std::abs(m[i][c]) > std::abs(m[piv][c])) piv = i;
    }
    std::swap(m[c], m[piv]);
    std::swap(r[c], r[piv]);
    for (int i = c + 1; i < 3; ++i) {
      const cplx f = m[i][c] / m[c][c];
      for (int j = c; j < 3; ++j) m[i][j] -= f * m[c][j];
      r[i] -= f * r[c];
    }
  }
  std::array<cplx, 3> x{};
  for (int i = 2; i >= 0; --i) {
    cplx s = r[i];
    for (int j = i + 1; j < 3; ++j) s -= m[i][j] * x[j];
    x[i] = s / m[i][i];
  }
  return x;
}

std::size_t peak_index(const DualPolSignal& s) {
  std::size_t best = s.grid.n_samples / 2;
  double best_p = 0.0;
  for (std::size_t i = 0; i < s.grid.n_samples; ++i) {
    const double p = std::norm(s.q1[i]) + std::norm(s.q2[i]);
    if (p > best_p) {
      best_p = p;
      best = i;
    }
  }
  return best;
}

// Marches one trajectory from sample `from` to sample `to` (either
// direction), keeping value and derivative consistent with the trapezoidal
// relation between adjacent samples.
void march(Trajectory& tr, const DualPolSignal& s, cplx ilam, std::size_t from, std::size_t to) {
  const double hh = 0.5 * s.grid.dt;
  if (to > from) {
    for (std::size_t i = from; i < to; ++i) {
      const Vec3 old_val = tr.val;
      const Vec3 rhs = apply(tr.val, hh, s.q1[i], s.q2[i], ilam);
      tr.val = solve(rhs, -hh, s.q1[i + 1], s.q2[i + 1], ilam);
      const Vec3 rhs_d =
          add(apply(tr.der, hh, s.q1[i], s.q2[i], ilam), dlambda_term(add(old_val, tr.val), hh));
      tr.der = solve(rhs_d, -hh, s.q1[i + 1], s.q2[i + 1], ilam);
      tr.rebalance();
    }
  } else {
    for (std::size_t i = from; i > to; --i) {
      const Vec3 old_val = tr.val;
      const Vec3 rhs = apply(tr.val, -hh, s.q1[i], s.q2[i], ilam);
      tr.val = solve(rhs, hh, s.q1[i - 1], s.q2[i - 1], ilam);
      const Vec3 rhs_d = add(apply(tr.der, -hh, s.q1[i], s.q2[i], ilam),
                             dlambda_term(add(old_val, tr.val), -hh));
      tr.der = solve(rhs_d, hh, s.q1[i - 1], s.q2[i - 1], ilam);
      tr.rebalance();
    }
  }
}

}  // namespace

ScatteringResult scatter(const DualPolSignal& s, cplx lambda) {
  const std::size_t n = s.grid.n_samples;
  if (n < 2 || s.q1.size() != n || s.q2.size() != n || !(s.grid.dt > 0.0)) {
    throw std::invalid_argument("scatter: malformed signal");
  }

  const cplx ilam = cplx(0.0, 1.0) * lambda;
  const double nu = lambda.imag();
  const double t0 = s.grid.t(0);
  const double te = s.grid.t(n - 1);
  const std::size_t mid = peak_index(s);

  // Left solution, seeded as e^{-i lambda t} in the first component. The
  // exponential magnitude lives in the log scale so the stored vector
  // starts at unit size.
  Trajectory left;
  left.val.v[0] = std::polar(1.0, -lambda.real() * t0);
  left.der.v[0] = cplx(0.0, -t0) * left.val.v[0];
  left.logs = nu * t0;
  march(left, s, ilam, 0, mid);

  // Right solutions: decaying first component and the two growing ones.
  Trajectory right[3];
  right[0].val.v[0] = std::polar(1.0, -lambda.real() * te);
  right[0].der.v[0] = cplx(0.0, -te) * right[0].val.v[0];
  right[0].logs = nu * te;
  for (int j = 1; j < 3; ++j) {
    right[j].val.v[j] = std::polar(1.0, lambda.real() * te);
    right[j].der.v[j] = cplx(0.0, te) * right[j].val.v[j];
    right[j].logs = -nu * te;
  }
  for (auto& tr : right) march(tr, s, ilam, n - 1, mid);

  std::array<std::array<cplx, 3>, 3> basis{};
  std::array<std::array<cplx, 3>, 3> basis_d{};
  for (int j = 0; j < 3; ++j) {
    for (int i = 0; i < 3; ++i) {
      basis[i][j] = right[j].val.v[i];
      basis_d[i][j] = right[j].der.v[i];
    }
  }
  const std::array<cplx, 3> phi{left.val.v[0], left.val.v[1], left.val.v[2]};
  const std::array<cplx, 3> phi_d{left.der.v[0], left.der.v[1], left.der.v[2]};

  const std::array<cplx, 3> x = solve3(basis, phi);
  std::array<cplx, 3> resid{};
  for (int i = 0; i < 3; ++i) {
    cplx w = 0.0;
    for (int j = 0; j < 3; ++j) w += basis_d[i][j] * x[j];
    resid[i] = phi_d[i] - w;
  }
  const std::array<cplx, 3> y = solve3(basis, resid);

  ScatteringResult out;
  out.lambda = lambda;
  out.a = x[0] * std::exp(left.logs - right[0].logs);
  out.a_prime = y[0] * std::exp(left.logs - right[0].logs);
  out.b1 = x[1] * std::exp(left.logs - right[1].logs);
  out.b2 = x[2] * std::exp(left.logs - right[2].logs);
  return out;
}

EigenvalueSearch find_eigenvalues(const DualPolSignal& s, std::span<const cplx> guesses,
                                  double tol, int max_iter) {
  EigenvalueSearch out;
  for (const cplx& guess : guesses) {
    cplx lam = guess;
    bool converged = false;
    for (int it = 0; it < max_iter; ++it) {
      const ScatteringResult r = scatter(s, lam);
      if (!std::isfinite(std::abs(r.a)) || !std::isfinite(std::abs(r.a_prime))) break;
      if (std::abs(r.a) < tol) {
        converged = true;
        break;
      }
      if (std::abs(r.a_prime) == 0.0) break;
      lam -= r.a / r.a_prime;
      if (!std::isfinite(lam.real()) || !std::isfinite(lam.imag()) || lam.imag() <= 0.0 ||
          std::abs(lam) > 1e6) {
        break;
      }
    }
    if (!converged) {
      ++out.dropped;
      continue;
    }
    bool duplicate = false;
    for (const cplx& kept : out.roots) {
      if (std::abs(kept - lam) < 10.0 * tol) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) out.roots.push_back(lam);
  }
  return out;
}

std::pair<cplx, cplx> compute_b(const DualPolSignal& s, cplx lambda) {
  const ScatteringResult r = scatter(s, lambda);
  return {r.b1, r.b2};
}

}  // namespace nfdm
