#pragma once

// Discrete 1-d state space: grid, potential, the reference measure
// m_i ~ e^{-V(x_i)} h, the m-reversible generator discretizing
// (1/2)(d_xx - V' d_x), and the Gamma / Gamma2 bilinear forms.

#include "entbridge/core.hpp"

#include <algorithm>

namespace entbridge {

enum class Boundary { reflecting, periodic };

struct Grid1D {
  double a = 0.0;
  double b = 1.0;
  int n = 0;
  double h = 0.0;
  Boundary boundary = Boundary::reflecting;

  static Grid1D reflecting(double a, double b, int n) {
    validate(a, b, n);
    return {a, b, n, (b - a) / (n - 1), Boundary::reflecting};
  }
  // Periodic identifies x_0 with x_n, so the spacing is (b-a)/n.
  static Grid1D periodic(double a, double b, int n) {
    validate(a, b, n);
    return {a, b, n, (b - a) / n, Boundary::periodic};
  }

  Field nodes() const {
    Field x(n);
    for (int i = 0; i < n; ++i) x[i] = a + i * h;
    return x;
  }

 private:
  static void validate(double a, double b, int n) {
    if (n < 3) throw std::invalid_argument("Grid1D: need n >= 3 nodes");
    if (!(b > a)) throw std::invalid_argument("Grid1D: need b > a");
  }
};

// Potential V on the line, shifted at evaluation time so min_i V(x_i) = 0.
struct Potential {
  enum class Kind { quadratic, double_well, polynomial, tabulated };

  Kind kind = Kind::quadratic;
  double kappa0 = 1.0;                 // quadratic: V = kappa0 x^2 / 2
  double alpha = 1.0, beta = 1.0;      // double well: V = alpha x^4 - beta x^2
  std::vector<double> coeffs;          // polynomial: sum_k coeffs[k] x^k
  std::vector<double> values;          // tabulated at the grid nodes

  static Potential quadratic(double kappa0) {
    Potential p; p.kind = Kind::quadratic; p.kappa0 = kappa0; return p;
  }
  static Potential double_well(double alpha, double beta) {
    Potential p; p.kind = Kind::double_well; p.alpha = alpha; p.beta = beta; return p;
  }
  static Potential polynomial(std::vector<double> coeffs) {
    Potential p; p.kind = Kind::polynomial; p.coeffs = std::move(coeffs); return p;
  }
  static Potential tabulated(std::vector<double> values) {
    Potential p; p.kind = Kind::tabulated; p.values = std::move(values); return p;
  }
};

struct PotentialOnGrid {
  Field V;    // shifted, V >= 0, min = 0
  Field Vp;   // V'
  Field Vpp;  // V''
  double shift = 0.0;
};

inline PotentialOnGrid evaluate(const Potential& pot, const Grid1D& grid) {
  const Field x = grid.nodes();
  const int n = grid.n;
  PotentialOnGrid out;
  out.V = Field::Zero(n);
  out.Vp = Field::Zero(n);
  out.Vpp = Field::Zero(n);
  switch (pot.kind) {
    case Potential::Kind::quadratic:
      out.V = 0.5 * pot.kappa0 * x.square();
      out.Vp = pot.kappa0 * x;
      out.Vpp = Field::Constant(n, pot.kappa0);
      break;
    case Potential::Kind::double_well:
      out.V = pot.alpha * x.pow(4) - pot.beta * x.square();
      out.Vp = 4.0 * pot.alpha * x.pow(3) - 2.0 * pot.beta * x;
      out.Vpp = 12.0 * pot.alpha * x.square() - 2.0 * pot.beta;
      break;
    case Potential::Kind::polynomial: {
      for (int i = 0; i < n; ++i) {
        // Horner with the two derivatives carried along.
        double v = 0, vp = 0, vpp = 0;
        for (std::size_t k = pot.coeffs.size(); k-- > 0;) {
          vpp = vpp * x[i] + 2.0 * vp;
          vp = vp * x[i] + v;
          v = v * x[i] + pot.coeffs[k];
        }
        out.V[i] = v; out.Vp[i] = vp; out.Vpp[i] = vpp;
      }
      break;
    }
    case Potential::Kind::tabulated: {
      if (static_cast<int>(pot.values.size()) != n)
        throw std::invalid_argument("Potential::tabulated: values must match the node count");
      for (int i = 0; i < n; ++i) out.V[i] = pot.values[i];
      const double h = grid.h;
      auto at = [&](int i) {
        if (grid.boundary == Boundary::periodic) return out.V[((i % n) + n) % n];
        return out.V[std::clamp(i, 0, n - 1)];
      };
      for (int i = 0; i < n; ++i) {
        if (grid.boundary == Boundary::reflecting && (i == 0 || i == n - 1)) {
          const int j = (i == 0) ? 1 : n - 2;  // copy the neighboring centered value
          out.Vp[i] = (at(j + 1) - at(j - 1)) / (2 * h);
          out.Vpp[i] = (at(j + 1) - 2 * at(j) + at(j - 1)) / (h * h);
        } else {
          out.Vp[i] = (at(i + 1) - at(i - 1)) / (2 * h);
          out.Vpp[i] = (at(i + 1) - 2 * at(i) + at(i - 1)) / (h * h);
        }
      }
      break;
    }
  }
  for (int i = 0; i < n; ++i)
    if (!std::isfinite(out.V[i]) || !std::isfinite(out.Vp[i]) || !std::isfinite(out.Vpp[i]))
      throw std::invalid_argument("Potential: non-finite value at a grid node");
  out.shift = -out.V.minCoeff();
  out.V += out.shift;
  return out;
}

struct MeasureOptions {
  // Skips the continuum-tail certificate.  Required when kappa <= 0 (the
  // convexity bound does not apply) and available as an explicit override
  // for grids that deliberately truncate more than tail_tol.
  bool tail_override = false;
  double tail_tol = 1e-12;
};

struct ReferenceMeasure {
  Field weights;   // m_i > 0
  double total;    // = 1 after normalization
  double kappa;    // min over nodes of V'' (grid surrogate for the global bound)
};

namespace detail {
// Upper bound for int_0^inf exp(-c s - kappa s^2 / 2) ds, kappa > 0.
inline double convex_tail_integral(double c, double kappa) {
  const double gauss = std::sqrt(M_PI / (2.0 * kappa));
  if (c <= 0.0) return gauss;  // slope the wrong way: fall back to the pure Gaussian bound
  return std::min(1.0 / c, gauss);
}
}  // namespace detail

inline ReferenceMeasure build_measure(const Grid1D& grid, const PotentialOnGrid& pot,
                                      const MeasureOptions& opt = {}) {
  const int n = grid.n;
  ReferenceMeasure m;
  m.kappa = pot.Vpp.minCoeff();
  Field w = (-pot.V).exp() * grid.h;
  const double Z = w.sum();
  if (!(Z > 0) || !std::isfinite(Z))
    throw std::invalid_argument("ReferenceMeasure: degenerate weights");

  if (grid.boundary == Boundary::reflecting && !opt.tail_override) {
    if (m.kappa <= 0.0)
      throw std::invalid_argument(
          "ReferenceMeasure: tail mass not certifiable for kappa <= 0; "
          "set MeasureOptions::tail_override to accept the truncation");
    const double tail_right =
        std::exp(-pot.V[n - 1]) * detail::convex_tail_integral(pot.Vp[n - 1], m.kappa);
    const double tail_left =
        std::exp(-pot.V[0]) * detail::convex_tail_integral(-pot.Vp[0], m.kappa);
    if ((tail_left + tail_right) / Z > opt.tail_tol)
      throw std::invalid_argument(
          "ReferenceMeasure: continuum mass outside [a,b] exceeds the tolerance; "
          "widen the interval or set MeasureOptions::tail_override");
  }

  m.weights = w / Z;
  m.total = m.weights.sum();
  return m;
}

// m-reversible rate matrix with the geometric-mean stencil
//   L_{i,i+-1} = (1/(2h^2)) sqrt(m_{i+-1}/m_i),   L_ii = -sum of off-diagonals.
// Detailed balance m_i L_ij = m_j L_ji holds exactly by construction.
struct Generator {
  Grid1D grid;
  Field lower;      // lower[i] = L_{i,i-1} (lower[0] unused unless periodic)
  Field diag;
  Field upper;      // upper[i] = L_{i,i+1}
  double wrap_lo = 0.0;  // periodic: L_{0,n-1}
  double wrap_hi = 0.0;  // periodic: L_{n-1,0}
  Field m;          // reversing measure weights

  int size() const { return grid.n; }

  Field apply(const Field& f) const {
    check_size(f);
    const int n = grid.n;
    Field out(n);
    for (int i = 0; i < n; ++i) {
      double s = diag[i] * f[i];
      if (i > 0) s += lower[i] * f[i - 1];
      if (i + 1 < n) s += upper[i] * f[i + 1];
      out[i] = s;
    }
    if (grid.boundary == Boundary::periodic) {
      out[0] += wrap_lo * f[n - 1];
      out[n - 1] += wrap_hi * f[0];
    }
    return out;
  }

  Eigen::MatrixXd dense() const {
    const int n = grid.n;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      A(i, i) = diag[i];
      if (i > 0) A(i, i - 1) = lower[i];
      if (i + 1 < n) A(i, i + 1) = upper[i];
    }
    if (grid.boundary == Boundary::periodic) {
      A(0, n - 1) = wrap_lo;
      A(n - 1, 0) = wrap_hi;
    }
    return A;
  }

  void check_size(const Field& f) const {
    if (f.size() != grid.n) throw std::invalid_argument("Generator: field size mismatch");
  }
};

inline Generator build_generator(const Grid1D& grid, const ReferenceMeasure& measure) {
  const int n = grid.n;
  const double c = 1.0 / (2.0 * grid.h * grid.h);
  const Field& m = measure.weights;
  Generator L;
  L.grid = grid;
  L.m = m;
  L.lower = Field::Zero(n);
  L.upper = Field::Zero(n);
  L.diag = Field::Zero(n);
  for (int i = 0; i < n; ++i) {
    if (i > 0) L.lower[i] = c * std::sqrt(m[i - 1] / m[i]);
    if (i + 1 < n) L.upper[i] = c * std::sqrt(m[i + 1] / m[i]);
  }
  if (grid.boundary == Boundary::periodic) {
    L.wrap_lo = c * std::sqrt(m[n - 1] / m[0]);
    L.wrap_hi = c * std::sqrt(m[0] / m[n - 1]);
  }
  for (int i = 0; i < n; ++i) {
    double off = L.lower[i] + L.upper[i];
    if (grid.boundary == Boundary::periodic) {
      if (i == 0) off += L.wrap_lo;
      if (i == n - 1) off += L.wrap_hi;
    }
    L.diag[i] = -off;
  }
  return L;
}

// Gamma(f,g) := L(fg) - f Lg - g Lf, pointwise.  Note no division by 2:
// the 1/2 already sits in L, so Gamma(f,g) is consistent with <f', g'>.
inline Field gamma(const Generator& L, const Field& f, const Field& g) {
  L.check_size(f);
  L.check_size(g);
  return L.apply(f * g) - f * L.apply(g) - g * L.apply(f);
}

// Gamma2(f,g) := L Gamma(f,g) - Gamma(f, Lg) - Gamma(g, Lf).
inline Field gamma2(const Generator& L, const Field& f, const Field& g) {
  const Field Lf = L.apply(f);
  const Field Lg = L.apply(g);
  return L.apply(gamma(L, f, g)) - gamma(L, f, Lg) - gamma(L, g, Lf);
}

// Everything needed by the downstream modules, built in one go.
struct Space {
  Grid1D grid;
  PotentialOnGrid potential;
  ReferenceMeasure measure;
  Generator generator;
};

inline Space make_space(const Grid1D& grid, const Potential& pot, const MeasureOptions& opt = {}) {
  Space s;
  s.grid = grid;
  s.potential = evaluate(pot, grid);
  s.measure = build_measure(grid, s.potential, opt);
  s.generator = build_generator(grid, s.measure);
  return s;
}

}  // namespace entbridge
