#pragma once

// Marginal specifications: Lebesgue densities truncated to the grid and
// renormalized into DensityField values (densities with respect to m).

#include "entbridge/functionals.hpp"

namespace entbridge {

struct MarginalSpec {
  enum class Kind { gaussian, bump, mixture, uniform };

  Kind kind = Kind::gaussian;
  double mean = 0.0, std = 1.0;      // gaussian
  double center = 0.0, width = 1.0;  // bump (smooth, compactly supported)
  double lo = 0.0, hi = 1.0;         // uniform support
  std::vector<MarginalSpec> components;
  std::vector<double> weights;

  static MarginalSpec gaussian(double mean, double std) {
    MarginalSpec s; s.kind = Kind::gaussian; s.mean = mean; s.std = std; return s;
  }
  static MarginalSpec bump(double center, double width) {
    MarginalSpec s; s.kind = Kind::bump; s.center = center; s.width = width; return s;
  }
  static MarginalSpec uniform(double lo, double hi) {
    MarginalSpec s; s.kind = Kind::uniform; s.lo = lo; s.hi = hi; return s;
  }
  static MarginalSpec mixture(std::vector<MarginalSpec> comps, std::vector<double> w) {
    MarginalSpec s; s.kind = Kind::mixture;
    s.components = std::move(comps); s.weights = std::move(w);
    return s;
  }
};

// Unnormalized Lebesgue density of the marginal at x.
inline double marginal_pdf(const MarginalSpec& s, double x) {
  switch (s.kind) {
    case MarginalSpec::Kind::gaussian: {
      if (!(s.std > 0)) throw std::invalid_argument("marginal gaussian: std must be > 0");
      const double z = (x - s.mean) / s.std;
      return std::exp(-0.5 * z * z) / s.std;
    }
    case MarginalSpec::Kind::bump: {
      if (!(s.width > 0)) throw std::invalid_argument("marginal bump: width must be > 0");
      const double u = (x - s.center) / s.width;
      if (std::abs(u) >= 1.0) return 0.0;
      return std::exp(-1.0 / (1.0 - u * u));
    }
    case MarginalSpec::Kind::uniform:
      if (!(s.hi > s.lo)) throw std::invalid_argument("marginal uniform: need hi > lo");
      return (x >= s.lo && x <= s.hi) ? 1.0 : 0.0;
    case MarginalSpec::Kind::mixture: {
      if (s.components.size() != s.weights.size() || s.components.empty())
        throw std::invalid_argument("marginal mixture: components/weights mismatch");
      double v = 0.0;
      for (std::size_t k = 0; k < s.components.size(); ++k)
        v += s.weights[k] * marginal_pdf(s.components[k], x);
      return v;
    }
  }
  return 0.0;
}

inline DensityField build_density(const MarginalSpec& s, const Grid1D& grid,
                                  const ReferenceMeasure& m) {
  const Field x = grid.nodes();
  Field raw(grid.n);
  for (int i = 0; i < grid.n; ++i) {
    const double p = marginal_pdf(s, x[i]) * grid.h;  // mass near node i
    raw[i] = p / m.weights[i];                        // density w.r.t. m
  }
  return make_density(raw, m);  // rejects zero total mass after truncation
}

}  // namespace entbridge
