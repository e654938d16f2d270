#pragma once

// Heat semigroup T_t = exp(tL) via the spectral factorization of the
// symmetrized operator A = M^{1/2} L M^{-1/2}, plus the heat kernel with
// respect to m and the Bakry-Emery contraction defect.

#include "entbridge/space.hpp"

namespace entbridge {

struct SpectralDecomposition {
  Eigen::VectorXd eigenvalues;  // descending; eigenvalues[0] = 0
  Eigen::MatrixXd modes;        // orthonormal columns of the symmetrized operator
  Field sqrt_m;
  Field inv_sqrt_m;

  int size() const { return static_cast<int>(eigenvalues.size()); }
  double spectral_gap() const { return -eigenvalues[1]; }
};

inline SpectralDecomposition decompose(const Generator& L) {
  const int n = L.size();
  SpectralDecomposition S;
  S.sqrt_m = L.m.sqrt();
  S.inv_sqrt_m = 1.0 / S.sqrt_m;

  Eigen::MatrixXd A = L.dense();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) *= S.sqrt_m[i] * S.inv_sqrt_m[j];
  A = 0.5 * (A + A.transpose().eval());  // symmetric up to roundoff by detailed balance

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("decompose: eigensolver failed to converge");

  // Eigen sorts ascending; flip to descending so the stationary mode comes first.
  Eigen::VectorXd lam = eig.eigenvalues().reverse();
  Eigen::MatrixXd U = eig.eigenvectors().rowwise().reverse();
  if (lam[0] > 1e-10)
    throw std::runtime_error("decompose: positive leading eigenvalue, generator not dissipative");
  // The exact stationary eigenvalue is 0; remove the roundoff sliver so that
  // e^{t*lam} stays bounded for large t.
  for (int k = 0; k < n; ++k) lam[k] = std::min(lam[k], 0.0);

  S.eigenvalues = lam;
  S.modes = U;
  return S;
}

// T_t f = M^{-1/2} U e^{t lam} U^T M^{1/2} f.  The stationary component
// (the m-mean) is split off and carried through exactly, so constants are
// preserved to the last bit; t = 0 returns the input unchanged.
inline Field apply(const SpectralDecomposition& S, double t, const Field& f) {
  if (t < 0) throw std::invalid_argument("semigroup apply: t must be >= 0");
  if (!f.allFinite()) throw std::invalid_argument("semigroup apply: non-finite field");
  if (t == 0.0) return f;
  const Field m = S.sqrt_m * S.sqrt_m;
  const double mean = (f * m).sum();
  Eigen::VectorXd w = (S.sqrt_m * (f - mean)).matrix();
  Eigen::VectorXd c = S.modes.transpose() * w;
  for (int k = 0; k < S.size(); ++k) c[k] *= std::exp(t * S.eigenvalues[k]);
  Eigen::VectorXd z = S.modes * c;
  return mean + (S.inv_sqrt_m * z.array());
}

// Dense semigroup operator T_t = e^{tL} with nonnegative entries, built by
// uniformization and squaring: T_tau = e^{-Lam tau} sum_k (Lam tau)^k P^k / k!
// with P = I + L/Lam and tau = t / 2^s dyadic, then T_t = (T_tau)^{2^s}.
// Every entry is a sum of nonnegative terms, so the far off-diagonal tail
// keeps full relative precision down to the denormal floor -- the spectral
// synthesis loses it to cancellation, which is fatal for the log-domain
// Schroedinger iterations.  The base is a polynomial in L, so the operator
// commutes with L to roundoff and the exact discrete conservation law along
// interpolations is preserved.
inline Eigen::MatrixXd heat_operator(const Generator& L, double t) {
  if (t < 0) throw std::invalid_argument("heat_operator: t must be >= 0");
  const int n = L.size();
  if (t == 0.0) return Eigen::MatrixXd::Identity(n, n);

  const double lam = L.diag.abs().maxCoeff();
  int s = 0;
  double tau = t;
  while (lam * tau > 2.0 && s < 60) { tau *= 0.5; ++s; }

  const double a = lam * tau;
  const int K = static_cast<int>(std::ceil(a + 12.0 * std::sqrt(a + 3.0) + 25.0));

  // Poisson weights, log-accumulated to dodge overflow in k!.
  std::vector<double> c(K + 1);
  double logw = -a;  // log of e^{-a} a^k / k!
  for (int k = 0; k <= K; ++k) {
    c[k] = std::exp(logw);
    logw += std::log(a) - std::log1p(double(k));
  }

  // Column-wise accumulation of B = sum_k c_k P^k (banded on reflecting
  // grids; the wrap couples the ends immediately, so periodic runs full-range).
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, n);
  const bool periodic = L.grid.boundary == Boundary::periodic;
  Field w = Field::Zero(n), pw = Field::Zero(n);
  for (int j = 0; j < n; ++j) {
    w.setZero();
    w[j] = 1.0;
    B(j, j) += c[0];
    if (periodic) {
      for (int k = 1; k <= K; ++k) {
        for (int i = 0; i < n; ++i) {
          double v = (1.0 + L.diag[i] / lam) * w[i];
          if (i > 0) v += L.lower[i] / lam * w[i - 1];
          if (i + 1 < n) v += L.upper[i] / lam * w[i + 1];
          pw[i] = v;
        }
        pw[0] += L.wrap_lo / lam * w[n - 1];
        pw[n - 1] += L.wrap_hi / lam * w[0];
        w = pw;
        for (int i = 0; i < n; ++i) B(i, j) += c[k] * w[i];
      }
    } else {
      int lo = j, hi = j;
      for (int k = 1; k <= K; ++k) {
        const int plo = std::max(0, lo - 1), phi = std::min(n - 1, hi + 1);
        for (int i = plo; i <= phi; ++i) {
          double v = (1.0 + L.diag[i] / lam) * w[i];
          if (i > 0) v += L.lower[i] / lam * w[i - 1];
          if (i + 1 < n) v += L.upper[i] / lam * w[i + 1];
          pw[i] = v;
        }
        lo = plo; hi = phi;
        for (int i = lo; i <= hi; ++i) w[i] = pw[i];
        for (int i = lo; i <= hi; ++i) B(i, j) += c[k] * w[i];
      }
    }
  }

  for (int k = 0; k < s; ++k) B = (B * B).eval();
  return B;
}

// Kernel with respect to m: r_t(i,j) = T_t(i,j) / m_j.
inline Eigen::MatrixXd operator_to_kernel(const Eigen::MatrixXd& T, const Field& m) {
  Eigen::MatrixXd R = T;
  for (int j = 0; j < R.cols(); ++j) R.col(j) /= m[j];
  return R;
}

// Heat kernel r_t(i,j) with respect to m: (T_t f)_i = sum_j r_t(i,j) f_j m_j.
inline Eigen::MatrixXd kernel_matrix(const SpectralDecomposition& S, double t) {
  if (!(t > 0)) throw std::invalid_argument("kernel_matrix: t must be > 0");
  const int n = S.size();
  Eigen::MatrixXd B = S.modes;
  for (int k = 0; k < n; ++k) B.col(k) *= std::exp(0.5 * t * S.eigenvalues[k]);
  Eigen::MatrixXd R = B * B.transpose();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) R(i, j) *= S.inv_sqrt_m[i] * S.inv_sqrt_m[j];
  return R;
}

// log r_t, floored at kLogFloor where the kernel underflows (small t, far pairs).
inline Eigen::MatrixXd log_kernel_matrix(const SpectralDecomposition& S, double t) {
  Eigen::MatrixXd R = kernel_matrix(S, t);
  for (int i = 0; i < R.rows(); ++i)
    for (int j = 0; j < R.cols(); ++j) R(i, j) = std::log(std::max(R(i, j), kLogFloor));
  return R;
}

// max_i [ Gamma(T_t f)_i - e^{-kappa t} (T_t Gamma(f,f))_i ].
// Nonpositive in the continuum by the contraction estimate; discretely
// bounded by a grid-dependent defect that vanishes under refinement.
// The rate is e^{-kappa t}, not e^{-2 kappa t}: with the 1/2 inside L,
// Hess V >= kappa is CD(kappa/2) in generator-normalized form (check
// against the Ornstein-Uhlenbeck closed form grad T_t f = e^{-t/2} T_t grad f).
inline double bakry_emery_defect(const SpectralDecomposition& S, const Generator& L,
                                 double kappa, const Field& f, double t) {
  const Field Tf = apply(S, t, f);
  const Field lhs = gamma(L, Tf, Tf);
  const Field rhs = std::exp(-kappa * t) * apply(S, t, gamma(L, f, f));
  return (lhs - rhs).maxCoeff();
}

}  // namespace entbridge
