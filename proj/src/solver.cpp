#include "rpsf/solver.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "rpsf/error.hpp"

namespace rpsf {

void SolverParams::validate() const {
  if (!(a > 0.0)) throw ConfigError("solver parameter a must be > 0");
  if (!(mu > 0.0)) throw ConfigError("solver parameter mu must be > 0");
  if (!(beta0 > 0.0) || !(beta1 > 0.0)) throw ConfigError("beta0 and beta1 must be > 0");
  if (!(rho > 0.0 && rho < (1.0 + std::sqrt(5.0)) / 2.0))
    throw ConfigError("rho must lie in (0, (1 + sqrt 5) / 2)");
  if (max_outer < 1 || max_inner < 1) throw ConfigError("iteration caps must be >= 1");
  if (!(inner_tol >= 0.0)) throw ConfigError("inner_tol must be >= 0");
  if (!(background >= 0.0)) throw ConfigError("background must be >= 0");
}

std::string to_string(DataFit f) { return f == DataFit::KL ? "kl" : "l2"; }
std::string to_string(Regularizer r) { return r == Regularizer::NonConvex ? "nc" : "l1"; }

double kl_prox_scalar(double xi, double g, double b, double beta) {
  const double c = 1.0 - beta * b - beta * xi;
  const double disc = std::sqrt(c * c + 4.0 * beta * g);
  // Two algebraically equal forms of the non-negative root; pick the one
  // without cancellation.
  const double y = c > 0.0 ? 2.0 * g / (c + disc) : (disc - c) / (2.0 * beta);
  return y - b;
}

namespace {

void check_counts(const Volume& xi, const Image& counts) {
  if (counts.rows() != xi.rows() || counts.cols() != xi.cols())
    throw ShapeError("count image does not match the volume");
  if (xi.depth() < 1) throw ShapeError("volume has no slices");
}

template <typename Fn>
Volume last_slice_map(const Volume& xi, const Image& counts, Fn fn) {
  check_counts(xi, counts);
  Volume out = xi;
  const int k = xi.depth() - 1;
  for (int i = 0; i < xi.rows(); ++i)
    for (int j = 0; j < xi.cols(); ++j) out(i, j, k) = fn(xi(i, j, k), counts(i, j));
  return out;
}

double ls_prox_scalar(double xi, double g, double b, double beta) {
  return (beta * xi + (g - b)) / (1.0 + beta);
}

}  // namespace

Volume kl_prox(const Volume& xi, const Image& counts, double b, double beta) {
  if (!(beta > 0.0)) throw DomainError("kl_prox needs beta > 0");
  if (!(b >= 0.0)) throw DomainError("kl_prox needs b >= 0");
  for (double g : counts.values())
    if (g < 0.0) throw DomainError("kl_prox needs non-negative counts");
  return last_slice_map(xi, counts,
                        [&](double x, double g) { return kl_prox_scalar(x, g, b, beta); });
}

Volume ls_prox(const Volume& xi, const Image& counts, double b, double beta) {
  if (!(beta > 0.0)) throw DomainError("ls_prox needs beta > 0");
  return last_slice_map(xi, counts,
                        [&](double x, double g) { return ls_prox_scalar(x, g, b, beta); });
}

Volume shrink_nonneg(const Volume& v, const Volume& thresholds) {
  if (!v.same_shape(thresholds)) throw ShapeError("threshold volume shape mismatch");
  Volume out(v.rows(), v.cols(), v.depth());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::max(v[i] - thresholds[i], 0.0);
  return out;
}

Volume x_update(ForwardOperator& op, const Volume& u0, const Volume& eta0, const Volume& u1,
                const Volume& eta1, double beta0, double beta1) {
  if (!(beta0 > 0.0) || !(beta1 > 0.0)) throw DomainError("x_update needs beta0, beta1 > 0");
  const std::size_t ns = op.spectrum_size();
  std::vector<Complex> s0(ns), s1(ns);
  op.transform(u0 - eta0, s0);
  op.transform(u1 - eta1, s1);
  const double r = beta1 / beta0;
  const auto kh = op.kernel_spectrum();
  for (std::size_t i = 0; i < ns; ++i)
    s0[i] = (std::conj(kh[i]) * s0[i] + r * s1[i]) / (std::norm(kh[i]) + r);
  Volume x(op.rows(), op.cols(), op.depth());
  op.inverse_transform(s0, x);
  return x;
}

Volume x_update(const PsfStack& dict, const Volume& u0, const Volume& eta0, const Volume& u1,
                const Volume& eta1, double beta0, double beta1) {
  ForwardOperator op(dict);
  return x_update(op, u0, eta0, u1, eta1, beta0, beta1);
}

Volume irl1_weights(const Volume& x, double a, double mu) {
  Volume w(x.rows(), x.cols(), x.depth());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double t = a + std::abs(x[i]);
    w[i] = a * mu / (t * t);
  }
  return w;
}

SolveResult admm_weighted_l1(const ObservedImage& g, ForwardOperator& op, const Volume& weights,
                             const SolverParams& params, const Volume& warm, int outer_index) {
  params.validate();
  const int m = op.rows(), n = op.cols(), d = op.depth();
  if (g.rows != m || g.cols != n) throw ShapeError("observed image does not match the dictionary");
  if (weights.rows() != m || weights.cols() != n || weights.depth() != d)
    throw ShapeError("weight volume does not match the dictionary");
  if (!warm.same_shape(weights)) throw ShapeError("warm start does not match the dictionary");
  for (double w : weights.values())
    if (!(w > 0.0)) throw ConfigError("weights must be > 0");

  const Image counts = g.as_image();
  const double b = params.background;
  const double beta0 = params.beta0, beta1 = params.beta1, rho = params.rho;
  const bool kl = params.datafit == DataFit::KL;

  // The data-side variables U0 and eta0 only differ from A*X in their last
  // slice, so they are carried as spectra and only that slice is formed in
  // real space.
  const std::size_t ns = op.spectrum_size();
  const auto kh = op.kernel_spectrum();
  const double ratio = beta1 / beta0;
  std::vector<Complex> c0(ns);
  std::vector<double> c1(ns);
  for (std::size_t i = 0; i < ns; ++i) {
    const double denom = std::norm(kh[i]) + ratio;
    c0[i] = std::conj(kh[i]) / denom;
    c1[i] = ratio / denom;
  }

  Volume x = warm;
  Volume u1 = warm;
  Volume eta1(m, n, d);
  Volume thresholds = weights;
  thresholds *= 1.0 / beta1;
  std::vector<Complex> x_hat(ns), ax_hat(ns), eta0_hat(ns), u0_hat(ns), s1(ns);
  op.transform(x, x_hat);
  for (std::size_t i = 0; i < ns; ++i) ax_hat[i] = kh[i] * x_hat[i];
  Image xi(m, n), delta(m, n);
  Volume work(m, n, d);

  SolveTrace trace;
  for (int t = 0; t < params.max_inner; ++t) {
    // U0: proximal step on the data term at xi = A*X + eta0.
    for (std::size_t i = 0; i < ns; ++i) u0_hat[i] = ax_hat[i] + eta0_hat[i];
    op.last_slice(u0_hat, xi);
    double data_objective = 0.0;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) {
        const double gij = counts(i, j);
        const double u = kl ? kl_prox_scalar(xi(i, j), gij, b, beta0)
                            : (beta0 * xi(i, j) + (gij - b)) / (1.0 + beta0);
        delta(i, j) = u - xi(i, j);
        if (kl) {
          data_objective += u;
          if (gij > 0.0) data_objective -= gij * std::log(u + b);
        } else {
          data_objective += 0.5 * (u + b - gij) * (u + b - gij);
        }
      }
    op.add_last_slice(delta, u0_hat);

    // U1: non-negative soft threshold.
    double change = 0.0, prev_norm = 0.0;
    for (std::size_t i = 0; i < u1.size(); ++i) {
      const double v = std::max(x[i] + eta1[i] - thresholds[i], 0.0);
      change += (v - u1[i]) * (v - u1[i]);
      prev_norm += u1[i] * u1[i];
      u1[i] = v;
    }

    // X: spectral solve with U0 - eta0 and U1 - eta1.
    for (std::size_t i = 0; i < work.size(); ++i) work[i] = u1[i] - eta1[i];
    op.transform(work, s1);
    for (std::size_t i = 0; i < ns; ++i) {
      x_hat[i] = c0[i] * (u0_hat[i] - eta0_hat[i]) + c1[i] * s1[i];
      ax_hat[i] = kh[i] * x_hat[i];
    }
    op.inverse_transform(x_hat, x);

    // Multipliers. u0_hat becomes the residual U0 - A*X.
    for (std::size_t i = 0; i < ns; ++i) {
      u0_hat[i] -= ax_hat[i];
      eta0_hat[i] -= rho * u0_hat[i];
    }
    const double gap0 = op.norm2(u0_hat);
    double gap1 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r1 = u1[i] - x[i];
      gap1 += r1 * r1;
      eta1[i] -= rho * r1;
    }

    double objective = data_objective;
    for (std::size_t i = 0; i < u1.size(); ++i) objective += weights[i] * u1[i];

    TraceRecord rec{outer_index, t, std::sqrt(gap0), std::sqrt(gap1), objective};
    if (!std::isfinite(rec.gap0) || !std::isfinite(rec.gap1) || !std::isfinite(rec.objective))
      throw DivergenceError("ADMM produced non-finite values at outer " +
                            std::to_string(outer_index) + ", inner " + std::to_string(t) +
                            " (gap0=" + std::to_string(rec.gap0) +
                            ", gap1=" + std::to_string(rec.gap1) + ")");
    trace.records.push_back(rec);

    if (prev_norm > 0.0 && std::sqrt(change / prev_norm) < params.inner_tol) break;
  }
  return {std::move(u1), std::move(trace)};
}

SolveResult admm_weighted_l1(const ObservedImage& g, const PsfStack& dict, const Volume& weights,
                             const SolverParams& params, const Volume& warm) {
  ForwardOperator op(dict);
  return admm_weighted_l1(g, op, weights, params, warm);
}

SolveResult irl1_solve(const ObservedImage& g, const PsfStack& dict, const SolverParams& params) {
  params.validate();
  const int m = dict.rows(), n = dict.cols(), d = dict.depth();
  if (g.rows != m || g.cols != n) throw ShapeError("observed image does not match the dictionary");
  SolveResult result{Volume(m, n, d), {}};
  if (g.all_zero()) return result;

  ForwardOperator op(dict);
  const int rounds = params.regularizer == Regularizer::L1 ? 1 : params.max_outer;
  for (int l = 0; l < rounds; ++l) {
    const Volume weights = params.regularizer == Regularizer::L1
                               ? Volume(m, n, d, params.mu)
                               : irl1_weights(result.volume, params.a, params.mu);
    SolveResult inner = admm_weighted_l1(g, op, weights, params, result.volume, l);
    result.volume = std::move(inner.volume);
    result.trace.records.insert(result.trace.records.end(), inner.trace.records.begin(),
                                inner.trace.records.end());
  }
  return result;
}

double kl_objective(const Volume& vol, ForwardOperator& op, const Image& counts, double b,
                    double mu, double a) {
  check_counts(vol, counts);
  const Image z = extract_last_slice(op.apply(vol));
  double data = 0.0;
  for (int i = 0; i < z.rows(); ++i)
    for (int j = 0; j < z.cols(); ++j) {
      const double g = counts(i, j);
      const double y = z(i, j) + b;
      data += z(i, j);
      if (g > 0.0) {
        if (!(y > 0.0))
          throw DomainError("T(A*X) + b must be positive where counts are positive");
        data -= g * std::log(y);
      }
    }
  double reg = 0.0;
  for (double x : vol.values()) reg += std::abs(x) / (a + std::abs(x));
  return data + mu * reg;
}

double kl_objective(const Volume& vol, const PsfStack& dict, const Image& counts, double b,
                    double mu, double a) {
  ForwardOperator op(dict);
  return kl_objective(vol, op, counts, b, mu, a);
}

Volume kl_data_gradient(const Volume& vol, ForwardOperator& op, const Image& counts, double b) {
  check_counts(vol, counts);
  const Image z = extract_last_slice(op.apply(vol));
  Image r(z.rows(), z.cols());
  for (int i = 0; i < z.rows(); ++i)
    for (int j = 0; j < z.cols(); ++j) {
      const double g = counts(i, j);
      r(i, j) = 1.0 - (g > 0.0 ? g / (z(i, j) + b) : 0.0);
    }
  return op.adjoint(embed_last_slice(r, vol.depth()));
}

}  // namespace rpsf
