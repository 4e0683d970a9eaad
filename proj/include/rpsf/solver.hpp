#pragma once

#include <string>
#include <vector>

#include "rpsf/forward_model.hpp"
#include "rpsf/optics.hpp"
#include "rpsf/scene.hpp"
#include "rpsf/tensor.hpp"

namespace rpsf {

enum class DataFit { KL, LeastSquares };
enum class Regularizer { NonConvex, L1 };

struct SolverParams {
  double a = 80.0;      // non-convexity scale of t / (a + t)
  double mu = 1.0;      // regularization weight
  double beta0 = 1.0;   // penalty on U0 = A * X
  double beta1 = 1.0;   // penalty on U1 = X
  double rho = 1.618;   // dual step, in (0, (1 + sqrt 5) / 2)
  int max_outer = 2;
  int max_inner = 400;
  double inner_tol = 1e-6;
  DataFit datafit = DataFit::KL;
  Regularizer regularizer = Regularizer::NonConvex;
  double background = 5.0;

  void validate() const;
};

struct TraceRecord {
  int outer = 0;
  int inner = 0;
  double gap0 = 0.0;       // ||U0 - A * X||_F
  double gap1 = 0.0;       // ||U1 - X||_F
  double objective = 0.0;  // split objective: data(T U0) + sum w |U1|
};

struct SolveTrace {
  std::vector<TraceRecord> records;
};

struct SolveResult {
  Volume volume;
  SolveTrace trace;
};

/// Minimizer over u of u - g log(u + b) + beta/2 (u - xi)^2, i.e. the root
/// u = y - b of beta y^2 + (1 - beta b - beta xi) y - g = 0 with y >= 0.
double kl_prox_scalar(double xi, double g, double b, double beta);

/// Proximal map of the KL data term on the last slice; other slices pass
/// through unchanged.
Volume kl_prox(const Volume& xi, const Image& counts, double b, double beta);

/// Minimizer of 1/2 (u + b - g)^2 + beta/2 (u - xi)^2 on the last slice; other
/// slices pass through unchanged.
Volume ls_prox(const Volume& xi, const Image& counts, double b, double beta);

/// Elementwise max(v - t, 0).
Volume shrink_nonneg(const Volume& v, const Volume& thresholds);

/// Minimizer over X of beta0/2 ||u0 - eta0 - A*X||^2 + beta1/2 ||u1 - eta1 - X||^2,
/// solved by spectral division.
Volume x_update(ForwardOperator& op, const Volume& u0, const Volume& eta0, const Volume& u1,
                const Volume& eta1, double beta0, double beta1);
Volume x_update(const PsfStack& dict, const Volume& u0, const Volume& eta0, const Volume& u1,
                const Volume& eta1, double beta0, double beta1);

/// Reweighting a mu / (a + X)^2 of the non-convex penalty at X >= 0.
Volume irl1_weights(const Volume& x, double a, double mu);

/// ADMM for the weighted-l1 subproblem. Returns the non-negative U1 iterate.
SolveResult admm_weighted_l1(const ObservedImage& g, ForwardOperator& op, const Volume& weights,
                             const SolverParams& params, const Volume& warm, int outer_index = 0);
SolveResult admm_weighted_l1(const ObservedImage& g, const PsfStack& dict, const Volume& weights,
                             const SolverParams& params, const Volume& warm);

/// Iteratively reweighted l1 driver. The L1 regularizer runs one round with
/// uniform weights mu; LeastSquares swaps the KL proximal step for ls_prox.
SolveResult irl1_solve(const ObservedImage& g, const PsfStack& dict, const SolverParams& params);

/// <1, T(A*X) - G log(T(A*X) + b)> + mu sum X / (a + X).
double kl_objective(const Volume& vol, ForwardOperator& op, const Image& counts, double b,
                    double mu, double a);
double kl_objective(const Volume& vol, const PsfStack& dict, const Image& counts, double b,
                    double mu, double a);

/// Gradient of the data term of kl_objective: A^T T^T (1 - G / (T(A*X) + b)).
Volume kl_data_gradient(const Volume& vol, ForwardOperator& op, const Image& counts, double b);

std::string to_string(DataFit f);
std::string to_string(Regularizer r);

}  // namespace rpsf
