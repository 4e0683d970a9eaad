#pragma once

#include <vector>

#include <Eigen/Dense>

#include "rpsf/optics.hpp"
#include "rpsf/postproc.hpp"
#include "rpsf/scene.hpp"

namespace rpsf {

/// System matrix H = [h_1 ... h_M]: column i is the unit-flux image of
/// detection i, vectorized row-major.
struct PsfMatrix {
  Eigen::MatrixXd columns;
  std::vector<Detection> positions;
};

/// Columns are rendered from the continuous optics model at each detection's
/// (x, y, zeta(z)).
PsfMatrix build_H(const std::vector<Detection>& dets, const OpticsConfig& cfg);

/// Image data as a vector in the row order of H.
Eigen::VectorXd image_vector(const ObservedImage& g);
Eigen::VectorXd image_vector(const Image& g);

/// Least-squares fluxes: solves H^T H f = H^T (g - b 1).
/// Throws SingularSystemError naming the most collinear pair of columns.
Eigen::VectorXd gaussian_flux(const PsfMatrix& H, const Eigen::VectorXd& g, double b);
Eigen::VectorXd gaussian_flux(const PsfMatrix& H, const ObservedImage& g, double b);

/// K(f) = H^+ r with r_i = (Hf + b - g)_i (Hf)_i / (Hf + b)_i.
Eigen::VectorXd kl_flux_correction(const PsfMatrix& H, const Eigen::VectorXd& f,
                                   const Eigen::VectorXd& g, double b);

/// Gradient of D_KL(Hf + b 1, g) with respect to f.
Eigen::VectorXd kl_flux_gradient(const PsfMatrix& H, const Eigen::VectorXd& f,
                                 const Eigen::VectorXd& g, double b);

/// D_KL(z, g) = <g, log(g / z)> + <1, z - g> at z = Hf + b 1, with 0 log 0 = 0.
double kl_divergence(const PsfMatrix& H, const Eigen::VectorXd& f, const Eigen::VectorXd& g,
                     double b);

struct FluxEstimate {
  Eigen::VectorXd flux;  // clamped to >= 0
  int iterations = 0;
  bool converged = false;
};

/// Fixed-point iteration f <- f_G + K(f) started from max(f_G, 0). Stops when
/// an update changes f by at most tol * ||f||_inf (returning the iterate
/// before that update) or after max_iter updates.
FluxEstimate kl_flux_iterate(const PsfMatrix& H, const Eigen::VectorXd& g, double b,
                             int max_iter = 100, double tol = 1e-6);
FluxEstimate kl_flux_iterate(const PsfMatrix& H, const ObservedImage& g, double b,
                             int max_iter = 100, double tol = 1e-6);

}  // namespace rpsf
