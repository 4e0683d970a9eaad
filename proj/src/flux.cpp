#include "rpsf/flux.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "rpsf/error.hpp"

namespace rpsf {

namespace {

Eigen::VectorXd to_vector(const ObservedImage& g) {
  Eigen::VectorXd v(g.counts.size());
  for (std::size_t i = 0; i < g.counts.size(); ++i) v[static_cast<Eigen::Index>(i)] = double(g.counts[i]);
  return v;
}

Eigen::VectorXd to_vector(const Image& g) {
  Eigen::VectorXd v(g.values().size());
  for (std::size_t i = 0; i < g.values().size(); ++i) v[static_cast<Eigen::Index>(i)] = g.values()[i];
  return v;
}

void check_sizes(const PsfMatrix& H, const Eigen::VectorXd& g) {
  if (H.columns.rows() != g.size())
    throw ShapeError("PSF matrix rows do not match the image size");
  if (H.columns.cols() < 1) throw ShapeError("PSF matrix has no columns");
}

// Cholesky factor of H^T H, rejecting (near-)singular Gram matrices.
class GramSolver {
 public:
  explicit GramSolver(const PsfMatrix& H) : H_(H.columns), llt_(H.columns.transpose() * H.columns) {
    const double rcond = llt_.info() == Eigen::Success ? llt_.rcond() : 0.0;
    if (!(rcond > 1e-12)) {
      auto [a, b] = most_collinear(H.columns);
      throw SingularSystemError("H^T H is singular: detections " + std::to_string(a) + " and " +
                                    std::to_string(b) + " are (nearly) identical",
                                a, b);
    }
  }

  // (H^T H)^{-1} H^T v
  Eigen::VectorXd pinv(const Eigen::VectorXd& v) const { return llt_.solve(H_.transpose() * v); }

 private:
  static std::pair<int, int> most_collinear(const Eigen::MatrixXd& H) {
    int best_a = 0, best_b = 0;
    double best = -1.0;
    for (Eigen::Index a = 0; a < H.cols(); ++a)
      for (Eigen::Index b = a + 1; b < H.cols(); ++b) {
        const double na = H.col(a).norm(), nb = H.col(b).norm();
        const double c = (na > 0 && nb > 0) ? std::abs(H.col(a).dot(H.col(b))) / (na * nb) : 1.0;
        if (c > best) {
          best = c;
          best_a = int(a);
          best_b = int(b);
        }
      }
    return {best_a, best_b};
  }

  const Eigen::MatrixXd& H_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

}  // namespace

PsfMatrix build_H(const std::vector<Detection>& dets, const OpticsConfig& cfg) {
  cfg.validate();
  if (dets.empty()) throw ConfigError("build_H needs at least one detection");
  const Eigen::Index K = static_cast<Eigen::Index>(cfg.rows) * cfg.cols;
  if (static_cast<Eigen::Index>(dets.size()) > K) throw ConfigError("more detections than pixels");

  PupilModel model(cfg);
  PsfMatrix H;
  H.positions = dets;
  H.columns.resize(K, static_cast<Eigen::Index>(dets.size()));
  for (std::size_t c = 0; c < dets.size(); ++c) {
    const Detection& det = dets[c];
    if (!(det.x >= 0.0 && det.x < cfg.rows && det.y >= 0.0 && det.y < cfg.cols && det.z >= 0.0 &&
          det.z <= cfg.num_slices - 1))
      throw DomainError("detection " + std::to_string(c) + " lies outside the volume");
    const Image img =
        model.slice(cfg.zeta_at(det.z), det.x - cfg.rows / 2, det.y - cfg.cols / 2);
    const auto vals = img.values();
    for (Eigen::Index p = 0; p < K; ++p) H.columns(p, static_cast<Eigen::Index>(c)) = vals[p];
  }
  return H;
}

Eigen::VectorXd gaussian_flux(const PsfMatrix& H, const Eigen::VectorXd& g, double b) {
  check_sizes(H, g);
  GramSolver solver(H);
  return solver.pinv(g.array() - b);
}

Eigen::VectorXd kl_flux_correction(const PsfMatrix& H, const Eigen::VectorXd& f,
                                   const Eigen::VectorXd& g, double b) {
  check_sizes(H, g);
  GramSolver solver(H);
  const Eigen::VectorXd hf = H.columns * f;
  const Eigen::VectorXd z = hf.array() + b;
  const Eigen::VectorXd r = (z - g).array() * hf.array() / z.array();
  return solver.pinv(r);
}

Eigen::VectorXd kl_flux_gradient(const PsfMatrix& H, const Eigen::VectorXd& f,
                                 const Eigen::VectorXd& g, double b) {
  check_sizes(H, g);
  const Eigen::VectorXd z = (H.columns * f).array() + b;
  const Eigen::VectorXd r = (z - g).array() / z.array();
  return H.columns.transpose() * r;
}

double kl_divergence(const PsfMatrix& H, const Eigen::VectorXd& f, const Eigen::VectorXd& g,
                     double b) {
  check_sizes(H, g);
  const Eigen::VectorXd z = (H.columns * f).array() + b;
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double gi = g[i];
    if (gi > 0.0) {
      if (!(z[i] > 0.0)) return std::numeric_limits<double>::infinity();
      total += gi * std::log(gi / z[i]);
    }
    total += z[i] - gi;
  }
  return total;
}

FluxEstimate kl_flux_iterate(const PsfMatrix& H, const Eigen::VectorXd& gv, double b,
                             int max_iter, double tol) {
  check_sizes(H, gv);
  if (!(b > 0.0)) throw DomainError("KL flux iteration needs background b > 0");
  if (max_iter < 0) throw ConfigError("max_iter must be >= 0");
  if (!(tol >= 0.0)) throw ConfigError("tol must be >= 0");

  GramSolver solver(H);
  const Eigen::VectorXd f_gauss = solver.pinv(gv.array() - b);

  FluxEstimate est;
  Eigen::VectorXd f = f_gauss.cwiseMax(0.0);
  const double limit = 1e3 * std::max(f.norm(), 1.0);
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd hf = H.columns * f;
    const Eigen::VectorXd z = hf.array() + b;
    if ((z.array() <= 0.0).any())
      throw DivergenceError("KL flux iteration left the domain Hf + b > 0 at step " +
                            std::to_string(it));
    const Eigen::VectorXd r = (z - gv).array() * hf.array() / z.array();
    const Eigen::VectorXd next = f_gauss + solver.pinv(r);
    if (!next.allFinite() || next.norm() > limit)
      throw DivergenceError("KL flux iteration diverged at step " + std::to_string(it) +
                            " (|f| = " + std::to_string(next.norm()) + ")");
    ++est.iterations;
    const double step = (next - f).lpNorm<Eigen::Infinity>();
    if (step <= tol * f.lpNorm<Eigen::Infinity>()) {
      est.converged = true;
      break;
    }
    f = next;
  }
  est.flux = f.cwiseMax(0.0);
  return est;
}

Eigen::VectorXd image_vector(const ObservedImage& g) { return to_vector(g); }
Eigen::VectorXd image_vector(const Image& g) { return to_vector(g); }

Eigen::VectorXd gaussian_flux(const PsfMatrix& H, const ObservedImage& g, double b) {
  return gaussian_flux(H, to_vector(g), b);
}

FluxEstimate kl_flux_iterate(const PsfMatrix& H, const ObservedImage& g, double b, int max_iter,
                             double tol) {
  return kl_flux_iterate(H, to_vector(g), b, max_iter, tol);
}

}  // namespace rpsf
