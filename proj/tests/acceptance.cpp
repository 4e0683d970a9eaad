// Acceptance run: one PASS/FAIL line per criterion. Simulation criteria use
// the tuned configuration; the rest are numerical oracles.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "CLI11.hpp"
#include "rpsf/experiment.hpp"
#include "rpsf/io_store.hpp"

using namespace rpsf;

namespace {

// Tolerances and thresholds.
constexpr int kDensity = 15;
constexpr double kFlux = 2000.0;
constexpr double kLowFlux = 1000.0;
constexpr double kBackground = 5.0;
constexpr int kSeeds = 20;
constexpr double kMinRecall = 0.95;
constexpr double kMinPrecision = 0.80;
constexpr double kMaxSeconds = 15 * 60;
constexpr double kPrecisionGap = 0.15;
constexpr double kMaxL1PrePrecision = 0.15;
constexpr double kLowPhotonRecallGap = 0.03;
constexpr double kStableSigma = 2 * std::numbers::pi / 40;
constexpr double kMaxRecallChange = 0.03;
constexpr double kMaxPrecisionDrop = 0.06;
constexpr double kProxTol = 1e-8;
constexpr double kSolveTol = 1e-8;
constexpr double kGradTol = 1e-6;
constexpr double kFluxTol = 1e-6;
constexpr double kRenderTol = 1e-8;
constexpr double kThreshold = 0.05;

std::vector<int> failed;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  if (!pass) failed.push_back(id);
  std::printf("%s criterion %d (%s): %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double a = 0, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

struct Study {
  const ExperimentConfig& cfg;
  const PsfStack& dict;
  int threads;

  std::vector<SimulatedImage> images(double flux, std::optional<double> sigma = std::nullopt) const {
    std::vector<SimulatedImage> out(kSeeds);
    parallel_for(kSeeds, threads, [&](int i) {
      out[i] = simulate(cfg.optics, kDensity, flux, kBackground, cfg.simulation.test_seed(i), sigma);
    });
    return out;
  }

  BatchSummary run(Algorithm a, const std::vector<SimulatedImage>& imgs, double* seconds = nullptr) const {
    SolverParams p = cfg.params(a);
    p.background = kBackground;
    const auto t0 = std::chrono::steady_clock::now();
    const auto cells = run_batch(imgs, dict, p, cfg.pipeline, cfg.match, threads);
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (seconds) *seconds = s;
    const BatchSummary sum = summarize(cells);
    std::printf("  %-6s recall=%.4f precision=%.4f pre_recall=%.4f pre_precision=%.4f failures=%d (%.1fs)\n",
                algorithm_name(a).c_str(), sum.post.mean_recall, sum.post.mean_precision,
                sum.pre.mean_recall, sum.pre.mean_precision, sum.failures, s);
    std::fflush(stdout);
    return sum;
  }
};

Volume random_volume(int m, int n, int d, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Volume v(m, n, d);
  for (auto& x : v.values()) x = u(rng);
  return v;
}

// f(u1) - f(u2) for f(u) = u - g log(u + b) + beta/2 (u - xi)^2, evaluated
// without forming the two large values.
double prox_difference(double u1, double u2, double xi, double g, double b, double beta) {
  const double h = u1 - u2;
  double d = h + beta / 2 * h * ((u1 - xi) + (u2 - xi));
  if (g > 0.0) d -= g * std::log1p(h / (u2 + b));
  return d;
}

double golden_section_prox(double xi, double g, double b, double beta) {
  // The minimizer lies between the unpenalized optimum g - b and xi, and
  // above -b.
  double lo = std::max(std::min(xi, g - b), -b);
  double hi = std::max(xi, g - b);
  if (hi <= lo) return lo;
  const double r = (std::sqrt(5.0) - 1) / 2;
  double x1 = hi - r * (hi - lo), x2 = lo + r * (hi - lo);
  for (int it = 0; it < 500 && hi - lo > 1e-14 * std::max(1.0, std::abs(hi)); ++it) {
    if (prox_difference(x1, x2, xi, g, b, beta) < 0.0) {
      hi = x2;
      x2 = x1;
      x1 = hi - r * (hi - lo);
    } else {
      lo = x1;
      x1 = x2;
      x2 = lo + r * (hi - lo);
    }
  }
  return (lo + hi) / 2;
}

void prox_oracle() {
  std::mt19937_64 rng(501);
  std::uniform_real_distribution<double> uxi(-50.0, 500.0), ulb(-3.0, 1.0), ub(0.5, 20.0);
  std::uniform_int_distribution<int> ug(0, 300);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const double xi = uxi(rng), beta = std::pow(10.0, ulb(rng)), b = ub(rng);
    const double g = ug(rng);
    worst = std::max(worst, std::abs(kl_prox_scalar(xi, g, b, beta) - golden_section_prox(xi, g, b, beta)));
  }
  report(5, "prox oracle", worst <= kProxTol, fmt("max |error| = %.3g over 1000 tuples", worst));
}

void linear_solve_oracle() {
  const int m = 6, n = 6, d = 2, N = m * n * d;
  std::mt19937_64 rng(601);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    ForwardOperator op(random_volume(m, n, d, rng, 0.0, 1.0));
    Eigen::MatrixXd A(N, N);
    for (int c = 0; c < N; ++c) {
      Volume e(m, n, d);
      e[c] = 1.0;
      const Volume col = op.apply(e);
      for (int r = 0; r < N; ++r) A(r, c) = col[r];
    }
    const Volume u0 = random_volume(m, n, d, rng, -5, 5), e0 = random_volume(m, n, d, rng, -1, 1);
    const Volume u1 = random_volume(m, n, d, rng, 0, 5), e1 = random_volume(m, n, d, rng, -1, 1);
    const double b0 = std::pow(10.0, std::uniform_real_distribution<double>(-3, 1)(rng));
    const double b1 = std::pow(10.0, std::uniform_real_distribution<double>(-3, 1)(rng));
    const Volume x = x_update(op, u0, e0, u1, e1, b0, b1);
    Eigen::VectorXd r0(N), r1(N), xv(N);
    for (int i = 0; i < N; ++i) {
      r0[i] = u0[i] - e0[i];
      r1[i] = u1[i] - e1[i];
      xv[i] = x[i];
    }
    const Eigen::MatrixXd lhs = b0 * A.transpose() * A + b1 * Eigen::MatrixXd::Identity(N, N);
    const Eigen::VectorXd ref = lhs.ldlt().solve(b0 * A.transpose() * r0 + b1 * r1);
    worst = std::max(worst, (xv - ref).norm() / ref.norm());
  }
  report(6, "linear-solve oracle", worst <= kSolveTol,
         fmt("max relative error = %.3g over 10 instances", worst));
}

void gradient_check() {
  const int m = 8, n = 8, d = 3;
  std::mt19937_64 rng(701);
  double worst = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    ForwardOperator op(random_volume(m, n, d, rng, 0.0, 1.0));
    Image g(m, n);
    std::uniform_int_distribution<int> ug(0, 40);
    for (auto& v : g.values()) v = ug(rng);
    const Volume x = random_volume(m, n, d, rng, 0.5, 20.0);
    const double b = 5.0, mu = 3.0, a = 80.0;
    Volume grad = kl_data_gradient(x, op, g, b);
    double scale = 1.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      grad[i] += mu * a / ((a + x[i]) * (a + x[i]));
      scale = std::max(scale, std::abs(grad[i]));
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double h = 1e-5;
      Volume xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      const double fd = (kl_objective(xp, op, g, b, mu, a) - kl_objective(xm, op, g, b, mu, a)) / (2 * h);
      worst = std::max(worst, std::abs(fd - grad[i]) / scale);
    }
  }
  report(7, "gradient check", worst <= kGradTol, fmt("max scaled error = %.3g over 5 instances", worst));
}

void flux_fixed_point(const OpticsConfig& cfg) {
  std::mt19937_64 rng(801);
  std::uniform_real_distribution<double> ux(4.0, cfg.rows - 4.0), uy(4.0, cfg.cols - 4.0),
      uz(0.0, cfg.num_slices - 1.0), uf(500.0, 4000.0);
  double worst = 0.0;
  for (int M : {1, 3, 10}) {
    std::vector<Detection> dets;
    while (static_cast<int>(dets.size()) < M) {
      const Detection c{ux(rng), uy(rng), uz(rng), 0.0};
      bool ok = true;
      for (const auto& o : dets) ok &= std::hypot(o.x - c.x, o.y - c.y) >= 12.0;
      if (ok) dets.push_back(c);
    }
    const PsfMatrix H = build_H(dets, cfg);
    Eigen::VectorXd f(M);
    for (auto& v : f) v = uf(rng);
    const Eigen::VectorXd g = (H.columns * f).array() + kBackground;
    const FluxEstimate est = kl_flux_iterate(H, g, kBackground);
    worst = std::max(worst, (est.flux - f).lpNorm<Eigen::Infinity>() / f.lpNorm<Eigen::Infinity>());
  }
  report(8, "flux fixed point", worst <= kFluxTol, fmt("max relative error = %.3g for M = 1, 3, 10", worst));
}

void forward_consistency(const OpticsConfig& cfg, const PsfStack& dict) {
  ForwardOperator op(dict);
  std::mt19937_64 rng(901);
  std::uniform_int_distribution<int> ui(0, cfg.rows - 1), uj(0, cfg.cols - 1), uk(0, cfg.num_slices - 1);
  double worst = 0.0;
  for (int t = 0; t < 8; ++t) {
    const int i = ui(rng), j = uj(rng), k = uk(rng);
    Volume x(cfg.rows, cfg.cols, cfg.num_slices);
    x(i, j, k) = 1.0;
    const Image conv = extract_last_slice(op.apply(x));
    Scene s;
    s.sources = {{double(i), double(j), dict.zetas[k], 1.0}};
    const Image ren = render(s, cfg);
    double diff = 0, ref = 0;
    for (std::size_t p = 0; p < ren.size(); ++p) {
      diff += std::pow(ren.values()[p] - conv.values()[p], 2);
      ref += std::pow(ren.values()[p], 2);
    }
    worst = std::max(worst, std::sqrt(diff / ref));
  }
  report(9, "forward-model consistency", worst <= kRenderTol,
         fmt("max relative error = %.3g over 8 one-hot volumes", worst));
}

void postproc_properties() {
  std::mt19937_64 rng(1001);
  bool conserved = true, partition = true, rule = true;
  for (int trial = 0; trial < 50; ++trial) {
    Volume v(32, 32, 8);
    std::uniform_int_distribution<int> keep(0, 15), val(1, 200);
    long long total = 0;
    for (auto& x : v.values())
      if (keep(rng) == 0) {
        x = val(rng);
        total += static_cast<long long>(x);
      }
    const Clustering c = cluster_voxels(v);
    double sum = 0.0;
    for (const auto& d : c.detections) sum += d.flux;
    conserved &= sum == static_cast<double>(total);

    std::vector<double> per(c.detections.size(), 0.0);
    for (std::size_t p = 0; p < v.size(); ++p) {
      const int l = c.labels[p];
      if (v[p] > 0.0) {
        partition &= l >= 0 && l < static_cast<int>(per.size());
        if (l >= 0) per[l] += v[p];
      } else {
        partition &= l == -1;
      }
    }
    for (std::size_t q = 0; q < per.size(); ++q) partition &= per[q] == c.detections[q].flux;

    const auto kept = threshold_detections(c.detections, kThreshold);
    const double peak = c.detections.empty() ? 0.0 : c.detections.front().flux;
    std::size_t expect = 0;
    for (const auto& d : c.detections) expect += d.flux >= kThreshold * peak;
    rule &= kept.size() == expect;
    for (const auto& d : kept) rule &= d.flux >= kThreshold * peak;
  }
  report(10, "post-processing properties", conserved && partition && rule,
         std::string("flux conservation ") + (conserved ? "exact" : "violated") + ", partition " +
             (partition ? "holds" : "violated") + ", threshold rule " + (rule ? "holds" : "violated") +
             " on 50 volumes");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::string config_path = RPSF_TUNED_CONFIG;
  int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  bool oracles_only = false;
  std::vector<int> expected;
  app.add_option("--config", config_path, "Tuned experiment configuration");
  app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--oracles-only", oracles_only, "Skip the simulation criteria");
  app.add_option("--expect-fail", expected, "Criteria known to fail; they do not set the exit code");
  CLI11_PARSE(app, argc, argv);

  try {
    const ExperimentConfig cfg = load_experiment_config(config_path);
    const PsfStack dict = build_dictionary(cfg.optics);
    std::printf("config %s (hash %s), %d thread(s)\n", config_path.c_str(), config_hash(cfg).c_str(),
                threads);

    if (!oracles_only) {
      const Study st{cfg, dict, threads};
      const auto base = st.images(kFlux);

      double seconds = 0.0;
      const BatchSummary klnc = st.run(Algorithm::KlNc, base, &seconds);
      report(1, "15-source reproduction",
             klnc.post.mean_recall >= kMinRecall && klnc.post.mean_precision >= kMinPrecision &&
                 seconds < kMaxSeconds,
             fmt("KL-NC recall %.4f (>= 0.95), precision %.4f (>= 0.80), runtime %.1f s (< 900)",
                 klnc.post.mean_recall, klnc.post.mean_precision, seconds));

      const BatchSummary kll1 = st.run(Algorithm::KlL1, base);
      const BatchSummary l2l1 = st.run(Algorithm::L2L1, base);
      const double gap_kl = klnc.post.mean_precision - kll1.post.mean_precision;
      const double gap_l2 = klnc.post.mean_precision - l2l1.post.mean_precision;
      report(2, "ordering",
             gap_kl >= kPrecisionGap && gap_l2 >= kPrecisionGap &&
                 kll1.pre.mean_precision < kMaxL1PrePrecision &&
                 l2l1.pre.mean_precision < kMaxL1PrePrecision,
             fmt("precision gap vs KL-l1 %.4f, vs l2-l1 %.4f (>= 0.15); pre-post precision "
                 "KL-l1 %.4f, l2-l1 %.4f (< 0.15)",
                 gap_kl, gap_l2, kll1.pre.mean_precision, l2l1.pre.mean_precision));

      const auto low = st.images(kLowFlux);
      const BatchSummary kl_low = st.run(Algorithm::KlNc, low);
      const BatchSummary l2_low = st.run(Algorithm::L2Nc, low);
      const double recall_gap = kl_low.post.mean_recall - l2_low.post.mean_recall;
      report(3, "low-photon", recall_gap >= kLowPhotonRecallGap,
             fmt("KL-NC recall %.4f, l2-NC recall %.4f, gap %.4f (>= 0.03)", kl_low.post.mean_recall,
                 l2_low.post.mean_recall, recall_gap));

      std::vector<double> sigmas = cfg.studies.mask_sigmas;
      if (std::find(sigmas.begin(), sigmas.end(), kStableSigma) == sigmas.end()) sigmas.push_back(kStableSigma);
      std::sort(sigmas.begin(), sigmas.end());
      std::vector<double> precision, recall;
      for (double s : sigmas) {
        std::printf("  sigma = %.4f\n", s);
        const BatchSummary r = s == 0.0 ? klnc : st.run(Algorithm::KlNc, st.images(kFlux, s));
        precision.push_back(r.post.mean_precision);
        recall.push_back(r.post.mean_recall);
      }
      const auto at = [&](double s) {
        return static_cast<std::size_t>(std::find(sigmas.begin(), sigmas.end(), s) - sigmas.begin());
      };
      const std::size_t i0 = at(0.0), i1 = at(kStableSigma);
      bool monotone = true;
      for (std::size_t i = 1; i < precision.size(); ++i) monotone &= precision[i] <= precision[i - 1];
      const bool have_zero = i0 < sigmas.size();
      const double drec = have_zero ? std::abs(recall[i1] - recall[i0]) : NAN;
      const double dprec = have_zero ? precision[i0] - precision[i1] : NAN;
      std::string trend;
      for (std::size_t i = 0; i < sigmas.size(); ++i) trend += fmt(" %.4f", precision[i]);
      report(4, "stability",
             have_zero && drec <= kMaxRecallChange && dprec <= kMaxPrecisionDrop && monotone,
             fmt("at sigma 2pi/40 recall change %.4f (<= 0.03), precision drop %.4f (<= 0.06); ", drec,
                 dprec) +
                 "precision by sigma:" + trend + (monotone ? " (non-increasing)" : " (not monotone)"));
    }

    prox_oracle();
    linear_solve_oracle();
    gradient_check();
    flux_fixed_point(cfg.optics);
    forward_consistency(cfg.optics, dict);
    postproc_properties();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "acceptance run aborted: %s\n", e.what());
    return 2;
  }
  int unexpected = 0;
  std::string list;
  for (int id : failed) {
    list += " " + std::to_string(id);
    if (std::find(expected.begin(), expected.end(), id) == expected.end()) ++unexpected;
  }
  std::printf("failed criteria: %zu%s\n", failed.size(), list.c_str());
  if (!expected.empty()) std::printf("unexpected failures: %d\n", unexpected);
  return unexpected == 0 ? 0 : 1;
}
