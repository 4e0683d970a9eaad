// Command-line front end: dictionary build, simulation, solving, tuning,
// experiments and evaluation. Every command writes into a run directory
// together with manifest.json.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rpsf/error.hpp"
#include "rpsf/experiment.hpp"
#include "rpsf/io_store.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rpsf;

namespace {

enum ExitCode { kOk = 0, kOther = 1, kConfig = 2, kDivergence = 3, kIo = 4 };

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> algorithm;
  std::optional<int> density;
  std::optional<std::string> out;
  int threads = 1;
};

ExperimentConfig load_config(const CommonOptions& o) {
  ExperimentConfig cfg = o.config.empty() ? default_experiment_config()
                                          : load_experiment_config(o.config);
  if (o.seed) cfg.simulation.base_seed = *o.seed;
  if (o.density) {
    if (*o.density < 0) throw ConfigError("--density must be >= 0");
    cfg.simulation.densities = {*o.density};
    cfg.studies.study_density = *o.density;
  }
  if (o.algorithm) cfg.studies.algorithms = {parse_algorithm(*o.algorithm)};
  if (o.out) cfg.output_dir = *o.out;
  if (o.threads < 1) throw ConfigError("--threads must be >= 1");
  cfg.validate();
  return cfg;
}

Algorithm chosen_algorithm(const CommonOptions& o) {
  return o.algorithm ? parse_algorithm(*o.algorithm) : Algorithm::KlNc;
}

fs::path run_dir(const ExperimentConfig& cfg) {
  fs::path dir(cfg.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_json(const fs::path& path, const json& j) { write_text_atomic(path, j.dump(2) + "\n"); }

// Everything except "metadata" depends only on the config and inputs.
void write_manifest(const fs::path& dir, const std::string& command, const ExperimentConfig& cfg,
                    const json& seeds, const std::vector<std::string>& outputs,
                    const CommonOptions& o, json extra = json::object()) {
  json m;
  m["command"] = command;
  m["config_hash"] = config_hash(cfg);
  m["config"] = to_json(cfg);
  m["seeds"] = seeds;
  m["outputs"] = outputs;
  for (auto& [k, v] : extra.items()) m[k] = v;
  m["metadata"] = {{"created_at", utc_now()}, {"threads", o.threads}};
  write_json(dir / "manifest.json", m);
}

PsfStack dictionary_for(const ExperimentConfig& cfg, const std::string& psf_path) {
  if (psf_path.empty()) return build_dictionary(cfg.optics);
  return psf_stack_from_tensor(load_tensor(psf_path), cfg.optics);
}

int cmd_build_psf(const CommonOptions& o) {
  const ExperimentConfig cfg = load_config(o);
  const fs::path dir = run_dir(cfg);
  const PsfStack dict = build_dictionary(cfg.optics);
  save_tensor(dir / "psf.rpsf", to_tensor(dict));
  write_json(dir / "psf.json", {{"optics", to_json(cfg.optics)},
                                {"zetas", dict.zetas},
                                {"per_slice_energy", dict.per_slice_energy}});
  write_manifest(dir, "build-psf", cfg, json::array(), {"psf.rpsf", "psf.json"}, o);
  std::cout << "wrote " << (dir / "psf.rpsf").string() << " (" << dict.rows() << "x"
            << dict.cols() << "x" << dict.depth() << ")\n";
  return kOk;
}

int cmd_simulate(const CommonOptions& o, double flux, double sigma) {
  const ExperimentConfig cfg = load_config(o);
  const fs::path dir = run_dir(cfg);
  const int density = cfg.simulation.densities.front();
  const double f = flux > 0.0 ? flux : cfg.simulation.flux_mean;
  const std::uint64_t seed = cfg.simulation.base_seed;
  const SimulatedImage img = simulate(cfg.optics, density, f, cfg.simulation.background, seed,
                                      sigma > 0.0 ? std::optional<double>(sigma) : std::nullopt);
  write_text_atomic(dir / "scene.csv", format_scene(img.scene));
  save_tensor(dir / "image.rpsf", to_tensor(img.observed));
  write_manifest(dir, "simulate", cfg, json::array({seed}), {"scene.csv", "image.rpsf"}, o,
                 {{"density", density}, {"flux_mean", f}, {"mask_sigma", sigma}});
  std::cout << "simulated " << density << " sources, seed " << seed << " -> " << dir.string()
            << "\n";
  return kOk;
}

int cmd_solve(const CommonOptions& o, const std::string& image, const std::string& psf) {
  const ExperimentConfig cfg = load_config(o);
  const fs::path dir = run_dir(cfg);
  const Algorithm alg = chosen_algorithm(o);
  const PsfStack dict = dictionary_for(cfg, psf);
  const ObservedImage g = observed_from_tensor(load_tensor(image));
  const SolverParams params = cfg.params(alg);
  const PipelineResult res = run_pipeline(g, dict, params, cfg.pipeline);

  std::vector<double> refined;
  for (const Detection& d : res.refined) refined.push_back(d.flux);
  save_tensor(dir / "volume.rpsf", to_tensor(res.solve.volume));
  write_text_atomic(dir / "trace.csv", format_trace(res.solve.trace));
  write_text_atomic(dir / "detections.csv", format_detections(res.clustered, refined));
  write_manifest(dir, "solve", cfg, json::array(), {"volume.rpsf", "trace.csv", "detections.csv"},
                 o,
                 {{"algorithm", algorithm_name(alg)},
                  {"solver", to_json(params)},
                  {"image", image},
                  {"num_detections", res.refined.size()},
                  {"num_nonzero_voxels", res.raw.size()},
                  {"flux_iterations", res.flux_iterations},
                  {"flux_note", res.flux_note}});
  std::cout << algorithm_name(alg) << ": " << res.refined.size() << " detections";
  if (!res.flux_note.empty()) std::cout << " (cluster fluxes kept: " << res.flux_note << ")";
  std::cout << "\n";
  return kOk;
}

int cmd_tune(const CommonOptions& o, const std::string& psf) {
  ExperimentConfig cfg = load_config(o);
  const fs::path dir = run_dir(cfg);
  const Algorithm alg = chosen_algorithm(o);
  const PsfStack dict = dictionary_for(cfg, psf);
  const auto& sim = cfg.simulation;
  const int density = o.density ? *o.density : cfg.studies.study_density;

  std::vector<SimulatedImage> train(sim.n_train);
  json seeds = json::array();
  for (int i = 0; i < sim.n_train; ++i) seeds.push_back(sim.train_seed(i));
  parallel_for(sim.n_train, o.threads, [&](int i) {
    train[i] = simulate(cfg.optics, density, sim.flux_mean, sim.background, sim.train_seed(i));
  });
  const TuneResult res =
      tune(train, dict, cfg.params(alg), cfg.tuning.at(alg), cfg.pipeline, cfg.match, o.threads,
           [](const TuneEntry& e) {
             std::cout << "mu=" << e.params.mu << " a=" << e.params.a
                       << " beta=" << e.params.beta0 << "  recall=" << e.post.mean_recall
                       << " precision=" << e.post.mean_precision << " f1=" << e.post.mean_f1
                       << std::endl;
           });

  ExperimentConfig tuned = o.config.empty() ? default_experiment_config()
                                             : load_experiment_config(o.config);
  tuned.output_dir = cfg.output_dir;
  tuned.solver[alg] = res.best;
  write_text_atomic(dir / "scoreboard.csv", format_scoreboard(res));
  write_json(dir / "best_params.json", {{algorithm_name(alg), to_json(res.best)}});
  write_json(dir / "tuned_config.json", to_json(tuned));
  write_manifest(dir, "tune", cfg, seeds, {"scoreboard.csv", "best_params.json", "tuned_config.json"},
                 o, {{"algorithm", algorithm_name(alg)}, {"density", density},
                     {"best", to_json(res.best)}});
  std::cout << "best " << algorithm_name(alg) << ": mu=" << res.best.mu << " a=" << res.best.a
            << " beta=" << res.best.beta0 << "\n";
  return kOk;
}

int cmd_experiment(const CommonOptions& o, const std::string& psf) {
  const ExperimentConfig cfg = load_config(o);
  const fs::path dir = run_dir(cfg);
  const PsfStack dict = dictionary_for(cfg, psf);
  const ExperimentResults res = run_experiment(cfg, dict, o.threads, [](const StudyRow& r) {
    std::cout << r.study << " " << algorithm_name(r.algorithm) << " M=" << r.density
              << " flux=" << r.flux_mean << " sigma=" << r.mask_sigma
              << "  recall=" << r.summary.post.mean_recall
              << " precision=" << r.summary.post.mean_precision
              << " (pre " << r.summary.pre.mean_recall << "/" << r.summary.pre.mean_precision
              << ", failures " << r.summary.failures << ")" << std::endl;
  });

  json summary = json::array();
  for (const StudyRow& r : res.rows)
    summary.push_back({{"study", r.study},
                       {"algorithm", algorithm_name(r.algorithm)},
                       {"density", r.density},
                       {"flux_mean", r.flux_mean},
                       {"mask_sigma", r.mask_sigma},
                       {"post", to_json(r.summary.post)},
                       {"pre", to_json(r.summary.pre)},
                       {"failures", r.summary.failures}});
  write_text_atomic(dir / "table.csv", format_table(res, "table"));
  write_text_atomic(dir / "low_photon.csv", format_table(res, "low_photon"));
  write_text_atomic(dir / "stability.csv", format_table(res, "stability"));
  write_text_atomic(dir / "histograms.csv", format_histograms(res));
  write_text_atomic(dir / "failures.csv", format_failures(res));
  write_json(dir / "summary.json", summary);
  json seeds = json::array();
  for (int i = 0; i < cfg.simulation.n_test; ++i) seeds.push_back(cfg.simulation.test_seed(i));
  write_manifest(dir, "experiment", cfg, seeds,
                 {"table.csv", "low_photon.csv", "stability.csv", "histograms.csv",
                  "failures.csv", "summary.json"},
                 o);
  return kOk;
}

int cmd_evaluate(const CommonOptions& o, const std::string& scene_path,
                 const std::string& det_path) {
  const ExperimentConfig cfg = load_config(o);
  const fs::path dir = run_dir(cfg);
  const Scene scene = parse_scene(read_text(scene_path));
  const auto dets = parse_detections(read_text(det_path));
  const MatchReport rep = match(scene, dets, cfg.match, cfg.optics);
  const Summary s = aggregate({rep});
  write_json(dir / "report.json", {{"match", to_json(rep)}, {"summary", to_json(s)}});
  write_manifest(dir, "evaluate", cfg, json::array({scene.seed}), {"report.json"}, o,
                 {{"scene", scene_path}, {"detections", det_path}});
  std::cout << "recall " << rep.recall << " precision " << rep.precision << " f1 "
            << f1_score(rep.recall, rep.precision) << "\n";
  return kOk;
}

void add_common(CLI::App* sub, CommonOptions& o, bool algorithm, bool density) {
  sub->add_option("--config", o.config, "JSON config file")->check(CLI::ExistingFile);
  sub->add_option("--seed", o.seed, "Base seed");
  sub->add_option("--out", o.out, "Run directory");
  sub->add_option("--threads", o.threads, "Worker threads");
  if (algorithm) sub->add_option("--algorithm", o.algorithm, "kl-nc, kl-l1, l2-l1 or l2-nc");
  if (density) sub->add_option("--density", o.density, "Number of sources");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rotating-PSF 3D point source localization"};
  app.require_subcommand(1);
  CommonOptions o;
  std::string image, psf, scene, detections;
  double flux = 0.0, sigma = 0.0;

  auto* build = app.add_subcommand("build-psf", "Build the PSF dictionary");
  add_common(build, o, false, false);
  auto* sim = app.add_subcommand("simulate", "Simulate a scene and a Poisson image");
  add_common(sim, o, false, true);
  sim->add_option("--flux", flux, "Mean source flux (default from config)");
  sim->add_option("--mask-sigma", sigma, "Pupil phase noise of the imaging mask, radians");
  auto* solve = app.add_subcommand("solve", "Localize sources in an observed image");
  add_common(solve, o, true, false);
  solve->add_option("--image", image, "Observed image tensor")->required()->check(CLI::ExistingFile);
  solve->add_option("--psf", psf, "Dictionary tensor (built from the config if omitted)");
  auto* tune_cmd = app.add_subcommand("tune", "Grid-search solver parameters on training images");
  add_common(tune_cmd, o, true, true);
  tune_cmd->add_option("--psf", psf, "Dictionary tensor");
  auto* exp = app.add_subcommand("experiment", "Run the full comparison on test images");
  add_common(exp, o, true, true);
  exp->add_option("--psf", psf, "Dictionary tensor");
  auto* eval = app.add_subcommand("evaluate", "Score detections against a scene");
  add_common(eval, o, false, false);
  eval->add_option("--scene", scene, "Scene CSV")->required()->check(CLI::ExistingFile);
  eval->add_option("--detections", detections, "Detection CSV")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*build) return cmd_build_psf(o);
    if (*sim) return cmd_simulate(o, flux, sigma);
    if (*solve) return cmd_solve(o, image, psf);
    if (*tune_cmd) return cmd_tune(o, psf);
    if (*exp) return cmd_experiment(o, psf);
    if (*eval) return cmd_evaluate(o, scene, detections);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const DivergenceError& e) {
    std::cerr << "numerical divergence: " << e.what() << "\n";
    return kDivergence;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kOther;
  }
  return kOther;
}
