#include "rpsf/experiment.hpp"

#include <cmath>
#include <iomanip>
#include <numbers>
#include <set>
#include <sstream>

#include "rpsf/error.hpp"
#include "rpsf/io_store.hpp"

namespace rpsf {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

TuningGrid grid_from_json(const json& j, TuningGrid g) {
  check_keys(j, {"mu", "a", "beta"}, "tuning grid");
  if (j.contains("mu")) g.mu = j.at("mu").get<std::vector<double>>();
  if (j.contains("a")) g.a = j.at("a").get<std::vector<double>>();
  if (j.contains("beta")) g.beta = j.at("beta").get<std::vector<double>>();
  return g;
}

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace

SolverParams ExperimentConfig::params(Algorithm a) const {
  auto it = solver.find(a);
  SolverParams p = it == solver.end() ? SolverParams{} : it->second;
  p = params_for(a, p);
  p.background = simulation.background;
  return p;
}

void ExperimentConfig::validate() const {
  optics.validate();
  if (simulation.densities.empty()) throw ConfigError("simulation.densities must be non-empty");
  for (int m : simulation.densities)
    if (m < 0) throw ConfigError("densities must be >= 0");
  if (simulation.n_train < 1 || simulation.n_test < 1)
    throw ConfigError("n_train and n_test must be >= 1");
  if (!(simulation.flux_mean > 0.0)) throw ConfigError("flux_mean must be > 0");
  if (!(simulation.background >= 0.0)) throw ConfigError("background must be >= 0");
  for (Algorithm a : all_algorithms()) params(a).validate();
  for (const auto& [a, g] : tuning)
    if (g.mu.empty() || g.a.empty() || g.beta.empty())
      throw ConfigError("tuning grid for " + algorithm_name(a) + " must be non-empty");
  pipeline.cluster.validate();
  if (!(pipeline.threshold_fraction >= 0.0 && pipeline.threshold_fraction < 1.0))
    throw ConfigError("threshold must be in [0, 1)");
  if (pipeline.flux_max_iter < 1) throw ConfigError("flux max_iter must be >= 1");
  match.validate();
  if (studies.algorithms.empty()) throw ConfigError("studies.algorithms must be non-empty");
  if (!(studies.low_photon_flux > 0.0)) throw ConfigError("low_photon_flux must be > 0");
  if (studies.study_density < 0) throw ConfigError("study density must be >= 0");
  for (double s : studies.mask_sigmas)
    if (!(s >= 0.0)) throw ConfigError("mask sigmas must be >= 0");
}

ExperimentConfig default_experiment_config() {
  ExperimentConfig cfg;
  for (Algorithm a : all_algorithms()) {
    cfg.solver[a] = params_for(a, SolverParams{});
    cfg.tuning[a] = default_tuning_grid();
  }
  const double two_pi = 2.0 * std::numbers::pi;
  cfg.studies.mask_sigmas = {0.0, two_pi / 40.0, two_pi / 20.0, two_pi / 10.0};
  return cfg;
}

ExperimentConfig experiment_config_from_json(const json& j) {
  ExperimentConfig cfg = default_experiment_config();
  check_keys(j, {"optics", "simulation", "solver", "tuning", "postproc", "flux", "evaluate",
                 "studies", "output_dir"},
             "config");
  try {
    if (j.contains("optics")) cfg.optics = optics_from_json(j.at("optics"), cfg.optics);
    if (j.contains("simulation")) {
      const json& s = j.at("simulation");
      check_keys(s, {"densities", "flux_mean", "background", "n_train", "n_test", "base_seed"},
                 "simulation");
      auto& sim = cfg.simulation;
      if (s.contains("densities")) sim.densities = s.at("densities").get<std::vector<int>>();
      sim.flux_mean = s.value("flux_mean", sim.flux_mean);
      sim.background = s.value("background", sim.background);
      sim.n_train = s.value("n_train", sim.n_train);
      sim.n_test = s.value("n_test", sim.n_test);
      sim.base_seed = s.value("base_seed", sim.base_seed);
    }
    if (j.contains("solver")) {
      const json& s = j.at("solver");
      if (!s.is_object()) throw ConfigError("solver must be an object keyed by algorithm");
      for (const auto& [name, body] : s.items()) {
        const Algorithm a = parse_algorithm(name);
        cfg.solver[a] = solver_params_from_json(body, cfg.solver[a]);
      }
    }
    if (j.contains("tuning")) {
      const json& t = j.at("tuning");
      if (!t.is_object()) throw ConfigError("tuning must be an object keyed by algorithm");
      for (const auto& [name, body] : t.items()) {
        const Algorithm a = parse_algorithm(name);
        cfg.tuning[a] = grid_from_json(body, cfg.tuning[a]);
      }
    }
    if (j.contains("postproc")) {
      const json& p = j.at("postproc");
      check_keys(p, {"lateral", "axial", "threshold"}, "postproc");
      cfg.pipeline.cluster.lateral = p.value("lateral", cfg.pipeline.cluster.lateral);
      cfg.pipeline.cluster.axial = p.value("axial", cfg.pipeline.cluster.axial);
      cfg.pipeline.threshold_fraction = p.value("threshold", cfg.pipeline.threshold_fraction);
    }
    if (j.contains("flux")) {
      const json& f = j.at("flux");
      check_keys(f, {"refine", "max_iter", "tol"}, "flux");
      cfg.pipeline.refine_flux = f.value("refine", cfg.pipeline.refine_flux);
      cfg.pipeline.flux_max_iter = f.value("max_iter", cfg.pipeline.flux_max_iter);
      cfg.pipeline.flux_tol = f.value("tol", cfg.pipeline.flux_tol);
    }
    if (j.contains("evaluate")) {
      const json& e = j.at("evaluate");
      check_keys(e, {"lateral", "axial"}, "evaluate");
      cfg.match.lateral_tol = e.value("lateral", cfg.match.lateral_tol);
      cfg.match.axial_tol = e.value("axial", cfg.match.axial_tol);
    }
    if (j.contains("studies")) {
      const json& s = j.at("studies");
      check_keys(s, {"algorithms", "mask_sigmas", "low_photon_flux", "density", "stability",
                     "low_photon"},
                 "studies");
      auto& st = cfg.studies;
      if (s.contains("algorithms")) {
        st.algorithms.clear();
        for (const auto& name : s.at("algorithms")) st.algorithms.push_back(parse_algorithm(name));
      }
      if (s.contains("mask_sigmas")) st.mask_sigmas = s.at("mask_sigmas").get<std::vector<double>>();
      st.low_photon_flux = s.value("low_photon_flux", st.low_photon_flux);
      st.study_density = s.value("density", st.study_density);
      st.stability = s.value("stability", st.stability);
      st.low_photon = s.value("low_photon", st.low_photon);
    }
    cfg.output_dir = j.value("output_dir", cfg.output_dir);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

json to_json(const ExperimentConfig& cfg) {
  json j;
  j["optics"] = to_json(cfg.optics);
  const auto& sim = cfg.simulation;
  j["simulation"] = {{"densities", sim.densities}, {"flux_mean", sim.flux_mean},
                     {"background", sim.background}, {"n_train", sim.n_train},
                     {"n_test", sim.n_test}, {"base_seed", sim.base_seed}};
  for (const auto& [a, p] : cfg.solver) j["solver"][algorithm_name(a)] = to_json(p);
  for (const auto& [a, g] : cfg.tuning)
    j["tuning"][algorithm_name(a)] = {{"mu", g.mu}, {"a", g.a}, {"beta", g.beta}};
  j["postproc"] = {{"lateral", cfg.pipeline.cluster.lateral},
                   {"axial", cfg.pipeline.cluster.axial},
                   {"threshold", cfg.pipeline.threshold_fraction}};
  j["flux"] = {{"refine", cfg.pipeline.refine_flux},
               {"max_iter", cfg.pipeline.flux_max_iter},
               {"tol", cfg.pipeline.flux_tol}};
  j["evaluate"] = {{"lateral", cfg.match.lateral_tol}, {"axial", cfg.match.axial_tol}};
  json algs = json::array();
  for (Algorithm a : cfg.studies.algorithms) algs.push_back(algorithm_name(a));
  j["studies"] = {{"algorithms", algs},
                  {"mask_sigmas", cfg.studies.mask_sigmas},
                  {"low_photon_flux", cfg.studies.low_photon_flux},
                  {"density", cfg.studies.study_density},
                  {"stability", cfg.studies.stability},
                  {"low_photon", cfg.studies.low_photon}};
  j["output_dir"] = cfg.output_dir;
  return j;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return experiment_config_from_json(j);
}

std::string config_hash(const ExperimentConfig& cfg) {
  json j = to_json(cfg);
  j.erase("output_dir");
  return fnv1a_hex(j.dump());
}

ExperimentResults run_experiment(const ExperimentConfig& cfg, const PsfStack& dict, int threads,
                                 const std::function<void(const StudyRow&)>& progress) {
  cfg.validate();
  ExperimentResults res;
  const auto& sim = cfg.simulation;

  auto images_for = [&](int density, double flux, double sigma, std::vector<std::uint64_t>& seeds) {
    std::vector<SimulatedImage> imgs(sim.n_test);
    seeds.resize(sim.n_test);
    for (int i = 0; i < sim.n_test; ++i) seeds[i] = sim.test_seed(i);
    parallel_for(sim.n_test, threads, [&](int i) {
      imgs[i] = simulate(cfg.optics, density, flux, sim.background, seeds[i],
                         sigma > 0.0 ? std::optional<double>(sigma) : std::nullopt);
    });
    return imgs;
  };

  auto run_row = [&](StudyRow row, const std::vector<SimulatedImage>& imgs) {
    row.cells = run_batch(imgs, dict, cfg.params(row.algorithm), cfg.pipeline, cfg.match, threads);
    row.summary = summarize(row.cells);
    if (progress) progress(row);
    res.rows.push_back(std::move(row));
  };

  for (int density : sim.densities) {
    std::vector<std::uint64_t> seeds;
    const auto imgs = images_for(density, sim.flux_mean, 0.0, seeds);
    for (Algorithm a : cfg.studies.algorithms)
      run_row({"table", a, density, sim.flux_mean, 0.0, {}, {}, seeds}, imgs);
  }
  const int study_m = cfg.studies.study_density;
  if (cfg.studies.low_photon) {
    std::vector<std::uint64_t> seeds;
    const auto imgs = images_for(study_m, cfg.studies.low_photon_flux, 0.0, seeds);
    for (Algorithm a : {Algorithm::KlNc, Algorithm::L2Nc})
      run_row({"low_photon", a, study_m, cfg.studies.low_photon_flux, 0.0, {}, {}, seeds}, imgs);
  }
  if (cfg.studies.stability) {
    for (double sigma : cfg.studies.mask_sigmas) {
      std::vector<std::uint64_t> seeds;
      const auto imgs = images_for(study_m, sim.flux_mean, sigma, seeds);
      run_row({"stability", Algorithm::KlNc, study_m, sim.flux_mean, sigma, {}, {}, seeds}, imgs);
    }
  }
  return res;
}

std::string format_table(const ExperimentResults& res, const std::string& study) {
  std::ostringstream os;
  os << "study,algorithm,density,flux_mean,mask_sigma,post_recall,post_precision,post_f1,"
        "pre_recall,pre_precision,failures\n";
  for (const StudyRow& r : res.rows) {
    if (r.study != study) continue;
    const auto& s = r.summary;
    os << r.study << ',' << algorithm_name(r.algorithm) << ',' << r.density << ','
       << num(r.flux_mean) << ',' << num(r.mask_sigma) << ',' << num(s.post.mean_recall) << ','
       << num(s.post.mean_precision) << ',' << num(s.post.mean_f1) << ','
       << num(s.pre.mean_recall) << ',' << num(s.pre.mean_precision) << ',' << s.failures << '\n';
  }
  return os.str();
}

std::string format_histograms(const ExperimentResults& res) {
  std::ostringstream os;
  os << "algorithm,density,bin_lo,bin_hi,count\n";
  for (const StudyRow& r : res.rows) {
    if (r.study != "table") continue;
    const Summary& s = r.summary.post;
    for (std::size_t b = 0; b < s.histogram.size(); ++b)
      os << algorithm_name(r.algorithm) << ',' << r.density << ','
         << num(s.bin_lo + b * s.bin_width) << ',' << num(s.bin_lo + (b + 1) * s.bin_width) << ','
         << s.histogram[b] << '\n';
  }
  return os.str();
}

std::string format_failures(const ExperimentResults& res) {
  std::ostringstream os;
  os << "study,algorithm,density,mask_sigma,seed,error\n";
  for (const StudyRow& r : res.rows)
    for (std::size_t i = 0; i < r.cells.size(); ++i)
      if (!r.cells[i].error.empty()) {
        std::string msg = r.cells[i].error;
        for (char& c : msg)
          if (c == ',' || c == '\n') c = ';';
        os << r.study << ',' << algorithm_name(r.algorithm) << ',' << r.density << ','
           << num(r.mask_sigma) << ',' << r.seeds[i] << ',' << msg << '\n';
      }
  return os.str();
}

std::string format_scoreboard(const TuneResult& res) {
  std::ostringstream os;
  os << "mu,a,beta0,beta1,mean_recall,mean_precision,mean_f1\n";
  for (const TuneEntry& e : res.entries)
    os << num(e.params.mu) << ',' << num(e.params.a) << ',' << num(e.params.beta0) << ','
       << num(e.params.beta1) << ',' << num(e.post.mean_recall) << ','
       << num(e.post.mean_precision) << ',' << num(e.post.mean_f1) << '\n';
  return os.str();
}

}  // namespace rpsf
