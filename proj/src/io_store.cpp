#include "rpsf/io_store.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace rpsf {

namespace fs = std::filesystem;

std::uint64_t Tensor::element_count() const {
  std::uint64_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

namespace {

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian platforms are not supported");

template <typename T>
void put_le(std::string& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(const char* p) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

std::string trim(std::string s) {
  const auto ws = " \t\r\n";
  s.erase(0, s.find_first_not_of(ws));
  const auto end = s.find_last_not_of(ws);
  s.erase(end == std::string::npos ? 0 : end + 1);
  return s;
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (trim(s.substr(used)).empty()) return v;
  } catch (const std::exception&) {
  }
  throw IoError("cannot parse " + what + " from '" + s + "'");
}

}  // namespace

void save_tensor(const fs::path& path, const Tensor& tensor) {
  if (tensor.data.size() != tensor.element_count())
    throw TensorFileError(TensorFileError::Kind::Write, "tensor payload does not match its dims");
  std::string bytes(kTensorMagic, sizeof(kTensorMagic));
  put_le<std::uint32_t>(bytes, static_cast<std::uint32_t>(tensor.dims.size()));
  for (auto d : tensor.dims) put_le<std::uint64_t>(bytes, d);
  bytes.reserve(bytes.size() + 8 * tensor.data.size());
  for (double v : tensor.data) put_le<double>(bytes, v);
  try {
    write_text_atomic(path, bytes);
  } catch (const IoError& e) {
    throw TensorFileError(TensorFileError::Kind::Write, e.what());
  }
}

Tensor load_tensor(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TensorFileError(TensorFileError::Kind::Open, "cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < 8 || std::memcmp(bytes.data(), kTensorMagic, 8) != 0)
    throw TensorFileError(TensorFileError::Kind::BadMagic, "bad magic in " + path.string());
  if (bytes.size() < 12)
    throw TensorFileError(TensorFileError::Kind::Truncated, "truncated header in " + path.string());
  const auto ndim = get_le<std::uint32_t>(bytes.data() + 8);
  const std::uint64_t header = 12 + 8ull * ndim;
  if (ndim > 64)
    throw TensorFileError(TensorFileError::Kind::DimOverflow, "implausible ndim in " + path.string());
  if (bytes.size() < header)
    throw TensorFileError(TensorFileError::Kind::Truncated, "truncated dims in " + path.string());

  Tensor t;
  std::uint64_t count = 1;
  for (std::uint32_t i = 0; i < ndim; ++i) {
    const auto d = get_le<std::uint64_t>(bytes.data() + 12 + 8 * i);
    if (d != 0 && count > std::numeric_limits<std::uint64_t>::max() / 8 / d)
      throw TensorFileError(TensorFileError::Kind::DimOverflow,
                            "element count overflows in " + path.string());
    count *= d;
    t.dims.push_back(d);
  }
  const std::uint64_t payload = bytes.size() - header;
  if (payload < 8 * count)
    throw TensorFileError(TensorFileError::Kind::Truncated, "truncated payload in " + path.string());
  if (payload > 8 * count)
    throw TensorFileError(TensorFileError::Kind::TrailingData,
                          "unexpected trailing bytes in " + path.string());
  t.data.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) t.data[i] = get_le<double>(bytes.data() + header + 8 * i);
  return t;
}

Tensor to_tensor(const Volume& v) {
  Tensor t{{std::uint64_t(v.rows()), std::uint64_t(v.cols()), std::uint64_t(v.depth())}, {}};
  t.data.reserve(v.size());
  for (int i = 0; i < v.rows(); ++i)
    for (int j = 0; j < v.cols(); ++j)
      for (int k = 0; k < v.depth(); ++k) t.data.push_back(v(i, j, k));
  return t;
}

Tensor to_tensor(const Image& img) {
  return {{std::uint64_t(img.rows()), std::uint64_t(img.cols())},
          {img.values().begin(), img.values().end()}};
}

Tensor to_tensor(const ObservedImage& g) {
  Tensor t{{std::uint64_t(g.rows), std::uint64_t(g.cols)}, {}};
  t.data.reserve(g.counts.size());
  for (auto c : g.counts) t.data.push_back(static_cast<double>(c));
  return t;
}

Tensor to_tensor(const PsfStack& stack) {
  const int m = stack.rows(), n = stack.cols(), d = stack.depth();
  Tensor t{{std::uint64_t(m), std::uint64_t(n), std::uint64_t(d)}, {}};
  t.data.resize(static_cast<std::size_t>(m) * n * d);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < d; ++k)
        t.data[(static_cast<std::size_t>(i) * n + j) * d + k] = stack.slices[k](i, j);
  return t;
}

Volume volume_from_tensor(const Tensor& t) {
  if (t.dims.size() != 3) throw ShapeError("expected a 3-D tensor");
  Volume v(int(t.dims[0]), int(t.dims[1]), int(t.dims[2]));
  std::size_t at = 0;
  for (int i = 0; i < v.rows(); ++i)
    for (int j = 0; j < v.cols(); ++j)
      for (int k = 0; k < v.depth(); ++k) v(i, j, k) = t.data[at++];
  return v;
}

Image image_from_tensor(const Tensor& t) {
  if (t.dims.size() != 2) throw ShapeError("expected a 2-D tensor");
  Image img(int(t.dims[0]), int(t.dims[1]));
  std::copy(t.data.begin(), t.data.end(), img.values().begin());
  return img;
}

ObservedImage observed_from_tensor(const Tensor& t, std::uint64_t seed) {
  if (t.dims.size() != 2) throw ShapeError("expected a 2-D tensor");
  ObservedImage g;
  g.rows = int(t.dims[0]);
  g.cols = int(t.dims[1]);
  g.seed = seed;
  g.counts.reserve(t.data.size());
  for (double v : t.data) {
    if (!(v >= 0.0) || v != std::floor(v)) throw IoError("observed image must hold non-negative integers");
    g.counts.push_back(static_cast<std::int64_t>(v));
  }
  return g;
}

PsfStack psf_stack_from_tensor(const Tensor& t, const OpticsConfig& cfg) {
  if (t.dims.size() != 3) throw ShapeError("expected a 3-D tensor");
  if (t.dims[0] != std::uint64_t(cfg.rows) || t.dims[1] != std::uint64_t(cfg.cols) ||
      t.dims[2] != std::uint64_t(cfg.num_slices))
    throw ShapeError("PSF tensor does not match the optics configuration");
  const int m = cfg.rows, n = cfg.cols, d = cfg.num_slices;
  PsfStack stack;
  stack.config = cfg;
  for (int k = 0; k < d; ++k) {
    Image s(m, n);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) s(i, j) = t.data[(static_cast<std::size_t>(i) * n + j) * d + k];
    stack.zetas.push_back(cfg.zeta_at(k));
    stack.per_slice_energy.push_back(s.sum());
    stack.slices.push_back(std::move(s));
  }
  return stack;
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {(std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>()};
}

std::string format_scene(const Scene& scene) {
  std::ostringstream os;
  os << "# rpsf scene\n";
  os << "background " << fmt(scene.background) << "\n";
  os << "seed " << scene.seed << "\n";
  os << "x,y,zeta,flux\n";
  for (const PointSource& s : scene.sources)
    os << fmt(s.x) << ',' << fmt(s.y) << ',' << fmt(s.zeta) << ',' << fmt(s.flux) << '\n';
  return os.str();
}

Scene parse_scene(const std::string& text) {
  Scene scene;
  std::istringstream in(text);
  std::string line;
  bool in_table = false;
  bool have_background = false;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (!in_table) {
      if (line == "x,y,zeta,flux") {
        in_table = true;
        continue;
      }
      std::istringstream kv(line);
      std::string key, value;
      kv >> key >> value;
      if (key == "background") {
        scene.background = parse_double(value, "background");
        have_background = true;
      } else if (key == "seed") {
        scene.seed = std::stoull(value);
      } else {
        throw IoError("unknown scene header line '" + line + "'");
      }
      continue;
    }
    const auto cells = split_csv(line);
    if (cells.size() != 4) throw IoError("scene record needs 4 fields: '" + line + "'");
    scene.sources.push_back({parse_double(cells[0], "x"), parse_double(cells[1], "y"),
                             parse_double(cells[2], "zeta"), parse_double(cells[3], "flux")});
  }
  if (!in_table || !have_background) throw IoError("scene file is missing its header");
  return scene;
}

std::string format_detections(const std::vector<Detection>& dets, const std::vector<double>& refined) {
  const bool with_refined = !refined.empty();
  if (with_refined && refined.size() != dets.size())
    throw ShapeError("refined flux count does not match detections");
  std::ostringstream os;
  os << "x,y,z,flux" << (with_refined ? ",refined_flux" : "") << '\n';
  for (std::size_t i = 0; i < dets.size(); ++i) {
    const Detection& d = dets[i];
    os << fmt(d.x) << ',' << fmt(d.y) << ',' << fmt(d.z) << ',' << fmt(d.flux);
    if (with_refined) os << ',' << fmt(refined[i]);
    os << '\n';
  }
  return os.str();
}

std::vector<Detection> parse_detections(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty detection file");
  const auto header = split_csv(trim(line));
  if (header.size() < 4 || header[0] != "x" || header[1] != "y" || header[2] != "z" ||
      header[3] != "flux")
    throw IoError("detection file header must start with x,y,z,flux");
  const bool refined = header.size() >= 5 && header[4] == "refined_flux";
  std::vector<Detection> out;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() != header.size()) throw IoError("bad detection record '" + line + "'");
    Detection d{parse_double(c[0], "x"), parse_double(c[1], "y"), parse_double(c[2], "z"),
                parse_double(c[refined ? 4 : 3], "flux")};
    out.push_back(d);
  }
  return out;
}

std::string format_trace(const SolveTrace& trace) {
  std::ostringstream os;
  os << "iteration,gap0,gap1,objective\n";
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    const TraceRecord& r = trace.records[i];
    os << i << ',' << fmt(r.gap0) << ',' << fmt(r.gap1) << ',' << fmt(r.objective) << '\n';
  }
  return os.str();
}

nlohmann::json to_json(const OpticsConfig& c) {
  return {{"num_zones", c.num_zones},         {"rows", c.rows},
          {"cols", c.cols},                   {"pupil_grid", c.pupil_grid},
          {"aperture_side", c.aperture_side}, {"image_pixel_pitch", c.image_pixel_pitch},
          {"num_slices", c.num_slices},       {"zeta_min", c.zeta_min},
          {"zeta_max", c.zeta_max}};
}

OpticsConfig optics_from_json(const nlohmann::json& j, OpticsConfig c) {
  try {
    c.num_zones = j.value("num_zones", c.num_zones);
    c.rows = j.value("rows", c.rows);
    c.cols = j.value("cols", c.cols);
    c.pupil_grid = j.value("pupil_grid", c.pupil_grid);
    c.aperture_side = j.value("aperture_side", c.aperture_side);
    c.image_pixel_pitch = j.value("image_pixel_pitch", 1.0 / c.aperture_side);
    c.num_slices = j.value("num_slices", c.num_slices);
    c.zeta_min = j.value("zeta_min", c.zeta_min);
    c.zeta_max = j.value("zeta_max", c.zeta_max);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad optics section: ") + e.what());
  }
  return c;
}

nlohmann::json to_json(const SolverParams& p) {
  return {{"a", p.a},
          {"mu", p.mu},
          {"beta0", p.beta0},
          {"beta1", p.beta1},
          {"rho", p.rho},
          {"max_outer", p.max_outer},
          {"max_inner", p.max_inner},
          {"inner_tol", p.inner_tol},
          {"datafit", to_string(p.datafit)},
          {"regularizer", to_string(p.regularizer)},
          {"background", p.background}};
}

SolverParams solver_params_from_json(const nlohmann::json& j, SolverParams p) {
  try {
    p.a = j.value("a", p.a);
    p.mu = j.value("mu", p.mu);
    p.beta0 = j.value("beta0", p.beta0);
    p.beta1 = j.value("beta1", p.beta1);
    p.rho = j.value("rho", p.rho);
    p.max_outer = j.value("max_outer", p.max_outer);
    p.max_inner = j.value("max_inner", p.max_inner);
    p.inner_tol = j.value("inner_tol", p.inner_tol);
    p.background = j.value("background", p.background);
    if (j.contains("datafit")) {
      const std::string f = j.at("datafit");
      if (f == "kl") p.datafit = DataFit::KL;
      else if (f == "l2") p.datafit = DataFit::LeastSquares;
      else throw ConfigError("datafit must be 'kl' or 'l2'");
    }
    if (j.contains("regularizer")) {
      const std::string r = j.at("regularizer");
      if (r == "nc") p.regularizer = Regularizer::NonConvex;
      else if (r == "l1") p.regularizer = Regularizer::L1;
      else throw ConfigError("regularizer must be 'nc' or 'l1'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad solver section: ") + e.what());
  }
  return p;
}

nlohmann::json to_json(const MatchReport& r) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const MatchPair& p : r.true_positives)
    pairs.push_back({{"truth", p.truth}, {"detection", p.detection}, {"distance", p.distance}});
  return {{"num_truth", r.num_truth},
          {"num_detections", r.num_detections},
          {"recall", r.recall},
          {"precision", r.precision},
          {"true_positives", pairs},
          {"false_positives", r.false_positives},
          {"false_negatives", r.false_negatives},
          {"flux_rel_errors", r.flux_rel_errors}};
}

nlohmann::json to_json(const Summary& s) {
  return {{"num_reports", s.num_reports},   {"mean_recall", s.mean_recall},
          {"mean_precision", s.mean_precision}, {"mean_f1", s.mean_f1},
          {"true_positives", s.true_positives}, {"bin_lo", s.bin_lo},
          {"bin_width", s.bin_width},           {"histogram", s.histogram}};
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace rpsf
