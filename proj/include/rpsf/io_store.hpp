#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "rpsf/error.hpp"
#include "rpsf/evaluate.hpp"
#include "rpsf/optics.hpp"
#include "rpsf/postproc.hpp"
#include "rpsf/scene.hpp"
#include "rpsf/solver.hpp"
#include "rpsf/tensor.hpp"

namespace rpsf {

/// N-dimensional row-major float64 array as stored on disk.
///
/// File layout, all little-endian:
///   8 bytes   magic "RPSFTNS1"
///   u32       ndim
///   u64[ndim] dims
///   f64[prod(dims)] payload, innermost axis last
struct Tensor {
  std::vector<std::uint64_t> dims;
  std::vector<double> data;

  std::uint64_t element_count() const;
};

class TensorFileError : public IoError {
 public:
  enum class Kind { Open, BadMagic, DimOverflow, Truncated, TrailingData, Write };

  TensorFileError(Kind kind, const std::string& what) : IoError(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

inline constexpr char kTensorMagic[8] = {'R', 'P', 'S', 'F', 'T', 'N', 'S', '1'};

void save_tensor(const std::filesystem::path& path, const Tensor& tensor);
Tensor load_tensor(const std::filesystem::path& path);

Tensor to_tensor(const Volume& v);
Tensor to_tensor(const Image& img);
Tensor to_tensor(const ObservedImage& g);
/// rows x cols x depth, depth innermost.
Tensor to_tensor(const PsfStack& stack);

Volume volume_from_tensor(const Tensor& t);
Image image_from_tensor(const Tensor& t);
/// Counts must be non-negative integers.
ObservedImage observed_from_tensor(const Tensor& t, std::uint64_t seed = 0);
/// zetas and per-slice energies are recomputed from cfg and the data.
PsfStack psf_stack_from_tensor(const Tensor& t, const OpticsConfig& cfg);

/// Writes to a temporary sibling and renames it into place.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// "# rpsf scene", "background <b>", "seed <s>", then a CSV block with header
/// x,y,zeta,flux and one source per line.
std::string format_scene(const Scene& scene);
Scene parse_scene(const std::string& text);

/// CSV with header x,y,z,flux and, when refined fluxes are given, refined_flux.
std::string format_detections(const std::vector<Detection>& dets,
                              const std::vector<double>& refined = {});
/// Reads the detection CSV; the refined_flux column, if present, replaces flux.
std::vector<Detection> parse_detections(const std::string& text);

/// CSV iteration,gap0,gap1,objective.
std::string format_trace(const SolveTrace& trace);

nlohmann::json to_json(const OpticsConfig& cfg);
OpticsConfig optics_from_json(const nlohmann::json& j, OpticsConfig base = {});
nlohmann::json to_json(const SolverParams& p);
SolverParams solver_params_from_json(const nlohmann::json& j, SolverParams base = {});
nlohmann::json to_json(const MatchReport& r);
nlohmann::json to_json(const Summary& s);

/// 64-bit FNV-1a of a string, as 16 hex digits.
std::string fnv1a_hex(const std::string& text);

}  // namespace rpsf
