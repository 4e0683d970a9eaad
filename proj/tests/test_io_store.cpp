#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <random>
#include <unistd.h>

#include "rpsf/io_store.hpp"

using namespace rpsf;
namespace fs = std::filesystem;

namespace {

class IoStore : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("rpsf_io_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
  }
  void write_bytes(const fs::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    out << s;
  }
  TensorFileError::Kind load_error(const fs::path& p) {
    try {
      load_tensor(p);
    } catch (const TensorFileError& e) {
      return e.kind();
    }
    ADD_FAILURE() << "load succeeded";
    return TensorFileError::Kind::Open;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(IoStore, VolumeRoundTripIsBitExact) {
  Volume v(96, 96, 21);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 1e3);
  for (auto& x : v.values()) x = g(rng);
  v[17] = -0.0;
  v[18] = 5e-324;
  save_tensor(dir_ / "v.rpsf", to_tensor(v));
  EXPECT_EQ(fs::file_size(dir_ / "v.rpsf"), 8u + 4u + 3 * 8u + 96u * 96 * 21 * 8);
  const Volume back = volume_from_tensor(load_tensor(dir_ / "v.rpsf"));
  ASSERT_TRUE(back.same_shape(v));
  EXPECT_EQ(std::memcmp(back.data(), v.data(), v.size() * sizeof(double)), 0);
}

TEST_F(IoStore, FileOrderHasDepthInnermost) {
  Volume v(2, 3, 4);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 4; ++k) v(i, j, k) = 100 * i + 10 * j + k;
  const Tensor t = to_tensor(v);
  ASSERT_EQ(t.dims, (std::vector<std::uint64_t>{2, 3, 4}));
  EXPECT_EQ(t.data[1], 1.0);
  EXPECT_EQ(t.data[4], 10.0);
  EXPECT_EQ(t.data[12], 100.0);
}

TEST_F(IoStore, HeaderLayout) {
  Tensor t;
  t.dims = {2, 1};
  t.data = {1.5, -2.0};
  save_tensor(dir_ / "t.rpsf", t);
  const std::string b = bytes(dir_ / "t.rpsf");
  ASSERT_EQ(b.size(), 8u + 4 + 16 + 16);
  EXPECT_EQ(b.substr(0, 8), "RPSFTNS1");
  EXPECT_EQ(b[8], 2);
  EXPECT_EQ(b[12], 2);
  EXPECT_EQ(b[20], 1);
  double first;
  std::memcpy(&first, b.data() + 28, 8);
  EXPECT_EQ(first, 1.5);
}

TEST_F(IoStore, ZeroDimTensorHoldsOneScalar) {
  Tensor t;
  t.data = {42.0};
  save_tensor(dir_ / "s.rpsf", t);
  EXPECT_EQ(fs::file_size(dir_ / "s.rpsf"), 12u + 8u);
  const Tensor back = load_tensor(dir_ / "s.rpsf");
  EXPECT_TRUE(back.dims.empty());
  ASSERT_EQ(back.data.size(), 1u);
  EXPECT_EQ(back.data[0], 42.0);
}

TEST_F(IoStore, CorruptFilesAreRejected) {
  Tensor t;
  t.dims = {3};
  t.data = {1, 2, 3};
  save_tensor(dir_ / "ok.rpsf", t);
  const std::string good = bytes(dir_ / "ok.rpsf");

  std::string bad = good;
  bad[0] = 'X';
  write_bytes(dir_ / "magic.rpsf", bad);
  EXPECT_EQ(load_error(dir_ / "magic.rpsf"), TensorFileError::Kind::BadMagic);

  write_bytes(dir_ / "short.rpsf", good.substr(0, good.size() - 3));
  EXPECT_EQ(load_error(dir_ / "short.rpsf"), TensorFileError::Kind::Truncated);

  write_bytes(dir_ / "head.rpsf", good.substr(0, 10));
  EXPECT_EQ(load_error(dir_ / "head.rpsf"), TensorFileError::Kind::Truncated);

  write_bytes(dir_ / "long.rpsf", good + "x");
  EXPECT_EQ(load_error(dir_ / "long.rpsf"), TensorFileError::Kind::TrailingData);

  EXPECT_EQ(load_error(dir_ / "missing.rpsf"), TensorFileError::Kind::Open);

  Tensor mismatch;
  mismatch.dims = {4};
  mismatch.data = {1, 2};
  EXPECT_THROW(save_tensor(dir_ / "m.rpsf", mismatch), TensorFileError);
}

TEST_F(IoStore, ImageAndObservedConversions) {
  Image img(3, 4);
  for (std::size_t p = 0; p < img.size(); ++p) img.values()[p] = double(p);
  const Image back = image_from_tensor(to_tensor(img));
  EXPECT_EQ(back(2, 3), 11.0);
  const ObservedImage g = observed_from_tensor(to_tensor(img), 9);
  EXPECT_EQ(g(1, 2), 6);
  EXPECT_EQ(g.seed, 9u);
  img(0, 0) = 0.5;
  EXPECT_THROW(observed_from_tensor(to_tensor(img)), IoError);
  EXPECT_THROW(volume_from_tensor(to_tensor(img)), ShapeError);
}

TEST_F(IoStore, PsfStackRoundTrip) {
  OpticsConfig cfg;
  cfg.rows = cfg.cols = 16;
  cfg.num_slices = 3;
  cfg.zeta_min = -4;
  cfg.zeta_max = 4;
  const PsfStack s = build_dictionary(cfg);
  save_tensor(dir_ / "psf.rpsf", to_tensor(s));
  const PsfStack back = psf_stack_from_tensor(load_tensor(dir_ / "psf.rpsf"), cfg);
  ASSERT_EQ(back.depth(), 3);
  for (int k = 0; k < 3; ++k) {
    EXPECT_EQ(back.zetas[k], s.zetas[k]);
    EXPECT_DOUBLE_EQ(back.per_slice_energy[k], s.per_slice_energy[k]);
    for (std::size_t p = 0; p < s.slices[k].size(); ++p)
      EXPECT_EQ(back.slices[k].values()[p], s.slices[k].values()[p]);
  }
  OpticsConfig other = cfg;
  other.num_slices = 4;
  EXPECT_THROW(psf_stack_from_tensor(to_tensor(s), other), ShapeError);
}

TEST_F(IoStore, SceneRoundTrip) {
  Scene s;
  s.background = 5.0;
  s.seed = 1234567890123ull;
  s.sources = {{1.0 / 3.0, 95.5, -20.999999999, 2001}, {12.25, 0.125, 3.14159, 1e-7}};
  const Scene back = parse_scene(format_scene(s));
  EXPECT_EQ(back.background, 5.0);
  EXPECT_EQ(back.seed, s.seed);
  ASSERT_EQ(back.sources.size(), 2u);
  for (int i = 0; i < 2; ++i) {
    EXPECT_EQ(back.sources[i].x, s.sources[i].x);
    EXPECT_EQ(back.sources[i].y, s.sources[i].y);
    EXPECT_EQ(back.sources[i].zeta, s.sources[i].zeta);
    EXPECT_EQ(back.sources[i].flux, s.sources[i].flux);
  }
  EXPECT_THROW(parse_scene("x,y,zeta,flux\n1,2,3,4\n"), IoError);
  EXPECT_THROW(parse_scene(format_scene(s) + "1,2,3\n"), IoError);
}

TEST_F(IoStore, DetectionsRoundTrip) {
  const std::vector<Detection> d = {{1.5, 2.25, 3.0, 100.0}, {0.1, 0.2, 0.3, 7.0}};
  const auto back = parse_detections(format_detections(d));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].x, 1.5);
  EXPECT_EQ(back[1].z, 0.3);
  EXPECT_EQ(back[1].flux, 7.0);
  const auto refined = parse_detections(format_detections(d, {110.0, 8.0}));
  EXPECT_EQ(refined[0].flux, 110.0);
  EXPECT_EQ(refined[1].flux, 8.0);
  EXPECT_THROW(format_detections(d, {1.0}), ShapeError);
  EXPECT_THROW(parse_detections(""), IoError);
  EXPECT_THROW(parse_detections("a,b\n"), IoError);
  EXPECT_TRUE(parse_detections(format_detections({})).empty());
}

TEST_F(IoStore, TraceCsv) {
  SolveTrace t;
  t.records = {{0, 0, 1.0, 2.0, 3.0}, {0, 1, 0.5, 0.25, 2.5}};
  const std::string csv = format_trace(t);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "iteration,gap0,gap1,objective");
  EXPECT_NE(csv.find("\n1,0.5,0.25,2.5\n"), std::string::npos);
}

TEST_F(IoStore, JsonRoundTrips) {
  OpticsConfig c;
  c.rows = 48;
  c.num_slices = 11;
  c.zeta_min = -10.5;
  const OpticsConfig back = optics_from_json(to_json(c));
  EXPECT_EQ(back.rows, 48);
  EXPECT_EQ(back.num_slices, 11);
  EXPECT_EQ(back.zeta_min, -10.5);
  EXPECT_EQ(back.image_pixel_pitch, c.image_pixel_pitch);

  SolverParams p;
  p.mu = 12.5;
  p.beta0 = 0.003;
  p.datafit = DataFit::LeastSquares;
  p.regularizer = Regularizer::L1;
  const SolverParams q = solver_params_from_json(to_json(p));
  EXPECT_EQ(q.mu, 12.5);
  EXPECT_EQ(q.beta0, 0.003);
  EXPECT_EQ(q.datafit, DataFit::LeastSquares);
  EXPECT_EQ(q.regularizer, Regularizer::L1);
  EXPECT_THROW(solver_params_from_json({{"datafit", "poisson"}}), ConfigError);
  EXPECT_THROW(solver_params_from_json({{"mu", "big"}}), ConfigError);
}

TEST_F(IoStore, AtomicTextWrite) {
  write_text_atomic(dir_ / "a.txt", "first");
  write_text_atomic(dir_ / "a.txt", "second");
  EXPECT_EQ(read_text(dir_ / "a.txt"), "second");
  int files = 0;
  for (const auto& e : fs::directory_iterator(dir_)) files += e.is_regular_file();
  EXPECT_EQ(files, 1);  // no temporary left behind
  EXPECT_THROW(read_text(dir_ / "nope.txt"), IoError);
  write_text_atomic(dir_ / "sub" / "dir" / "b.txt", "nested");
  EXPECT_EQ(read_text(dir_ / "sub" / "dir" / "b.txt"), "nested");
  EXPECT_THROW(write_text_atomic(dir_ / "a.txt" / "c.txt", "x"), IoError);
}

TEST_F(IoStore, Fnv1a) {
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
}
