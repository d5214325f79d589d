// Copyright 2026 The NAKUL Authors. Apache 2.0 License.

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nakul/checkpoint.hpp"
#include "nakul/errors.hpp"
#include "oracles.hpp"

using namespace nakul;

namespace {

ModelConfig tiny() {
  ModelConfig c;
  c.channels = 3;
  c.length = 100;
  c.patch = 10;
  c.dim = 4;
  c.blocks = 1;
  c.heads = 2;
  c.ffn_hidden = 8;
  c.head_hidden = 4;
  return c;
}

std::string bytes_of(const NamedTensors& t) {
  std::ostringstream os(std::ios::binary);
  write_tensors(os, t);
  return os.str();
}

}  // namespace

TEST(Checkpoint, ExactByteLayout) {
  const NamedTensors t{{"ab", Tensor({2}, {1.0, -2.5})}};
  const std::string b = bytes_of(t);
  const unsigned char expected[] = {'N', 'A', 'K', 'L', 1, 0, 0, 0, 1, 0, 0, 0,  // magic, version, count
                                    2, 0, 'a', 'b',                               // name
                                    1, 2, 0, 0, 0,                                // rank, dims
                                    0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x20, 0xc0};
  ASSERT_EQ(b.size(), sizeof(expected));
  EXPECT_EQ(std::memcmp(b.data(), expected, sizeof(expected)), 0);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  Rng rng(1);
  NamedTensors t{{"x", test::random_tensor({3, 4}, rng)}, {"y.z", test::random_tensor({1}, rng)}};
  for (auto& [n, v] : t)
    for (auto& e : v.data()) e = double(float(e));  // representable in the file
  const std::string b = bytes_of(t);
  std::istringstream in(b, std::ios::binary);
  const NamedTensors back = read_tensors(in);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].first, t[i].first);
    EXPECT_EQ(back[i].second, t[i].second);
  }
  EXPECT_EQ(bytes_of(back), b);
}

TEST(Checkpoint, RejectsCorruptFiles) {
  std::string b = bytes_of({{"a", Tensor({1}, {1.0})}});
  std::string bad_magic = b;
  bad_magic[0] = 'X';
  std::istringstream in1(bad_magic);
  EXPECT_THROW(read_tensors(in1), LoadError);
  std::istringstream in2(b.substr(0, b.size() - 2));
  EXPECT_THROW(read_tensors(in2), LoadError);
  std::istringstream in3(b + "x");
  EXPECT_THROW(read_tensors(in3), LoadError);
  std::string bad_version = b;
  bad_version[4] = 2;
  std::istringstream in4(bad_version);
  EXPECT_THROW(read_tensors(in4), LoadError);
}

TEST(Checkpoint, ModelRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "nakul_ckpt_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "m.nakl").string();
  ModelConfig c = tiny();
  c.kernel_sizes = {3, 9};
  c.forced_fusion = std::array<double, 3>{0.0, 1.0, 0.0};
  NakulModel m(c, 3);
  save_checkpoint(path, m);
  const NamedTensors state = load_tensors(path);
  const ModelConfig back = config_from_state(state);
  EXPECT_EQ(back.dim, c.dim);
  EXPECT_EQ(back.kernel_sizes, c.kernel_sizes);
  ASSERT_TRUE(back.forced_fusion.has_value());
  EXPECT_EQ(*back.forced_fusion, *c.forced_fusion);
  NakulModel loaded(back, 99);
  load_state(loaded, state);
  for (auto& [name, p] : loaded.named_parameters()) {
    for (auto& [n2, p2] : m.named_parameters()) {
      if (n2 != name) continue;
      for (std::size_t i = 0; i < p->value.size(); ++i) EXPECT_EQ(p->value[i], double(float(p2->value[i])));
    }
  }
  // A second save of the loaded model is byte-identical.
  const std::string path2 = (dir / "m2.nakl").string();
  save_checkpoint(path2, loaded);
  std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
  EXPECT_EQ(std::string(std::istreambuf_iterator<char>(a), {}), std::string(std::istreambuf_iterator<char>(b), {}));
  std::filesystem::remove_all(dir);
}

TEST(Checkpoint, MismatchedModelThrowsShapeError) {
  NakulModel m(tiny(), 4);
  NamedTensors state = model_state(m);
  ModelConfig other = tiny();
  other.dim = 6;
  NakulModel o(other, 4);
  EXPECT_THROW(load_state(o, state), ShapeError);
  NamedTensors missing;
  for (auto& e : state)
    if (e.first != "head.b2") missing.push_back(e);
  EXPECT_THROW(load_state(m, missing), ShapeError);
}

TEST(Checkpoint, MissingFileIsLoadError) { EXPECT_THROW(load_tensors("/nonexistent/x.nakl"), LoadError); }
