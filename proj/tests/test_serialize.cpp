#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "imdn/model.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace imdn;

TEST_SUITE("serialize") {

TEST_CASE("round trip is bit exact for every variant") {
  std::mt19937_64 rng(3);
  for (Variant v : all_variants()) {
    CAPTURE(to_string(v));
    Model m = build_variant(v, 3);
    init_weights(m, 5);
    for (LayerSlot& l : m.layers())
      for (double& b : l.bias.mutable_value().data()) b = std::uniform_real_distribution<double>(-1, 1)(rng);
    const std::vector<std::uint8_t> bytes = serialize_weights(m);
    const Model back = deserialize_weights(bytes);
    CHECK(back.config() == m.config());
    CHECK(serialize_weights(back) == bytes);
    const Tensor x = oracle::random_tensor({1, 3, 8, 8}, rng, 0.0, 1.0);
    CHECK(back.forward(x) == m.forward(x));
  }
}

TEST_CASE("file round trip") {
  Model m = build_imdn(ImdnConfig::narrow(8, 2, 2));
  init_weights(m, 1);
  const auto dir = std::filesystem::temp_directory_path() / "imdn_serialize_test";
  std::filesystem::create_directories(dir);
  save_weights(m, dir / "a.imdnw");
  const Model back = load_weights(dir / "a.imdnw");
  save_weights(back, dir / "b.imdnw");
  std::ifstream a(dir / "a.imdnw", std::ios::binary);
  std::ifstream b(dir / "b.imdnw", std::ios::binary);
  const std::string sa((std::istreambuf_iterator<char>(a)), {});
  const std::string sb((std::istreambuf_iterator<char>(b)), {});
  CHECK(sa == sb);
  CHECK(sa.substr(0, 6) == "IMDNW1");
  CHECK_ERROR(load_weights(dir / "missing.imdnw"), ErrorCode::io_failure);
  std::filesystem::remove_all(dir);
}

TEST_CASE("corrupt files are rejected") {
  Model m = build_imdn(ImdnConfig::narrow(8, 1, 2));
  const std::vector<std::uint8_t> good = serialize_weights(m);

  std::vector<std::uint8_t> bad = good;
  bad[0] = 'X';
  CHECK_ERROR(deserialize_weights(bad), ErrorCode::bad_format);

  bad = good;
  bad[6] = 9;
  CHECK_ERROR(deserialize_weights(bad), ErrorCode::bad_format);

  for (std::size_t cut : {std::size_t{3}, std::size_t{12}, good.size() / 2, good.size() - 1}) {
    CAPTURE(cut);
    CHECK_ERROR(deserialize_weights(std::span(good).first(cut)), ErrorCode::bad_format);
  }

  // Weights made for a wider network do not fit this config.
  Model wide = build_imdn(ImdnConfig::narrow(16, 1, 2));
  std::vector<std::uint8_t> mixed = serialize_weights(m);
  const std::vector<std::uint8_t> wide_bytes = serialize_weights(wide);
  const std::size_t header = 6 + 4 + 7 * 4 + 8;
  mixed.resize(header);
  mixed.insert(mixed.end(), wide_bytes.begin() + header, wide_bytes.end());
  CHECK_ERROR(deserialize_weights(mixed), ErrorCode::shape_mismatch);
}

}
