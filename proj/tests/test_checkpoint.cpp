#include <fstream>

#include <doctest.h>

#include "advw/checkpoint.hpp"
#include "advw/data.hpp"
#include "advw/model.hpp"
#include "advw/optim.hpp"
#include "helpers.hpp"

using advw::CheckpointError;
using advw::ModelSpec;
using advw::ModelState;

TEST_CASE("spec descriptor round trips") {
  const ModelSpec spec = advw::reference_spec("teacher-cnn", {1, 16, 16}, 10);
  const std::string descriptor = advw::describe_spec(spec);
  CHECK(descriptor ==
        "input=1x16x16;classes=10;layers=conv(8,3,2),relu,conv(16,3,1),relu,flatten,dense(80),"
        "relu,dense(10)");
  const ModelSpec parsed = advw::parse_spec_descriptor(descriptor);
  CHECK(advw::describe_spec(parsed) == descriptor);
  CHECK_THROWS_AS(advw::parse_spec_descriptor("input=4;classes=2;layers=maxpool"),
                  CheckpointError);
}

TEST_CASE("checkpoint round trip is bitwise on a trained model") {
  const auto dir = testutil::temp_dir("ckpt");
  const advw::LabeledDataset ds = advw::generate_synthetic(6, 20, 8, 51);
  const advw::Splits splits = advw::split(ds, advw::SplitSpec{80, 20, 20, 51});
  advw::TrainConfig cfg;
  cfg.epochs = 2;
  cfg.seed = 51;
  const advw::TrainResult trained = advw::train(
      advw::init_params(advw::reference_spec("student-cnn", {1, 8, 8}, 6), 51), splits.train,
      splits.val, cfg);

  const auto path = dir / "student.ckpt";
  advw::save_checkpoint(trained.model, path);
  const ModelState loaded = advw::load_checkpoint(path);

  CHECK(loaded.seed == trained.model.seed);
  CHECK(advw::describe_spec(loaded.spec) == advw::describe_spec(trained.model.spec));
  REQUIRE(loaded.params.size() == trained.model.params.size());
  for (std::size_t i = 0; i < loaded.params.size(); ++i) {
    CHECK(loaded.params[i].name == trained.model.params[i].name);
    REQUIRE(loaded.params[i].value.same_shape(trained.model.params[i].value));
    for (std::size_t e = 0; e < loaded.params[i].value.size(); ++e) {
      CHECK(loaded.params[i].value[e] == trained.model.params[i].value[e]);
    }
  }
}

TEST_CASE("checkpoint errors are distinct") {
  const auto dir = testutil::temp_dir("ckpt-bad");
  const ModelState state = advw::init_params(advw::reference_spec("mlp", {1, 8, 8}, 6), 5);
  const auto path = dir / "model.ckpt";
  advw::save_checkpoint(state, path);

  SUBCASE("corrupted magic") {
    auto bytes = [&] {
      std::ifstream in(path, std::ios::binary);
      return std::string(std::istreambuf_iterator<char>(in), {});
    }();
    bytes[0] = 'X';
    std::ofstream(dir / "badmagic.ckpt", std::ios::binary) << bytes;
    try {
      advw::load_checkpoint(dir / "badmagic.ckpt");
      CHECK(false);
    } catch (const CheckpointError& e) {
      CHECK(e.kind() == CheckpointError::Kind::kBadMagic);
    }
  }

  SUBCASE("truncation") {
    auto bytes = [&] {
      std::ifstream in(path, std::ios::binary);
      return std::string(std::istreambuf_iterator<char>(in), {});
    }();
    std::ofstream(dir / "trunc.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() - 11);
    try {
      advw::load_checkpoint(dir / "trunc.ckpt");
      CHECK(false);
    } catch (const CheckpointError& e) {
      CHECK(e.kind() == CheckpointError::Kind::kTruncated);
    }
  }

  SUBCASE("version mismatch") {
    auto bytes = [&] {
      std::ifstream in(path, std::ios::binary);
      return std::string(std::istreambuf_iterator<char>(in), {});
    }();
    bytes[4] = 9;  // format version little-endian low byte
    std::ofstream(dir / "version.ckpt", std::ios::binary) << bytes;
    try {
      advw::load_checkpoint(dir / "version.ckpt");
      CHECK(false);
    } catch (const CheckpointError& e) {
      CHECK(e.kind() == CheckpointError::Kind::kVersionMismatch);
    }
  }

  SUBCASE("descriptor mismatch against an expected architecture") {
    const ModelSpec other = advw::reference_spec("student-cnn", {1, 8, 8}, 6);
    try {
      advw::load_checkpoint(path, other);
      CHECK(false);
    } catch (const CheckpointError& e) {
      CHECK(e.kind() == CheckpointError::Kind::kSpecMismatch);
    }
    CHECK_NOTHROW(advw::load_checkpoint(path, state.spec));
  }
}
