#include <filesystem>
#include <fstream>
#include <random>

#include <doctest.h>

#include "advw/checkpoint.hpp"
#include "advw/cli.hpp"
#include "advw/report.hpp"
#include "helpers.hpp"

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("epsilon list parsing") {
  const auto fgsm = advw::parse_epsilon_list("paper-fgsm");
  REQUIRE(fgsm.size() == 10);
  for (int i = 0; i < 10; ++i) CHECK(fgsm[static_cast<std::size_t>(i)] == (i + 1) / 100.0);

  const auto distill = advw::parse_epsilon_list("paper-distill");
  CHECK(distill == std::vector<double>{0.0, 0.007, 0.01, 0.02, 0.03, 0.05, 0.10, 0.20, 0.30});

  CHECK(advw::parse_epsilon_list("0.01,0.5,1") == std::vector<double>{0.01, 0.5, 1.0});
  CHECK_THROWS_AS(advw::parse_epsilon_list("0.01,1.5"), std::invalid_argument);
  CHECK_THROWS_AS(advw::parse_epsilon_list("abc"), std::invalid_argument);
  CHECK_THROWS_AS(advw::parse_epsilon_list(""), std::invalid_argument);
}

TEST_CASE("cli usage errors exit with code 1") {
  CHECK(advw::cli_main({}) == 1);
  CHECK(advw::cli_main({"sweep", "--no-such-flag"}) == 1);
  CHECK(advw::cli_main({"frobnicate"}) == 1);
  CHECK(advw::cli_main({"train"}) == 1);  // missing required --out
}

TEST_CASE("cli runtime errors exit with code 2") {
  const auto dir = testutil::temp_dir("cli-rt");
  CHECK(advw::cli_main({"sweep", "--ckpt", (dir / "missing.ckpt").string(), "--attack", "fgsm",
                        "--out", (dir / "out.csv").string()}) == 2);
}

TEST_CASE("cli train then sweep produces the grid csv and manifest") {
  const auto dir = testutil::temp_dir("cli-e2e");
  const std::string ckpt = (dir / "model.ckpt").string();
  const std::string csv = (dir / "sweep.csv").string();
  const std::string svg = (dir / "sweep.svg").string();

  CHECK(advw::cli_main({"train", "--model", "mlp", "--per-class", "40", "--epochs", "4", "--seed",
                        "5", "--out", ckpt}) == 0);
  CHECK(std::filesystem::exists(ckpt));
  CHECK_NOTHROW(advw::load_checkpoint(ckpt));

  CHECK(advw::cli_main({"sweep", "--ckpt", ckpt, "--attack", "fgsm", "--epsilons", "paper-fgsm",
                        "--per-class", "40", "--seed", "5", "--out", csv, "--svg", svg}) == 0);
  const auto records = advw::read_sweep_csv(csv);
  REQUIRE(records.size() == 10);
  for (int i = 0; i < 10; ++i) {
    CHECK(records[static_cast<std::size_t>(i)].epsilon ==
          doctest::Approx((i + 1) / 100.0).epsilon(1e-9));
  }
  CHECK(std::filesystem::exists(svg));
  CHECK(std::filesystem::exists(csv + ".manifest.json"));
  CHECK(slurp(csv + ".manifest.json").find("paper-fgsm") != std::string::npos);
}

TEST_CASE("cli trains from idx file pairs") {
  const auto dir = testutil::temp_dir("cli-idx");
  // tiny 6-class idx pair: 60 noisy 8x8 images, 10 per class
  std::vector<std::vector<unsigned char>> images;
  std::vector<unsigned char> labels;
  std::mt19937_64 gen(3);
  for (int c = 0; c < 6; ++c) {
    for (int i = 0; i < 10; ++i) {
      std::vector<unsigned char> img(64);
      for (int p = 0; p < 64; ++p) {
        img[static_cast<std::size_t>(p)] =
            static_cast<unsigned char>((c * 40 + static_cast<int>(gen() % 40)) & 0xff);
      }
      images.push_back(std::move(img));
      labels.push_back(static_cast<unsigned char>(c));
    }
  }
  testutil::save_idx(dir / "imgs.idx", dir / "labels.idx", images, labels, 8, 8);

  const std::string ckpt = (dir / "model.ckpt").string();
  const std::string data =
      "idx:" + (dir / "imgs.idx").string() + "," + (dir / "labels.idx").string();
  CHECK(advw::cli_main({"train", "--model", "mlp", "--data", data, "--epochs", "1", "--seed", "2",
                        "--out", ckpt}) == 0);
  const advw::ModelState model = advw::load_checkpoint(ckpt);
  CHECK(model.spec.input_shape == std::vector<int>{1, 8, 8});
  CHECK(model.spec.class_count == 6);

  CHECK(advw::cli_main({"train", "--model", "mlp", "--data", "idx:only-one-path", "--epochs", "1",
                        "--out", (dir / "x.ckpt").string()}) == 1);
}

TEST_CASE("cli cw attack writes an uncapped row under the trivial cap") {
  const auto dir = testutil::temp_dir("cli-cw");
  const std::string ckpt = (dir / "model.ckpt").string();
  const std::string csv = (dir / "cw.csv").string();
  REQUIRE(advw::cli_main({"train", "--model", "mlp", "--per-class", "20", "--epochs", "3",
                          "--seed", "9", "--out", ckpt}) == 0);

  CHECK(advw::cli_main({"attack", "--ckpt", ckpt, "--attack", "cw", "--iters", "15",
                        "--per-class", "20", "--seed", "9", "--out", csv}) == 0);
  const auto records = advw::read_sweep_csv(csv);
  REQUIRE(records.size() == 1);
  CHECK(records[0].attack == "cw");
  CHECK(records[0].epsilon == doctest::Approx(1.0));
}

TEST_CASE("cli attack on a known checkpoint writes one row") {
  const auto dir = testutil::temp_dir("cli-attack");
  const std::string ckpt = (dir / "model.ckpt").string();
  const std::string csv = (dir / "attack.csv").string();
  REQUIRE(advw::cli_main({"train", "--model", "mlp", "--per-class", "40", "--epochs", "4",
                          "--seed", "6", "--out", ckpt}) == 0);

  CHECK(advw::cli_main({"attack", "--ckpt", ckpt, "--attack", "fgsm", "--epsilon", "0.05",
                        "--per-class", "40", "--seed", "6", "--out", csv}) == 0);
  const auto records = advw::read_sweep_csv(csv);
  REQUIRE(records.size() == 1);
  CHECK(records[0].epsilon == doctest::Approx(0.05));
  CHECK(records[0].attack == "fgsm");
}

TEST_CASE("cli rerun of a sweep is byte identical") {
  const auto dir = testutil::temp_dir("cli-repro");
  const std::string ckpt = (dir / "model.ckpt").string();
  const std::string csv = (dir / "sweep.csv").string();
  const std::string svg = (dir / "sweep.svg").string();
  REQUIRE(advw::cli_main({"train", "--model", "mlp", "--per-class", "30", "--epochs", "3",
                          "--seed", "7", "--out", ckpt}) == 0);

  const std::vector<std::string> sweep_args = {"sweep", "--ckpt", ckpt,  "--attack", "fgsm",
                                               "--epsilons", "0.01,0.05", "--per-class", "30",
                                               "--seed", "7", "--out", csv, "--svg", svg};
  REQUIRE(advw::cli_main(sweep_args) == 0);
  const std::string csv_first = slurp(csv);
  const std::string svg_first = slurp(svg);
  const std::string manifest_first = slurp(csv + ".manifest.json");
  REQUIRE(advw::cli_main(sweep_args) == 0);
  CHECK(slurp(csv) == csv_first);
  CHECK(slurp(svg) == svg_first);
  CHECK(slurp(csv + ".manifest.json") == manifest_first);
}

TEST_CASE("cli report renders sweep csvs") {
  const auto dir = testutil::temp_dir("cli-report");
  const std::string ckpt = (dir / "model.ckpt").string();
  const std::string csv = (dir / "fgsm.csv").string();
  const std::string svg = (dir / "report.svg").string();
  REQUIRE(advw::cli_main({"train", "--model", "mlp", "--per-class", "30", "--epochs", "3",
                          "--seed", "8", "--out", ckpt}) == 0);
  REQUIRE(advw::cli_main({"sweep", "--ckpt", ckpt, "--attack", "fgsm", "--epsilons", "0.01,0.1",
                          "--per-class", "30", "--seed", "8", "--out", csv}) == 0);

  CHECK(advw::cli_main({"report", "--in", csv, "--svg", svg, "--metric", "top1-accuracy"}) == 0);
  const std::string text = slurp(svg);
  CHECK(text.find("<polyline") != std::string::npos);
  CHECK(text.find("fgsm") != std::string::npos);
  CHECK(text.find("top-1 accuracy (%)") != std::string::npos);
}
