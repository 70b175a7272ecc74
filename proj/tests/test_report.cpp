#include <cmath>
#include <fstream>

#include <doctest.h>

#include "advw/data.hpp"
#include "advw/report.hpp"
#include "helpers.hpp"

using advw::NamedCurve;
using advw::SweepRecord;

namespace {

SweepRecord rec(double eps, double top1, double top5, double l2, double rate,
                const std::string& attack = "fgsm") {
  SweepRecord r;
  r.epsilon = eps;
  r.top1_error = top1;
  r.top5_error = top5;
  r.mean_l2 = l2;
  r.success_rate = rate;
  r.attack = attack;
  return r;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("csv formatting matches the fixture row") {
  const auto dir = testutil::temp_dir("csv");
  const std::vector<SweepRecord> records = {rec(0.02, 0.8762, 0.4958, 0.64, 0.8762)};
  advw::write_csv(records, dir / "one.csv");
  const std::string text = slurp(dir / "one.csv");
  CHECK(text ==
        "epsilon,top1_error,top5_error,mean_l2,success_rate,attack\n"
        "0.0200,87.62,49.58,0.640000,0.8762,fgsm\n");
}

TEST_CASE("csv round trip recovers values within formatting precision") {
  const auto dir = testutil::temp_dir("csv-rt");
  const std::vector<SweepRecord> records = {rec(0.01, 0.7788, 0.3382, 0.1534, 0.7788),
                                            rec(0.1, 0.9074, 0.6116, 1.5012, 0.9074, "cw")};
  advw::write_csv(records, dir / "sweep.csv");
  const auto loaded = advw::read_sweep_csv(dir / "sweep.csv");
  REQUIRE(loaded.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(std::abs(loaded[i].epsilon - records[i].epsilon) <= 5e-5);
    CHECK(std::abs(loaded[i].top1_error - records[i].top1_error) <= 5e-5);
    CHECK(std::abs(loaded[i].top5_error - records[i].top5_error) <= 5e-5);
    CHECK(std::abs(loaded[i].mean_l2 - records[i].mean_l2) <= 5e-7);
    CHECK(std::abs(loaded[i].success_rate - records[i].success_rate) <= 5e-5);
    CHECK(loaded[i].attack == records[i].attack);
  }
}

TEST_CASE("csv refuses empty record sets and leaves no file behind") {
  const auto dir = testutil::temp_dir("csv-empty");
  CHECK_THROWS_AS(advw::write_csv(std::vector<SweepRecord>{}, dir / "none.csv"),
                  std::invalid_argument);
  CHECK_FALSE(std::filesystem::exists(dir / "none.csv"));
}

TEST_CASE("svg output is structural and byte stable") {
  const auto dir = testutil::temp_dir("svg");
  const std::vector<NamedCurve> curves = {
      {"resnet-like", {rec(0.01, 0.7788, 0.3382, 0.15, 0.78), rec(0.05, 0.9180, 0.6058, 0.75, 0.92),
                       rec(0.10, 0.9074, 0.6116, 1.5, 0.91)}},
      {"vgg-like", {rec(0.01, 0.9286, 0.5970, 0.15, 0.93), rec(0.05, 0.9808, 0.8084, 0.75, 0.98),
                    rec(0.10, 0.9736, 0.7992, 1.5, 0.97)}}};
  advw::render_svg(curves, dir / "curves.svg");
  const std::string svg = slurp(dir / "curves.svg");

  std::size_t polylines = 0;
  for (std::size_t at = svg.find("<polyline"); at != std::string::npos;
       at = svg.find("<polyline", at + 1)) {
    ++polylines;
  }
  CHECK(polylines == 2);
  CHECK(svg.find("resnet-like") != std::string::npos);
  CHECK(svg.find("vgg-like") != std::string::npos);
  CHECK(svg.find("epsilon") != std::string::npos);
  CHECK(svg.find("top-1 error (%)") != std::string::npos);
  CHECK(svg.find("viewBox=\"0 0 720 440\"") != std::string::npos);

  advw::render_svg(curves, dir / "curves2.svg");
  CHECK(slurp(dir / "curves2.svg") == svg);

  CHECK_THROWS_AS(advw::render_svg(std::vector<NamedCurve>{}, dir / "x.svg"),
                  std::invalid_argument);
  const std::vector<NamedCurve> with_empty = {{"empty", {}}};
  CHECK_THROWS_AS(advw::render_svg(with_empty, dir / "y.svg"), std::invalid_argument);
}

TEST_CASE("svg polyline coordinates are affine in the record values") {
  const auto dir = testutil::temp_dir("svg-affine");
  const std::vector<NamedCurve> curves = {
      {"c", {rec(0.00, 0.10, 0.0, 0, 0), rec(0.05, 0.55, 0.0, 0, 0), rec(0.10, 1.00, 0.0, 0, 0)}}};
  advw::render_svg(curves, dir / "affine.svg");
  const std::string svg = slurp(dir / "affine.svg");

  const std::size_t at = svg.find("points=\"");
  REQUIRE(at != std::string::npos);
  const std::size_t end = svg.find('"', at + 8);
  const std::string points = svg.substr(at + 8, end - at - 8);

  // hand-computed from the declared plot rectangle and the fixed 0..100% axis
  const auto x_of = [](double eps) {
    return advw::svg::kPlotLeft +
           (eps - 0.0) / 0.10 * (advw::svg::kPlotRight - advw::svg::kPlotLeft);
  };
  const auto y_of = [](double err) {
    return advw::svg::kPlotBottom -
           err * 100.0 / 100.0 * (advw::svg::kPlotBottom - advw::svg::kPlotTop);
  };
  char expected[128];
  std::snprintf(expected, sizeof(expected), "%.2f,%.2f %.2f,%.2f %.2f,%.2f", x_of(0.0), y_of(0.10),
                x_of(0.05), y_of(0.55), x_of(0.10), y_of(1.00));
  CHECK(points == expected);
}

TEST_CASE("manifest serialization and dataset fingerprints") {
  const auto dir = testutil::temp_dir("manifest");
  advw::RunManifest m;
  m.command = {"sweep", "--attack", "fgsm"};
  m.seed = 42;
  const advw::LabeledDataset ds = advw::generate_synthetic(6, 3, 8, 9);
  m.dataset_fingerprint = advw::dataset_fingerprint(ds);
  m.config = {{"attack", "fgsm"}, {"epsilons", "paper-fgsm"}};
  advw::write_manifest(m, dir / "run.manifest.json");
  const std::string text = slurp(dir / "run.manifest.json");
  CHECK(text.find("\"seed\": 42") != std::string::npos);
  CHECK(text.find("fnv1a64:") != std::string::npos);
  CHECK(text.find("advw 0.1.0") != std::string::npos);

  // fingerprints are content hashes: stable per content, sensitive to changes
  CHECK(advw::dataset_fingerprint(ds) == m.dataset_fingerprint);
  CHECK(advw::dataset_fingerprint(advw::generate_synthetic(6, 3, 8, 10)) !=
        m.dataset_fingerprint);
}
