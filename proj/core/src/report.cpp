#include "advw/report.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace advw {

namespace {

std::string fixed(double v, int places) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", places, v);
  return buf;
}

void write_atomically(const std::filesystem::path& path, const std::string& bytes) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("report: cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("report: write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

void write_csv(std::span<const SweepRecord> records, const std::filesystem::path& path) {
  if (records.empty()) throw std::invalid_argument("write_csv: no records");
  std::string out = "epsilon,top1_error,top5_error,mean_l2,success_rate,attack\n";
  for (const SweepRecord& r : records) {
    out += fixed(r.epsilon, 4) + ',' + fixed(r.top1_error * 100.0, 2) + ',' +
           fixed(r.top5_error * 100.0, 2) + ',' + fixed(r.mean_l2, 6) + ',' +
           fixed(r.success_rate, 4) + ',' + r.attack + '\n';
  }
  write_atomically(path, out);
}

std::vector<SweepRecord> read_sweep_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_sweep_csv: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "epsilon,top1_error,top5_error,mean_l2,success_rate,attack") {
    throw std::runtime_error("read_sweep_csv: unexpected header in " + path.string());
  }
  std::vector<SweepRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string field;
    SweepRecord r;
    std::getline(row, field, ',');
    r.epsilon = std::stod(field);
    std::getline(row, field, ',');
    r.top1_error = std::stod(field) / 100.0;
    std::getline(row, field, ',');
    r.top5_error = std::stod(field) / 100.0;
    std::getline(row, field, ',');
    r.mean_l2 = std::stod(field);
    std::getline(row, field, ',');
    r.success_rate = std::stod(field);
    if (!std::getline(row, r.attack, ',')) {
      throw std::runtime_error("read_sweep_csv: malformed row '" + line + "'");
    }
    records.push_back(std::move(r));
  }
  return records;
}

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
constexpr int kPaletteSize = 6;

double metric_percent(const SweepRecord& r, SvgMetric metric) {
  switch (metric) {
    case SvgMetric::kTop5Error:
      return r.top5_error * 100.0;
    case SvgMetric::kTop1Accuracy:
      return (1.0 - r.top1_error) * 100.0;
    default:
      return r.top1_error * 100.0;
  }
}

const char* metric_label(SvgMetric metric) {
  switch (metric) {
    case SvgMetric::kTop5Error:
      return "top-5 error (%)";
    case SvgMetric::kTop1Accuracy:
      return "top-1 accuracy (%)";
    default:
      return "top-1 error (%)";
  }
}

}  // namespace

void render_svg(std::span<const NamedCurve> curves, const std::filesystem::path& path,
                SvgMetric metric) {
  if (curves.empty()) throw std::invalid_argument("render_svg: no curves");
  double eps_min = 0.0, eps_max = 0.0;
  bool first = true;
  for (const NamedCurve& c : curves) {
    if (c.records.empty()) {
      throw std::invalid_argument("render_svg: curve '" + c.name + "' is empty");
    }
    for (const SweepRecord& r : c.records) {
      if (first) {
        eps_min = eps_max = r.epsilon;
        first = false;
      } else {
        eps_min = std::min(eps_min, r.epsilon);
        eps_max = std::max(eps_max, r.epsilon);
      }
    }
  }
  const double span = eps_max > eps_min ? eps_max - eps_min : 1.0;
  const auto x_of = [&](double eps) {
    return svg::kPlotLeft + (eps - eps_min) / span * (svg::kPlotRight - svg::kPlotLeft);
  };
  const auto y_of = [&](double percent) {
    return svg::kPlotBottom - percent / 100.0 * (svg::kPlotBottom - svg::kPlotTop);
  };

  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" viewBox=\"0 0 " +
         fixed(svg::kWidth, 0) + " " + fixed(svg::kHeight, 0) + "\">\n";
  out += "<rect x=\"0\" y=\"0\" width=\"" + fixed(svg::kWidth, 0) + "\" height=\"" +
         fixed(svg::kHeight, 0) + "\" fill=\"white\"/>\n";

  // axes
  out += "<line x1=\"" + fixed(svg::kPlotLeft, 2) + "\" y1=\"" + fixed(svg::kPlotBottom, 2) +
         "\" x2=\"" + fixed(svg::kPlotRight, 2) + "\" y2=\"" + fixed(svg::kPlotBottom, 2) +
         "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
  out += "<line x1=\"" + fixed(svg::kPlotLeft, 2) + "\" y1=\"" + fixed(svg::kPlotTop, 2) +
         "\" x2=\"" + fixed(svg::kPlotLeft, 2) + "\" y2=\"" + fixed(svg::kPlotBottom, 2) +
         "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";

  for (int pct = 0; pct <= 100; pct += 20) {
    const double y = y_of(pct);
    out += "<line x1=\"" + fixed(svg::kPlotLeft - 4, 2) + "\" y1=\"" + fixed(y, 2) + "\" x2=\"" +
           fixed(svg::kPlotLeft, 2) + "\" y2=\"" + fixed(y, 2) +
           "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
    out += "<text x=\"" + fixed(svg::kPlotLeft - 8, 2) + "\" y=\"" + fixed(y + 4, 2) +
           "\" font-family=\"monospace\" font-size=\"12\" text-anchor=\"end\">" +
           std::to_string(pct) + "</text>\n";
  }
  for (int tick = 0; tick <= 4; ++tick) {
    const double eps = eps_min + span * tick / 4.0;
    const double x = x_of(eps);
    out += "<line x1=\"" + fixed(x, 2) + "\" y1=\"" + fixed(svg::kPlotBottom, 2) + "\" x2=\"" +
           fixed(x, 2) + "\" y2=\"" + fixed(svg::kPlotBottom + 4, 2) +
           "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
    out += "<text x=\"" + fixed(x, 2) + "\" y=\"" + fixed(svg::kPlotBottom + 18, 2) +
           "\" font-family=\"monospace\" font-size=\"12\" text-anchor=\"middle\">" +
           fixed(eps, 3) + "</text>\n";
  }

  out += "<text x=\"" + fixed((svg::kPlotLeft + svg::kPlotRight) / 2.0, 2) + "\" y=\"" +
         fixed(svg::kHeight - 12, 2) +
         "\" font-family=\"monospace\" font-size=\"13\" text-anchor=\"middle\">epsilon</text>\n";
  out += "<text x=\"16\" y=\"" + fixed((svg::kPlotTop + svg::kPlotBottom) / 2.0, 2) +
         "\" font-family=\"monospace\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         fixed((svg::kPlotTop + svg::kPlotBottom) / 2.0, 2) + ")\">" + metric_label(metric) +
         "</text>\n";

  for (std::size_t i = 0; i < curves.size(); ++i) {
    const char* color = kPalette[i % kPaletteSize];
    std::string points;
    for (const SweepRecord& r : curves[i].records) {
      if (!points.empty()) points += ' ';
      points += fixed(x_of(r.epsilon), 2) + ',' + fixed(y_of(metric_percent(r, metric)), 2);
    }
    out += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
           "\" stroke-width=\"2\" points=\"" + points + "\"/>\n";
  }

  // legend
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const char* color = kPalette[i % kPaletteSize];
    const double y = 60.0 + 20.0 * static_cast<double>(i);
    out += "<line x1=\"560\" y1=\"" + fixed(y, 2) + "\" x2=\"584\" y2=\"" + fixed(y, 2) +
           "\" stroke=\"" + std::string(color) + "\" stroke-width=\"2\"/>\n";
    out += "<text x=\"590\" y=\"" + fixed(y + 4, 2) +
           "\" font-family=\"monospace\" font-size=\"12\">" + curves[i].name + "</text>\n";
  }
  out += "</svg>\n";
  write_atomically(path, out);
}

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path) {
  nlohmann::json j;
  j["command"] = manifest.command;
  j["seed"] = manifest.seed;
  j["dataset_fingerprint"] = manifest.dataset_fingerprint;
  j["config"] = manifest.config;
  j["tool_version"] = manifest.tool_version;
  write_atomically(path, j.dump(2) + "\n");
}

std::string dataset_fingerprint(const LabeledDataset& ds) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  mix(static_cast<std::uint64_t>(ds.class_count));
  for (int d : ds.images.shape()) mix(static_cast<std::uint64_t>(d));
  for (int label : ds.labels) mix(static_cast<std::uint64_t>(label));
  for (double v : ds.images.data()) mix(std::bit_cast<std::uint64_t>(v));
  char buf[32];
  std::snprintf(buf, sizeof(buf), "fnv1a64:%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace advw
