#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "advw/data.hpp"
#include "advw/metrics.hpp"

namespace advw {

inline constexpr const char* kToolVersion = "advw 0.1.0";

// CSV schema: header `epsilon,top1_error,top5_error,mean_l2,success_rate,attack`,
// epsilon as a decimal fraction with 4 places, errors as percent with 2
// places, mean L2 with 6 places, success rate as a fraction with 4 places,
// LF line endings. The file is written to a temp path and renamed into place.
void write_csv(std::span<const SweepRecord> records, const std::filesystem::path& path);

std::vector<SweepRecord> read_sweep_csv(const std::filesystem::path& path);

struct NamedCurve {
  std::string name;
  std::vector<SweepRecord> records;
};

enum class SvgMetric { kTop1Error, kTop5Error, kTop1Accuracy };

// Plot geometry; polyline coordinates are affine in (epsilon, percent value)
// over these plot-rectangle bounds with a fixed [0, 100] percent axis.
namespace svg {
inline constexpr double kWidth = 720.0;
inline constexpr double kHeight = 440.0;
inline constexpr double kPlotLeft = 70.0;
inline constexpr double kPlotRight = 550.0;
inline constexpr double kPlotTop = 40.0;
inline constexpr double kPlotBottom = 390.0;
}  // namespace svg

// Standalone SVG 1.1 with epsilon on the x-axis, the chosen metric in
// percent on the y-axis, one polyline per named curve, a legend and axis
// labels. Output bytes depend only on the input.
void render_svg(std::span<const NamedCurve> curves, const std::filesystem::path& path,
                SvgMetric metric = SvgMetric::kTop1Error);

// Everything needed to reproduce an experiment byte-for-byte. Emitted as a
// JSON sidecar next to each CSV/SVG output.
struct RunManifest {
  std::vector<std::string> command;
  std::uint64_t seed = 0;
  std::string dataset_fingerprint;
  std::map<std::string, std::string> config;
  std::string tool_version = kToolVersion;
};

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path);

// FNV-1a 64-bit content hash over shape, labels and pixel bytes.
std::string dataset_fingerprint(const LabeledDataset& ds);

}  // namespace advw
