#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "advw/model.hpp"

namespace advw {

class CheckpointError : public std::runtime_error {
 public:
  enum class Kind { kBadMagic, kTruncated, kVersionMismatch, kSpecMismatch };
  CheckpointError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// Canonical one-line architecture descriptor, e.g.
//   input=1x16x16;classes=10;layers=conv(6,3,2),relu,flatten,dense(48),relu,dense(10)
// Round-trips through parse_spec_descriptor.
std::string describe_spec(const ModelSpec& spec);
ModelSpec parse_spec_descriptor(const std::string& descriptor);

// Binary checkpoint: magic "ADVW", format version u32 LE, length-prefixed
// UTF-8 descriptor (architecture plus init seed), then one record per
// parameter (length-prefixed name, rank u32, dims u32 each, values as
// 64-bit little-endian floats). load(save(state)) is bitwise identity on
// parameters; files are written to a temp path and renamed into place.
void save_checkpoint(const ModelState& state, const std::filesystem::path& path);

ModelState load_checkpoint(const std::filesystem::path& path);

// Loads and refuses (kSpecMismatch) checkpoints whose descriptor does not
// match the expected architecture.
ModelState load_checkpoint(const std::filesystem::path& path, const ModelSpec& expected);

inline constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace advw
