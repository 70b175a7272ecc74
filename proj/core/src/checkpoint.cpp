#include "advw/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace advw {

namespace {

constexpr char kMagic[4] = {'A', 'D', 'V', 'W'};

void write_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff),
                              static_cast<unsigned char>((v >> 16) & 0xff),
                              static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_f64(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t read_u32(std::istream& in, const std::string& context) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw CheckpointError(CheckpointError::Kind::kTruncated,
                          "checkpoint: truncated while reading " + context);
  }
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
         (std::uint32_t(b[3]) << 24);
}

double read_f64(std::istream& in, const std::string& context) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) {
    throw CheckpointError(CheckpointError::Kind::kTruncated,
                          "checkpoint: truncated while reading " + context);
  }
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= std::uint64_t(b[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

std::string read_string(std::istream& in, const std::string& context) {
  const std::uint32_t len = read_u32(in, context + " length");
  std::string s(len, '\0');
  if (len > 0 && !in.read(s.data(), len)) {
    throw CheckpointError(CheckpointError::Kind::kTruncated,
                          "checkpoint: truncated while reading " + context);
  }
  return s;
}

[[noreturn]] void malformed(const std::string& what) {
  throw CheckpointError(CheckpointError::Kind::kSpecMismatch, "checkpoint: " + what);
}

}  // namespace

std::string describe_spec(const ModelSpec& spec) {
  std::ostringstream os;
  os << "input=";
  for (std::size_t i = 0; i < spec.input_shape.size(); ++i) {
    if (i) os << 'x';
    os << spec.input_shape[i];
  }
  os << ";classes=" << spec.class_count << ";layers=";
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (i) os << ',';
    std::visit(
        [&os](auto&& l) {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, ConvLayer>) {
            os << "conv(" << l.out_channels << ',' << l.kernel << ',' << l.stride << ')';
          } else if constexpr (std::is_same_v<T, DenseLayer>) {
            os << "dense(" << l.out_features << ')';
          } else if constexpr (std::is_same_v<T, ReluLayer>) {
            os << "relu";
          } else {
            os << "flatten";
          }
        },
        spec.layers[i]);
  }
  return os.str();
}

namespace {

std::vector<std::string> split_on(const std::string& s, char delim) {
  std::vector<std::string> parts;
  std::string cur;
  for (char ch : s) {
    if (ch == delim) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  parts.push_back(cur);
  return parts;
}

// Splits on the delimiter at parenthesis depth zero, so conv(8,3,2) stays whole.
std::vector<std::string> split_outside_parens(const std::string& s, char delim) {
  std::vector<std::string> parts;
  std::string cur;
  int depth = 0;
  for (char ch : s) {
    if (ch == '(') ++depth;
    if (ch == ')') --depth;
    if (ch == delim && depth == 0) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  parts.push_back(cur);
  return parts;
}

int parse_int(const std::string& s, const std::string& context) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used != s.size()) malformed("malformed " + context + " '" + s + "'");
    return v;
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception&) {
    malformed("malformed " + context + " '" + s + "'");
  }
}

}  // namespace

ModelSpec parse_spec_descriptor(const std::string& descriptor) {
  ModelSpec spec;
  bool have_input = false, have_classes = false, have_layers = false;
  for (const std::string& field : split_on(descriptor, ';')) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) malformed("malformed descriptor field '" + field + "'");
    const std::string key = field.substr(0, eq);
    const std::string value = field.substr(eq + 1);
    if (key == "input") {
      for (const std::string& d : split_on(value, 'x')) {
        spec.input_shape.push_back(parse_int(d, "input dimension"));
      }
      have_input = true;
    } else if (key == "classes") {
      spec.class_count = parse_int(value, "class count");
      have_classes = true;
    } else if (key == "layers") {
      for (const std::string& item : split_outside_parens(value, ',')) {
        if (item == "relu") {
          spec.layers.emplace_back(ReluLayer{});
        } else if (item == "flatten") {
          spec.layers.emplace_back(FlattenLayer{});
        } else if (item.rfind("dense(", 0) == 0 && item.back() == ')') {
          spec.layers.emplace_back(DenseLayer{parse_int(item.substr(6, item.size() - 7), "dense size")});
        } else if (item.rfind("conv(", 0) == 0 && item.back() == ')') {
          const auto args = split_on(item.substr(5, item.size() - 6), ',');
          if (args.size() != 3) malformed("conv layer '" + item + "' must carry three arguments");
          spec.layers.emplace_back(ConvLayer{parse_int(args[0], "conv channels"),
                                             parse_int(args[1], "conv kernel"),
                                             parse_int(args[2], "conv stride")});
        } else {
          malformed("unknown layer '" + item + "'");
        }
      }
      have_layers = true;
    } else if (key == "seed") {
      // consumed by the checkpoint loader
    } else {
      malformed("unknown descriptor key '" + key + "'");
    }
  }
  if (!have_input || !have_classes || !have_layers) {
    malformed("descriptor missing input/classes/layers");
  }
  return spec;
}

void save_checkpoint(const ModelState& state, const std::filesystem::path& path) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + tmp.string() + " for writing");
    out.write(kMagic, 4);
    write_u32(out, kCheckpointVersion);
    write_string(out, describe_spec(state.spec) + ";seed=" + std::to_string(state.seed));
    for (const Param& p : state.params) {
      write_string(out, p.name);
      write_u32(out, static_cast<std::uint32_t>(p.value.rank()));
      for (int d : p.value.shape()) write_u32(out, static_cast<std::uint32_t>(d));
      for (double v : p.value.data()) write_f64(out, v);
    }
    if (!out) throw std::runtime_error("checkpoint: write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

ModelState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CheckpointError(CheckpointError::Kind::kTruncated,
                          "checkpoint: cannot open " + path.string());
  }
  char magic[4];
  if (!in.read(magic, 4)) {
    throw CheckpointError(CheckpointError::Kind::kTruncated,
                          "checkpoint: truncated while reading magic");
  }
  if (std::string(magic, 4) != std::string(kMagic, 4)) {
    throw CheckpointError(CheckpointError::Kind::kBadMagic,
                          "checkpoint: bad magic in " + path.string());
  }
  const std::uint32_t version = read_u32(in, "format version");
  if (version != kCheckpointVersion) {
    throw CheckpointError(CheckpointError::Kind::kVersionMismatch,
                          "checkpoint: unsupported format version " + std::to_string(version));
  }
  const std::string descriptor = read_string(in, "descriptor");

  ModelState state;
  state.spec = parse_spec_descriptor(descriptor);
  for (const std::string& field : split_on(descriptor, ';')) {
    if (field.rfind("seed=", 0) == 0) {
      state.seed = std::stoull(field.substr(5));
    }
  }

  while (true) {
    in.peek();
    if (in.eof()) break;
    const std::string name = read_string(in, "parameter name");
    const std::uint32_t rank = read_u32(in, "parameter rank");
    if (rank > 8) malformed("implausible parameter rank " + std::to_string(rank));
    std::vector<int> shape;
    for (std::uint32_t i = 0; i < rank; ++i) {
      shape.push_back(static_cast<int>(read_u32(in, "parameter dimension")));
    }
    const std::size_t count = Tensor::element_count(shape);
    std::vector<double> values(count);
    for (std::size_t i = 0; i < count; ++i) values[i] = read_f64(in, "parameter values");
    state.params.push_back({name, Tensor(std::move(shape), std::move(values))});
  }

  // Parameter names and shapes are a pure function of the spec; verify the
  // records agree with the descriptor.
  const ModelState reference = init_params(state.spec, 0);
  if (reference.params.size() != state.params.size()) {
    malformed("parameter record count " + std::to_string(state.params.size()) +
              " does not match descriptor (" + std::to_string(reference.params.size()) + ")");
  }
  for (std::size_t i = 0; i < reference.params.size(); ++i) {
    if (reference.params[i].name != state.params[i].name ||
        !reference.params[i].value.same_shape(state.params[i].value)) {
      malformed("parameter record '" + state.params[i].name + "' does not match descriptor");
    }
  }
  return state;
}

ModelState load_checkpoint(const std::filesystem::path& path, const ModelSpec& expected) {
  ModelState state = load_checkpoint(path);
  if (describe_spec(state.spec) != describe_spec(expected)) {
    throw CheckpointError(CheckpointError::Kind::kSpecMismatch,
                          "checkpoint: descriptor mismatch: file holds '" +
                              describe_spec(state.spec) + "', expected '" +
                              describe_spec(expected) + "'");
  }
  return state;
}

}  // namespace advw
