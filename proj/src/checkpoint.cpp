#include "octnet/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

namespace octnet {
namespace {

void put_u32le(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64le(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

uint32_t get_u32le(const unsigned char* b) {
  return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 | static_cast<uint32_t>(b[2]) << 16 |
         static_cast<uint32_t>(b[3]) << 24;
}

uint64_t get_u64le(const unsigned char* b) {
  uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

void read_exact(std::istream& in, void* dst, size_t n, const std::string& what) {
  in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(in.gcount()) != n) {
    throw CheckpointTruncatedError("checkpoint ends inside " + what + " (wanted " + std::to_string(n) +
                                   " bytes, got " + std::to_string(in.gcount()) + ")");
  }
}

nlohmann::json header_json(const CheckpointInfo& info) {
  nlohmann::json params = nlohmann::json::array();
  for (const auto& [name, shape] : info.params) {
    params.push_back({{"name", name}, {"shape", shape}});
  }
  return {{"arch", info.arch},
          {"width_div", info.width_div},
          {"input_shape", info.input_shape},
          {"params", std::move(params)},
          {"config", info.config},
          {"rng_state", info.rng_state}};
}

CheckpointInfo parse_header(const nlohmann::json& j, uint32_t version) {
  CheckpointInfo info;
  info.version = version;
  try {
    info.arch = j.at("arch").get<std::string>();
    info.width_div = j.at("width_div").get<int>();
    info.input_shape = j.at("input_shape").get<Shape>();
    for (const auto& p : j.at("params")) {
      info.params.emplace_back(p.at("name").get<std::string>(), p.at("shape").get<Shape>());
    }
    info.config = j.value("config", nlohmann::json());
    info.rng_state = j.value("rng_state", uint64_t{0});
  } catch (const nlohmann::json::exception& ex) {
    throw CheckpointError(std::string("malformed checkpoint header: ") + ex.what());
  }
  return info;
}

struct OpenedCheckpoint {
  std::ifstream in;
  CheckpointInfo info;
};

OpenedCheckpoint open_checkpoint(const std::string& path) {
  OpenedCheckpoint oc;
  oc.in.open(path, std::ios::binary);
  if (!oc.in) throw IoError("cannot open checkpoint '" + path + "'");
  unsigned char fixed[16];
  read_exact(oc.in, fixed, sizeof(fixed), "fixed header");
  if (std::memcmp(fixed, kCheckpointMagic, 4) != 0) {
    throw CheckpointError("'" + path + "' is not a checkpoint (bad magic bytes)");
  }
  const uint32_t version = get_u32le(fixed + 4);
  if (version != kCheckpointVersion) {
    throw CheckpointVersionError("checkpoint version " + std::to_string(version) + " unsupported (expected " +
                                 std::to_string(kCheckpointVersion) + ")");
  }
  const uint64_t hlen = get_u64le(fixed + 8);
  if (hlen == 0 || hlen > (1ull << 30)) {
    throw CheckpointError("implausible checkpoint header length " + std::to_string(hlen));
  }
  std::string header(hlen, '\0');
  read_exact(oc.in, header.data(), hlen, "JSON header");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& ex) {
    throw CheckpointError(std::string("cannot parse checkpoint header: ") + ex.what());
  }
  oc.info = parse_header(j, version);
  return oc;
}

}  // namespace

int64_t CheckpointInfo::payload_bytes() const {
  int64_t n = 0;
  for (const auto& [name, shape] : params) n += numel(shape);
  return n * 4;
}

void save_checkpoint(Network<float>& net, ArchId arch, int width_div, const nlohmann::json& config,
                     uint64_t rng_state, const std::string& path) {
  if (!net.finalized()) throw ContractError("cannot checkpoint a network before finalize()");
  CheckpointInfo info;
  info.version = kCheckpointVersion;
  info.arch = arch_name(arch);
  info.width_div = width_div;
  info.input_shape = net.input_shape();
  info.config = config;
  info.rng_state = rng_state;
  auto params = net.params();
  for (const auto& p : params) info.params.emplace_back(p.name, p.value->shape());

  const std::string header = header_json(info).dump();
  std::string prefix;
  prefix.append(kCheckpointMagic, 4);
  put_u32le(prefix, kCheckpointVersion);
  put_u64le(prefix, header.size());

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp + "' for writing");
    out.write(prefix.data(), static_cast<std::streamsize>(prefix.size()));
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    std::string buf;
    for (const auto& p : params) {
      buf.clear();
      buf.reserve(static_cast<size_t>(p.value->size()) * 4);
      for (int64_t i = 0; i < p.value->size(); ++i) {
        uint32_t bits;
        const float v = p.value->data()[i];
        std::memcpy(&bits, &v, 4);
        put_u32le(buf, bits);
      }
      out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    }
    if (!out) throw IoError("failed writing checkpoint '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename '" + tmp + "' to '" + path + "': " + ec.message());
}

CheckpointInfo peek_checkpoint(const std::string& path) { return open_checkpoint(path).info; }

LoadedCheckpoint load_checkpoint(const std::string& path) {
  OpenedCheckpoint oc = open_checkpoint(path);
  LoadedCheckpoint lc;
  lc.info = std::move(oc.info);

  Network<float> net = build_network<float>(arch_from_string(lc.info.arch), lc.info.width_div);
  if (net.input_shape() != lc.info.input_shape) {
    throw CheckpointShapeError("checkpoint input shape " + shape_str(lc.info.input_shape) +
                               " does not match architecture input " + shape_str(net.input_shape()));
  }
  auto params = net.params();
  if (params.size() != lc.info.params.size()) {
    throw CheckpointShapeError("checkpoint declares " + std::to_string(lc.info.params.size()) +
                               " parameters, architecture '" + lc.info.arch + "' has " +
                               std::to_string(params.size()));
  }
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& [name, shape] = lc.info.params[i];
    if (params[i].name != name) {
      throw CheckpointShapeError("checkpoint parameter " + std::to_string(i) + " is '" + name +
                                 "', architecture expects '" + params[i].name + "'");
    }
    if (params[i].value->shape() != shape) {
      throw CheckpointShapeError("parameter '" + name + "' has shape " + shape_str(shape) +
                                 " in checkpoint, architecture expects " +
                                 shape_str(params[i].value->shape()));
    }
  }
  std::vector<unsigned char> buf;
  for (auto& p : params) {
    const size_t bytes = static_cast<size_t>(p.value->size()) * 4;
    buf.resize(bytes);
    read_exact(oc.in, buf.data(), bytes, "parameter '" + p.name + "'");
    for (int64_t i = 0; i < p.value->size(); ++i) {
      const uint32_t bits = get_u32le(buf.data() + static_cast<size_t>(i) * 4);
      float v;
      std::memcpy(&v, &bits, 4);
      p.value->data()[i] = v;
    }
  }
  if (oc.in.peek() != std::char_traits<char>::eof()) {
    throw CheckpointError("checkpoint '" + path + "' has trailing data after the parameter payload");
  }
  lc.net = std::move(net);
  return lc;
}

}  // namespace octnet
