#include "segcolor/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace segcolor {

namespace {
constexpr char kMagic[4] = {'S', 'G', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

using nlohmann::json;

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  json header;
  header["config"] = config_to_map(checkpoint.config);
  header["epoch"] = checkpoint.epoch;
  header["rng_state"] = checkpoint.rng_state;
  header["variant"] = checkpoint.variant();
  json tensors = json::array();
  for (const auto& [name, tensor] : checkpoint.tensors) {
    tensors.push_back({{"name", name}, {"shape", tensor.shape}});
  }
  header["tensors"] = tensors;
  const std::string header_str = header.dump();

  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw std::runtime_error("cannot write checkpoint: " + tmp.string());
    }
    out.write(kMagic, 4);
    out.write(reinterpret_cast<const char*>(&kVersion), sizeof(kVersion));
    const std::uint64_t header_len = header_str.size();
    out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    for (const auto& [name, tensor] : checkpoint.tensors) {
      out.write(reinterpret_cast<const char*>(tensor.data.data()),
                static_cast<std::streamsize>(tensor.data.size() * sizeof(double)));
    }
    if (!out) {
      throw std::runtime_error("short write on checkpoint: " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot read checkpoint: " + path.string());
  }
  char magic[4];
  std::uint32_t version = 0;
  std::uint64_t header_len = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("not a checkpoint file: " + path.string());
  }
  if (version != kVersion) {
    throw std::runtime_error("unsupported checkpoint version in " + path.string());
  }
  std::string header_str(header_len, '\0');
  in.read(header_str.data(), static_cast<std::streamsize>(header_len));
  if (!in) {
    throw std::runtime_error("truncated checkpoint header: " + path.string());
  }
  json header = json::parse(header_str);

  Checkpoint checkpoint;
  checkpoint.config = config_from_map(header.at("config").get<std::map<std::string, std::string>>());
  checkpoint.epoch = header.at("epoch").get<int>();
  checkpoint.rng_state = header.at("rng_state").get<std::string>();
  for (const auto& t : header.at("tensors")) {
    nn::Tensor tensor(t.at("shape").get<std::vector<int>>());
    in.read(reinterpret_cast<char*>(tensor.data.data()),
            static_cast<std::streamsize>(tensor.data.size() * sizeof(double)));
    if (!in) {
      throw std::runtime_error("truncated checkpoint tensors: " + path.string());
    }
    checkpoint.tensors.emplace_back(t.at("name").get<std::string>(), std::move(tensor));
  }
  return checkpoint;
}

}  // namespace segcolor
