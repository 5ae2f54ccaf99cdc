#include "synctl/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace synctl {

using nlohmann::json;

void save_checkpoint(const std::string& path, const ParameterSet& params,
                     const json& meta) {
  json header;
  header["version"] = 1;
  header["step"] = params.step();
  header["meta"] = meta;
  json tensors = json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : params) {
    tensors.push_back({{"name", name},
                       {"rows", t.rows()},
                       {"cols", t.cols()},
                       {"offset", offset}});
    offset += t.size() * sizeof(double);
  }
  header["tensors"] = std::move(tensors);
  const std::string hs = header.dump();

  std::ofstream out(path, std::ios::binary);
  require(out.good(), "CheckpointIo", "cannot open " + path + " for writing");
  out.write(kCheckpointMagic, 8);
  const std::uint64_t hlen = hs.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const auto& [name, t] : params)
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
  require(out.good(), "CheckpointIo", "short write to " + path);
}

ParameterSet load_checkpoint(const std::string& path, json* meta) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "CheckpointIo", "cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  require(in.good() && std::memcmp(magic, kCheckpointMagic, 8) == 0,
          "IncompatibleCheckpoint", "bad magic in " + path);
  std::uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  require(in.good(), "IncompatibleCheckpoint", "truncated header in " + path);
  std::string hs(hlen, '\0');
  in.read(hs.data(), static_cast<std::streamsize>(hlen));
  require(in.good(), "IncompatibleCheckpoint", "truncated header in " + path);

  json header = json::parse(hs, nullptr, false);
  require(!header.is_discarded() && header.value("version", 0) == 1,
          "IncompatibleCheckpoint", "unsupported header in " + path);
  if (meta) *meta = header.value("meta", json::object());

  ParameterSet ps;
  ps.set_step(header.value("step", std::int64_t{0}));
  for (const auto& entry : header.at("tensors")) {
    const auto name = entry.at("name").get<std::string>();
    const int rows = entry.at("rows").get<int>();
    const int cols = entry.at("cols").get<int>();
    Tensor t(rows, cols);
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    require(in.good(), "IncompatibleCheckpoint", "truncated payload in " + path);
    ps.add(name, std::move(t));
  }
  return ps;
}

}  // namespace synctl
