#include "pdac/nn/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

namespace pdac::nn {
namespace {

constexpr char kMagic[4] = {'P', 'D', 'C', 'K'};

template <typename T>
void append_raw(std::string& buf, const T& v) {
  buf.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(const std::string& buf, std::size_t& pos) {
  if (pos + sizeof(T) > buf.size())
    throw IntegrityError("checkpoint: truncated file");
  T v;
  std::memcpy(&v, buf.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

void Checkpoint::save(const std::string& path) const {
  nlohmann::json header;
  header["stage"] = stage;
  header["seed"] = seed;
  header["config"] = config;
  nlohmann::json tlist = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : tensors) {
    tlist.push_back({{"name", name}, {"shape", t.shape}, {"offset", offset}});
    offset += sizeof(float) * t.v.size();
  }
  header["tensors"] = std::move(tlist);
  const std::string hs = header.dump();

  std::string buf;
  buf.append(kMagic, 4);
  append_raw(buf, kVersion);
  append_raw(buf, static_cast<std::uint64_t>(hs.size()));
  buf.append(hs);
  for (const auto& [name, t] : tensors)
    buf.append(reinterpret_cast<const char*>(t.v.data()),
               sizeof(float) * t.v.size());
  const std::uint32_t crc = static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(buf.data()),
            static_cast<uInt>(buf.size())));
  append_raw(buf, crc);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("checkpoint: cannot write " + path);
  f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!f) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot read " + path);
  std::string buf((std::istreambuf_iterator<char>(f)),
                  std::istreambuf_iterator<char>());

  if (buf.size() < 4 + sizeof(std::uint32_t) * 2 + sizeof(std::uint64_t))
    throw IntegrityError("checkpoint: truncated file " + path);
  const std::uint32_t stored_crc = [&] {
    std::uint32_t c;
    std::memcpy(&c, buf.data() + buf.size() - sizeof(c), sizeof(c));
    return c;
  }();
  const std::uint32_t crc = static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(buf.data()),
            static_cast<uInt>(buf.size() - sizeof(std::uint32_t))));
  if (crc != stored_crc)
    throw IntegrityError("checkpoint: checksum mismatch in " + path);

  std::size_t pos = 0;
  if (std::memcmp(buf.data(), kMagic, 4) != 0)
    throw IntegrityError("checkpoint: bad magic in " + path);
  pos = 4;
  const auto version = read_raw<std::uint32_t>(buf, pos);
  if (version != kVersion)
    throw VersionError("checkpoint: unsupported version " +
                       std::to_string(version) + " in " + path);
  const auto hlen = read_raw<std::uint64_t>(buf, pos);
  if (pos + hlen > buf.size())
    throw IntegrityError("checkpoint: truncated header in " + path);
  const nlohmann::json header =
      nlohmann::json::parse(buf.substr(pos, hlen), nullptr, false);
  if (header.is_discarded())
    throw IntegrityError("checkpoint: unparsable header in " + path);
  pos += hlen;

  Checkpoint ck;
  ck.stage = header.value("stage", "");
  ck.seed = header.value("seed", std::int64_t(0));
  ck.config = header.value("config", nlohmann::json::object());
  const std::size_t payload_start = pos;
  for (const auto& te : header.at("tensors")) {
    Tensor t(te.at("shape").get<std::vector<std::int64_t>>());
    const std::size_t off =
        payload_start + te.at("offset").get<std::uint64_t>();
    const std::size_t bytes = sizeof(float) * t.v.size();
    if (off + bytes > buf.size() - sizeof(std::uint32_t))
      throw IntegrityError("checkpoint: tensor data out of range in " + path);
    std::memcpy(t.v.data(), buf.data() + off, bytes);
    ck.tensors.emplace(te.at("name").get<std::string>(), std::move(t));
  }
  return ck;
}

void Checkpoint::put_params(const std::vector<Param*>& params) {
  for (const Param* p : params) tensors[p->name] = p->w;
}

void Checkpoint::get_params(const std::vector<Param*>& params) const {
  for (Param* p : params) {
    const auto it = tensors.find(p->name);
    if (it == tensors.end())
      throw TransferError("checkpoint: missing tensor '" + p->name + "'");
    if (it->second.shape != p->w.shape)
      throw TransferError("checkpoint: shape mismatch for tensor '" + p->name +
                          "'");
    p->w = it->second;
  }
}

std::map<std::string, Tensor> Checkpoint::subtree(
    const std::string& prefix) const {
  std::map<std::string, Tensor> out;
  for (const auto& [name, t] : tensors)
    if (name.rfind(prefix, 0) == 0) out.emplace(name, t);
  return out;
}

}  // namespace pdac::nn
