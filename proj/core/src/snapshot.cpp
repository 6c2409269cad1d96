#include "geocon/snapshot.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace geocon {
namespace {

constexpr char kMagic[9] = "GCSNAP01";

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const std::string& in, std::size_t pos) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  return v;
}

}  // namespace

void ParamSet::add(std::string name, Tensor value) {
  if (contains(name)) throw Error("duplicate parameter name '" + name + "'");
  entries_.emplace_back(std::move(name), std::move(value));
}

bool ParamSet::contains(const std::string& name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return true;
  }
  return false;
}

const Tensor& ParamSet::at(const std::string& name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return t;
  }
  throw Error("unknown parameter '" + name + "'");
}

Tensor& ParamSet::at(const std::string& name) {
  return const_cast<Tensor&>(std::as_const(*this).at(name));
}

std::size_t ParamSet::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) n += t.size();
  return n;
}

std::string encode_snapshot(const ParamSet& params) {
  nlohmann::json manifest;
  manifest["tensors"] = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& [name, t] : params) {
    manifest["tensors"].push_back(
        {{"name", name}, {"shape", t.shape()}, {"offset", offset}, {"count", t.size()}});
    offset += t.size();
  }
  const std::string text = manifest.dump();

  std::string out(kMagic, 8);
  put_u64(out, text.size());
  out += text;
  out.reserve(out.size() + offset * 8);
  for (const auto& [name, t] : params) {
    for (double v : t.values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

ParamSet decode_snapshot(const std::string& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw Error("not a parameter snapshot (bad magic)");
  }
  const std::uint64_t len = get_u64(bytes, 8);
  if (16 + len > bytes.size()) throw Error("truncated snapshot manifest");
  const auto manifest = nlohmann::json::parse(bytes.substr(16, len));
  const std::size_t payload = 16 + len;

  ParamSet params;
  for (const auto& entry : manifest.at("tensors")) {
    Shape shape = entry.at("shape").get<Shape>();
    const std::size_t offset = entry.at("offset").get<std::size_t>();
    const std::size_t count = entry.at("count").get<std::size_t>();
    if (payload + (offset + count) * 8 > bytes.size()) throw Error("truncated snapshot payload");
    std::vector<double> data(count);
    for (std::size_t i = 0; i < count; ++i) {
      data[i] = std::bit_cast<double>(get_u64(bytes, payload + (offset + i) * 8));
    }
    params.add(entry.at("name").get<std::string>(), Tensor(std::move(shape), std::move(data)));
  }
  return params;
}

void save_snapshot(const ParamSet& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write snapshot " + path.string());
  const std::string bytes = encode_snapshot(params);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

ParamSet load_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read snapshot " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_snapshot(ss.str());
}

}  // namespace geocon
