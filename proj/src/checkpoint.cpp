#include "wsdan/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <set>

namespace wsdan {

namespace {

void put_u32(std::ofstream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::ifstream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw ParseError("checkpoint truncated: " + path);
  return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
         static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
}

void put_f64(std::ofstream& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::ifstream& in, const std::string& path) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw ParseError("checkpoint truncated: " + path);
  uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

void put_blob(std::ofstream& out, const std::string& s) {
  put_u32(out, static_cast<uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_blob(std::ifstream& in, const std::string& path) {
  uint32_t len = get_u32(in, path);
  std::string s(len, '\0');
  if (len && !in.read(s.data(), len)) throw ParseError("checkpoint truncated: " + path);
  return s;
}

}  // namespace

Tensor Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw LookupError("checkpoint: no tensor named '" + name + "'");
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::set<std::string> seen;
  for (const auto& [name, t] : ckpt.tensors) {
    if (!seen.insert(name).second) {
      throw ContractError("checkpoint: duplicate tensor name '" + name + "'");
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("checkpoint: cannot write " + path);
  out.write("WSDC", 4);
  put_u32(out, 1);  // format version
  put_u32(out, ckpt.epoch);
  put_blob(out, ckpt.config_text);
  put_blob(out, ckpt.rng_state);
  put_u32(out, static_cast<uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    put_blob(out, name);
    put_u32(out, 2);
    put_u32(out, static_cast<uint32_t>(t.rows()));
    put_u32(out, static_cast<uint32_t>(t.cols()));
    for (size_t i = 0; i < t.size(); ++i) put_f64(out, t.data()[i]);
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LookupError("checkpoint: cannot open " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "WSDC", 4) != 0) {
    throw ParseError("checkpoint: bad magic in " + path);
  }
  uint32_t version = get_u32(in, path);
  if (version != 1) {
    throw ParseError("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.epoch = get_u32(in, path);
  ckpt.config_text = get_blob(in, path);
  ckpt.rng_state = get_blob(in, path);
  uint32_t count = get_u32(in, path);
  std::set<std::string> seen;
  for (uint32_t i = 0; i < count; ++i) {
    std::string name = get_blob(in, path);
    if (!seen.insert(name).second) {
      throw ParseError("checkpoint: duplicate tensor '" + name + "' in " + path);
    }
    uint32_t rank = get_u32(in, path);
    if (rank != 2) throw ParseError("checkpoint: unsupported rank in " + path);
    uint32_t rows = get_u32(in, path), cols = get_u32(in, path);
    Tensor t = Tensor::zeros(rows, cols);
    for (size_t k = 0; k < t.size(); ++k) t.data()[k] = get_f64(in, path);
    ckpt.tensors.emplace_back(std::move(name), std::move(t));
  }
  return ckpt;
}

}  // namespace wsdan
