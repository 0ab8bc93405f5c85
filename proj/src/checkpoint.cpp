#include <cstring>
#include <fstream>

#include "fragflow/nets.hpp"

namespace fragflow::neural {

namespace {

constexpr char kMagic[4] = {'F', 'F', 'C', 'P'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = (v >> (8 * i)) & 0xff;
  out.write(reinterpret_cast<char*>(b), 4);
}

void write_u64(std::ostream& out, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = (v >> (8 * i)) & 0xff;
  out.write(reinterpret_cast<char*>(b), 8);
}

uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

void write_f32(std::ostream& out, float f) {
  uint32_t v;
  std::memcpy(&v, &f, 4);
  write_u32(out, v);
}

float read_f32(std::istream& in) {
  uint32_t v = read_u32(in);
  float f;
  std::memcpy(&f, &v, 4);
  return f;
}

}  // namespace

void Checkpoint::put(const std::string& name, const Tensor& t) {
  names.push_back(name);
  arrays.push_back(t);
}

const Tensor* Checkpoint::find(const std::string& name) const {
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return &arrays[i];
  return nullptr;
}

void Checkpoint::put_params(const ParamStore& ps, const std::string& prefix) {
  for (size_t i = 0; i < ps.values.size(); ++i)
    put(prefix + ps.names[i], ps.values[i]);
}

void Checkpoint::read_params(ParamStore& ps, const std::string& prefix) const {
  for (size_t i = 0; i < ps.values.size(); ++i) {
    const Tensor* t = find(prefix + ps.names[i]);
    if (!t)
      throw CheckpointError(CheckpointError::Kind::Io,
                            "checkpoint missing array " + prefix + ps.names[i]);
    if (t->rows != ps.values[i].rows || t->cols != ps.values[i].cols)
      throw CheckpointError(CheckpointError::Kind::Io,
                            "checkpoint shape mismatch for " + ps.names[i]);
    ps.values[i] = *t;
  }
}

void Checkpoint::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError(CheckpointError::Kind::Io, "cannot write " + path);
  out.write(kMagic, 4);
  write_u32(out, kVersion);
  write_u64(out, config_digest);
  write_u64(out, vocab_digest);
  write_u32(out, static_cast<uint32_t>(names.size()));
  for (size_t i = 0; i < names.size(); ++i) {
    write_u32(out, static_cast<uint32_t>(names[i].size()));
    out.write(names[i].data(), static_cast<std::streamsize>(names[i].size()));
    write_u32(out, static_cast<uint32_t>(arrays[i].rows));
    write_u32(out, static_cast<uint32_t>(arrays[i].cols));
    for (double v : arrays[i].data) write_f32(out, static_cast<float>(v));
  }
  if (!out) throw CheckpointError(CheckpointError::Kind::Io, "write failed " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointError::Kind::Io, "cannot read " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw CheckpointError(CheckpointError::Kind::Io, "not a checkpoint: " + path);
  Checkpoint ck;
  ck.version = read_u32(in);
  if (ck.version != kVersion)
    throw CheckpointError(CheckpointError::Kind::VersionMismatch,
                          "checkpoint version " + std::to_string(ck.version) +
                              " unsupported");
  ck.config_digest = read_u64(in);
  ck.vocab_digest = read_u64(in);
  uint32_t count = read_u32(in);
  for (uint32_t i = 0; i < count; ++i) {
    uint32_t len = read_u32(in);
    std::string name(len, '\0');
    in.read(name.data(), len);
    uint32_t rows = read_u32(in);
    uint32_t cols = read_u32(in);
    Tensor t(static_cast<int>(rows), static_cast<int>(cols));
    for (auto& v : t.data) v = static_cast<double>(read_f32(in));
    if (!in) throw CheckpointError(CheckpointError::Kind::Io, "truncated " + path);
    ck.names.push_back(std::move(name));
    ck.arrays.push_back(std::move(t));
  }
  return ck;
}

}  // namespace fragflow::neural
