#include "autr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace autr {

// File layout: magic "AUTR", u32 version, length-prefixed config text
// (train config plus iteration/vocab bookkeeping keys), then two tensor
// containers: model parameters and optimizer state. Tensor container:
// u32 count, then per tensor u32 name length, name bytes, u32 rank,
// u32 dims[rank], row-major 32-bit little-endian floats.

namespace {

constexpr char kMagic[4] = {'A', 'U', 'T', 'R'};

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& is, const std::string& what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw CheckpointError("checkpoint: truncated while reading " + what);
  return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
         static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
}

void put_f32(std::ostream& os, const float* data, size_t n) {
  static_assert(sizeof(float) == 4);
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * 4));
  } else {
    for (size_t i = 0; i < n; ++i) {
      uint32_t v;
      std::memcpy(&v, &data[i], 4);
      put_u32(os, v);
    }
  }
}

void get_f32(std::istream& is, float* data, size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    if (!is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * 4)))
      throw CheckpointError("checkpoint: truncated tensor data");
  } else {
    for (size_t i = 0; i < n; ++i) {
      uint32_t v = get_u32(is, "tensor data");
      std::memcpy(&data[i], &v, 4);
    }
  }
}

void put_string(std::ostream& os, const std::string& s) {
  put_u32(os, static_cast<uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& is, const std::string& what) {
  uint32_t len = get_u32(is, what + " length");
  std::string s(len, '\0');
  if (len && !is.read(s.data(), len)) throw CheckpointError("checkpoint: truncated " + what);
  return s;
}

void put_tensor(std::ostream& os, const std::string& name, const Tensor& t) {
  put_string(os, name);
  put_u32(os, static_cast<uint32_t>(t.shape.size()));
  for (int d : t.shape) put_u32(os, static_cast<uint32_t>(d));
  put_f32(os, t.data.data(), t.data.size());
}

std::pair<std::string, Tensor> get_tensor(std::istream& is) {
  std::string name = get_string(is, "tensor name");
  uint32_t rank = get_u32(is, "tensor rank");
  std::vector<int> shape;
  int64_t numel = 1;
  for (uint32_t i = 0; i < rank; ++i) {
    uint32_t d = get_u32(is, "tensor dim");
    shape.push_back(static_cast<int>(d));
    numel *= d;
  }
  Tensor t = Tensor::zeros(shape);
  get_f32(is, t.data.data(), static_cast<size_t>(numel));
  return {std::move(name), std::move(t)};
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw CheckpointError("cannot write checkpoint file: " + path);
  os.write(kMagic, 4);
  put_u32(os, kCheckpointVersion);

  std::string cfg = serialize_config(ckpt.config);
  cfg += "iteration = " + std::to_string(ckpt.iteration) + "\n";
  cfg += "adam_step = " + std::to_string(ckpt.opt.step) + "\n";
  cfg += "vocab_size = " + std::to_string(ckpt.vocab_size) + "\n";
  cfg += "vocab_path = " + ckpt.vocab_path + "\n";
  put_string(os, cfg);

  put_u32(os, static_cast<uint32_t>(ckpt.params.count()));
  for (int i = 0; i < ckpt.params.count(); ++i)
    put_tensor(os, ckpt.params.names[static_cast<size_t>(i)], ckpt.params.tensors[static_cast<size_t>(i)]);

  put_u32(os, static_cast<uint32_t>(2 * ckpt.params.count() + 1));
  for (int i = 0; i < ckpt.params.count(); ++i)
    put_tensor(os, "m." + ckpt.params.names[static_cast<size_t>(i)], ckpt.opt.m[static_cast<size_t>(i)]);
  for (int i = 0; i < ckpt.params.count(); ++i)
    put_tensor(os, "v." + ckpt.params.names[static_cast<size_t>(i)], ckpt.opt.v[static_cast<size_t>(i)]);
  // exact counter lives in the config block; this slot keeps the container uniform
  Tensor step = Tensor::scalar(static_cast<float>(ckpt.opt.step));
  put_tensor(os, "step", step);

  if (!os) throw CheckpointError("write failed for checkpoint file: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot read checkpoint file: " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw CheckpointError(path + ": not a checkpoint file (bad magic)");
  uint32_t version = get_u32(is, "version");
  if (version != kCheckpointVersion)
    throw CheckpointError(path + ": unsupported checkpoint version " + std::to_string(version));

  Checkpoint ckpt;
  std::string cfg_text = get_string(is, "config block");
  // bookkeeping keys ride along in the config text
  std::string cfg_only, line;
  std::istringstream cs(cfg_text);
  while (std::getline(cs, line)) {
    auto starts = [&](const char* k) { return line.rfind(k, 0) == 0; };
    if (starts("iteration = "))
      ckpt.iteration = std::stoll(line.substr(12));
    else if (starts("adam_step = "))
      ckpt.opt.step = std::stoll(line.substr(12));
    else if (starts("vocab_size = "))
      ckpt.vocab_size = std::stoi(line.substr(13));
    else if (starts("vocab_path = "))
      ckpt.vocab_path = line.substr(13);
    else
      cfg_only += line + "\n";
  }
  ckpt.config = parse_config_text(cfg_only, path + ":config");

  uint32_t n_params = get_u32(is, "parameter count");
  for (uint32_t i = 0; i < n_params; ++i) {
    auto [name, t] = get_tensor(is);
    ckpt.params.add(name, std::move(t));
  }

  ckpt.opt.m.resize(static_cast<size_t>(ckpt.params.count()));
  ckpt.opt.v.resize(static_cast<size_t>(ckpt.params.count()));
  uint32_t n_opt = get_u32(is, "optimizer tensor count");
  for (uint32_t i = 0; i < n_opt; ++i) {
    auto [name, t] = get_tensor(is);
    if (name == "step") continue;  // authoritative copy lives in the config block
    bool is_m = name.rfind("m.", 0) == 0;
    bool is_v = name.rfind("v.", 0) == 0;
    if (!is_m && !is_v) throw CheckpointError(path + ": unexpected optimizer tensor " + name);
    int idx = ckpt.params.idx(name.substr(2));
    (is_m ? ckpt.opt.m : ckpt.opt.v)[static_cast<size_t>(idx)] = std::move(t);
  }
  return ckpt;
}

}  // namespace autr
