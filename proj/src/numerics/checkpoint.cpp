#include "tokenmixup/numerics/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace tkmx::inline TKMX_ABI {

namespace {

constexpr char kMagic[4] = {'T', 'K', 'M', 'X'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  bool done() const { return pos_ == bytes_.size(); }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  float f32() { return std::bit_cast<float>(u32()); }

  std::string str(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw IoError("checkpoint truncated at byte " + std::to_string(pos_));
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const NamedTensors& tensors) {
  std::string out(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  for (const auto& [name, t] : tensors) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.dims()) put_u32(out, static_cast<std::uint32_t>(d));
    for (auto v : t.storage()) put_f32(out, static_cast<float>(v));
  }
  return out;
}

NamedTensors decode_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.str(4) != std::string(kMagic, 4)) throw IoError("not a checkpoint: bad magic");
  const auto version = r.u32();
  if (version != kCheckpointVersion) throw IoError("unsupported checkpoint version " + std::to_string(version));
  NamedTensors out;
  while (!r.done()) {
    std::string name = r.str(r.u32());
    const auto rank = r.u32();
    Dims dims(rank);
    for (auto& d : dims) d = r.u32();
    std::vector<Scalar> data(dims_product(dims));
    for (auto& v : data) v = static_cast<Scalar>(r.f32());
    out.emplace_back(std::move(name), Tensor(std::move(dims), std::move(data)));
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& params) {
  NamedTensors tensors;
  for (const Parameter* p : params.all()) tensors.emplace_back(p->name, p->value);
  const std::string bytes = encode_checkpoint(tensors);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path.string());
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("failed writing checkpoint: " + path.string());
}

NamedTensors read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  try {
    return decode_checkpoint(ss.str());
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void load_checkpoint(const std::filesystem::path& path, ParameterStore& params) {
  for (auto& [name, t] : read_checkpoint(path)) {
    Parameter* p = params.find(name);
    if (!p) throw IoError(path.string() + ": unknown parameter '" + name + "'");
    if (!p->value.same_shape(t)) {
      throw IoError(path.string() + ": shape mismatch for '" + name + "': " + dims_to_string(t.dims()) +
                    " vs " + dims_to_string(p->value.dims()));
    }
    p->value = std::move(t);
  }
}

}  // namespace tkmx::inline TKMX_ABI
