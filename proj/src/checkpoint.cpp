#include "vln/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vln/errors.hpp"

namespace vln {
namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

class Reader {
 public:
  explicit Reader(std::string_view b) : bytes_(b) {}

  std::uint64_t uint(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(width);
    return v;
  }
  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw IoError("truncated checkpoint");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

const Tensor* Checkpoint::find(std::string_view name) const {
  for (const auto& r : records) {
    if (r.name == name) return &r.tensor;
  }
  return nullptr;
}

const Tensor& Checkpoint::at(std::string_view name) const {
  if (const Tensor* t = find(name)) return *t;
  throw LookupError("checkpoint has no record '" + std::string(name) + "'");
}

void Checkpoint::add(std::string name, const Tensor& t) {
  Tensor copy(t.shape, t.data);
  records.push_back({std::move(name), std::move(copy)});
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  out.push_back(static_cast<char>(kCheckpointVersion));
  out.push_back(static_cast<char>(ckpt.tag));
  put_u32(out, static_cast<std::uint32_t>(ckpt.records.size()));
  for (const auto& r : ckpt.records) {
    put_u32(out, static_cast<std::uint32_t>(r.name.size()));
    out += r.name;
    put_u32(out, static_cast<std::uint32_t>(r.tensor.shape.size()));
    for (std::size_t d : r.tensor.shape) put_u64(out, d);
    for (double v : r.tensor.data) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  Reader in(bytes);
  if (in.take(sizeof(kCheckpointMagic)) != std::string_view(kCheckpointMagic, sizeof(kCheckpointMagic))) {
    throw IoError("not a checkpoint (bad magic)");
  }
  const auto version = static_cast<std::uint8_t>(in.uint(1));
  if (version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.tag = static_cast<std::uint8_t>(in.uint(1));
  const auto count = in.uint(4);
  for (std::uint64_t k = 0; k < count; ++k) {
    CheckpointRecord rec;
    rec.name = std::string(in.take(in.uint(4)));
    const auto rank = in.uint(4);
    Shape shape(rank);
    for (auto& d : shape) d = in.uint(8);
    std::vector<double> data(numel(shape));
    for (double& v : data) v = std::bit_cast<double>(in.uint(8));
    rec.tensor = Tensor(std::move(shape), std::move(data));
    ckpt.records.push_back(std::move(rec));
  }
  if (!in.done()) throw IoError("trailing bytes after checkpoint records");
  return ckpt;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view bytes) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write '" + path + "'");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed for '" + path + "'");
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(read_file(path)); }

}  // namespace vln
