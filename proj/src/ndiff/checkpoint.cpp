#include "nggan/ndiff/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "common/bytes.hpp"
#include "nggan/error.hpp"

namespace nggan::nd {

using detail::get_le;
using detail::put_le;

namespace {

constexpr char kMagic[4] = {'N', 'G', 'C', 'K'};

class Reader {
 public:
  explicit Reader(std::span<const unsigned char> bytes) : bytes_(bytes) {}

  const unsigned char* take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("checkpoint truncated while reading ") + what + ": need " +
                        std::to_string(n) + " bytes at offset " + std::to_string(pos_) + ", file has " +
                        std::to_string(bytes_.size()));
    }
    const unsigned char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  template <typename U>
  U read(const char* what) {
    return get_le<U>(take(sizeof(U), what));
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const unsigned char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

const Blob* CheckpointFile::find(const std::string& name) const {
  for (const auto& b : blobs)
    if (b.name == name) return &b;
  return nullptr;
}

std::vector<unsigned char> encode_checkpoint(const CheckpointFile& file) {
  std::vector<unsigned char> out(kMagic, kMagic + 4);
  out.push_back(kCheckpointVersion);
  put_le(out, static_cast<std::uint32_t>(file.meta.size()));
  out.insert(out.end(), file.meta.begin(), file.meta.end());
  put_le(out, static_cast<std::uint32_t>(file.blobs.size()));
  for (const auto& b : file.blobs) {
    if (b.name.size() > 0xFFFF) throw InvalidArgument("checkpoint blob name too long: " + b.name);
    if (b.dims.size() > 0xFF) throw InvalidArgument("checkpoint blob rank too large: " + b.name);
    std::size_t count = 1;
    for (auto d : b.dims) count *= d;
    if (count != b.data.size()) throw ShapeError("checkpoint blob " + b.name + ": dims do not match data size");
    put_le(out, static_cast<std::uint16_t>(b.name.size()));
    out.insert(out.end(), b.name.begin(), b.name.end());
    out.push_back(static_cast<unsigned char>(b.dims.size()));
    for (auto d : b.dims) put_le(out, d);
    for (float x : b.data) put_le(out, std::bit_cast<std::uint32_t>(x));
  }
  return out;
}

CheckpointFile decode_checkpoint(std::span<const unsigned char> bytes) {
  Reader r(bytes);
  const unsigned char* magic = r.take(4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("not a checkpoint file (bad magic)");
  const auto version = r.read<std::uint8_t>("version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  CheckpointFile file;
  const auto meta_len = r.read<std::uint32_t>("metadata length");
  const unsigned char* meta = r.take(meta_len, "metadata");
  file.meta.assign(reinterpret_cast<const char*>(meta), meta_len);
  const auto n_blobs = r.read<std::uint32_t>("blob count");
  for (std::uint32_t i = 0; i < n_blobs; ++i) {
    Blob b;
    const auto name_len = r.read<std::uint16_t>("blob name length");
    const unsigned char* name = r.take(name_len, "blob name");
    b.name.assign(reinterpret_cast<const char*>(name), name_len);
    const auto rank = r.read<std::uint8_t>("blob rank");
    std::size_t count = 1;
    for (std::uint8_t k = 0; k < rank; ++k) {
      b.dims.push_back(r.read<std::uint32_t>("blob dims"));
      count *= b.dims.back();
    }
    const unsigned char* p = r.take(count * 4, "blob data");
    b.data.resize(count);
    for (std::size_t j = 0; j < count; ++j) b.data[j] = std::bit_cast<float>(get_le<std::uint32_t>(p + 4 * j));
    file.blobs.push_back(std::move(b));
  }
  if (!r.done()) throw FormatError("checkpoint has trailing bytes");
  return file;
}

void save_checkpoint(const CheckpointFile& file, const std::filesystem::path& path) {
  detail::write_file(path, encode_checkpoint(file));
}

CheckpointFile load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(detail::read_file(path));
}

}  // namespace nggan::nd
