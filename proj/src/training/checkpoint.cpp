#include "lsc/training/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>

namespace lsc::training {

static_assert(std::endian::native == std::endian::little, "checkpoint encoding assumes a little-endian host");

namespace {

enum Kind : std::uint8_t { kTensor = 1, kU64 = 2, kF64s = 3, kString = 4 };

class Writer {
 public:
  template <typename V>
  void put(V v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out.insert(out.end(), p, p + sizeof(V));
  }
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out.insert(out.end(), p, p + n);
  }
  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

  template <typename V>
  V get() {
    V v;
    std::memcpy(&v, take(sizeof(V)), sizeof(V));
    return v;
  }
  const std::uint8_t* take(std::size_t n) {
    if (n > size_ - pos_) throw CheckpointError("checkpoint: payload ends inside an entry");
    const auto* p = data_ + pos_;
    pos_ += n;
    return p;
  }
  bool done() const { return pos_ == size_; }

 private:
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

std::uint32_t crc(const std::uint8_t* data, std::size_t n) {
  uLong c = crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    c = crc32(c, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(c);
}

}  // namespace

void Archive::put(const std::string& name, Entry value) {
  if (name.empty()) throw std::invalid_argument("checkpoint: empty entry name");
  entries_.insert_or_assign(name, std::move(value));
}

std::vector<std::uint8_t> Archive::encode() const {
  Writer payload;
  payload.put<std::uint32_t>(static_cast<std::uint32_t>(entries_.size()));
  for (const auto& [name, entry] : entries_) {
    payload.put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    payload.bytes(name.data(), name.size());
    Writer body;
    std::uint8_t kind = 0;
    if (const auto* t = std::get_if<Tensor>(&entry)) {
      kind = kTensor;
      body.put<std::uint32_t>(static_cast<std::uint32_t>(t->rank()));
      for (auto d : t->shape()) body.put<std::uint64_t>(d);
      body.bytes(t->values().data(), t->size() * sizeof(float));
    } else if (const auto* u = std::get_if<std::uint64_t>(&entry)) {
      kind = kU64;
      body.put<std::uint64_t>(*u);
    } else if (const auto* f = std::get_if<std::vector<double>>(&entry)) {
      kind = kF64s;
      body.put<std::uint64_t>(f->size());
      body.bytes(f->data(), f->size() * sizeof(double));
    } else {
      const auto& s = std::get<std::string>(entry);
      kind = kString;
      body.bytes(s.data(), s.size());
    }
    payload.put<std::uint8_t>(kind);
    payload.put<std::uint64_t>(body.out.size());
    payload.bytes(body.out.data(), body.out.size());
  }

  Writer file;
  file.bytes(kCheckpointMagic, sizeof(kCheckpointMagic));
  file.put<std::uint32_t>(kCheckpointVersion);
  file.put<std::uint64_t>(payload.out.size());
  file.bytes(payload.out.data(), payload.out.size());
  file.put<std::uint32_t>(crc(payload.out.data(), payload.out.size()));
  return std::move(file.out);
}

Archive Archive::decode(const std::vector<std::uint8_t>& bytes) {
  constexpr std::size_t header = sizeof(kCheckpointMagic) + 4 + 8;
  if (bytes.size() < header || std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw CheckpointError("checkpoint: not a checkpoint file (bad magic)");
  }
  Reader head(bytes.data() + sizeof(kCheckpointMagic), header - sizeof(kCheckpointMagic));
  const auto version = head.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint: version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  const auto length = head.get<std::uint64_t>();
  if (bytes.size() - header < 4 || length != bytes.size() - header - 4) {
    throw CheckpointError("checkpoint: checksum error (file is truncated or has trailing bytes: " +
                          std::to_string(bytes.size()) + " bytes for a payload of " + std::to_string(length) + ")");
  }
  const std::uint8_t* payload = bytes.data() + header;
  std::uint32_t stored;
  std::memcpy(&stored, payload + length, 4);
  if (crc(payload, length) != stored) throw CheckpointError("checkpoint: checksum error (CRC-32 mismatch)");

  Archive a;
  Reader r(payload, length);
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.get<std::uint32_t>();
    std::string name(reinterpret_cast<const char*>(r.take(name_len)), name_len);
    const auto kind = r.get<std::uint8_t>();
    const auto size = r.get<std::uint64_t>();
    Reader body(r.take(size), size);
    switch (kind) {
      case kTensor: {
        Shape shape(body.get<std::uint32_t>());
        for (auto& d : shape) d = body.get<std::uint64_t>();
        Tensor t(shape);
        std::memcpy(t.values().data(), body.take(t.size() * sizeof(float)), t.size() * sizeof(float));
        a.entries_.emplace(name, std::move(t));
        break;
      }
      case kU64: a.entries_.emplace(name, body.get<std::uint64_t>()); break;
      case kF64s: {
        std::vector<double> v(body.get<std::uint64_t>());
        std::memcpy(v.data(), body.take(v.size() * sizeof(double)), v.size() * sizeof(double));
        a.entries_.emplace(name, std::move(v));
        break;
      }
      case kString: a.entries_.emplace(name, std::string(reinterpret_cast<const char*>(body.take(size)), size)); break;
      default: throw CheckpointError("checkpoint: entry '" + name + "' has unknown kind " + std::to_string(kind));
    }
    if (!body.done()) throw CheckpointError("checkpoint: entry '" + name + "' has trailing bytes");
  }
  if (!r.done()) throw CheckpointError("checkpoint: trailing bytes after the last entry");
  return a;
}

void Archive::save(const std::filesystem::path& path) const {
  const auto bytes = encode();
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("checkpoint: cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("checkpoint: write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Archive Archive::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint: cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode(bytes);
}

}  // namespace lsc::training
