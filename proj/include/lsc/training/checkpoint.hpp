#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "lsc/numerics/tensor.hpp"

namespace lsc::training {

inline constexpr char kCheckpointMagic[8] = {'L', 'S', 'C', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Named entries of a checkpoint: float32 tensors, u64 scalars, f64 arrays and
/// strings. Serialized in name order, so equal archives give identical bytes.
class Archive {
 public:
  using Entry = std::variant<Tensor, std::uint64_t, std::vector<double>, std::string>;

  void put(const std::string& name, Entry value);
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  const std::map<std::string, Entry>& entries() const noexcept { return entries_; }

  const Tensor& tensor(const std::string& name) const { return get<Tensor>(name); }
  std::uint64_t u64(const std::string& name) const { return get<std::uint64_t>(name); }
  const std::vector<double>& f64s(const std::string& name) const { return get<std::vector<double>>(name); }
  const std::string& str(const std::string& name) const { return get<std::string>(name); }

  /// Complete file image: magic, version, payload length, payload, CRC-32.
  std::vector<std::uint8_t> encode() const;
  /// Validates everything before returning; nothing is returned on failure.
  static Archive decode(const std::vector<std::uint8_t>& bytes);

  void save(const std::filesystem::path& path) const;
  static Archive load(const std::filesystem::path& path);

  friend bool operator==(const Archive&, const Archive&) = default;

 private:
  template <typename V>
  const V& get(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw CheckpointError("checkpoint: missing entry '" + name + "'");
    if (!std::holds_alternative<V>(it->second)) throw CheckpointError("checkpoint: entry '" + name + "' has wrong kind");
    return std::get<V>(it->second);
  }

  std::map<std::string, Entry> entries_;
};

}  // namespace lsc::training
