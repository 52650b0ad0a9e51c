#pragma once

#include <algorithm>
#include <cstdint>
#include <type_traits>
#include <vector>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "lsc/gan/losses.hpp"
#include "lsc/gan/models.hpp"
#include "lsc/numerics/adam.hpp"
#include "lsc/sampler/batch.hpp"

namespace lsc::training {

/// Rows of the ablation table. Baseline is the single-image minimax GAN whose
/// generator ignores codes; A/B/C/full use the coupled discriminator.
enum class Prototype { baseline, A, B, C, full };

std::string to_string(Prototype p);
Prototype parse_prototype(const std::string& s);

/// Loss gating of each coupled prototype applied on top of `base` weights.
gan::LossWeights weights_for(Prototype p, const gan::LossWeights& base = {});

/// Configuration problems carry the dotted path of the offending field.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string path, const std::string& message)
      : std::invalid_argument(path + ": " + message), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// Reads fields of one JSON object, leaving defaults for absent keys. Every
/// key read is remembered so finish() can reject unknown ones.
class ObjectReader {
 public:
  ObjectReader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "expected an object");
  }

  std::string field(const std::string& key) const { return path_ + "." + key; }
  bool has(const std::string& key) const { return j_.contains(key); }

  template <typename V>
  void read(const std::string& key, V& out) {
    seen_.push_back(key);
    if (!j_.contains(key)) return;
    out = convert<V>(j_.at(key), field(key));
  }

  /// Sub-object, or an empty object when absent.
  ObjectReader child(const std::string& key) {
    seen_.push_back(key);
    static const nlohmann::json empty = nlohmann::json::object();
    return ObjectReader(j_.contains(key) ? j_.at(key) : empty, field(key));
  }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (std::find(seen_.begin(), seen_.end(), key) == seen_.end()) throw ConfigError(field(key), "unknown key");
    }
  }

  template <typename V>
  static V convert(const nlohmann::json& v, const std::string& where) {
    if constexpr (std::is_same_v<V, bool>) {
      if (!v.is_boolean()) throw ConfigError(where, "expected a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_integral_v<V>) {
      if (!v.is_number_integer()) throw ConfigError(where, "expected a non-negative integer");
      if (!v.is_number_unsigned() && v.get<std::int64_t>() < 0) throw ConfigError(where, "must be non-negative");
      return static_cast<V>(v.get<std::uint64_t>());
    } else if constexpr (std::is_floating_point_v<V>) {
      if (!v.is_number()) throw ConfigError(where, "expected a number");
      return v.get<V>();
    } else if constexpr (std::is_same_v<V, std::string>) {
      if (!v.is_string()) throw ConfigError(where, "expected a string");
      return v.get<std::string>();
    } else {
      if (!v.is_array()) throw ConfigError(where, "expected an array");
      V out;
      for (std::size_t i = 0; i < v.size(); ++i) {
        out.push_back(convert<typename V::value_type>(v[i], where + "[" + std::to_string(i) + "]"));
      }
      return out;
    }
  }

 private:
  const nlohmann::json& j_;
  std::string path_;
  std::vector<std::string> seen_;
};

struct TrainConfig {
  std::size_t n_iter = 3000;
  std::size_t n = 1;  // generator iterations per discriminator iteration
  std::size_t batch = 32;
  Prototype prototype = Prototype::full;
  gan::LossWeights weights;
  std::uint64_t seed = 1;
  AdamConfig gen_adam;
  AdamConfig disc_adam;
  std::size_t eval_every = 100;
  bool swap_schedule = false;  // update D every iteration and G every n-th instead
  sampler::Neighborhood neighborhood = sampler::Neighborhood::batch;
  std::size_t noise_dim = 16;
  std::vector<std::size_t> gen_hidden{128, 128};
  std::size_t disc_conv1 = 16;
  std::size_t disc_conv2 = 32;
  std::size_t disc_hidden = 64;
  bool spectral_norm = true;

  /// Throws ConfigError on the first violated invariant.
  void validate() const;

  /// Effective loss weights after prototype gating.
  gan::LossWeights effective_weights() const { return weights_for(prototype, weights); }

  gan::GeneratorArch generator_arch(std::size_t code_dim, const Shape& image) const;
  gan::DiscriminatorArch discriminator_arch(const Shape& image) const;
};

/// Tree form with every field present; from_json starts from defaults,
/// rejects unknown keys and reports type or range errors with field paths.
nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j, const std::string& path = "train");

}  // namespace lsc::training
