#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace pearl {

// Error taxonomy. Every user-facing failure maps onto one of these so the
// CLI can emit a stable machine-parseable code.
struct Error : std::runtime_error {
  Error(std::string code, const std::string& msg)
      : std::runtime_error(msg), code(std::move(code)) {}
  std::string code;
};

struct ValidationError : Error {
  explicit ValidationError(const std::string& msg) : Error("validation", msg) {}
};

struct DimensionError : Error {
  explicit DimensionError(const std::string& msg) : Error("dimension", msg) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error("config", msg) {}
};

struct IoError : Error {
  explicit IoError(const std::string& msg) : Error("io", msg) {}
};

// Thrown on an exact-match lookup miss in an embedding table; carries the key.
struct MissingEmbeddingError : Error {
  MissingEmbeddingError(const std::string& encoder, std::string key)
      : Error("missing-embedding",
              "no embedding for key '" + key + "' in encoder '" + encoder + "'"),
        key(std::move(key)) {}
  std::string key;
};

// Kendall correlations are undefined on all-tied input.
struct UndefinedCorrelationError : Error {
  explicit UndefinedCorrelationError(const std::string& msg)
      : Error("undefined-correlation", msg) {}
};

// All randomness fans out from one master seed. Module seeds are derived by
// hashing a string tag, so adding or removing unrelated components never
// shifts another component's random stream.
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derived_seed(std::uint64_t master, const std::string& tag) {
  return splitmix64(master ^ fnv1a64(tag));
}

}  // namespace pearl
