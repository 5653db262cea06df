#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace depai::detail {

// 64-bit FNV-1a. Stable across platforms, used for checksums and fingerprints.
class Fnv1a64 {
 public:
  void update(std::string_view bytes) noexcept {
    for (unsigned char c : bytes) {
      state_ ^= c;
      state_ *= 0x100000001b3ULL;
    }
  }
  // Length-prefixed.
  void field(std::string_view bytes) {
    update(std::to_string(bytes.size()));
    update(":");
    update(bytes);
  }
  std::uint64_t value() const noexcept { return state_; }
  std::string hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(state_));
    return buf;
  }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::string fnv1a64_hex(std::string_view bytes) {
  Fnv1a64 h;
  h.update(bytes);
  return h.hex();
}

}  // namespace depai::detail
