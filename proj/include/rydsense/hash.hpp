#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

namespace rydsense {

class Fnv1a {
 public:
  void update(std::string_view bytes) noexcept {
    for (unsigned char c : bytes) {
      state_ ^= c;
      state_ *= 0x100000001b3ULL;
    }
  }
  void update(double value) noexcept {
    char buf[sizeof(double)];
    std::memcpy(buf, &value, sizeof(double));
    update(std::string_view(buf, sizeof(double)));
  }
  std::uint64_t digest() const noexcept { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::uint64_t fnv1a(std::string_view bytes) noexcept {
  Fnv1a h;
  h.update(bytes);
  return h.digest();
}

std::string hex_digest(std::uint64_t value);

}  // namespace rydsense
