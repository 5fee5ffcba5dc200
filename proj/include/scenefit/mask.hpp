#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace scenefit {

/// Row-major binary segmentation mask; dimensions always match the scene's
/// depth map.
struct InstanceMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;  // 0/1 per pixel

  InstanceMask() = default;
  InstanceMask(int w, int h)
      : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

  std::size_t idx(int u, int v) const { return static_cast<std::size_t>(v) * width + u; }

  std::size_t count() const {
    std::size_t n = 0;
    for (std::uint8_t b : bits) n += (b != 0);
    return n;
  }
};

}  // namespace scenefit
