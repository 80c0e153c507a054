#pragma once

#include <cstdint>
#include <vector>

#include "domdepth/error.hpp"

namespace domdepth {

/// Dense intensity image, row-major, channel-interleaved, values in [0,1].
struct ImageBuffer {
    int height = 0;
    int width = 0;
    int channels = 1;  // 1 or 3
    std::vector<double> data;

    ImageBuffer() = default;
    ImageBuffer(int h, int w, int c, double fill = 0.0)
        : height(h), width(w), channels(c),
          data(static_cast<size_t>(h) * w * c, fill) {}

    double& at(int y, int x, int c) {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    double at(int y, int x, int c) const {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    size_t pixel_count() const { return static_cast<size_t>(height) * width; }
    bool same_shape(const ImageBuffer& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }

    void validate() const;
};

/// Per-pixel metric depth with validity flags. Valid pixels carry finite depth > 0.
struct DepthMap {
    int height = 0;
    int width = 0;
    std::vector<double> depth;
    std::vector<std::uint8_t> valid;

    DepthMap() = default;
    DepthMap(int h, int w, double fill = 0.0, bool is_valid = false)
        : height(h), width(w),
          depth(static_cast<size_t>(h) * w, fill),
          valid(static_cast<size_t>(h) * w, is_valid ? 1 : 0) {}

    static DepthMap constant(int h, int w, double d) { return DepthMap(h, w, d, true); }

    double& at(int y, int x) { return depth[static_cast<size_t>(y) * width + x]; }
    double at(int y, int x) const { return depth[static_cast<size_t>(y) * width + x]; }
    bool is_valid(int y, int x) const { return valid[static_cast<size_t>(y) * width + x] != 0; }
    void set(int y, int x, double d) {
        depth[static_cast<size_t>(y) * width + x] = d;
        valid[static_cast<size_t>(y) * width + x] = 1;
    }
    size_t pixel_count() const { return static_cast<size_t>(height) * width; }

    void validate() const;
};

/// Boolean per-pixel map (masks: dynamic objects, occlusion, validity).
struct Mask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> data;

    Mask() = default;
    Mask(int h, int w, bool fill = false)
        : height(h), width(w), data(static_cast<size_t>(h) * w, fill ? 1 : 0) {}

    bool at(int y, int x) const { return data[static_cast<size_t>(y) * width + x] != 0; }
    void set(int y, int x, bool v) { data[static_cast<size_t>(y) * width + x] = v ? 1 : 0; }
    size_t pixel_count() const { return static_cast<size_t>(height) * width; }
    size_t count() const;

    Mask operator~() const;
};

}  // namespace domdepth
