#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace rainfill {

inline constexpr double kMissing = -1.0;

/// Frame count and latitude/longitude extents of a regular global grid.
/// Rows run from the south pole (phi = -pi/2) to the north pole, columns from
/// lambda = -pi to +pi, both endpoints inclusive.
struct GridSpec {
    int64_t frames = 3;  // L
    int64_t rows = 16;   // H
    int64_t cols = 32;   // W

    int64_t plane() const { return rows * cols; }
    int64_t volume() const { return frames * rows * cols; }
    double latitude(int64_t h) const;
    double longitude(int64_t w) const;
    bool operator==(const GridSpec&) const = default;
};

/// (L, H, W) field; values in [0, 1] where observed, kMissing elsewhere.
struct FieldVolume {
    GridSpec grid;
    std::vector<double> values;

    FieldVolume() = default;
    explicit FieldVolume(GridSpec g, double fill = 0.0)
        : grid(g), values(static_cast<size_t>(g.volume()), fill) {}
    FieldVolume(GridSpec g, std::vector<double> v);

    double& at(int64_t l, int64_t h, int64_t w) { return values[static_cast<size_t>((l * grid.rows + h) * grid.cols + w)]; }
    double at(int64_t l, int64_t h, int64_t w) const {
        return values[static_cast<size_t>((l * grid.rows + h) * grid.cols + w)];
    }
    std::span<double> frame(int64_t l) { return std::span(values).subspan(l * grid.plane(), grid.plane()); }
    std::span<const double> frame(int64_t l) const {
        return std::span(values).subspan(l * grid.plane(), grid.plane());
    }
};

/// (L, H, W) observation mask; 1 = observed.
struct MaskVolume {
    GridSpec grid;
    std::vector<uint8_t> values;

    MaskVolume() = default;
    explicit MaskVolume(GridSpec g, uint8_t fill = 1) : grid(g), values(static_cast<size_t>(g.volume()), fill) {}
    MaskVolume(GridSpec g, std::vector<uint8_t> v);

    uint8_t at(int64_t l, int64_t h, int64_t w) const {
        return values[static_cast<size_t>((l * grid.rows + h) * grid.cols + w)];
    }
    uint8_t& at(int64_t l, int64_t h, int64_t w) {
        return values[static_cast<size_t>((l * grid.rows + h) * grid.cols + w)];
    }
    int64_t observed_count() const;
};

}  // namespace rainfill
