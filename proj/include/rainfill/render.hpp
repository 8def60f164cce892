#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "rainfill/volume.hpp"

namespace rainfill {

/// Colour given to kMissing pixels.
inline constexpr std::array<uint8_t, 3> kMissingRgb{150, 150, 150};

std::array<uint8_t, 3> colormap(double value);

/// Binary PPM (P6) of one H x W plane.
std::vector<uint8_t> render_ppm(std::span<const double> plane, int64_t rows, int64_t cols);

/// Writes `<out_dir>/<stem>_f<frame>.ppm` for every frame; returns the paths.
std::vector<std::filesystem::path> render_frames(const FieldVolume& field, const std::filesystem::path& out_dir,
                                                 const std::string& stem);

}  // namespace rainfill
