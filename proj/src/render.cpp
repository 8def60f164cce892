#include "rainfill/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "rainfill/errors.hpp"

namespace rainfill {

std::array<uint8_t, 3> colormap(double value) {
    if (value == kMissing) return kMissingRgb;
    const double v = std::clamp(value, 0.0, 1.0);
    // white through blue to dark purple
    auto lerp = [](double a, double b, double t) { return static_cast<uint8_t>(std::lround(a + (b - a) * t)); };
    if (v < 0.5) {
        const double t = v / 0.5;
        return {lerp(255, 40, t), lerp(255, 110, t), lerp(255, 230, t)};
    }
    const double t = (v - 0.5) / 0.5;
    return {lerp(40, 90, t), lerp(110, 0, t), lerp(230, 120, t)};
}

std::vector<uint8_t> render_ppm(std::span<const double> plane, int64_t rows, int64_t cols) {
    if (static_cast<int64_t>(plane.size()) != rows * cols) throw std::invalid_argument("render_ppm: size mismatch");
    const std::string head = "P6\n" + std::to_string(cols) + " " + std::to_string(rows) + "\n255\n";
    std::vector<uint8_t> out(head.begin(), head.end());
    // north at the top
    for (int64_t h = rows - 1; h >= 0; --h)
        for (int64_t w = 0; w < cols; ++w) {
            const auto rgb = colormap(plane[static_cast<size_t>(h * cols + w)]);
            out.insert(out.end(), rgb.begin(), rgb.end());
        }
    return out;
}

std::vector<std::filesystem::path> render_frames(const FieldVolume& field, const std::filesystem::path& out_dir,
                                                 const std::string& stem) {
    std::filesystem::create_directories(out_dir);
    std::vector<std::filesystem::path> paths;
    for (int64_t n = 0; n < field.grid.frames; ++n) {
        const auto bytes = render_ppm(field.frame(n), field.grid.rows, field.grid.cols);
        char suffix[32];
        std::snprintf(suffix, sizeof suffix, "_f%02lld.ppm", static_cast<long long>(n));
        const auto path = out_dir / (stem + suffix);
        std::ofstream out(path, std::ios::binary);
        if (!out) throw DataError("cannot write '" + path.string() + "'");
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        paths.push_back(path);
    }
    return paths;
}

}  // namespace rainfill
