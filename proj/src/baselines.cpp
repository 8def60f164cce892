#include "rainfill/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rainfill {

FieldVolume tli(const FieldVolume& x) {
    const GridSpec& g = x.grid;
    FieldVolume out = x;
    std::vector<int64_t> obs;
    for (int64_t h = 0; h < g.rows; ++h)
        for (int64_t w = 0; w < g.cols; ++w) {
            obs.clear();
            for (int64_t n = 0; n < g.frames; ++n) {
                if (x.at(n, h, w) != kMissing) obs.push_back(n);
            }
            if (obs.empty()) continue;
            for (int64_t n = 0; n < g.frames; ++n) {
                if (x.at(n, h, w) != kMissing) continue;
                const auto next = std::upper_bound(obs.begin(), obs.end(), n);
                if (next == obs.begin()) {
                    out.at(n, h, w) = x.at(obs.front(), h, w);
                } else if (next == obs.end()) {
                    out.at(n, h, w) = x.at(obs.back(), h, w);
                } else {
                    const int64_t ti = *(next - 1), tj = *next;
                    const double a = static_cast<double>(n - ti) / static_cast<double>(tj - ti);
                    out.at(n, h, w) = (1.0 - a) * x.at(ti, h, w) + a * x.at(tj, h, w);
                }
            }
        }
    return out;
}

SpatialFillResult spatial_fill(const FieldVolume& x, const SpatialFillOptions& options) {
    if (options.max_iterations < 1 || !(options.tolerance > 0.0)) {
        throw std::invalid_argument("spatial_fill: need max_iterations >= 1 and tolerance > 0");
    }
    const GridSpec& g = x.grid;
    SpatialFillResult res{x, {}, 0};
    std::vector<int64_t> holes;
    std::vector<double> next;
    for (int64_t n = 0; n < g.frames; ++n) {
        auto f = res.field.frame(n);
        holes.clear();
        double sum = 0.0;
        int64_t count = 0;
        for (int64_t i = 0; i < g.plane(); ++i) {
            if (f[i] == kMissing) {
                holes.push_back(i);
            } else {
                sum += f[i];
                ++count;
            }
        }
        if (holes.empty()) continue;
        if (count == 0) {
            std::ranges::fill(f, 0.0);
            res.empty_frames.push_back(n);
            continue;
        }
        const double start = sum / static_cast<double>(count);
        for (auto i : holes) f[i] = start;
        next.resize(holes.size());
        for (int it = 1; it <= options.max_iterations; ++it) {
            double change = 0.0;
            for (size_t k = 0; k < holes.size(); ++k) {
                const int64_t h = holes[k] / g.cols, w = holes[k] % g.cols;
                double acc = 0.0;
                int nb = 0;
                if (h > 0) acc += f[holes[k] - g.cols], ++nb;
                if (h + 1 < g.rows) acc += f[holes[k] + g.cols], ++nb;
                if (w > 0) acc += f[holes[k] - 1], ++nb;
                if (w + 1 < g.cols) acc += f[holes[k] + 1], ++nb;
                next[k] = acc / nb;
                change = std::max(change, std::abs(next[k] - f[holes[k]]));
            }
            for (size_t k = 0; k < holes.size(); ++k) f[holes[k]] = next[k];
            res.iterations = std::max(res.iterations, it);
            if (change < options.tolerance) break;
        }
    }
    return res;
}

FieldVolume tli_lf(const FieldVolume& x) { return spatial_fill(tli(x)).field; }

}  // namespace rainfill
