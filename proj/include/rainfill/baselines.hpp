#pragma once

#include <cstdint>
#include <vector>

#include "rainfill/volume.hpp"

namespace rainfill {

/// Per-pixel temporal linear interpolation between the nearest observed
/// frames. Leading and trailing gaps hold the nearest observation; a pixel
/// with one observation is constant; a pixel with none stays kMissing.
FieldVolume tli(const FieldVolume& x);

struct SpatialFillOptions {
    double tolerance = 1e-6;
    int max_iterations = 10000;
};

struct SpatialFillResult {
    FieldVolume field;
    /// Frames that had no observed pixel and were filled with zero.
    std::vector<int64_t> empty_frames;
    int iterations = 0;  // worst frame
};

/// Replaces the kMissing pixels of each frame by the discrete harmonic
/// extension of the observed values. Jacobi iteration over the in-grid
/// 4-neighbourhood; the grid edges are treated as insulating.
SpatialFillResult spatial_fill(const FieldVolume& x, const SpatialFillOptions& options = {});

/// tli followed by spatial_fill.
FieldVolume tli_lf(const FieldVolume& x);

}  // namespace rainfill
