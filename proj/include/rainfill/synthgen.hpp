#pragma once

#include <cstdint>
#include <vector>

#include "rainfill/condition.hpp"
#include "rainfill/volume.hpp"

namespace rainfill {

struct SynthConfig {
    GridSpec grid;
    int blobs = 5;
    double velocity_rows = 0.4;  // cells per frame
    double velocity_cols = 1.5;
    double velocity_jitter = 0.8;
    double blob_scale = 2.5;     // mean Gaussian width, cells
    double amplitude = 6.0;      // mean peak rate, mm/h
    double background = 0.4;     // subtracted before clipping at zero, mm/h
    int swath_width = 8;         // columns per band and row
    int swath_bands = 2;
    double swath_shift = 5.0;    // columns per frame
    double swath_wobble = 3.0;   // sinusoidal column excursion
    uint64_t seed = 1;
    ExpTransform transform;
    LogisticTransform infrared_tf = LogisticTransform::infrared();
    LogisticTransform topography_tf = LogisticTransform::topography();

    /// Throws std::invalid_argument when a field is out of range.
    void validate() const;
};

/// One generated window with everything needed to build its condition.
struct SynthSequence {
    FieldVolume target;  // complete, transformed to [0, 1)
    MaskVolume mask;     // 1 = observed
    AuxiliaryFields aux;
    std::vector<double> timestamps;
};

/// Complete transformed fields for sequences [first, first + n).
std::vector<FieldVolume> gen_fields(const SynthConfig& cfg, int64_t n_sequences, int64_t first = 0);

/// Union of swath bands for frames start_frame .. start_frame + L - 1. Each
/// band covers exactly min(width, W) columns of every row.
MaskVolume gen_swath_mask(const SynthConfig& cfg, int64_t start_frame, double phase = 0.0);

/// Fraction of pixels a non-overlapping band layout observes.
double swath_coverage_estimate(const SynthConfig& cfg);

/// Fields, masks, infrared proxies, topography and time channels.
std::vector<SynthSequence> gen_corpus(const SynthConfig& cfg, int64_t n_sequences, int64_t first = 0);

/// Smooth random terrain in metres, one frame.
FieldVolume gen_topography_m(const SynthConfig& cfg);

}  // namespace rainfill
