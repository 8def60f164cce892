#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rainfill/rng.hpp"
#include "rainfill/volume.hpp"

namespace rainfill {

/// y = 1 - exp(-x / k) with k chosen so that T(reference) = saturation.
struct ExpTransform {
    double reference = 5.0;    // x_p, mm/h
    double saturation = 0.99;  // p_s

    double scale() const;  // k
};

double exp_forward(double x, const ExpTransform& tf);
/// Throws std::domain_error for y outside [0, 1).
double exp_inverse(double y, const ExpTransform& tf);

/// Logistic squashing pinned by two (threshold, target) pairs.
struct LogisticTransform {
    double x_low = 270.0;
    double x_high = 230.0;
    double s_low = 0.2;
    double s_high = 0.8;

    double steepness() const;  // A
    static LogisticTransform infrared() { return {270.0, 230.0, 0.2, 0.8}; }
    static LogisticTransform topography() { return {200.0, 2000.0, 0.2, 0.8}; }
};

/// Non-finite inputs are treated as missing and map to kMissing.
double logistic_forward(double x, const LogisticTransform& tf);

struct TimeEmbedSpec {
    double reference_seconds = 0.0;  // tau_0
    std::array<double, 5> cycle_days{7.0, 30.0, 365.0, 3650.0, 36500.0};
};

/// The 10-vector [sin', cos'] x 5 cycles for one timestamp.
std::array<double, 10> time_vector(double seconds, const TimeEmbedSpec& spec);

/// One (L, H, W) channel: row h of frame n holds time_vector(tau_n)[h % 10],
/// replicated across columns.
FieldVolume time_embedding(std::span<const double> frame_seconds, const TimeEmbedSpec& spec, const GridSpec& grid);

/// (cos phi + 1)/2, (sin phi + 1)/2, (sin lambda + 1)/2, (cos lambda + 1)/2,
/// each repeated over all frames.
std::array<FieldVolume, 4> latlon_channels(const GridSpec& grid);

/// Fixed channel order of the 10-channel condition stack.
enum ConditionChannel : int {
    kMaskedPrecip = 0,
    kMaskChannel = 1,
    kInfrared1 = 2,
    kInfrared2 = 3,
    kTimeChannel = 4,
    kTopography = 5,
    kCosLat = 6,
    kSinLat = 7,
    kSinLon = 8,
    kCosLon = 9,
};
inline constexpr int kConditionChannels = 10;

/// Channel groups dropped together by condition dropout and ablation.
enum class ConditionGroup { MaskedPrecip, Mask, Infrared, Time, Topography, Latitude, Longitude };
inline constexpr std::array<ConditionGroup, 7> kAllConditionGroups{
    ConditionGroup::MaskedPrecip, ConditionGroup::Mask,     ConditionGroup::Infrared, ConditionGroup::Time,
    ConditionGroup::Topography,   ConditionGroup::Latitude, ConditionGroup::Longitude};

std::vector<int> group_channels(ConditionGroup group);
std::string to_string(ConditionGroup group);
ConditionGroup condition_group_from_string(const std::string& name);

/// (10, L, H, W) conditioning stack.
struct ConditionTensor {
    GridSpec grid;
    std::vector<double> values;

    ConditionTensor() = default;
    explicit ConditionTensor(GridSpec g) : grid(g), values(static_cast<size_t>(kConditionChannels * g.volume()), 0.0) {}

    std::span<double> channel(int c) { return std::span(values).subspan(c * grid.volume(), grid.volume()); }
    std::span<const double> channel(int c) const {
        return std::span(values).subspan(c * grid.volume(), grid.volume());
    }
    FieldVolume channel_volume(int c) const;
    void fill_group(ConditionGroup group, double value);
};

/// Observed pixels keep their value, masked pixels become kMissing.
FieldVolume mask_apply(const FieldVolume& x0, const MaskVolume& mask);

/// A pixel is invalid when its flag is <= 1 or its rate is negative.
/// Inputs are one frame each (H * W values) or whole volumes.
MaskVolume gsmap_mask_from_flags(const GridSpec& grid, std::span<const int> flags, std::span<const double> rates);

/// Per-sequence inputs other than the precipitation field itself.
struct AuxiliaryFields {
    FieldVolume infrared1;    // already in [0, 1] or kMissing
    FieldVolume infrared2;
    FieldVolume time;         // from time_embedding
    FieldVolume topography;   // one frame's worth repeated, or a full (L, H, W) volume
};

/// Stacks the ten channels. Channel 1 encodes 1 where the pixel must be
/// inpainted. Static (single-frame) inputs are repeated across frames.
ConditionTensor assemble_condition(const FieldVolume& masked, const MaskVolume& mask, const AuxiliaryFields& aux,
                                   const GridSpec& grid);

struct AugmentFlags {
    bool flip_lon = false;
    bool flip_lat = false;
    bool rotate180 = false;
};

AugmentFlags draw_augment(Rng& rng);
/// In-place flips of every frame of the target and every condition channel.
void apply_augment(const AugmentFlags& flags, FieldVolume& target, ConditionTensor& cond);
void apply_augment(const AugmentFlags& flags, FieldVolume& target);
/// Draws flags (each with probability 0.5) and applies them to both.
AugmentFlags augment(FieldVolume& target, ConditionTensor& cond, Rng& rng);

/// With probability p_drop, fills one uniformly chosen channel group with
/// kMissing. Returns the dropped group, if any.
std::optional<ConditionGroup> cond_dropout(ConditionTensor& cond, double p_drop, Rng& rng);

}  // namespace rainfill
