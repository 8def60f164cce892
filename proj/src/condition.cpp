#include "rainfill/condition.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace rainfill {

double GridSpec::latitude(int64_t h) const {
    return -std::numbers::pi / 2 + static_cast<double>(h) / static_cast<double>(rows - 1) * std::numbers::pi;
}

double GridSpec::longitude(int64_t w) const {
    return -std::numbers::pi + static_cast<double>(w) / static_cast<double>(cols - 1) * 2 * std::numbers::pi;
}

FieldVolume::FieldVolume(GridSpec g, std::vector<double> v) : grid(g), values(std::move(v)) {
    if (static_cast<int64_t>(values.size()) != g.volume()) {
        throw std::invalid_argument("FieldVolume: value count does not match grid");
    }
}

MaskVolume::MaskVolume(GridSpec g, std::vector<uint8_t> v) : grid(g), values(std::move(v)) {
    if (static_cast<int64_t>(values.size()) != g.volume()) {
        throw std::invalid_argument("MaskVolume: value count does not match grid");
    }
    for (auto m : values) {
        if (m > 1) throw std::invalid_argument("MaskVolume: mask values must be 0 or 1");
    }
}

int64_t MaskVolume::observed_count() const {
    return std::count(values.begin(), values.end(), uint8_t{1});
}

double ExpTransform::scale() const { return reference / -std::log(1.0 - saturation); }

double exp_forward(double x, const ExpTransform& tf) {
    if (x < 0.0) throw std::domain_error("exp_forward: negative precipitation");
    return 1.0 - std::exp(-x / tf.scale());
}

double exp_inverse(double y, const ExpTransform& tf) {
    if (!(y >= 0.0 && y < 1.0)) throw std::domain_error("exp_inverse: value must lie in [0, 1)");
    return -tf.scale() * std::log1p(-y);
}

double LogisticTransform::steepness() const {
    auto logit = [](double s) { return std::log(s / (1.0 - s)); };
    return (logit(s_high) - logit(s_low)) / (x_high - x_low);
}

double logistic_forward(double x, const LogisticTransform& tf) {
    if (!std::isfinite(x)) return kMissing;
    const double mid = 0.5 * (tf.x_high + tf.x_low);
    return 1.0 / (1.0 + std::exp(-tf.steepness() * (x - mid)));
}

std::array<double, 10> time_vector(double seconds, const TimeEmbedSpec& spec) {
    const double days = (seconds - spec.reference_seconds) / 86400.0;
    std::array<double, 10> v{};
    for (size_t j = 0; j < spec.cycle_days.size(); ++j) {
        const double phase = 2.0 * std::numbers::pi * days / spec.cycle_days[j];
        v[2 * j] = (std::sin(phase) + 1.0) / 2.0;
        v[2 * j + 1] = (std::cos(phase) + 1.0) / 2.0;
    }
    return v;
}

FieldVolume time_embedding(std::span<const double> frame_seconds, const TimeEmbedSpec& spec, const GridSpec& grid) {
    if (static_cast<int64_t>(frame_seconds.size()) != grid.frames) {
        throw std::invalid_argument("time_embedding: need one timestamp per frame");
    }
    FieldVolume out(grid);
    for (int64_t n = 0; n < grid.frames; ++n) {
        const auto v = time_vector(frame_seconds[n], spec);
        for (int64_t h = 0; h < grid.rows; ++h)
            for (int64_t w = 0; w < grid.cols; ++w) out.at(n, h, w) = v[static_cast<size_t>(h % 10)];
    }
    return out;
}

std::array<FieldVolume, 4> latlon_channels(const GridSpec& grid) {
    if (grid.rows < 2 || grid.cols < 2) throw std::invalid_argument("latlon_channels: need H, W >= 2");
    std::array<FieldVolume, 4> out{FieldVolume(grid), FieldVolume(grid), FieldVolume(grid), FieldVolume(grid)};
    for (int64_t n = 0; n < grid.frames; ++n)
        for (int64_t h = 0; h < grid.rows; ++h) {
            const double phi = grid.latitude(h);
            for (int64_t w = 0; w < grid.cols; ++w) {
                const double lam = grid.longitude(w);
                out[0].at(n, h, w) = (std::cos(phi) + 1.0) / 2.0;
                out[1].at(n, h, w) = (std::sin(phi) + 1.0) / 2.0;
                out[2].at(n, h, w) = (std::sin(lam) + 1.0) / 2.0;
                out[3].at(n, h, w) = (std::cos(lam) + 1.0) / 2.0;
            }
        }
    return out;
}

std::vector<int> group_channels(ConditionGroup group) {
    switch (group) {
        case ConditionGroup::MaskedPrecip: return {kMaskedPrecip};
        case ConditionGroup::Mask: return {kMaskChannel};
        case ConditionGroup::Infrared: return {kInfrared1, kInfrared2};
        case ConditionGroup::Time: return {kTimeChannel};
        case ConditionGroup::Topography: return {kTopography};
        case ConditionGroup::Latitude: return {kCosLat, kSinLat};
        case ConditionGroup::Longitude: return {kSinLon, kCosLon};
    }
    return {};
}

std::string to_string(ConditionGroup group) {
    switch (group) {
        case ConditionGroup::MaskedPrecip: return "masked_precip";
        case ConditionGroup::Mask: return "mask";
        case ConditionGroup::Infrared: return "infrared";
        case ConditionGroup::Time: return "time";
        case ConditionGroup::Topography: return "topography";
        case ConditionGroup::Latitude: return "latitude";
        case ConditionGroup::Longitude: return "longitude";
    }
    return "?";
}

ConditionGroup condition_group_from_string(const std::string& name) {
    for (auto g : kAllConditionGroups) {
        if (to_string(g) == name) return g;
    }
    throw std::invalid_argument("unknown condition group '" + name + "'");
}

FieldVolume ConditionTensor::channel_volume(int c) const {
    const auto ch = channel(c);
    return FieldVolume(grid, std::vector<double>(ch.begin(), ch.end()));
}

void ConditionTensor::fill_group(ConditionGroup group, double value) {
    for (int c : group_channels(group)) std::ranges::fill(channel(c), value);
}

FieldVolume mask_apply(const FieldVolume& x0, const MaskVolume& mask) {
    if (!(x0.grid == mask.grid)) throw std::invalid_argument("mask_apply: field and mask grids differ");
    FieldVolume out(x0.grid);
    for (size_t i = 0; i < out.values.size(); ++i) {
        const double m = mask.values[i];
        out.values[i] = m * x0.values[i] + kMissing * (1.0 - m);
    }
    return out;
}

MaskVolume gsmap_mask_from_flags(const GridSpec& grid, std::span<const int> flags, std::span<const double> rates) {
    if (flags.size() != rates.size() || static_cast<int64_t>(flags.size()) != grid.volume()) {
        throw std::invalid_argument("gsmap_mask_from_flags: flag/rate/grid sizes differ");
    }
    MaskVolume out(grid, 1);
    for (size_t i = 0; i < flags.size(); ++i) {
        const bool no_sensor = flags[i] <= 1;
        const bool missing = rates[i] < 0.0;
        out.values[i] = (no_sensor || missing) ? 0 : 1;
    }
    return out;
}

namespace {

void copy_volume(std::span<double> dst, const FieldVolume& src, const GridSpec& grid, const char* name) {
    const bool single_frame = src.grid.frames == 1 && src.grid.rows == grid.rows && src.grid.cols == grid.cols;
    if (src.grid == grid) {
        std::ranges::copy(src.values, dst.begin());
    } else if (single_frame) {
        for (int64_t n = 0; n < grid.frames; ++n) std::ranges::copy(src.values, dst.begin() + n * grid.plane());
    } else {
        throw std::invalid_argument(std::string("assemble_condition: channel '") + name + "' has grid (" +
                                    std::to_string(src.grid.frames) + "," + std::to_string(src.grid.rows) + "," +
                                    std::to_string(src.grid.cols) + "), expected (" + std::to_string(grid.frames) +
                                    "," + std::to_string(grid.rows) + "," + std::to_string(grid.cols) + ")");
    }
}

}  // namespace

ConditionTensor assemble_condition(const FieldVolume& masked, const MaskVolume& mask, const AuxiliaryFields& aux,
                                   const GridSpec& grid) {
    if (!(masked.grid == grid) || !(mask.grid == grid)) {
        throw std::invalid_argument("assemble_condition: masked field or mask not on the target grid");
    }
    ConditionTensor c(grid);
    copy_volume(c.channel(kMaskedPrecip), masked, grid, "masked_precip");
    auto m = c.channel(kMaskChannel);
    for (size_t i = 0; i < m.size(); ++i) m[i] = mask.values[i] ? 0.0 : 1.0;
    copy_volume(c.channel(kInfrared1), aux.infrared1, grid, "infrared1");
    copy_volume(c.channel(kInfrared2), aux.infrared2, grid, "infrared2");
    copy_volume(c.channel(kTimeChannel), aux.time, grid, "time");
    copy_volume(c.channel(kTopography), aux.topography, grid, "topography");
    const auto ll = latlon_channels(grid);
    for (int k = 0; k < 4; ++k) copy_volume(c.channel(kCosLat + k), ll[static_cast<size_t>(k)], grid, "latlon");
    return c;
}

AugmentFlags draw_augment(Rng& rng) {
    AugmentFlags f;
    f.flip_lon = rng.bernoulli(0.5);
    f.flip_lat = rng.bernoulli(0.5);
    f.rotate180 = rng.bernoulli(0.5);
    return f;
}

namespace {

void flip_planes(std::span<double> values, int64_t planes, int64_t rows, int64_t cols, bool lon, bool lat) {
    if (!lon && !lat) return;
    for (int64_t p = 0; p < planes; ++p) {
        auto plane = values.subspan(p * rows * cols, rows * cols);
        if (lon) {
            for (int64_t h = 0; h < rows; ++h) std::reverse(plane.begin() + h * cols, plane.begin() + (h + 1) * cols);
        }
        if (lat) {
            for (int64_t h = 0; h < rows / 2; ++h)
                std::swap_ranges(plane.begin() + h * cols, plane.begin() + (h + 1) * cols,
                                 plane.begin() + (rows - 1 - h) * cols);
        }
    }
}

// 180-degree rotation in the horizontal plane is the composition of both flips.
std::pair<bool, bool> effective_flips(const AugmentFlags& f) {
    return {f.flip_lon != f.rotate180, f.flip_lat != f.rotate180};
}

}  // namespace

void apply_augment(const AugmentFlags& flags, FieldVolume& target) {
    const auto [lon, lat] = effective_flips(flags);
    flip_planes(target.values, target.grid.frames, target.grid.rows, target.grid.cols, lon, lat);
}

void apply_augment(const AugmentFlags& flags, FieldVolume& target, ConditionTensor& cond) {
    apply_augment(flags, target);
    const auto [lon, lat] = effective_flips(flags);
    flip_planes(cond.values, kConditionChannels * cond.grid.frames, cond.grid.rows, cond.grid.cols, lon, lat);
}

AugmentFlags augment(FieldVolume& target, ConditionTensor& cond, Rng& rng) {
    const auto flags = draw_augment(rng);
    apply_augment(flags, target, cond);
    return flags;
}

std::optional<ConditionGroup> cond_dropout(ConditionTensor& cond, double p_drop, Rng& rng) {
    if (!(p_drop >= 0.0 && p_drop <= 1.0)) throw std::invalid_argument("cond_dropout: p_drop must lie in [0, 1]");
    if (!rng.bernoulli(p_drop)) return std::nullopt;
    const auto group = kAllConditionGroups[static_cast<size_t>(rng.uniform_int(0, kAllConditionGroups.size() - 1))];
    cond.fill_group(group, kMissing);
    return group;
}

}  // namespace rainfill
