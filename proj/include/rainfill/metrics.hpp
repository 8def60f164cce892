#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rainfill/condition.hpp"
#include "rainfill/volume.hpp"

namespace rainfill {

/// Pixels the model had to inpaint (hole = 1) plus the one-pixel rim of the
/// first-frame hole under 8-connected dilation.
struct HoleDomain {
    MaskVolume hole;
    std::vector<int64_t> boundary;  // plane indices in frame 0

    static HoleDomain from_hole(const MaskVolume& hole);
    /// Hole = complement of the observation mask.
    static HoleDomain from_observed(const MaskVolume& observed);
    int64_t size() const { return hole.observed_count(); }
};

/// Each throws std::invalid_argument when its domain is empty.
double rmse_hole(const FieldVolume& pred, const FieldVolume& truth, const HoleDomain& domain);
double tg_rmse(const FieldVolume& pred, const FieldVolume& truth, const HoleDomain& domain);
/// NaN when either side has zero variance over the hole.
double pearson_hole(const FieldVolume& pred, const FieldVolume& truth, const HoleDomain& domain);
double bdi(const FieldVolume& pred, const FieldVolume& truth, const HoleDomain& domain);

struct SsimOptions {
    int scales = 3;
    double c1 = 0.01 * 0.01;
    double c2 = 0.03 * 0.03;
};

/// SSIM of one plane from statistics over the pixels with hole != 0.
double ssim_masked(std::span<const double> pred, std::span<const double> truth, std::span<const uint8_t> hole,
                   double c1, double c2);

struct MsSsimResult {
    double value = 0.0;
    /// (frame, scale) pairs skipped because the hole vanished there.
    std::vector<std::pair<int64_t, int>> skipped;
};

MsSsimResult ms_ssim_hole_detail(const FieldVolume& pred, const FieldVolume& truth, const HoleDomain& domain,
                                 const SsimOptions& options = {});
double ms_ssim_hole(const FieldVolume& pred, const FieldVolume& truth, const HoleDomain& domain,
                    const SsimOptions& options = {});

struct ConfidenceInterval {
    double lo = 0.0;
    double hi = 0.0;
};

/// Percentile bootstrap of the mean.
ConfidenceInterval bootstrap_ci(std::span<const double> samples, double level = 0.95, int resamples = 10000,
                                uint64_t seed = 20240101);

enum class Metric { Rmse, TgRmse, Pearson, MsSsim, Bdi };
inline constexpr std::array<Metric, 5> kAllMetrics{Metric::Rmse, Metric::TgRmse, Metric::Pearson, Metric::MsSsim,
                                                  Metric::Bdi};
std::string to_string(Metric m);

struct WindowMetrics {
    double rmse = 0.0;
    double tg_rmse = 0.0;
    double pearson = 0.0;
    double ms_ssim = 0.0;
    double bdi = 0.0;

    double get(Metric m) const;
};

WindowMetrics evaluate_window(const FieldVolume& pred, const FieldVolume& truth, const HoleDomain& domain,
                              const SsimOptions& options = {});

struct MetricSummary {
    double mean = 0.0;
    ConfidenceInterval ci;
};

struct MetricReport {
    std::vector<WindowMetrics> windows;
    std::array<MetricSummary, 5> summary;  // indexed like kAllMetrics

    const MetricSummary& of(Metric m) const { return summary[static_cast<size_t>(m)]; }
};

/// Means and bootstrap intervals over windows. NaN entries (undefined
/// Pearson) are left out of that metric's summary.
MetricReport summarize(std::vector<WindowMetrics> windows, int resamples = 10000, uint64_t seed = 20240101);

/// Metric means entering the contribution analysis.
struct SensitivityMeans {
    double rmse = 0.0;
    double ms_ssim = 0.0;
    double tg_rmse = 0.0;
    double bdi = 0.0;
};

struct SensitivityRow {
    ConditionGroup group;
    std::array<double, 4> delta_m{};  // RMSE, MS-SSIM, TG-RMSE, BDI
    double delta = 0.0;
    double contribution = 0.0;  // NaN when the deltas sum to zero
};

struct SensitivityTable {
    std::vector<SensitivityRow> rows;
    double delta_sum = 0.0;
    bool defined() const { return delta_sum != 0.0; }
};

/// Signs +1 for RMSE, TG-RMSE and BDI, -1 for MS-SSIM; Delta_i is the mean
/// of the signed differences and r_i = Delta_i / sum_j Delta_j.
SensitivityTable sensitivity(const SensitivityMeans& full,
                             std::span<const std::pair<ConditionGroup, SensitivityMeans>> ablated);

}  // namespace rainfill
