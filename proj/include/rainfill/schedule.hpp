#pragma once

#include <string>
#include <vector>

namespace rainfill {

enum class ScheduleKind { Linear, Cosine };

std::string to_string(ScheduleKind kind);
ScheduleKind schedule_kind_from_string(const std::string& name);

/// Precomputed per-step noise quantities, indexed by diffusion step t in
/// [1, T]. Index 0 of beta/alpha/sigma is unused; alpha_bar[0] == 1.
struct NoiseSchedule {
    ScheduleKind kind = ScheduleKind::Linear;
    int steps = 0;  // T
    double beta_min = 0.0;
    double beta_max = 0.0;
    double cosine_offset = 0.0;  // s

    std::vector<double> beta;
    std::vector<double> alpha;
    std::vector<double> alpha_bar;
    std::vector<double> sigma;

    double sqrt_alpha_bar(int t) const;
    double sqrt_one_minus_alpha_bar(int t) const;
};

inline constexpr double kDefaultBetaMin = 1e-4;
inline constexpr double kDefaultBetaMax = 0.02;
inline constexpr double kDefaultCosineOffset = 0.008;
inline constexpr double kCosineBetaClamp = 0.999;

/// beta_t = beta_min + (t - 1) / (T - 1) * (beta_max - beta_min), t = 1..T.
NoiseSchedule linear_schedule(int steps, double beta_min = kDefaultBetaMin, double beta_max = kDefaultBetaMax);

/// alpha_bar_j = f(j / T) / f(0), f(u) = cos^2((u + s) / (1 + s) * pi / 2),
/// beta_j = min(1 - alpha_bar_j / alpha_bar_{j-1}, 0.999). alpha_bar is then
/// re-accumulated from the clamped betas so the product identity holds.
NoiseSchedule cosine_schedule(int steps, double offset = kDefaultCosineOffset);

}  // namespace rainfill
