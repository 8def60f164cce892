#include "rainfill/schedule.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace rainfill {

namespace {

void finish(NoiseSchedule& s) {
    const auto n = static_cast<size_t>(s.steps);
    s.alpha.assign(n + 1, 0.0);
    s.sigma.assign(n + 1, 0.0);
    s.alpha_bar.assign(n + 1, 1.0);
    for (size_t t = 1; t <= n; ++t) {
        s.alpha[t] = 1.0 - s.beta[t];
        s.sigma[t] = std::sqrt(s.beta[t]);
        s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t];
    }
}

}  // namespace

std::string to_string(ScheduleKind kind) { return kind == ScheduleKind::Linear ? "linear" : "cosine"; }

ScheduleKind schedule_kind_from_string(const std::string& name) {
    if (name == "linear") return ScheduleKind::Linear;
    if (name == "cosine") return ScheduleKind::Cosine;
    throw std::invalid_argument("unknown schedule kind '" + name + "' (expected linear|cosine)");
}

double NoiseSchedule::sqrt_alpha_bar(int t) const { return std::sqrt(alpha_bar.at(static_cast<size_t>(t))); }

double NoiseSchedule::sqrt_one_minus_alpha_bar(int t) const {
    return std::sqrt(1.0 - alpha_bar.at(static_cast<size_t>(t)));
}

NoiseSchedule linear_schedule(int steps, double beta_min, double beta_max) {
    if (steps < 1) throw std::invalid_argument("linear_schedule: T must be >= 1");
    if (!(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0)) {
        throw std::invalid_argument("linear_schedule: need 0 < beta_min <= beta_max < 1");
    }
    NoiseSchedule s;
    s.kind = ScheduleKind::Linear;
    s.steps = steps;
    s.beta_min = beta_min;
    s.beta_max = beta_max;
    s.beta.assign(static_cast<size_t>(steps) + 1, 0.0);
    for (int t = 1; t <= steps; ++t) {
        const double frac = steps == 1 ? 0.0 : static_cast<double>(t - 1) / static_cast<double>(steps - 1);
        s.beta[t] = beta_min + frac * (beta_max - beta_min);
    }
    finish(s);
    return s;
}

NoiseSchedule cosine_schedule(int steps, double offset) {
    if (steps < 1) throw std::invalid_argument("cosine_schedule: T must be >= 1");
    if (!(offset > 0.0)) throw std::invalid_argument("cosine_schedule: offset s must be > 0");
    NoiseSchedule s;
    s.kind = ScheduleKind::Cosine;
    s.steps = steps;
    s.cosine_offset = offset;
    auto f = [offset](double u) {
        const double c = std::cos((u + offset) / (1.0 + offset) * std::numbers::pi / 2.0);
        return c * c;
    };
    const double f0 = f(0.0);
    s.beta.assign(static_cast<size_t>(steps) + 1, 0.0);
    double prev = 1.0;
    for (int j = 1; j <= steps; ++j) {
        const double cur = f(static_cast<double>(j) / steps) / f0;
        s.beta[j] = std::min(1.0 - cur / prev, kCosineBetaClamp);
        prev = cur;
    }
    finish(s);
    return s;
}

}  // namespace rainfill
