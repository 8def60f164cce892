#include "rainfill/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "rainfill/rng.hpp"

namespace rainfill {

namespace {

void check_inputs(const FieldVolume& pred, const FieldVolume& truth, const HoleDomain& d) {
    if (!(pred.grid == truth.grid) || !(pred.grid == d.hole.grid)) {
        throw std::invalid_argument("metric inputs are on different grids");
    }
}

}  // namespace

HoleDomain HoleDomain::from_hole(const MaskVolume& hole) {
    HoleDomain d{hole, {}};
    const GridSpec& g = hole.grid;
    for (int64_t h = 0; h < g.rows; ++h)
        for (int64_t w = 0; w < g.cols; ++w) {
            if (hole.at(0, h, w)) continue;
            bool touches = false;
            for (int64_t dh = -1; dh <= 1 && !touches; ++dh)
                for (int64_t dw = -1; dw <= 1; ++dw) {
                    const int64_t hh = h + dh, ww = w + dw;
                    if (hh < 0 || hh >= g.rows || ww < 0 || ww >= g.cols) continue;
                    if (hole.at(0, hh, ww)) {
                        touches = true;
                        break;
                    }
                }
            if (touches) d.boundary.push_back(h * g.cols + w);
        }
    return d;
}

HoleDomain HoleDomain::from_observed(const MaskVolume& observed) {
    MaskVolume hole(observed.grid, 0);
    for (size_t i = 0; i < hole.values.size(); ++i) hole.values[i] = observed.values[i] ? 0 : 1;
    return from_hole(hole);
}

double rmse_hole(const FieldVolume& pred, const FieldVolume& truth, const HoleDomain& d) {
    check_inputs(pred, truth, d);
    double acc = 0.0;
    int64_t n = 0;
    for (size_t i = 0; i < pred.values.size(); ++i) {
        if (!d.hole.values[i]) continue;
        const double e = pred.values[i] - truth.values[i];
        acc += e * e;
        ++n;
    }
    if (n == 0) throw std::invalid_argument("rmse_hole: empty hole");
    return std::sqrt(acc / static_cast<double>(n));
}

double tg_rmse(const FieldVolume& pred, const FieldVolume& truth, const HoleDomain& d) {
    check_inputs(pred, truth, d);
    const int64_t plane = pred.grid.plane();
    double acc = 0.0;
    int64_t n = 0;
    for (int64_t i = plane; i < pred.grid.volume(); ++i) {
        if (!d.hole.values[i]) continue;
        const double e = (pred.values[i] - pred.values[i - plane]) - (truth.values[i] - truth.values[i - plane]);
        acc += e * e;
        ++n;
    }
    if (n == 0) throw std::invalid_argument("tg_rmse: no hole pixels after the first frame");
    return std::sqrt(acc / static_cast<double>(n));
}

double pearson_hole(const FieldVolume& pred, const FieldVolume& truth, const HoleDomain& d) {
    check_inputs(pred, truth, d);
    const auto first = std::ranges::find(d.hole.values, uint8_t{1});
    if (first == d.hole.values.end()) throw std::invalid_argument("pearson_hole: empty hole");
    const auto k = static_cast<size_t>(first - d.hole.values.begin());
    // pivoted sums keep the mean of a constant field exact
    const double p0 = pred.values[k], t0 = truth.values[k];
    double sp = 0.0, st = 0.0;
    int64_t n = 0;
    for (size_t i = 0; i < pred.values.size(); ++i) {
        if (!d.hole.values[i]) continue;
        sp += pred.values[i] - p0;
        st += truth.values[i] - t0;
        ++n;
    }
    const double mp = p0 + sp / n, mt = t0 + st / n;
    double cov = 0.0, vp = 0.0, vt = 0.0;
    for (size_t i = 0; i < pred.values.size(); ++i) {
        if (!d.hole.values[i]) continue;
        const double a = pred.values[i] - mp, b = truth.values[i] - mt;
        cov += a * b;
        vp += a * a;
        vt += b * b;
    }
    if (vp == 0.0 || vt == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return std::clamp(cov / std::sqrt(vp * vt), -1.0, 1.0);
}

double bdi(const FieldVolume& pred, const FieldVolume& truth, const HoleDomain& d) {
    check_inputs(pred, truth, d);
    if (d.boundary.empty()) throw std::invalid_argument("bdi: first-frame hole has no boundary");
    double acc = 0.0;
    for (auto i : d.boundary) acc += std::abs(pred.values[i] - truth.values[i]);
    return acc / static_cast<double>(d.boundary.size());
}

double ssim_masked(std::span<const double> pred, std::span<const double> truth, std::span<const uint8_t> hole,
                   double c1, double c2) {
    const auto first = std::ranges::find(hole, uint8_t{1});
    if (first == hole.end()) throw std::invalid_argument("ssim_masked: empty hole");
    const auto k = static_cast<size_t>(first - hole.begin());
    const double p0 = pred[k], t0 = truth[k];
    double sp = 0.0, st = 0.0;
    int64_t n = 0;
    for (size_t i = 0; i < pred.size(); ++i) {
        if (!hole[i]) continue;
        sp += pred[i] - p0;
        st += truth[i] - t0;
        ++n;
    }
    const double mp = p0 + sp / n, mt = t0 + st / n;
    double vp = 0.0, vt = 0.0, cov = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        if (!hole[i]) continue;
        const double a = pred[i] - mp, b = truth[i] - mt;
        vp += a * a;
        vt += b * b;
        cov += a * b;
    }
    vp /= n;
    vt /= n;
    cov /= n;
    return ((2 * mp * mt + c1) * (2 * cov + c2)) / ((mp * mp + mt * mt + c1) * (vp + vt + c2));
}

namespace {

struct Plane {
    int64_t rows, cols;
    std::vector<double> pred, truth;
    std::vector<uint8_t> hole;
};

Plane downsample(const Plane& p) {
    Plane q{p.rows / 2, p.cols / 2, {}, {}, {}};
    const auto n = static_cast<size_t>(q.rows * q.cols);
    q.pred.resize(n);
    q.truth.resize(n);
    q.hole.resize(n);
    for (int64_t h = 0; h < q.rows; ++h)
        for (int64_t w = 0; w < q.cols; ++w) {
            double a = 0.0, b = 0.0, m = 0.0;
            for (int64_t dh = 0; dh < 2; ++dh)
                for (int64_t dw = 0; dw < 2; ++dw) {
                    const auto src = static_cast<size_t>((2 * h + dh) * p.cols + 2 * w + dw);
                    a += p.pred[src];
                    b += p.truth[src];
                    m += p.hole[src];
                }
            const auto dst = static_cast<size_t>(h * q.cols + w);
            q.pred[dst] = a / 4;
            q.truth[dst] = b / 4;
            q.hole[dst] = m / 4 >= 0.5 ? 1 : 0;
        }
    return q;
}

}  // namespace

MsSsimResult ms_ssim_hole_detail(const FieldVolume& pred, const FieldVolume& truth, const HoleDomain& d,
                                 const SsimOptions& options) {
    check_inputs(pred, truth, d);
    if (options.scales < 1) throw std::invalid_argument("ms_ssim_hole: scales must be >= 1");
    const GridSpec& g = pred.grid;
    MsSsimResult res;
    double frame_sum = 0.0;
    int64_t frames_used = 0;
    for (int64_t f = 0; f < g.frames; ++f) {
        const auto off = static_cast<size_t>(f * g.plane());
        const auto len = static_cast<size_t>(g.plane());
        Plane p{g.rows, g.cols, {pred.values.begin() + off, pred.values.begin() + off + len},
                {truth.values.begin() + off, truth.values.begin() + off + len},
                {d.hole.values.begin() + off, d.hole.values.begin() + off + len}};
        double scale_sum = 0.0;
        int used = 0;
        for (int s = 0; s < options.scales; ++s) {
            if (s > 0) {
                if (p.rows < 2 || p.cols < 2) {
                    res.skipped.emplace_back(f, s);
                    continue;
                }
                p = downsample(p);
            }
            if (std::ranges::find(p.hole, uint8_t{1}) == p.hole.end()) {
                res.skipped.emplace_back(f, s);
                continue;
            }
            scale_sum += ssim_masked(p.pred, p.truth, p.hole, options.c1, options.c2);
            ++used;
        }
        if (used == 0) continue;
        frame_sum += scale_sum / used;
        ++frames_used;
    }
    if (frames_used == 0) throw std::invalid_argument("ms_ssim_hole: empty hole");
    res.value = frame_sum / static_cast<double>(frames_used);
    return res;
}

double ms_ssim_hole(const FieldVolume& pred, const FieldVolume& truth, const HoleDomain& d,
                    const SsimOptions& options) {
    return ms_ssim_hole_detail(pred, truth, d, options).value;
}

ConfidenceInterval bootstrap_ci(std::span<const double> samples, double level, int resamples, uint64_t seed) {
    if (samples.size() < 2) throw std::invalid_argument("bootstrap_ci: need at least two samples");
    if (!(level > 0.0 && level < 1.0) || resamples < 1) {
        throw std::invalid_argument("bootstrap_ci: level must lie in (0, 1) and resamples >= 1");
    }
    Rng rng(seed);
    const auto n = static_cast<int64_t>(samples.size());
    std::vector<double> means(static_cast<size_t>(resamples));
    const double pivot = samples[0];
    for (auto& m : means) {
        double acc = 0.0;
        for (int64_t i = 0; i < n; ++i) acc += samples[static_cast<size_t>(rng.uniform_int(0, n - 1))] - pivot;
        m = pivot + acc / static_cast<double>(n);
    }
    std::ranges::sort(means);
    auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(means.size() - 1);
        const auto lo = static_cast<size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, means.size() - 1);
        const double frac = pos - static_cast<double>(lo);
        return means[lo] + frac * (means[hi] - means[lo]);
    };
    const double alpha = 1.0 - level;
    return {quantile(alpha / 2), quantile(1.0 - alpha / 2)};
}

std::string to_string(Metric m) {
    switch (m) {
        case Metric::Rmse: return "rmse";
        case Metric::TgRmse: return "tg_rmse";
        case Metric::Pearson: return "pearson";
        case Metric::MsSsim: return "ms_ssim";
        case Metric::Bdi: return "bdi";
    }
    return "?";
}

double WindowMetrics::get(Metric m) const {
    switch (m) {
        case Metric::Rmse: return rmse;
        case Metric::TgRmse: return tg_rmse;
        case Metric::Pearson: return pearson;
        case Metric::MsSsim: return ms_ssim;
        case Metric::Bdi: return bdi;
    }
    return 0.0;
}

WindowMetrics evaluate_window(const FieldVolume& pred, const FieldVolume& truth, const HoleDomain& d,
                              const SsimOptions& options) {
    WindowMetrics w;
    w.rmse = rmse_hole(pred, truth, d);
    w.tg_rmse = tg_rmse(pred, truth, d);
    w.pearson = pearson_hole(pred, truth, d);
    w.ms_ssim = ms_ssim_hole(pred, truth, d, options);
    w.bdi = bdi(pred, truth, d);
    return w;
}

MetricReport summarize(std::vector<WindowMetrics> windows, int resamples, uint64_t seed) {
    MetricReport r;
    r.windows = std::move(windows);
    for (size_t k = 0; k < kAllMetrics.size(); ++k) {
        std::vector<double> xs;
        for (const auto& w : r.windows) {
            const double v = w.get(kAllMetrics[k]);
            if (std::isfinite(v)) xs.push_back(v);
        }
        auto& s = r.summary[k];
        if (xs.empty()) {
            s.mean = s.ci.lo = s.ci.hi = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        double dev = 0.0;
        for (double x : xs) dev += x - xs[0];
        s.mean = xs[0] + dev / static_cast<double>(xs.size());
        s.ci = xs.size() >= 2 ? bootstrap_ci(xs, 0.95, resamples, seed) : ConfidenceInterval{s.mean, s.mean};
    }
    return r;
}

SensitivityTable sensitivity(const SensitivityMeans& full,
                             std::span<const std::pair<ConditionGroup, SensitivityMeans>> ablated) {
    SensitivityTable t;
    for (const auto& [group, m] : ablated) {
        SensitivityRow row{group, {}, 0.0, 0.0};
        row.delta_m = {m.rmse - full.rmse, -(m.ms_ssim - full.ms_ssim), m.tg_rmse - full.tg_rmse, m.bdi - full.bdi};
        row.delta = (row.delta_m[0] + row.delta_m[1] + row.delta_m[2] + row.delta_m[3]) / 4.0;
        t.delta_sum += row.delta;
        t.rows.push_back(row);
    }
    for (auto& row : t.rows) {
        row.contribution = t.defined() ? row.delta / t.delta_sum : std::numeric_limits<double>::quiet_NaN();
    }
    return t;
}

}  // namespace rainfill
