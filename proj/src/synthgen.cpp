#include "rainfill/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "rainfill/rng.hpp"

namespace rainfill {

void SynthConfig::validate() const {
    if (grid.frames < 1 || grid.rows < 8 || grid.cols < 8) throw std::invalid_argument("synth: grid too small");
    if (grid.rows % 8 != 0 || grid.cols % 8 != 0) {
        throw std::invalid_argument("synth: H and W must be divisible by 8");
    }
    if (blobs < 0) throw std::invalid_argument("synth: blob count must be >= 0");
    if (!(blob_scale > 0.0) || !(amplitude >= 0.0) || !(background >= 0.0)) {
        throw std::invalid_argument("synth: blob scale must be > 0, amplitude and background >= 0");
    }
    if (swath_width < 1) throw std::invalid_argument("synth: swath width must be >= 1");
    if (swath_bands < 1) throw std::invalid_argument("synth: need at least one swath band");
}

namespace {

uint64_t sequence_seed(uint64_t seed, int64_t index) { return mix_seed(seed, static_cast<uint64_t>(index)); }

double wrap_delta(double d, double period) { return d - period * std::round(d / period); }

struct Blob {
    double row, col, vrow, vcol, sig_a, sig_b, angle, amp;
};

// Raw rate in mm/h, clipped to [0, 2 x_p].
std::vector<double> raw_rates(const SynthConfig& cfg, Rng& rng) {
    const GridSpec& g = cfg.grid;
    std::vector<Blob> blobs;
    for (int k = 0; k < cfg.blobs; ++k) {
        Blob b;
        b.row = rng.uniform(0.0, static_cast<double>(g.rows));
        b.col = rng.uniform(0.0, static_cast<double>(g.cols));
        b.vrow = cfg.velocity_rows + cfg.velocity_jitter * rng.uniform(-1.0, 1.0);
        b.vcol = cfg.velocity_cols + cfg.velocity_jitter * rng.uniform(-1.0, 1.0);
        b.sig_a = cfg.blob_scale * rng.uniform(0.6, 1.6);
        b.sig_b = cfg.blob_scale * rng.uniform(0.6, 1.6);
        b.angle = rng.uniform(0.0, std::numbers::pi);
        b.amp = cfg.amplitude * rng.uniform(0.4, 1.6);
        blobs.push_back(b);
    }
    const double cap = 2.0 * cfg.transform.reference;
    std::vector<double> out(static_cast<size_t>(g.volume()), 0.0);
    for (int64_t n = 0; n < g.frames; ++n)
        for (int64_t h = 0; h < g.rows; ++h)
            for (int64_t w = 0; w < g.cols; ++w) {
                double acc = 0.0;
                for (const auto& b : blobs) {
                    const double dr = h - (b.row + b.vrow * n);
                    const double dc = wrap_delta(w - (b.col + b.vcol * n), static_cast<double>(g.cols));
                    const double c = std::cos(b.angle), s = std::sin(b.angle);
                    const double u = (c * dr + s * dc) / b.sig_a, v = (-s * dr + c * dc) / b.sig_b;
                    acc += b.amp * std::exp(-0.5 * (u * u + v * v));
                }
                out[static_cast<size_t>((n * g.rows + h) * g.cols + w)] =
                    std::clamp(acc - cfg.background, 0.0, cap);
            }
    return out;
}

// Separable Gaussian blur of each frame, periodic in longitude, clamped in latitude.
std::vector<double> blur(const std::vector<double>& x, const GridSpec& g, double sigma) {
    const int r = static_cast<int>(std::ceil(3 * sigma));
    std::vector<double> k(static_cast<size_t>(2 * r + 1));
    double ks = 0.0;
    for (int i = -r; i <= r; ++i) ks += k[static_cast<size_t>(i + r)] = std::exp(-0.5 * i * i / (sigma * sigma));
    for (auto& v : k) v /= ks;
    std::vector<double> tmp(x.size()), out(x.size());
    for (int64_t n = 0; n < g.frames; ++n) {
        const int64_t base = n * g.plane();
        for (int64_t h = 0; h < g.rows; ++h)
            for (int64_t w = 0; w < g.cols; ++w) {
                double acc = 0.0;
                for (int i = -r; i <= r; ++i) {
                    const int64_t ww = ((w + i) % g.cols + g.cols) % g.cols;
                    acc += k[static_cast<size_t>(i + r)] * x[static_cast<size_t>(base + h * g.cols + ww)];
                }
                tmp[static_cast<size_t>(base + h * g.cols + w)] = acc;
            }
        for (int64_t h = 0; h < g.rows; ++h)
            for (int64_t w = 0; w < g.cols; ++w) {
                double acc = 0.0;
                for (int i = -r; i <= r; ++i) {
                    const int64_t hh = std::clamp<int64_t>(h + i, 0, g.rows - 1);
                    acc += k[static_cast<size_t>(i + r)] * tmp[static_cast<size_t>(base + hh * g.cols + w)];
                }
                out[static_cast<size_t>(base + h * g.cols + w)] = acc;
            }
    }
    return out;
}

FieldVolume transformed(const std::vector<double>& raw, const SynthConfig& cfg) {
    FieldVolume f(cfg.grid);
    for (size_t i = 0; i < raw.size(); ++i) f.values[i] = exp_forward(raw[i], cfg.transform);
    return f;
}

// Brightness-temperature proxy: colder tops over heavier smoothed rain.
FieldVolume infrared(const std::vector<double>& raw, const SynthConfig& cfg, double sigma, double warm,
                     double depth) {
    const GridSpec& g = cfg.grid;
    const auto smooth = blur(raw, g, sigma);
    const auto& tf = cfg.infrared_tf;
    FieldVolume out(g);
    for (int64_t n = 0; n < g.frames; ++n)
        for (int64_t h = 0; h < g.rows; ++h) {
            const bool covered = std::abs(g.latitude(h)) <= std::numbers::pi / 3 + 1e-12;
            for (int64_t w = 0; w < g.cols; ++w) {
                const double rate = smooth[static_cast<size_t>((n * g.rows + h) * g.cols + w)];
                const double bt = warm - depth * (1.0 - std::exp(-rate / cfg.transform.reference));
                out.at(n, h, w) = covered ? logistic_forward(bt, tf) : kMissing;
            }
        }
    return out;
}

}  // namespace

std::vector<FieldVolume> gen_fields(const SynthConfig& cfg, int64_t n_sequences, int64_t first) {
    cfg.validate();
    std::vector<FieldVolume> out;
    for (int64_t i = first; i < first + n_sequences; ++i) {
        Rng rng(sequence_seed(cfg.seed, i));
        out.push_back(transformed(raw_rates(cfg, rng), cfg));
    }
    return out;
}

MaskVolume gen_swath_mask(const SynthConfig& cfg, int64_t start_frame, double phase) {
    cfg.validate();
    const GridSpec& g = cfg.grid;
    MaskVolume m(g, 0);
    if (cfg.swath_width >= g.cols) {
        std::ranges::fill(m.values, uint8_t{1});
        return m;
    }
    const double spacing = static_cast<double>(g.cols) / cfg.swath_bands;
    for (int64_t n = 0; n < g.frames; ++n) {
        const double shift = phase + cfg.swath_shift * static_cast<double>(start_frame + n);
        for (int64_t h = 0; h < g.rows; ++h) {
            const double wobble = cfg.swath_wobble * std::sin(2.0 * std::numbers::pi * h / g.rows);
            for (int b = 0; b < cfg.swath_bands; ++b) {
                const double centre = shift + b * spacing + wobble;
                const auto start = static_cast<int64_t>(std::floor(centre - cfg.swath_width / 2.0));
                for (int64_t k = 0; k < cfg.swath_width; ++k) {
                    const int64_t w = ((start + k) % g.cols + g.cols) % g.cols;
                    m.at(n, h, w) = 1;
                }
            }
        }
    }
    return m;
}

double swath_coverage_estimate(const SynthConfig& cfg) {
    return std::min(1.0, static_cast<double>(cfg.swath_width) * cfg.swath_bands / static_cast<double>(cfg.grid.cols));
}

FieldVolume gen_topography_m(const SynthConfig& cfg) {
    GridSpec one = cfg.grid;
    one.frames = 1;
    Rng rng(sequence_seed(cfg.seed ^ 0x70706F67ULL, -1));
    std::vector<double> noise(static_cast<size_t>(one.volume()));
    rng.fill_normal(noise);
    auto smooth = blur(noise, one, 2.0);
    double lo = *std::ranges::min_element(smooth), hi = *std::ranges::max_element(smooth);
    if (hi == lo) hi = lo + 1.0;
    FieldVolume out(one);
    for (size_t i = 0; i < smooth.size(); ++i) out.values[i] = 3000.0 * (smooth[i] - lo) / (hi - lo);
    return out;
}

std::vector<SynthSequence> gen_corpus(const SynthConfig& cfg, int64_t n_sequences, int64_t first) {
    cfg.validate();
    const GridSpec& g = cfg.grid;
    const auto topo_m = gen_topography_m(cfg);
    FieldVolume topo(topo_m.grid);
    const auto& topo_tf = cfg.topography_tf;
    for (size_t i = 0; i < topo.values.size(); ++i) topo.values[i] = logistic_forward(topo_m.values[i], topo_tf);

    std::vector<SynthSequence> out;
    for (int64_t i = first; i < first + n_sequences; ++i) {
        Rng rng(sequence_seed(cfg.seed, i));
        const auto raw = raw_rates(cfg, rng);
        SynthSequence s;
        s.target = transformed(raw, cfg);
        const double phase = rng.uniform(0.0, static_cast<double>(g.cols));
        s.mask = gen_swath_mask(cfg, 0, phase);
        s.aux.infrared1 = infrared(raw, cfg, 1.0, 285.0, 70.0);
        s.aux.infrared2 = infrared(raw, cfg, 2.0, 280.0, 55.0);
        for (int64_t n = 0; n < g.frames; ++n) s.timestamps.push_back(3600.0 * static_cast<double>(i * g.frames + n));
        s.aux.time = time_embedding(s.timestamps, TimeEmbedSpec{}, g);
        s.aux.topography = topo;
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace rainfill
