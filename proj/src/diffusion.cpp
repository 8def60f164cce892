#include "rainfill/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "rainfill/errors.hpp"
#include "rainfill/ops.hpp"

namespace rainfill {

LatWeight lat_weight(const GridSpec& grid, double floor_eps) {
    if (grid.rows < 2) throw std::invalid_argument("lat_weight: need at least two rows");
    if (!(floor_eps >= 0.0 && floor_eps <= 1.0)) throw std::invalid_argument("lat_weight: eps must lie in [0, 1]");
    LatWeight out;
    out.floor = floor_eps;
    double mean_cos = 0.0;
    for (int64_t h = 0; h < grid.rows; ++h) mean_cos += std::cos(grid.latitude(h));
    mean_cos /= static_cast<double>(grid.rows);
    for (int64_t h = 0; h < grid.rows; ++h) {
        // cos(+-pi/2) evaluates to ~6e-17; clamp so the floor is exact at the poles.
        const double c = std::max(0.0, std::cos(grid.latitude(h)));
        out.weights.push_back(floor_eps + (1.0 - floor_eps) * c / mean_cos);
    }
    return out;
}

namespace {

void check_step(int t, const NoiseSchedule& sched) {
    if (t < 1 || t > sched.steps) {
        throw std::out_of_range("diffusion step " + std::to_string(t) + " outside [1, " +
                                std::to_string(sched.steps) + "]");
    }
}

void check_same_size(std::span<const double> a, std::span<const double> b, const char* what) {
    if (a.size() != b.size()) throw std::invalid_argument(std::string(what) + ": operand sizes differ");
}

}  // namespace

std::vector<double> noised(std::span<const double> x0, std::span<const double> noise, int t,
                           const NoiseSchedule& sched) {
    check_step(t, sched);
    check_same_size(x0, noise, "noised");
    const double a = sched.sqrt_alpha_bar(t), b = sched.sqrt_one_minus_alpha_bar(t);
    std::vector<double> out(x0.size());
    for (size_t i = 0; i < x0.size(); ++i) out[i] = a * x0[i] + b * noise[i];
    return out;
}

NoisedSample forward_sample(std::span<const double> x0, int t, const NoiseSchedule& sched, Rng& rng) {
    check_step(t, sched);
    for (double v : x0) {
        if (v == kMissing) throw std::invalid_argument("forward_sample: target field has missing pixels");
    }
    NoisedSample s;
    s.noise.resize(x0.size());
    rng.fill_normal(s.noise);
    s.x_t = noised(x0, s.noise, t, sched);
    return s;
}

std::vector<double> v_target(std::span<const double> x0, std::span<const double> noise, int t,
                             const NoiseSchedule& sched) {
    check_step(t, sched);
    check_same_size(x0, noise, "v_target");
    const double a = sched.sqrt_alpha_bar(t), b = sched.sqrt_one_minus_alpha_bar(t);
    std::vector<double> v(x0.size());
    for (size_t i = 0; i < x0.size(); ++i) v[i] = a * noise[i] - b * x0[i];
    return v;
}

Reconstruction reconstruct(std::span<const double> x_t, std::span<const double> v_hat, int t,
                           const NoiseSchedule& sched) {
    check_step(t, sched);
    check_same_size(x_t, v_hat, "reconstruct");
    const double a = sched.sqrt_alpha_bar(t), b = sched.sqrt_one_minus_alpha_bar(t);
    if (a == 0.0) throw std::domain_error("reconstruct: alpha_bar_t is zero");
    Reconstruction r;
    r.noise.resize(x_t.size());
    r.x0.resize(x_t.size());
    for (size_t i = 0; i < x_t.size(); ++i) {
        r.noise[i] = a * v_hat[i] + b * x_t[i];
        r.x0[i] = (x_t[i] - b * r.noise[i]) / a;
    }
    return r;
}

std::vector<double> ancestral_step(std::span<const double> x_t, std::span<const double> v_hat, int t,
                                   const NoiseSchedule& sched, std::span<const double> z) {
    const auto rec = reconstruct(x_t, v_hat, t, sched);
    const double inv_sqrt_alpha = 1.0 / std::sqrt(sched.alpha[t]);
    const double coef = (1.0 - sched.alpha[t]) / sched.sqrt_one_minus_alpha_bar(t);
    const bool add_noise = t > 1;
    if (add_noise) check_same_size(x_t, z, "ancestral_step");
    std::vector<double> out(x_t.size());
    for (size_t i = 0; i < x_t.size(); ++i) {
        out[i] = inv_sqrt_alpha * (x_t[i] - coef * rec.noise[i]);
        if (add_noise) out[i] += sched.sigma[t] * z[i];
    }
    return out;
}

std::vector<double> ddim_step(std::span<const double> x_t, std::span<const double> v_hat, int t, int t_prev,
                              const NoiseSchedule& sched) {
    if (t_prev < 0 || t_prev >= t) throw std::invalid_argument("ddim_step: need 0 <= t_prev < t");
    const auto rec = reconstruct(x_t, v_hat, t, sched);
    const double a = std::sqrt(sched.alpha_bar[t_prev]);
    const double b = std::sqrt(1.0 - sched.alpha_bar[t_prev]);
    std::vector<double> out(x_t.size());
    for (size_t i = 0; i < x_t.size(); ++i) out[i] = a * rec.x0[i] + b * rec.noise[i];
    return out;
}

std::vector<int> ddim_timesteps(int total_steps, int n_steps) {
    if (total_steps < 1 || n_steps < 1) throw std::invalid_argument("ddim_timesteps: need T >= 1 and n >= 1");
    std::vector<int> out;
    if (n_steps >= total_steps) {
        for (int t = total_steps; t >= 1; --t) out.push_back(t);
        return out;
    }
    if (n_steps == 1) return {total_steps};
    const double stride = static_cast<double>(total_steps - 1) / (n_steps - 1);
    for (int i = 0; i < n_steps; ++i) {
        const int t = static_cast<int>(std::lround(total_steps - i * stride));
        if (out.empty() || t < out.back()) out.push_back(t);
    }
    return out;
}

std::string to_string(SamplerKind kind) { return kind == SamplerKind::Ancestral ? "ancestral" : "ddim"; }

SamplerKind sampler_kind_from_string(const std::string& name) {
    if (name == "ancestral" || name == "ddpm") return SamplerKind::Ancestral;
    if (name == "ddim") return SamplerKind::Ddim;
    throw std::invalid_argument("unknown sampler '" + name + "' (expected ancestral|ddim)");
}

void check_observed_consistency(const FieldVolume& observed, const MaskVolume& mask) {
    if (!(observed.grid == mask.grid)) throw std::invalid_argument("observed field and mask grids differ");
    for (size_t i = 0; i < observed.values.size(); ++i) {
        const bool missing = observed.values[i] == kMissing;
        if (missing == (mask.values[i] == 1)) {
            throw std::invalid_argument("observed field sentinel placement disagrees with mask at index " +
                                        std::to_string(i));
        }
    }
}

namespace {

Tensor field_tensor(std::span<const double> v, const GridSpec& g) {
    return Tensor::from_data({1, 1, g.frames, g.rows, g.cols}, std::vector<double>(v.begin(), v.end()));
}

Tensor cond_tensor(const ConditionTensor& c) {
    return Tensor::from_data({1, kConditionChannels, c.grid.frames, c.grid.rows, c.grid.cols}, c.values);
}

void enforce_observed(std::vector<double>& x, const FieldVolume& observed, const MaskVolume& mask) {
    for (size_t i = 0; i < x.size(); ++i) {
        if (mask.values[i]) x[i] = observed.values[i];
    }
}

std::vector<double> predict(Denoiser& model, std::span<const double> x, double time, const GridSpec& g,
                            const Tensor& cond) {
    NoGradGuard no_grad;
    const double times[] = {time};
    auto out = model.forward(field_tensor(x, g), times, cond, nullptr);
    return {out.data().begin(), out.data().end()};
}

}  // namespace

FieldVolume masked_sample(const FieldVolume& observed, const MaskVolume& mask, const ConditionTensor& cond,
                          Denoiser& model, const NoiseSchedule& sched, Rng& rng, const SamplerOptions& options) {
    check_observed_consistency(observed, mask);
    if (!(cond.grid == observed.grid)) throw std::invalid_argument("masked_sample: condition grid differs");
    const GridSpec& g = observed.grid;
    const Tensor c = cond_tensor(cond);

    std::vector<double> x(observed.values);
    for (size_t i = 0; i < x.size(); ++i) {
        if (!mask.values[i]) x[i] = rng.normal();
    }

    std::vector<double> z(x.size());
    if (options.kind == SamplerKind::Ancestral) {
        for (int t = sched.steps; t >= 1; --t) {
            if (t > 1) rng.fill_normal(z);
            const auto v = predict(model, x, t, g, c);
            x = ancestral_step(x, v, t, sched, z);
            enforce_observed(x, observed, mask);
            if (options.on_step) options.on_step(t - 1, x);
        }
    } else {
        const auto steps = ddim_timesteps(sched.steps, options.ddim_steps);
        for (size_t k = 0; k < steps.size(); ++k) {
            const int t = steps[k];
            const int t_prev = k + 1 < steps.size() ? steps[k + 1] : 0;
            const auto v = predict(model, x, t, g, c);
            x = ddim_step(x, v, t, t_prev, sched);
            enforce_observed(x, observed, mask);
            if (options.on_step) options.on_step(t_prev, x);
        }
    }
    for (double v : x) {
        if (!std::isfinite(v)) throw NumericError("masked_sample: non-finite output");
    }
    return FieldVolume(g, std::move(x));
}

namespace {

struct PreparedBatch {
    GridSpec grid;
    std::vector<double> targets;  // (B, 1, L, H, W)
    std::vector<double> masked;   // (B, 1, L, H, W), kMissing where unobserved
    std::vector<double> conds;    // (B, 10, L, H, W)
    int64_t size = 0;

    Shape field_shape() const { return {size, 1, grid.frames, grid.rows, grid.cols}; }
    Shape cond_shape() const { return {size, kConditionChannels, grid.frames, grid.rows, grid.cols}; }
};

PreparedBatch prepare(std::span<const TrainingExample> batch, Rng& rng, const TrainStepOptions& options) {
    if (batch.empty()) throw std::invalid_argument("training batch is empty");
    PreparedBatch p;
    p.grid = batch[0].target.grid;
    p.size = static_cast<int64_t>(batch.size());
    for (const auto& ex : batch) {
        if (!(ex.target.grid == p.grid) || !(ex.mask.grid == p.grid)) {
            throw std::invalid_argument("training batch mixes grids or has mask/target mismatch");
        }
        for (double v : ex.target.values) {
            if (v == kMissing) throw std::invalid_argument("training target has missing pixels");
        }
        FieldVolume target = ex.target;
        const FieldVolume masked = mask_apply(ex.target, ex.mask);
        ConditionTensor cond = assemble_condition(masked, ex.mask, ex.aux, p.grid);
        if (options.augment) augment(target, cond, rng);
        p.targets.insert(p.targets.end(), target.values.begin(), target.values.end());
        const auto ch0 = cond.channel(kMaskedPrecip);
        p.masked.insert(p.masked.end(), ch0.begin(), ch0.end());
        p.conds.insert(p.conds.end(), cond.values.begin(), cond.values.end());
    }
    return p;
}

double finish_step(Tensor loss, Optimization& opt) {
    const double value = loss.item();
    if (!std::isfinite(value)) throw NumericError("training loss is not finite: " + std::to_string(value));
    zero_grads(opt.params);
    loss.backward();
    if (opt.optimizer != nullptr) adam_step(opt.params, *opt.optimizer);
    if (opt.ema != nullptr) ema_update(opt.params, *opt.ema);
    return value;
}

}  // namespace

double train_step(std::span<const TrainingExample> batch, Denoiser& model, const NoiseSchedule& sched,
                  Optimization& opt, const LatWeight& lat, Rng& rng, const TrainStepOptions& options) {
    auto p = prepare(batch, rng, options);
    const int64_t vol = p.grid.volume();
    std::vector<double> x_t(p.targets.size()), v(p.targets.size()), times;
    for (int64_t b = 0; b < p.size; ++b) {
        const int t = static_cast<int>(rng.uniform_int(1, sched.steps));
        times.push_back(t);
        const auto x0 = std::span(p.targets).subspan(b * vol, vol);
        const auto ns = forward_sample(x0, t, sched, rng);
        const auto vt = v_target(x0, ns.noise, t, sched);
        std::ranges::copy(ns.x_t, x_t.begin() + b * vol);
        std::ranges::copy(vt, v.begin() + b * vol);
    }
    const auto x_in = Tensor::from_data(p.field_shape(), std::move(x_t));
    const auto target = Tensor::from_data(p.field_shape(), std::move(v));
    const auto cond = Tensor::from_data(p.cond_shape(), std::move(p.conds));
    const auto pred = model.forward(x_in, times, cond, &rng);
    return finish_step(ops::row_weighted_mse(pred, target, lat.weights), opt);
}

double rf_train_step(std::span<const TrainingExample> batch, Denoiser& model, Optimization& opt, const LatWeight& lat,
                     Rng& rng, const TrainStepOptions& options) {
    auto p = prepare(batch, rng, options);
    const int64_t vol = p.grid.volume();
    std::vector<double> x_s(p.targets.size()), v(p.targets.size()), times;
    for (int64_t b = 0; b < p.size; ++b) {
        const double s = rng.uniform();
        times.push_back(s * kFlowTimeScale);
        for (int64_t i = 0; i < vol; ++i) {
            const double x1 = p.targets[b * vol + i];
            const double x0 = rng.normal();
            x_s[b * vol + i] = (1.0 - s) * x0 + s * x1;
            v[b * vol + i] = x1 - x0;
        }
    }
    const auto x_in = Tensor::from_data(p.field_shape(), std::move(x_s));
    const auto target = Tensor::from_data(p.field_shape(), std::move(v));
    const auto cond = Tensor::from_data(p.cond_shape(), std::move(p.conds));
    const auto pred = model.forward(x_in, times, cond, &rng);
    return finish_step(ops::row_weighted_mse(pred, target, lat.weights), opt);
}

std::vector<double> rk4_integrate(const VelocityField& field, std::vector<double> x, int n_steps) {
    if (n_steps < 1) throw std::invalid_argument("rk4_integrate: n_steps must be >= 1");
    const double h = 1.0 / n_steps;
    std::vector<double> tmp(x.size());
    for (int k = 0; k < n_steps; ++k) {
        const double s = k * h;
        const auto k1 = field(x, s);
        for (size_t i = 0; i < x.size(); ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
        const auto k2 = field(tmp, s + 0.5 * h);
        for (size_t i = 0; i < x.size(); ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
        const auto k3 = field(tmp, s + 0.5 * h);
        for (size_t i = 0; i < x.size(); ++i) tmp[i] = x[i] + h * k3[i];
        const auto k4 = field(tmp, s + h);
        for (size_t i = 0; i < x.size(); ++i) x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    return x;
}

std::vector<double> euler_integrate(const VelocityField& field, std::vector<double> x, int n_steps) {
    if (n_steps < 1) throw std::invalid_argument("euler_integrate: n_steps must be >= 1");
    const double h = 1.0 / n_steps;
    for (int k = 0; k < n_steps; ++k) {
        const auto v = field(x, k * h);
        for (size_t i = 0; i < x.size(); ++i) x[i] += h * v[i];
    }
    return x;
}

FieldVolume rf_sample(const FieldVolume& observed, const MaskVolume& mask, const ConditionTensor& cond,
                      Denoiser& model, int n_steps, Rng& rng) {
    check_observed_consistency(observed, mask);
    const GridSpec& g = observed.grid;
    const Tensor c = cond_tensor(cond);
    std::vector<double> x(observed.values.size());
    rng.fill_normal(x);
    auto field = [&](std::span<const double> state, double s) { return predict(model, state, s * kFlowTimeScale, g, c); };
    x = rk4_integrate(field, std::move(x), n_steps);
    enforce_observed(x, observed, mask);
    for (double v : x) {
        if (!std::isfinite(v)) throw NumericError("rf_sample: non-finite output");
    }
    return FieldVolume(g, std::move(x));
}

double supervised_train_step(std::span<const TrainingExample> batch, Denoiser& model, Optimization& opt,
                             const LatWeight& lat, Rng& rng, const TrainStepOptions& options) {
    auto p = prepare(batch, rng, options);
    const std::vector<double> times(static_cast<size_t>(p.size), 0.0);
    const auto x_in = Tensor::from_data(p.field_shape(), std::move(p.masked));
    const auto target = Tensor::from_data(p.field_shape(), std::move(p.targets));
    const auto cond = Tensor::from_data(p.cond_shape(), std::move(p.conds));
    const auto pred = model.forward(x_in, times, cond, &rng);
    return finish_step(ops::row_weighted_l1(pred, target, lat.weights), opt);
}

FieldVolume supervised_predict(const FieldVolume& observed, const MaskVolume& mask, const ConditionTensor& cond,
                               Denoiser& model) {
    check_observed_consistency(observed, mask);
    auto x = predict(model, observed.values, 0.0, observed.grid, cond_tensor(cond));
    enforce_observed(x, observed, mask);
    return FieldVolume(observed.grid, std::move(x));
}

}  // namespace rainfill
