#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rainfill/condition.hpp"
#include "rainfill/optim.hpp"
#include "rainfill/rng.hpp"
#include "rainfill/schedule.hpp"
#include "rainfill/unet.hpp"
#include "rainfill/volume.hpp"

namespace rainfill {

/// Per-row loss weights w(phi_h) = eps + (1 - eps) cos(phi_h) / mean_h cos(phi_h).
struct LatWeight {
    std::vector<double> weights;
    double floor = 0.0;
};

LatWeight lat_weight(const GridSpec& grid, double floor_eps);

struct NoisedSample {
    std::vector<double> x_t;
    std::vector<double> noise;
};

/// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps with eps drawn from rng.
NoisedSample forward_sample(std::span<const double> x0, int t, const NoiseSchedule& sched, Rng& rng);
std::vector<double> noised(std::span<const double> x0, std::span<const double> noise, int t, const NoiseSchedule& sched);

/// v = sqrt(abar_t) eps - sqrt(1 - abar_t) x0
std::vector<double> v_target(std::span<const double> x0, std::span<const double> noise, int t,
                             const NoiseSchedule& sched);

struct Reconstruction {
    std::vector<double> noise;  // eps_hat
    std::vector<double> x0;     // x0_hat
};

/// eps_hat = sqrt(abar_t) v + sqrt(1 - abar_t) x_t ; x0_hat = (x_t - sqrt(1 - abar_t) eps_hat) / sqrt(abar_t).
/// Throws std::domain_error when abar_t == 0.
Reconstruction reconstruct(std::span<const double> x_t, std::span<const double> v_hat, int t,
                           const NoiseSchedule& sched);

/// x_{t-1} = (x_t - (1 - alpha_t) / sqrt(1 - abar_t) eps_hat) / sqrt(alpha_t) + sqrt(beta_t) z.
/// `z` is ignored at t == 1.
std::vector<double> ancestral_step(std::span<const double> x_t, std::span<const double> v_hat, int t,
                                   const NoiseSchedule& sched, std::span<const double> z);

/// Deterministic (eta = 0) DDIM transition from step t to t_prev (0 allowed).
std::vector<double> ddim_step(std::span<const double> x_t, std::span<const double> v_hat, int t, int t_prev,
                              const NoiseSchedule& sched);

/// Descending, de-duplicated steps from T to 1 with uniform stride.
std::vector<int> ddim_timesteps(int total_steps, int n_steps);

enum class SamplerKind { Ancestral, Ddim };
std::string to_string(SamplerKind kind);
SamplerKind sampler_kind_from_string(const std::string& name);

struct SamplerOptions {
    SamplerKind kind = SamplerKind::Ancestral;
    int ddim_steps = 50;
    /// Called after each enforced step with the new step index and state.
    std::function<void(int, std::span<const double>)> on_step;
};

/// Fills the masked pixels of `observed` by reverse diffusion, restoring the
/// observed pixels after every step. `observed` must hold kMissing exactly
/// where mask == 0.
FieldVolume masked_sample(const FieldVolume& observed, const MaskVolume& mask, const ConditionTensor& cond,
                          Denoiser& model, const NoiseSchedule& sched, Rng& rng, const SamplerOptions& options);

/// One training example before masking and condition assembly.
struct TrainingExample {
    FieldVolume target;  // complete field in [0, 1]
    MaskVolume mask;
    AuxiliaryFields aux;
};

struct TrainStepOptions {
    bool augment = false;
};

/// Where the update goes. Leave optimizer/ema null to evaluate the loss and
/// gradients without changing parameters.
struct Optimization {
    std::vector<Tensor> params;
    AdamState* optimizer = nullptr;
    EmaState* ema = nullptr;
};

/// One v-prediction step on a batch; returns the latitude-weighted loss.
double train_step(std::span<const TrainingExample> batch, Denoiser& model, const NoiseSchedule& sched,
                  Optimization& opt, const LatWeight& lat, Rng& rng, const TrainStepOptions& options = {});

/// Network time input used for flow-matching models, s in [0, 1] scaled.
inline constexpr double kFlowTimeScale = 1000.0;

/// Flow matching step: x_s = (1 - s) noise + s x1, regress onto x1 - noise.
double rf_train_step(std::span<const TrainingExample> batch, Denoiser& model, Optimization& opt, const LatWeight& lat,
                     Rng& rng, const TrainStepOptions& options = {});

using VelocityField = std::function<std::vector<double>(std::span<const double> x, double s)>;
std::vector<double> rk4_integrate(const VelocityField& field, std::vector<double> x, int n_steps);
std::vector<double> euler_integrate(const VelocityField& field, std::vector<double> x, int n_steps);

/// Integrates the learned velocity from noise at s = 0 to s = 1 with fixed-step
/// RK4, then overwrites the observed pixels.
FieldVolume rf_sample(const FieldVolume& observed, const MaskVolume& mask, const ConditionTensor& cond,
                      Denoiser& model, int n_steps, Rng& rng);

/// Direct regression step (no time input): predict the target from the
/// masked field, latitude-weighted L1 loss.
double supervised_train_step(std::span<const TrainingExample> batch, Denoiser& model, Optimization& opt,
                             const LatWeight& lat, Rng& rng, const TrainStepOptions& options = {});
FieldVolume supervised_predict(const FieldVolume& observed, const MaskVolume& mask, const ConditionTensor& cond,
                               Denoiser& model);

/// Rejects mask/sentinel disagreement.
void check_observed_consistency(const FieldVolume& observed, const MaskVolume& mask);

}  // namespace rainfill
