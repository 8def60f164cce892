#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rainfill/condition.hpp"
#include "rainfill/diffusion.hpp"
#include "rainfill/schedule.hpp"
#include "rainfill/synthgen.hpp"
#include "rainfill/unet.hpp"
#include "rainfill/volume.hpp"

namespace rainfill {

enum class Method { Ddpm, RectifiedFlow, Supervised };
std::string to_string(Method m);
Method method_from_string(const std::string& name);

/// Every tunable of a run. Keys in the JSON form match the field names.
struct RunConfig {
    // grid
    int64_t frames = 3;
    int64_t rows = 16;
    int64_t cols = 32;
    // diffusion
    int steps = 200;
    std::string schedule = "linear";
    double beta_min = 5e-4;
    double beta_max = 0.1;
    double cosine_s = 0.008;
    std::string sampler = "ddim";
    int ddim_steps = 50;
    int rf_steps = 20;
    std::string method = "ddpm";
    // network
    int base_channels = 16;
    double p_drop = 0.2;
    // optimisation
    double lr = 1e-3;
    double weight_decay = 1e-4;
    int epochs = 200;
    int batch = 8;
    double ema_decay = 0.999;
    double lat_eps = 0.01;
    bool augment = true;
    // transforms
    double x_p = 5.0;
    double p_s = 0.99;
    double ir_low = 270.0;
    double ir_high = 230.0;
    double topo_low = 200.0;
    double topo_high = 2000.0;
    double logistic_s_low = 0.2;
    double logistic_s_high = 0.8;
    // data and sampling
    int train_sequences = 64;
    int eval_sequences = 12;
    int blobs = 5;
    int swath_width = 8;
    int swath_bands = 2;
    int ensemble = 16;
    uint64_t seed = 1;
    uint64_t data_seed = 1;
    uint64_t sample_seed = 7;

    /// Throws ConfigError naming the first offending key.
    void validate() const;

    GridSpec grid() const { return {frames, rows, cols}; }
    NoiseSchedule noise_schedule() const;
    UNetConfig unet() const;
    SamplerOptions sampler_options() const;
    SynthConfig synth() const;
    Method method_kind() const { return method_from_string(method); }

    std::string to_json() const;
    /// Unknown keys are rejected; missing keys keep their defaults.
    static RunConfig from_json(const std::string& text);
    static RunConfig load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    /// Names of every key, in declaration order.
    static std::vector<std::string> keys();
    /// Sets one key from its textual form (as given on the command line).
    void set(const std::string& key, const std::string& value);
    std::string get(const std::string& key) const;
};

}  // namespace rainfill
