#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rainfill/rng.hpp"
#include "rainfill/tensor.hpp"

namespace rainfill {

/// A network predicting one output channel from a noisy (or masked) field,
/// a per-sample time value, and the condition stack.
class Denoiser {
public:
    virtual ~Denoiser() = default;
    /// x: (B, 1, L, H, W); cond: (B, 10, L, H, W); times: B values.
    /// A non-null rng selects training mode.
    virtual Tensor forward(const Tensor& x, std::span<const double> times, const Tensor& cond, Rng* train_rng) = 0;
    virtual std::vector<Tensor> parameters() const { return {}; }
};

struct UNetConfig {
    int in_channels = 1;
    int cond_channels = 10;
    int base_channels = 16;
    std::array<int, 4> multipliers{1, 2, 4, 8};
    int temporal_kernel = 3;
    int spatial_kernel = 3;
    int se_reduction = 16;
    int time_embed_dim = 128;
    int time_hidden = 512;
    double dropout3d = 0.0;
    double p_drop = 0.2;
    bool with_time = true;

    /// max(4, min(32, C / 4))
    static int groups_for(int channels);
    /// Throws std::invalid_argument on an inconsistent configuration.
    void validate() const;
    bool operator==(const UNetConfig&) const = default;
};

/// Ordered, named learnable tensors.
class ParamStore {
public:
    Tensor& add(std::string name, Tensor t);
    const std::vector<std::pair<std::string, Tensor>>& named() const { return params_; }
    std::vector<Tensor> tensors() const;
    int64_t count() const;
    const Tensor& get(const std::string& name) const;

private:
    std::vector<std::pair<std::string, Tensor>> params_;
};

/// 3D U-Net velocity network with a parallel condition encoder and additive
/// time/condition fusion at every stage.
class UNet final : public Denoiser {
public:
    UNet(UNetConfig config, uint64_t seed);

    Tensor forward(const Tensor& x, std::span<const double> times, const Tensor& cond, Rng* train_rng) override;
    std::vector<Tensor> parameters() const override { return store_.tensors(); }

    const UNetConfig& config() const { return config_; }
    const ParamStore& store() const { return store_; }
    int64_t parameter_count() const { return store_.count(); }

    /// Sinusoidal features followed by the two-layer MLP: (B, time_hidden).
    Tensor time_features(std::span<const double> times) const;
    /// Per-stage additive vectors in the order inc, E1, E2, E3, D1, D2, D3.
    std::vector<Tensor> stage_projections(const Tensor& g) const;
    /// Channel widths of the seven stages, same order as stage_projections.
    std::array<int, 7> stage_channels() const;

    // Building blocks, exposed for testing.
    Tensor double_conv(const std::string& prefix, const Tensor& x) const;
    Tensor se_gate(const std::string& prefix, const Tensor& h) const;
    Tensor encoder_block(const std::string& prefix, const Tensor& x) const;
    Tensor decoder_block(const std::string& prefix, const Tensor& x, const Tensor& skip) const;

private:
    void add_double_conv(const std::string& prefix, int cin, int cout, Rng& rng);
    void add_linear(const std::string& prefix, int in, int out, Rng& rng);
    Tensor apply_linear(const std::string& prefix, const Tensor& x) const;

    UNetConfig config_;
    ParamStore store_;
};

/// Standard geometric-ladder sinusoidal embedding, (B, dim).
Tensor sinusoidal_embedding(std::span<const double> times, int dim);

}  // namespace rainfill
