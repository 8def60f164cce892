#pragma once

#include <cstdint>
#include <vector>

#include "rainfill/tensor.hpp"

namespace rainfill {

struct AdamOptions {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;  // decoupled
};

/// Adam with decoupled weight decay.
struct AdamState {
    AdamOptions options;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
    int64_t step = 0;

    explicit AdamState(const std::vector<Tensor>& params, AdamOptions opts = {});
};

/// Applies one update from the accumulated gradients. Throws NumericError
/// (leaving every parameter untouched) if any gradient is non-finite.
/// Parameters without a gradient are treated as having zero gradient.
void adam_step(std::vector<Tensor>& params, AdamState& state);

void zero_grads(std::vector<Tensor>& params);

/// Shadow parameters updated as shadow <- decay * shadow + (1 - decay) * current.
struct EmaState {
    double decay = 0.999;
    std::vector<std::vector<double>> shadow;

    EmaState(const std::vector<Tensor>& params, double decay);
};

void ema_update(const std::vector<Tensor>& params, EmaState& ema);
/// Overwrites the parameter values with the shadow copy.
void ema_copy_to(const EmaState& ema, std::vector<Tensor>& params);

}  // namespace rainfill
