#include "rainfill/optim.hpp"

#include <cmath>
#include <stdexcept>

#include "rainfill/errors.hpp"

namespace rainfill {

AdamState::AdamState(const std::vector<Tensor>& params, AdamOptions opts) : options(opts) {
    for (const auto& p : params) {
        first_moment.emplace_back(static_cast<size_t>(p.numel()), 0.0);
        second_moment.emplace_back(static_cast<size_t>(p.numel()), 0.0);
    }
}

void adam_step(std::vector<Tensor>& params, AdamState& state) {
    if (params.size() != state.first_moment.size()) {
        throw std::invalid_argument("adam_step: parameter count changed since state creation");
    }
    for (size_t k = 0; k < params.size(); ++k) {
        if (static_cast<size_t>(params[k].numel()) != state.first_moment[k].size()) {
            throw std::invalid_argument("adam_step: parameter " + std::to_string(k) + " changed shape");
        }
        if (!params[k].has_grad()) continue;
        for (double g : params[k].grad()) {
            if (!std::isfinite(g)) {
                throw NumericError("adam_step: non-finite gradient in parameter " + std::to_string(k));
            }
        }
    }

    const auto& o = state.options;
    ++state.step;
    const double bc1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
    for (size_t k = 0; k < params.size(); ++k) {
        auto value = params[k].data_mut();
        const auto grad = params[k].grad();
        auto& m = state.first_moment[k];
        auto& v = state.second_moment[k];
        for (size_t i = 0; i < value.size(); ++i) {
            const double g = grad.empty() ? 0.0 : grad[i];
            m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g;
            v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g * g;
            value[i] -= o.lr * o.weight_decay * value[i];
            value[i] -= o.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + o.eps);
        }
    }
}

void zero_grads(std::vector<Tensor>& params) {
    for (auto& p : params) p.zero_grad();
}

EmaState::EmaState(const std::vector<Tensor>& params, double decay_) : decay(decay_) {
    if (!(decay > 0.0 && decay < 1.0)) throw std::invalid_argument("EMA decay must lie in (0, 1)");
    for (const auto& p : params) shadow.emplace_back(p.data().begin(), p.data().end());
}

void ema_update(const std::vector<Tensor>& params, EmaState& ema) {
    if (params.size() != ema.shadow.size()) throw std::invalid_argument("ema_update: parameter count mismatch");
    for (size_t k = 0; k < params.size(); ++k) {
        const auto cur = params[k].data();
        auto& s = ema.shadow[k];
        if (s.size() != cur.size()) throw std::invalid_argument("ema_update: parameter shape mismatch");
        for (size_t i = 0; i < s.size(); ++i) s[i] = ema.decay * s[i] + (1.0 - ema.decay) * cur[i];
    }
}

void ema_copy_to(const EmaState& ema, std::vector<Tensor>& params) {
    if (params.size() != ema.shadow.size()) throw std::invalid_argument("ema_copy_to: parameter count mismatch");
    for (size_t k = 0; k < params.size(); ++k) {
        auto dst = params[k].data_mut();
        std::copy(ema.shadow[k].begin(), ema.shadow[k].end(), dst.begin());
    }
}

}  // namespace rainfill
