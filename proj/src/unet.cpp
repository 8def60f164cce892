#include "rainfill/unet.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rainfill/condition.hpp"
#include "rainfill/ops.hpp"

namespace rainfill {

int UNetConfig::groups_for(int channels) { return std::max(4, std::min(32, channels / 4)); }

void UNetConfig::validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument("UNetConfig: " + m); };
    if (in_channels < 1) fail("in_channels must be >= 1");
    if (cond_channels < 1) fail("cond_channels must be >= 1");
    if (base_channels < 4 || base_channels % 4 != 0) fail("base_channels must be a positive multiple of 4");
    for (size_t i = 1; i < multipliers.size(); ++i) {
        if (multipliers[i] <= multipliers[i - 1]) fail("channel multipliers must be strictly increasing");
    }
    if (multipliers[0] < 1) fail("multipliers must be positive");
    for (int m : multipliers) {
        const int c = base_channels * m;
        if (c % groups_for(c) != 0) fail("channel count " + std::to_string(c) + " not divisible by its group count");
    }
    if (temporal_kernel < 1 || temporal_kernel % 2 == 0) fail("temporal kernel must be odd");
    if (spatial_kernel < 1 || spatial_kernel % 2 == 0) fail("spatial kernel must be odd");
    if (se_reduction < 1) fail("SE reduction must be >= 1");
    if (time_embed_dim < 2 || time_embed_dim % 2 != 0) fail("time embedding dim must be even");
    if (time_hidden < 1) fail("time MLP hidden size must be >= 1");
    if (dropout3d != 0.0) fail("dropout3d other than 0 is not supported");
    if (!(p_drop >= 0.0 && p_drop <= 1.0)) fail("p_drop must lie in [0, 1]");
}

Tensor& ParamStore::add(std::string name, Tensor t) {
    for (const auto& [n, _] : params_) {
        if (n == name) throw std::logic_error("duplicate parameter name " + name);
    }
    params_.emplace_back(std::move(name), std::move(t));
    return params_.back().second;
}

std::vector<Tensor> ParamStore::tensors() const {
    std::vector<Tensor> out;
    out.reserve(params_.size());
    for (const auto& [_, t] : params_) out.push_back(t);
    return out;
}

int64_t ParamStore::count() const {
    int64_t n = 0;
    for (const auto& [_, t] : params_) n += t.numel();
    return n;
}

const Tensor& ParamStore::get(const std::string& name) const {
    for (const auto& [n, t] : params_) {
        if (n == name) return t;
    }
    throw std::out_of_range("no parameter named " + name);
}

namespace {

Tensor uniform_param(Shape shape, double bound, Rng& rng) {
    std::vector<double> v(static_cast<size_t>(numel(shape)));
    for (auto& x : v) x = rng.uniform(-bound, bound);
    return Tensor::from_data(std::move(shape), std::move(v), true);
}

}  // namespace

UNet::UNet(UNetConfig config, uint64_t seed) : config_(config) {
    config_.validate();
    Rng rng(seed);
    const int b = config_.base_channels;
    const auto& m = config_.multipliers;
    const int c0 = b * m[0], c1 = b * m[1], c2 = b * m[2], c3 = b * m[3];

    if (config_.with_time) {
        add_linear("time.fc1", config_.time_embed_dim, config_.time_hidden, rng);
        add_linear("time.fc2", config_.time_hidden, config_.time_hidden, rng);
        const auto widths = stage_channels();
        static const char* names[] = {"inc", "e1", "e2", "e3", "d1", "d2", "d3"};
        for (size_t s = 0; s < widths.size(); ++s) {
            add_linear(std::string("time.proj.") + names[s], config_.time_hidden, widths[s], rng);
        }
    }

    add_double_conv("cond.inc", config_.cond_channels, c0, rng);
    add_double_conv("cond.e1", c0, c1, rng);
    add_double_conv("cond.e2", c1, c2, rng);
    add_double_conv("cond.e3", c2, c3, rng);

    add_double_conv("inc", config_.in_channels, c0, rng);
    add_double_conv("e1", c0, c1, rng);
    add_double_conv("e2", c1, c2, rng);
    add_double_conv("e3", c2, c3, rng);

    const std::array<std::pair<int, int>, 3> ups{{{c3, c2}, {c2, c1}, {c1, c0}}};
    static const char* dec[] = {"d1", "d2", "d3"};
    for (size_t i = 0; i < ups.size(); ++i) {
        const auto [hi, lo] = ups[i];
        const double bound = 1.0 / std::sqrt(static_cast<double>(lo * 4));
        store_.add(std::string(dec[i]) + ".up.weight", uniform_param({hi, lo, 1, 2, 2}, bound, rng));
        store_.add(std::string(dec[i]) + ".up.bias", uniform_param({lo}, bound, rng));
        add_double_conv(std::string(dec[i]) + ".conv", 2 * lo, lo, rng);
    }

    const double head_bound = 1.0 / std::sqrt(static_cast<double>(c0));
    store_.add("head.weight", uniform_param({config_.in_channels, c0, 1, 1, 1}, head_bound, rng));
    store_.add("head.bias", uniform_param({config_.in_channels}, head_bound, rng));
}

std::array<int, 7> UNet::stage_channels() const {
    const int b = config_.base_channels;
    const auto& m = config_.multipliers;
    return {b * m[0], b * m[1], b * m[2], b * m[3], b * m[2], b * m[1], b * m[0]};
}

void UNet::add_linear(const std::string& prefix, int in, int out, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    store_.add(prefix + ".weight", uniform_param({out, in}, bound, rng));
    store_.add(prefix + ".bias", uniform_param({out}, bound, rng));
}

void UNet::add_double_conv(const std::string& prefix, int cin, int cout, Rng& rng) {
    const int kt = config_.temporal_kernel, ks = config_.spatial_kernel;
    const double b1 = 1.0 / std::sqrt(static_cast<double>(cin * kt * ks * ks));
    const double b2 = 1.0 / std::sqrt(static_cast<double>(cout * kt * ks * ks));
    store_.add(prefix + ".conv1.weight", uniform_param({cout, cin, kt, ks, ks}, b1, rng));
    store_.add(prefix + ".conv1.bias", uniform_param({cout}, b1, rng));
    store_.add(prefix + ".norm1.weight", Tensor::full({cout}, 1.0, true));
    store_.add(prefix + ".norm1.bias", Tensor::zeros({cout}, true));
    store_.add(prefix + ".conv2.weight", uniform_param({cout, cout, kt, ks, ks}, b2, rng));
    store_.add(prefix + ".conv2.bias", uniform_param({cout}, b2, rng));
    store_.add(prefix + ".norm2.weight", Tensor::full({cout}, 1.0, true));
    store_.add(prefix + ".norm2.bias", Tensor::zeros({cout}, true));
    const int hidden = std::max(1, cout / config_.se_reduction);
    add_linear(prefix + ".se.fc1", cout, hidden, rng);
    add_linear(prefix + ".se.fc2", hidden, cout, rng);
}

Tensor UNet::apply_linear(const std::string& prefix, const Tensor& x) const {
    return ops::linear(x, store_.get(prefix + ".weight"), store_.get(prefix + ".bias"));
}

Tensor UNet::se_gate(const std::string& prefix, const Tensor& h) const {
    auto s = ops::reshape(ops::adaptive_avg_pool3d(h), {h.dim(0), h.dim(1)});
    s = ops::silu(apply_linear(prefix + ".se.fc1", s));
    return ops::sigmoid(apply_linear(prefix + ".se.fc2", s));
}

Tensor UNet::double_conv(const std::string& prefix, const Tensor& x) const {
    const int64_t pt = config_.temporal_kernel / 2, ps = config_.spatial_kernel / 2;
    const ops::Extent3 pad{pt, ps, ps};
    auto h = ops::conv3d(x, store_.get(prefix + ".conv1.weight"), store_.get(prefix + ".conv1.bias"), {1, 1, 1}, pad);
    const int groups = UNetConfig::groups_for(static_cast<int>(h.dim(1)));
    h = ops::silu(ops::group_norm(h, groups, store_.get(prefix + ".norm1.weight"), store_.get(prefix + ".norm1.bias")));
    h = ops::conv3d(h, store_.get(prefix + ".conv2.weight"), store_.get(prefix + ".conv2.bias"), {1, 1, 1}, pad);
    h = ops::silu(ops::group_norm(h, groups, store_.get(prefix + ".norm2.weight"), store_.get(prefix + ".norm2.bias")));
    return ops::scale_channels(h, se_gate(prefix, h));
}

Tensor UNet::encoder_block(const std::string& prefix, const Tensor& x) const {
    return double_conv(prefix, ops::maxpool3d(x, {1, 2, 2}));
}

Tensor UNet::decoder_block(const std::string& prefix, const Tensor& x, const Tensor& skip) const {
    auto up = ops::conv_transpose3d(x, store_.get(prefix + ".up.weight"), store_.get(prefix + ".up.bias"), {1, 2, 2});
    if (up.shape() != skip.shape()) {
        throw std::invalid_argument("decoder " + prefix + ": upsampled " + shape_str(up.shape()) +
                                    " does not match skip " + shape_str(skip.shape()));
    }
    return double_conv(prefix + ".conv", ops::concat({up, skip}, 1));
}

Tensor sinusoidal_embedding(std::span<const double> times, int dim) {
    const int half = dim / 2;
    const auto batch = static_cast<int64_t>(times.size());
    std::vector<double> v(static_cast<size_t>(batch * dim));
    for (int64_t b = 0; b < batch; ++b) {
        for (int k = 0; k < half; ++k) {
            const double freq = std::exp(-std::log(10000.0) * k / half);
            v[b * dim + k] = std::sin(times[b] * freq);
            v[b * dim + half + k] = std::cos(times[b] * freq);
        }
    }
    return Tensor::from_data({batch, dim}, std::move(v));
}

Tensor UNet::time_features(std::span<const double> times) const {
    if (!config_.with_time) throw std::logic_error("time_features on a network built without time embedding");
    auto g = apply_linear("time.fc1", sinusoidal_embedding(times, config_.time_embed_dim));
    return apply_linear("time.fc2", ops::silu(g));
}

std::vector<Tensor> UNet::stage_projections(const Tensor& g) const {
    static const char* names[] = {"inc", "e1", "e2", "e3", "d1", "d2", "d3"};
    std::vector<Tensor> out;
    for (const char* n : names) out.push_back(apply_linear(std::string("time.proj.") + n, g));
    return out;
}

Tensor UNet::forward(const Tensor& x, std::span<const double> times, const Tensor& cond_in, Rng* train_rng) {
    if (x.rank() != 5 || cond_in.rank() != 5) throw std::invalid_argument("UNet: inputs must be (B, C, L, H, W)");
    const int64_t batch = x.dim(0);
    if (x.dim(1) != config_.in_channels) throw std::invalid_argument("UNet: input channel mismatch");
    if (cond_in.dim(0) != batch || cond_in.dim(1) != config_.cond_channels) {
        throw std::invalid_argument("UNet: condition shape " + shape_str(cond_in.shape()) + " incompatible with input " +
                                    shape_str(x.shape()));
    }
    for (int a = 2; a < 5; ++a) {
        if (cond_in.dim(a) != x.dim(a)) throw std::invalid_argument("UNet: condition grid differs from input grid");
    }
    if (x.dim(3) % 8 != 0 || x.dim(4) % 8 != 0) {
        throw std::invalid_argument("UNet: H and W must be divisible by 8, got " + shape_str(x.shape()));
    }
    if (static_cast<int64_t>(times.size()) != batch) throw std::invalid_argument("UNet: need one time per sample");

    Tensor cond = cond_in;
    if (train_rng != nullptr && config_.p_drop > 0.0 && config_.cond_channels == kConditionChannels) {
        std::vector<double> v(cond_in.data().begin(), cond_in.data().end());
        const GridSpec grid{x.dim(2), x.dim(3), x.dim(4)};
        const int64_t per_sample = kConditionChannels * grid.volume();
        for (int64_t b = 0; b < batch; ++b) {
            ConditionTensor c(grid);
            std::copy_n(v.begin() + b * per_sample, per_sample, c.values.begin());
            if (cond_dropout(c, config_.p_drop, *train_rng)) {
                std::ranges::copy(c.values, v.begin() + b * per_sample);
            }
        }
        cond = Tensor::from_data(cond_in.shape(), std::move(v));
    }

    std::vector<Tensor> proj;
    if (config_.with_time) proj = stage_projections(time_features(times));
    auto add_time = [&](Tensor h, size_t stage) {
        return config_.with_time ? ops::add_channel_bias(h, proj[stage]) : h;
    };

    const auto z1 = double_conv("cond.inc", cond);
    const auto z2 = encoder_block("cond.e1", z1);
    const auto z3 = encoder_block("cond.e2", z2);
    const auto z4 = encoder_block("cond.e3", z3);

    const auto x1 = ops::add(add_time(double_conv("inc", x), 0), z1);
    const auto x2 = ops::add(add_time(encoder_block("e1", x1), 1), z2);
    const auto x3 = ops::add(add_time(encoder_block("e2", x2), 2), z3);
    const auto x4 = ops::add(add_time(encoder_block("e3", x3), 3), z4);

    const auto u1 = ops::add(add_time(decoder_block("d1", x4, x3), 4), z3);
    const auto u2 = ops::add(add_time(decoder_block("d2", u1, x2), 5), z2);
    const auto u3 = ops::add(add_time(decoder_block("d3", u2, x1), 6), z1);

    return ops::conv3d(u3, store_.get("head.weight"), store_.get("head.bias"));
}

}  // namespace rainfill
