#include "rainfill/ops.hpp"

#include <cmath>
#include <memory>
#include <numeric>
#include <stdexcept>

#include "rainfill/kernels.hpp"

namespace rainfill::ops {

using detail::accumulate;
using detail::make_result;
using detail::Node;

namespace {

constexpr int64_t kParallelThreshold = 1 << 14;

void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
}

void require_rank(const Tensor& x, int rank, const char* op) {
    require(x.defined(), std::string(op) + ": undefined input");
    require(x.rank() == rank, std::string(op) + ": expected rank " + std::to_string(rank) + " input, got " +
                                  shape_str(x.shape()));
}

double sigmoid_scalar(double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

template <class Fwd, class Bwd>
Tensor unary(const Tensor& x, Fwd fwd, Bwd dfdx) {
    const auto in = x.data();
    const auto n = static_cast<int64_t>(in.size());
    std::vector<double> out(in.size());
#pragma omp parallel for schedule(static) if (n > kParallelThreshold)
    for (int64_t i = 0; i < n; ++i) out[i] = fwd(in[i]);
    return make_result(x.shape(), std::move(out), {x}, [x, dfdx](Node& self) {
        const auto in = x.data();
        const auto m = static_cast<int64_t>(in.size());
        std::vector<double> d(in.size());
#pragma omp parallel for schedule(static) if (m > kParallelThreshold)
        for (int64_t i = 0; i < m; ++i) d[i] = self.grad[i] * dfdx(in[i], self.value[i]);
        accumulate(x.node(), d);
    });
}

enum class BinaryKind { Add, Sub, Mul };

Tensor binary(const Tensor& a, const Tensor& b, BinaryKind kind) {
    require(a.defined() && b.defined(), "binary op on undefined tensor");
    const bool same = a.shape() == b.shape();
    const bool a_scalar = a.numel() == 1;
    const bool b_scalar = b.numel() == 1;
    require(same || a_scalar || b_scalar, "binary op shape mismatch: " + shape_str(a.shape()) + " vs " +
                                              shape_str(b.shape()));
    const bool bcast_a = !same && a_scalar;
    const bool bcast_b = !same && b_scalar;
    const Shape shape = bcast_a ? b.shape() : a.shape();
    const int64_t n = rainfill::numel(shape);
    const auto av = a.data();
    const auto bv = b.data();
    std::vector<double> out(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        const double x = av[bcast_a ? 0 : i];
        const double y = bv[bcast_b ? 0 : i];
        out[i] = kind == BinaryKind::Add ? x + y : kind == BinaryKind::Sub ? x - y : x * y;
    }
    return make_result(shape, std::move(out), {a, b}, [a, b, kind, bcast_a, bcast_b, n](Node& self) {
        const auto av = a.data();
        const auto bv = b.data();
        if (a.requires_grad()) {
            std::vector<double> da(static_cast<size_t>(a.numel()), 0.0);
            for (int64_t i = 0; i < n; ++i) {
                const double g = kind == BinaryKind::Mul ? self.grad[i] * bv[bcast_b ? 0 : i] : self.grad[i];
                da[bcast_a ? 0 : i] += g;
            }
            accumulate(a.node(), da);
        }
        if (b.requires_grad()) {
            std::vector<double> db(static_cast<size_t>(b.numel()), 0.0);
            for (int64_t i = 0; i < n; ++i) {
                double g = self.grad[i];
                if (kind == BinaryKind::Sub) g = -g;
                if (kind == BinaryKind::Mul) g *= av[bcast_a ? 0 : i];
                db[bcast_b ? 0 : i] += g;
            }
            accumulate(b.node(), db);
        }
    });
}

kernels::Extent3 spatial_extent(const Tensor& x) { return {x.dim(2), x.dim(3), x.dim(4)}; }

const char* axis_name(int a) {
    static const char* names[] = {"time", "height", "width"};
    return names[a];
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::Add); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::Sub); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::Mul); }

Tensor scale(const Tensor& a, double factor) {
    return unary(a, [factor](double x) { return factor * x; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double value) {
    return unary(a, [value](double x) { return x + value; }, [](double, double) { return 1.0; });
}

Tensor square(const Tensor& a) {
    return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor silu(const Tensor& x) {
    return unary(
        x, [](double v) { return v * sigmoid_scalar(v); },
        [](double v, double) {
            const double s = sigmoid_scalar(v);
            return s * (1.0 + v * (1.0 - s));
        });
}

Tensor sigmoid(const Tensor& x) {
    return unary(x, sigmoid_scalar, [](double, double y) { return y * (1.0 - y); });
}

Tensor sum(const Tensor& x) {
    const auto v = x.data();
    const double s = std::accumulate(v.begin(), v.end(), 0.0);
    return make_result({}, {s}, {x}, [x](Node& self) {
        accumulate(x.node(), std::vector<double>(static_cast<size_t>(x.numel()), self.grad[0]));
    });
}

Tensor mean(const Tensor& x) {
    require(x.numel() > 0, "mean of empty tensor");
    return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor reshape(const Tensor& x, Shape shape) {
    require(rainfill::numel(shape) == x.numel(),
            "reshape " + shape_str(x.shape()) + " -> " + shape_str(shape) + " changes element count");
    std::vector<double> v(x.data().begin(), x.data().end());
    return make_result(std::move(shape), std::move(v), {x}, [x](Node& self) { accumulate(x.node(), self.grad); });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    require_rank(x, 2, "linear");
    require_rank(weight, 2, "linear weight");
    const int64_t batch = x.dim(0), in = x.dim(1), out = weight.dim(0);
    require(weight.dim(1) == in, "linear: weight expects " + std::to_string(weight.dim(1)) +
                                     " input features, got " + std::to_string(in));
    if (bias.defined()) require(bias.numel() == out, "linear: bias length mismatch");
    const auto xv = x.data();
    const auto wv = weight.data();
    std::vector<double> y(static_cast<size_t>(batch * out));
    for (int64_t b = 0; b < batch; ++b) {
        for (int64_t o = 0; o < out; ++o) {
            double acc = bias.defined() ? bias.data()[o] : 0.0;
            for (int64_t i = 0; i < in; ++i) acc += wv[o * in + i] * xv[b * in + i];
            y[b * out + o] = acc;
        }
    }
    return make_result({batch, out}, std::move(y), {x, weight, bias}, [=](Node& self) {
        const auto& g = self.grad;
        const auto xv = x.data();
        const auto wv = weight.data();
        if (x.requires_grad()) {
            std::vector<double> dx(static_cast<size_t>(batch * in), 0.0);
            for (int64_t b = 0; b < batch; ++b)
                for (int64_t o = 0; o < out; ++o)
                    for (int64_t i = 0; i < in; ++i) dx[b * in + i] += g[b * out + o] * wv[o * in + i];
            accumulate(x.node(), dx);
        }
        if (weight.requires_grad()) {
            std::vector<double> dw(static_cast<size_t>(out * in), 0.0);
            for (int64_t b = 0; b < batch; ++b)
                for (int64_t o = 0; o < out; ++o)
                    for (int64_t i = 0; i < in; ++i) dw[o * in + i] += g[b * out + o] * xv[b * in + i];
            accumulate(weight.node(), dw);
        }
        if (bias.defined() && bias.requires_grad()) {
            std::vector<double> db(static_cast<size_t>(out), 0.0);
            for (int64_t b = 0; b < batch; ++b)
                for (int64_t o = 0; o < out; ++o) db[o] += g[b * out + o];
            accumulate(bias.node(), db);
        }
    });
}

Tensor conv3d(const Tensor& x, const Tensor& weight, const Tensor& bias, Extent3 stride, Extent3 padding) {
    require_rank(x, 5, "conv3d");
    require_rank(weight, 5, "conv3d weight");
    kernels::ConvGeometry g;
    g.batch = x.dim(0);
    g.in_channels = x.dim(1);
    g.out_channels = weight.dim(0);
    g.in_size = spatial_extent(x);
    g.kernel = {weight.dim(2), weight.dim(3), weight.dim(4)};
    g.stride = stride;
    g.padding = padding;
    require(weight.dim(1) == g.in_channels, "conv3d: weight expects " + std::to_string(weight.dim(1)) +
                                                " input channels, input has " + std::to_string(g.in_channels));
    for (int a = 0; a < 3; ++a) {
        require(stride[a] >= 1, std::string("conv3d: non-positive stride on ") + axis_name(a) + " axis");
        require(padding[a] >= 0, std::string("conv3d: negative padding on ") + axis_name(a) + " axis");
        require(g.kernel[a] <= g.in_size[a] + 2 * padding[a],
                std::string("conv3d: kernel exceeds padded input on ") + axis_name(a) + " axis");
    }
    if (bias.defined()) require(bias.numel() == g.out_channels, "conv3d: bias length mismatch");
    const auto out = g.out_size();
    Shape shape{g.batch, g.out_channels, out[0], out[1], out[2]};
    std::vector<double> y(static_cast<size_t>(rainfill::numel(shape)));
    const std::span<const double> bias_span = bias.defined() ? bias.data() : std::span<const double>{};
    kernels::conv3d_forward(g, x.data(), weight.data(), bias_span, y);

    return make_result(std::move(shape), std::move(y), {x, weight, bias}, [=](Node& self) {
        std::vector<double> dx, dw, db;
        if (x.requires_grad()) dx.assign(static_cast<size_t>(x.numel()), 0.0);
        if (weight.requires_grad()) dw.assign(static_cast<size_t>(weight.numel()), 0.0);
        if (bias.defined() && bias.requires_grad()) db.assign(static_cast<size_t>(bias.numel()), 0.0);
        kernels::conv3d_backward(g, x.data(), weight.data(), self.grad, dx, dw, db);
        if (!dx.empty()) accumulate(x.node(), dx);
        if (!dw.empty()) accumulate(weight.node(), dw);
        if (!db.empty()) accumulate(bias.node(), db);
    });
}

Tensor conv_transpose3d(const Tensor& x, const Tensor& weight, const Tensor& bias, Extent3 stride,
                        Extent3 padding) {
    require_rank(x, 5, "conv_transpose3d");
    require_rank(weight, 5, "conv_transpose3d weight");
    for (int a = 0; a < 3; ++a) {
        require(stride[a] >= 1, std::string("conv_transpose3d: non-positive stride on ") + axis_name(a) + " axis");
        require(padding[a] >= 0, std::string("conv_transpose3d: negative padding on ") + axis_name(a) + " axis");
    }
    require(weight.dim(0) == x.dim(1), "conv_transpose3d: weight expects " + std::to_string(weight.dim(0)) +
                                           " input channels, input has " + std::to_string(x.dim(1)));
    kernels::ConvGeometry g;  // adjoint convolution: output -> input
    g.batch = x.dim(0);
    g.out_channels = x.dim(1);
    g.in_channels = weight.dim(1);
    g.kernel = {weight.dim(2), weight.dim(3), weight.dim(4)};
    g.stride = stride;
    g.padding = padding;
    for (int a = 0; a < 3; ++a) {
        g.in_size[a] = (x.dim(2 + a) - 1) * stride[a] - 2 * padding[a] + g.kernel[a];
        require(g.in_size[a] >= 1, std::string("conv_transpose3d: empty output on ") + axis_name(a) + " axis");
    }
    if (bias.defined()) require(bias.numel() == g.in_channels, "conv_transpose3d: bias length mismatch");
    Shape shape{g.batch, g.in_channels, g.in_size[0], g.in_size[1], g.in_size[2]};
    std::vector<double> y(static_cast<size_t>(rainfill::numel(shape)));
    const std::span<const double> bias_span = bias.defined() ? bias.data() : std::span<const double>{};
    kernels::conv_transpose3d_forward(g, x.data(), weight.data(), bias_span, y);

    return make_result(std::move(shape), std::move(y), {x, weight, bias}, [=](Node& self) {
        std::vector<double> dx, dw, db;
        if (x.requires_grad()) dx.assign(static_cast<size_t>(x.numel()), 0.0);
        if (weight.requires_grad()) dw.assign(static_cast<size_t>(weight.numel()), 0.0);
        if (bias.defined() && bias.requires_grad()) db.assign(static_cast<size_t>(bias.numel()), 0.0);
        kernels::conv_transpose3d_backward(g, x.data(), weight.data(), self.grad, dx, dw, db);
        if (!dx.empty()) accumulate(x.node(), dx);
        if (!dw.empty()) accumulate(weight.node(), dw);
        if (!db.empty()) accumulate(bias.node(), db);
    });
}

Tensor maxpool3d(const Tensor& x, Extent3 window) {
    require_rank(x, 5, "maxpool3d");
    kernels::PoolGeometry g;
    g.planes = x.dim(0) * x.dim(1);
    g.in_size = spatial_extent(x);
    g.window = window;
    for (int a = 0; a < 3; ++a) {
        require(window[a] >= 1, "maxpool3d: non-positive window");
        require(g.in_size[a] % window[a] == 0, std::string("maxpool3d: ") + axis_name(a) + " extent " +
                                                   std::to_string(g.in_size[a]) + " not divisible by " +
                                                   std::to_string(window[a]));
    }
    const auto out = g.out_size();
    Shape shape{x.dim(0), x.dim(1), out[0], out[1], out[2]};
    const auto n = rainfill::numel(shape);
    std::vector<double> y(static_cast<size_t>(n));
    auto argmax = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(n));
    kernels::maxpool3d_forward(g, x.data(), y, *argmax);
    return make_result(std::move(shape), std::move(y), {x}, [x, g, argmax](Node& self) {
        std::vector<double> dx(static_cast<size_t>(x.numel()), 0.0);
        kernels::maxpool3d_backward(g, self.grad, *argmax, dx);
        accumulate(x.node(), dx);
    });
}

Tensor group_norm(const Tensor& x, int64_t groups, const Tensor& gamma, const Tensor& beta, double eps) {
    require(x.defined() && x.rank() >= 2, "group_norm: expected (B, C, ...) input");
    kernels::GroupNormGeometry g;
    g.batch = x.dim(0);
    g.channels = x.dim(1);
    g.groups = groups;
    g.spatial = x.numel() / (g.batch * g.channels);
    g.eps = eps;
    require(groups >= 1 && g.channels % groups == 0,
            "group_norm: " + std::to_string(g.channels) + " channels not divisible into " + std::to_string(groups) +
                " groups");
    require(gamma.numel() == g.channels && beta.numel() == g.channels, "group_norm: affine length mismatch");
    auto xhat = std::make_shared<std::vector<double>>(static_cast<size_t>(x.numel()));
    auto inv_std = std::make_shared<std::vector<double>>(static_cast<size_t>(g.batch * groups));
    std::vector<double> y(static_cast<size_t>(x.numel()));
    kernels::group_norm_forward(g, x.data(), gamma.data(), beta.data(), *xhat, *inv_std, y);
    return make_result(x.shape(), std::move(y), {x, gamma, beta}, [=](Node& self) {
        std::vector<double> dx, dg, db;
        if (x.requires_grad()) dx.assign(static_cast<size_t>(x.numel()), 0.0);
        dg.assign(static_cast<size_t>(g.channels), 0.0);
        db.assign(static_cast<size_t>(g.channels), 0.0);
        kernels::group_norm_backward(g, *xhat, *inv_std, gamma.data(), self.grad, dx, dg, db);
        if (!dx.empty()) accumulate(x.node(), dx);
        accumulate(gamma.node(), dg);
        accumulate(beta.node(), db);
    });
}

Tensor adaptive_avg_pool3d(const Tensor& x) {
    require_rank(x, 5, "adaptive_avg_pool3d");
    const int64_t planes = x.dim(0) * x.dim(1);
    const int64_t vol = x.dim(2) * x.dim(3) * x.dim(4);
    const auto v = x.data();
    std::vector<double> y(static_cast<size_t>(planes));
    for (int64_t p = 0; p < planes; ++p) {
        double s = 0.0;
        for (int64_t i = 0; i < vol; ++i) s += v[p * vol + i];
        y[p] = s / static_cast<double>(vol);
    }
    return make_result({x.dim(0), x.dim(1), 1, 1, 1}, std::move(y), {x}, [x, planes, vol](Node& self) {
        std::vector<double> dx(static_cast<size_t>(x.numel()));
        for (int64_t p = 0; p < planes; ++p)
            for (int64_t i = 0; i < vol; ++i) dx[p * vol + i] = self.grad[p] / static_cast<double>(vol);
        accumulate(x.node(), dx);
    });
}

Tensor concat(const std::vector<Tensor>& xs, int axis) {
    require(!xs.empty(), "concat: no inputs");
    const int r = xs[0].rank();
    if (axis < 0) axis += r;
    if (axis < 0 || axis >= r) throw std::out_of_range("concat: axis out of range for rank " + std::to_string(r));
    Shape shape = xs[0].shape();
    shape[axis] = 0;
    for (const auto& t : xs) {
        require(t.rank() == r, "concat: rank mismatch");
        for (int a = 0; a < r; ++a) {
            if (a != axis)
                require(t.dim(a) == xs[0].dim(a), "concat: extent mismatch on axis " + std::to_string(a) + ": " +
                                                      shape_str(t.shape()) + " vs " + shape_str(xs[0].shape()));
        }
        shape[axis] += t.dim(axis);
    }
    int64_t outer = 1, inner = 1;
    for (int a = 0; a < axis; ++a) outer *= shape[a];
    for (int a = axis + 1; a < r; ++a) inner *= shape[a];
    const int64_t total_axis = shape[axis];
    std::vector<double> y(static_cast<size_t>(rainfill::numel(shape)));
    int64_t offset = 0;
    std::vector<int64_t> offsets;
    for (const auto& t : xs) {
        const int64_t len = t.dim(axis) * inner;
        const auto v = t.data();
        for (int64_t o = 0; o < outer; ++o)
            std::copy_n(v.begin() + o * len, len, y.begin() + (o * total_axis * inner + offset * inner));
        offsets.push_back(offset);
        offset += t.dim(axis);
    }
    return make_result(std::move(shape), std::move(y), xs, [=](Node& self) {
        for (size_t k = 0; k < xs.size(); ++k) {
            const auto& t = xs[k];
            if (!t.requires_grad()) continue;
            const int64_t len = t.dim(axis) * inner;
            std::vector<double> d(static_cast<size_t>(t.numel()));
            for (int64_t o = 0; o < outer; ++o)
                std::copy_n(self.grad.begin() + (o * total_axis * inner + offsets[k] * inner), len,
                            d.begin() + o * len);
            accumulate(t.node(), d);
        }
    });
}

Tensor add_channel_bias(const Tensor& x, const Tensor& v) {
    require(x.rank() >= 2 && v.rank() == 2 && v.dim(0) == x.dim(0) && v.dim(1) == x.dim(1),
            "add_channel_bias: " + shape_str(v.shape()) + " does not match leading axes of " + shape_str(x.shape()));
    const int64_t planes = x.dim(0) * x.dim(1);
    const int64_t vol = x.numel() / std::max<int64_t>(planes, 1);
    const auto xv = x.data();
    const auto bv = v.data();
    std::vector<double> y(xv.size());
    for (int64_t p = 0; p < planes; ++p)
        for (int64_t i = 0; i < vol; ++i) y[p * vol + i] = xv[p * vol + i] + bv[p];
    return make_result(x.shape(), std::move(y), {x, v}, [x, v, planes, vol](Node& self) {
        accumulate(x.node(), self.grad);
        if (v.requires_grad()) {
            std::vector<double> dv(static_cast<size_t>(planes), 0.0);
            for (int64_t p = 0; p < planes; ++p)
                for (int64_t i = 0; i < vol; ++i) dv[p] += self.grad[p * vol + i];
            accumulate(v.node(), dv);
        }
    });
}

Tensor scale_channels(const Tensor& x, const Tensor& s) {
    require(x.rank() >= 2 && s.numel() == x.dim(0) * x.dim(1),
            "scale_channels: " + shape_str(s.shape()) + " does not match leading axes of " + shape_str(x.shape()));
    const int64_t planes = x.dim(0) * x.dim(1);
    const int64_t vol = x.numel() / std::max<int64_t>(planes, 1);
    const auto xv = x.data();
    const auto sv = s.data();
    std::vector<double> y(xv.size());
    for (int64_t p = 0; p < planes; ++p)
        for (int64_t i = 0; i < vol; ++i) y[p * vol + i] = xv[p * vol + i] * sv[p];
    return make_result(x.shape(), std::move(y), {x, s}, [x, s, planes, vol](Node& self) {
        const auto xv = x.data();
        const auto sv = s.data();
        if (x.requires_grad()) {
            std::vector<double> dx(xv.size());
            for (int64_t p = 0; p < planes; ++p)
                for (int64_t i = 0; i < vol; ++i) dx[p * vol + i] = self.grad[p * vol + i] * sv[p];
            accumulate(x.node(), dx);
        }
        if (s.requires_grad()) {
            std::vector<double> ds(static_cast<size_t>(planes), 0.0);
            for (int64_t p = 0; p < planes; ++p)
                for (int64_t i = 0; i < vol; ++i) ds[p] += self.grad[p * vol + i] * xv[p * vol + i];
            accumulate(s.node(), ds);
        }
    });
}

namespace {

template <class Loss, class Deriv>
Tensor row_weighted(const Tensor& pred, const Tensor& target, const std::vector<double>& w, Loss loss, Deriv deriv,
                    const char* name) {
    require(pred.shape() == target.shape(), std::string(name) + ": shape mismatch " + shape_str(pred.shape()) +
                                                " vs " + shape_str(target.shape()));
    require(pred.rank() >= 2, std::string(name) + ": need at least (H, W) axes");
    const int64_t rows = pred.dim(-2);
    const int64_t cols = pred.dim(-1);
    require(static_cast<int64_t>(w.size()) == rows, std::string(name) + ": weight count " +
                                                        std::to_string(w.size()) + " != rows " +
                                                        std::to_string(rows));
    const auto p = pred.data();
    const auto t = target.data();
    const int64_t n = pred.numel();
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) acc += w[(i / cols) % rows] * loss(p[i] - t[i]);
    const double inv_n = 1.0 / static_cast<double>(n);
    return make_result({}, {acc * inv_n}, {pred}, [=](Node& self) {
        const auto p = pred.data();
        const auto t = target.data();
        std::vector<double> d(static_cast<size_t>(n));
        for (int64_t i = 0; i < n; ++i) d[i] = self.grad[0] * inv_n * w[(i / cols) % rows] * deriv(p[i] - t[i]);
        accumulate(pred.node(), d);
    });
}

}  // namespace

Tensor row_weighted_mse(const Tensor& pred, const Tensor& target, const std::vector<double>& row_weights) {
    return row_weighted(
        pred, target, row_weights, [](double e) { return e * e; }, [](double e) { return 2.0 * e; },
        "row_weighted_mse");
}

Tensor row_weighted_l1(const Tensor& pred, const Tensor& target, const std::vector<double>& row_weights) {
    return row_weighted(
        pred, target, row_weights, [](double e) { return std::abs(e); },
        [](double e) { return e > 0 ? 1.0 : (e < 0 ? -1.0 : 0.0); }, "row_weighted_l1");
}

}  // namespace rainfill::ops
