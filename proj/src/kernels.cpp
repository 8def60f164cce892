#include "rainfill/kernels.hpp"

#include <Eigen/Core>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace rainfill::kernels {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

int64_t pooled(int64_t n, int64_t k, int64_t s, int64_t p) { return (n + 2 * p - k) / s + 1; }

// Eigen's vectorised products round differently depending on operand
// alignment, so every product runs on owned (aligned) copies.
RowMatrix owned(const double* p, int64_t rows, int64_t cols) { return ConstMap(p, rows, cols); }

std::span<double> as_span(RowMatrix& m) { return {m.data(), static_cast<size_t>(m.size())}; }

double row_sum(const double* p, int64_t n) {
    double s = 0.0;
    for (int64_t i = 0; i < n; ++i) s += p[i];
    return s;
}

}  // namespace

Extent3 ConvGeometry::out_size() const {
    Extent3 out{};
    for (int a = 0; a < 3; ++a) out[a] = pooled(in_size[a], kernel[a], stride[a], padding[a]);
    return out;
}

int64_t ConvGeometry::out_volume() const {
    const auto o = out_size();
    return o[0] * o[1] * o[2];
}

Extent3 PoolGeometry::out_size() const {
    return {in_size[0] / window[0], in_size[1] / window[1], in_size[2] / window[2]};
}

void im2col(const ConvGeometry& g, std::span<const double> image, std::span<double> cols) {
    const auto out = g.out_size();
    const int64_t n_out = out[0] * out[1] * out[2];
    const int64_t kvol = g.kernel_volume();
    const int64_t rows = g.in_channels * kvol;
    const auto [il, ih, iw] = g.in_size;

#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < rows; ++r) {
        const int64_t c = r / kvol;
        const int64_t k = r % kvol;
        const int64_t kt = k / (g.kernel[1] * g.kernel[2]);
        const int64_t kh = (k / g.kernel[2]) % g.kernel[1];
        const int64_t kw = k % g.kernel[2];
        const double* plane = image.data() + c * il * ih * iw;
        double* dst = cols.data() + r * n_out;
        for (int64_t ol = 0; ol < out[0]; ++ol) {
            const int64_t l = ol * g.stride[0] + kt - g.padding[0];
            for (int64_t oh = 0; oh < out[1]; ++oh) {
                const int64_t h = oh * g.stride[1] + kh - g.padding[1];
                double* row = dst + (ol * out[1] + oh) * out[2];
                if (l < 0 || l >= il || h < 0 || h >= ih) {
                    for (int64_t ow = 0; ow < out[2]; ++ow) row[ow] = 0.0;
                    continue;
                }
                const double* src = plane + (l * ih + h) * iw;
                for (int64_t ow = 0; ow < out[2]; ++ow) {
                    const int64_t w = ow * g.stride[2] + kw - g.padding[2];
                    row[ow] = (w >= 0 && w < iw) ? src[w] : 0.0;
                }
            }
        }
    }
}

void col2im(const ConvGeometry& g, std::span<const double> cols, std::span<double> image) {
    const auto out = g.out_size();
    const int64_t n_out = out[0] * out[1] * out[2];
    const int64_t kvol = g.kernel_volume();
    const auto [il, ih, iw] = g.in_size;

    // One thread per channel plane keeps accumulation order fixed.
#pragma omp parallel for schedule(static)
    for (int64_t c = 0; c < g.in_channels; ++c) {
        double* plane = image.data() + c * il * ih * iw;
        for (int64_t k = 0; k < kvol; ++k) {
            const int64_t kt = k / (g.kernel[1] * g.kernel[2]);
            const int64_t kh = (k / g.kernel[2]) % g.kernel[1];
            const int64_t kw = k % g.kernel[2];
            const double* src = cols.data() + (c * kvol + k) * n_out;
            for (int64_t ol = 0; ol < out[0]; ++ol) {
                const int64_t l = ol * g.stride[0] + kt - g.padding[0];
                if (l < 0 || l >= il) continue;
                for (int64_t oh = 0; oh < out[1]; ++oh) {
                    const int64_t h = oh * g.stride[1] + kh - g.padding[1];
                    if (h < 0 || h >= ih) continue;
                    const double* row = src + (ol * out[1] + oh) * out[2];
                    double* dst = plane + (l * ih + h) * iw;
                    for (int64_t ow = 0; ow < out[2]; ++ow) {
                        const int64_t w = ow * g.stride[2] + kw - g.padding[2];
                        if (w >= 0 && w < iw) dst[w] += row[ow];
                    }
                }
            }
        }
    }
}

void conv3d_forward(const ConvGeometry& g, std::span<const double> input, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> output) {
    const int64_t n_out = g.out_volume();
    const int64_t ck = g.in_channels * g.kernel_volume();
    const int64_t in_stride = g.in_channels * g.in_volume();
    const int64_t out_stride = g.out_channels * n_out;
    RowMatrix cols(ck, n_out);
    const RowMatrix w = owned(weight.data(), g.out_channels, ck);
    RowMatrix prod(g.out_channels, n_out);

    for (int64_t b = 0; b < g.batch; ++b) {
        im2col(g, input.subspan(b * in_stride, in_stride), as_span(cols));
        prod.noalias() = w * cols;
        MutMap out(output.data() + b * out_stride, g.out_channels, n_out);
        out = prod;
        if (!bias.empty()) {
            for (int64_t co = 0; co < g.out_channels; ++co) out.row(co).array() += bias[co];
        }
    }
}

void conv3d_backward(const ConvGeometry& g, std::span<const double> input, std::span<const double> weight,
                     std::span<const double> grad_output, std::span<double> grad_input,
                     std::span<double> grad_weight, std::span<double> grad_bias) {
    const int64_t n_out = g.out_volume();
    const int64_t ck = g.in_channels * g.kernel_volume();
    const int64_t in_stride = g.in_channels * g.in_volume();
    const int64_t out_stride = g.out_channels * n_out;
    RowMatrix cols(ck, n_out);
    const RowMatrix w = owned(weight.data(), g.out_channels, ck);
    RowMatrix dw_b(g.out_channels, ck);

    for (int64_t b = 0; b < g.batch; ++b) {
        const double* dout_p = grad_output.data() + b * out_stride;
        if (!grad_bias.empty()) {
            for (int64_t co = 0; co < g.out_channels; ++co) grad_bias[co] += row_sum(dout_p + co * n_out, n_out);
        }
        const RowMatrix dout = owned(dout_p, g.out_channels, n_out);
        if (!grad_weight.empty()) {
            im2col(g, input.subspan(b * in_stride, in_stride), as_span(cols));
            dw_b.noalias() = dout * cols.transpose();
            MutMap(grad_weight.data(), g.out_channels, ck) += dw_b;
        }
        if (!grad_input.empty()) {
            cols.noalias() = w.transpose() * dout;
            col2im(g, as_span(cols), grad_input.subspan(b * in_stride, in_stride));
        }
    }
}

void conv_transpose3d_forward(const ConvGeometry& g, std::span<const double> input,
                              std::span<const double> weight, std::span<const double> bias,
                              std::span<double> output) {
    // input: (B, g.out_channels, g.out_size) ; output: (B, g.in_channels, g.in_size)
    const int64_t n_in = g.out_volume();
    const int64_t ck = g.in_channels * g.kernel_volume();
    const int64_t x_stride = g.out_channels * n_in;
    const int64_t y_stride = g.in_channels * g.in_volume();
    RowMatrix cols(ck, n_in);
    const RowMatrix w = owned(weight.data(), g.out_channels, ck);

    for (int64_t b = 0; b < g.batch; ++b) {
        cols.noalias() = w.transpose() * owned(input.data() + b * x_stride, g.out_channels, n_in);
        auto out = output.subspan(b * y_stride, y_stride);
        std::fill(out.begin(), out.end(), 0.0);
        col2im(g, as_span(cols), out);
        if (!bias.empty()) {
            const int64_t vol = g.in_volume();
#pragma omp parallel for schedule(static)
            for (int64_t ch = 0; ch < g.in_channels; ++ch) {
                for (int64_t i = 0; i < vol; ++i) out[ch * vol + i] += bias[ch];
            }
        }
    }
}

void conv_transpose3d_backward(const ConvGeometry& g, std::span<const double> input,
                               std::span<const double> weight, std::span<const double> grad_output,
                               std::span<double> grad_input, std::span<double> grad_weight,
                               std::span<double> grad_bias) {
    const int64_t n_in = g.out_volume();
    const int64_t ck = g.in_channels * g.kernel_volume();
    const int64_t x_stride = g.out_channels * n_in;
    const int64_t y_stride = g.in_channels * g.in_volume();
    const int64_t vol = g.in_volume();
    RowMatrix cols(ck, n_in);
    const RowMatrix w = owned(weight.data(), g.out_channels, ck);
    RowMatrix dx_b(g.out_channels, n_in);
    RowMatrix dw_b(g.out_channels, ck);

    for (int64_t b = 0; b < g.batch; ++b) {
        const auto dy = grad_output.subspan(b * y_stride, y_stride);
        if (!grad_bias.empty()) {
            for (int64_t ch = 0; ch < g.in_channels; ++ch) {
                double s = 0.0;
                for (int64_t i = 0; i < vol; ++i) s += dy[ch * vol + i];
                grad_bias[ch] += s;
            }
        }
        if (grad_input.empty() && grad_weight.empty()) continue;
        im2col(g, dy, as_span(cols));
        if (!grad_input.empty()) {
            dx_b.noalias() = w * cols;
            MutMap(grad_input.data() + b * x_stride, g.out_channels, n_in) += dx_b;
        }
        if (!grad_weight.empty()) {
            dw_b.noalias() = owned(input.data() + b * x_stride, g.out_channels, n_in) * cols.transpose();
            MutMap(grad_weight.data(), g.out_channels, ck) += dw_b;
        }
    }
}

void maxpool3d_forward(const PoolGeometry& g, std::span<const double> input, std::span<double> output,
                       std::span<int64_t> argmax) {
    const auto out = g.out_size();
    const auto [il, ih, iw] = g.in_size;
    const int64_t in_plane = il * ih * iw;
    const int64_t out_plane = out[0] * out[1] * out[2];

#pragma omp parallel for schedule(static)
    for (int64_t p = 0; p < g.planes; ++p) {
        const double* src = input.data() + p * in_plane;
        for (int64_t ol = 0; ol < out[0]; ++ol) {
            for (int64_t oh = 0; oh < out[1]; ++oh) {
                for (int64_t ow = 0; ow < out[2]; ++ow) {
                    double best = -std::numeric_limits<double>::infinity();
                    int64_t best_idx = -1;
                    for (int64_t a = 0; a < g.window[0]; ++a) {
                        for (int64_t b = 0; b < g.window[1]; ++b) {
                            for (int64_t c = 0; c < g.window[2]; ++c) {
                                const int64_t idx = ((ol * g.window[0] + a) * ih + oh * g.window[1] + b) * iw +
                                                    ow * g.window[2] + c;
                                if (best_idx < 0 || src[idx] > best) {
                                    best = src[idx];
                                    best_idx = idx;
                                }
                            }
                        }
                    }
                    const int64_t o = p * out_plane + (ol * out[1] + oh) * out[2] + ow;
                    output[o] = best;
                    argmax[o] = best_idx;
                }
            }
        }
    }
}

void maxpool3d_backward(const PoolGeometry& g, std::span<const double> grad_output,
                        std::span<const int64_t> argmax, std::span<double> grad_input) {
    const auto out = g.out_size();
    const int64_t in_plane = g.in_size[0] * g.in_size[1] * g.in_size[2];
    const int64_t out_plane = out[0] * out[1] * out[2];

#pragma omp parallel for schedule(static)
    for (int64_t p = 0; p < g.planes; ++p) {
        for (int64_t o = 0; o < out_plane; ++o) {
            const int64_t flat = p * out_plane + o;
            grad_input[p * in_plane + argmax[flat]] += grad_output[flat];
        }
    }
}

void group_norm_forward(const GroupNormGeometry& g, std::span<const double> input, std::span<const double> gamma,
                        std::span<const double> beta, std::span<double> xhat, std::span<double> inv_std,
                        std::span<double> output) {
    const int64_t per_group = g.channels / g.groups;
    const int64_t n = per_group * g.spatial;

#pragma omp parallel for schedule(static)
    for (int64_t bg = 0; bg < g.batch * g.groups; ++bg) {
        const int64_t b = bg / g.groups;
        const int64_t grp = bg % g.groups;
        const int64_t base = (b * g.channels + grp * per_group) * g.spatial;
        double mean = 0.0;
        for (int64_t i = 0; i < n; ++i) mean += input[base + i];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (int64_t i = 0; i < n; ++i) {
            const double d = input[base + i] - mean;
            var += d * d;
        }
        var /= static_cast<double>(n);
        const double is = 1.0 / std::sqrt(var + g.eps);
        inv_std[bg] = is;
        for (int64_t c = 0; c < per_group; ++c) {
            const int64_t ch = grp * per_group + c;
            for (int64_t s = 0; s < g.spatial; ++s) {
                const int64_t i = base + c * g.spatial + s;
                xhat[i] = (input[i] - mean) * is;
                output[i] = gamma[ch] * xhat[i] + beta[ch];
            }
        }
    }
}

void group_norm_backward(const GroupNormGeometry& g, std::span<const double> xhat, std::span<const double> inv_std,
                         std::span<const double> gamma, std::span<const double> grad_output,
                         std::span<double> grad_input, std::span<double> grad_gamma, std::span<double> grad_beta) {
    const int64_t per_group = g.channels / g.groups;
    const int64_t n = per_group * g.spatial;
    std::vector<double> partial_gamma(static_cast<size_t>(g.batch * g.channels), 0.0);
    std::vector<double> partial_beta(static_cast<size_t>(g.batch * g.channels), 0.0);

#pragma omp parallel for schedule(static)
    for (int64_t bg = 0; bg < g.batch * g.groups; ++bg) {
        const int64_t b = bg / g.groups;
        const int64_t grp = bg % g.groups;
        const int64_t base = (b * g.channels + grp * per_group) * g.spatial;
        double sum_dxhat = 0.0;
        double sum_dxhat_xhat = 0.0;
        for (int64_t c = 0; c < per_group; ++c) {
            const int64_t ch = grp * per_group + c;
            double pg = 0.0;
            double pb = 0.0;
            for (int64_t s = 0; s < g.spatial; ++s) {
                const int64_t i = base + c * g.spatial + s;
                const double dy = grad_output[i];
                const double dxh = dy * gamma[ch];
                sum_dxhat += dxh;
                sum_dxhat_xhat += dxh * xhat[i];
                pg += dy * xhat[i];
                pb += dy;
            }
            partial_gamma[b * g.channels + ch] = pg;
            partial_beta[b * g.channels + ch] = pb;
        }
        if (grad_input.empty()) continue;
        const double mean_dxhat = sum_dxhat / static_cast<double>(n);
        const double mean_dxhat_xhat = sum_dxhat_xhat / static_cast<double>(n);
        const double is = inv_std[bg];
        for (int64_t c = 0; c < per_group; ++c) {
            const int64_t ch = grp * per_group + c;
            for (int64_t s = 0; s < g.spatial; ++s) {
                const int64_t i = base + c * g.spatial + s;
                const double dxh = grad_output[i] * gamma[ch];
                grad_input[i] += is * (dxh - mean_dxhat - xhat[i] * mean_dxhat_xhat);
            }
        }
    }

    for (int64_t b = 0; b < g.batch; ++b) {
        for (int64_t ch = 0; ch < g.channels; ++ch) {
            if (!grad_gamma.empty()) grad_gamma[ch] += partial_gamma[b * g.channels + ch];
            if (!grad_beta.empty()) grad_beta[ch] += partial_beta[b * g.channels + ch];
        }
    }
}

}  // namespace rainfill::kernels
