#include <cmath>
#include <limits>

#include "rainfill/kernels.hpp"

namespace rainfill::kernels::reference {

void conv3d_forward(const ConvGeometry& g, std::span<const double> input, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> output) {
    const auto out = g.out_size();
    const auto [il, ih, iw] = g.in_size;
    const auto [kt, kh, kw] = g.kernel;
    for (int64_t b = 0; b < g.batch; ++b)
        for (int64_t co = 0; co < g.out_channels; ++co)
            for (int64_t ol = 0; ol < out[0]; ++ol)
                for (int64_t oh = 0; oh < out[1]; ++oh)
                    for (int64_t ow = 0; ow < out[2]; ++ow) {
                        double acc = bias.empty() ? 0.0 : bias[co];
                        for (int64_t ci = 0; ci < g.in_channels; ++ci)
                            for (int64_t a = 0; a < kt; ++a)
                                for (int64_t c = 0; c < kh; ++c)
                                    for (int64_t d = 0; d < kw; ++d) {
                                        const int64_t l = ol * g.stride[0] + a - g.padding[0];
                                        const int64_t h = oh * g.stride[1] + c - g.padding[1];
                                        const int64_t w = ow * g.stride[2] + d - g.padding[2];
                                        if (l < 0 || l >= il || h < 0 || h >= ih || w < 0 || w >= iw) continue;
                                        acc += weight[(((co * g.in_channels + ci) * kt + a) * kh + c) * kw + d] *
                                               input[(((b * g.in_channels + ci) * il + l) * ih + h) * iw + w];
                                    }
                        output[(((b * g.out_channels + co) * out[0] + ol) * out[1] + oh) * out[2] + ow] = acc;
                    }
}

void conv_transpose3d_forward(const ConvGeometry& g, std::span<const double> input,
                              std::span<const double> weight, std::span<const double> bias,
                              std::span<double> output) {
    // Transposed conv maps g.out_channels x out_size -> g.in_channels x in_size.
    const auto small = g.out_size();
    const auto [bl, bh, bw] = g.in_size;
    const auto [kt, kh, kw] = g.kernel;
    const int64_t cin = g.out_channels;
    const int64_t cout = g.in_channels;
    for (int64_t b = 0; b < g.batch; ++b)
        for (int64_t co = 0; co < cout; ++co)
            for (int64_t i = 0; i < bl * bh * bw; ++i)
                output[(b * cout + co) * bl * bh * bw + i] = bias.empty() ? 0.0 : bias[co];

    for (int64_t b = 0; b < g.batch; ++b)
        for (int64_t ci = 0; ci < cin; ++ci)
            for (int64_t sl = 0; sl < small[0]; ++sl)
                for (int64_t sh = 0; sh < small[1]; ++sh)
                    for (int64_t sw = 0; sw < small[2]; ++sw) {
                        const double v =
                            input[(((b * cin + ci) * small[0] + sl) * small[1] + sh) * small[2] + sw];
                        for (int64_t co = 0; co < cout; ++co)
                            for (int64_t a = 0; a < kt; ++a)
                                for (int64_t c = 0; c < kh; ++c)
                                    for (int64_t d = 0; d < kw; ++d) {
                                        const int64_t l = sl * g.stride[0] + a - g.padding[0];
                                        const int64_t h = sh * g.stride[1] + c - g.padding[1];
                                        const int64_t w = sw * g.stride[2] + d - g.padding[2];
                                        if (l < 0 || l >= bl || h < 0 || h >= bh || w < 0 || w >= bw) continue;
                                        output[(((b * cout + co) * bl + l) * bh + h) * bw + w] +=
                                            v * weight[(((ci * cout + co) * kt + a) * kh + c) * kw + d];
                                    }
                    }
}

void maxpool3d_forward(const PoolGeometry& g, std::span<const double> input, std::span<double> output) {
    const auto out = g.out_size();
    const auto [il, ih, iw] = g.in_size;
    for (int64_t p = 0; p < g.planes; ++p)
        for (int64_t ol = 0; ol < out[0]; ++ol)
            for (int64_t oh = 0; oh < out[1]; ++oh)
                for (int64_t ow = 0; ow < out[2]; ++ow) {
                    double best = -std::numeric_limits<double>::infinity();
                    for (int64_t a = 0; a < g.window[0]; ++a)
                        for (int64_t b = 0; b < g.window[1]; ++b)
                            for (int64_t c = 0; c < g.window[2]; ++c) {
                                const int64_t l = ol * g.window[0] + a;
                                const int64_t h = oh * g.window[1] + b;
                                const int64_t w = ow * g.window[2] + c;
                                best = std::max(best, input[((p * il + l) * ih + h) * iw + w]);
                            }
                    output[((p * out[0] + ol) * out[1] + oh) * out[2] + ow] = best;
                }
}

void group_norm_forward(const GroupNormGeometry& g, std::span<const double> input, std::span<const double> gamma,
                        std::span<const double> beta, std::span<double> output) {
    const int64_t per_group = g.channels / g.groups;
    for (int64_t b = 0; b < g.batch; ++b)
        for (int64_t grp = 0; grp < g.groups; ++grp) {
            double sum = 0.0;
            double sq = 0.0;
            int64_t n = 0;
            for (int64_t c = grp * per_group; c < (grp + 1) * per_group; ++c)
                for (int64_t s = 0; s < g.spatial; ++s) {
                    const double v = input[(b * g.channels + c) * g.spatial + s];
                    sum += v;
                    sq += v * v;
                    ++n;
                }
            const double mean = sum / static_cast<double>(n);
            const double var = sq / static_cast<double>(n) - mean * mean;
            for (int64_t c = grp * per_group; c < (grp + 1) * per_group; ++c)
                for (int64_t s = 0; s < g.spatial; ++s) {
                    const int64_t i = (b * g.channels + c) * g.spatial + s;
                    output[i] = gamma[c] * (input[i] - mean) / std::sqrt(var + g.eps) + beta[c];
                }
        }
}

}  // namespace rainfill::kernels::reference
