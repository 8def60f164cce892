#pragma once

// Raw compute kernels over contiguous float64 buffers in (B, C, L, H, W)
// layout. The top-level namespace holds the OpenMP versions used by the
// differentiable ops; `reference` holds straightforward serial loops kept
// for tests and benchmarks.

#include <array>
#include <cstdint>
#include <span>

namespace rainfill::kernels {

using Extent3 = std::array<int64_t, 3>;

/// Shape bookkeeping for a strided, zero-padded 3D cross-correlation.
struct ConvGeometry {
    int64_t batch = 1;
    int64_t in_channels = 1;
    int64_t out_channels = 1;
    Extent3 in_size{1, 1, 1};
    Extent3 kernel{1, 1, 1};
    Extent3 stride{1, 1, 1};
    Extent3 padding{0, 0, 0};

    Extent3 out_size() const;
    int64_t in_volume() const { return in_size[0] * in_size[1] * in_size[2]; }
    int64_t out_volume() const;
    int64_t kernel_volume() const { return kernel[0] * kernel[1] * kernel[2]; }
};

/// Expands one sample's input (C, L, H, W) into columns
/// (C * kernel_volume, out_volume).
void im2col(const ConvGeometry& g, std::span<const double> image, std::span<double> cols);
/// Adjoint of im2col: scatters columns back and accumulates into `image`.
void col2im(const ConvGeometry& g, std::span<const double> cols, std::span<double> image);

// conv3d: weight (Cout, Cin, kt, kh, kw); bias may be empty.
void conv3d_forward(const ConvGeometry& g, std::span<const double> input, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> output);
/// Accumulates into grad_input / grad_weight / grad_bias (any may be empty).
void conv3d_backward(const ConvGeometry& g, std::span<const double> input, std::span<const double> weight,
                     std::span<const double> grad_output, std::span<double> grad_input,
                     std::span<double> grad_weight, std::span<double> grad_bias);

// conv_transpose3d: `g` describes the *adjoint* convolution, i.e. the
// convolution mapping the transposed-conv output back onto its input.
// g.in_channels is the transposed-conv output channel count. Weight layout
// is (Cin_t, Cout_t, kt, kh, kw) with Cin_t = g.out_channels.
void conv_transpose3d_forward(const ConvGeometry& g, std::span<const double> input,
                              std::span<const double> weight, std::span<const double> bias,
                              std::span<double> output);
void conv_transpose3d_backward(const ConvGeometry& g, std::span<const double> input,
                               std::span<const double> weight, std::span<const double> grad_output,
                               std::span<double> grad_input, std::span<double> grad_weight,
                               std::span<double> grad_bias);

struct PoolGeometry {
    int64_t planes = 1;  // B * C
    Extent3 in_size{1, 1, 1};
    Extent3 window{1, 2, 2};  // stride equals window
    Extent3 out_size() const;
};

/// Ties resolve to the first index in scan order. `argmax` receives flat
/// per-plane input offsets.
void maxpool3d_forward(const PoolGeometry& g, std::span<const double> input, std::span<double> output,
                       std::span<int64_t> argmax);
void maxpool3d_backward(const PoolGeometry& g, std::span<const double> grad_output,
                        std::span<const int64_t> argmax, std::span<double> grad_input);

struct GroupNormGeometry {
    int64_t batch = 1;
    int64_t channels = 1;
    int64_t groups = 1;
    int64_t spatial = 1;  // L * H * W
    double eps = 1e-5;
};

/// Writes normalized values into `xhat`, per-(batch, group) inverse std into
/// `inv_std`, and the affine result into `output`.
void group_norm_forward(const GroupNormGeometry& g, std::span<const double> input, std::span<const double> gamma,
                        std::span<const double> beta, std::span<double> xhat, std::span<double> inv_std,
                        std::span<double> output);
void group_norm_backward(const GroupNormGeometry& g, std::span<const double> xhat, std::span<const double> inv_std,
                         std::span<const double> gamma, std::span<const double> grad_output,
                         std::span<double> grad_input, std::span<double> grad_gamma, std::span<double> grad_beta);

namespace reference {

void conv3d_forward(const ConvGeometry& g, std::span<const double> input, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> output);
/// Direct scatter form: every input voxel spreads weight * value over its
/// kernel footprint in the output.
void conv_transpose3d_forward(const ConvGeometry& g, std::span<const double> input,
                              std::span<const double> weight, std::span<const double> bias,
                              std::span<double> output);
void maxpool3d_forward(const PoolGeometry& g, std::span<const double> input, std::span<double> output);
void group_norm_forward(const GroupNormGeometry& g, std::span<const double> input, std::span<const double> gamma,
                        std::span<const double> beta, std::span<double> output);

}  // namespace reference

}  // namespace rainfill::kernels
