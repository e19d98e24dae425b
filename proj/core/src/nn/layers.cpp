#include "oamfso/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstring>
#include <sstream>
#include <utility>

namespace oamfso::nn {

std::string shape_string(const Shape& shape) {
    std::ostringstream out;
    out << '{';
    for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "," : "") << shape[i];
    out << '}';
    return out.str();
}

bool Tensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double dot(std::span<const double> a, std::span<const double> b) {
    double sum = 0.0;
    const std::size_t n = std::min(a.size(), b.size());
    const double* pa = a.data();
    const double* pb = b.data();
#pragma omp simd reduction(+ : sum)
    for (std::size_t i = 0; i < n; ++i) sum += pa[i] * pb[i];
    return sum;
}

// ---- parameter containers -------------------------------------------------

ConvLayer ConvLayer::zeros(std::size_t in_channels, std::size_t out_channels, int stride,
                           std::size_t bias_size) {
    ConvLayer layer;
    layer.in_channels = in_channels;
    layer.out_channels = out_channels;
    layer.stride = stride;
    layer.kernel.assign(in_channels * out_channels * kKernelTaps, 0.0);
    layer.bias.assign(bias_size, 0.0);
    layer.validate();
    return layer;
}

ConvLayer ConvLayer::he_normal(std::size_t in_channels, std::size_t out_channels, int stride,
                               std::size_t bias_size, Rng& rng) {
    ConvLayer layer = zeros(in_channels, out_channels, stride, bias_size);
    const double stddev = std::sqrt(2.0 / static_cast<double>(in_channels * kKernelTaps));
    for (auto& w : layer.kernel) w = stddev * rng.normal();
    return layer;
}

ConvLayer ConvLayer::zeros_like() const { return zeros(in_channels, out_channels, stride, bias.size()); }

void ConvLayer::validate() const {
    require(in_channels > 0 && out_channels > 0, Errc::invalid_argument, "conv needs channels");
    require(stride == 1 || stride == 2, Errc::invalid_argument, "conv stride must be 1 or 2");
    require(kernel.size() == in_channels * out_channels * kKernelTaps, Errc::shape_mismatch,
            "conv kernel size mismatch");
}

DenseLayer DenseLayer::zeros(std::size_t inputs, std::size_t outputs) {
    require(inputs > 0 && outputs > 0, Errc::invalid_argument, "dense layer needs extents");
    DenseLayer layer;
    layer.inputs = inputs;
    layer.outputs = outputs;
    layer.weight.assign(inputs * outputs, 0.0);
    layer.bias.assign(outputs, 0.0);
    return layer;
}

DenseLayer DenseLayer::he_normal(std::size_t inputs, std::size_t outputs, Rng& rng) {
    DenseLayer layer = zeros(inputs, outputs);
    const double stddev = std::sqrt(2.0 / static_cast<double>(inputs));
    for (auto& w : layer.weight) w = stddev * rng.normal();
    return layer;
}

DenseLayer DenseLayer::zeros_like() const { return zeros(inputs, outputs); }

void DenseLayer::validate() const {
    require(weight.size() == inputs * outputs && bias.size() == outputs, Errc::shape_mismatch,
            "dense parameter size mismatch");
}

// ---- convolution ----------------------------------------------------------

std::size_t conv_output_extent(std::size_t extent, int stride) {
    return (extent + static_cast<std::size_t>(stride) - 1) / static_cast<std::size_t>(stride);
}

namespace {

struct ConvGeometry {
    int in_h, in_w, out_h, out_w, stride, pad_top, pad_left;

    ConvGeometry(std::size_t ih, std::size_t iw, int s)
        : in_h(static_cast<int>(ih)), in_w(static_cast<int>(iw)),
          out_h(static_cast<int>(conv_output_extent(ih, s))),
          out_w(static_cast<int>(conv_output_extent(iw, s))), stride(s),
          // TensorFlow-style SAME: the odd extra padding goes after.
          pad_top(std::max((out_h - 1) * s + kKernelSide - in_h, 0) / 2),
          pad_left(std::max((out_w - 1) * s + kKernelSide - in_w, 0) / 2) {}
};

using Lane = double __attribute__((vector_size(8 * sizeof(double))));
constexpr std::size_t kLane = 8;
constexpr auto kSide = static_cast<std::size_t>(kKernelSide);
constexpr std::size_t kChunk = 4 * kLane;

inline Lane load_lane(const double* p) {
    Lane v;
    std::memcpy(&v, p, sizeof v);
    return v;
}

inline void store_lane(double* p, Lane v) { std::memcpy(p, &v, sizeof v); }

// Zero-padded copy of C planes, columns split by phase modulo the stride so
// every tap reads a unit-stride row: padded[c][y][x] = plane(c, x % s)[y][x / s].
struct Phased {
    std::size_t phases, rows, cols;
    std::vector<double> data;

    Phased(std::size_t channels, const ConvGeometry& g)
        : phases(static_cast<std::size_t>(g.stride)),
          rows(static_cast<std::size_t>((g.out_h - 1) * g.stride + kKernelSide)),
          cols(static_cast<std::size_t>(g.out_w + (kKernelSide - 1) / g.stride)),
          data(channels * phases * rows * cols, 0.0) {}

    double* plane(std::size_t c, std::size_t phase) { return data.data() + (c * phases + phase) * rows * cols; }
    const double* plane(std::size_t c, std::size_t phase) const {
        return data.data() + (c * phases + phase) * rows * cols;
    }

    template <typename Fn>
    void for_each_pixel(std::size_t channels, const ConvGeometry& g, Fn&& fn) {
        const auto s = static_cast<std::size_t>(g.stride);
        const auto in_w = static_cast<std::size_t>(g.in_w);
        std::vector<std::size_t> column(in_w);
        for (std::size_t x = 0; x < in_w; ++x) {
            const std::size_t xp = x + static_cast<std::size_t>(g.pad_left);
            column[x] = (xp % s) * rows * cols + xp / s;
        }
        for (std::size_t c = 0; c < channels; ++c) {
            double* base = plane(c, 0);
            for (std::size_t y = 0; y < static_cast<std::size_t>(g.in_h); ++y) {
                double* row = base + (y + static_cast<std::size_t>(g.pad_top)) * cols;
                for (std::size_t x = 0; x < in_w; ++x) fn(c, y * in_w + x, row[column[x]]);
            }
        }
    }
};

Phased phase_split(const double* src, std::size_t channels, const ConvGeometry& g) {
    Phased q(channels, g);
    const std::size_t in_plane = static_cast<std::size_t>(g.in_h) * g.in_w;
    q.for_each_pixel(channels, g, [&](std::size_t c, std::size_t k, double& v) { v = src[c * in_plane + k]; });
    return q;
}

// out[o] += sum_i w[o][i] (*) in[i]
void correlate(const double* in, std::size_t cin, const ConvGeometry& g, const double* kernel,
               std::size_t cout, double* out) {
    const Phased q = phase_split(in, cin, g);
    const auto s = static_cast<std::size_t>(g.stride);
    const auto out_w = static_cast<std::size_t>(g.out_w);
    const std::size_t full = out_w / kChunk * kChunk;
    for (std::size_t o = 0; o < cout; ++o) {
        for (int oy = 0; oy < g.out_h; ++oy) {
            double* y = out + (o * static_cast<std::size_t>(g.out_h) + static_cast<std::size_t>(oy)) * out_w;
            const std::size_t row0 = static_cast<std::size_t>(oy) * s;
            for (std::size_t j0 = 0; j0 < full; j0 += kChunk) {
                Lane acc[4];
                for (std::size_t v = 0; v < 4; ++v) acc[v] = load_lane(y + j0 + v * kLane);
                for (std::size_t i = 0; i < cin; ++i) {
                    const double* w = kernel + (o * cin + i) * kKernelTaps;
                    for (std::size_t ky = 0; ky < kSide; ++ky) {
                        for (std::size_t kx = 0; kx < kSide; ++kx) {
                            const double wv = w[ky * kSide + kx];
                            const double* src = q.plane(i, kx % s) + (row0 + ky) * q.cols + j0 + kx / s;
                            for (std::size_t v = 0; v < 4; ++v) acc[v] += wv * load_lane(src + v * kLane);
                        }
                    }
                }
                for (std::size_t v = 0; v < 4; ++v) store_lane(y + j0 + v * kLane, acc[v]);
            }
            for (std::size_t i = 0; i < cin; ++i) {
                const double* w = kernel + (o * cin + i) * kKernelTaps;
                for (std::size_t ky = 0; ky < kSide; ++ky) {
                    for (std::size_t kx = 0; kx < kSide; ++kx) {
                        const double wv = w[ky * kSide + kx];
                        const double* src = q.plane(i, kx % s) + (row0 + ky) * q.cols + kx / s;
                        for (std::size_t j = full; j < out_w; ++j) y[j] += wv * src[j];
                    }
                }
            }
        }
    }
}

// in_grad[i] += sum_o w[o][i] (*)^T out_grad[o]
void correlate_adjoint(const double* out_grad, std::size_t cout, const ConvGeometry& g,
                       const double* kernel, std::size_t cin, double* in_grad) {
    const auto s = static_cast<std::size_t>(g.stride);
    const auto out_h = static_cast<std::size_t>(g.out_h);
    const auto out_w = static_cast<std::size_t>(g.out_w);
    // out_grad rows padded by `lead` zeros on both sides.
    const std::size_t lead = (kSide - 1) / s;
    const std::size_t og_cols = out_w + 2 * lead;
    std::vector<double> og(cout * out_h * og_cols, 0.0);
    for (std::size_t o = 0; o < cout; ++o)
        for (std::size_t r = 0; r < out_h; ++r)
            std::copy_n(out_grad + (o * out_h + r) * out_w, out_w, og.data() + (o * out_h + r) * og_cols + lead);
    Phased acc_planes(cin, g);
    const std::size_t cols = acc_planes.cols;
    const std::size_t full = cols / kChunk * kChunk;
    struct Tap {
        double weight;
        const double* src;
    };
    std::vector<Tap> taps;
    taps.reserve(cout * kKernelTaps);
    for (std::size_t i = 0; i < cin; ++i) {
        for (std::size_t phase = 0; phase < s; ++phase) {
            double* plane = acc_planes.plane(i, phase);
            for (std::size_t yp = 0; yp < acc_planes.rows; ++yp) {
                double* row = plane + yp * cols;
                taps.clear();
                for (std::size_t o = 0; o < cout; ++o) {
                    const double* w = kernel + (o * cin + i) * kKernelTaps;
                    for (std::size_t ky = 0; ky < kSide && ky <= yp; ++ky) {
                        if ((yp - ky) % s != 0) continue;
                        const std::size_t oy = (yp - ky) / s;
                        if (oy >= out_h) continue;
                        const double* src_row = og.data() + (o * out_h + oy) * og_cols + lead;
                        for (std::size_t kx = phase; kx < kSide; kx += s) {
                            taps.push_back({w[ky * kSide + kx], src_row - kx / s});
                        }
                    }
                }
                for (std::size_t j0 = 0; j0 < full; j0 += kChunk) {
                    Lane acc[4] = {};
                    for (const auto& [wv, src] : taps)
                        for (std::size_t v = 0; v < 4; ++v) acc[v] += wv * load_lane(src + j0 + v * kLane);
                    for (std::size_t v = 0; v < 4; ++v) store_lane(row + j0 + v * kLane, acc[v]);
                }
                for (const auto& [wv, src] : taps)
                    for (std::size_t j = full; j < cols; ++j) row[j] += wv * src[j];
            }
        }
    }
    const std::size_t in_plane = static_cast<std::size_t>(g.in_h) * g.in_w;
    acc_planes.for_each_pixel(cin, g, [&](std::size_t c, std::size_t k, double& v) { in_grad[c * in_plane + k] += v; });
}

// kernel_grad[o][i][ky][kx] += sum out_grad[o] * shifted in[i]
void correlate_kernel_grad(const double* in, std::size_t cin, const ConvGeometry& g,
                           const double* out_grad, std::size_t cout, double* kernel_grad) {
    const Phased q = phase_split(in, cin, g);
    const auto s = static_cast<std::size_t>(g.stride);
    const auto out_h = static_cast<std::size_t>(g.out_h);
    const auto out_w = static_cast<std::size_t>(g.out_w);
    const std::size_t full = out_w / kLane * kLane;
    for (std::size_t o = 0; o < cout; ++o) {
        const double* og = out_grad + o * out_h * out_w;
        for (std::size_t i = 0; i < cin; ++i) {
            double* wg = kernel_grad + (o * cin + i) * kKernelTaps;
            for (std::size_t ky = 0; ky < kSide; ++ky) {
                for (std::size_t kx = 0; kx < kSide; ++kx) {
                    const double* base = q.plane(i, kx % s) + ky * q.cols + kx / s;
                    Lane acc = {};
                    double tail = 0.0;
                    for (std::size_t oy = 0; oy < out_h; ++oy) {
                        const double* src = base + oy * s * q.cols;
                        const double* gy = og + oy * out_w;
                        for (std::size_t j = 0; j < full; j += kLane) acc += load_lane(gy + j) * load_lane(src + j);
                        for (std::size_t j = full; j < out_w; ++j) tail += gy[j] * src[j];
                    }
                    double sum = tail;
                    for (std::size_t l = 0; l < kLane; ++l) sum += acc[l];
                    wg[ky * kSide + kx] += sum;
                }
            }
        }
    }
}

void require_image(const Tensor& t, std::size_t channels, const char* what) {
    require(t.rank() == 3 && t.dim(0) == channels, Errc::shape_mismatch,
            std::string(what) + ": expected " + std::to_string(channels) + " channels, got " +
                shape_string(t.shape()));
}

double plane_sum(const double* p, std::size_t count) {
    double s = 0.0;
#pragma omp simd reduction(+ : s)
    for (std::size_t k = 0; k < count; ++k) s += p[k];
    return s;
}

}  // namespace

Tensor conv2d(const Tensor& input, const ConvLayer& layer) {
    layer.validate();
    require_image(input, layer.in_channels, "conv2d input");
    require(layer.bias.size() == layer.out_channels, Errc::shape_mismatch, "conv2d bias size");
    const ConvGeometry g(input.dim(1), input.dim(2), layer.stride);
    Tensor out({layer.out_channels, static_cast<std::size_t>(g.out_h), static_cast<std::size_t>(g.out_w)});
    const std::size_t plane = static_cast<std::size_t>(g.out_h) * g.out_w;
    for (std::size_t o = 0; o < layer.out_channels; ++o) {
        std::fill_n(out.data() + o * plane, plane, layer.bias[o]);
    }
    correlate(input.data(), layer.in_channels, g, layer.kernel.data(), layer.out_channels, out.data());
    return out;
}

Tensor conv2d_backward(const Tensor& input, const ConvLayer& layer, const Tensor& grad_output,
                       ConvLayer& grads) {
    require_image(input, layer.in_channels, "conv2d_backward input");
    const ConvGeometry g(input.dim(1), input.dim(2), layer.stride);
    require(grad_output.shape() == Shape{layer.out_channels, static_cast<std::size_t>(g.out_h),
                                         static_cast<std::size_t>(g.out_w)},
            Errc::shape_mismatch, "conv2d_backward grad shape");
    require(grads.kernel.size() == layer.kernel.size() && grads.bias.size() == layer.bias.size(),
            Errc::shape_mismatch, "conv2d_backward grads container");
    const std::size_t plane = static_cast<std::size_t>(g.out_h) * g.out_w;
    for (std::size_t o = 0; o < layer.out_channels; ++o) {
        grads.bias[o] += plane_sum(grad_output.data() + o * plane, plane);
    }
    correlate_kernel_grad(input.data(), layer.in_channels, g, grad_output.data(), layer.out_channels,
                          grads.kernel.data());
    Tensor grad_input(input.shape());
    correlate_adjoint(grad_output.data(), layer.out_channels, g, layer.kernel.data(),
                      layer.in_channels, grad_input.data());
    return grad_input;
}

Tensor transpose_conv2d(const Tensor& input, const ConvLayer& layer, std::size_t out_h,
                        std::size_t out_w) {
    layer.validate();
    require_image(input, layer.out_channels, "transpose_conv2d input");
    const ConvGeometry g(out_h, out_w, layer.stride);
    require(static_cast<std::size_t>(g.out_h) == input.dim(1) &&
                static_cast<std::size_t>(g.out_w) == input.dim(2),
            Errc::shape_mismatch, "transpose_conv2d target extent does not match input");
    require(layer.bias.empty() || layer.bias.size() == layer.in_channels, Errc::shape_mismatch,
            "transpose_conv2d bias must hold in_channels entries");
    Tensor out({layer.in_channels, out_h, out_w});
    const std::size_t plane = out_h * out_w;
    if (!layer.bias.empty()) {
        for (std::size_t i = 0; i < layer.in_channels; ++i) {
            std::fill_n(out.data() + i * plane, plane, layer.bias[i]);
        }
    }
    correlate_adjoint(input.data(), layer.out_channels, g, layer.kernel.data(), layer.in_channels,
                      out.data());
    return out;
}

Tensor transpose_conv2d_backward(const Tensor& input, const ConvLayer& layer,
                                 const Tensor& grad_output, ConvLayer& grads) {
    require_image(input, layer.out_channels, "transpose_conv2d_backward input");
    require_image(grad_output, layer.in_channels, "transpose_conv2d_backward grad");
    const ConvGeometry g(grad_output.dim(1), grad_output.dim(2), layer.stride);
    require(static_cast<std::size_t>(g.out_h) == input.dim(1) &&
                static_cast<std::size_t>(g.out_w) == input.dim(2),
            Errc::shape_mismatch, "transpose_conv2d_backward extents");
    require(grads.kernel.size() == layer.kernel.size() && grads.bias.size() == layer.bias.size(),
            Errc::shape_mismatch, "transpose_conv2d_backward grads container");
    const std::size_t plane = grad_output.dim(1) * grad_output.dim(2);
    for (std::size_t i = 0; i < grads.bias.size(); ++i) {
        grads.bias[i] += plane_sum(grad_output.data() + i * plane, plane);
    }
    // y = A^T x  =>  dL/dw pairs the upstream grad (conv input side) with x.
    correlate_kernel_grad(grad_output.data(), layer.in_channels, g, input.data(), layer.out_channels,
                          grads.kernel.data());
    Tensor grad_input(input.shape());
    correlate(grad_output.data(), layer.in_channels, g, layer.kernel.data(), layer.out_channels,
              grad_input.data());
    return grad_input;
}

// ---- pooling --------------------------------------------------------------

PoolResult maxpool2x2(const Tensor& input) {
    require(input.rank() == 3, Errc::shape_mismatch, "maxpool expects {C, H, W}");
    const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
    require(h % 2 == 0 && w % 2 == 0, Errc::shape_mismatch, "maxpool needs even extents");
    const std::size_t oh = h / 2, ow = w / 2;
    PoolResult result{Tensor({c, oh, ow}), std::vector<std::uint32_t>(c * oh * ow)};
    std::size_t out_idx = 0;
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox, ++out_idx) {
                const std::size_t base = (ch * h + 2 * oy) * w + 2 * ox;
                const std::size_t candidates[4] = {base, base + 1, base + w, base + w + 1};
                std::size_t best = candidates[0];
                for (int k = 1; k < 4; ++k) {
                    if (input[candidates[k]] > input[best]) best = candidates[k];
                }
                result.output[out_idx] = input[best];
                result.argmax[out_idx] = static_cast<std::uint32_t>(best);
            }
        }
    }
    return result;
}

Tensor maxpool2x2_backward(const Tensor& input, const PoolResult& forward, const Tensor& grad_output) {
    require(grad_output.size() == forward.argmax.size(), Errc::shape_mismatch,
            "maxpool_backward grad shape");
    Tensor grad_input(input.shape());
    for (std::size_t k = 0; k < forward.argmax.size(); ++k) grad_input[forward.argmax[k]] += grad_output[k];
    return grad_input;
}

// ---- dense ----------------------------------------------------------------

namespace {

std::size_t batch_of(const Tensor& input, std::size_t features, const char* what) {
    if (input.rank() == 1) {
        require(input.dim(0) == features, Errc::shape_mismatch,
                std::string(what) + ": expected " + std::to_string(features) + " features");
        return 1;
    }
    require(input.rank() == 2 && input.dim(1) == features, Errc::shape_mismatch,
            std::string(what) + ": expected {B, " + std::to_string(features) + "}, got " +
                shape_string(input.shape()));
    return input.dim(0);
}

}  // namespace

// Register-tiled kernels: up to kRows batch rows by kLane output columns are
// accumulated in registers while rows of the weight matrix stream through.
constexpr std::size_t kRows = 12;
constexpr std::size_t kDepth = 16;

namespace {

template <std::size_t R>
void dense_tile(const double* x, std::size_t nin, const double* w, std::size_t nout, std::size_t i0,
                std::size_t i1, std::size_t o0, double* y) {
    Lane acc[R];
    for (std::size_t r = 0; r < R; ++r) acc[r] = load_lane(y + r * nout + o0);
    for (std::size_t i = i0; i < i1; ++i) {
        const Lane wr = load_lane(w + i * nout + o0);
        for (std::size_t r = 0; r < R; ++r) acc[r] += x[r * nin + i] * wr;
    }
    for (std::size_t r = 0; r < R; ++r) store_lane(y + r * nout + o0, acc[r]);
}

template <std::size_t R>
void dense_back_tile(const double* x, std::size_t nin, const double* w, const double* gy, std::size_t nout,
                     std::size_t i, std::size_t o0, std::size_t o1, double* gw, double* gx) {
    Lane acc[R];
    double xr[R];
    for (std::size_t r = 0; r < R; ++r) {
        acc[r] = Lane{};
        xr[r] = x[r * nin + i];
    }
    const double* wr = w + i * nout;
    double* gwr = gw + i * nout;
    for (std::size_t o = o0; o < o1; o += kLane) {
        Lane g = load_lane(gwr + o);
        const Lane wv = load_lane(wr + o);
        for (std::size_t r = 0; r < R; ++r) {
            const Lane gyr = load_lane(gy + r * nout + o);
            g += xr[r] * gyr;
            acc[r] += wv * gyr;
        }
        store_lane(gwr + o, g);
    }
    for (std::size_t r = 0; r < R; ++r) {
        double sum = 0.0;
        for (std::size_t l = 0; l < kLane; ++l) sum += acc[r][l];
        gx[r * nin + i] += sum;
    }
}

// Calls fn(std::integral_constant<R>) for a runtime row count 1..kRows.
template <typename Fn>
void with_rows(std::size_t rows, Fn&& fn) {
    [&]<std::size_t... R>(std::index_sequence<R...>) {
        ((rows == R + 1 ? (fn(std::integral_constant<std::size_t, R + 1>{}), true) : false) || ...);
    }(std::make_index_sequence<kRows>{});
}

}  // namespace

Tensor dense(const Tensor& input, const DenseLayer& layer) {
    layer.validate();
    const std::size_t batch = batch_of(input, layer.inputs, "dense input");
    const std::size_t nin = layer.inputs, nout = layer.outputs;
    Tensor out({batch, nout});
    double* y = out.data();
    const double* x = input.data();
    const double* w = layer.weight.data();
    for (std::size_t b = 0; b < batch; ++b) std::copy(layer.bias.begin(), layer.bias.end(), y + b * nout);
    const std::size_t tiled = nout - nout % kLane;
    for (std::size_t i0 = 0; i0 < nin; i0 += kDepth) {
        const std::size_t i1 = std::min(nin, i0 + kDepth);
        for (std::size_t b0 = 0; b0 < batch; b0 += kRows) {
            const std::size_t rows = std::min(kRows, batch - b0);
            with_rows(rows, [&](auto R) {
                for (std::size_t o0 = 0; o0 < tiled; o0 += kLane)
                    dense_tile<R()>(x + b0 * nin, nin, w, nout, i0, i1, o0, y + b0 * nout);
            });
        }
    }
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < nin; ++i)
            for (std::size_t o = tiled; o < nout; ++o) y[b * nout + o] += x[b * nin + i] * w[i * nout + o];
    return out;
}

Tensor dense_backward(const Tensor& input, const DenseLayer& layer, const Tensor& grad_output,
                      DenseLayer& grads) {
    const std::size_t batch = batch_of(input, layer.inputs, "dense_backward input");
    const std::size_t nin = layer.inputs, nout = layer.outputs;
    require(grad_output.size() == batch * nout, Errc::shape_mismatch, "dense_backward grad shape");
    require(grads.weight.size() == layer.weight.size() && grads.bias.size() == layer.bias.size(),
            Errc::shape_mismatch, "dense_backward grads container");
    for (std::size_t b = 0; b < batch; ++b) {
        const double* gy = grad_output.data() + b * nout;
        for (std::size_t o = 0; o < nout; ++o) grads.bias[o] += gy[o];
    }
    Tensor grad_input(input.shape());
    const double* x = input.data();
    const double* w = layer.weight.data();
    const double* gy = grad_output.data();
    double* gw = grads.weight.data();
    double* gx = grad_input.data();
    const std::size_t tiled = nout - nout % kLane;
    for (std::size_t b0 = 0; b0 < batch; b0 += kRows) {
        const std::size_t rows = std::min(kRows, batch - b0);
        with_rows(rows, [&](auto R) {
            for (std::size_t i = 0; i < nin; ++i)
                dense_back_tile<R()>(x + b0 * nin, nin, w, gy + b0 * nout, nout, i, 0, tiled, gw, gx + b0 * nin);
        });
    }
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t i = 0; i < nin; ++i) {
            for (std::size_t o = tiled; o < nout; ++o) {
                gw[i * nout + o] += x[b * nin + i] * gy[b * nout + o];
                gx[b * nin + i] += w[i * nout + o] * gy[b * nout + o];
            }
        }
    }
    return grad_input;
}

// ---- activations ----------------------------------------------------------

Tensor relu(const Tensor& input) {
    Tensor out = input;
    for (auto& v : out.values()) v = v > 0.0 ? v : 0.0;
    return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_output) {
    require(input.size() == grad_output.size(), Errc::shape_mismatch, "relu_backward shape");
    Tensor grad(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) grad[i] = input[i] > 0.0 ? grad_output[i] : 0.0;
    return grad;
}

std::vector<double> dropout_mask(std::size_t size, double rate, Rng& rng) {
    require(rate >= 0.0 && rate < 1.0, Errc::invalid_argument, "dropout rate must lie in [0, 1)");
    const double keep = 1.0 / (1.0 - rate);
    std::vector<double> mask(size, keep);
    if (rate == 0.0) return mask;
    for (auto& m : mask) {
        if (rng.uniform() < rate) m = 0.0;
    }
    return mask;
}

Tensor apply_mask(const Tensor& input, std::span<const double> mask) {
    require(mask.size() == input.size(), Errc::shape_mismatch, "dropout mask size");
    Tensor out = input;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
    return out;
}

Tensor dropout(const Tensor& input, double rate, Rng& rng, bool training) {
    require(rate >= 0.0 && rate < 1.0, Errc::invalid_argument, "dropout rate must lie in [0, 1)");
    if (!training || rate == 0.0) return input;
    return apply_mask(input, dropout_mask(input.size(), rate, rng));
}

// ---- losses ---------------------------------------------------------------

LossResult mse_loss(const Tensor& pred, const Tensor& target) {
    require(pred.size() == target.size() && pred.size() > 0, Errc::shape_mismatch,
            "mse_loss operands differ in size");
    LossResult result{0.0, Tensor(pred.shape())};
    const double count = static_cast<double>(pred.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        sum += d * d;
        result.grad[i] = 2.0 * d / count;
    }
    result.value = sum / count;
    return result;
}

LossResult softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
    require(logits.rank() == 1 || logits.rank() == 2, Errc::shape_mismatch,
            "softmax_cross_entropy expects {K} or {B, K}");
    const std::size_t batch = logits.rank() == 1 ? 1 : logits.dim(0);
    const std::size_t classes = logits.rank() == 1 ? logits.dim(0) : logits.dim(1);
    require(labels.size() == batch && batch > 0, Errc::shape_mismatch, "one label per logit row");
    LossResult result{0.0, Tensor(logits.shape())};
    for (std::size_t b = 0; b < batch; ++b) {
        const int label = labels[b];
        require(label >= 0 && static_cast<std::size_t>(label) < classes, Errc::invalid_argument,
                "label out of range");
        const double* z = logits.data() + b * classes;
        double* g = result.grad.data() + b * classes;
        const double zmax = *std::max_element(z, z + classes);
        double denom = 0.0;
        for (std::size_t k = 0; k < classes; ++k) denom += std::exp(z[k] - zmax);
        const double log_denom = std::log(denom);
        result.value += -(z[label] - zmax - log_denom);
        for (std::size_t k = 0; k < classes; ++k) {
            g[k] = std::exp(z[k] - zmax - log_denom) / static_cast<double>(batch);
        }
        g[label] -= 1.0 / static_cast<double>(batch);
    }
    result.value /= static_cast<double>(batch);
    return result;
}

}  // namespace oamfso::nn
