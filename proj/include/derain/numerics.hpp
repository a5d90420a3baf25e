#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "tensor.hpp"

namespace derain::numerics {

namespace detail {

// Pixel tile width of the convolution kernels. The column buffer is padded to
// a multiple of this so every tile is full.
inline constexpr std::size_t kTile = 16;

inline std::size_t padded(std::size_t n) { return (n + kTile - 1) / kTile * kTile; }

/// Unrolls every valid kh x kw window of `in` into a column matrix of
/// K = kh*kw*C rows and padded(Ho*Wo) columns. Row r = (i*kw + j)*C + c.
inline std::vector<float> im2col(const Tensor& in, std::size_t kh, std::size_t kw)
{
    const std::size_t C = in.channels(), W = in.width();
    const std::size_t Ho = in.height() - kh + 1, Wo = W - kw + 1;
    const std::size_t N = Ho * Wo, Np = padded(N), K = kh * kw * C;
    std::vector<float> col(K * Np, 0.0f);
    const float* src = in.raw();
    for (std::size_t i = 0; i < kh; ++i)
        for (std::size_t j = 0; j < kw; ++j)
            for (std::size_t c = 0; c < C; ++c) {
                float* dst = col.data() + ((i * kw + j) * C + c) * Np;
                for (std::size_t y = 0; y < Ho; ++y) {
                    const float* row = src + ((y + i) * W + j) * C + c;
                    float* out = dst + y * Wo;
                    for (std::size_t x = 0; x < Wo; ++x)
                        out[x] = row[x * C];
                }
            }
    return col;
}

/// Fixed-order dot product with lane-parallel double accumulators; `n` must
/// be a multiple of kTile.
inline double dot_tiled(const float* a, const float* b, std::size_t n)
{
    double acc[kTile] = {};
    for (std::size_t p = 0; p < n; p += kTile)
        for (std::size_t q = 0; q < kTile; ++q)
            acc[q] += static_cast<double>(a[p + q]) * static_cast<double>(b[p + q]);
    double s = 0.0;
    for (std::size_t q = 0; q < kTile; ++q)
        s += acc[q];
    return s;
}

// Kernels per register block in the convolution loops.
inline constexpr std::size_t kBlock = 4;

/// One pixel tile of B consecutive kernels starting at k0. Every output sums
/// bias + w[0]*col[0] + w[1]*col[1] + ... in row order, whatever B is.
template <std::size_t B>
void conv_tile(const KernelBank& bank, const float* col, std::size_t Np, std::size_t k0,
               std::size_t nb, float* dst, std::size_t count)
{
    const std::size_t K = bank.kernelVolume();
    double acc[B][kTile];
    const float* w[B];
    for (std::size_t b = 0; b < B; ++b) {
        w[b] = bank.weights.data() + (k0 + b) * K;
        for (std::size_t q = 0; q < kTile; ++q)
            acc[b][q] = bank.bias[k0 + b];
    }
    for (std::size_t r = 0; r < K; ++r) {
        double c[kTile];
        for (std::size_t q = 0; q < kTile; ++q)
            c[q] = col[r * Np + q];
        for (std::size_t b = 0; b < B; ++b) {
            const double wr = w[b][r];
            for (std::size_t q = 0; q < kTile; ++q)
                acc[b][q] += wr * c[q];
        }
    }
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t q = 0; q < nb; ++q)
            dst[q * count + k0 + b] = static_cast<float>(acc[b][q]);
}

/// dot_tiled of B rows of `a` (stride n) against one `b`, sharing the loads of b.
template <std::size_t B>
void dot_tiled_block(const float* a, const float* b, std::size_t n, double* out)
{
    double acc[B][kTile] = {};
    for (std::size_t p = 0; p < n; p += kTile) {
        double bv[kTile];
        for (std::size_t q = 0; q < kTile; ++q)
            bv[q] = b[p + q];
        for (std::size_t i = 0; i < B; ++i)
            for (std::size_t q = 0; q < kTile; ++q)
                acc[i][q] += static_cast<double>(a[i * n + p + q]) * bv[q];
    }
    for (std::size_t i = 0; i < B; ++i) {
        double s = 0.0;
        for (std::size_t q = 0; q < kTile; ++q)
            s += acc[i][q];
        out[i] = s;
    }
}

/// Column gradient of B consecutive rows r0.. for one pixel tile:
/// acc[b][q] = sum over k in order of w[k, r0+b] * g[k][q].
template <std::size_t B>
void col_grad_tile(const KernelBank& bank, const float* g, std::size_t Np, std::size_t r0,
                   double (&acc)[B][kTile])
{
    const std::size_t K = bank.kernelVolume();
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t q = 0; q < kTile; ++q)
            acc[b][q] = 0.0;
    for (std::size_t k = 0; k < bank.count; ++k) {
        double gv[kTile];
        for (std::size_t q = 0; q < kTile; ++q)
            gv[q] = g[k * Np + q];
        for (std::size_t b = 0; b < B; ++b) {
            const double wr = bank.weights[k * K + r0 + b];
            for (std::size_t q = 0; q < kTile; ++q)
                acc[b][q] += wr * gv[q];
        }
    }
}

inline void check_conv_input(const Tensor& input, const KernelBank& bank)
{
    bank.validate();
    if (input.channels() != bank.inChannels || input.height() < bank.kh ||
        input.width() < bank.kw)
        throw Error("conv_valid: input " + input.shape().str() + " incompatible with " +
                    bank.str());
}

} // namespace detail

inline Shape conv_output_shape(const Shape& in, const KernelBank& bank)
{
    return {in.height - bank.kh + 1, in.width - bank.kw + 1, bank.count};
}

/// Valid cross-correlation (no kernel flip) of `input` with every kernel of
/// `bank`, plus bias. Output is (H-kh+1) x (W-kw+1) x count.
inline Tensor conv_valid(const Tensor& input, const KernelBank& bank)
{
    using detail::kTile;
    detail::check_conv_input(input, bank);
    const Shape os = conv_output_shape(input.shape(), bank);
    const std::size_t N = os.height * os.width, Np = detail::padded(N);
    const std::size_t count = bank.count;
    const std::vector<float> col = detail::im2col(input, bank.kh, bank.kw);

    Tensor out(os);
    float* dst = out.raw();
    for (std::size_t p0 = 0; p0 < Np; p0 += kTile) {
        const std::size_t nb = std::min(kTile, N - std::min(N, p0));
        std::size_t k = 0;
        for (; k + detail::kBlock <= count; k += detail::kBlock)
            detail::conv_tile<detail::kBlock>(bank, col.data() + p0, Np, k, nb, dst + p0 * count, count);
        for (; k < count; ++k)
            detail::conv_tile<1>(bank, col.data() + p0, Np, k, nb, dst + p0 * count, count);
    }
    return out;
}

struct ConvGradients {
    Tensor input;     ///< dL/d(input); left as a 1x1x1 zero when not requested
    KernelBank bank;  ///< dL/d(weights), dL/d(bias) in the same layout as the bank
};

/// Backward pass of conv_valid given dL/d(output). Set `wantInput` to false to
/// skip the input gradient (first layer of a network).
inline ConvGradients conv_backward(const Tensor& input, const KernelBank& bank,
                                   const Tensor& gradOut, bool wantInput = true)
{
    using detail::kTile;
    detail::check_conv_input(input, bank);
    const Shape os = conv_output_shape(input.shape(), bank);
    if (gradOut.shape() != os)
        throw Error("conv_backward: gradOut " + gradOut.shape().str() + " but conv output is " +
                    os.str());
    const std::size_t N = os.height * os.width, Np = detail::padded(N);
    const std::size_t K = bank.kernelVolume(), count = bank.count;
    const std::vector<float> col = detail::im2col(input, bank.kh, bank.kw);

    // gradOut transposed to count x Np, zero padded.
    std::vector<float> g(count * Np, 0.0f);
    const float* go = gradOut.raw();
    for (std::size_t p = 0; p < N; ++p)
        for (std::size_t k = 0; k < count; ++k)
            g[k * Np + p] = go[p * count + k];

    ConvGradients grads{Tensor(Shape{1, 1, 1}), KernelBank(count, bank.kh, bank.kw, bank.inChannels)};
    for (std::size_t k = 0; k < count; ++k) {
        double s = 0.0;
        for (std::size_t p = 0; p < N; ++p)
            s += g[k * Np + p];
        grads.bank.bias[k] = static_cast<float>(s);
    }
    for (std::size_t r = 0; r < K; ++r) {
        const float* c = col.data() + r * Np;
        double d[detail::kBlock];
        std::size_t k = 0;
        for (; k + detail::kBlock <= count; k += detail::kBlock) {
            detail::dot_tiled_block<detail::kBlock>(g.data() + k * Np, c, Np, d);
            for (std::size_t b = 0; b < detail::kBlock; ++b)
                grads.bank.weights[(k + b) * K + r] = static_cast<float>(d[b]);
        }
        for (; k < count; ++k)
            grads.bank.weights[k * K + r] =
                static_cast<float>(detail::dot_tiled(g.data() + k * Np, c, Np));
    }
    if (!wantInput)
        return grads;

    // Column gradient tile by tile, scattered straight back into the input.
    const std::size_t C = input.channels(), W = input.width(), Wo = os.width;
    std::vector<double> gin(input.size(), 0.0);
    for (std::size_t p0 = 0; p0 < Np; p0 += kTile) {
        const std::size_t nb = std::min(kTile, N - std::min(N, p0));
        const auto scatter = [&](std::size_t r, const double* acc) {
            const std::size_t c = r % C, j = (r / C) % bank.kw, i = r / (C * bank.kw);
            for (std::size_t q = 0; q < nb; ++q) {
                const std::size_t p = p0 + q, y = p / Wo, x = p % Wo;
                gin[((y + i) * W + (x + j)) * C + c] += acc[q];
            }
        };
        std::size_t r = 0;
        for (; r + detail::kBlock <= K; r += detail::kBlock) {
            double acc[detail::kBlock][kTile];
            detail::col_grad_tile<detail::kBlock>(bank, g.data() + p0, Np, r, acc);
            for (std::size_t b = 0; b < detail::kBlock; ++b)
                scatter(r + b, acc[b]);
        }
        for (; r < K; ++r) {
            double acc[1][kTile];
            detail::col_grad_tile<1>(bank, g.data() + p0, Np, r, acc);
            scatter(r, acc[0]);
        }
    }
    grads.input = Tensor(input.shape());
    std::transform(gin.begin(), gin.end(), grads.input.data().begin(),
                   [](double v) { return static_cast<float>(v); });
    return grads;
}

inline Tensor tanh_map(const Tensor& input)
{
    Tensor out(input.shape());
    std::transform(input.data().begin(), input.data().end(), out.data().begin(),
                   [](float v) { return std::tanh(v); });
    return out;
}

/// gradOut * (1 - activated^2), where `activated` is the tanh output.
inline Tensor tanh_backward(const Tensor& activated, const Tensor& gradOut)
{
    require_same_shape(activated, gradOut, "tanh_backward");
    Tensor out(activated.shape());
    auto a = activated.data();
    auto g = gradOut.data();
    auto o = out.data();
    for (std::size_t i = 0; i < o.size(); ++i)
        o[i] = g[i] * (1.0f - a[i] * a[i]);
    return out;
}

/// Per-channel mean over the (2r+1)^2 window clipped to the image, divided by
/// the in-bounds pixel count. Summed-area table, so cost does not depend on r.
inline Tensor box_mean(const Tensor& input, std::size_t radius)
{
    const std::size_t H = input.height(), W = input.width(), C = input.channels();
    const std::size_t W1 = W + 1;
    std::vector<double> sat((H + 1) * W1 * C, 0.0);
    for (std::size_t y = 0; y < H; ++y) {
        std::vector<double> rowSum(C, 0.0);
        for (std::size_t x = 0; x < W; ++x)
            for (std::size_t c = 0; c < C; ++c) {
                rowSum[c] += input(y, x, c);
                sat[((y + 1) * W1 + x + 1) * C + c] = sat[(y * W1 + x + 1) * C + c] + rowSum[c];
            }
    }
    Tensor out(input.shape());
    for (std::size_t y = 0; y < H; ++y) {
        const std::size_t y0 = y > radius ? y - radius : 0, y1 = std::min(H, y + radius + 1);
        for (std::size_t x = 0; x < W; ++x) {
            const std::size_t x0 = x > radius ? x - radius : 0, x1 = std::min(W, x + radius + 1);
            const double n = static_cast<double>((y1 - y0) * (x1 - x0));
            for (std::size_t c = 0; c < C; ++c) {
                const double s = sat[(y1 * W1 + x1) * C + c] - sat[(y0 * W1 + x1) * C + c] -
                                 sat[(y1 * W1 + x0) * C + c] + sat[(y0 * W1 + x0) * C + c];
                out(y, x, c) = static_cast<float>(s / n);
            }
        }
    }
    return out;
}

namespace detail {
template <typename Op>
Tensor zip(const Tensor& a, const Tensor& b, const char* what, Op op)
{
    require_same_shape(a, b, what);
    Tensor out(a.shape());
    auto da = a.data();
    auto db = b.data();
    auto o = out.data();
    for (std::size_t i = 0; i < o.size(); ++i)
        o[i] = op(da[i], db[i]);
    return out;
}

template <typename Op>
Tensor map(const Tensor& a, Op op)
{
    Tensor out(a.shape());
    std::transform(a.data().begin(), a.data().end(), out.data().begin(), op);
    return out;
}
} // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b)
{
    return detail::zip(a, b, "add", [](float x, float y) { return x + y; });
}
inline Tensor sub(const Tensor& a, const Tensor& b)
{
    return detail::zip(a, b, "sub", [](float x, float y) { return x - y; });
}
inline Tensor mul(const Tensor& a, const Tensor& b)
{
    return detail::zip(a, b, "mul", [](float x, float y) { return x * y; });
}
inline Tensor scale(const Tensor& a, float s)
{
    return detail::map(a, [s](float x) { return x * s; });
}
inline Tensor clamp01(const Tensor& a)
{
    return detail::map(a, [](float x) { return std::clamp(x, 0.0f, 1.0f); });
}

inline double mean(const Tensor& t)
{
    double s = 0.0;
    for (float v : t.data())
        s += v;
    return s / static_cast<double>(t.size());
}

/// Copies the window [y0, y0+h) x [x0, x0+w), all channels.
inline Tensor crop(const Tensor& t, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w)
{
    if (y0 + h > t.height() || x0 + w > t.width())
        throw Error("crop: window " + std::to_string(h) + "x" + std::to_string(w) + " at (" +
                    std::to_string(y0) + "," + std::to_string(x0) + ") exceeds " +
                    t.shape().str());
    Tensor out(h, w, t.channels());
    const std::size_t C = t.channels();
    for (std::size_t y = 0; y < h; ++y)
        std::copy_n(t.raw() + ((y0 + y) * t.width() + x0) * C, w * C, out.raw() + y * w * C);
    return out;
}

/// Mirror padding without edge repetition (dcb|abcd|cba); `before` rows and
/// columns on the top/left, `after` on the bottom/right.
inline Tensor reflect_pad(const Tensor& t, std::size_t before, std::size_t after)
{
    const auto H = static_cast<long>(t.height()), W = static_cast<long>(t.width());
    const auto b = static_cast<long>(before), a = static_cast<long>(after);
    if (std::max(b, a) >= std::min(H, W) && std::max(b, a) > 0)
        throw Error("reflect_pad: pad " + std::to_string(std::max(before, after)) +
                    " too large for " + t.shape().str());
    const auto reflect = [](long i, long n) {
        if (i < 0)
            return -i;
        if (i >= n)
            return 2 * (n - 1) - i;
        return i;
    };
    Tensor out(t.height() + before + after, t.width() + before + after, t.channels());
    const std::size_t C = t.channels();
    for (long y = 0; y < H + b + a; ++y)
        for (long x = 0; x < W + b + a; ++x) {
            const auto sy = static_cast<std::size_t>(reflect(y - b, H));
            const auto sx = static_cast<std::size_t>(reflect(x - b, W));
            std::copy_n(t.raw() + (sy * t.width() + sx) * C, C,
                        out.raw() + (static_cast<std::size_t>(y) * out.width() +
                                     static_cast<std::size_t>(x)) * C);
        }
    return out;
}

inline Tensor reflect_pad(const Tensor& t, std::size_t pad) { return reflect_pad(t, pad, pad); }

} // namespace derain::numerics
