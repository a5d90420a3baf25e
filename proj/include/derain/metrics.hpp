#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "enhance.hpp"
#include "tensor.hpp"

namespace derain::metrics {

struct SsimConfig {
    std::size_t windowSide = 11;
    double windowSigma = 1.5;
    double k1 = 0.01, k2 = 0.03;
    double dynamicRange = 1.0;

    void validate() const
    {
        if (windowSide < 3 || windowSide % 2 == 0)
            throw Error("SSIM window side must be odd and >= 3");
        if (!(k1 > 0.0 && k2 > 0.0))
            throw Error("SSIM constants k1, k2 must be > 0");
        if (!(windowSigma > 0.0))
            throw Error("SSIM window sigma must be > 0");
    }
};

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
inline std::vector<double> gaussian_taps(std::size_t side, double sigma)
{
    std::vector<double> taps(side);
    const double c = static_cast<double>(side / 2);
    double total = 0.0;
    for (std::size_t i = 0; i < side; ++i) {
        const double d = static_cast<double>(i) - c;
        taps[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        total += taps[i];
    }
    for (double& t : taps)
        t /= total;
    return taps;
}

namespace detail {

// Separable valid-region Gaussian filter of a row-major H x W plane.
inline std::vector<double> gaussian_valid(const std::vector<double>& plane, std::size_t H,
                                          std::size_t W, const std::vector<double>& taps)
{
    const std::size_t n = taps.size(), Ho = H - n + 1, Wo = W - n + 1;
    std::vector<double> rows(H * Wo);
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < Wo; ++x) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j)
                s += taps[j] * plane[y * W + x + j];
            rows[y * Wo + x] = s;
        }
    std::vector<double> out(Ho * Wo);
    for (std::size_t y = 0; y < Ho; ++y)
        for (std::size_t x = 0; x < Wo; ++x) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                s += taps[i] * rows[(y + i) * Wo + x];
            out[y * Wo + x] = s;
        }
    return out;
}

} // namespace detail

/// Mean SSIM over the valid region, computed on luminance with a Gaussian
/// window.
inline double ssim(const Tensor& a, const Tensor& b, const SsimConfig& cfg = {})
{
    cfg.validate();
    require_same_shape(a, b, "ssim");
    const std::size_t H = a.height(), W = a.width();
    if (H < cfg.windowSide || W < cfg.windowSide)
        throw Error("ssim: image " + a.shape().str() + " smaller than the " +
                    std::to_string(cfg.windowSide) + "px window");
    const std::vector<double> x = enhance::luminance(a);
    const std::vector<double> y = enhance::luminance(b);
    std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    const auto taps = gaussian_taps(cfg.windowSide, cfg.windowSigma);
    const auto mx = detail::gaussian_valid(x, H, W, taps);
    const auto my = detail::gaussian_valid(y, H, W, taps);
    const auto mxx = detail::gaussian_valid(xx, H, W, taps);
    const auto myy = detail::gaussian_valid(yy, H, W, taps);
    const auto mxy = detail::gaussian_valid(xy, H, W, taps);

    const double c1 = std::pow(cfg.k1 * cfg.dynamicRange, 2);
    const double c2 = std::pow(cfg.k2 * cfg.dynamicRange, 2);
    double total = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
        const double vx = mxx[i] - mx[i] * mx[i];
        const double vy = myy[i] - my[i] * my[i];
        const double cov = mxy[i] - mx[i] * my[i];
        total += ((2 * mx[i] * my[i] + c1) * (2 * cov + c2)) /
                 ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    return total / static_cast<double>(mx.size());
}

/// Fraction of values within `threshold` of `offset`.
inline double sparsity_profile(const Tensor& t, double threshold, double offset = 0.0)
{
    if (!(threshold > 0.0))
        throw Error("sparsity threshold must be > 0");
    std::size_t hits = 0;
    for (float v : t.data())
        if (std::abs(static_cast<double>(v) - offset) < threshold)
            ++hits;
    return static_cast<double>(hits) / static_cast<double>(t.size());
}

} // namespace derain::metrics
