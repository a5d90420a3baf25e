#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <vector>

#include "tensor.hpp"

namespace derain::rainsynth {

struct RainParams {
    double angleDeg = 0.0;    ///< from vertical; negative leans the streak top to the left
    std::size_t lengthPx = 15;
    double density = 0.03;    ///< probability a pixel seeds a streak, (0, 0.2]
    double intensity = 0.5;   ///< (0, 1]
    std::uint64_t seed = 0;

    void validate() const
    {
        if (lengthPx < 1)
            throw Error("rain lengthPx must be >= 1");
        if (!(density > 0.0 && density <= 0.2))
            throw Error("rain density must lie in (0, 0.2]");
        if (!(intensity > 0.0 && intensity <= 1.0))
            throw Error("rain intensity must lie in (0, 1]");
        if (!(std::abs(angleDeg) <= 45.0))
            throw Error("rain angle must satisfy |angleDeg| <= 45");
    }

    bool operator==(const RainParams&) const = default;
};

/// SplitMix64 finalizer; used as a counter-based generator keyed by
/// (seed, pixel index).
inline std::uint64_t mix64(std::uint64_t z)
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline double unit_uniform(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

/// Normalized anti-aliased line kernel of the given length and angle. Odd side,
/// centered, sums to 1.
inline Tensor line_kernel(std::size_t lengthPx, double angleDeg)
{
    const double half = (static_cast<double>(lengthPx) - 1.0) / 2.0;
    const auto radius = static_cast<std::size_t>(std::ceil(half)) + 1;
    const std::size_t side = 2 * radius + 1;
    Tensor k(side, side, 1);
    const double theta = angleDeg * std::numbers::pi / 180.0;
    // Direction of travel down the streak (image y axis points down).
    const double dx = -std::sin(theta), dy = std::cos(theta);
    const std::size_t samples = std::max<std::size_t>(1, 4 * lengthPx);
    for (std::size_t s = 0; s < samples; ++s) {
        const double t = samples == 1 ? 0.0 : -half + 2.0 * half * static_cast<double>(s) /
                                                          static_cast<double>(samples - 1);
        const double px = static_cast<double>(radius) + t * dx;
        const double py = static_cast<double>(radius) + t * dy;
        const double fx = std::floor(px), fy = std::floor(py);
        const double ax = px - fx, ay = py - fy;
        const auto ix = static_cast<std::size_t>(fx), iy = static_cast<std::size_t>(fy);
        k(iy, ix) += static_cast<float>((1 - ax) * (1 - ay));
        k(iy, ix + 1) += static_cast<float>(ax * (1 - ay));
        k(iy + 1, ix) += static_cast<float>((1 - ax) * ay);
        k(iy + 1, ix + 1) += static_cast<float>(ax * ay);
    }
    double total = 0.0;
    for (float v : k.data())
        total += v;
    for (float& v : k.data())
        v = static_cast<float>(v / total);
    return k;
}

/// Single-channel streak layer: sparse uniform(0.5, 1) seeds smeared along a
/// line kernel, scaled by intensity and clamped to [0, 1].
inline Tensor render_rain_layer(std::size_t height, std::size_t width, const RainParams& p)
{
    p.validate();
    if (height < p.lengthPx || width < p.lengthPx)
        throw Error("render_rain_layer: " + std::to_string(height) + "x" + std::to_string(width) +
                    " is smaller than streak length " + std::to_string(p.lengthPx));
    const Tensor kernel = line_kernel(p.lengthPx, p.angleDeg);
    const auto side = static_cast<long>(kernel.height()), r = side / 2;
    const auto H = static_cast<long>(height), W = static_cast<long>(width);

    std::vector<double> acc(height * width, 0.0);
    const std::uint64_t key = mix64(p.seed);
    for (long y = 0; y < H; ++y)
        for (long x = 0; x < W; ++x) {
            const auto idx = static_cast<std::uint64_t>(y * W + x);
            const std::uint64_t h = mix64(key ^ mix64(2 * idx));
            if (unit_uniform(h) >= p.density)
                continue;
            const double v = 0.5 + 0.5 * unit_uniform(mix64(key ^ mix64(2 * idx + 1)));
            for (long i = 0; i < side; ++i) {
                const long yy = y + i - r;
                if (yy < 0 || yy >= H)
                    continue;
                for (long j = 0; j < side; ++j) {
                    const long xx = x + j - r;
                    if (xx < 0 || xx >= W)
                        continue;
                    acc[static_cast<std::size_t>(yy * W + xx)] +=
                        v * kernel(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
                }
            }
        }
    Tensor out(height, width, 1);
    for (std::size_t i = 0; i < acc.size(); ++i)
        out.data()[i] = static_cast<float>(std::clamp(acc[i] * p.intensity, 0.0, 1.0));
    return out;
}

/// Screen blend of a single-channel rain layer over every channel of `clean`.
inline Tensor composite(const Tensor& clean, const Tensor& rain)
{
    if (rain.channels() != 1 || rain.height() != clean.height() || rain.width() != clean.width())
        throw Error("composite: rain layer " + rain.shape().str() + " does not match clean image " +
                    clean.shape().str());
    Tensor out(clean.shape());
    for (std::size_t y = 0; y < clean.height(); ++y)
        for (std::size_t x = 0; x < clean.width(); ++x) {
            const float rv = rain(y, x);
            for (std::size_t c = 0; c < clean.channels(); ++c)
                out(y, x, c) = std::clamp(1.0f - (1.0f - clean(y, x, c)) * (1.0f - rv), 0.0f, 1.0f);
        }
    return out;
}

/// The 14-entry grid: angles -30..30 step 10, each in a light and heavy
/// profile. Index i has angle (i / 2) and profile (i % 2).
inline std::vector<RainParams> default_variants()
{
    constexpr std::array<double, 7> angles{-30, -20, -10, 0, 10, 20, 30};
    std::vector<RainParams> out;
    for (std::size_t i = 0; i < 2 * angles.size(); ++i) {
        const bool heavy = i % 2 == 1;
        RainParams p;
        p.angleDeg = angles[i / 2];
        p.intensity = heavy ? 0.8 : 0.5;
        p.lengthPx = heavy ? 30 : 15;
        p.density = heavy ? 0.06 : 0.03;
        p.seed = mix64(0x7261696eULL + i);
        out.push_back(p);
    }
    return out;
}

} // namespace derain::rainsynth
