#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <numbers>
#include <set>

#include "derain/metrics.hpp"
#include "derain/rainsynth.hpp"

using namespace derain;
using namespace derain::rainsynth;

namespace {

std::uint64_t fnv1a(const Tensor& t)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (float v : t.data()) {
        const auto bits = std::bit_cast<std::uint32_t>(v);
        for (int b = 0; b < 4; ++b) {
            h ^= (bits >> (8 * b)) & 0xffu;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

/// Principal axis of a non-negative single-channel image treated as a mass
/// distribution, in the RainParams angle convention (degrees from vertical).
double principal_axis_angle(const Tensor& t)
{
    double m = 0, mx = 0, my = 0;
    for (std::size_t y = 0; y < t.height(); ++y)
        for (std::size_t x = 0; x < t.width(); ++x) {
            m += t(y, x);
            mx += t(y, x) * static_cast<double>(x);
            my += t(y, x) * static_cast<double>(y);
        }
    mx /= m;
    my /= m;
    double cxx = 0, cyy = 0, cxy = 0;
    for (std::size_t y = 0; y < t.height(); ++y)
        for (std::size_t x = 0; x < t.width(); ++x) {
            const double dx = static_cast<double>(x) - mx, dy = static_cast<double>(y) - my;
            cxx += t(y, x) * dx * dx;
            cyy += t(y, x) * dy * dy;
            cxy += t(y, x) * dx * dy;
        }
    // Major axis angle from the x axis; the streak runs along (-sin a, cos a).
    const double phi = 0.5 * std::atan2(2 * cxy, cxx - cyy);
    double a = std::atan2(-std::cos(phi), std::sin(phi)) * 180.0 / std::numbers::pi;
    while (a > 90)
        a -= 180;
    while (a < -90)
        a += 180;
    return a;
}

/// Autocorrelation of a rain layer over a small window of lags. Its mass is
/// elongated along the streak direction.
Tensor autocorrelation(const Tensor& t, long radius)
{
    const auto side = static_cast<std::size_t>(2 * radius + 1);
    Tensor out(side, side, 1);
    const double mu = numerics::mean(t);
    const auto H = static_cast<long>(t.height()), W = static_cast<long>(t.width());
    for (long dy = -radius; dy <= radius; ++dy)
        for (long dx = -radius; dx <= radius; ++dx) {
            double acc = 0;
            for (long y = radius; y < H - radius; ++y)
                for (long x = radius; x < W - radius; ++x)
                    acc += (t(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) - mu) *
                           (t(static_cast<std::size_t>(y + dy), static_cast<std::size_t>(x + dx)) - mu);
            out(static_cast<std::size_t>(dy + radius), static_cast<std::size_t>(dx + radius)) =
                static_cast<float>(std::max(acc, 0.0));
        }
    return out;
}

} // namespace

TEST(LineKernel, NormalizedAndCentered)
{
    for (double angle : {-30.0, 0.0, 17.0, 45.0})
        for (std::size_t len : {1u, 5u, 15u, 30u}) {
            const Tensor k = line_kernel(len, angle);
            ASSERT_EQ(k.height() % 2, 1u);
            double s = 0.0;
            for (float v : k.data()) {
                EXPECT_GE(v, 0.0f);
                s += v;
            }
            EXPECT_NEAR(s, 1.0, 1e-6);
        }
}

TEST(RenderRain, Deterministic)
{
    RainParams p;
    p.seed = 42;
    const Tensor a = render_rain_layer(64, 48, p);
    const Tensor b = render_rain_layer(64, 48, p);
    EXPECT_EQ(fnv1a(a), fnv1a(b));
    p.seed = 43;
    EXPECT_NE(fnv1a(render_rain_layer(64, 48, p)), fnv1a(a));
}

TEST(RenderRain, IntensityIsLinear)
{
    RainParams p;
    p.intensity = 0.3;
    p.seed = 5;
    const Tensor a = render_rain_layer(64, 64, p);
    p.intensity = 0.6;
    const Tensor b = render_rain_layer(64, 64, p);
    for (std::size_t i = 0; i < a.size(); ++i)
        if (b.data()[i] < 1.0f)
            EXPECT_NEAR(b.data()[i], 2.0f * a.data()[i], 1e-6);
}

TEST(RenderRain, MeanMatchesExpectation)
{
    RainParams p;
    p.density = 0.05;
    p.intensity = 0.6;
    p.lengthPx = 15;
    p.angleDeg = 20;
    p.seed = 11;
    const Tensor t = render_rain_layer(512, 512, p);
    const double want = p.density * 0.75 * p.intensity;
    EXPECT_NEAR(numerics::mean(t), want, 0.1 * want);
    for (float v : t.data()) {
        ASSERT_GE(v, 0.0f);
        ASSERT_LE(v, 1.0f);
    }
}

TEST(RenderRain, RejectsSmallCanvasAndBadParams)
{
    RainParams p;
    p.lengthPx = 30;
    EXPECT_THROW(render_rain_layer(20, 64, p), Error);
    p = {};
    p.density = 0.0;
    EXPECT_THROW(render_rain_layer(64, 64, p), Error);
    p = {};
    p.angleDeg = 50;
    EXPECT_THROW(render_rain_layer(64, 64, p), Error);
}

TEST(RenderRain, OrientationFollowsAngle)
{
    for (double angle : {-30.0, -20.0, -10.0, 0.0, 10.0, 20.0, 30.0}) {
        RainParams p;
        p.angleDeg = angle;
        p.density = 0.01;
        p.lengthPx = 25;
        p.intensity = 0.5;
        p.seed = 77;
        EXPECT_NEAR(principal_axis_angle(line_kernel(25, angle)), angle, 1.0) << "kernel " << angle;
        const Tensor layer = render_rain_layer(256, 256, p);
        EXPECT_NEAR(principal_axis_angle(autocorrelation(layer, 12)), angle, 5.0)
            << "layer " << angle;
    }
}

TEST(Composite, ScreenBlend)
{
    const Tensor rain = render_rain_layer(32, 32, RainParams{0, 9, 0.1, 0.9, 3});
    const Tensor clean(32, 32, 3, 0.3f);
    const Tensor out = composite(clean, rain);
    for (std::size_t y = 0; y < 32; ++y)
        for (std::size_t x = 0; x < 32; ++x)
            for (std::size_t c = 0; c < 3; ++c) {
                EXPECT_GE(out(y, x, c), clean(y, x, c));
                EXPECT_NEAR(out(y, x, c), 1.0f - 0.7f * (1.0f - rain(y, x)), 1e-6);
            }
    const Tensor same = composite(clean, Tensor(32, 32, 1));
    for (std::size_t i = 0; i < clean.size(); ++i)
        EXPECT_EQ(same.data()[i], clean.data()[i]);
    const Tensor black = composite(Tensor(32, 32, 3), rain);
    for (std::size_t y = 0; y < 32; ++y)
        for (std::size_t c = 0; c < 3; ++c)
            EXPECT_FLOAT_EQ(black(y, 5, c), rain(y, 5));
    for (const Tensor out_ = composite(Tensor(32, 32, 3, 1.0f), rain); float v : out_.data())
        EXPECT_EQ(v, 1.0f);
    EXPECT_THROW(composite(clean, Tensor(32, 31, 1)), Error);
}

TEST(DefaultVariants, Grid)
{
    const auto v = default_variants();
    ASSERT_EQ(v.size(), 14u);
    for (std::size_t i = 0; i < v.size(); ++i) {
        EXPECT_NO_THROW(v[i].validate());
        for (std::size_t j = i + 1; j < v.size(); ++j)
            EXPECT_FALSE(v[i] == v[j]);
    }
    std::set<double> angles;
    for (const auto& p : v)
        angles.insert(p.angleDeg);
    EXPECT_EQ(angles, (std::set<double>{-30, -20, -10, 0, 10, 20, 30}));
}

TEST(DefaultVariants, GoldenChecksum)
{
    const Tensor t = render_rain_layer(128, 128, default_variants()[0]);
    EXPECT_EQ(fnv1a(t), GOLDEN_VARIANT0);
}
