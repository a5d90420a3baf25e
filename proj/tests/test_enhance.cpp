#include <gtest/gtest.h>

#include <random>

#include "derain/enhance.hpp"
#include "oracles.hpp"

using namespace derain;
using namespace derain::enhance;

namespace {

/// Gray ramp whose 1st and 99th luminance percentiles are exactly 0.02 / 0.98.
Tensor neutral_ramp()
{
    // 101 samples: percentile q sits exactly on sample q.
    Tensor t(1, 101, 3);
    for (std::size_t x = 0; x < 101; ++x) {
        float v = 0.0f;
        if (x == 0)
            v = 0.0f;
        else if (x == 1)
            v = 0.02f;
        else if (x >= 99)
            v = x == 99 ? 0.98f : 1.0f;
        else
            v = 0.02f + 0.96f * static_cast<float>(x - 1) / 98.0f;
        for (std::size_t c = 0; c < 3; ++c)
            t(0, x, c) = v;
    }
    return t;
}

} // namespace

TEST(Reconstruct, Basics)
{
    std::mt19937_64 rng(1);
    const Tensor base = oracle::random_tensor(rng, 6, 6, 3, -0.2f, 1.2f);
    const Tensor zero(6, 6, 3);
    const Tensor out = reconstruct(base, zero);
    const Tensor want = numerics::clamp01(base);
    for (std::size_t i = 0; i < out.size(); ++i)
        EXPECT_EQ(out.data()[i], want.data()[i]);
    EXPECT_EQ(reconstruct(Tensor(1, 1, 1, 0.8f), Tensor(1, 1, 1, 0.5f)).data()[0], 1.0f);
    EXPECT_THROW(reconstruct(base, Tensor(6, 6, 1)), Error);
}

TEST(Reconstruct, InvertsDecomposition)
{
    std::mt19937_64 rng(2);
    const Tensor img = oracle::random_tensor(rng, 40, 40, 3);
    const auto d = filters::decompose(img, {});
    const Tensor out = reconstruct(d.base, d.detail);
    for (std::size_t i = 0; i < img.size(); ++i)
        EXPECT_NEAR(out.data()[i], img.data()[i], 1e-6);
}

TEST(EnhanceBase, NeutralIsIdentity)
{
    EnhanceConfig cfg;
    cfg.gamma = 1.0;
    const Tensor t = neutral_ramp();
    EXPECT_NEAR(percentile(luminance(t), 1.0), 0.02, 1e-6);
    EXPECT_NEAR(percentile(luminance(t), 99.0), 0.98, 1e-6);
    const Tensor out = enhance_base(t, cfg);
    for (std::size_t i = 0; i < t.size(); ++i)
        EXPECT_NEAR(out.data()[i], t.data()[i], 1e-6);
}

TEST(EnhanceBase, ConstantSkipsStretch)
{
    EnhanceConfig cfg;
    const Tensor out = enhance_base(Tensor(5, 5, 3, 0.25f), cfg);
    for (float v : out.data())
        EXPECT_NEAR(v, std::pow(0.25, 0.8), 1e-6);
}

TEST(EnhanceBase, GammaHalfIsSquareRoot)
{
    EnhanceConfig cfg;
    cfg.gamma = 0.5;
    cfg.contrastStretch = false;
    EXPECT_NEAR(enhance_base(Tensor(1, 1, 1, 0.25f), cfg).data()[0], 0.5f, 1e-7);
}

TEST(EnhanceBase, MonotoneOnRamp)
{
    Tensor ramp(1, 64, 3);
    for (std::size_t x = 0; x < 64; ++x) {
        ramp(0, x, 0) = 0.9f * static_cast<float>(x) / 63.0f;
        ramp(0, x, 1) = 0.6f * static_cast<float>(x) / 63.0f;
        ramp(0, x, 2) = 0.3f * static_cast<float>(x) / 63.0f;
    }
    for (double g : {0.5, 0.8, 1.0, 1.7}) {
        EnhanceConfig cfg;
        cfg.gamma = g;
        const Tensor out = enhance_base(ramp, cfg);
        for (std::size_t x = 1; x < 64; ++x)
            for (std::size_t c = 0; c < 3; ++c)
                EXPECT_GE(out(0, x, c), out(0, x - 1, c));
    }
}

TEST(EnhanceConfig, Validates)
{
    EnhanceConfig cfg;
    cfg.gamma = 0.0;
    EXPECT_THROW(cfg.validate(), Error);
    cfg = {};
    cfg.gamma = 2.5;
    EXPECT_THROW(cfg.validate(), Error);
    cfg = {};
    cfg.detailBoost = 0.0;
    EXPECT_THROW(cfg.validate(), Error);
    EXPECT_EQ(parse_mode("post"), Mode::post);
    EXPECT_THROW(parse_mode("both"), Error);
}

TEST(ReconstructEnhanced, DegeneratesToPlainReconstruction)
{
    std::mt19937_64 rng(3);
    const Tensor base = neutral_ramp();
    const Tensor det = oracle::random_tensor(rng, 1, 101, 3, -0.3f, 0.3f);
    EnhanceConfig cfg;
    cfg.gamma = 1.0;
    cfg.detailBoost = 1.0;
    cfg.contrastStretch = false;
    cfg.mode = Mode::simultaneous;
    const Tensor a = reconstruct_enhanced(base, det, cfg);
    const Tensor b = reconstruct(base, det);
    for (std::size_t i = 0; i < a.size(); ++i)
        EXPECT_EQ(a.data()[i], b.data()[i]);
    // With the stretch on, the ramp is already at the targets.
    cfg.contrastStretch = true;
    const Tensor c = reconstruct_enhanced(base, det, cfg);
    for (std::size_t i = 0; i < a.size(); ++i)
        EXPECT_NEAR(c.data()[i], b.data()[i], 1e-6);
}

TEST(ReconstructEnhanced, ZeroDetailAndBoostLinearity)
{
    std::mt19937_64 rng(4);
    const Tensor base = oracle::random_tensor(rng, 30, 30, 3, 0.2f, 0.6f);
    EnhanceConfig cfg;
    cfg.mode = Mode::simultaneous;
    const Tensor eb = enhance_base(base, cfg);
    const Tensor z = reconstruct_enhanced(base, Tensor(30, 30, 3), cfg);
    for (std::size_t i = 0; i < z.size(); ++i)
        EXPECT_EQ(z.data()[i], eb.data()[i]);

    Tensor det(30, 30, 3);
    det(10, 10, 1) = 0.01f;
    cfg.detailBoost = 1.0;
    const float one = reconstruct_enhanced(base, det, cfg)(10, 10, 1) - eb(10, 10, 1);
    cfg.detailBoost = 2.0;
    const float two = reconstruct_enhanced(base, det, cfg)(10, 10, 1) - eb(10, 10, 1);
    EXPECT_NEAR(two, 2.0f * one, 1e-6);
}

TEST(ReconstructEnhanced, ModesStayInRange)
{
    std::mt19937_64 rng(5);
    const Tensor img = oracle::random_tensor(rng, 40, 40, 3);
    const auto d = filters::decompose(img, {});
    for (Mode m : {Mode::none, Mode::post, Mode::simultaneous}) {
        EnhanceConfig cfg;
        cfg.mode = m;
        const Tensor out = reconstruct_enhanced(d.base, d.detail, cfg);
        ASSERT_EQ(out.shape(), img.shape());
        for (float v : out.data()) {
            EXPECT_GE(v, 0.0f);
            EXPECT_LE(v, 1.0f);
        }
    }
}
