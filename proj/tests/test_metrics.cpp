#include <gtest/gtest.h>

#include <random>

#include "derain/bench.hpp"
#include "derain/metrics.hpp"
#include "oracles.hpp"

using namespace derain;
using namespace derain::metrics;

TEST(Ssim, SelfIsOne)
{
    std::mt19937_64 rng(1);
    for (int i = 0; i < 5; ++i) {
        const Tensor x = oracle::random_tensor(rng, 20 + i, 17 + 2 * i, i % 2 ? 3 : 1);
        EXPECT_NEAR(ssim(x, x), 1.0, 1e-9);
    }
}

TEST(Ssim, InvertedBinaryIsNegative)
{
    std::mt19937_64 rng(2);
    std::bernoulli_distribution coin(0.5);
    Tensor x(24, 24, 1), y(24, 24, 1);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x.data()[i] = coin(rng) ? 1.0f : 0.0f;
        y.data()[i] = 1.0f - x.data()[i];
    }
    EXPECT_LT(ssim(x, y), 0.0);
}

TEST(Ssim, MatchesOracle)
{
    std::mt19937_64 rng(3);
    for (int i = 0; i < 10; ++i) {
        const Tensor a = oracle::random_tensor(rng, 32, 32, 3);
        Tensor b = a;
        std::normal_distribution<float> noise(0.0f, 0.1f * static_cast<float>(i));
        for (float& v : b.data())
            v = std::clamp(v + noise(rng), 0.0f, 1.0f);
        EXPECT_NEAR(ssim(a, b), oracle::ssim(a, b), 1e-5);
    }
}

TEST(Ssim, Symmetric)
{
    std::mt19937_64 rng(4);
    const Tensor a = oracle::random_tensor(rng, 30, 25, 3);
    const Tensor b = oracle::random_tensor(rng, 30, 25, 3);
    EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-9);
}

TEST(Ssim, Rejects)
{
    EXPECT_THROW(ssim(Tensor(20, 20, 3), Tensor(20, 21, 3)), Error);
    EXPECT_THROW(ssim(Tensor(8, 20, 1), Tensor(8, 20, 1)), Error);
    SsimConfig even;
    even.windowSide = 10;
    EXPECT_THROW(ssim(Tensor(20, 20, 1), Tensor(20, 20, 1), even), Error);
}

TEST(Sparsity, Trivial)
{
    EXPECT_EQ(sparsity_profile(Tensor(4, 4, 1), 0.05), 1.0);
    EXPECT_EQ(sparsity_profile(Tensor(4, 4, 1, 1.0f), 0.05), 0.0);
    EXPECT_EQ(sparsity_profile(Tensor(4, 4, 1, 1.0f), 0.05, 1.0), 1.0);
    EXPECT_THROW(sparsity_profile(Tensor(1, 1, 1), 0.0), Error);
}

TEST(Bench, OneRowPerSize)
{
    EXPECT_EQ(default_bench_sizes(), (std::vector<std::size_t>{250, 500, 750}));
    const auto params = network::init_params({3, 1, 3, 4, 4}, 1);
    const auto rows = bench_inference(params, {40, 60});
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0].side, 40u);
    EXPECT_EQ(rows[0].runs.size(), 3u);
    EXPECT_GT(rows[1].seconds, 0.0);
    EXPECT_NE(format_bench_csv(rows).find("60"), std::string::npos);
}
