#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "derain/dataset.hpp"
#include "oracles.hpp"

using namespace derain;
using namespace derain::dataset;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("derain_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Two clean tiles copied from the bundled set.
fs::path two_clean_images(const std::string& name)
{
    const fs::path dir = fresh_dir(name);
    const auto all = io::list_images(DERAIN_DATA_DIR "/clean");
    for (std::size_t i = 0; i < 2; ++i)
        fs::copy_file(all[i], dir / all[i].filename());
    return dir;
}

} // namespace

TEST(ImageIo, ByteRounding)
{
    EXPECT_EQ(io::to_byte(1.0f), 255);
    EXPECT_EQ(io::to_byte(0.5f), 128);
    EXPECT_EQ(io::to_byte(0.0f), 0);
    EXPECT_EQ(io::to_byte(-0.3f), 0);
    EXPECT_EQ(io::to_byte(1.4f), 255);
}

TEST(ImageIo, RoundTripPngAndPpm)
{
    const fs::path dir = fresh_dir("io");
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> byte(0, 255);
    Tensor grid(7, 9, 3);
    for (float& v : grid.data())
        v = static_cast<float>(byte(rng)) / 255.0f;
    for (const char* name : {"a.png", "a.ppm", "A.PNG"}) {
        io::save_image(dir / name, grid);
        const Tensor back = io::load_image(dir / name);
        ASSERT_EQ(back.shape(), grid.shape());
        for (std::size_t i = 0; i < grid.size(); ++i)
            EXPECT_EQ(back.data()[i], grid.data()[i]) << name;
    }
    const Tensor any = oracle::random_tensor(rng, 5, 5, 3);
    io::save_image(dir / "b.png", any);
    const Tensor back = io::load_image(dir / "b.png");
    for (std::size_t i = 0; i < any.size(); ++i)
        EXPECT_LE(std::abs(back.data()[i] - any.data()[i]), 1.0f / 510.0f + 1e-7f);

    Tensor gray(4, 6, 1, 0.2f);
    io::save_image(dir / "g.png", gray);
    EXPECT_EQ(io::load_image(dir / "g.png").channels(), 1u);
    EXPECT_EQ(io::to_rgb(io::load_image(dir / "g.png")).channels(), 3u);
    EXPECT_EQ(io::image_dimensions(dir / "a.ppm"), (std::pair<std::size_t, std::size_t>{7, 9}));
    const auto listed = io::list_images(dir);
    EXPECT_EQ(listed.size(), 5u);
    EXPECT_TRUE(std::is_sorted(listed.begin(), listed.end()));
}

TEST(ImageIo, RejectsBadFiles)
{
    const fs::path dir = fresh_dir("iobad");
    std::ofstream(dir / "junk.png") << "not a png";
    std::ofstream(dir / "junk.ppm") << "P3\n1 1\n255\n0 0 0\n";
    EXPECT_THROW(io::load_image(dir / "junk.png"), Error);
    EXPECT_THROW(io::load_image(dir / "junk.ppm"), Error);
    EXPECT_THROW(io::load_image(dir / "missing.png"), Error);
    EXPECT_THROW(io::load_image(dir / "x.bmp"), Error);
    EXPECT_THROW(io::save_image(dir / "x.ppm", Tensor(2, 2, 1)), Error);
    try {
        io::load_image(dir / "junk.png");
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("junk.png"), std::string::npos);
    }
}

TEST(Manifest, TextRoundTrip)
{
    DatasetManifest m;
    m.root = "/data/x";
    m.createdWith = "derainnet 1.0.0";
    m.seed = 99;
    ManifestEntry e;
    e.cleanPath = "clean/a.png";
    e.rainyPath = "rainy/a_v03.png";
    e.variantIndex = 3;
    e.params = rainsynth::default_variants()[3];
    m.entries.push_back(e);
    e.status = "failed: disk full";
    m.entries.push_back(e);
    const auto back = parse_manifest(format_manifest(m), m.root);
    EXPECT_EQ(back.seed, 99u);
    EXPECT_EQ(back.createdWith, m.createdWith);
    EXPECT_EQ(back.entries, m.entries);
    EXPECT_EQ(back.failures(), 1u);
    EXPECT_THROW(parse_manifest("garbage\n", "/"), Error);
}

TEST(Synthesize, CountsAndDeterminism)
{
    const fs::path clean = two_clean_images("synth_src");
    const fs::path a = fresh_dir("synth_a"), b = fresh_dir("synth_b");
    const auto ma = synthesize_dataset(clean, a, rainsynth::default_variants(), 5);
    const auto mb = synthesize_dataset(clean, b, rainsynth::default_variants(), 5, 2);
    ASSERT_EQ(ma.entries.size(), 28u);
    EXPECT_EQ(ma.failures(), 0u);
    EXPECT_EQ(ma.entries, mb.entries);
    std::size_t files = 0;
    for (const auto& p : fs::directory_iterator(a / "rainy")) {
        EXPECT_EQ(slurp(p.path()), slurp(b / "rainy" / p.path().filename()));
        ++files;
    }
    EXPECT_EQ(files, 28u);
    EXPECT_EQ(slurp(a / kManifestName), slurp(b / kManifestName));
    const auto read = read_manifest(a);
    EXPECT_EQ(read.entries, ma.entries);
    for (const auto& e : read.entries)
        EXPECT_EQ(io::image_dimensions(a / e.cleanPath), io::image_dimensions(a / e.rainyPath));

    const fs::path c = fresh_dir("synth_c");
    synthesize_dataset(clean, c, rainsynth::default_variants(), 6);
    EXPECT_NE(slurp(a / "rainy" / read.entries[0].rainyPath.substr(6)),
              slurp(c / "rainy" / read.entries[0].rainyPath.substr(6)));
}

TEST(Synthesize, MarksFailuresAndContinues)
{
    const fs::path clean = fresh_dir("synth_fail_src");
    io::save_image(clean / "big.png", Tensor(40, 40, 3, 0.5f));
    io::save_image(clean / "tiny.png", Tensor(10, 10, 3, 0.5f));  // shorter than the streaks
    std::ofstream(clean / "zbroken.png") << "nope";
    const fs::path out = fresh_dir("synth_fail_out");
    const auto m = synthesize_dataset(clean, out, rainsynth::default_variants(), 1);
    ASSERT_EQ(m.entries.size(), 42u);
    EXPECT_EQ(m.failures(), 28u);
    for (std::size_t i = 0; i < 14; ++i)
        EXPECT_TRUE(m.entries[i].ok());
    EXPECT_EQ(m.entries[14].status.rfind("failed: ", 0), 0u);
    EXPECT_EQ(read_manifest(out).failures(), 28u);
    EXPECT_THROW(synthesize_dataset(fresh_dir("synth_empty"), out, rainsynth::default_variants(), 1),
                 Error);
}

TEST(Sampler, ShapesCropsAndDeterminism)
{
    const fs::path clean = two_clean_images("samp_src");
    const fs::path out = fresh_dir("samp_out");
    const auto m = synthesize_dataset(clean, out, rainsynth::default_variants(), 3);
    SamplerConfig cfg;
    cfg.patchSize = 32;
    cfg.outputSize = 22;
    const auto sampler = std::make_shared<const PatchSampler>(m, cfg);

    EXPECT_FALSE(sample_patches(m, 0, 32, 22, {}, 1).next().has_value());
    PatchStream s1(sampler, 25, 4), s2(sampler, 25, 4);
    const auto locs = sampler->draw_locations(25, 4);
    for (std::size_t i = 0; i < 25; ++i) {
        const auto a = s1.next(), b = s2.next();
        ASSERT_TRUE(a && b);
        ASSERT_EQ(a->input.shape(), (Shape{32, 32, 3}));
        ASSERT_EQ(a->target.shape(), (Shape{22, 22, 3}));
        EXPECT_TRUE(a->input == b->input);
        EXPECT_TRUE(a->target == b->target);

        // Target is the centered crop of the clean detail layer.
        const auto& e = m.entries[locs[i].entry];
        const Tensor cleanDetail = sampler->compute_layer(e.cleanPath);
        const Tensor rainyDetail = sampler->compute_layer(e.rainyPath);
        bool matched = false;
        for (std::size_t y = 0; y + 32 <= 128 && !matched; ++y)
            for (std::size_t x = 0; x + 32 <= 128 && !matched; ++x)
                if (numerics::crop(rainyDetail, y, x, 32, 32) == a->input) {
                    matched = true;
                    EXPECT_TRUE(numerics::crop(cleanDetail, y + 5, x + 5, 22, 22) == a->target);
                }
        EXPECT_TRUE(matched);
    }
    EXPECT_FALSE(s1.next().has_value());
}

TEST(Sampler, CacheMatchesUncached)
{
    const fs::path clean = two_clean_images("cache_src");
    const fs::path out = fresh_dir("cache_out");
    const auto m = synthesize_dataset(clean, out, {rainsynth::default_variants()[1]}, 3);
    SamplerConfig cfg;
    cfg.patchSize = 32;
    cfg.outputSize = 22;
    cfg.cacheCapacity = 1;
    const PatchSampler sampler(m, cfg);
    for (int round = 0; round < 2; ++round)
        for (const auto& e : m.entries) {
            EXPECT_TRUE(*sampler.layer(e.rainyPath) == sampler.compute_layer(e.rainyPath));
            EXPECT_TRUE(*sampler.layer(e.cleanPath) ==
                        filters::decompose(io::load_image(out / e.cleanPath), cfg.filter).detail);
        }
}

TEST(Sampler, ZeroRainControl)
{
    const fs::path clean = two_clean_images("zero_src");
    const fs::path out = fresh_dir("zero_out");
    auto v = rainsynth::default_variants()[0];
    v.intensity = 1e-9;
    const auto m = synthesize_dataset(clean, out, {v}, 1);
    SamplerConfig cfg;
    cfg.patchSize = 40;
    cfg.outputSize = 30;
    const PatchSampler sampler(m, cfg);
    for (const auto& loc : sampler.draw_locations(20, 9)) {
        const auto pair = sampler.make_pair(loc);
        EXPECT_TRUE(numerics::crop(pair.input, 5, 5, 30, 30) == pair.target);
    }
}

TEST(Sampler, RejectsBadConfig)
{
    const fs::path clean = two_clean_images("bad_src");
    const fs::path out = fresh_dir("bad_out");
    const auto m = synthesize_dataset(clean, out, {rainsynth::default_variants()[0]}, 1);
    SamplerConfig cfg;
    cfg.patchSize = 200;
    cfg.outputSize = 178;
    EXPECT_THROW(PatchSampler(m, cfg), Error);
    cfg.patchSize = 32;
    cfg.outputSize = 21;
    EXPECT_THROW(PatchSampler(m, cfg), Error);
}
