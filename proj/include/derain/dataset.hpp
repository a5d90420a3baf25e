#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "filters.hpp"
#include "image_io.hpp"
#include "network.hpp"
#include "numerics.hpp"
#include "rainsynth.hpp"
#include "version.hpp"

namespace derain::dataset {

namespace fs = std::filesystem;
using network::PatchPair;

struct ManifestEntry {
    std::string cleanPath;  ///< relative to the manifest root
    std::string rainyPath;  ///< relative to the manifest root
    std::size_t variantIndex = 0;
    rainsynth::RainParams params;
    std::string status = "ok";  ///< "ok" or "failed: <reason>"

    bool ok() const { return status == "ok"; }
    bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
    fs::path root;
    std::string createdWith;  ///< tool name and version
    std::uint64_t seed = 0;
    std::vector<ManifestEntry> entries;

    std::size_t failures() const
    {
        std::size_t n = 0;
        for (const auto& e : entries)
            n += e.ok() ? 0 : 1;
        return n;
    }
};

inline constexpr const char* kManifestMagic = "# derain-manifest v1";
inline constexpr const char* kManifestName = "manifest.tsv";

namespace detail {

inline std::string format_double(double v)
{
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

template <typename T>
T parse_number(const std::string& s, const std::string& context)
{
    T v{};
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw Error(context + ": bad number '" + s + "'");
    return v;
}

inline std::vector<std::string> split_tabs(const std::string& line)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t tab = line.find('\t', start);
        out.push_back(line.substr(start, tab - start));
        if (tab == std::string::npos)
            return out;
        start = tab + 1;
    }
}

} // namespace detail

/// Tab-separated manifest: a magic line, "# key<TAB>value" header lines, a
/// column header, then one record per rainy image.
inline std::string format_manifest(const DatasetManifest& m)
{
    std::ostringstream os;
    os << kManifestMagic << "\n";
    os << "# created_with\t" << m.createdWith << "\n";
    os << "# seed\t" << m.seed << "\n";
    os << "clean\trainy\tvariant\tangle_deg\tlength_px\tdensity\tintensity\tseed\tstatus\n";
    for (const auto& e : m.entries)
        os << e.cleanPath << '\t' << e.rainyPath << '\t' << e.variantIndex << '\t'
           << detail::format_double(e.params.angleDeg) << '\t' << e.params.lengthPx << '\t'
           << detail::format_double(e.params.density) << '\t'
           << detail::format_double(e.params.intensity) << '\t' << e.params.seed << '\t'
           << e.status << '\n';
    return os.str();
}

inline DatasetManifest parse_manifest(const std::string& text, const fs::path& root)
{
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kManifestMagic)
        throw Error("manifest: missing '" + std::string(kManifestMagic) + "' header");
    DatasetManifest m;
    m.root = root;
    bool sawColumns = false;
    std::size_t lineNo = 1;
    while (std::getline(in, line)) {
        ++lineNo;
        const std::string where = "manifest line " + std::to_string(lineNo);
        if (line.empty())
            continue;
        if (line.rfind("# ", 0) == 0) {
            const auto f = detail::split_tabs(line.substr(2));
            if (f.size() == 2 && f[0] == "created_with")
                m.createdWith = f[1];
            else if (f.size() == 2 && f[0] == "seed")
                m.seed = detail::parse_number<std::uint64_t>(f[1], where);
            continue;
        }
        if (!sawColumns) {
            sawColumns = true;
            continue;
        }
        const auto f = detail::split_tabs(line);
        if (f.size() != 9)
            throw Error(where + ": expected 9 fields, got " + std::to_string(f.size()));
        ManifestEntry e;
        e.cleanPath = f[0];
        e.rainyPath = f[1];
        e.variantIndex = detail::parse_number<std::size_t>(f[2], where);
        e.params.angleDeg = detail::parse_number<double>(f[3], where);
        e.params.lengthPx = detail::parse_number<std::size_t>(f[4], where);
        e.params.density = detail::parse_number<double>(f[5], where);
        e.params.intensity = detail::parse_number<double>(f[6], where);
        e.params.seed = detail::parse_number<std::uint64_t>(f[7], where);
        e.status = f[8];
        m.entries.push_back(std::move(e));
    }
    return m;
}

inline void write_manifest(const DatasetManifest& m)
{
    const fs::path path = m.root / kManifestName;
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw Error("cannot write manifest " + path.string());
    out << format_manifest(m);
}

/// Reads `<dir>/manifest.tsv`; `dir` may also name the manifest file itself.
inline DatasetManifest read_manifest(const fs::path& dir)
{
    const fs::path path = fs::is_directory(dir) ? dir / kManifestName : dir;
    std::ifstream in(path);
    if (!in)
        throw Error("cannot read manifest " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_manifest(ss.str(), path.parent_path());
}

/// Rain seed for one (image, variant) cell of a dataset.
inline std::uint64_t cell_seed(std::uint64_t datasetSeed, std::size_t imageIndex,
                               std::uint64_t variantSeed)
{
    using rainsynth::mix64;
    return mix64(mix64(datasetSeed) ^ mix64(0x1000 + imageIndex) ^ variantSeed);
}

/// Renders every variant for every clean image in `cleanDir`. Clean images
/// are copied to `outDir/clean` as RGB PNG, rainy ones go to `outDir/rainy`,
/// and the manifest to `outDir/manifest.tsv`. Per-file failures are recorded in
/// the manifest and do not stop the run.
inline DatasetManifest synthesize_dataset(const fs::path& cleanDir, const fs::path& outDir,
                                          const std::vector<rainsynth::RainParams>& variants,
                                          std::uint64_t seed, std::size_t threads = 1)
{
    const auto sources = io::list_images(cleanDir);
    if (sources.empty())
        throw Error("no .png/.ppm images in " + cleanDir.string());
    if (variants.empty())
        throw Error("synthesize_dataset: no rain variants");
    fs::create_directories(outDir / "clean");
    fs::create_directories(outDir / "rainy");

    DatasetManifest m;
    m.root = outDir;
    m.createdWith = std::string("derainnet ") + kVersion;
    m.seed = seed;
    m.entries.resize(sources.size() * variants.size());

    const auto work = [&](std::size_t i) {
        const std::string stem = sources[i].stem().string();
        const std::string cleanRel = "clean/" + stem + ".png";
        for (std::size_t v = 0; v < variants.size(); ++v) {
            ManifestEntry& e = m.entries[i * variants.size() + v];
            e.cleanPath = cleanRel;
            char name[32];
            std::snprintf(name, sizeof name, "_v%02zu.png", v);
            e.rainyPath = "rainy/" + stem + name;
            e.variantIndex = v;
            e.params = variants[v];
            e.params.seed = cell_seed(seed, i, variants[v].seed);
        }
        try {
            const Tensor clean = io::to_rgb(io::load_image(sources[i]));
            io::save_image(outDir / cleanRel, clean);
            for (std::size_t v = 0; v < variants.size(); ++v) {
                ManifestEntry& e = m.entries[i * variants.size() + v];
                try {
                    const Tensor rain =
                        rainsynth::render_rain_layer(clean.height(), clean.width(), e.params);
                    io::save_image(outDir / e.rainyPath, rainsynth::composite(clean, rain));
                } catch (const std::exception& ex) {
                    e.status = std::string("failed: ") + ex.what();
                }
            }
        } catch (const std::exception& ex) {
            for (std::size_t v = 0; v < variants.size(); ++v)
                m.entries[i * variants.size() + v].status = std::string("failed: ") + ex.what();
        }
    };

    const std::size_t workers = std::clamp<std::size_t>(threads, 1, sources.size());
    if (workers == 1) {
        for (std::size_t i = 0; i < sources.size(); ++i)
            work(i);
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (std::size_t i = w; i < sources.size(); i += workers)
                    work(i);
            });
    }
    for (auto& e : m.entries)
        for (char& c : e.status)
            if (c == '\t' || c == '\n')
                c = ' ';
    write_manifest(m);
    return m;
}

struct SamplerConfig {
    std::size_t patchSize = 64;
    std::size_t outputSize = 42;
    filters::GuidedFilterConfig filter;
    network::Domain domain = network::Domain::detail;
    std::size_t cacheCapacity = 0;  ///< decomposed images kept in memory; 0 = unbounded

    std::size_t margin() const { return (patchSize - outputSize) / 2; }
};

/// One random draw: a manifest entry and a patch origin in unit coordinates,
/// mapped to pixels once the image size is known.
struct PatchLocation {
    std::size_t entry = 0;
    double uy = 0.0, ux = 0.0;
};

/// Builds patch pairs from a manifest, decomposing each image at most once
/// while it stays in the cache.
class PatchSampler {
public:
    PatchSampler(DatasetManifest manifest, SamplerConfig cfg)
        : manifest_(std::move(manifest)), cfg_(cfg)
    {
        cfg_.filter.validate();
        if (cfg_.outputSize == 0 || cfg_.outputSize > cfg_.patchSize ||
            (cfg_.patchSize - cfg_.outputSize) % 2 != 0)
            throw Error("sampler: output size " + std::to_string(cfg_.outputSize) +
                        " is not a centered crop of patch size " + std::to_string(cfg_.patchSize));
        for (std::size_t i = 0; i < manifest_.entries.size(); ++i)
            if (manifest_.entries[i].ok())
                usable_.push_back(i);
        if (usable_.empty())
            throw Error("sampler: manifest has no usable entries");
        for (std::size_t i : usable_) {
            const auto& e = manifest_.entries[i];
            const auto [h, w] = io::image_dimensions(manifest_.root / e.rainyPath);
            if (h < cfg_.patchSize || w < cfg_.patchSize)
                throw Error("sampler: patch size " + std::to_string(cfg_.patchSize) +
                            " exceeds image " + e.rainyPath + " (" + std::to_string(h) + "x" +
                            std::to_string(w) + ")");
        }
    }

    const DatasetManifest& manifest() const { return manifest_; }
    const SamplerConfig& config() const { return cfg_; }

    /// Uniform draws with replacement over usable entries and positions.
    std::vector<PatchLocation> draw_locations(std::size_t count, std::uint64_t seed) const
    {
        std::mt19937_64 rng(seed);
        std::uniform_int_distribution<std::size_t> pick(0, usable_.size() - 1);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::vector<PatchLocation> out(count);
        for (auto& loc : out) {
            loc.entry = usable_[pick(rng)];
            loc.uy = unit(rng);
            loc.ux = unit(rng);
        }
        return out;
    }

    PatchPair make_pair(const PatchLocation& loc) const
    {
        const auto& e = manifest_.entries.at(loc.entry);
        const auto rainy = layer(e.rainyPath);
        const auto clean = layer(e.cleanPath);
        if (rainy->shape() != clean->shape())
            throw Error("sampler: " + e.rainyPath + " and " + e.cleanPath + " differ in size");
        const std::size_t P = cfg_.patchSize;
        const auto offset = [P](double u, std::size_t extent) {
            const std::size_t span = extent - P + 1;
            return std::min(span - 1, static_cast<std::size_t>(u * static_cast<double>(span)));
        };
        const std::size_t y = offset(loc.uy, rainy->height()), x = offset(loc.ux, rainy->width());
        const std::size_t m = cfg_.margin();
        return {numerics::crop(*rainy, y, x, P, P),
                numerics::crop(*clean, y + m, x + m, cfg_.outputSize, cfg_.outputSize)};
    }

    /// The training-domain layer of one image: its detail layer, or the image
    /// itself in image-domain mode. Cached.
    std::shared_ptr<const Tensor> layer(const std::string& relPath) const
    {
        {
            std::lock_guard lock(mutex_);
            if (auto it = cache_.find(relPath); it != cache_.end())
                return it->second;
        }
        auto value = std::make_shared<const Tensor>(compute_layer(relPath));
        std::lock_guard lock(mutex_);
        if (cfg_.cacheCapacity > 0 && cache_.size() >= cfg_.cacheCapacity) {
            cache_.erase(insertion_.front());
            insertion_.erase(insertion_.begin());
        }
        if (cache_.emplace(relPath, value).second)
            insertion_.push_back(relPath);
        return value;
    }

    /// Uncached computation of layer().
    Tensor compute_layer(const std::string& relPath) const
    {
        const Tensor img = io::to_rgb(io::load_image(manifest_.root / relPath));
        if (cfg_.domain == network::Domain::image)
            return img;
        return filters::decompose(img, cfg_.filter).detail;
    }

private:
    DatasetManifest manifest_;
    SamplerConfig cfg_;
    std::vector<std::size_t> usable_;
    mutable std::mutex mutex_;
    mutable std::map<std::string, std::shared_ptr<const Tensor>> cache_;
    mutable std::vector<std::string> insertion_;
};

/// Sequential deterministic stream of `count` patch pairs.
class PatchStream {
public:
    PatchStream(std::shared_ptr<const PatchSampler> sampler, std::size_t count, std::uint64_t seed)
        : sampler_(std::move(sampler)), locations_(sampler_->draw_locations(count, seed))
    {
    }

    std::optional<PatchPair> next()
    {
        if (cursor_ >= locations_.size())
            return std::nullopt;
        return sampler_->make_pair(locations_[cursor_++]);
    }

    std::size_t size() const { return locations_.size(); }

private:
    std::shared_ptr<const PatchSampler> sampler_;
    std::vector<PatchLocation> locations_;
    std::size_t cursor_ = 0;
};

inline PatchStream sample_patches(const DatasetManifest& manifest, std::size_t count,
                                  std::size_t patchSize, std::size_t outputSize,
                                  const filters::GuidedFilterConfig& filterCfg, std::uint64_t seed,
                                  network::Domain domain = network::Domain::detail)
{
    SamplerConfig cfg;
    cfg.patchSize = patchSize;
    cfg.outputSize = outputSize;
    cfg.filter = filterCfg;
    cfg.domain = domain;
    return PatchStream(std::make_shared<const PatchSampler>(manifest, cfg), count, seed);
}

/// A fixed pool of drawn locations exposed to the trainer; pairs are cropped
/// on demand from the sampler's cache.
class SampledPairSource : public network::PairSource {
public:
    SampledPairSource(std::shared_ptr<const PatchSampler> sampler, std::size_t count,
                      std::uint64_t seed)
        : sampler_(std::move(sampler)), locations_(sampler_->draw_locations(count, seed))
    {
    }

    std::size_t size() const override { return locations_.size(); }
    PatchPair at(std::size_t index) const override
    {
        return sampler_->make_pair(locations_.at(index));
    }

private:
    std::shared_ptr<const PatchSampler> sampler_;
    std::vector<PatchLocation> locations_;
};

} // namespace derain::dataset
