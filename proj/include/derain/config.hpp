#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "enhance.hpp"
#include "filters.hpp"
#include "metrics.hpp"
#include "network.hpp"

namespace derain::config {

/// Every tunable of the command-line tool. Defaults follow the reference
/// network (16-1-8 kernels, 512 wide, learning rate 0.01, 64px patches).
struct CliConfig {
    filters::GuidedFilterConfig filter;
    network::Architecture arch;
    network::TrainConfig train;
    enhance::EnhanceConfig enhance;
    metrics::SsimConfig ssim;
    std::size_t patches = 100000;  ///< size of the drawn training-patch pool
    std::size_t variants = 14;     ///< rain variants per clean image
    std::uint64_t seed = 1;        ///< dataset synthesis seed
    std::size_t threads = 1;

    /// Applies one `key = value` setting; unknown keys and bad values throw.
    void set(const std::string& key, const std::string& value);

    /// All keys with their current values, one `key = value` per line.
    std::string resolved() const;

    static const std::vector<std::string>& keys();
};

namespace detail {

inline std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_value(const std::string& key, const std::string& value)
{
    T v{};
    const auto r = std::from_chars(value.data(), value.data() + value.size(), v);
    if (r.ec != std::errc() || r.ptr != value.data() + value.size())
        throw Error("config key '" + key + "': cannot parse '" + value + "'");
    return v;
}

inline bool parse_bool(const std::string& key, const std::string& value)
{
    if (value == "true" || value == "1" || value == "yes")
        return true;
    if (value == "false" || value == "0" || value == "no")
        return false;
    throw Error("config key '" + key + "': expected true/false, got '" + value + "'");
}

inline std::string show(double v)
{
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

struct Field {
    std::string key;
    std::function<void(CliConfig&, const std::string&)> set;
    std::function<std::string(const CliConfig&)> get;
};

template <typename T, typename Member>
Field number(std::string key, Member member)
{
    return {key,
            [key, member](CliConfig& c, const std::string& v) {
                std::invoke(member, c) = parse_value<T>(key, v);
            },
            [member](const CliConfig& c) {
                if constexpr (std::is_floating_point_v<T>)
                    return show(std::invoke(member, c));
                else
                    return std::to_string(std::invoke(member, c));
            }};
}

inline const std::vector<Field>& fields()
{
    using C = CliConfig;
    static const std::vector<Field> table = {
        number<std::size_t>("filter.radius", [](auto& c) -> auto& { return c.filter.radius; }),
        number<double>("filter.epsilon", [](auto& c) -> auto& { return c.filter.epsilon; }),
        number<std::size_t>("net.s1", [](auto& c) -> auto& { return c.arch.s1; }),
        number<std::size_t>("net.s2", [](auto& c) -> auto& { return c.arch.s2; }),
        number<std::size_t>("net.s3", [](auto& c) -> auto& { return c.arch.s3; }),
        number<std::size_t>("net.n1", [](auto& c) -> auto& { return c.arch.n1; }),
        number<std::size_t>("net.n2", [](auto& c) -> auto& { return c.arch.n2; }),
        number<double>("train.learning_rate", [](auto& c) -> auto& { return c.train.learningRate; }),
        number<std::size_t>("train.batch_size", [](auto& c) -> auto& { return c.train.batchSize; }),
        number<std::size_t>("train.steps", [](auto& c) -> auto& { return c.train.steps; }),
        number<std::size_t>("train.patch_size", [](auto& c) -> auto& { return c.train.patchSize; }),
        number<std::uint64_t>("train.seed", [](auto& c) -> auto& { return c.train.rngSeed; }),
        {"train.domain",
         [](C& c, const std::string& v) {
             if (v == "detail")
                 c.train.domainMode = network::Domain::detail;
             else if (v == "image")
                 c.train.domainMode = network::Domain::image;
             else
                 throw Error("config key 'train.domain': expected detail|image, got '" + v + "'");
         },
         [](const C& c) {
             return std::string(c.train.domainMode == network::Domain::image ? "image" : "detail");
         }},
        number<std::size_t>("train.log_every", [](auto& c) -> auto& { return c.train.logEvery; }),
        number<std::size_t>("train.checkpoint_every",
                            [](auto& c) -> auto& { return c.train.checkpointEvery; }),
        number<std::size_t>("train.patches", [](auto& c) -> auto& { return c.patches; }),
        number<double>("enhance.gamma", [](auto& c) -> auto& { return c.enhance.gamma; }),
        number<double>("enhance.detail_boost", [](auto& c) -> auto& { return c.enhance.detailBoost; }),
        {"enhance.stretch",
         [](C& c, const std::string& v) { c.enhance.contrastStretch = parse_bool("enhance.stretch", v); },
         [](const C& c) { return std::string(c.enhance.contrastStretch ? "true" : "false"); }},
        {"enhance.mode", [](C& c, const std::string& v) { c.enhance.mode = enhance::parse_mode(v); },
         [](const C& c) { return std::string(enhance::to_string(c.enhance.mode)); }},
        number<std::size_t>("ssim.window", [](auto& c) -> auto& { return c.ssim.windowSide; }),
        number<double>("ssim.sigma", [](auto& c) -> auto& { return c.ssim.windowSigma; }),
        number<double>("ssim.k1", [](auto& c) -> auto& { return c.ssim.k1; }),
        number<double>("ssim.k2", [](auto& c) -> auto& { return c.ssim.k2; }),
        number<std::size_t>("synth.variants", [](auto& c) -> auto& { return c.variants; }),
        number<std::uint64_t>("synth.seed", [](auto& c) -> auto& { return c.seed; }),
        number<std::size_t>("threads", [](auto& c) -> auto& { return c.threads; }),
    };
    return table;
}

} // namespace detail

inline const std::vector<std::string>& CliConfig::keys()
{
    static const std::vector<std::string> k = [] {
        std::vector<std::string> out;
        for (const auto& f : detail::fields())
            out.push_back(f.key);
        return out;
    }();
    return k;
}

inline void CliConfig::set(const std::string& key, const std::string& value)
{
    for (const auto& f : detail::fields())
        if (f.key == key) {
            f.set(*this, value);
            return;
        }
    throw Error("unknown config key '" + key + "'");
}

inline std::string CliConfig::resolved() const
{
    std::string out;
    for (const auto& f : detail::fields())
        out += f.key + " = " + f.get(*this) + "\n";
    return out;
}

/// Applies `key = value` lines; `#` starts a comment, blank lines are skipped.
inline void apply_text(CliConfig& cfg, const std::string& text, const std::string& origin)
{
    std::istringstream in(text);
    std::string line;
    std::size_t lineNo = 0;
    while (std::getline(in, line)) {
        ++lineNo;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        line = detail::trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(origin + ":" + std::to_string(lineNo) + ": expected 'key = value'");
        try {
            cfg.set(detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
        } catch (const Error& e) {
            throw Error(origin + ":" + std::to_string(lineNo) + ": " + e.what());
        }
    }
}

inline void apply_file(CliConfig& cfg, const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error("cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    apply_text(cfg, ss.str(), path.string());
}

/// Applies one `key=value` override from the command line.
inline void apply_override(CliConfig& cfg, const std::string& assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw Error("override '" + assignment + "' is not key=value");
    cfg.set(detail::trim(assignment.substr(0, eq)), detail::trim(assignment.substr(eq + 1)));
}

} // namespace derain::config
