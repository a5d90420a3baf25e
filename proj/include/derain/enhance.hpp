#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "filters.hpp"
#include "numerics.hpp"
#include "tensor.hpp"

namespace derain::enhance {

enum class Mode { none, post, simultaneous };

inline Mode parse_mode(const std::string& s)
{
    if (s == "none")
        return Mode::none;
    if (s == "post")
        return Mode::post;
    if (s == "simultaneous")
        return Mode::simultaneous;
    throw Error("unknown enhancement mode '" + s + "' (expected none|post|simultaneous)");
}

inline const char* to_string(Mode m)
{
    switch (m) {
    case Mode::none: return "none";
    case Mode::post: return "post";
    case Mode::simultaneous: return "simultaneous";
    }
    return "?";
}

struct EnhanceConfig {
    double gamma = 0.8;
    double detailBoost = 2.0;
    bool contrastStretch = true;  ///< percentile stretch after the gamma curve
    double lowPercentile = 1.0, highPercentile = 99.0;
    double lowTarget = 0.02, highTarget = 0.98;
    Mode mode = Mode::none;

    void validate() const
    {
        if (!(gamma > 0.0 && gamma <= 2.0))
            throw Error("enhance gamma must lie in (0, 2]");
        if (!(detailBoost > 0.0))
            throw Error("enhance detail boost must be > 0");
        if (!(lowPercentile >= 0.0 && lowPercentile < highPercentile && highPercentile <= 100.0))
            throw Error("enhance percentiles must satisfy 0 <= low < high <= 100");
    }
};

/// Rec.601 luma for 3-channel tensors; single-channel tensors pass through.
inline std::vector<double> luminance(const Tensor& t)
{
    std::vector<double> out(t.height() * t.width());
    for (std::size_t y = 0; y < t.height(); ++y)
        for (std::size_t x = 0; x < t.width(); ++x)
            out[y * t.width() + x] = t.channels() >= 3 ? 0.299 * t(y, x, 0) + 0.587 * t(y, x, 1) +
                                                             0.114 * t(y, x, 2)
                                                       : t(y, x, 0);
    return out;
}

/// Linear-interpolated percentile (q in [0, 100]) of unsorted values.
inline double percentile(std::vector<double> values, double q)
{
    if (values.empty())
        throw Error("percentile of empty set");
    std::sort(values.begin(), values.end());
    const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

namespace detail {

/// Gamma curve plus luminance-percentile stretch, without the final clamp.
inline Tensor enhance_base_unclamped(const Tensor& base, const EnhanceConfig& cfg)
{
    cfg.validate();
    Tensor out = base;
    if (cfg.gamma != 1.0)
        for (float& v : out.data())
            v = static_cast<float>(std::pow(std::max(0.0, static_cast<double>(v)), cfg.gamma));
    if (!cfg.contrastStretch)
        return out;
    const std::vector<double> luma = luminance(out);
    const double lo = percentile(luma, cfg.lowPercentile);
    const double hi = percentile(luma, cfg.highPercentile);
    if (!(hi > lo))
        return out;
    const double gain = (cfg.highTarget - cfg.lowTarget) / (hi - lo);
    for (float& v : out.data())
        v = static_cast<float>(cfg.lowTarget + (v - lo) * gain);
    return out;
}

} // namespace detail

/// Monotone base-layer remap: per-channel gamma, then one affine stretch taking
/// the luminance percentiles to the configured targets, clamped to [0, 1].
/// A degenerate image (equal percentiles) gets the gamma curve only.
inline Tensor enhance_base(const Tensor& base, const EnhanceConfig& cfg)
{
    return numerics::clamp01(detail::enhance_base_unclamped(base, cfg));
}

/// base + derained detail, clamped.
inline Tensor reconstruct(const Tensor& base, const Tensor& derainedDetail)
{
    require_same_shape(base, derainedDetail, "reconstruct");
    return numerics::clamp01(numerics::add(base, derainedDetail));
}

/// Reconstruction under cfg.mode:
///   none          base + detail
///   simultaneous  enhance(base) + boost * detail
///   post          the `none` result re-decomposed with `filterCfg`, then
///                 enhanced like `simultaneous`
inline Tensor reconstruct_enhanced(const Tensor& base, const Tensor& derainedDetail,
                                   const EnhanceConfig& cfg,
                                   const filters::GuidedFilterConfig& filterCfg = {})
{
    require_same_shape(base, derainedDetail, "reconstruct_enhanced");
    switch (cfg.mode) {
    case Mode::none:
        return reconstruct(base, derainedDetail);
    case Mode::simultaneous: {
        Tensor out = detail::enhance_base_unclamped(base, cfg);
        const auto boost = static_cast<float>(cfg.detailBoost);
        auto o = out.data();
        auto d = derainedDetail.data();
        for (std::size_t i = 0; i < o.size(); ++i)
            o[i] += boost * d[i];
        return numerics::clamp01(out);
    }
    case Mode::post: {
        const Tensor plain = reconstruct(base, derainedDetail);
        const filters::Decomposition again = filters::decompose(plain, filterCfg);
        EnhanceConfig sim = cfg;
        sim.mode = Mode::simultaneous;
        return reconstruct_enhanced(again.base, again.detail, sim, filterCfg);
    }
    }
    throw Error("unreachable enhancement mode");
}

} // namespace derain::enhance
