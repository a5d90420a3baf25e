#pragma once

#include <cstddef>
#include <vector>

#include "numerics.hpp"
#include "tensor.hpp"

namespace derain::filters {

struct GuidedFilterConfig {
    std::size_t radius = 15;
    double epsilon = 0.01;  ///< squared normalized-intensity units

    void validate() const
    {
        if (radius < 1)
            throw Error("guided filter radius must be >= 1");
        if (!(epsilon > 0.0))
            throw Error("guided filter epsilon must be > 0");
    }
};

/// Base (low-pass) and detail (residual) layers of one image.
struct Decomposition {
    Tensor base;
    Tensor detail;
};

/// Per-channel guided filter: each channel of `input` is filtered against the
/// same channel of `guide`.
inline Tensor guided_filter(const Tensor& input, const Tensor& guide, const GuidedFilterConfig& cfg)
{
    cfg.validate();
    require_same_shape(input, guide, "guided_filter");
    const std::size_t r = cfg.radius;
    const std::size_t n = input.size();

    Tensor guideSq(input.shape()), cross(input.shape());
    {
        auto g = guide.data();
        auto p = input.data();
        auto gg = guideSq.data();
        auto gp = cross.data();
        for (std::size_t i = 0; i < n; ++i) {
            gg[i] = g[i] * g[i];
            gp[i] = g[i] * p[i];
        }
    }
    const Tensor meanI = numerics::box_mean(guide, r);
    const Tensor meanP = numerics::box_mean(input, r);
    const Tensor meanII = numerics::box_mean(guideSq, r);
    const Tensor meanIP = numerics::box_mean(cross, r);

    Tensor a(input.shape()), b(input.shape());
    for (std::size_t i = 0; i < n; ++i) {
        const double mi = meanI.data()[i], mp = meanP.data()[i];
        const double var = meanII.data()[i] - mi * mi;
        const double cov = meanIP.data()[i] - mi * mp;
        const double ai = cov / (var + cfg.epsilon);
        a.data()[i] = static_cast<float>(ai);
        b.data()[i] = static_cast<float>(mp - ai * mi);
    }
    const Tensor meanA = numerics::box_mean(a, r);
    const Tensor meanB = numerics::box_mean(b, r);

    Tensor out(input.shape());
    for (std::size_t i = 0; i < n; ++i)
        out.data()[i] = meanA.data()[i] * guide.data()[i] + meanB.data()[i];
    return out;
}

/// Splits `image` into a self-guided base layer and the detail residual, so
/// that base + detail == image.
inline Decomposition decompose(const Tensor& image, const GuidedFilterConfig& cfg)
{
    Decomposition d{guided_filter(image, image, cfg), Tensor(image.shape())};
    d.detail = numerics::sub(image, d.base);
    return d;
}

} // namespace derain::filters
