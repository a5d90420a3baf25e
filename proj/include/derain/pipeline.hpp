#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "enhance.hpp"
#include "filters.hpp"
#include "image_io.hpp"
#include "network.hpp"
#include "numerics.hpp"

namespace derain::pipeline {

/// Intermediate layers of one derain pass, kept for inspection.
struct DerainResult {
    filters::Decomposition decomposition;
    Tensor derainedDetail;  ///< network output, aligned with the input
    Tensor output;
};

/// Decompose, reflect-pad the detail layer so the valid-convolution network
/// returns a map the size of the input, run the network, reconstruct.
inline DerainResult derain_image_full(const network::NetworkParams& params, const Tensor& image,
                                      const filters::GuidedFilterConfig& filterCfg,
                                      const enhance::EnhanceConfig& enhanceCfg)
{
    const Tensor rgb = io::to_rgb(image);
    const network::Architecture arch = params.architecture();
    const std::size_t shrink = arch.shrink();
    const std::size_t before = shrink / 2, after = shrink - before;
    if (std::max(before, after) >= std::min(rgb.height(), rgb.width()) ||
        rgb.height() + shrink < arch.min_input() || rgb.width() + shrink < arch.min_input())
        throw Error("image " + rgb.shape().str() + " is too small for a network that needs " +
                    std::to_string(after + 1) + "px on each side");
    DerainResult r{filters::decompose(rgb, filterCfg), Tensor(), Tensor()};
    const Tensor padded = numerics::reflect_pad(r.decomposition.detail, before, after);
    r.derainedDetail = network::forward(params, padded);
    r.output = enhance::reconstruct_enhanced(r.decomposition.base, r.derainedDetail, enhanceCfg,
                                             filterCfg);
    return r;
}

inline Tensor derain_image(const network::NetworkParams& params, const Tensor& image,
                           const filters::GuidedFilterConfig& filterCfg = {},
                           const enhance::EnhanceConfig& enhanceCfg = {})
{
    return derain_image_full(params, image, filterCfg, enhanceCfg).output;
}

} // namespace derain::pipeline
