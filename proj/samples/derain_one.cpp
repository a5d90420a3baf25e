// Minimal library usage: derain a single image with a trained weight file.
//
//   derain_one weights.drnw rainy.png derained.png

#include <iostream>

#include "derain/derain.hpp"

int main(int argc, char** argv)
{
    if (argc != 4) {
        std::cerr << "usage: " << argv[0] << " WEIGHTS INPUT OUTPUT\n";
        return 2;
    }
    try {
        const auto params = derain::network::load_params(argv[1]);
        const auto image = derain::io::load_image(argv[2]);

        derain::enhance::EnhanceConfig enhance;
        enhance.mode = derain::enhance::Mode::simultaneous;
        const auto result = derain::pipeline::derain_image_full(params, image, {}, enhance);

        derain::io::save_image(argv[3], result.output);
        std::cout << "detail energy in/out: "
                  << derain::metrics::sparsity_profile(result.decomposition.detail, 0.05) << " / "
                  << derain::metrics::sparsity_profile(result.derainedDetail, 0.05)
                  << " (fraction of |v| < 0.05)\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
