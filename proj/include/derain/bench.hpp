#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <iomanip>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pipeline.hpp"

namespace derain::metrics {

struct BenchRow {
    std::size_t side = 0;  ///< square image side in px
    double seconds = 0.0;  ///< median wall-clock time of the full derain pass
    std::vector<double> runs;
};

inline std::vector<std::size_t> default_bench_sizes() { return {250, 500, 750}; }

/// Times derain_image on synthetic square inputs, `runs` times per size
/// (at least 3), reporting the median.
inline std::vector<BenchRow> bench_inference(const network::NetworkParams& params,
                                             const std::vector<std::size_t>& sides,
                                             std::size_t runs = 3,
                                             const filters::GuidedFilterConfig& filterCfg = {},
                                             const enhance::EnhanceConfig& enhanceCfg = {})
{
    runs = std::max<std::size_t>(runs, 3);
    std::vector<BenchRow> rows;
    std::mt19937_64 rng(0xbe7c4);
    std::uniform_real_distribution<float> unit(0.0f, 1.0f);
    for (std::size_t side : sides) {
        Tensor img(side, side, 3);
        for (float& v : img.data())
            v = unit(rng);
        BenchRow row;
        row.side = side;
        for (std::size_t i = 0; i < runs; ++i) {
            const auto t0 = std::chrono::steady_clock::now();
            const Tensor out = pipeline::derain_image(params, img, filterCfg, enhanceCfg);
            const auto t1 = std::chrono::steady_clock::now();
            row.runs.push_back(std::chrono::duration<double>(t1 - t0).count());
            if (out.size() != img.size())
                throw Error("bench: derained output changed size");
        }
        std::vector<double> sorted = row.runs;
        std::sort(sorted.begin(), sorted.end());
        row.seconds = sorted[sorted.size() / 2];
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::string format_bench_table(const std::vector<BenchRow>& rows)
{
    std::ostringstream os;
    os << std::left << std::setw(14) << "size" << "median_seconds\n";
    for (const auto& r : rows)
        os << std::left << std::setw(14) << (std::to_string(r.side) + "x" + std::to_string(r.side))
           << std::fixed << std::setprecision(4) << r.seconds << "\n";
    return os.str();
}

inline std::string format_bench_csv(const std::vector<BenchRow>& rows)
{
    std::ostringstream os;
    os << "side,pixels,median_seconds\n";
    for (const auto& r : rows)
        os << r.side << "," << r.side * r.side << "," << std::setprecision(9) << r.seconds << "\n";
    return os.str();
}

} // namespace derain::metrics
