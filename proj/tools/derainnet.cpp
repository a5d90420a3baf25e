// derainnet: synthesize rainy datasets, train the detail-layer network,
// derain images, and evaluate or benchmark the result.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "derain/derain.hpp"

#ifndef DERAIN_BUILD_PROFILE
#define DERAIN_BUILD_PROFILE "unknown"
#endif

namespace fs = std::filesystem;
using namespace derain;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

/// Raised for argument problems found after CLI11 parsing; maps to exit 2.
struct UsageError : Error {
    using Error::Error;
};

struct CommonOptions {
    std::string configFile;
    std::vector<std::string> overrides;
    int threads = -1;
};

void add_common(CLI::App* cmd, CommonOptions& o)
{
    cmd->add_option("--config", o.configFile, "flat key = value config file")->check(CLI::ExistingFile);
    cmd->add_option("--set", o.overrides, "override one config key (key=value), repeatable");
    cmd->add_option("--threads", o.threads, "worker threads (1 = fully deterministic)");
}

config::CliConfig resolve(const CommonOptions& o)
{
    config::CliConfig cfg;
    try {
        if (!o.configFile.empty())
            config::apply_file(cfg, o.configFile);
        for (const auto& s : o.overrides)
            config::apply_override(cfg, s);
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    if (o.threads >= 0)
        cfg.threads = static_cast<std::size_t>(std::max(1, o.threads));
    return cfg;
}

void log_config(const config::CliConfig& cfg, const std::string& command, const fs::path& outDir)
{
    std::cerr << "[" << command << "] resolved config:\n" << cfg.resolved();
    if (!outDir.empty()) {
        std::ofstream f(outDir / (command + ".config.txt"), std::ios::trunc);
        f << "# derainnet " << kVersion << " " << command << "\n" << cfg.resolved();
    }
}

std::string fmt(double v, int precision = 17)
{
    std::ostringstream os;
    os << std::setprecision(precision) << v;
    return os.str();
}

// ---------------------------------------------------------------- synth

struct SynthOptions {
    CommonOptions common;
    std::string cleanDir, outDir;
    std::uint64_t seed = 0;
    std::size_t variants = 0;
};

int cmd_synth(const SynthOptions& o)
{
    config::CliConfig cfg = resolve(o.common);
    if (o.seed != 0)
        cfg.seed = o.seed;
    if (o.variants != 0)
        cfg.variants = o.variants;
    const auto grid = rainsynth::default_variants();
    if (cfg.variants < 1 || cfg.variants > grid.size())
        throw UsageError("--variants must lie in [1, " + std::to_string(grid.size()) + "]");
    fs::create_directories(o.outDir);
    log_config(cfg, "synth", o.outDir);

    const std::vector<rainsynth::RainParams> variants(grid.begin(),
                                                      grid.begin() + static_cast<long>(cfg.variants));
    const auto m = dataset::synthesize_dataset(o.cleanDir, o.outDir, variants, cfg.seed, cfg.threads);
    std::cout << "wrote " << m.entries.size() - m.failures() << " rainy images ("
              << m.entries.size() / variants.size() << " clean x " << variants.size()
              << " variants) to " << o.outDir << "\n";
    if (m.failures() > 0) {
        for (const auto& e : m.entries)
            if (!e.ok())
                std::cerr << "  " << e.rainyPath << ": " << e.status << "\n";
        std::cerr << m.failures() << " rainy images failed\n";
        return kExitFailure;
    }
    return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainOptions {
    CommonOptions common;
    std::string data, outDir, domain, init;
    long steps = -1;
    long long seed = -1;
    double learningRate = 0.0;
    std::size_t batch = 0, patchSize = 0, patches = 0;
};

void write_loss_csv(const fs::path& path, const std::vector<double>& history)
{
    std::ofstream csv(path, std::ios::trunc);
    csv << "step,loss,smoothed_500\n";
    const auto smooth = network::moving_average(history, 500);
    for (std::size_t i = 0; i < history.size(); ++i)
        csv << i + 1 << "," << fmt(history[i]) << "," << fmt(smooth[i]) << "\n";
}

int cmd_train(const TrainOptions& o)
{
    config::CliConfig cfg = resolve(o.common);
    if (o.steps >= 0)
        cfg.train.steps = static_cast<std::size_t>(o.steps);
    if (o.seed >= 0)
        cfg.train.rngSeed = static_cast<std::uint64_t>(o.seed);
    if (!o.domain.empty())
        cfg.set("train.domain", o.domain);
    if (o.learningRate > 0.0)
        cfg.train.learningRate = o.learningRate;
    if (o.batch > 0)
        cfg.train.batchSize = o.batch;
    if (o.patchSize > 0)
        cfg.train.patchSize = o.patchSize;
    if (o.patches > 0)
        cfg.patches = o.patches;
    cfg.train.threads = cfg.threads;
    try {
        cfg.train.validate(cfg.arch);
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    if (cfg.train.steps > 0 && o.data.empty())
        throw UsageError("--data is required unless --steps 0");

    fs::create_directories(o.outDir);
    log_config(cfg, "train", o.outDir);

    network::NetworkParams params = o.init.empty() ? network::init_params(cfg.arch, cfg.train.rngSeed)
                                                   : network::load_params(o.init);
    if (params.architecture() != cfg.arch)
        throw Error("--init weights have a different architecture than the config");

    network::TrainResult result{params, {}};
    if (cfg.train.steps > 0) {
        dataset::SamplerConfig sc;
        sc.patchSize = cfg.train.patchSize;
        sc.outputSize = cfg.train.patchSize - cfg.arch.shrink();
        sc.filter = cfg.filter;
        sc.domain = cfg.train.domainMode;
        auto sampler = std::make_shared<const dataset::PatchSampler>(dataset::read_manifest(o.data), sc);
        const dataset::SampledPairSource source(sampler, cfg.patches,
                                                rainsynth::mix64(cfg.train.rngSeed ^ 0x70a7c4e5ULL));
        std::cerr << "training on " << source.size() << " patch draws from "
                  << sampler->manifest().entries.size() << " rainy images\n";

        const fs::path ckptDir = fs::path(o.outDir) / "checkpoints";
        std::vector<double> recent;
        try {
            result = network::train(
                source, params, cfg.train,
                [&](std::size_t step, double l) {
                    std::cerr << "step " << step << "  loss " << fmt(l, 6) << "\n";
                },
                [&](std::size_t step, const network::NetworkParams& p) {
                    fs::create_directories(ckptDir);
                    char name[32];
                    std::snprintf(name, sizeof name, "step_%08zu.drnw", step);
                    network::save_params(ckptDir / name, p);
                });
        } catch (const network::DivergenceError& e) {
            std::cerr << "error: " << e.what() << " (lower train.learning_rate)\n";
            if (const network::TrainResult* partial = e.partial()) {
                network::save_params(fs::path(o.outDir) / "last_finite.drnw", partial->params);
                write_loss_csv(fs::path(o.outDir) / "loss.csv", partial->lossHistory);
                std::cerr << "wrote loss.csv and last_finite.drnw for the " << partial->lossHistory.size()
                          << " completed steps\n";
            }
            return kExitFailure;
        }
    }

    network::save_params(fs::path(o.outDir) / "weights.drnw", result.params);
    write_loss_csv(fs::path(o.outDir) / "loss.csv", result.lossHistory);
    const auto smooth = network::moving_average(result.lossHistory, 500);
    if (!smooth.empty()) {
        const auto head = network::moving_average(
            std::span<const double>(result.lossHistory).first(std::min<std::size_t>(500, smooth.size())),
            500);
        std::cout << "smoothed loss: start " << fmt(head.back(), 6) << "  end " << fmt(smooth.back(), 6)
                  << "  ratio " << fmt(smooth.back() / head.back(), 4) << "\n";
    }
    std::cout << "wrote " << (fs::path(o.outDir) / "weights.drnw").string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- derain

struct DerainOptions {
    CommonOptions common;
    std::string weights, input, outDir, enhance;
};

int cmd_derain(const DerainOptions& o)
{
    config::CliConfig cfg = resolve(o.common);
    if (!o.enhance.empty())
        cfg.set("enhance.mode", o.enhance);
    fs::create_directories(o.outDir);
    log_config(cfg, "derain", o.outDir);
    const network::NetworkParams params = network::load_params(o.weights);

    std::vector<fs::path> inputs;
    if (fs::is_directory(o.input))
        inputs = io::list_images(o.input);
    else
        inputs.push_back(o.input);
    if (inputs.empty())
        throw Error("no .png/.ppm images in " + o.input);

    std::vector<std::string> errors(inputs.size());
    const auto work = [&](std::size_t i) {
        try {
            const Tensor img = io::load_image(inputs[i]);
            const Tensor out = pipeline::derain_image(params, img, cfg.filter, cfg.enhance);
            io::save_image(fs::path(o.outDir) / (inputs[i].stem().string() + ".png"), out);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    };
    const std::size_t workers = std::clamp<std::size_t>(cfg.threads, 1, inputs.size());
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (std::size_t i = w; i < inputs.size(); i += workers)
                    work(i);
            });
    }
    std::size_t failed = 0;
    for (std::size_t i = 0; i < inputs.size(); ++i)
        if (!errors[i].empty()) {
            ++failed;
            std::cerr << "failed: " << inputs[i].string() << ": " << errors[i] << "\n";
        }
    std::cout << "derained " << inputs.size() - failed << " of " << inputs.size() << " images into "
              << o.outDir << "\n";
    return failed == 0 ? kExitOk : kExitFailure;
}

// ---------------------------------------------------------------- eval

struct EvalOptions {
    CommonOptions common;
    std::string groundTruth, candidate, outDir;
};

int cmd_eval(const EvalOptions& o)
{
    config::CliConfig cfg = resolve(o.common);
    if (!o.outDir.empty())
        fs::create_directories(o.outDir);
    log_config(cfg, "eval", o.outDir);

    std::map<std::string, fs::path> truth, cand;
    for (const auto& p : io::list_images(o.groundTruth))
        truth[p.stem().string()] = p;
    for (const auto& p : io::list_images(o.candidate))
        cand[p.stem().string()] = p;

    struct Row {
        std::string name;
        double ssim;
    };
    std::vector<Row> rows;
    for (const auto& [name, path] : truth) {
        const auto it = cand.find(name);
        if (it == cand.end()) {
            std::cerr << "unpaired ground truth: " << path.string() << "\n";
            continue;
        }
        try {
            rows.push_back({name, metrics::ssim(io::load_image(path), io::load_image(it->second), cfg.ssim)});
        } catch (const std::exception& e) {
            std::cerr << "excluded " << name << ": " << e.what() << "\n";
        }
    }
    for (const auto& [name, path] : cand)
        if (!truth.contains(name))
            std::cerr << "unpaired candidate: " << path.string() << "\n";
    if (rows.empty()) {
        std::cerr << "error: no image pairs to evaluate\n";
        return kExitFailure;
    }

    double mean = 0.0;
    for (const auto& r : rows)
        mean += r.ssim;
    mean /= static_cast<double>(rows.size());
    double var = 0.0;
    for (const auto& r : rows)
        var += (r.ssim - mean) * (r.ssim - mean);
    const double stddev = std::sqrt(var / static_cast<double>(rows.size()));

    std::ostringstream text, csv;
    csv << "image,ssim\n";
    for (const auto& r : rows) {
        text << std::left << std::setw(32) << r.name << std::fixed << std::setprecision(4) << r.ssim << "\n";
        csv << r.name << "," << fmt(r.ssim) << "\n";
    }
    text << "mean SSIM " << std::fixed << std::setprecision(4) << mean << " +- " << stddev << " over "
         << rows.size() << " images (population std)\n";
    csv << "mean," << fmt(mean) << "\nstd," << fmt(stddev) << "\n";
    std::cout << text.str();
    if (!o.outDir.empty()) {
        std::ofstream(fs::path(o.outDir) / "eval.txt", std::ios::trunc) << text.str();
        std::ofstream(fs::path(o.outDir) / "eval.csv", std::ios::trunc) << csv.str();
    }
    return kExitOk;
}

// ---------------------------------------------------------------- bench

struct BenchOptions {
    CommonOptions common;
    std::string weights, outDir;
    std::vector<std::size_t> sizes;
    std::size_t runs = 3;
};

int cmd_bench(const BenchOptions& o)
{
    config::CliConfig cfg = resolve(o.common);
    if (!o.outDir.empty())
        fs::create_directories(o.outDir);
    log_config(cfg, "bench", o.outDir);
    const network::NetworkParams params =
        o.weights.empty() ? network::init_params(cfg.arch, cfg.train.rngSeed) : network::load_params(o.weights);
    const auto a = params.architecture();
    const auto sizes = o.sizes.empty() ? metrics::default_bench_sizes() : o.sizes;

    std::cout << "network " << a.s1 << "-" << a.s2 << "-" << a.s3 << " widths " << a.n1 << "," << a.n2
              << "; threads 1; build " << DERAIN_BUILD_PROFILE << "; runs " << std::max<std::size_t>(3, o.runs)
              << "\n";
    const auto rows = metrics::bench_inference(params, sizes, o.runs, cfg.filter, cfg.enhance);
    std::cout << metrics::format_bench_table(rows);
    if (!o.outDir.empty())
        std::ofstream(fs::path(o.outDir) / "bench.csv", std::ios::trunc) << metrics::format_bench_csv(rows);
    return kExitOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"derainnet: single-image rain removal on the detail layer"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    SynthOptions synth;
    auto* s = app.add_subcommand("synth", "render rainy variants of a directory of clean images");
    s->add_option("--clean-dir", synth.cleanDir, "directory of clean .png/.ppm images")->required();
    s->add_option("--out-dir", synth.outDir, "output dataset directory")->required();
    s->add_option("--seed", synth.seed, "dataset seed");
    s->add_option("--variants", synth.variants, "number of rain variants per image (default 14)");
    add_common(s, synth.common);

    TrainOptions train;
    auto* t = app.add_subcommand("train", "train the network on a synthesized dataset");
    t->add_option("--data", train.data, "dataset directory containing manifest.tsv");
    t->add_option("--out-dir", train.outDir, "directory for weights, loss.csv, checkpoints")->required();
    t->add_option("--steps", train.steps, "SGD steps");
    t->add_option("--seed", train.seed, "training seed");
    t->add_option("--domain", train.domain, "detail | image")->check(CLI::IsMember({"detail", "image"}));
    t->add_option("--lr", train.learningRate, "learning rate");
    t->add_option("--batch", train.batch, "batch size");
    t->add_option("--patch-size", train.patchSize, "input patch side");
    t->add_option("--patches", train.patches, "size of the drawn patch pool");
    t->add_option("--init", train.init, "start from an existing weight file")->check(CLI::ExistingFile);
    add_common(t, train.common);

    DerainOptions derain;
    auto* d = app.add_subcommand("derain", "derain one image or every image in a directory");
    d->add_option("--weights", derain.weights, "trained weight file")->required()->check(CLI::ExistingFile);
    d->add_option("--input", derain.input, "image file or directory")->required()->check(CLI::ExistingPath);
    d->add_option("--out-dir", derain.outDir, "output directory")->required();
    d->add_option("--enhance", derain.enhance, "none | post | simultaneous")
        ->check(CLI::IsMember({"none", "post", "simultaneous"}));
    add_common(d, derain.common);

    EvalOptions eval;
    auto* e = app.add_subcommand("eval", "SSIM of candidate images against ground truth");
    e->add_option("--ground-truth", eval.groundTruth, "directory of reference images")
        ->required()
        ->check(CLI::ExistingDirectory);
    e->add_option("--candidate", eval.candidate, "directory of images to score")
        ->required()
        ->check(CLI::ExistingDirectory);
    e->add_option("--out-dir", eval.outDir, "write eval.txt and eval.csv here");
    add_common(e, eval.common);

    BenchOptions bench;
    auto* b = app.add_subcommand("bench", "time whole-image deraining at several sizes");
    b->add_option("--weights", bench.weights, "weight file (default: freshly initialized network)")
        ->check(CLI::ExistingFile);
    b->add_option("--sizes", bench.sizes, "square image sides (default 250 500 750)")->delimiter(',');
    b->add_option("--runs", bench.runs, "timed runs per size (minimum 3)");
    b->add_option("--out-dir", bench.outDir, "write bench.csv here");
    add_common(b, bench.common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::CallForAllHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::CallForVersion& ex) {
        return app.exit(ex);
    } catch (const CLI::ParseError& ex) {
        app.exit(ex);
        return kExitUsage;
    }

    try {
        if (s->parsed())
            return cmd_synth(synth);
        if (t->parsed())
            return cmd_train(train);
        if (d->parsed())
            return cmd_derain(derain);
        if (e->parsed())
            return cmd_eval(eval);
        if (b->parsed())
            return cmd_bench(bench);
    } catch (const UsageError& ex) {
        std::cerr << "usage error: " << ex.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitFailure;
    }
    return kExitUsage;
}
