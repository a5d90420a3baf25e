#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "numerics.hpp"
#include "tensor.hpp"

namespace derain::network {

/// Kernel sizes s1-s2-s3 and hidden widths n1, n2.
struct Architecture {
    std::size_t s1 = 16, s2 = 1, s3 = 8;
    std::size_t n1 = 512, n2 = 512;

    /// Pixels lost per side pair: output side = input side - shrink().
    std::size_t shrink() const { return s1 + s2 + s3 - 3; }
    std::size_t min_input() const { return s1 + s2 + s3 - 2; }
    bool operator==(const Architecture&) const = default;
};

/// Weights and biases of the three convolution layers.
struct NetworkParams {
    KernelBank layer1;  ///< n1 kernels of s1 x s1 x 3
    KernelBank layer2;  ///< n2 kernels of s2 x s2 x n1
    KernelBank layer3;  ///< 3 kernels of s3 x s3 x n2

    NetworkParams() = default;
    explicit NetworkParams(const Architecture& a)
        : layer1(a.n1, a.s1, a.s1, 3), layer2(a.n2, a.s2, a.s2, a.n1), layer3(3, a.s3, a.s3, a.n2)
    {
    }

    Architecture architecture() const
    {
        return {layer1.kh, layer2.kh, layer3.kh, layer1.count, layer2.count};
    }

    void validate() const
    {
        layer1.validate();
        layer2.validate();
        layer3.validate();
        if (layer1.inChannels != 3 || layer2.inChannels != layer1.count ||
            layer3.inChannels != layer2.count || layer3.count != 3)
            throw Error("network layers do not chain: " + layer1.str() + " -> " + layer2.str() +
                        " -> " + layer3.str());
        if (layer1.kh != layer1.kw || layer2.kh != layer2.kw || layer3.kh != layer3.kw)
            throw Error("network kernels must be square");
    }

    std::size_t parameter_count() const
    {
        return layer1.weights.size() + layer1.bias.size() + layer2.weights.size() +
               layer2.bias.size() + layer3.weights.size() + layer3.bias.size();
    }

    /// Every parameter buffer in file order.
    std::array<std::span<float>, 6> buffers()
    {
        return {layer1.weights, layer1.bias, layer2.weights, layer2.bias, layer3.weights, layer3.bias};
    }
    std::array<std::span<const float>, 6> buffers() const
    {
        return {layer1.weights, layer1.bias, layer2.weights, layer2.bias, layer3.weights, layer3.bias};
    }

    bool operator==(const NetworkParams&) const = default;
};

/// Aligned training sample: input patch and its center-cropped target.
struct PatchPair {
    Tensor input;
    Tensor target;
};

enum class Domain { detail, image };

struct TrainConfig {
    double learningRate = 0.01;
    std::size_t batchSize = 16;
    std::size_t steps = 1000;
    std::size_t patchSize = 64;
    std::uint64_t rngSeed = 1;
    Domain domainMode = Domain::detail;
    std::size_t logEvery = 100;
    std::size_t checkpointEvery = 0;  ///< 0 disables checkpoints
    std::size_t threads = 1;

    void validate(const Architecture& arch) const
    {
        if (!(learningRate > 0.0))
            throw Error("learning rate must be > 0");
        if (batchSize < 1)
            throw Error("batch size must be >= 1");
        if (patchSize <= arch.shrink())
            throw Error("patch size " + std::to_string(patchSize) + " must exceed " +
                        std::to_string(arch.shrink()) + " for this architecture");
    }
};

struct TrainResult;

/// Raised when a step produces a non-finite loss or gradient. When thrown out
/// of train() it carries the history so far and the last finite parameters.
class DivergenceError : public Error {
public:
    DivergenceError(std::size_t step, const std::string& what)
        : Error("training diverged at step " + std::to_string(step) + ": " + what), step_(step)
    {
    }
    std::size_t step() const { return step_; }
    const TrainResult* partial() const { return partial_.get(); }
    void attach(std::shared_ptr<const TrainResult> partial) { partial_ = std::move(partial); }

private:
    std::size_t step_;
    std::shared_ptr<const TrainResult> partial_;
};

/// Gaussian(0, 0.001) weights, zero biases.
inline NetworkParams init_params(const Architecture& arch, std::uint64_t seed)
{
    if (arch.s1 < 1 || arch.s2 < 1 || arch.s3 < 1 || arch.n1 < 1 || arch.n2 < 1)
        throw Error("network sizes must all be >= 1");
    NetworkParams p(arch);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 0.001);
    for (KernelBank* bank : {&p.layer1, &p.layer2, &p.layer3})
        for (float& w : bank->weights)
            w = static_cast<float>(gauss(rng));
    return p;
}

/// Intermediate maps kept for backpropagation.
struct Trace {
    Tensor hidden1;  ///< tanh(W1 * x + b1)
    Tensor hidden2;  ///< tanh(W2 * hidden1 + b2)
    Tensor output;   ///< W3 * hidden2 + b3
};

inline Trace forward_trace(const NetworkParams& params, const Tensor& input)
{
    const Architecture a = params.architecture();
    if (input.channels() != 3)
        throw Error("network input must have 3 channels, got " + input.shape().str());
    if (input.height() < a.min_input() || input.width() < a.min_input())
        throw Error("network input " + input.shape().str() + " is smaller than the minimum " +
                    std::to_string(a.min_input()) + "x" + std::to_string(a.min_input()));
    Trace t;
    t.hidden1 = numerics::tanh_map(numerics::conv_valid(input, params.layer1));
    t.hidden2 = numerics::tanh_map(numerics::conv_valid(t.hidden1, params.layer2));
    t.output = numerics::conv_valid(t.hidden2, params.layer3);
    return t;
}

inline Tensor forward(const NetworkParams& params, const Tensor& input)
{
    return forward_trace(params, input).output;
}

namespace detail {

inline double squared_residual(const Tensor& output, const Tensor& target)
{
    if (output.shape() != target.shape())
        throw Error("target " + target.shape().str() + " does not match network output " +
                    output.shape().str());
    double s = 0.0;
    for (std::size_t i = 0; i < output.size(); ++i) {
        const double r = static_cast<double>(output.data()[i]) - target.data()[i];
        s += r * r;
    }
    return s;
}

struct SampleGradient {
    NetworkParams grad;
    double loss = 0.0;
};

/// Gradient of ||f(x) - t||_F^2 for a single pair.
inline SampleGradient sample_gradient(const NetworkParams& params, const PatchPair& pair)
{
    const Trace t = forward_trace(params, pair.input);
    SampleGradient out;
    out.loss = squared_residual(t.output, pair.target);

    Tensor g(t.output.shape());
    for (std::size_t i = 0; i < g.size(); ++i)
        g.data()[i] = 2.0f * (t.output.data()[i] - pair.target.data()[i]);

    auto g3 = numerics::conv_backward(t.hidden2, params.layer3, g);
    auto g2 = numerics::conv_backward(t.hidden1, params.layer2,
                                      numerics::tanh_backward(t.hidden2, g3.input));
    auto g1 = numerics::conv_backward(pair.input, params.layer1,
                                      numerics::tanh_backward(t.hidden1, g2.input), false);
    out.grad.layer1 = std::move(g1.bank);
    out.grad.layer2 = std::move(g2.bank);
    out.grad.layer3 = std::move(g3.bank);
    return out;
}

} // namespace detail

/// Mean over the batch of the squared Frobenius norm of the residual.
inline double loss(const NetworkParams& params, std::span<const PatchPair> batch)
{
    if (batch.empty())
        throw Error("loss: empty batch");
    double total = 0.0;
    for (const PatchPair& pair : batch)
        total += detail::squared_residual(forward(params, pair.input), pair.target);
    return total / static_cast<double>(batch.size());
}

/// Batch loss and the batch-mean gradient of every parameter.
struct BatchGradient {
    NetworkParams grad;
    double loss = 0.0;
};

/// Per-sample gradients may be computed on `threads` workers; reduction is
/// always in sample order so the result does not depend on the thread count.
inline BatchGradient batch_gradient(const NetworkParams& params, std::span<const PatchPair> batch,
                                    std::size_t threads = 1)
{
    if (batch.empty())
        throw Error("batch_gradient: empty batch");
    std::vector<detail::SampleGradient> per(batch.size());
    const std::size_t workers = std::clamp<std::size_t>(threads, 1, batch.size());
    if (workers == 1) {
        for (std::size_t i = 0; i < batch.size(); ++i)
            per[i] = detail::sample_gradient(params, batch[i]);
    } else {
        std::vector<std::jthread> pool;
        std::vector<std::exception_ptr> errors(workers);
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t i = w; i < batch.size(); i += workers)
                        per[i] = detail::sample_gradient(params, batch[i]);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        pool.clear();
        for (auto& e : errors)
            if (e)
                std::rethrow_exception(e);
    }

    BatchGradient out{NetworkParams(params.architecture()), 0.0};
    const double invN = 1.0 / static_cast<double>(batch.size());
    auto dst = out.grad.buffers();
    std::vector<double> acc;
    for (std::size_t b = 0; b < dst.size(); ++b) {
        acc.assign(dst[b].size(), 0.0);
        for (const auto& s : per) {
            auto src = s.grad.buffers()[b];
            for (std::size_t i = 0; i < acc.size(); ++i)
                acc[i] += src[i];
        }
        for (std::size_t i = 0; i < acc.size(); ++i)
            dst[b][i] = static_cast<float>(acc[i] * invN);
    }
    for (const auto& s : per)
        out.loss += s.loss;
    out.loss *= invN;
    return out;
}

/// One SGD update in place: every parameter moves by -learningRate times its
/// batch-mean gradient. Returns the batch loss before the update.
inline double sgd_step(NetworkParams& params, std::span<const PatchPair> batch, double learningRate,
                       std::size_t threads = 1, std::size_t stepIndex = 0)
{
    const BatchGradient g = batch_gradient(params, batch, threads);
    if (!std::isfinite(g.loss))
        throw DivergenceError(stepIndex, "non-finite loss");
    for (auto buf : g.grad.buffers())
        for (float v : buf)
            if (!std::isfinite(v))
                throw DivergenceError(stepIndex, "non-finite gradient");
    if (learningRate == 0.0)
        return g.loss;
    auto dst = params.buffers();
    auto src = g.grad.buffers();
    for (std::size_t b = 0; b < dst.size(); ++b)
        for (std::size_t i = 0; i < dst[b].size(); ++i)
            dst[b][i] = static_cast<float>(static_cast<double>(dst[b][i]) -
                                           learningRate * static_cast<double>(src[b][i]));
    return g.loss;
}

/// Random-access pool of training pairs.
class PairSource {
public:
    virtual ~PairSource() = default;
    virtual std::size_t size() const = 0;
    virtual PatchPair at(std::size_t index) const = 0;
};

/// PairSource over an in-memory vector.
class VectorPairSource : public PairSource {
public:
    explicit VectorPairSource(std::vector<PatchPair> pairs) : pairs_(std::move(pairs)) {}
    std::size_t size() const override { return pairs_.size(); }
    PatchPair at(std::size_t index) const override { return pairs_.at(index); }

private:
    std::vector<PatchPair> pairs_;
};

struct TrainResult {
    NetworkParams params;
    std::vector<double> lossHistory;  ///< batch loss before each step
};

using ProgressSink = std::function<void(std::size_t step, double loss)>;
using CheckpointSink = std::function<void(std::size_t step, const NetworkParams&)>;

/// Runs cfg.steps SGD updates over batches drawn from a per-epoch shuffle of
/// `data`. The shuffle is seeded from cfg.rngSeed.
inline TrainResult train(const PairSource& data, NetworkParams initial, const TrainConfig& cfg,
                         const ProgressSink& progress = {}, const CheckpointSink& checkpoint = {})
{
    initial.validate();
    cfg.validate(initial.architecture());
    TrainResult result{std::move(initial), {}};
    if (cfg.steps == 0)
        return result;
    if (data.size() == 0)
        throw Error("train: empty dataset");

    std::mt19937_64 rng(cfg.rngSeed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t cursor = 0;

    result.lossHistory.reserve(cfg.steps);
    std::vector<PatchPair> batch;
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        batch.clear();
        while (batch.size() < cfg.batchSize) {
            if (cursor == order.size()) {
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            batch.push_back(data.at(order[cursor++]));
        }
        double l = 0.0;
        try {
            l = sgd_step(result.params, batch, cfg.learningRate, cfg.threads, step);
        } catch (DivergenceError& e) {
            e.attach(std::make_shared<const TrainResult>(result));
            throw;
        }
        result.lossHistory.push_back(l);
        if (progress && cfg.logEvery > 0 && (step + 1) % cfg.logEvery == 0)
            progress(step + 1, l);
        if (checkpoint && cfg.checkpointEvery > 0 && (step + 1) % cfg.checkpointEvery == 0)
            checkpoint(step + 1, result.params);
    }
    return result;
}

/// Trailing moving average with window `window` (shorter at the start).
inline std::vector<double> moving_average(std::span<const double> values, std::size_t window)
{
    std::vector<double> out(values.size());
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        s += values[i];
        if (i >= window)
            s -= values[i - window];
        out[i] = s / static_cast<double>(std::min(i + 1, window));
    }
    return out;
}

// Weight file: "DRNW", u32 version, u32 s1 s2 s3 n1 n2, then float32 buffers
// in NetworkParams::buffers() order, all little-endian.
inline constexpr std::array<char, 4> kWeightMagic{'D', 'R', 'N', 'W'};
inline constexpr std::uint32_t kWeightVersion = 1;
inline constexpr std::size_t kWeightHeaderBytes = 4 + 6 * 4;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i)
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline std::uint32_t get_u32(const unsigned char* p)
{
    return std::uint32_t{p[0]} | std::uint32_t{p[1]} << 8 | std::uint32_t{p[2]} << 16 |
           std::uint32_t{p[3]} << 24;
}

} // namespace detail

inline std::string serialize_params(const NetworkParams& params)
{
    params.validate();
    const Architecture a = params.architecture();
    std::string out(kWeightMagic.begin(), kWeightMagic.end());
    detail::put_u32(out, kWeightVersion);
    for (std::size_t v : {a.s1, a.s2, a.s3, a.n1, a.n2})
        detail::put_u32(out, static_cast<std::uint32_t>(v));
    out.reserve(kWeightHeaderBytes + 4 * params.parameter_count());
    for (auto buf : params.buffers())
        for (float f : buf)
            detail::put_u32(out, std::bit_cast<std::uint32_t>(f));
    return out;
}

inline NetworkParams deserialize_params(std::string_view bytes)
{
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (bytes.size() < kWeightHeaderBytes)
        throw Error("weight file truncated: " + std::to_string(bytes.size()) + " bytes");
    if (std::memcmp(p, kWeightMagic.data(), 4) != 0)
        throw Error("weight file has bad magic (expected DRNW)");
    if (const auto v = detail::get_u32(p + 4); v != kWeightVersion)
        throw Error("unsupported weight file version " + std::to_string(v));
    Architecture a{detail::get_u32(p + 8), detail::get_u32(p + 12), detail::get_u32(p + 16),
                   detail::get_u32(p + 20), detail::get_u32(p + 24)};
    if (a.s1 == 0 || a.s2 == 0 || a.s3 == 0 || a.n1 == 0 || a.n2 == 0 || a.s1 > 4096 ||
        a.s3 > 4096 || a.n1 > (1u << 20) || a.n2 > (1u << 20))
        throw Error("weight file header has implausible sizes");
    NetworkParams params(a);
    const std::size_t expected = kWeightHeaderBytes + 4 * params.parameter_count();
    if (bytes.size() != expected)
        throw Error("weight file size " + std::to_string(bytes.size()) + " does not match " +
                    std::to_string(expected) + " implied by its header");
    const unsigned char* cur = p + kWeightHeaderBytes;
    for (auto buf : params.buffers())
        for (float& f : buf) {
            f = std::bit_cast<float>(detail::get_u32(cur));
            cur += 4;
        }
    return params;
}

inline void save_params(const std::filesystem::path& path, const NetworkParams& params)
{
    const std::string bytes = serialize_params(params);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f)
        throw Error("cannot open " + path.string() + " for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f)
        throw Error("failed writing " + path.string());
}

inline NetworkParams load_params(const std::filesystem::path& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw Error("cannot open weight file " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    try {
        return deserialize_params(bytes);
    } catch (const Error& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

} // namespace derain::network
