#pragma once

#include <cstddef>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace derain {

/// Raised on any contract violation: mismatched shapes, bad config values,
/// malformed files.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Shape {
    std::size_t height = 1;
    std::size_t width = 1;
    std::size_t channels = 1;

    std::size_t size() const { return height * width * channels; }
    bool operator==(const Shape&) const = default;

    std::string str() const
    {
        std::ostringstream os;
        os << height << "x" << width << "x" << channels;
        return os.str();
    }
};

/// Dense H x W x C raster, row-major with channels interleaved.
class Tensor {
public:
    Tensor() : Tensor(Shape{1, 1, 1}) {}

    explicit Tensor(Shape shape, float fill = 0.0f) : shape_(shape)
    {
        if (shape.height == 0 || shape.width == 0 || shape.channels == 0)
            throw Error("tensor dimensions must be >= 1, got " + shape.str());
        data_.assign(shape.size(), fill);
    }

    Tensor(std::size_t h, std::size_t w, std::size_t c, float fill = 0.0f)
        : Tensor(Shape{h, w, c}, fill)
    {
    }

    Tensor(Shape shape, std::vector<float> data) : shape_(shape), data_(std::move(data))
    {
        if (shape.height == 0 || shape.width == 0 || shape.channels == 0)
            throw Error("tensor dimensions must be >= 1, got " + shape.str());
        if (data_.size() != shape.size())
            throw Error("tensor data length " + std::to_string(data_.size()) +
                        " does not match shape " + shape.str());
    }

    const Shape& shape() const { return shape_; }
    std::size_t height() const { return shape_.height; }
    std::size_t width() const { return shape_.width; }
    std::size_t channels() const { return shape_.channels; }
    std::size_t size() const { return data_.size(); }

    float& operator()(std::size_t y, std::size_t x, std::size_t c = 0)
    {
        return data_[(y * shape_.width + x) * shape_.channels + c];
    }
    float operator()(std::size_t y, std::size_t x, std::size_t c = 0) const
    {
        return data_[(y * shape_.width + x) * shape_.channels + c];
    }

    std::span<float> data() { return data_; }
    std::span<const float> data() const { return data_; }
    float* raw() { return data_.data(); }
    const float* raw() const { return data_.data(); }

    bool operator==(const Tensor&) const = default;

private:
    Shape shape_;
    std::vector<float> data_;
};

/// A bank of `count` kernels of kh x kw x inChannels plus one bias per kernel.
/// Weights are stored in (kernel, row, col, inChannel) order.
struct KernelBank {
    std::size_t count = 0;
    std::size_t kh = 0;
    std::size_t kw = 0;
    std::size_t inChannels = 0;
    std::vector<float> weights;
    std::vector<float> bias;

    KernelBank() = default;
    KernelBank(std::size_t count_, std::size_t kh_, std::size_t kw_, std::size_t in_)
        : count(count_), kh(kh_), kw(kw_), inChannels(in_),
          weights(count_ * kh_ * kw_ * in_, 0.0f), bias(count_, 0.0f)
    {
    }

    std::size_t kernelVolume() const { return kh * kw * inChannels; }

    float& weight(std::size_t k, std::size_t i, std::size_t j, std::size_t c)
    {
        return weights[((k * kh + i) * kw + j) * inChannels + c];
    }
    float weight(std::size_t k, std::size_t i, std::size_t j, std::size_t c) const
    {
        return weights[((k * kh + i) * kw + j) * inChannels + c];
    }

    void validate() const
    {
        if (weights.size() != count * kh * kw * inChannels || bias.size() != count)
            throw Error("kernel bank storage does not match " + std::to_string(count) + "x" +
                        std::to_string(kh) + "x" + std::to_string(kw) + "x" +
                        std::to_string(inChannels));
    }

    std::string str() const
    {
        return std::to_string(count) + " kernels of " + std::to_string(kh) + "x" +
               std::to_string(kw) + "x" + std::to_string(inChannels);
    }

    bool operator==(const KernelBank&) const = default;
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* what)
{
    if (a.shape() != b.shape())
        throw Error(std::string(what) + ": shape mismatch " + a.shape().str() + " vs " +
                    b.shape().str());
}

} // namespace derain
