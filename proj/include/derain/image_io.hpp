#pragma once

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "tensor.hpp"

namespace derain::io {

namespace fs = std::filesystem;

inline std::string lower_extension(const fs::path& p)
{
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext;
}

inline bool is_image_file(const fs::path& p)
{
    const std::string ext = lower_extension(p);
    return ext == ".png" || ext == ".ppm";
}

/// Byte for a [0,1] value: round half up, saturating.
inline std::uint8_t to_byte(float v)
{
    const double s = std::floor(static_cast<double>(v) * 255.0 + 0.5);
    return static_cast<std::uint8_t>(std::clamp(s, 0.0, 255.0));
}

namespace detail {

[[noreturn]] inline void fail(const fs::path& path, const std::string& reason)
{
    throw Error("image " + path.string() + ": " + reason);
}

inline Tensor from_bytes(const std::vector<std::uint8_t>& bytes, std::size_t h, std::size_t w,
                         std::size_t c)
{
    Tensor t(h, w, c);
    for (std::size_t i = 0; i < bytes.size(); ++i)
        t.data()[i] = static_cast<float>(bytes[i]) / 255.0f;
    return t;
}

inline std::string read_token(std::istream& in)
{
    std::string tok;
    int ch;
    while ((ch = in.get()) != EOF) {
        if (ch == '#') {
            while ((ch = in.get()) != EOF && ch != '\n') {
            }
            continue;
        }
        if (std::isspace(ch)) {
            if (!tok.empty())
                break;
            continue;
        }
        tok.push_back(static_cast<char>(ch));
    }
    return tok;
}

inline Tensor load_ppm(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(path, "cannot open");
    if (read_token(in) != "P6")
        fail(path, "not a binary PPM (P6)");
    std::size_t w = 0, h = 0, maxval = 0;
    try {
        w = std::stoul(read_token(in));
        h = std::stoul(read_token(in));
        maxval = std::stoul(read_token(in));
    } catch (const std::exception&) {
        fail(path, "malformed PPM header");
    }
    if (w == 0 || h == 0 || maxval != 255)
        fail(path, "unsupported PPM geometry or maxval (need 8-bit)");
    std::vector<std::uint8_t> bytes(w * h * 3);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (static_cast<std::size_t>(in.gcount()) != bytes.size())
        fail(path, "truncated PPM data");
    return from_bytes(bytes, h, w, 3);
}

inline Tensor load_png(const fs::path& path)
{
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.string().c_str()))
        fail(path, image.message);
    const bool gray = (image.format & PNG_FORMAT_FLAG_COLOR) == 0;
    image.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    std::vector<std::uint8_t> bytes(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, bytes.data(), 0, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        fail(path, msg);
    }
    return from_bytes(bytes, image.height, image.width, gray ? 1 : 3);
}

} // namespace detail

/// Loads an 8-bit PNG (gray or RGB; alpha dropped) or binary PPM into [0,1].
inline Tensor load_image(const fs::path& path)
{
    if (!fs::exists(path))
        detail::fail(path, "no such file");
    const std::string ext = lower_extension(path);
    if (ext == ".png")
        return detail::load_png(path);
    if (ext == ".ppm")
        return detail::load_ppm(path);
    detail::fail(path, "unsupported format '" + ext + "' (expected .png or .ppm)");
}

/// Height and width without decoding pixel data (PNG) or with a header read (PPM).
inline std::pair<std::size_t, std::size_t> image_dimensions(const fs::path& path)
{
    if (lower_extension(path) == ".png") {
        png_image image{};
        image.version = PNG_IMAGE_VERSION;
        if (!png_image_begin_read_from_file(&image, path.string().c_str()))
            detail::fail(path, image.message);
        const std::pair<std::size_t, std::size_t> dims{image.height, image.width};
        png_image_free(&image);
        return dims;
    }
    const Tensor t = load_image(path);
    return {t.height(), t.width()};
}

/// Saves 1- or 3-channel tensors; format chosen by extension.
inline void save_image(const fs::path& path, const Tensor& t)
{
    if (t.channels() != 1 && t.channels() != 3)
        detail::fail(path, "can only save 1 or 3 channels, got " + t.shape().str());
    std::vector<std::uint8_t> bytes(t.size());
    std::transform(t.data().begin(), t.data().end(), bytes.begin(), to_byte);
    const std::string ext = lower_extension(path);
    if (ext == ".png") {
        png_image image{};
        image.version = PNG_IMAGE_VERSION;
        image.width = static_cast<png_uint_32>(t.width());
        image.height = static_cast<png_uint_32>(t.height());
        image.format = t.channels() == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
        if (!png_image_write_to_file(&image, path.string().c_str(), 0, bytes.data(), 0, nullptr))
            detail::fail(path, image.message);
        return;
    }
    if (ext == ".ppm") {
        if (t.channels() != 3)
            detail::fail(path, "PPM output needs 3 channels");
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out)
            detail::fail(path, "cannot open for writing");
        out << "P6\n" << t.width() << " " << t.height() << "\n255\n";
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!out)
            detail::fail(path, "write failed");
        return;
    }
    detail::fail(path, "unsupported output format '" + ext + "'");
}

/// Replicates a gray channel to RGB; 3-channel input is returned unchanged.
inline Tensor to_rgb(const Tensor& t)
{
    if (t.channels() == 3)
        return t;
    if (t.channels() != 1)
        throw Error("to_rgb: unsupported channel count in " + t.shape().str());
    Tensor out(t.height(), t.width(), 3);
    for (std::size_t i = 0; i < t.height() * t.width(); ++i)
        for (std::size_t c = 0; c < 3; ++c)
            out.data()[i * 3 + c] = t.data()[i];
    return out;
}

/// Image files directly inside `dir`, sorted by filename.
inline std::vector<fs::path> list_images(const fs::path& dir)
{
    if (!fs::is_directory(dir))
        throw Error("not a directory: " + dir.string());
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && is_image_file(e.path()))
            out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace derain::io
