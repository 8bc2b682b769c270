#pragma once

#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "retistack/error.hpp"
#include "retistack/image.hpp"

namespace retistack {

namespace io_detail {

inline std::vector<std::uint8_t> read_binary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail_validation("cannot open image: " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return bytes;
}

inline std::uint32_t be32(const std::uint8_t* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

inline void put_le32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline std::uint32_t get_le32(const std::uint8_t* p) {
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
           (std::uint32_t(p[3]) << 24);
}

inline std::uint8_t paeth(std::uint8_t a, std::uint8_t b, std::uint8_t c) {
    const int p = int(a) + int(b) - int(c);
    const int pa = std::abs(p - int(a));
    const int pb = std::abs(p - int(b));
    const int pc = std::abs(p - int(c));
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

} // namespace io_detail

// --- PNG (8-bit RGB / RGBA, non-interlaced; alpha is discarded) -------------

inline ImageBuffer load_png(const std::filesystem::path& path) {
    using namespace io_detail;
    auto bytes = read_binary(path);
    static const std::uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
    if (bytes.size() < 8 || std::memcmp(bytes.data(), sig, 8) != 0)
        fail_validation("not a PNG file: " + path.string());

    std::uint32_t width = 0, height = 0;
    int bpp = 0;
    bool saw_ihdr = false, saw_iend = false;
    std::vector<std::uint8_t> idat;

    std::size_t pos = 8;
    while (pos + 8 <= bytes.size()) {
        const std::uint32_t length = be32(&bytes[pos]);
        const char* type = reinterpret_cast<const char*>(&bytes[pos + 4]);
        if (pos + 12 + length > bytes.size()) fail_validation("truncated PNG: " + path.string());
        const std::uint8_t* data = &bytes[pos + 8];

        const std::uint32_t crc_stored = be32(&bytes[pos + 8 + length]);
        std::uint32_t crc = ::crc32(0L, &bytes[pos + 4], length + 4);
        if (crc != crc_stored) fail_validation("PNG chunk CRC mismatch: " + path.string());

        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (length != 13) fail_validation("bad IHDR: " + path.string());
            width = be32(data);
            height = be32(data + 4);
            const int bit_depth = data[8], color_type = data[9];
            const int compression = data[10], filter = data[11], interlace = data[12];
            if (bit_depth != 8 || (color_type != 2 && color_type != 6))
                fail_validation("unsupported PNG format (need 8-bit RGB or RGBA): " + path.string());
            if (compression != 0 || filter != 0 || interlace != 0)
                fail_validation("unsupported PNG encoding (interlace/compression): " + path.string());
            bpp = color_type == 2 ? 3 : 4;
            saw_ihdr = true;
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), data, data + length);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            saw_iend = true;
            break;
        }
        pos += 12 + length;
    }
    if (!saw_ihdr || !saw_iend || idat.empty() || width == 0 || height == 0)
        fail_validation("malformed PNG: " + path.string());

    const std::size_t stride = std::size_t(width) * bpp;
    std::vector<std::uint8_t> raw(std::size_t(height) * (stride + 1));
    uLongf raw_len = static_cast<uLongf>(raw.size());
    if (::uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
        raw_len != raw.size())
        fail_validation("PNG inflate failed: " + path.string());

    // Undo per-scanline filters in place.
    std::vector<std::uint8_t> prior(stride, 0);
    ImageBuffer img(static_cast<int>(height), static_cast<int>(width));
    for (std::uint32_t y = 0; y < height; ++y) {
        std::uint8_t* line = &raw[std::size_t(y) * (stride + 1)];
        const std::uint8_t filter = line[0];
        std::uint8_t* cur = line + 1;
        for (std::size_t i = 0; i < stride; ++i) {
            const std::uint8_t a = i >= std::size_t(bpp) ? cur[i - bpp] : 0;
            const std::uint8_t b = prior[i];
            const std::uint8_t c = i >= std::size_t(bpp) ? prior[i - bpp] : 0;
            switch (filter) {
            case 0: break;
            case 1: cur[i] = std::uint8_t(cur[i] + a); break;
            case 2: cur[i] = std::uint8_t(cur[i] + b); break;
            case 3: cur[i] = std::uint8_t(cur[i] + ((int(a) + int(b)) >> 1)); break;
            case 4: cur[i] = std::uint8_t(cur[i] + paeth(a, b, c)); break;
            default: fail_validation("bad PNG filter byte: " + path.string());
            }
        }
        std::memcpy(prior.data(), cur, stride);
        for (std::uint32_t x = 0; x < width; ++x)
            for (int ch = 0; ch < 3; ++ch)
                img.at(int(y), int(x), ch) = float(cur[std::size_t(x) * bpp + ch]) / 255.0f;
    }
    return img;
}

// --- PPM (binary P6, 8-bit) -------------------------------------------------

inline ImageBuffer load_ppm(const std::filesystem::path& path) {
    auto bytes = io_detail::read_binary(path);
    std::size_t pos = 0;
    auto next_token = [&]() -> std::string {
        while (pos < bytes.size()) {
            if (std::isspace(bytes[pos])) { ++pos; continue; }
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
                continue;
            }
            break;
        }
        std::string tok;
        while (pos < bytes.size() && !std::isspace(bytes[pos])) tok.push_back(char(bytes[pos++]));
        return tok;
    };

    if (next_token() != "P6") fail_validation("not a binary PPM (P6): " + path.string());
    const long width = std::stol(next_token());
    const long height = std::stol(next_token());
    const long maxval = std::stol(next_token());
    if (width <= 0 || height <= 0) fail_validation("bad PPM dimensions: " + path.string());
    if (maxval != 255) fail_validation("only 8-bit PPM supported: " + path.string());
    ++pos; // single whitespace after maxval

    const std::size_t need = std::size_t(width) * height * 3;
    if (bytes.size() - pos < need) fail_validation("truncated PPM: " + path.string());

    ImageBuffer img(int(height), int(width));
    for (std::size_t i = 0; i < need; ++i)
        img.data[i] = float(bytes[pos + i]) / 255.0f;
    return img;
}

// Values are clamped to [0,1] on write; callers export pre-normalization
// rasters here, normalized tensors go through the float format below.
inline void save_ppm(const ImageBuffer& img, const std::filesystem::path& path) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail_validation("cannot write PPM: " + path.string());
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    for (float v : img.data) {
        const float clamped = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
        out.put(char(static_cast<int>(clamped * 255.0f + 0.5f)));
    }
}

// Dispatch on extension (.png / .ppm).
inline ImageBuffer load_image(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".png" || ext == ".PNG") return load_png(path);
    if (ext == ".ppm" || ext == ".PPM") return load_ppm(path);
    fail_validation("unsupported image format: " + path.string());
}

// --- raw float tensor: "FENS", u32 H, u32 W, u32 C, then f32 data (LE) ------

inline void save_tensor(const ImageBuffer& img, const std::filesystem::path& path) {
    std::string out;
    out.reserve(16 + img.data.size() * 4);
    out += "FENS";
    io_detail::put_le32(out, std::uint32_t(img.height));
    io_detail::put_le32(out, std::uint32_t(img.width));
    io_detail::put_le32(out, std::uint32_t(img.channels));
    for (float v : img.data) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        io_detail::put_le32(out, bits);
    }
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) fail_validation("cannot write tensor: " + path.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

inline ImageBuffer load_tensor(const std::filesystem::path& path) {
    auto bytes = io_detail::read_binary(path);
    if (bytes.size() < 16 || std::memcmp(bytes.data(), "FENS", 4) != 0)
        fail_validation("not a tensor file: " + path.string());
    const std::uint32_t h = io_detail::get_le32(&bytes[4]);
    const std::uint32_t w = io_detail::get_le32(&bytes[8]);
    const std::uint32_t c = io_detail::get_le32(&bytes[12]);
    if (c != 3) fail_validation("tensor channel count must be 3: " + path.string());
    const std::size_t need = 16 + std::size_t(h) * w * c * 4;
    if (bytes.size() != need) fail_validation("tensor size mismatch: " + path.string());
    ImageBuffer img(int(h), int(w));
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        const std::uint32_t bits = io_detail::get_le32(&bytes[16 + i * 4]);
        std::memcpy(&img.data[i], &bits, 4);
    }
    return img;
}

} // namespace retistack
