#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "retistack/error.hpp"

namespace retistack {

// H x W x 3 interleaved raster, values in [0,1] until z-score normalization.
struct ImageBuffer {
    int height = 0;
    int width = 0;
    int channels = 3;
    std::vector<float> data;

    ImageBuffer() = default;
    ImageBuffer(int h, int w, float fill = 0.0f)
        : height(h), width(w), data(static_cast<std::size_t>(h) * w * 3, fill) {}

    float& at(int y, int x, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
    float at(int y, int x, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
};

struct CameraProfile {
    int native_width = 0;
    int native_height = 0;
    int crop_size = 0; // square crop applied after padding
};

struct ArchPreset {
    std::string name;
    int input_size = 0; // square model input
};

struct NormalizationStats {
    // Channel statistics of the usual large-scale natural-image corpus;
    // overridable from config.
    double mean[3] = {0.485, 0.456, 0.406};
    double std[3] = {0.229, 0.224, 0.225};

    void validate() const {
        for (double s : std)
            if (!(s > 0.0)) fail_validation("normalization std must be > 0");
    }
};

// Pads to max(H,W) x max(H,W) with the content centered. Fill is black by
// default: the area around a fundus disc is black, so padding stays neutral.
inline ImageBuffer square_pad(const ImageBuffer& img, float fill = 0.0f) {
    const int side = std::max(img.height, img.width);
    if (side == img.height && side == img.width) return img;
    ImageBuffer out(side, side, fill);
    const int y0 = (side - img.height) / 2;
    const int x0 = (side - img.width) / 2;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) out.at(y0 + y, x0 + x, c) = img.at(y, x, c);
    return out;
}

inline ImageBuffer center_crop(const ImageBuffer& img, int size) {
    if (size > img.height || size > img.width)
        fail_validation("center_crop size exceeds image dimensions");
    if (size == img.height && size == img.width) return img;
    ImageBuffer out(size, size);
    const int y0 = (img.height - size) / 2;
    const int x0 = (img.width - size) / 2;
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y0 + y, x0 + x, c);
    return out;
}

// Bilinear with half-pixel-center alignment; samples outside the source clamp
// to the border.
inline ImageBuffer resize_bilinear(const ImageBuffer& img, int size) {
    if (size <= 0) fail_validation("resize size must be > 0");
    if (size == img.height && size == img.width) return img;
    ImageBuffer out(size, size);
    const double scale_y = static_cast<double>(img.height) / size;
    const double scale_x = static_cast<double>(img.width) / size;
    for (int y = 0; y < size; ++y) {
        const double sy = (y + 0.5) * scale_y - 0.5;
        const int y0 = static_cast<int>(std::floor(sy));
        const double fy = sy - y0;
        const int ya = std::clamp(y0, 0, img.height - 1);
        const int yb = std::clamp(y0 + 1, 0, img.height - 1);
        for (int x = 0; x < size; ++x) {
            const double sx = (x + 0.5) * scale_x - 0.5;
            const int x0 = static_cast<int>(std::floor(sx));
            const double fx = sx - x0;
            const int xa = std::clamp(x0, 0, img.width - 1);
            const int xb = std::clamp(x0 + 1, 0, img.width - 1);
            for (int c = 0; c < 3; ++c) {
                const double top = img.at(ya, xa, c) * (1.0 - fx) + img.at(ya, xb, c) * fx;
                const double bot = img.at(yb, xa, c) * (1.0 - fx) + img.at(yb, xb, c) * fx;
                out.at(y, x, c) = static_cast<float>(top * (1.0 - fy) + bot * fy);
            }
        }
    }
    return out;
}

// out = (in - mean) / std per channel; output values are unbounded.
inline ImageBuffer normalize_zscore(const ImageBuffer& img, const NormalizationStats& stats) {
    stats.validate();
    ImageBuffer out = img;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c)
                out.at(y, x, c) =
                    static_cast<float>((static_cast<double>(img.at(y, x, c)) - stats.mean[c]) /
                                       stats.std[c]);
    return out;
}

// Full deterministic chain: square pad -> center crop at the camera's crop
// size -> resize to the architecture input -> z-score. A crop_size of 0
// means pad-only (the fallback for unrecognized camera resolutions).
inline ImageBuffer preprocess(const ImageBuffer& img, const CameraProfile& cam,
                              const ArchPreset& arch, const NormalizationStats& stats) {
    ImageBuffer work = square_pad(img);
    if (cam.crop_size > 0) work = center_crop(work, cam.crop_size);
    work = resize_bilinear(work, arch.input_size);
    return normalize_zscore(work, stats);
}

// The three capture devices of the reference dataset, matched by exact
// native resolution.
inline const std::vector<CameraProfile>& default_camera_profiles() {
    static const std::vector<CameraProfile> profiles = {
        {4288, 2848, 3464},
        {2048, 1536, 1536},
        {2144, 1424, 1424},
    };
    return profiles;
}

// Returns the matching profile, or a pad-only profile (crop_size 0) when the
// resolution is unknown; `matched` reports which case occurred.
inline CameraProfile match_camera_profile(int width, int height,
                                          const std::vector<CameraProfile>& profiles,
                                          bool* matched = nullptr) {
    for (const auto& p : profiles) {
        if (p.native_width == width && p.native_height == height) {
            if (matched) *matched = true;
            return p;
        }
    }
    if (matched) *matched = false;
    return CameraProfile{width, height, 0};
}

// 380 for the B4-scaled model, 299 for the inception-style one, 224 for the
// rest (244 is accepted from config for strict reproduction).
inline const std::vector<ArchPreset>& default_arch_presets() {
    static const std::vector<ArchPreset> presets = {
        {"efficientnetb4", 380},
        {"inceptionv3", 299},
        {"default", 224},
    };
    return presets;
}

} // namespace retistack
