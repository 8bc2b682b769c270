#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "retistack/image.hpp"
#include "retistack/rng.hpp"

namespace retistack {

struct AugmentParams {
    double rotation = 0.0;          // degrees, content turns counter-clockwise
    bool flip_h = false;
    bool flip_v = false;
    double brightness_delta = 0.0;  // added per channel
    double contrast_factor = 1.0;   // scales around 0.5
    double saturation_factor = 1.0; // scales HSV saturation
    double hue_delta = 0.0;         // HSV hue shift in [0,1) turns
};

struct AugmentRanges {
    double rotation_min = 0.0;
    double rotation_max = 360.0;
    double flip_h_prob = 0.5;
    double flip_v_prob = 0.5;
    double brightness_max_delta = 0.1;
    double contrast_min = 0.9;
    double contrast_max = 1.1;
    double saturation_min = 0.9;
    double saturation_max = 1.1;
    double hue_max_delta = 0.05;
};

// Deterministic function of the seed. Draw order is fixed (rotation, flips,
// brightness, contrast, saturation, hue); zero-width ranges yield the
// identity parameters exactly.
inline AugmentParams sample_augment_params(std::uint64_t seed, const AugmentRanges& r) {
    Rng rng(seed);
    AugmentParams p;
    p.rotation = rng.uniform(r.rotation_min, r.rotation_max);
    p.flip_h = rng.bernoulli(r.flip_h_prob);
    p.flip_v = rng.bernoulli(r.flip_v_prob);
    p.brightness_delta = rng.uniform(-r.brightness_max_delta, r.brightness_max_delta);
    p.contrast_factor = rng.uniform(r.contrast_min, r.contrast_max);
    p.saturation_factor = rng.uniform(r.saturation_min, r.saturation_max);
    p.hue_delta = rng.uniform(-r.hue_max_delta, r.hue_max_delta);
    return p;
}

namespace color {

// Standard hexcone conversions, kept explicit so independent implementations
// can match within 1e-6.
//
//   M = max(r,g,b); m = min(r,g,b); C = M - m
//   V = M; S = (M > 0) ? C / M : 0
//   H = 0                          if C == 0
//     = ((g-b)/C mod 6) / 6        if M == r
//     = ((b-r)/C + 2) / 6          if M == g
//     = ((r-g)/C + 4) / 6          if M == b
inline void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
    const double maxc = std::max({r, g, b});
    const double minc = std::min({r, g, b});
    const double chroma = maxc - minc;
    v = maxc;
    s = maxc > 0.0 ? chroma / maxc : 0.0;
    if (chroma == 0.0) {
        h = 0.0;
        return;
    }
    double h6;
    if (maxc == r) {
        h6 = std::fmod((g - b) / chroma, 6.0);
        if (h6 < 0.0) h6 += 6.0;
    } else if (maxc == g) {
        h6 = (b - r) / chroma + 2.0;
    } else {
        h6 = (r - g) / chroma + 4.0;
    }
    h = h6 / 6.0;
}

//   i = floor(6h) mod 6; f = 6h - floor(6h)
//   p = v(1-s); q = v(1-sf); t = v(1-s(1-f))
//   (r,g,b) = [(v,t,p),(q,v,p),(p,v,t),(p,q,v),(t,p,v),(v,p,q)][i]
inline void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
    h -= std::floor(h); // wrap into [0,1)
    const double h6 = h * 6.0;
    const int i = static_cast<int>(h6) % 6;
    const double f = h6 - std::floor(h6);
    const double p = v * (1.0 - s);
    const double q = v * (1.0 - s * f);
    const double t = v * (1.0 - s * (1.0 - f));
    switch (i) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
    }
}

} // namespace color

namespace detail {

inline double sample_or_fill(const ImageBuffer& img, int y, int x, int c) {
    if (y < 0 || x < 0 || y >= img.height || x >= img.width) return 0.0;
    return img.at(y, x, c);
}

// Inverse-mapped rotation about the image center, bilinear, zero fill.
inline ImageBuffer rotate(const ImageBuffer& img, double degrees) {
    const double rad = degrees * 3.14159265358979323846 / 180.0;
    const double cs = std::cos(rad), sn = std::sin(rad);
    const double cx = (img.width - 1) * 0.5;
    const double cy = (img.height - 1) * 0.5;
    ImageBuffer out(img.height, img.width);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const double dx = x - cx, dy = y - cy;
            const double sx = cx + cs * dx - sn * dy;
            const double sy = cy + sn * dx + cs * dy;
            const int x0 = static_cast<int>(std::floor(sx));
            const int y0 = static_cast<int>(std::floor(sy));
            const double fx = sx - x0, fy = sy - y0;
            for (int c = 0; c < 3; ++c) {
                const double top = sample_or_fill(img, y0, x0, c) * (1.0 - fx) +
                                   sample_or_fill(img, y0, x0 + 1, c) * fx;
                const double bot = sample_or_fill(img, y0 + 1, x0, c) * (1.0 - fx) +
                                   sample_or_fill(img, y0 + 1, x0 + 1, c) * fx;
                out.at(y, x, c) = static_cast<float>(top * (1.0 - fy) + bot * fy);
            }
        }
    }
    return out;
}

inline void flip_horizontal(ImageBuffer& img) {
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width / 2; ++x)
            for (int c = 0; c < 3; ++c)
                std::swap(img.at(y, x, c), img.at(y, img.width - 1 - x, c));
}

inline void flip_vertical(ImageBuffer& img) {
    for (int y = 0; y < img.height / 2; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c)
                std::swap(img.at(y, x, c), img.at(img.height - 1 - y, x, c));
}

} // namespace detail

// Fixed op order: rotation, flips, then brightness -> contrast -> saturation
// -> hue; the result is clamped to [0,1]. Ops at their neutral parameter are
// skipped entirely, so identity params return a bit-identical image.
inline ImageBuffer augment(const ImageBuffer& img, const AugmentParams& p) {
    ImageBuffer out = (p.rotation != 0.0) ? detail::rotate(img, p.rotation) : img;
    if (p.flip_h) detail::flip_horizontal(out);
    if (p.flip_v) detail::flip_vertical(out);

    const bool do_brightness = p.brightness_delta != 0.0;
    const bool do_contrast = p.contrast_factor != 1.0;
    const bool do_hsv = p.saturation_factor != 1.0 || p.hue_delta != 0.0;
    if (!do_brightness && !do_contrast && !do_hsv) return out;

    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            double rgb[3];
            for (int c = 0; c < 3; ++c) rgb[c] = out.at(y, x, c);
            if (do_brightness)
                for (double& v : rgb) v += p.brightness_delta;
            if (do_contrast)
                for (double& v : rgb) v = 0.5 + (v - 0.5) * p.contrast_factor;
            for (double& v : rgb) v = std::clamp(v, 0.0, 1.0);
            if (do_hsv) {
                double h, s, v;
                color::rgb_to_hsv(rgb[0], rgb[1], rgb[2], h, s, v);
                s = std::clamp(s * p.saturation_factor, 0.0, 1.0);
                h += p.hue_delta;
                color::hsv_to_rgb(h, s, v, rgb[0], rgb[1], rgb[2]);
                for (double& v2 : rgb) v2 = std::clamp(v2, 0.0, 1.0);
            }
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = static_cast<float>(rgb[c]);
        }
    }
    return out;
}

} // namespace retistack
