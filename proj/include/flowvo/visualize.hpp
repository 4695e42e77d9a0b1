#pragma once

#include "flowvo/image.hpp"
#include "flowvo/png_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

namespace flowvo {

namespace detail {

inline std::uint8_t to_byte(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

// hue in degrees [0, 360), saturation/value in [0, 1].
inline void hsv_to_rgb(double h, double s, double v, double rgb[3]) {
    const double c = v * s;
    const double hp = h / 60.0;
    const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
    double r = 0, g = 0, b = 0;
    if (hp < 1) {
        r = c, g = x;
    } else if (hp < 2) {
        r = x, g = c;
    } else if (hp < 3) {
        g = c, b = x;
    } else if (hp < 4) {
        g = x, b = c;
    } else if (hp < 5) {
        r = x, b = c;
    } else {
        r = c, b = x;
    }
    const double m = v - c;
    rgb[0] = r + m;
    rgb[1] = g + m;
    rgb[2] = b + m;
}

// Nearest-rank percentile of the flow magnitudes; q in (0, 1].
inline double magnitude_percentile(const FlowMap& flow, double q) {
    std::vector<double> mags(flow.size());
    for (std::size_t i = 0; i < flow.size(); ++i)
        mags[i] = flow[i].norm();
    std::sort(mags.begin(), mags.end());
    std::size_t rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(mags.size())));
    rank = std::min(mags.size(), std::max<std::size_t>(rank, 1));
    return mags[rank - 1];
}

} // namespace detail

/// Color-wheel rendering: hue encodes direction, saturation encodes magnitude
/// normalized by `max_magnitude` (default: the map's 99th percentile). Zero
/// flow renders white; magnitudes beyond the normalizer clamp to full
/// saturation.
inline RgbImage visualize_flow(const FlowMap& flow,
                               std::optional<double> max_magnitude = std::nullopt) {
    if (flow.empty())
        throw std::invalid_argument("visualize_flow: empty flow field");
    double norm = max_magnitude ? *max_magnitude : detail::magnitude_percentile(flow, 0.99);
    if (!(norm > 0.0))
        norm = 1.0; // all-zero map: saturation stays 0 and everything is white
    RgbImage image(flow.height(), flow.width());
    for (int r = 0; r < flow.height(); ++r)
        for (int c = 0; c < flow.width(); ++c) {
            const Eigen::Vector2d& f = flow(r, c);
            const double mag = f.norm();
            double hue = 0.0;
            if (mag > 0.0) {
                hue = std::atan2(f.y(), f.x()) * 180.0 / M_PI;
                if (hue < 0.0)
                    hue += 360.0;
                if (hue >= 360.0)
                    hue = 0.0;
            }
            const double sat = std::min(1.0, mag / norm);
            double rgb[3];
            detail::hsv_to_rgb(hue, sat, 1.0, rgb);
            for (int k = 0; k < 3; ++k)
                image.at(r, c, k) = detail::to_byte(rgb[k]);
        }
    return image;
}

/// Min/max-normalized heat map (dark blue → cyan → yellow → red) for scalar
/// diagnostics such as log-uncertainty channels. A constant map renders at
/// the low end.
inline RgbImage heat_map(const ScalarMap& map) {
    if (map.empty())
        throw std::invalid_argument("heat_map: empty map");
    double lo = map[0], hi = map[0];
    for (std::size_t i = 0; i < map.size(); ++i) {
        lo = std::min(lo, map[i]);
        hi = std::max(hi, map[i]);
    }
    const double span = hi > lo ? hi - lo : 1.0;
    // Piecewise-linear stops at t = 0, 1/3, 2/3, 1.
    const double stops[4][3] = {
        {0.05, 0.05, 0.4}, {0.0, 0.8, 0.9}, {0.95, 0.9, 0.1}, {0.8, 0.05, 0.05}};
    RgbImage image(map.height(), map.width());
    for (int r = 0; r < map.height(); ++r)
        for (int c = 0; c < map.width(); ++c) {
            const double t = std::clamp((map(r, c) - lo) / span, 0.0, 1.0) * 3.0;
            const int seg = std::min(2, static_cast<int>(t));
            const double u = t - seg;
            for (int k = 0; k < 3; ++k)
                image.at(r, c, k) =
                    detail::to_byte(stops[seg][k] * (1.0 - u) + stops[seg + 1][k] * u);
        }
    return image;
}

} // namespace flowvo
