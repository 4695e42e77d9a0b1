#pragma once

#include "flowvo/estimator.hpp"
#include "flowvo/image.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace flowvo {

/// Disjoint k x k patch partition of an (optionally center-cropped) map.
struct PatchGrid {
    int patch_size = 0;
    int rows = 0; // h = H/k
    int cols = 0; // w = W/k
    int row_offset = 0;
    int col_offset = 0;

    int patch_count() const { return rows * cols; }

    /// Top-left pixel (row, col) of patch (l, m) in full-map coordinates.
    std::pair<int, int> patch_origin(int l, int m) const {
        return {row_offset + l * patch_size, col_offset + m * patch_size};
    }
};

struct GlobalPose {
    Eigen::Vector3d rotation = Eigen::Vector3d::Zero();    // Euler angles (rad)
    Eigen::Vector3d translation = Eigen::Vector3d::Zero(); // scene units

    MotionSE3 motion() const {
        return {EulerAngles::from_vector(rotation), translation};
    }
    static GlobalPose from_motion(const MotionSE3& m) {
        return {m.rotation.vector(), m.translation};
    }
};

/// Printed form of the fusion weights uses exp(+u); `negated` gives low
/// uncertainty the high weight and is the default everywhere.
enum class WeightSign { negated, as_printed };

inline PatchGrid partition(int height, int width, int patch_size) {
    if (patch_size < 1)
        throw std::invalid_argument("partition: patch size must be >= 1");
    if (patch_size > std::min(height, width))
        throw std::invalid_argument("partition: patch size exceeds image");
    PatchGrid grid;
    grid.patch_size = patch_size;
    grid.rows = height / patch_size;
    grid.cols = width / patch_size;
    // Non-divisible maps are center-cropped to the largest multiple.
    grid.row_offset = (height - grid.rows * patch_size) / 2;
    grid.col_offset = (width - grid.cols * patch_size) / 2;
    return grid;
}

/// Per-patch, per-channel argmin pixel of the uncertainty map. Ties go to the
/// lowest row-major pixel index. Returned as linear indices into the full
/// map, one Vector3i per patch in patch row-major order.
inline std::vector<Eigen::Vector3i> select_pixels(const Vec3Map& uncertainty,
                                                  const PatchGrid& grid) {
    std::vector<Eigen::Vector3i> selected;
    selected.reserve(grid.patch_count());
    for (int l = 0; l < grid.rows; ++l) {
        for (int m = 0; m < grid.cols; ++m) {
            const auto [r0, c0] = grid.patch_origin(l, m);
            Eigen::Vector3i best_index;
            Eigen::Vector3d best_value;
            bool first = true;
            for (int r = r0; r < r0 + grid.patch_size; ++r) {
                for (int c = c0; c < c0 + grid.patch_size; ++c) {
                    const std::size_t idx = uncertainty.index(r, c);
                    const Eigen::Vector3d& value = uncertainty[idx];
                    if (first) {
                        best_index.setConstant(static_cast<int>(idx));
                        best_value = value;
                        first = false;
                        continue;
                    }
                    for (int ch = 0; ch < 3; ++ch) {
                        if (value[ch] < best_value[ch]) {
                            best_value[ch] = value[ch];
                            best_index[ch] = static_cast<int>(idx);
                        }
                    }
                }
            }
            selected.push_back(best_index);
        }
    }
    return selected;
}

struct AggregatedChannelMap {
    Eigen::Vector3d value = Eigen::Vector3d::Zero();
    std::vector<Eigen::Vector3d> weights; // per patch, per channel; sums to 1
};

/// Softmax fusion of the per-patch selected pixels, independently per channel.
/// Weights are computed with max-subtraction so they never overflow.
inline AggregatedChannelMap aggregate_map(const Vec3Map& values, const Vec3Map& uncertainty,
                                          const PatchGrid& grid,
                                          WeightSign sign = WeightSign::negated) {
    if (!values.same_shape(uncertainty))
        throw std::invalid_argument("aggregate_map: shape mismatch");
    const std::vector<Eigen::Vector3i> selected = select_pixels(uncertainty, grid);
    const double sign_factor = (sign == WeightSign::negated) ? -1.0 : 1.0;

    AggregatedChannelMap out;
    out.weights.assign(selected.size(), Eigen::Vector3d::Zero());
    for (int ch = 0; ch < 3; ++ch) {
        double max_logit = -std::numeric_limits<double>::infinity();
        for (const Eigen::Vector3i& pick : selected)
            max_logit = std::max(max_logit, sign_factor * uncertainty[pick[ch]][ch]);

        double normalizer = 0.0;
        for (std::size_t p = 0; p < selected.size(); ++p) {
            const double logit = sign_factor * uncertainty[selected[p][ch]][ch];
            const double w = std::exp(logit - max_logit);
            out.weights[p][ch] = w;
            normalizer += w;
        }
        double accumulated = 0.0;
        for (std::size_t p = 0; p < selected.size(); ++p) {
            out.weights[p][ch] /= normalizer;
            accumulated += out.weights[p][ch] * values[selected[p][ch]][ch];
        }
        out.value[ch] = accumulated;
    }
    return out;
}

/// The full selection module: patch argmin plus softmax fusion for both the
/// rotation and translation maps.
inline GlobalPose aggregate(const PixelwisePose& pose, const PatchGrid& grid,
                            WeightSign sign = WeightSign::negated) {
    GlobalPose global;
    global.rotation = aggregate_map(pose.rotation, pose.s_rotation, grid, sign).value;
    global.translation = aggregate_map(pose.translation, pose.s_translation, grid, sign).value;
    return global;
}

/// Uniform average of the pixel-wise maps; the no-selection baseline.
inline GlobalPose average_pose(const PixelwisePose& pose) {
    GlobalPose global;
    std::vector<double> buffer(pose.rotation.size());
    for (int ch = 0; ch < 3; ++ch) {
        for (std::size_t i = 0; i < pose.rotation.size(); ++i)
            buffer[i] = pose.rotation[i][ch];
        global.rotation[ch] = detail::pairwise_sum(buffer) / static_cast<double>(buffer.size());
        for (std::size_t i = 0; i < pose.translation.size(); ++i)
            buffer[i] = pose.translation[i][ch];
        global.translation[ch] = detail::pairwise_sum(buffer) / static_cast<double>(buffer.size());
    }
    return global;
}

} // namespace flowvo
