#pragma once

#include "flowvo/image.hpp"

#include <Eigen/Core>
#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace flowvo {

inline bool finite(double v) { return std::isfinite(v); }

template <typename Derived>
bool finite(const Eigen::MatrixBase<Derived>& m) {
    return m.allFinite();
}

/// Pinhole camera matrix K, stored by its four defining entries.
struct Intrinsics {
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;

    void validate() const {
        if (!(fx > 0.0) || !(fy > 0.0))
            throw std::invalid_argument("Intrinsics: focal lengths must be positive");
        if (!finite(fx) || !finite(fy) || !finite(cx) || !finite(cy))
            throw std::invalid_argument("Intrinsics: non-finite entry");
    }

    Eigen::Matrix3d matrix() const {
        Eigen::Matrix3d k;
        k << fx, 0.0, cx,
             0.0, fy, cy,
             0.0, 0.0, 1.0;
        return k;
    }

    /// K^-1 (u, v, 1): film-space ray with unit z.
    Eigen::Vector3d normalized(double u, double v) const {
        return {(u - cx) / fx, (v - cy) / fy, 1.0};
    }

    /// Projects a camera-frame point with positive z back to pixel coordinates.
    Eigen::Vector2d project(const Eigen::Vector3d& p) const {
        return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy};
    }
};

struct EulerAngles {
    double rx = 0.0;
    double ry = 0.0;
    double rz = 0.0;

    Eigen::Vector3d vector() const { return {rx, ry, rz}; }
    static EulerAngles from_vector(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }
    bool is_zero() const { return rx == 0.0 && ry == 0.0 && rz == 0.0; }
};

/// Euler angles to rotation matrix, composed as R = Rz * Ry * Rx.
inline Eigen::Matrix3d euler_to_rotation(const EulerAngles& angles) {
    if (!finite(angles.rx) || !finite(angles.ry) || !finite(angles.rz))
        throw std::invalid_argument("euler_to_rotation: non-finite angle");

    const double ca = std::cos(angles.rx), sa = std::sin(angles.rx);
    const double cb = std::cos(angles.ry), sb = std::sin(angles.ry);
    const double cc = std::cos(angles.rz), sc = std::sin(angles.rz);

    Eigen::Matrix3d rx, ry, rz;
    rx << 1, 0, 0,
          0, ca, -sa,
          0, sa, ca;
    ry << cb, 0, sb,
          0, 1, 0,
          -sb, 0, cb;
    rz << cc, -sc, 0,
          sc, cc, 0,
          0, 0, 1;
    return rz * ry * rx;
}

/// Inverse of euler_to_rotation for the Rz*Ry*Rx convention. Well-defined away
/// from the ry = +-pi/2 gimbal singularity.
inline EulerAngles rotation_to_euler(const Eigen::Matrix3d& r) {
    EulerAngles angles;
    angles.ry = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
    angles.rx = std::atan2(r(2, 1), r(2, 2));
    angles.rz = std::atan2(r(1, 0), r(0, 0));
    return angles;
}

/// Rigid motion: Euler rotation plus translation in scene depth units.
struct MotionSE3 {
    EulerAngles rotation;
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    Eigen::Matrix3d rotation_matrix() const { return euler_to_rotation(rotation); }

    Eigen::Matrix4d matrix() const {
        Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
        m.topLeftCorner<3, 3>() = rotation_matrix();
        m.topRightCorner<3, 1>() = translation;
        return m;
    }

    bool is_identity() const { return rotation.is_zero() && translation.isZero(0.0); }
};

/// Dense pixel lattice; coordinates are (u, v) = (column, row) at integer
/// pixel centers, row-major.
struct PixelGrid {
    int height = 0;
    int width = 0;

    std::size_t pixel_count() const {
        return static_cast<std::size_t>(height) * width;
    }

    Eigen::Vector2d pixel(int row, int col) const {
        return {static_cast<double>(col), static_cast<double>(row)};
    }

    /// Materialized H x W x 2 coordinate array.
    FlowMap coordinates() const {
        FlowMap coords(height, width);
        for (int r = 0; r < height; ++r)
            for (int c = 0; c < width; ++c)
                coords(r, c) = pixel(r, c);
        return coords;
    }
};

/// Per-pixel film-space coordinates X(p) = K^-1 (u, v, 1); z is 1 everywhere.
inline Vec3Map backproject(const PixelGrid& grid, const Intrinsics& intrinsics) {
    intrinsics.validate();
    Vec3Map out(grid.height, grid.width);
    for (int r = 0; r < grid.height; ++r)
        for (int c = 0; c < grid.width; ++c)
            out(r, c) = intrinsics.normalized(c, r);
    return out;
}

/// Applies M to depth-scaled film points: out(p) = R * (depth(p) * points(p)) + t.
inline Vec3Map transform_points(const MotionSE3& motion, const Vec3Map& points,
                                const DepthMap& depth) {
    if (!points.same_shape(depth))
        throw std::invalid_argument("transform_points: shape mismatch");
    const Eigen::Matrix3d r = motion.rotation_matrix();
    if (!finite(motion.translation))
        throw std::invalid_argument("transform_points: non-finite translation");

    Vec3Map out(points.height(), points.width());
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (!(depth[i] > 0.0))
            throw std::domain_error("transform_points: non-positive depth at pixel " +
                                    std::to_string(i));
        out[i] = r * (depth[i] * points[i]) + motion.translation;
    }
    return out;
}

} // namespace flowvo
