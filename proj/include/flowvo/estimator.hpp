#pragma once

#include "flowvo/geometry.hpp"
#include "flowvo/image.hpp"

#include <Eigen/Core>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace flowvo {

/// Pixel-wise pose hypotheses with per-channel log-uncertainty maps.
struct PixelwisePose {
    Vec3Map rotation;       // Euler-rate hypothesis per pixel (rad)
    Vec3Map translation;    // translation hypothesis per pixel (scene units)
    Vec3Map s_rotation;     // log variance of the rotation estimate
    Vec3Map s_translation;  // log variance of the translation estimate
};

using DesignMatrix = Eigen::Matrix<double, 2, 6>;
using DesignMap = Image<DesignMatrix>;

inline constexpr double kLogUncertaintyMin = -20.0;
inline constexpr double kLogUncertaintyMax = 20.0;

/// First-order motion-field design: flow(p) ~= design(p) * (phi, gamma) for
/// small motion, consistent with rigid_flow. Columns 0-2 scale translation,
/// 3-5 rotation. With xb = (u-cx)/fx, yb = (v-cy)/fy, Z = depth(p):
///   translation block  [ fx/Z, 0, -fx*xb/Z ; 0, fy/Z, -fy*yb/Z ]
///   rotation block     [ -fx*xb*yb, fx*(1+xb^2), -fx*yb ;
///                        -fy*(1+yb^2), fy*xb*yb, fy*xb ]
/// Translation entries scale with 1/Z; rotation entries are depth-free.
inline DesignMap motion_field_design(const Intrinsics& k, const DepthMap& depth,
                                     const PixelGrid& grid) {
    k.validate();
    if (depth.height() != grid.height || depth.width() != grid.width)
        throw std::invalid_argument("motion_field_design: depth/grid shape mismatch");

    DesignMap design(grid.height, grid.width, DesignMatrix::Zero());
    for (int r = 0; r < grid.height; ++r) {
        for (int c = 0; c < grid.width; ++c) {
            const double z = depth(r, c);
            if (!(z > 0.0))
                throw std::domain_error("motion_field_design: non-positive depth");
            const double xb = (c - k.cx) / k.fx;
            const double yb = (r - k.cy) / k.fy;
            DesignMatrix& m = design(r, c);
            m(0, 0) = k.fx / z;
            m(0, 1) = 0.0;
            m(0, 2) = -k.fx * xb / z;
            m(1, 0) = 0.0;
            m(1, 1) = k.fy / z;
            m(1, 2) = -k.fy * yb / z;

            m(0, 3) = -k.fx * xb * yb;
            m(0, 4) = k.fx * (1.0 + xb * xb);
            m(0, 5) = -k.fx * yb;
            m(1, 3) = -k.fy * (1.0 + yb * yb);
            m(1, 4) = k.fy * xb * yb;
            m(1, 5) = k.fy * xb;
        }
    }
    return design;
}

/// Per-pixel 6-DoF least-squares fit over a k_w x k_w window (stride 1,
/// windows shifted inward at the borders so every solve sees 2*k_w^2
/// equations). Uncertainty is the log of the parameter variance estimate
///   s_c(p) = log(rms_residual^2 * cov_cc + eps),  cov = (J'J + lambda I)^-1,
/// clamped to [-20, 20]. Degenerate windows (condition number above 1e12 or
/// non-finite input) yield a zero pose at maximal uncertainty; the routine
/// never throws on conditioning and never emits non-finite values.
inline PixelwisePose estimate_pixelwise(const FlowMap& flow_total, const DepthMap& depth,
                                        const Intrinsics& k, const PixelGrid& grid,
                                        int window) {
    if (window < 5 || window % 2 == 0)
        throw std::invalid_argument("estimate_pixelwise: window must be odd and >= 5");
    if (window > grid.height || window > grid.width)
        throw std::invalid_argument("estimate_pixelwise: window exceeds image size");
    if (flow_total.height() != grid.height || flow_total.width() != grid.width ||
        !flow_total.same_shape(depth))
        throw std::invalid_argument("estimate_pixelwise: shape mismatch");

    const DesignMap design = motion_field_design(k, depth, grid);
    const int half = window / 2;
    const double lambda = 1e-8;
    const double eps = 1e-12;
    const double n_equations = 2.0 * window * window;

    PixelwisePose pose{Vec3Map(grid.height, grid.width), Vec3Map(grid.height, grid.width),
                       Vec3Map(grid.height, grid.width), Vec3Map(grid.height, grid.width)};

    auto mark_degenerate = [&pose](int r, int c) {
        pose.rotation(r, c).setZero();
        pose.translation(r, c).setZero();
        pose.s_rotation(r, c).setConstant(kLogUncertaintyMax);
        pose.s_translation(r, c).setConstant(kLogUncertaintyMax);
    };

    using Matrix6 = Eigen::Matrix<double, 6, 6>;
    using Vector6 = Eigen::Matrix<double, 6, 1>;

    for (int r = 0; r < grid.height; ++r) {
        const int r0 = std::clamp(r - half, 0, grid.height - window);
        for (int c = 0; c < grid.width; ++c) {
            const int c0 = std::clamp(c - half, 0, grid.width - window);

            Matrix6 jtj = Matrix6::Zero();
            Vector6 jtf = Vector6::Zero();
            for (int wr = r0; wr < r0 + window; ++wr) {
                for (int wc = c0; wc < c0 + window; ++wc) {
                    const DesignMatrix& j = design(wr, wc);
                    const Eigen::Vector2d& f = flow_total(wr, wc);
                    jtj.noalias() += j.transpose() * j;
                    jtf.noalias() += j.transpose() * f;
                }
            }

            if (!jtj.allFinite() || !jtf.allFinite()) {
                mark_degenerate(r, c);
                continue;
            }

            Eigen::SelfAdjointEigenSolver<Matrix6> eigen(jtj, Eigen::EigenvaluesOnly);
            const double ev_min = eigen.eigenvalues().minCoeff();
            const double ev_max = eigen.eigenvalues().maxCoeff();
            if (!(ev_min > 0.0) || !(ev_max / ev_min < 1e12)) {
                mark_degenerate(r, c);
                continue;
            }

            const Matrix6 damped = jtj + lambda * Matrix6::Identity();
            const Vector6 theta = damped.ldlt().solve(jtf);
            if (!theta.allFinite()) {
                mark_degenerate(r, c);
                continue;
            }

            double ssr = 0.0;
            for (int wr = r0; wr < r0 + window; ++wr) {
                for (int wc = c0; wc < c0 + window; ++wc) {
                    const Eigen::Vector2d residual =
                        design(wr, wc) * theta - flow_total(wr, wc);
                    ssr += residual.squaredNorm();
                }
            }
            const double rms2 = ssr / n_equations;

            const Matrix6 covariance = damped.inverse();
            pose.translation(r, c) = theta.head<3>();
            pose.rotation(r, c) = theta.tail<3>();
            for (int ch = 0; ch < 3; ++ch) {
                const double st = std::log(rms2 * covariance(ch, ch) + eps);
                const double sr = std::log(rms2 * covariance(3 + ch, 3 + ch) + eps);
                pose.s_translation(r, c)[ch] =
                    std::clamp(st, kLogUncertaintyMin, kLogUncertaintyMax);
                pose.s_rotation(r, c)[ch] =
                    std::clamp(sr, kLogUncertaintyMin, kLogUncertaintyMax);
            }
            if (!pose.s_translation(r, c).allFinite() || !pose.s_rotation(r, c).allFinite())
                mark_degenerate(r, c);
        }
    }
    return pose;
}

} // namespace flowvo
