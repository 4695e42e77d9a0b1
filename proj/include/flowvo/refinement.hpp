#pragma once

#include "flowvo/estimator.hpp"
#include "flowvo/selection.hpp"
#include "flowvo/synthesis.hpp"

#include <Eigen/Core>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace flowvo {

struct RefineConfig {
    int max_iters = 50;
    double initial_damping = 1e-4; // Levenberg lambda, x10 on reject, /10 on accept
    double max_damping = 1e12;
    double step_tolerance = 1e-10;      // stop when the accepted step is this small
    double cost_tolerance = 1e-12;      // stop on this relative cost decrease
    double jacobian_step = 1e-7;        // central-difference step per parameter
    double near_plane = 0.5;

    void validate() const {
        if (max_iters < 1)
            throw std::invalid_argument("RefineConfig: max_iters must be >= 1");
        if (!(initial_damping > 0.0))
            throw std::invalid_argument("RefineConfig: damping must be positive");
    }
};

/// Ego flow and next-frame depth induced by a global pose; same math as
/// rigid_flow with M built from (gamma, phi).
inline RigidFlowField reconstruct_ego_flow(const GlobalPose& pose, const Intrinsics& k,
                                           const DepthMap& depth_t, const PixelGrid& grid,
                                           double near_plane = 0.5) {
    return rigid_flow(k, depth_t, pose.motion(), grid, near_plane);
}

struct RefineResult {
    GlobalPose pose;
    double cost = 0.0;
    int iterations = 0;
};

namespace detail {

inline GlobalPose apply_step(const GlobalPose& pose, const Eigen::Matrix<double, 6, 1>& delta) {
    GlobalPose out = pose;
    out.rotation += delta.head<3>();
    out.translation += delta.tail<3>();
    return out;
}

inline GlobalPose perturb(const GlobalPose& pose, int param, double amount) {
    Eigen::Matrix<double, 6, 1> delta = Eigen::Matrix<double, 6, 1>::Zero();
    delta[param] = amount;
    return apply_step(pose, delta);
}

} // namespace detail

/// Levenberg-damped Gauss-Newton on the reprojection residuals
///   r(p) = w(p) * (F~ego(pose)(p) - target(p)),
/// minimizing sum_p ||r(p)||^2 over the 6-vector (gamma, phi). The Jacobian
/// is a central finite difference of the reconstructed flow. Trial steps that
/// push points behind the near plane are rejected like any cost increase.
/// Accepted costs are monotone non-increasing; the best pose so far is
/// returned when the iteration cap is hit.
inline RefineResult refine_pose(const GlobalPose& init, const FlowMap& target,
                                const Intrinsics& k, const DepthMap& depth_t,
                                const PixelGrid& grid, const ScalarMap* weights = nullptr,
                                const RefineConfig& config = {}) {
    config.validate();
    if (target.height() != grid.height || target.width() != grid.width)
        throw std::invalid_argument("refine_pose: target/grid shape mismatch");
    if (weights && !weights->same_shape(target))
        throw std::invalid_argument("refine_pose: weight shape mismatch");
    if (!finite(init.rotation) || !finite(init.translation))
        throw std::invalid_argument("refine_pose: non-finite init");

    const std::size_t n = target.size();
    using Vector6 = Eigen::Matrix<double, 6, 1>;
    using Matrix6 = Eigen::Matrix<double, 6, 6>;

    auto residuals = [&](const GlobalPose& pose, Eigen::VectorXd& out) {
        const RigidFlowField field =
            reconstruct_ego_flow(pose, k, depth_t, grid, config.near_plane);
        out.resize(static_cast<Eigen::Index>(2 * n));
        for (std::size_t i = 0; i < n; ++i) {
            const double w = weights ? (*weights)[i] : 1.0;
            const Eigen::Vector2d r = w * (field.flow[i] - target[i]);
            out[static_cast<Eigen::Index>(2 * i)] = r.x();
            out[static_cast<Eigen::Index>(2 * i + 1)] = r.y();
        }
    };

    Eigen::VectorXd residual;
    residuals(init, residual); // behind-camera at the init propagates
    double cost = residual.squaredNorm();
    if (!std::isfinite(cost))
        throw std::invalid_argument("refine_pose: non-finite cost at init");

    GlobalPose pose = init;
    double damping = config.initial_damping;
    int iterations = 0;

    Eigen::VectorXd plus, minus, trial_residual;
    for (int iter = 0; iter < config.max_iters; ++iter) {
        // Numeric Jacobian about the current pose.
        Eigen::Matrix<double, Eigen::Dynamic, 6> jacobian(2 * n, 6);
        bool jacobian_ok = true;
        for (int p = 0; p < 6 && jacobian_ok; ++p) {
            try {
                residuals(detail::perturb(pose, p, config.jacobian_step), plus);
                residuals(detail::perturb(pose, p, -config.jacobian_step), minus);
            } catch (const BehindCameraError&) {
                jacobian_ok = false;
                break;
            }
            jacobian.col(p) = (plus - minus) / (2.0 * config.jacobian_step);
        }
        if (!jacobian_ok)
            break;

        const Vector6 gradient = jacobian.transpose() * residual;
        const Matrix6 normal = jacobian.transpose() * jacobian;
        if (gradient.lpNorm<Eigen::Infinity>() < 1e-15)
            break;

        bool accepted = false;
        while (damping <= config.max_damping) {
            const Vector6 step =
                (normal + damping * Matrix6::Identity()).ldlt().solve(-gradient);
            if (!step.allFinite())
                break;
            if (step.norm() < config.step_tolerance) {
                accepted = false;
                break;
            }
            const GlobalPose trial = detail::apply_step(pose, step);
            double trial_cost = std::numeric_limits<double>::infinity();
            try {
                residuals(trial, trial_residual);
                trial_cost = trial_residual.squaredNorm();
            } catch (const BehindCameraError&) {
                trial_cost = std::numeric_limits<double>::infinity();
            }
            if (trial_cost < cost) {
                const double relative_decrease = (cost - trial_cost) / std::max(cost, 1e-300);
                pose = trial;
                residual.swap(trial_residual);
                cost = trial_cost;
                damping = std::max(damping * 0.1, 1e-12);
                accepted = true;
                ++iterations;
                if (step.norm() < config.step_tolerance ||
                    relative_decrease < config.cost_tolerance)
                    return {pose, cost, iterations};
                break;
            }
            damping *= 10.0;
        }
        if (!accepted)
            break; // damping exhausted or step vanished: converged or stuck
    }
    return {pose, cost, iterations};
}

/// Inference-mode weights from the estimator's uncertainty: exp of the
/// negated channel-mean translation log variance, max-normalized, with pixels
/// above the keep_fraction quantile masked out entirely.
inline ScalarMap uncertainty_weights(const PixelwisePose& pose, double keep_fraction = 0.6) {
    const ScalarMap s = channel_mean(pose.s_translation);
    double cutoff = std::numeric_limits<double>::infinity();
    if (keep_fraction < 1.0) {
        std::vector<double> sorted(s.begin(), s.end());
        std::sort(sorted.begin(), sorted.end());
        const auto rank = static_cast<std::size_t>(
            std::clamp(keep_fraction, 0.0, 1.0) * (sorted.size() - 1));
        cutoff = sorted[rank];
    }
    ScalarMap weights(s.height(), s.width());
    double max_weight = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        weights[i] = s[i] <= cutoff ? std::exp(-s[i]) : 0.0;
        max_weight = std::max(max_weight, weights[i]);
    }
    if (max_weight > 0.0)
        for (std::size_t i = 0; i < s.size(); ++i)
            weights[i] /= max_weight;
    return weights;
}

} // namespace flowvo
