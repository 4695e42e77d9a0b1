#pragma once

#include "flowvo/estimator.hpp"
#include "flowvo/image.hpp"

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>
#include <vector>

namespace flowvo {

/// Rotation error: plain Euclidean distance between Euler 3-vectors.
inline double rotation_error(const Eigen::Vector3d& x, const Eigen::Vector3d& y) {
    return (x - y).norm();
}

/// Translation error: direction mismatch plus squared magnitude mismatch,
///   ||<x> - <y>|| + (||x|| - ||y||)^2.
/// The normalization of an exactly-zero vector is defined as zero.
inline double translation_error(const Eigen::Vector3d& x, const Eigen::Vector3d& y) {
    auto normalized = [](const Eigen::Vector3d& v) -> Eigen::Vector3d {
        const double n = v.norm();
        return n == 0.0 ? Eigen::Vector3d::Zero().eval() : (v / n).eval();
    };
    const double direction = (normalized(x) - normalized(y)).norm();
    const double magnitude = x.norm() - y.norm();
    return direction + magnitude * magnitude;
}

/// Heteroscedastic loss over per-pixel errors E and log variances s:
///   (1/N) sum_p exp(-s(p)) * E(p) + s(p).
inline double uncertainty_loss(const ScalarMap& error, const ScalarMap& s) {
    if (!error.same_shape(s))
        throw std::invalid_argument("uncertainty_loss: shape mismatch");
    std::vector<double> terms(error.size());
    for (std::size_t i = 0; i < error.size(); ++i)
        terms[i] = std::exp(-s[i]) * error[i] + s[i];
    return detail::pairwise_sum(terms) / static_cast<double>(terms.size());
}

struct UncertaintyLossGradient {
    ScalarMap d_error; // exp(-s)/N per pixel
    ScalarMap d_s;     // (1 - exp(-s) * E)/N per pixel
};

inline UncertaintyLossGradient uncertainty_loss_gradient(const ScalarMap& error,
                                                         const ScalarMap& s) {
    if (!error.same_shape(s))
        throw std::invalid_argument("uncertainty_loss_gradient: shape mismatch");
    const double n = static_cast<double>(error.size());
    UncertaintyLossGradient grad{ScalarMap(error.height(), error.width()),
                                 ScalarMap(error.height(), error.width())};
    for (std::size_t i = 0; i < error.size(); ++i) {
        const double attenuation = std::exp(-s[i]);
        grad.d_error[i] = attenuation / n;
        grad.d_s[i] = (1.0 - attenuation * error[i]) / n;
    }
    return grad;
}

/// Flow reconstruction loss: mean over pixels of the per-pixel L2 norm of the
/// flow difference, optionally weighted per pixel.
inline double flow_recon_loss(const FlowMap& pred, const FlowMap& gt,
                              const ScalarMap* weights = nullptr) {
    if (!pred.same_shape(gt))
        throw std::invalid_argument("flow_recon_loss: shape mismatch");
    if (weights && !weights->same_shape(pred))
        throw std::invalid_argument("flow_recon_loss: weight shape mismatch");
    std::vector<double> terms(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double norm = (pred[i] - gt[i]).norm();
        terms[i] = weights ? (*weights)[i] * norm : norm;
    }
    return detail::pairwise_sum(terms) / static_cast<double>(terms.size());
}

struct DepthReconLoss {
    double value = 0.0;
    int valid_count = 0; // zero means no valid pixel contributed
};

/// Depth reconstruction loss: mean absolute error over splat-covered pixels.
inline DepthReconLoss depth_recon_loss(const DepthMap& pred, const DepthMap& gt,
                                       const MaskMap& valid,
                                       const ScalarMap* weights = nullptr) {
    if (!pred.same_shape(gt) || !pred.same_shape(valid))
        throw std::invalid_argument("depth_recon_loss: shape mismatch");
    if (weights && !weights->same_shape(pred))
        throw std::invalid_argument("depth_recon_loss: weight shape mismatch");
    std::vector<double> terms;
    terms.reserve(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (!valid[i])
            continue;
        const double err = std::abs(pred[i] - gt[i]);
        terms.push_back(weights ? (*weights)[i] * err : err);
    }
    DepthReconLoss loss;
    loss.valid_count = static_cast<int>(terms.size());
    if (!terms.empty())
        loss.value = detail::pairwise_sum(terms) / static_cast<double>(terms.size());
    return loss;
}

struct LossBreakdown {
    double rotation = 0.0;
    double translation = 0.0;
    double depth = 0.0;
    double flow = 0.0;
    double total = 0.0;
    int depth_valid_count = 0;
};

/// Per-pixel rotation error map E^R(gamma, R~(p)).
inline ScalarMap rotation_error_map(const Vec3Map& rotation, const Eigen::Vector3d& gamma) {
    ScalarMap out(rotation.height(), rotation.width());
    for (std::size_t i = 0; i < rotation.size(); ++i)
        out[i] = rotation_error(gamma, rotation[i]);
    return out;
}

/// Per-pixel translation error map E^T(phi, T~(p)).
inline ScalarMap translation_error_map(const Vec3Map& translation, const Eigen::Vector3d& phi) {
    ScalarMap out(translation.height(), translation.width());
    for (std::size_t i = 0; i < translation.size(); ++i)
        out[i] = translation_error(phi, translation[i]);
    return out;
}

/// Total training objective: heteroscedastic rotation/translation terms plus
/// the two reconstruction terms. The 3-channel log-variance maps reduce to a
/// scalar per pixel by channel mean before entering the scalar loss form.
/// `recon_weights` optionally weights both reconstruction terms per pixel.
inline LossBreakdown total_loss(const PixelwisePose& pose, const Eigen::Vector3d& rotation_gt,
                                const Eigen::Vector3d& translation_gt,
                                const FlowMap& ego_flow_pred, const FlowMap& ego_flow_gt,
                                const DepthMap& depth_next_pred, const DepthMap& depth_next_gt,
                                const MaskMap& depth_valid,
                                const ScalarMap* recon_weights = nullptr) {
    LossBreakdown breakdown;
    breakdown.rotation = uncertainty_loss(rotation_error_map(pose.rotation, rotation_gt),
                                          channel_mean(pose.s_rotation));
    breakdown.translation =
        uncertainty_loss(translation_error_map(pose.translation, translation_gt),
                         channel_mean(pose.s_translation));
    const DepthReconLoss depth = depth_recon_loss(depth_next_pred, depth_next_gt,
                                                  depth_valid, recon_weights);
    breakdown.depth = depth.value;
    breakdown.depth_valid_count = depth.valid_count;
    breakdown.flow = flow_recon_loss(ego_flow_pred, ego_flow_gt, recon_weights);
    breakdown.total =
        breakdown.rotation + breakdown.translation + breakdown.depth + breakdown.flow;
    return breakdown;
}

} // namespace flowvo
