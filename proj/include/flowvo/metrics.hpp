#pragma once

#include "flowvo/image.hpp"
#include "flowvo/selection.hpp"

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace flowvo {

/// Reduction of the per-component L1 pose error.
enum class L1Reduce { mean, sum };

/// EPE convention: per-pixel channel-sum L1 (the default here) or the
/// conventional per-pixel L2 norm, both averaged over pixels.
enum class EpeNorm { l1, l2 };

struct PoseErrors {
    double r_err = 0.0; // rad
    double t_err = 0.0; // scene units
};

inline PoseErrors pose_errors(const GlobalPose& pred, const GlobalPose& gt,
                              L1Reduce reduce = L1Reduce::mean) {
    if (!finite(pred.rotation) || !finite(pred.translation) || !finite(gt.rotation) ||
        !finite(gt.translation))
        throw std::invalid_argument("pose_errors: non-finite pose");
    const Eigen::Vector3d dr = (pred.rotation - gt.rotation).cwiseAbs();
    const Eigen::Vector3d dt = (pred.translation - gt.translation).cwiseAbs();
    const double scale = reduce == L1Reduce::mean ? 1.0 / 3.0 : 1.0;
    return {dr.sum() * scale, dt.sum() * scale};
}

inline double epe(const FlowMap& pred, const FlowMap& gt, EpeNorm norm = EpeNorm::l1) {
    if (!pred.same_shape(gt))
        throw std::invalid_argument("epe: shape mismatch");
    if (pred.empty())
        throw std::invalid_argument("epe: empty flow field");
    std::vector<double> terms(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const Eigen::Vector2d d = pred[i] - gt[i];
        terms[i] = norm == EpeNorm::l1 ? std::abs(d.x()) + std::abs(d.y()) : d.norm();
    }
    return detail::pairwise_sum(terms) / static_cast<double>(terms.size());
}

struct SceneEval {
    std::string scene;
    double r_err = 0.0;
    double t_err = 0.0;
    double epe = 0.0;
};

struct EvalReport {
    std::vector<SceneEval> scenes;
    double mean_r_err = 0.0;
    double mean_t_err = 0.0;
    double mean_epe = 0.0;

    void finalize() {
        mean_r_err = mean_t_err = mean_epe = 0.0;
        if (scenes.empty())
            return;
        for (const SceneEval& s : scenes) {
            mean_r_err += s.r_err;
            mean_t_err += s.t_err;
            mean_epe += s.epe;
        }
        const double n = static_cast<double>(scenes.size());
        mean_r_err /= n;
        mean_t_err /= n;
        mean_epe /= n;
    }
};

} // namespace flowvo
