#pragma once

#include "flowvo/geometry.hpp"
#include "flowvo/image.hpp"
#include "flowvo/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace flowvo {

/// Thrown when a transformed point lands in front of the near plane.
class BehindCameraError : public std::runtime_error {
public:
    BehindCameraError(int row, int col, double z)
        : std::runtime_error("transformed depth " + std::to_string(z) +
                             " below near plane at pixel (row=" + std::to_string(row) +
                             ", col=" + std::to_string(col) + ")"),
          row(row), col(col), z(z) {}

    int row;
    int col;
    double z;
};

class GenerationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Sampling ranges for every step of the scene generator. Each knob is an
/// explicit substitute for the corresponding training-data distribution.
struct SynthesisConfig {
    // intrinsics, as fractions of the image size
    double focal_min_scale = 0.5;
    double focal_max_scale = 1.5;
    double principal_min_scale = 0.4;
    double principal_max_scale = 0.6;

    // background depth
    double base_depth_min = 4.0;
    double base_depth_max = 12.0;
    double depth_noise_amplitude = 0.25; // fraction of the base depth
    int depth_noise_octaves = 4;
    double near_plane = 0.5;

    // motion ranges, per component
    double camera_rotation_range = 0.1;     // rad
    double camera_translation_range = 0.5;  // scene units
    double object_rotation_range = 0.2;
    double object_translation_range = 1.0;

    // moving objects (axis-aligned ellipse masks over a planar depth offset)
    int min_objects = 0;
    int max_objects = 5;
    double object_radius_min_frac = 0.05; // fraction of min(H, W)
    double object_radius_max_frac = 0.25;
    double object_depth_offset_min = 0.5;
    double object_depth_offset_max = 2.0;

    int max_motion_attempts = 32;

    void validate() const {
        auto range_ok = [](double lo, double hi) { return finite(lo) && finite(hi) && lo <= hi; };
        if (!range_ok(focal_min_scale, focal_max_scale) || focal_min_scale <= 0.0)
            throw std::invalid_argument("SynthesisConfig: bad focal range");
        if (!range_ok(principal_min_scale, principal_max_scale))
            throw std::invalid_argument("SynthesisConfig: bad principal point range");
        if (!range_ok(base_depth_min, base_depth_max) || base_depth_min <= 0.0)
            throw std::invalid_argument("SynthesisConfig: bad base depth range");
        if (depth_noise_amplitude < 0.0 || depth_noise_octaves < 1)
            throw std::invalid_argument("SynthesisConfig: bad depth noise settings");
        if (!(near_plane > 0.0))
            throw std::invalid_argument("SynthesisConfig: near plane must be positive");
        if (camera_rotation_range < 0.0 || camera_translation_range < 0.0 ||
            object_rotation_range < 0.0 || object_translation_range < 0.0)
            throw std::invalid_argument("SynthesisConfig: negative motion range");
        if (min_objects < 0 || max_objects < min_objects)
            throw std::invalid_argument("SynthesisConfig: bad object count range");
        if (!range_ok(object_radius_min_frac, object_radius_max_frac) ||
            object_radius_min_frac <= 0.0)
            throw std::invalid_argument("SynthesisConfig: bad object radius range");
        if (!range_ok(object_depth_offset_min, object_depth_offset_max) ||
            object_depth_offset_min < 0.0)
            throw std::invalid_argument("SynthesisConfig: bad depth offset range");
        if (max_motion_attempts < 1)
            throw std::invalid_argument("SynthesisConfig: max_motion_attempts must be >= 1");
    }
};

/// A moving object: ellipse mask at frame t, planar depth offset in front of
/// the background, and its rigid motion in the camera frame.
struct ObjectSpec {
    MaskMap mask;
    double depth_offset = 0.0;
    MotionSE3 motion;
};

/// Flow plus per-source-pixel transformed depth, as returned by rigid_flow.
struct RigidFlowField {
    FlowMap flow;
    DepthMap depth; // z of the transformed point, per source pixel
};

struct ObjectRecord {
    ObjectSpec spec;
    FlowMap flow; // full map; meaningful on the mask
};

/// One generated training sample.
struct SceneSample {
    Intrinsics intrinsics;
    DepthMap depth_t;    // composite frame-t depth (objects in front)
    DepthMap depth_next; // splatted next-frame depth
    MaskMap depth_next_valid; // pixels that received a splat (before hole fill)
    FlowMap flow_total;
    FlowMap flow_ego;
    std::vector<ObjectRecord> objects;
    MotionSE3 camera_motion;
    std::uint64_t seed = 0;
    std::uint64_t motion_seed = 0;
    int motion_attempts = 1;

    PixelGrid grid() const { return {depth_t.height(), depth_t.width()}; }
};

/// Step 1: sample a pinhole K. Deterministic given the seed; draw order is
/// fx, fy, cx, cy.
inline Intrinsics sample_intrinsics(std::uint64_t seed, int height, int width,
                                    const SynthesisConfig& config = {}) {
    config.validate();
    if (height < 16 || width < 16)
        throw std::invalid_argument("sample_intrinsics: image must be at least 16x16");
    Rng rng(seed);
    Intrinsics k;
    k.fx = rng.uniform(config.focal_min_scale * width, config.focal_max_scale * width);
    k.fy = rng.uniform(config.focal_min_scale * width, config.focal_max_scale * width);
    k.cx = rng.uniform(config.principal_min_scale * width, config.principal_max_scale * width);
    k.cy = rng.uniform(config.principal_min_scale * height, config.principal_max_scale * height);
    return k;
}

namespace detail {

/// Bilinear value noise in [-1, 1] at octave cell size `cell`.
inline double value_noise(std::uint64_t seed, int octave, double u, double v, double cell) {
    const double x = u / cell;
    const double y = v / cell;
    const auto i0 = static_cast<std::int64_t>(std::floor(x));
    const auto j0 = static_cast<std::int64_t>(std::floor(y));
    const double tx = x - static_cast<double>(i0);
    const double ty = y - static_cast<double>(j0);

    const double v00 = lattice_noise(seed, octave, i0, j0);
    const double v10 = lattice_noise(seed, octave, i0 + 1, j0);
    const double v01 = lattice_noise(seed, octave, i0, j0 + 1);
    const double v11 = lattice_noise(seed, octave, i0 + 1, j0 + 1);
    const double top = v00 + (v10 - v00) * tx;
    const double bottom = v01 + (v11 - v01) * tx;
    return top + (bottom - top) * ty;
}

} // namespace detail

/// Step 2: smooth positive background depth. A base plane depth plus
/// band-limited noise whose spatial scale tracks fx, clamped at the near plane.
inline DepthMap sample_depth(std::uint64_t seed, int height, int width, const Intrinsics& k,
                             const SynthesisConfig& config = {}) {
    config.validate();
    k.validate();
    Rng rng(seed);
    const double base = rng.uniform(config.base_depth_min, config.base_depth_max);
    const double amplitude = config.depth_noise_amplitude * base;

    // Octave weights sum to one so the total noise stays within +-amplitude.
    const int octaves = config.depth_noise_octaves;
    double weight_sum = 0.0;
    for (int o = 0; o < octaves; ++o)
        weight_sum += std::pow(0.5, o);

    const double base_cell =
        std::max(2.0, 0.5 * (k.fx / width) * std::min(height, width));

    DepthMap depth(height, width, base);
    if (amplitude > 0.0) {
        for (int r = 0; r < height; ++r) {
            for (int c = 0; c < width; ++c) {
                double noise = 0.0;
                for (int o = 0; o < octaves; ++o) {
                    const double cell = std::max(1.0, base_cell / std::pow(2.0, o));
                    noise += std::pow(0.5, o) / weight_sum *
                             detail::value_noise(seed, o, c, r, cell);
                }
                depth(r, c) = std::max(config.near_plane, base + amplitude * noise);
            }
        }
    }
    return depth;
}

/// Step 3: camera motion plus one motion per object. Draw order is camera
/// (rx, ry, rz, tx, ty, tz) followed by each object in index order.
inline std::pair<MotionSE3, std::vector<MotionSE3>>
sample_motions(std::uint64_t seed, int n_objects, const SynthesisConfig& config = {}) {
    config.validate();
    if (n_objects < 0 || n_objects > config.max_objects)
        throw std::invalid_argument("sample_motions: n_objects out of range");
    Rng rng(seed);
    auto draw = [&rng](double rot_range, double trans_range) {
        MotionSE3 m;
        m.rotation.rx = rng.uniform(-rot_range, rot_range);
        m.rotation.ry = rng.uniform(-rot_range, rot_range);
        m.rotation.rz = rng.uniform(-rot_range, rot_range);
        m.translation.x() = rng.uniform(-trans_range, trans_range);
        m.translation.y() = rng.uniform(-trans_range, trans_range);
        m.translation.z() = rng.uniform(-trans_range, trans_range);
        return m;
    };
    MotionSE3 camera = draw(config.camera_rotation_range, config.camera_translation_range);
    std::vector<MotionSE3> objects;
    objects.reserve(n_objects);
    for (int i = 0; i < n_objects; ++i)
        objects.push_back(draw(config.object_rotation_range, config.object_translation_range));
    return {camera, objects};
}

/// Shape half of Step 3: ellipse masks and depth offsets (motions are drawn
/// separately so behind-camera retries can resample them alone). Per object
/// the draw order is center_u, center_v, radius_u, radius_v, depth_offset.
struct ObjectShape {
    MaskMap mask;
    double depth_offset = 0.0;
};

inline std::vector<ObjectShape> sample_object_shapes(std::uint64_t seed, int height, int width,
                                                     const SynthesisConfig& config = {}) {
    config.validate();
    Rng rng(seed);
    const int count = rng.uniform_int(config.min_objects, config.max_objects);
    const double min_dim = std::min(height, width);

    std::vector<ObjectShape> shapes;
    shapes.reserve(count);
    for (int i = 0; i < count; ++i) {
        const double cu = rng.uniform(0.0, width - 1.0);
        const double cv = rng.uniform(0.0, height - 1.0);
        const double ru = rng.uniform(config.object_radius_min_frac * min_dim,
                                      config.object_radius_max_frac * min_dim);
        const double rv = rng.uniform(config.object_radius_min_frac * min_dim,
                                      config.object_radius_max_frac * min_dim);
        const double offset = rng.uniform(config.object_depth_offset_min,
                                          config.object_depth_offset_max);

        MaskMap mask(height, width, static_cast<std::uint8_t>(0));
        for (int r = 0; r < height; ++r) {
            for (int c = 0; c < width; ++c) {
                const double du = (c - cu) / ru;
                const double dv = (r - cv) / rv;
                if (du * du + dv * dv <= 1.0)
                    mask(r, c) = 1;
            }
        }
        shapes.push_back({std::move(mask), offset});
    }
    return shapes;
}

/// Rigid flow of a single SE(3) motion, evaluated per source pixel:
///   X' = R * (D(p) * K^-1 (u, v, 1)) + t
///   flow(p) = K X' / X'_z - (u, v),  depth(p) = X'_z.
/// The next-frame depth dividing the projection is exactly X'_z.
inline RigidFlowField rigid_flow(const Intrinsics& k, const DepthMap& depth_t,
                                 const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation,
                                 const PixelGrid& grid, double near_plane = 0.5) {
    k.validate();
    if (depth_t.height() != grid.height || depth_t.width() != grid.width)
        throw std::invalid_argument("rigid_flow: depth/grid shape mismatch");
    if (!finite(rotation) || !finite(translation))
        throw std::invalid_argument("rigid_flow: non-finite motion");

    RigidFlowField out{FlowMap(grid.height, grid.width), DepthMap(grid.height, grid.width)};

    // Exact-identity motions short-circuit so the flow is a true zero map.
    if (rotation == Eigen::Matrix3d::Identity() && translation.isZero(0.0)) {
        out.depth = depth_t;
        for (std::size_t i = 0; i < depth_t.size(); ++i)
            if (!(depth_t[i] > 0.0))
                throw std::domain_error("rigid_flow: non-positive depth");
        return out;
    }

    for (int r = 0; r < grid.height; ++r) {
        for (int c = 0; c < grid.width; ++c) {
            const double d = depth_t(r, c);
            if (!(d > 0.0))
                throw std::domain_error("rigid_flow: non-positive depth at pixel (row=" +
                                        std::to_string(r) + ", col=" + std::to_string(c) + ")");
            const Eigen::Vector3d transformed = rotation * (d * k.normalized(c, r)) + translation;
            if (transformed.z() < near_plane)
                throw BehindCameraError(r, c, transformed.z());
            out.flow(r, c) = k.project(transformed) - grid.pixel(r, c);
            out.depth(r, c) = transformed.z();
        }
    }
    return out;
}

inline RigidFlowField rigid_flow(const Intrinsics& k, const DepthMap& depth_t,
                                 const MotionSE3& motion, const PixelGrid& grid,
                                 double near_plane = 0.5) {
    if (motion.is_identity())
        return rigid_flow(k, depth_t, Eigen::Matrix3d::Identity(), Eigen::Vector3d::Zero(),
                          grid, near_plane);
    return rigid_flow(k, depth_t, motion.rotation_matrix(), motion.translation, grid, near_plane);
}

/// One occlusion-ordered flow source for composition.
struct FlowLayer {
    const MaskMap* mask = nullptr; // nullptr covers every pixel (ego layer)
    const DepthMap* depth_t = nullptr;
    const RigidFlowField* field = nullptr;
};

struct CompositeResult {
    FlowMap flow_total;
    DepthMap depth_next;
    MaskMap depth_next_valid; // 1 where a splat landed before hole filling
};

namespace detail {

/// Nearest valid pixel by Euclidean distance, ties to the lowest row-major
/// index. Expanding Chebyshev rings around the query keep the scan exact.
inline std::size_t nearest_valid(const MaskMap& valid, int row, int col) {
    const int height = valid.height(), width = valid.width();
    double best_d2 = std::numeric_limits<double>::infinity();
    std::size_t best_index = 0;
    bool found = false;

    const int max_ring = std::max({row, height - 1 - row, col, width - 1 - col});
    for (int ring = 0; ring <= max_ring; ++ring) {
        if (found && static_cast<double>(ring) * ring > best_d2)
            break;
        const int r0 = row - ring, r1 = row + ring;
        const int c0 = col - ring, c1 = col + ring;
        auto visit = [&](int r, int c) {
            if (r < 0 || r >= height || c < 0 || c >= width || !valid(r, c))
                return;
            const double dr = r - row, dc = c - col;
            const double d2 = dr * dr + dc * dc;
            const std::size_t idx = valid.index(r, c);
            if (d2 < best_d2 || (d2 == best_d2 && idx < best_index)) {
                best_d2 = d2;
                best_index = idx;
                found = true;
            }
        };
        if (ring == 0) {
            visit(row, col);
            continue;
        }
        for (int c = c0; c <= c1; ++c) {
            visit(r0, c);
            visit(r1, c);
        }
        for (int r = r0 + 1; r <= r1 - 1; ++r) {
            visit(r, c0);
            visit(r, c1);
        }
    }
    return best_index;
}

} // namespace detail

/// Step 5: per pixel the covering source with the smallest frame-t depth wins
/// (objects first, then ego; ties keep the earliest source). The next-frame
/// depth is built by forward-splatting the winners' transformed depths with a
/// z-buffer and hole-filling from the nearest splat.
inline CompositeResult compose_total_flow(const RigidFlowField& ego, const DepthMap& ego_depth_t,
                                          const std::vector<FlowLayer>& objects) {
    const int height = ego.flow.height(), width = ego.flow.width();
    if (!ego.flow.same_shape(ego_depth_t) || !ego.flow.same_shape(ego.depth))
        throw std::invalid_argument("compose_total_flow: ego shape mismatch");
    for (const FlowLayer& layer : objects) {
        if (!layer.mask || !layer.depth_t || !layer.field)
            throw std::invalid_argument("compose_total_flow: incomplete layer");
        if (!layer.mask->same_shape(ego.flow) || !layer.depth_t->same_shape(ego.flow) ||
            !layer.field->flow.same_shape(ego.flow))
            throw std::invalid_argument("compose_total_flow: layer shape mismatch");
    }

    CompositeResult out{FlowMap(height, width), DepthMap(height, width),
                        MaskMap(height, width, static_cast<std::uint8_t>(0))};
    DepthMap zbuffer(height, width, std::numeric_limits<double>::infinity());

    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            // Frame-t occlusion: objects in index order, ego last; a later
            // source must be strictly nearer to take the pixel.
            double winner_depth = std::numeric_limits<double>::infinity();
            const FlowLayer* winner = nullptr;
            for (const FlowLayer& layer : objects) {
                if ((*layer.mask)(r, c) && (*layer.depth_t)(r, c) < winner_depth) {
                    winner_depth = (*layer.depth_t)(r, c);
                    winner = &layer;
                }
            }
            Eigen::Vector2d flow;
            double transformed_depth;
            if (winner && ego_depth_t(r, c) >= winner_depth) {
                flow = winner->field->flow(r, c);
                transformed_depth = winner->field->depth(r, c);
            } else {
                flow = ego.flow(r, c);
                transformed_depth = ego.depth(r, c);
            }
            out.flow_total(r, c) = flow;

            const auto target_c = static_cast<int>(std::lround(c + flow.x()));
            const auto target_r = static_cast<int>(std::lround(r + flow.y()));
            if (out.depth_next.in_bounds(target_r, target_c) &&
                transformed_depth < zbuffer(target_r, target_c)) {
                zbuffer(target_r, target_c) = transformed_depth;
                out.depth_next(target_r, target_c) = transformed_depth;
                out.depth_next_valid(target_r, target_c) = 1;
            }
        }
    }

    bool any_valid = false;
    for (std::size_t i = 0; i < out.depth_next_valid.size(); ++i)
        any_valid = any_valid || out.depth_next_valid[i] != 0;
    if (any_valid) {
        for (int r = 0; r < height; ++r)
            for (int c = 0; c < width; ++c)
                if (!out.depth_next_valid(r, c))
                    out.depth_next(r, c) =
                        out.depth_next[detail::nearest_valid(out.depth_next_valid, r, c)];
    }
    return out;
}

/// Composite frame-t depth under the same winner rule as compose_total_flow.
inline DepthMap composite_depth(const DepthMap& background,
                                const std::vector<ObjectShape>& shapes, double near_plane) {
    DepthMap depth = background;
    for (std::size_t i = 0; i < depth.size(); ++i) {
        for (const ObjectShape& shape : shapes) {
            if (shape.mask[i]) {
                const double object_depth =
                    std::max(near_plane, background[i] - shape.depth_offset);
                depth[i] = std::min(depth[i], object_depth);
            }
        }
    }
    return depth;
}

/// Runs Steps 1-5. Motion sampling is retried with a fresh sub-seed whenever
/// a rigid flow lands behind the near plane, up to max_motion_attempts.
inline SceneSample generate_scene(std::uint64_t seed, int height, int width,
                                  const SynthesisConfig& config = {}) {
    config.validate();
    const PixelGrid grid{height, width};

    const Intrinsics k = sample_intrinsics(derive_seed(seed, 1), height, width, config);
    const DepthMap background = sample_depth(derive_seed(seed, 2), height, width, k, config);
    const std::vector<ObjectShape> shapes =
        sample_object_shapes(derive_seed(seed, 3), height, width, config);
    const int n_objects = static_cast<int>(shapes.size());

    // Geometry is fixed across attempts; only motions are resampled.
    const DepthMap depth_t = composite_depth(background, shapes, config.near_plane);
    std::vector<DepthMap> object_depths;
    object_depths.reserve(shapes.size());
    for (const ObjectShape& shape : shapes) {
        DepthMap d(height, width);
        for (std::size_t i = 0; i < d.size(); ++i)
            d[i] = std::max(config.near_plane, background[i] - shape.depth_offset);
        object_depths.push_back(std::move(d));
    }

    for (int attempt = 0; attempt < config.max_motion_attempts; ++attempt) {
        const std::uint64_t motion_seed = derive_seed(seed, 4 + static_cast<std::uint64_t>(attempt));
        auto [camera, object_motions] = sample_motions(motion_seed, n_objects, config);
        try {
            RigidFlowField ego = rigid_flow(k, depth_t, camera, grid, config.near_plane);
            std::vector<RigidFlowField> object_fields;
            object_fields.reserve(shapes.size());
            for (int i = 0; i < n_objects; ++i)
                object_fields.push_back(
                    rigid_flow(k, object_depths[i], object_motions[i], grid, config.near_plane));

            std::vector<FlowLayer> layers;
            layers.reserve(shapes.size());
            for (int i = 0; i < n_objects; ++i)
                layers.push_back({&shapes[i].mask, &object_depths[i], &object_fields[i]});
            CompositeResult composite = compose_total_flow(ego, depth_t, layers);

            SceneSample sample;
            sample.intrinsics = k;
            sample.depth_t = depth_t;
            sample.depth_next = std::move(composite.depth_next);
            sample.depth_next_valid = std::move(composite.depth_next_valid);
            sample.flow_total = std::move(composite.flow_total);
            sample.flow_ego = std::move(ego.flow);
            sample.camera_motion = camera;
            sample.seed = seed;
            sample.motion_seed = motion_seed;
            sample.motion_attempts = attempt + 1;
            sample.objects.reserve(shapes.size());
            for (int i = 0; i < n_objects; ++i) {
                ObjectRecord record;
                record.spec = {shapes[i].mask, shapes[i].depth_offset, object_motions[i]};
                record.flow = std::move(object_fields[i].flow);
                sample.objects.push_back(std::move(record));
            }
            return sample;
        } catch (const BehindCameraError&) {
            continue;
        }
    }
    throw GenerationError("generate_scene: no valid motion sample after " +
                          std::to_string(config.max_motion_attempts) + " attempts (seed " +
                          std::to_string(seed) + ")");
}

/// Union of object masks; pixel fraction covered by movers.
inline MaskMap object_union_mask(const SceneSample& sample) {
    MaskMap mask(sample.depth_t.height(), sample.depth_t.width(), static_cast<std::uint8_t>(0));
    for (const ObjectRecord& record : sample.objects)
        for (std::size_t i = 0; i < mask.size(); ++i)
            if (record.spec.mask[i])
                mask[i] = 1;
    return mask;
}

inline double object_coverage(const SceneSample& sample) {
    const MaskMap mask = object_union_mask(sample);
    std::size_t covered = 0;
    for (std::size_t i = 0; i < mask.size(); ++i)
        covered += mask[i] ? 1 : 0;
    return static_cast<double>(covered) / static_cast<double>(mask.size());
}

} // namespace flowvo
