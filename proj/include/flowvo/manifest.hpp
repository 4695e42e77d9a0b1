#pragma once

#include "flowvo/flow_io.hpp"
#include "flowvo/geometry.hpp"
#include "flowvo/png_io.hpp"
#include "flowvo/synthesis.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace flowvo {

/// Raised when a manifest is structurally readable but fails validation
/// (unknown schema, missing referenced file, dimension mismatch). Kept
/// distinct from FormatError so callers can map the two to different exit
/// codes.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

constexpr int kManifestSchemaVersion = 1;

using ordered_json = nlohmann::ordered_json;

namespace detail {

inline ordered_json motion_to_json(const MotionSE3& m) {
    return ordered_json{{"rotation", {m.rotation.rx, m.rotation.ry, m.rotation.rz}},
                        {"translation", {m.translation.x(), m.translation.y(), m.translation.z()}}};
}

inline MotionSE3 motion_from_json(const ordered_json& j) {
    MotionSE3 m;
    const auto& r = j.at("rotation");
    const auto& t = j.at("translation");
    if (!r.is_array() || r.size() != 3 || !t.is_array() || t.size() != 3)
        throw ValidationError("manifest: motion entries must be 3-vectors");
    m.rotation = EulerAngles{r[0].get<double>(), r[1].get<double>(), r[2].get<double>()};
    m.translation = Eigen::Vector3d(t[0].get<double>(), t[1].get<double>(), t[2].get<double>());
    return m;
}

} // namespace detail

/// In-memory mirror of a scene's manifest.json. Array/mask paths are stored
/// relative to the manifest's directory.
struct SceneManifest {
    int schema_version = kManifestSchemaVersion;
    std::uint64_t seed = 0;
    int height = 0;
    int width = 0;
    Intrinsics intrinsics;
    MotionSE3 camera_motion;
    std::uint64_t motion_seed = 0;
    int motion_attempts = 0;

    std::string flow_total_file = "flow_total.flo";
    std::string flow_ego_file = "flow_ego.flo";
    std::string depth_t_file = "depth_t.pfm";
    std::string depth_next_file = "depth_next.pfm";
    std::string depth_next_valid_file = "depth_next_valid.png";

    struct ObjectEntry {
        std::string mask_file;
        double depth_offset = 0.0;
        MotionSE3 motion;
        std::string flow_file;
    };
    std::vector<ObjectEntry> objects;

    ordered_json to_json() const {
        ordered_json j;
        j["schema_version"] = schema_version;
        j["seed"] = seed;
        j["height"] = height;
        j["width"] = width;
        j["intrinsics"] = {{"fx", intrinsics.fx},
                           {"fy", intrinsics.fy},
                           {"cx", intrinsics.cx},
                           {"cy", intrinsics.cy}};
        j["camera_motion"] = detail::motion_to_json(camera_motion);
        j["motion_seed"] = motion_seed;
        j["motion_attempts"] = motion_attempts;
        j["arrays"] = {{"flow_total", flow_total_file},
                       {"flow_ego", flow_ego_file},
                       {"depth_t", depth_t_file},
                       {"depth_next", depth_next_file},
                       {"depth_next_valid", depth_next_valid_file}};
        j["objects"] = ordered_json::array();
        for (const ObjectEntry& o : objects)
            j["objects"].push_back(ordered_json{{"mask_file", o.mask_file},
                                                {"depth_offset", o.depth_offset},
                                                {"motion", detail::motion_to_json(o.motion)},
                                                {"flow_file", o.flow_file}});
        return j;
    }

    static SceneManifest from_json(const ordered_json& j) {
        SceneManifest m;
        try {
            m.schema_version = j.at("schema_version").get<int>();
            if (m.schema_version != kManifestSchemaVersion)
                throw ValidationError("manifest: unrecognized schema_version " +
                                      std::to_string(m.schema_version));
            m.seed = j.at("seed").get<std::uint64_t>();
            m.height = j.at("height").get<int>();
            m.width = j.at("width").get<int>();
            const auto& k = j.at("intrinsics");
            m.intrinsics = Intrinsics{k.at("fx").get<double>(), k.at("fy").get<double>(),
                                      k.at("cx").get<double>(), k.at("cy").get<double>()};
            m.camera_motion = detail::motion_from_json(j.at("camera_motion"));
            m.motion_seed = j.value("motion_seed", std::uint64_t{0});
            m.motion_attempts = j.value("motion_attempts", 0);
            const auto& a = j.at("arrays");
            m.flow_total_file = a.at("flow_total").get<std::string>();
            m.flow_ego_file = a.at("flow_ego").get<std::string>();
            m.depth_t_file = a.at("depth_t").get<std::string>();
            m.depth_next_file = a.at("depth_next").get<std::string>();
            m.depth_next_valid_file = a.at("depth_next_valid").get<std::string>();
            for (const auto& oj : j.at("objects")) {
                ObjectEntry o;
                o.mask_file = oj.at("mask_file").get<std::string>();
                o.depth_offset = oj.at("depth_offset").get<double>();
                o.motion = detail::motion_from_json(oj.at("motion"));
                o.flow_file = oj.at("flow_file").get<std::string>();
                m.objects.push_back(std::move(o));
            }
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(std::string("manifest: ") + e.what());
        }
        return m;
    }
};

/// A scene loaded back from disk together with where it came from.
struct LoadedScene {
    SceneSample sample;
    SceneManifest manifest;
    std::filesystem::path directory;
    std::string name; // directory basename, used to pair predictions with truth
};

/// Writes every array of `sample` plus manifest.json into `dir` (created if
/// needed). File names are fixed so identical samples produce identical
/// directories.
inline std::filesystem::path write_scene(const std::filesystem::path& dir,
                                         const SceneSample& sample) {
    std::filesystem::create_directories(dir);
    SceneManifest m;
    m.seed = sample.seed;
    m.height = sample.flow_total.height();
    m.width = sample.flow_total.width();
    m.intrinsics = sample.intrinsics;
    m.camera_motion = sample.camera_motion;
    m.motion_seed = sample.motion_seed;
    m.motion_attempts = sample.motion_attempts;

    write_flow((dir / m.flow_total_file).string(), sample.flow_total);
    write_flow((dir / m.flow_ego_file).string(), sample.flow_ego);
    write_depth((dir / m.depth_t_file).string(), sample.depth_t);
    write_depth((dir / m.depth_next_file).string(), sample.depth_next);
    write_mask_png((dir / m.depth_next_valid_file).string(), sample.depth_next_valid);

    for (std::size_t i = 0; i < sample.objects.size(); ++i) {
        SceneManifest::ObjectEntry o;
        o.mask_file = "object_" + std::to_string(i) + "_mask.png";
        o.flow_file = "object_" + std::to_string(i) + "_flow.flo";
        o.depth_offset = sample.objects[i].spec.depth_offset;
        o.motion = sample.objects[i].spec.motion;
        write_mask_png((dir / o.mask_file).string(), sample.objects[i].spec.mask);
        write_flow((dir / o.flow_file).string(), sample.objects[i].flow);
        m.objects.push_back(std::move(o));
    }

    const std::filesystem::path manifest_path = dir / "manifest.json";
    std::ofstream os(manifest_path);
    if (!os)
        throw FormatError("write_scene: cannot open " + manifest_path.string());
    os << m.to_json().dump(2) << "\n";
    if (!os)
        throw FormatError("write_scene: manifest write failed");
    return manifest_path;
}

/// Loads and validates a scene. Checks, in order: manifest parses, schema is
/// recognized, every referenced file exists, and every array's header matches
/// the manifest's height/width.
inline LoadedScene load_scene(const std::filesystem::path& manifest_path) {
    std::ifstream is(manifest_path);
    if (!is)
        throw ValidationError("load_scene: cannot open " + manifest_path.string());
    ordered_json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("load_scene: malformed JSON in " + manifest_path.string() + ": " +
                          e.what());
    }

    LoadedScene scene;
    scene.manifest = SceneManifest::from_json(j);
    scene.directory = manifest_path.parent_path();
    scene.name = scene.directory.filename().string();
    const SceneManifest& m = scene.manifest;

    auto resolve = [&](const std::string& rel) {
        const std::filesystem::path p = scene.directory / rel;
        if (!std::filesystem::exists(p))
            throw ValidationError("load_scene: missing file " + p.string());
        return p.string();
    };
    auto check_shape = [&](int h, int w, const std::string& rel) {
        if (h != m.height || w != m.width)
            throw ValidationError("load_scene: " + rel + " is " + std::to_string(w) + "x" +
                                  std::to_string(h) + ", manifest says " +
                                  std::to_string(m.width) + "x" + std::to_string(m.height));
    };

    SceneSample& s = scene.sample;
    s.seed = m.seed;
    s.motion_seed = m.motion_seed;
    s.motion_attempts = m.motion_attempts;
    s.intrinsics = m.intrinsics;
    s.camera_motion = m.camera_motion;

    s.flow_total = read_flow(resolve(m.flow_total_file));
    check_shape(s.flow_total.height(), s.flow_total.width(), m.flow_total_file);
    s.flow_ego = read_flow(resolve(m.flow_ego_file));
    check_shape(s.flow_ego.height(), s.flow_ego.width(), m.flow_ego_file);
    s.depth_t = read_depth(resolve(m.depth_t_file));
    check_shape(s.depth_t.height(), s.depth_t.width(), m.depth_t_file);
    s.depth_next = read_depth(resolve(m.depth_next_file));
    check_shape(s.depth_next.height(), s.depth_next.width(), m.depth_next_file);
    s.depth_next_valid = read_mask_png(resolve(m.depth_next_valid_file));
    check_shape(s.depth_next_valid.height(), s.depth_next_valid.width(), m.depth_next_valid_file);

    for (const SceneManifest::ObjectEntry& o : m.objects) {
        ObjectRecord rec;
        rec.spec.depth_offset = o.depth_offset;
        rec.spec.motion = o.motion;
        rec.spec.mask = read_mask_png(resolve(o.mask_file));
        check_shape(rec.spec.mask.height(), rec.spec.mask.width(), o.mask_file);
        rec.flow = read_flow(resolve(o.flow_file));
        check_shape(rec.flow.height(), rec.flow.width(), o.flow_file);
        s.objects.push_back(std::move(rec));
    }
    return scene;
}

} // namespace flowvo
