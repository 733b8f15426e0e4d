#include "cog3d/frame_source.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

#include "cog3d/detail/binary_io.hpp"
#include "cog3d/parallel.hpp"
#include "cog3d/rng.hpp"

namespace cog3d {

namespace {

constexpr char kFrameMagic[4] = {'C', '3', 'D', 'F'};

std::size_t frame_payload_size(uint32_t h, uint32_t w, uint32_t df, uint32_t dg) {
    const std::size_t px = std::size_t(h) * w;
    return px * (3 + df + dg) * 4 + (px + 7) / 8;
}

}  // namespace

void save_frame(const FrameBundle& frame, const std::string& path) {
    const std::size_t px = frame.pixel_count();
    if (frame.pointmap.size() != px * 3 || frame.semantic.size() != px * frame.df ||
        frame.geometric.size() != px * frame.dg || frame.valid.size() != px)
        throw InvalidFrame("save_frame: array sizes inconsistent with header");

    std::vector<uint8_t> buf;
    buf.reserve(32 + frame_payload_size(frame.height, frame.width, frame.df, frame.dg));
    buf.insert(buf.end(), kFrameMagic, kFrameMagic + 4);
    detail::put_u32(buf, kFrameFileVersion);
    detail::put_u32(buf, frame.height);
    detail::put_u32(buf, frame.width);
    detail::put_u32(buf, frame.df);
    detail::put_u32(buf, frame.dg);
    detail::put_u32(buf, frame.timestep);
    detail::put_u32(buf, 0);  // flags, reserved

    detail::put_f32_array(buf, frame.pointmap.data(), frame.pointmap.size());
    detail::put_f32_array(buf, frame.semantic.data(), frame.semantic.size());
    detail::put_f32_array(buf, frame.geometric.data(), frame.geometric.size());

    // LSB-first bit packing in pixel order; padding bits stay zero.
    uint8_t pending = 0;
    for (std::size_t i = 0; i < px; ++i) {
        if (frame.valid[i]) pending |= uint8_t(1u << (i % 8));
        if (i % 8 == 7) {
            buf.push_back(pending);
            pending = 0;
        }
    }
    if (px % 8 != 0) buf.push_back(pending);

    detail::write_file(path, buf);
}

FrameBundle load_frame(const std::string& path, uint32_t patch_size) {
    const std::vector<uint8_t> bytes = detail::read_file(path);
    detail::Reader r(bytes.data(), bytes.size(), "frame file '" + path + "'");

    char magic[4];
    r.bytes(reinterpret_cast<uint8_t*>(magic), 4);
    if (std::memcmp(magic, kFrameMagic, 4) != 0)
        throw FormatError("frame file '" + path + "': bad magic", 0);
    const uint32_t version = r.u32();
    if (version != kFrameFileVersion)
        throw VersionError("frame file '" + path + "': unsupported version " +
                           std::to_string(version));

    FrameBundle frame;
    frame.height = r.u32();
    frame.width = r.u32();
    frame.df = r.u32();
    frame.dg = r.u32();
    frame.timestep = r.u32();
    (void)r.u32();  // flags
    frame.patch_size = patch_size;

    // Keep the size arithmetic below overflow-free.
    if (frame.height > (1u << 20) || frame.width > (1u << 20) || frame.df > (1u << 16) ||
        frame.dg > (1u << 16))
        throw FormatError("frame file '" + path + "': implausible header dimensions", 8);

    const std::size_t px = frame.pixel_count();
    const std::size_t expected = 32 + frame_payload_size(frame.height, frame.width, frame.df,
                                                         frame.dg);
    if (bytes.size() != expected)
        throw FormatError("frame file '" + path + "': payload length " +
                              std::to_string(bytes.size() - 32) + " does not match header (" +
                              std::to_string(expected - 32) + " expected)",
                          std::min(bytes.size(), expected));

    frame.pointmap.resize(px * 3);
    frame.semantic.resize(px * frame.df);
    frame.geometric.resize(px * frame.dg);
    r.f32_array(frame.pointmap.data(), frame.pointmap.size());
    r.f32_array(frame.semantic.data(), frame.semantic.size());
    r.f32_array(frame.geometric.data(), frame.geometric.size());

    frame.valid.resize(px);
    for (std::size_t base = 0; base < px; base += 8) {
        const std::size_t at = r.offset();
        const uint8_t packed = r.u8();
        const std::size_t lanes = std::min<std::size_t>(8, px - base);
        for (std::size_t bit = 0; bit < lanes; ++bit)
            frame.valid[base + bit] = (packed >> bit) & 1u;
        if (lanes < 8 && (packed >> lanes) != 0)
            throw FormatError("frame file '" + path + "': nonzero mask padding bits", at);
    }
    return frame;
}

// ---------------------------------------------------------------------------
// Synthetic scenes
// ---------------------------------------------------------------------------

void SceneSpec::validate() const {
    if (camera.width == 0 || camera.height == 0)
        throw ConfigError("camera resolution must be nonzero");
    if (!(camera.fov_deg > 0.0) || !(camera.fov_deg < 180.0))
        throw ConfigError("camera fov must be in (0, 180) degrees");
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
        throw ConfigError("noise sigma must be >= 0");
    if (df == 0 || dg == 0) throw ConfigError("feature dims must be >= 1");

    if (trajectory.kind == Trajectory::Kind::Orbit) {
        if (trajectory.n_frames < 1) throw ConfigError("orbit needs n_frames >= 1");
        if (!(trajectory.radius >= 0.0)) throw ConfigError("orbit radius must be >= 0");
        if (trajectory.radius == 0.0 && trajectory.height == 0.0)
            throw ConfigError("degenerate orbit: camera coincides with its target");
    } else {
        if (trajectory.waypoints.empty()) throw ConfigError("waypoint trajectory is empty");
        for (const auto& wp : trajectory.waypoints) {
            const Vec3d d = wp.look_at - wp.position;
            if (d.norm() < 1e-12)
                throw ConfigError("degenerate waypoint: position equals look_at");
        }
    }
    for (const auto& prim : primitives) {
        if (prim.kind == ScenePrimitive::Kind::Box) {
            if (!(prim.box_min.x < prim.box_max.x) || !(prim.box_min.y < prim.box_max.y) ||
                !(prim.box_min.z < prim.box_max.z))
                throw ConfigError("box primitive must have min < max per axis");
        } else if (prim.plane_axis < 0 || prim.plane_axis > 2) {
            throw ConfigError("plane axis must be x, y or z");
        }
    }
}

namespace {

struct Hit {
    double t = std::numeric_limits<double>::infinity();
    Vec3d normal;
    const ScenePrimitive* prim = nullptr;
};

double axis_of(const Vec3d& v, int axis) { return axis == 0 ? v.x : axis == 1 ? v.y : v.z; }

bool intersect_box(const ScenePrimitive& box, const Vec3d& origin, const Vec3d& dir, Hit& hit) {
    constexpr double kEps = 1e-9;
    double t_near = -std::numeric_limits<double>::infinity();
    double t_far = std::numeric_limits<double>::infinity();
    int near_axis = -1, far_axis = -1;
    double near_sign = 0.0, far_sign = 0.0;

    for (int axis = 0; axis < 3; ++axis) {
        const double o = axis_of(origin, axis);
        const double d = axis_of(dir, axis);
        const double lo = axis_of(box.box_min, axis);
        const double hi = axis_of(box.box_max, axis);
        if (std::abs(d) < 1e-15) {
            if (o < lo || o > hi) return false;
            continue;
        }
        double t1 = (lo - o) / d;
        double t2 = (hi - o) / d;
        double s1 = -1.0, s2 = 1.0;  // outward normal sign of the lo/hi face
        if (t1 > t2) {
            std::swap(t1, t2);
            std::swap(s1, s2);
        }
        if (t1 > t_near) {
            t_near = t1;
            near_axis = axis;
            near_sign = s1;
        }
        if (t2 < t_far) {
            t_far = t2;
            far_axis = axis;
            far_sign = s2;
        }
        if (t_near > t_far) return false;
    }

    double t;
    int axis;
    double sign;
    if (t_near > kEps && near_axis >= 0) {
        t = t_near;
        axis = near_axis;
        sign = near_sign;  // outside hit, outward normal faces the camera
    } else if (t_far > kEps && far_axis >= 0) {
        t = t_far;
        axis = far_axis;
        sign = -far_sign;  // inside hit (a room), report the inward normal
    } else {
        return false;
    }
    if (t >= hit.t) return false;

    hit.t = t;
    hit.normal = {axis == 0 ? sign : 0.0, axis == 1 ? sign : 0.0, axis == 2 ? sign : 0.0};
    hit.prim = &box;
    return true;
}

bool intersect_plane(const ScenePrimitive& plane, const Vec3d& origin, const Vec3d& dir,
                     Hit& hit) {
    const double d = axis_of(dir, plane.plane_axis);
    if (std::abs(d) < 1e-15) return false;
    const double t = (plane.plane_offset - axis_of(origin, plane.plane_axis)) / d;
    if (t <= 1e-9 || t >= hit.t) return false;
    hit.t = t;
    hit.normal = {plane.plane_axis == 0 ? plane.plane_sign : 0.0,
                  plane.plane_axis == 1 ? plane.plane_sign : 0.0,
                  plane.plane_axis == 2 ? plane.plane_sign : 0.0};
    hit.prim = &plane;
    return true;
}

struct CameraPose {
    Vec3d position;
    Vec3d forward, right, up;
};

CameraPose camera_pose(const SceneSpec& spec, uint32_t frame_idx) {
    const Trajectory& traj = spec.trajectory;
    Vec3d pos, look;
    if (traj.kind == Trajectory::Kind::Orbit) {
        // Integer phase wrap first, so integer revolutions yield bit-identical
        // revisited poses.
        const double phase =
            std::fmod(traj.revolutions * double(frame_idx), double(traj.n_frames)) /
            double(traj.n_frames);
        const double angle = 2.0 * 3.14159265358979323846 * phase;
        pos = traj.center +
              Vec3d{traj.radius * std::cos(angle), traj.radius * std::sin(angle), traj.height};
        look = traj.center;
    } else {
        pos = traj.waypoints[frame_idx].position;
        look = traj.waypoints[frame_idx].look_at;
    }

    const Vec3d dir = look - pos;
    if (dir.norm() < 1e-12) throw ConfigError("degenerate camera: position equals target");

    CameraPose pose;
    pose.position = pos;
    pose.forward = dir.normalized();
    Vec3d world_up{0.0, 0.0, 1.0};
    if (std::abs(pose.forward.dot(world_up)) > 0.999) world_up = {0.0, 1.0, 0.0};
    pose.right = pose.forward.cross(world_up).normalized();
    pose.up = pose.right.cross(pose.forward);
    return pose;
}

// Per-surface feature tails beyond the color / normal channels.
struct SurfaceFeatures {
    std::vector<float> semantic_tail;
    std::vector<float> geometric_tail;
};

std::map<uint32_t, SurfaceFeatures> surface_features(const SceneSpec& spec) {
    std::map<uint32_t, SurfaceFeatures> out;
    for (const auto& prim : spec.primitives) {
        if (out.count(prim.surface_id)) continue;
        SurfaceFeatures feats;
        if (spec.df > 3) {
            Rng rng(hash_mix(hash_mix(spec.seed, 0x53454DULL), prim.surface_id));
            feats.semantic_tail.resize(spec.df - 3);
            for (float& v : feats.semantic_tail) v = rng.uniform_f(-1.0f, 1.0f);
        }
        if (spec.dg > 3) {
            Rng rng(hash_mix(hash_mix(spec.seed, 0x47454FULL), prim.surface_id));
            feats.geometric_tail.resize(spec.dg - 3);
            for (float& v : feats.geometric_tail) v = rng.uniform_f(-1.0f, 1.0f);
        }
        out.emplace(prim.surface_id, std::move(feats));
    }
    return out;
}

}  // namespace

FrameBundle render_frame(const SceneSpec& spec, uint32_t frame_idx, uint32_t patch_size) {
    spec.validate();
    if (frame_idx >= spec.n_frames())
        throw InvalidInput("frame index " + std::to_string(frame_idx) + " out of range (" +
                           std::to_string(spec.n_frames()) + " frames)");

    const CameraPose pose = camera_pose(spec, frame_idx);
    const auto features = surface_features(spec);

    const uint32_t w = spec.camera.width;
    const uint32_t h = spec.camera.height;
    const double tan_half = std::tan(spec.camera.fov_deg * 0.5 * 3.14159265358979323846 / 180.0);
    const double aspect = double(w) / double(h);

    FrameBundle frame;
    frame.height = h;
    frame.width = w;
    frame.df = spec.df;
    frame.dg = spec.dg;
    frame.timestep = frame_idx + 1;
    frame.patch_size = patch_size;
    frame.pointmap.assign(std::size_t(h) * w * 3, 0.0f);
    frame.semantic.assign(std::size_t(h) * w * spec.df, 0.0f);
    frame.geometric.assign(std::size_t(h) * w * spec.dg, 0.0f);
    frame.valid.assign(std::size_t(h) * w, 0);

    parallel_for(std::size_t(h) * w, [&](std::size_t begin, std::size_t end) {
        for (std::size_t px = begin; px < end; ++px) {
            const uint32_t i = uint32_t(px / w);
            const uint32_t j = uint32_t(px % w);

            const double ndc_x = (double(j) + 0.5) / double(w) * 2.0 - 1.0;
            const double ndc_y = (double(i) + 0.5) / double(h) * 2.0 - 1.0;
            const Vec3d dir = (pose.forward + pose.right * (ndc_x * tan_half * aspect) +
                               pose.up * (-ndc_y * tan_half))
                                  .normalized();

            Hit hit;
            for (const auto& prim : spec.primitives) {
                if (prim.kind == ScenePrimitive::Kind::Box)
                    intersect_box(prim, pose.position, dir, hit);
                else
                    intersect_plane(prim, pose.position, dir, hit);
            }
            if (hit.prim == nullptr) continue;  // sky pixel stays invalid

            Vec3d point = pose.position + dir * hit.t;
            if (spec.noise_sigma > 0.0) {
                Rng rng(hash_mix(hash_mix(hash_mix(spec.seed, 0x4A495454ULL), frame_idx),
                                 uint64_t(px)));
                point.x += spec.noise_sigma * rng.gaussian();
                point.y += spec.noise_sigma * rng.gaussian();
                point.z += spec.noise_sigma * rng.gaussian();
            }

            frame.valid[px] = 1;
            float* pt = frame.pointmap.data() + px * 3;
            pt[0] = float(point.x);
            pt[1] = float(point.y);
            pt[2] = float(point.z);

            const auto& feats = features.at(hit.prim->surface_id);
            float* sem = frame.semantic.data() + px * spec.df;
            const float rgb[3] = {hit.prim->color.x, hit.prim->color.y, hit.prim->color.z};
            for (uint32_t c = 0; c < std::min(3u, spec.df); ++c) sem[c] = rgb[c];
            for (std::size_t c = 0; c < feats.semantic_tail.size(); ++c)
                sem[3 + c] = feats.semantic_tail[c];

            float* geo = frame.geometric.data() + px * spec.dg;
            const float nrm[3] = {float(hit.normal.x), float(hit.normal.y), float(hit.normal.z)};
            for (uint32_t c = 0; c < std::min(3u, spec.dg); ++c) geo[c] = nrm[c];
            for (std::size_t c = 0; c < feats.geometric_tail.size(); ++c)
                geo[3 + c] = feats.geometric_tail[c];
        }
    });
    return frame;
}

// ---------------------------------------------------------------------------
// Scene JSON
// ---------------------------------------------------------------------------

namespace {

Vec3d parse_vec3(const nlohmann::json& j, const char* what) {
    if (!j.is_array() || j.size() != 3)
        throw ConfigError(std::string("scene: ") + what + " must be a 3-element array");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

SceneSpec load_scene(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scene file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("scene file '" + path + "': " + e.what());
    }

    try {
        SceneSpec spec;
        spec.seed = j.value("seed", uint64_t{0});
        spec.noise_sigma = j.value("noise_sigma", 0.0);
        spec.df = j.value("df", 16u);
        spec.dg = j.value("dg", 8u);

        if (j.contains("camera")) {
            const auto& jc = j["camera"];
            spec.camera.fov_deg = jc.value("fov_deg", 60.0);
            spec.camera.width = jc.value("width", 64u);
            spec.camera.height = jc.value("height", 48u);
        }

        if (!j.contains("trajectory")) throw ConfigError("scene: missing trajectory");
        const auto& jt = j["trajectory"];
        const std::string kind = jt.value("type", "orbit");
        if (kind == "orbit") {
            spec.trajectory.kind = Trajectory::Kind::Orbit;
            spec.trajectory.center = parse_vec3(jt.at("center"), "trajectory.center");
            spec.trajectory.radius = jt.value("radius", 2.0);
            spec.trajectory.n_frames = jt.at("n_frames").get<uint32_t>();
            spec.trajectory.revolutions = jt.value("revolutions", 1.0);
            spec.trajectory.height = jt.value("height", 0.0);
        } else if (kind == "waypoints") {
            spec.trajectory.kind = Trajectory::Kind::Waypoints;
            for (const auto& jw : jt.at("points")) {
                Trajectory::Waypoint wp;
                wp.position = parse_vec3(jw.at("position"), "waypoint.position");
                wp.look_at = parse_vec3(jw.at("look_at"), "waypoint.look_at");
                spec.trajectory.waypoints.push_back(wp);
            }
        } else {
            throw ConfigError("scene: unknown trajectory type '" + kind + "'");
        }

        for (const auto& jp : j.value("primitives", nlohmann::json::array())) {
            ScenePrimitive prim;
            const std::string type = jp.value("type", "box");
            if (type == "box") {
                prim.kind = ScenePrimitive::Kind::Box;
                prim.box_min = parse_vec3(jp.at("min"), "box.min");
                prim.box_max = parse_vec3(jp.at("max"), "box.max");
            } else if (type == "plane") {
                prim.kind = ScenePrimitive::Kind::Plane;
                const std::string axis = jp.value("axis", "z");
                prim.plane_axis = axis == "x" ? 0 : axis == "y" ? 1 : 2;
                prim.plane_offset = jp.value("offset", 0.0);
                prim.plane_sign = jp.value("sign", 1.0) >= 0.0 ? 1.0 : -1.0;
            } else {
                throw ConfigError("scene: unknown primitive type '" + type + "'");
            }
            prim.surface_id = jp.value("surface_id", uint32_t(0));
            if (jp.contains("color")) {
                const Vec3d c = parse_vec3(jp["color"], "primitive.color");
                prim.color = {float(c.x), float(c.y), float(c.z)};
            }
            spec.primitives.push_back(prim);
        }

        spec.validate();
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("scene file '" + path + "': " + e.what());
    }
}

}  // namespace cog3d
