#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cog3d/patching.hpp"
#include "cog3d/types.hpp"

namespace cog3d {

// On-disk frame container ("C3DF"): header, row-major little-endian f32
// planes, bit-packed validity mask. Stands in for the upstream pointmap and
// feature extractors, which are outside this artifact.
//
// Layout: magic "C3DF" | version u32 | H u32 | W u32 | D_f u32 | D_g u32 |
// timestep u32 | flags u32 | pointmap H*W*3 f32 | semantic H*W*D_f f32 |
// geometric H*W*D_g f32 | mask ceil(H*W/8) bytes (LSB-first, row-major).
inline constexpr uint32_t kFrameFileVersion = 1;

// patch_size is a pooling parameter, not file content; callers pick it.
FrameBundle load_frame(const std::string& path, uint32_t patch_size = 32);
void save_frame(const FrameBundle& frame, const std::string& path);

// ---------------------------------------------------------------------------
// Deterministic synthetic scenes: axis-aligned geometry raycast into
// registered pointmaps, per-surface feature vectors, optional position jitter
// emulating estimator noise.
// ---------------------------------------------------------------------------

struct ScenePrimitive {
    enum class Kind { Box, Plane };

    Kind kind = Kind::Box;
    Vec3d box_min, box_max;  // Box

    int plane_axis = 2;         // Plane: 0=x, 1=y, 2=z
    double plane_offset = 0.0;  // coordinate along that axis
    double plane_sign = 1.0;    // reported normal direction

    uint32_t surface_id = 0;
    Vec3f color{0.5f, 0.5f, 0.5f};
};

struct Trajectory {
    enum class Kind { Orbit, Waypoints };

    Kind kind = Kind::Orbit;

    // Orbit: camera at center + (r cos a, r sin a, height), looking at center.
    // The phase is computed as fmod(revolutions*i, n_frames)/n_frames so
    // integer revolutions revisit bit-identical poses.
    Vec3d center;
    double radius = 2.0;
    uint32_t n_frames = 1;
    double revolutions = 1.0;
    double height = 0.0;

    struct Waypoint {
        Vec3d position;
        Vec3d look_at;
    };
    std::vector<Waypoint> waypoints;

    uint32_t frame_count() const {
        return kind == Kind::Orbit ? n_frames : uint32_t(waypoints.size());
    }
};

struct CameraModel {
    double fov_deg = 60.0;  // vertical field of view
    uint32_t width = 64;
    uint32_t height = 48;
};

struct SceneSpec {
    std::vector<ScenePrimitive> primitives;
    Trajectory trajectory;
    CameraModel camera;
    double noise_sigma = 0.0;  // scene-unit position jitter
    uint64_t seed = 0;
    uint32_t df = 16;
    uint32_t dg = 8;

    uint32_t n_frames() const { return trajectory.frame_count(); }
    void validate() const;  // throws ConfigError
};

SceneSpec load_scene(const std::string& path);  // JSON, see README for schema

// Raycasts frame_idx of the trajectory. Valid pixels carry the world-space
// hit point (plus jitter), per-surface semantic features (color channels
// first, then seeded per-surface values) and the surface normal padded to dg.
// Deterministic per (spec, frame_idx). Throws ConfigError on a degenerate
// camera, InvalidInput on frame_idx out of range.
FrameBundle render_frame(const SceneSpec& spec, uint32_t frame_idx, uint32_t patch_size = 32);

}  // namespace cog3d
