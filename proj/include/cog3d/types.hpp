#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace cog3d {

struct Vec3f {
    float x = 0.0f;
    float y = 0.0f;
    float z = 0.0f;

    friend Vec3f operator+(Vec3f a, Vec3f b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend Vec3f operator-(Vec3f a, Vec3f b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend Vec3f operator*(Vec3f a, float s) { return {a.x * s, a.y * s, a.z * s}; }
    friend bool operator==(Vec3f a, Vec3f b) { return a.x == b.x && a.y == b.y && a.z == b.z; }

    bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

struct Vec3d {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend Vec3d operator+(Vec3d a, Vec3d b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend Vec3d operator-(Vec3d a, Vec3d b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend Vec3d operator*(Vec3d a, double s) { return {a.x * s, a.y * s, a.z * s}; }

    double norm() const { return std::sqrt(x * x + y * y + z * z); }
    Vec3d normalized() const {
        const double n = norm();
        return {x / n, y / n, z / n};
    }
    double dot(Vec3d o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3d cross(Vec3d o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    Vec3f to_f() const { return {float(x), float(y), float(z)}; }
};

inline Vec3d to_d(Vec3f v) { return {double(v.x), double(v.y), double(v.z)}; }

// Axis-aligned bounding box over 3D float positions.
struct Aabb {
    Vec3f lo{std::numeric_limits<float>::infinity(), std::numeric_limits<float>::infinity(),
             std::numeric_limits<float>::infinity()};
    Vec3f hi{-std::numeric_limits<float>::infinity(), -std::numeric_limits<float>::infinity(),
             -std::numeric_limits<float>::infinity()};

    bool empty() const { return lo.x > hi.x; }

    void extend(Vec3f p) {
        lo.x = std::min(lo.x, p.x);
        lo.y = std::min(lo.y, p.y);
        lo.z = std::min(lo.z, p.z);
        hi.x = std::max(hi.x, p.x);
        hi.y = std::max(hi.y, p.y);
        hi.z = std::max(hi.z, p.z);
    }

    void extend(const Aabb& o) {
        if (o.empty()) return;
        extend(o.lo);
        extend(o.hi);
    }

    bool contains(Vec3f p) const {
        return !empty() && p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y &&
               p.z >= lo.z && p.z <= hi.z;
    }

    // Length of the diagonal, computed in double.
    double diagonal() const {
        if (empty()) return 0.0;
        const Vec3d d = to_d(hi) - to_d(lo);
        return d.norm();
    }
};

// ---------------------------------------------------------------------------
// Error taxonomy. The CLI maps these onto process exit codes: input-side
// failures (frames, files, configuration) exit 2, internal invariant
// violations exit 3.
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A frame or patch-token set that violates its contract (bad dims, NaN, ...).
struct InvalidFrame : Error {
    using Error::Error;
};

// Non-finite or otherwise unusable caller-supplied data.
struct InvalidInput : Error {
    using Error::Error;
};

// Bad weight shapes, degenerate cameras, malformed run configuration.
struct ConfigError : Error {
    using Error::Error;
};

// Structurally broken on-disk data; carries the byte offset of the problem.
struct FormatError : Error {
    uint64_t offset = 0;
    FormatError(const std::string& what, uint64_t byte_offset)
        : Error(what + " (at byte " + std::to_string(byte_offset) + ")"), offset(byte_offset) {}
};

// Payload failed its checksum.
struct CorruptFile : Error {
    using Error::Error;
};

// File version not understood by this build.
struct VersionError : Error {
    using Error::Error;
};

// A "cannot happen" condition; indicates a bug, not bad input.
struct InternalInvariantViolation : Error {
    using Error::Error;
};

}  // namespace cog3d
