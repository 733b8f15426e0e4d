#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cog3d/memory_core.hpp"
#include "cog3d/types.hpp"

namespace cog3d {

// Affine map from geometric features into the semantic space: out = W*g + b.
// weights[j*d_out + i] maps input channel j to output channel i (column of
// outputs per input row, so the inner output loop is contiguous).
struct Projector {
    uint32_t d_in = 0;   // geometric dim
    uint32_t d_out = 0;  // semantic dim
    std::vector<float> weights;  // d_in * d_out
    std::vector<float> bias;     // d_out

    static Projector zero(uint32_t d_in, uint32_t d_out);
    static Projector identity(uint32_t d);
    // Uniform init in [-scale, scale], deterministic per seed.
    static Projector seeded(uint32_t d_in, uint32_t d_out, uint64_t seed, float scale = 0.1f);

    void validate() const;  // throws ConfigError
};

// v = f + (W*g + b). Accumulates in double, stores f32. Throws ConfigError on
// shape mismatch.
std::vector<float> fuse(const MemoryToken& token, const Projector& proj);
void fuse_row(std::span<const float> f, std::span<const float> g, const Projector& proj,
              float* out);

// concat(sin(bases*p), cos(bases*p)); bases is row-major Bx3, output 2B.
std::vector<float> fourier_pe(Vec3f p, std::span<const float> bases);

// Hierarchical rotary embedding: one group of dims per (band, axis) pair in
// band-major order; every pair inside a group rotates by band_freq * p[axis].
struct HRopeConfig {
    std::vector<double> band_freqs = {1.0, 0.1, 0.01};
};
std::vector<float> hrope(std::span<const float> v, Vec3f p, const HRopeConfig& cfg);

// Rotary embedding over (t, x, y, z): four equal coordinate groups, classic
// per-pair frequency schedule base^(-2j/group_dim) inside each group. Requires
// the dimension divisible by 8.
struct Rope4dConfig {
    double base = 10000.0;
};
std::vector<float> rope4d(std::span<const float> v, double t, Vec3f p, const Rope4dConfig& cfg);

struct PosEmbedConfig {
    enum class Variant : uint8_t { None = 0, LearnableFourier = 1, HRope = 2, Rope4d = 3 };

    Variant variant = Variant::None;

    // LearnableFourier: bases (Bx3, row-major). When 2B != d_f a projection
    // (2B x d_f, input-major like Projector) must be supplied; the embedding
    // is then added to the fused token.
    std::vector<float> fourier_bases;
    std::vector<float> fourier_proj;

    HRopeConfig hrope;
    Rope4dConfig rope4d;

    static PosEmbedConfig none() { return {}; }
    // Seeded Fourier bases (and projection when 2*bands != d_f).
    static PosEmbedConfig seeded_fourier(uint32_t bands, uint32_t d_f, uint64_t seed);
};

// The decoder-facing token stream: one separator per timestep, then that
// timestep's fused tokens.
struct ExportRecord {
    enum class Kind : uint8_t { Separator = 0, Token = 1 };
    Kind kind = Kind::Separator;
    uint32_t timestep = 0;
    Vec3f position;              // Token only
    std::vector<float> feature;  // Token only, d_f entries
};

struct ExportStream {
    uint32_t df = 0;
    std::vector<ExportRecord> records;

    std::size_t token_count() const;
};

// Orders tokens by updated_step (stable), fuses each one, applies the
// configured positional embedding, and inserts separators at timestep
// boundaries.
ExportStream export_stream(const MemoryState& state, const Projector& proj,
                           const PosEmbedConfig& pe);

}  // namespace cog3d
