#include "cog3d/fusion_embed.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cog3d/kernels.hpp"
#include "cog3d/rng.hpp"

namespace cog3d {

Projector Projector::zero(uint32_t d_in, uint32_t d_out) {
    Projector p;
    p.d_in = d_in;
    p.d_out = d_out;
    p.weights.assign(std::size_t(d_in) * d_out, 0.0f);
    p.bias.assign(d_out, 0.0f);
    return p;
}

Projector Projector::identity(uint32_t d) {
    Projector p = zero(d, d);
    for (uint32_t i = 0; i < d; ++i) p.weights[std::size_t(i) * d + i] = 1.0f;
    return p;
}

Projector Projector::seeded(uint32_t d_in, uint32_t d_out, uint64_t seed, float scale) {
    Projector p = zero(d_in, d_out);
    Rng rng(hash_mix(seed, 0x70726F6AULL));  // independent stream per purpose
    for (float& w : p.weights) w = rng.uniform_f(-scale, scale);
    for (float& b : p.bias) b = rng.uniform_f(-scale, scale);
    return p;
}

void Projector::validate() const {
    if (weights.size() != std::size_t(d_in) * d_out || bias.size() != d_out)
        throw ConfigError("projector weight shapes do not match dims " + std::to_string(d_in) +
                          "x" + std::to_string(d_out));
    for (float w : weights)
        if (!std::isfinite(w)) throw ConfigError("non-finite projector weight");
    for (float b : bias)
        if (!std::isfinite(b)) throw ConfigError("non-finite projector bias");
}

void fuse_row(std::span<const float> f, std::span<const float> g, const Projector& proj,
              float* out) {
    if (f.size() != proj.d_out || g.size() != proj.d_in)
        throw ConfigError("fuse: token dims do not match projector");
    const auto& k = kernels::ops();
    std::vector<double> acc(proj.d_out);
    for (uint32_t i = 0; i < proj.d_out; ++i) acc[i] = double(proj.bias[i]);
    for (uint32_t j = 0; j < proj.d_in; ++j)
        k.axpy_acc(acc.data(), proj.weights.data() + std::size_t(j) * proj.d_out, g[j],
                   proj.d_out);
    k.add_finalize(out, f.data(), acc.data(), proj.d_out);
}

std::vector<float> fuse(const MemoryToken& token, const Projector& proj) {
    proj.validate();
    std::vector<float> out(proj.d_out);
    fuse_row(token.semantic, token.geometric, proj, out.data());
    return out;
}

std::vector<float> fourier_pe(Vec3f p, std::span<const float> bases) {
    if (bases.size() % 3 != 0) throw ConfigError("fourier bases must be Bx3");
    const std::size_t b = bases.size() / 3;
    std::vector<float> out(2 * b);
    for (std::size_t r = 0; r < b; ++r) {
        const double angle = double(bases[r * 3 + 0]) * double(p.x) +
                             double(bases[r * 3 + 1]) * double(p.y) +
                             double(bases[r * 3 + 2]) * double(p.z);
        out[r] = float(std::sin(angle));
        out[b + r] = float(std::cos(angle));
    }
    return out;
}

namespace {

inline void rotate_pair(float& a, float& b, double angle) {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    const double a0 = double(a);
    const double b0 = double(b);
    a = float(a0 * c - b0 * s);
    b = float(a0 * s + b0 * c);
}

}  // namespace

std::vector<float> hrope(std::span<const float> v, Vec3f p, const HRopeConfig& cfg) {
    if (cfg.band_freqs.empty()) throw ConfigError("hrope requires at least one band");
    const std::size_t groups = cfg.band_freqs.size() * 3;
    if (v.size() % (2 * groups) != 0)
        throw ConfigError("hrope dim " + std::to_string(v.size()) + " not divisible by 2*" +
                          std::to_string(groups) + " (band,axis) groups");

    const std::size_t group_dim = v.size() / groups;
    const double coords[3] = {double(p.x), double(p.y), double(p.z)};
    std::vector<float> out(v.begin(), v.end());
    for (std::size_t band = 0; band < cfg.band_freqs.size(); ++band)
        for (std::size_t axis = 0; axis < 3; ++axis) {
            const double angle = cfg.band_freqs[band] * coords[axis];
            float* group = out.data() + (band * 3 + axis) * group_dim;
            for (std::size_t j = 0; j + 1 < group_dim; j += 2)
                rotate_pair(group[j], group[j + 1], angle);
        }
    return out;
}

std::vector<float> rope4d(std::span<const float> v, double t, Vec3f p, const Rope4dConfig& cfg) {
    if (v.size() % 8 != 0)
        throw ConfigError("rope4d dim " + std::to_string(v.size()) + " not divisible by 8");

    const std::size_t group_dim = v.size() / 4;
    const double coords[4] = {t, double(p.x), double(p.y), double(p.z)};
    std::vector<float> out(v.begin(), v.end());
    for (std::size_t g = 0; g < 4; ++g) {
        float* group = out.data() + g * group_dim;
        for (std::size_t j = 0; j * 2 + 1 < group_dim; ++j) {
            const double freq = std::pow(cfg.base, -2.0 * double(j) / double(group_dim));
            rotate_pair(group[j * 2], group[j * 2 + 1], coords[g] * freq);
        }
    }
    return out;
}

PosEmbedConfig PosEmbedConfig::seeded_fourier(uint32_t bands, uint32_t d_f, uint64_t seed) {
    PosEmbedConfig cfg;
    cfg.variant = Variant::LearnableFourier;
    Rng rng(hash_mix(seed, 0x666F7572ULL));
    cfg.fourier_bases.resize(std::size_t(bands) * 3);
    for (float& b : cfg.fourier_bases) b = rng.uniform_f(-3.14159265f, 3.14159265f);
    if (2 * bands != d_f) {
        cfg.fourier_proj.resize(std::size_t(2) * bands * d_f);
        const float scale = 1.0f / float(std::max(1u, 2 * bands));
        for (float& w : cfg.fourier_proj) w = rng.uniform_f(-scale, scale);
    }
    return cfg;
}

std::size_t ExportStream::token_count() const {
    std::size_t n = 0;
    for (const auto& r : records)
        if (r.kind == ExportRecord::Kind::Token) ++n;
    return n;
}

ExportStream export_stream(const MemoryState& state, const Projector& proj,
                           const PosEmbedConfig& pe) {
    proj.validate();
    if (proj.d_in != state.dg || proj.d_out != state.df)
        throw ConfigError("projector dims do not match state dims");

    const uint32_t df = state.df;
    if (pe.variant == PosEmbedConfig::Variant::LearnableFourier) {
        if (pe.fourier_bases.empty() || pe.fourier_bases.size() % 3 != 0)
            throw ConfigError("fourier bases must be a non-empty Bx3 matrix");
        const std::size_t two_b = (pe.fourier_bases.size() / 3) * 2;
        if (pe.fourier_proj.empty()) {
            if (two_b != df)
                throw ConfigError("fourier embedding dim " + std::to_string(two_b) +
                                  " != d_f, a projection is required");
        } else if (pe.fourier_proj.size() != two_b * df) {
            throw ConfigError("fourier projection shape mismatch");
        }
    }

    // Stable sort on the last-observation step keeps intra-step order.
    std::vector<uint32_t> order(state.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](uint32_t a, uint32_t b) { return state.updated[a] < state.updated[b]; });

    const auto& k = kernels::ops();
    ExportStream stream;
    stream.df = df;
    stream.records.reserve(state.size() + 8);

    bool have_ts = false;
    uint32_t current_ts = 0;
    std::vector<double> acc(df);
    for (uint32_t idx : order) {
        const uint32_t ts = state.updated[idx];
        if (!have_ts || ts != current_ts) {
            ExportRecord sep;
            sep.kind = ExportRecord::Kind::Separator;
            sep.timestep = ts;
            stream.records.push_back(std::move(sep));
            current_ts = ts;
            have_ts = true;
        }

        ExportRecord rec;
        rec.kind = ExportRecord::Kind::Token;
        rec.timestep = ts;
        rec.position = state.positions[idx];
        rec.feature.resize(df);
        fuse_row(state.semantic_row(idx), state.geometric_row(idx), proj, rec.feature.data());

        switch (pe.variant) {
            case PosEmbedConfig::Variant::None:
                break;
            case PosEmbedConfig::Variant::LearnableFourier: {
                const std::vector<float> raw = fourier_pe(rec.position, pe.fourier_bases);
                if (pe.fourier_proj.empty()) {
                    for (uint32_t i = 0; i < df; ++i) acc[i] = double(raw[i]);
                } else {
                    std::fill(acc.begin(), acc.end(), 0.0);
                    for (std::size_t j = 0; j < raw.size(); ++j)
                        k.axpy_acc(acc.data(), pe.fourier_proj.data() + j * df, raw[j], df);
                }
                k.add_finalize(rec.feature.data(), rec.feature.data(), acc.data(), df);
                break;
            }
            case PosEmbedConfig::Variant::HRope:
                rec.feature = hrope(rec.feature, rec.position, pe.hrope);
                break;
            case PosEmbedConfig::Variant::Rope4d:
                rec.feature = rope4d(rec.feature, double(ts), rec.position, pe.rope4d);
                break;
        }
        stream.records.push_back(std::move(rec));
    }
    return stream;
}

}  // namespace cog3d
