#include "cog3d/patching.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "cog3d/kernels.hpp"

namespace cog3d {

namespace {

void check_patch_grid(const FrameBundle& frame) {
    if (frame.patch_size == 0)
        throw InvalidFrame("patch_size must be positive");
    if (frame.height == 0 || frame.width == 0)
        throw InvalidFrame("frame has zero extent");
    if (frame.height % frame.patch_size != 0 || frame.width % frame.patch_size != 0)
        throw InvalidFrame("frame " + std::to_string(frame.width) + "x" +
                           std::to_string(frame.height) + " not divisible by patch size " +
                           std::to_string(frame.patch_size));
}

bool row_finite(const float* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(p[i])) return false;
    return true;
}

}  // namespace

void FrameBundle::validate() const {
    const std::size_t px = pixel_count();
    if (pointmap.size() != px * 3) throw InvalidFrame("pointmap size mismatch");
    if (semantic.size() != px * df) throw InvalidFrame("semantic map size mismatch");
    if (geometric.size() != px * dg) throw InvalidFrame("geometric map size mismatch");
    if (valid.size() != px) throw InvalidFrame("valid mask size mismatch");
    for (std::size_t i = 0; i < px; ++i) {
        if (!valid[i]) continue;
        if (!row_finite(pointmap.data() + i * 3, 3) ||
            !row_finite(semantic.data() + i * df, df) ||
            !row_finite(geometric.data() + i * dg, dg))
            throw InvalidFrame("non-finite value at valid pixel " + std::to_string(i));
    }
}

std::vector<float> encode_geometry(const FrameBundle& frame, const GeomPatchEncoder& encoder) {
    check_patch_grid(frame);
    if (encoder.mode == GeomPatchEncoder::Mode::External) {
        if (encoder.weights.size() != std::size_t(frame.dg) * frame.dg ||
            encoder.bias.size() != frame.dg)
            throw ConfigError("external geometry encoder weight shape does not match dg=" +
                              std::to_string(frame.dg));
    }

    const uint32_t p = frame.patch_size;
    const uint32_t gh = frame.height / p;
    const uint32_t gw = frame.width / p;
    const uint32_t dg = frame.dg;
    const auto& k = kernels::ops();

    std::vector<float> out(std::size_t(gh) * gw * dg, 0.0f);
    std::vector<double> acc(dg);
    std::vector<float> mean_buf(dg);

    for (uint32_t u = 0; u < gh; ++u) {
        for (uint32_t v = 0; v < gw; ++v) {
            float* dst = out.data() + (std::size_t(u) * gw + v) * dg;
            std::size_t n_valid = 0;

            if (encoder.mode == GeomPatchEncoder::Mode::StridedMax) {
                for (uint32_t c = 0; c < dg; ++c)
                    dst[c] = -std::numeric_limits<float>::infinity();
                for (uint32_t i = u * p; i < (u + 1) * p; ++i)
                    for (uint32_t j = v * p; j < (v + 1) * p; ++j) {
                        const std::size_t px = std::size_t(i) * frame.width + j;
                        if (!frame.valid[px]) continue;
                        ++n_valid;
                        k.max_update(dst, frame.geometric.data() + px * dg, dg);
                    }
                if (n_valid == 0)
                    for (uint32_t c = 0; c < dg; ++c) dst[c] = 0.0f;
                continue;
            }

            // MaskedMean and External both start from the masked mean.
            std::fill(acc.begin(), acc.end(), 0.0);
            for (uint32_t i = u * p; i < (u + 1) * p; ++i)
                for (uint32_t j = v * p; j < (v + 1) * p; ++j) {
                    const std::size_t px = std::size_t(i) * frame.width + j;
                    if (!frame.valid[px]) continue;
                    ++n_valid;
                    k.accum_add(acc.data(), frame.geometric.data() + px * dg, dg);
                }
            if (n_valid == 0) continue;

            if (encoder.mode == GeomPatchEncoder::Mode::MaskedMean) {
                k.mean_finalize(dst, acc.data(), double(n_valid), dg);
            } else {
                k.mean_finalize(mean_buf.data(), acc.data(), double(n_valid), dg);
                std::vector<double> affine(dg);
                for (uint32_t c = 0; c < dg; ++c) affine[c] = double(encoder.bias[c]);
                for (uint32_t j = 0; j < dg; ++j)
                    k.axpy_acc(affine.data(), encoder.weights.data() + std::size_t(j) * dg,
                               mean_buf[j], dg);
                k.mean_finalize(dst, affine.data(), 1.0, dg);
            }
        }
    }
    return out;
}

PatchTokenSet pool_patches(const FrameBundle& frame, const GeomPatchEncoder& encoder) {
    check_patch_grid(frame);

    const uint32_t p = frame.patch_size;
    const uint32_t gh = frame.height / p;
    const uint32_t gw = frame.width / p;
    const uint32_t df = frame.df;
    const uint32_t dg = frame.dg;
    const auto& k = kernels::ops();

    const std::vector<float> geom = encode_geometry(frame, encoder);

    PatchTokenSet set;
    set.grid_h = gh;
    set.grid_w = gw;
    set.timestep = frame.timestep;
    set.df = df;
    set.dg = dg;
    set.positions.reserve(std::size_t(gh) * gw);

    std::vector<double> sem_acc(df);
    for (uint32_t u = 0; u < gh; ++u) {
        for (uint32_t v = 0; v < gw; ++v) {
            std::fill(sem_acc.begin(), sem_acc.end(), 0.0);
            double px_acc = 0.0, py_acc = 0.0, pz_acc = 0.0;
            std::size_t n_valid = 0;

            for (uint32_t i = u * p; i < (u + 1) * p; ++i)
                for (uint32_t j = v * p; j < (v + 1) * p; ++j) {
                    const std::size_t px = std::size_t(i) * frame.width + j;
                    if (!frame.valid[px]) continue;
                    ++n_valid;
                    const float* pt = frame.pointmap.data() + px * 3;
                    px_acc += double(pt[0]);
                    py_acc += double(pt[1]);
                    pz_acc += double(pt[2]);
                    k.accum_add(sem_acc.data(), frame.semantic.data() + px * df, df);
                }
            if (n_valid == 0) continue;  // zero-valid patch is omitted

            const double inv = double(n_valid);
            set.positions.push_back({float(px_acc / inv), float(py_acc / inv), float(pz_acc / inv)});
            set.coords.emplace_back(uint16_t(u), uint16_t(v));

            const std::size_t row = set.semantic.size();
            set.semantic.resize(row + df);
            k.mean_finalize(set.semantic.data() + row, sem_acc.data(), inv, df);

            const float* gsrc = geom.data() + (std::size_t(u) * gw + v) * dg;
            set.geometric.insert(set.geometric.end(), gsrc, gsrc + dg);
        }
    }
    return set;
}

}  // namespace cog3d
