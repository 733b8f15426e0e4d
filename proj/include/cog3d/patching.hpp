#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cog3d/types.hpp"

namespace cog3d {

// One frame of dense per-pixel inputs: registered 3D coordinates, a semantic
// feature map, a geometric feature map and a validity mask. Arrays are
// row-major with interleaved channels.
struct FrameBundle {
    uint32_t height = 0;
    uint32_t width = 0;
    uint32_t df = 0;
    uint32_t dg = 0;
    uint32_t timestep = 0;
    uint32_t patch_size = 32;

    std::vector<float> pointmap;    // height*width*3
    std::vector<float> semantic;    // height*width*df
    std::vector<float> geometric;   // height*width*dg
    std::vector<uint8_t> valid;     // height*width, 0 or 1

    std::size_t pixel_count() const { return std::size_t(height) * width; }

    // Array sizes and (for valid pixels) finiteness. Throws InvalidFrame.
    void validate() const;
};

// Pooled per-patch tokens for one frame, in row-major patch order. Features
// are stored flat so downstream averaging runs on contiguous rows.
struct PatchTokenSet {
    uint32_t grid_h = 0;
    uint32_t grid_w = 0;
    uint32_t timestep = 0;
    uint32_t df = 0;
    uint32_t dg = 0;

    std::vector<Vec3f> positions;
    std::vector<std::pair<uint16_t, uint16_t>> coords;  // (u, v) = (patch row, patch col)
    std::vector<float> semantic;   // size()*df
    std::vector<float> geometric;  // size()*dg

    std::size_t size() const { return positions.size(); }

    std::span<const float> semantic_row(std::size_t i) const {
        return {semantic.data() + i * df, df};
    }
    std::span<const float> geometric_row(std::size_t i) const {
        return {geometric.data() + i * dg, dg};
    }
};

// Patch-level geometric feature extraction. The learned encoder this stands in
// for ships as weights we do not have, so the artifact exposes three analytic
// modes behind the same resolution contract.
struct GeomPatchEncoder {
    enum class Mode { MaskedMean, StridedMax, External };

    Mode mode = Mode::MaskedMean;
    // External only: affine map dg -> dg. weights[j*dg + i] maps input channel
    // j to output channel i; bias has dg entries.
    std::vector<float> weights;
    std::vector<float> bias;

    static GeomPatchEncoder masked_mean() { return {}; }
    static GeomPatchEncoder strided_max() { return {Mode::StridedMax, {}, {}}; }
    static GeomPatchEncoder external(std::vector<float> weights, std::vector<float> bias) {
        return {Mode::External, std::move(weights), std::move(bias)};
    }
};

// Per-patch geometric features over the full patch grid, flat grid_h*grid_w*dg
// (zero-valid patches are left zeroed; pooling drops them). Throws ConfigError
// on an External encoder whose weight shapes do not match frame.dg,
// InvalidFrame when height/width are not divisible by patch_size.
std::vector<float> encode_geometry(const FrameBundle& frame, const GeomPatchEncoder& encoder);

// Masked mean pooling of positions and semantics over each patch, geometric
// features from the encoder. Patches without a single valid pixel are omitted.
PatchTokenSet pool_patches(const FrameBundle& frame,
                           const GeomPatchEncoder& encoder = GeomPatchEncoder::masked_mean());

}  // namespace cog3d
