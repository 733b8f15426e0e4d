#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cog3d/fusion_embed.hpp"
#include "cog3d/memory_core.hpp"

namespace cog3d {

// Bit-exact little-endian containers. Every format ends in a CRC-32 of all
// preceding bytes, so any single-bit corruption is detected on load.
//
// Map ("C3DM"): magic | version u32 | K u64 | D_f u32 | D_g u32 | step u32 |
// delta mode u8 + params (static: value f64; dynamic: ratio,min,max f64) |
// seed u64 | K token records {pos 3xf32, created u32, updated u32,
// semantic D_f x f32, geometric D_g x f32} | crc32 u32.
//
// The running ingest bounds are observability-only state and are not stored;
// load re-derives bounds from the token positions.
inline constexpr uint32_t kMapFileVersion = 1;

void save_map(const MemoryState& state, const std::string& path);
MemoryState load_map(const std::string& path);

// ASCII PLY of token positions; vertex colors hash created_step so same-frame
// tokens share a color in a viewer.
void export_ply(const MemoryState& state, const std::string& path);

// Stream ("C3DS"): magic | version u32 | D_f u32 | record count u64 | records
// {kind u8; separator: timestep u32; token: timestep u32, pos 3xf32,
// feature D_f x f32} | crc32 u32.
inline constexpr uint32_t kStreamFileVersion = 1;

void save_stream(const ExportStream& stream, const std::string& path);
ExportStream load_stream(const std::string& path);

// Weight blob ("C3DW"): named f32 tensors. magic | version u32 | count u32 |
// entries {name_len u32, name bytes, rows u64, cols u64, rows*cols f32} |
// crc32 u32.
inline constexpr uint32_t kWeightFileVersion = 1;

struct WeightBlob {
    struct Entry {
        std::string name;
        uint64_t rows = 0;
        uint64_t cols = 0;
        std::vector<float> data;  // rows*cols, row-major
    };
    std::vector<Entry> entries;

    const Entry* find(const std::string& name) const;
    void add(std::string name, uint64_t rows, uint64_t cols, std::vector<float> data);
};

void save_weights(const WeightBlob& blob, const std::string& path);
WeightBlob load_weights(const std::string& path);

// Projector packing: entries "proj.weight" (d_in x d_out) and "proj.bias"
// (1 x d_out).
WeightBlob pack_projector(const Projector& proj);
Projector unpack_projector(const WeightBlob& blob);

// Positional-embedding packing: "pe.variant" (1x1 code), plus per variant
// "pe.fourier.bases" / "pe.fourier.proj", "pe.hrope.bands" (stored f32) or
// "pe.rope4d.base".
WeightBlob pack_pos_embed(const PosEmbedConfig& pe);
PosEmbedConfig unpack_pos_embed(const WeightBlob& blob);

}  // namespace cog3d
