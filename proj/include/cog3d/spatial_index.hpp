#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cog3d/types.hpp"

namespace cog3d {

// Uniform-grid accelerator for exact radius and nearest-point queries over
// token positions. Points are bucketed by cell = floor(p / cell_size) and
// stored grouped per cell (CSR layout, structure-of-arrays) so a query scans
// contiguous spans with the batch distance kernel.
//
// Exactness contract: all predicates are evaluated on f32 distances computed
// as sqrt((dx*dx + dy*dy) + dz*dz); results are id-identical to a brute-force
// scan, with ties on distance resolved toward the lowest id.
class SpatialIndex {
public:
    SpatialIndex() = default;

    // Throws InvalidInput on non-finite points, ConfigError on cell_size <= 0.
    static SpatialIndex build(std::span<const Vec3f> points, double cell_size);

    std::size_t size() const { return count_; }
    bool empty() const { return count_ == 0; }
    double cell_size() const { return cell_size_; }

    // Ids of all points with ||p - q||2 < r, ascending. r must be > 0.
    std::vector<uint32_t> radius_query(Vec3f q, double r) const;
    void radius_query(Vec3f q, double r, std::vector<uint32_t>& out) const;

    // Globally nearest point: (distance, id). (+inf, nullopt) when empty.
    // Expanding-ring search; a ring at cell distance L is only scanned while
    // (L-1)*cell_size <= best, which bounds every unscanned candidate.
    std::pair<float, std::optional<uint32_t>> min_distance(Vec3f q) const;

    // True when some point satisfies ||p - q||2 < r (early-exit radius scan).
    bool has_within(Vec3f q, double r) const;

private:
    struct CellCoord {
        int64_t x, y, z;
        bool operator==(const CellCoord&) const = default;
    };
    struct CellHash {
        std::size_t operator()(const CellCoord& c) const;
    };

    CellCoord cell_of(Vec3f p) const;

    // Scans one cell span, updating the running (best distance, id) minimum.
    void scan_cell_min(uint32_t cell, Vec3f q, float& best, std::optional<uint32_t>& best_id) const;

    std::unordered_map<CellCoord, uint32_t, CellHash> cell_lookup_;
    std::vector<uint32_t> offsets_;  // per-cell CSR offsets, size cells+1
    std::vector<uint32_t> ids_;      // original point ids grouped by cell, ascending within
    std::vector<float> xs_, ys_, zs_;  // positions in the same grouping
    double cell_size_ = 1.0;
    std::size_t count_ = 0;
    CellCoord cell_lo_{0, 0, 0};  // occupied cell bounds, valid when count_ > 0
    CellCoord cell_hi_{0, 0, 0};
};

// Symmetric Chamfer distance between two position sets:
// 0.5 * (mean_a min_b ||a-b|| + mean_b min_a ||a-b||). Zero when both sets are
// empty, +inf when exactly one is.
double chamfer_distance(std::span<const Vec3f> a, std::span<const Vec3f> b);

}  // namespace cog3d
