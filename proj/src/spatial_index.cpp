#include "cog3d/spatial_index.hpp"

#include <algorithm>
#include <cmath>

#include "cog3d/kernels.hpp"
#include "cog3d/rng.hpp"

namespace cog3d {

namespace {

constexpr std::size_t kScanChunk = 256;

int64_t cell_index_1d(double v, double inv_cell) {
    double c = std::floor(v * inv_cell);
    // Finite inputs can still produce cell coordinates beyond int64 when the
    // cell size is tiny; clamping only merges extreme cells, distances stay
    // exact.
    c = std::min(std::max(c, -9.0e18), 9.0e18);
    return int64_t(c);
}

}  // namespace

std::size_t SpatialIndex::CellHash::operator()(const CellCoord& c) const {
    uint64_t h = hash_mix(uint64_t(c.x), uint64_t(c.y));
    return std::size_t(hash_mix(h, uint64_t(c.z)));
}

SpatialIndex::CellCoord SpatialIndex::cell_of(Vec3f p) const {
    const double inv = 1.0 / cell_size_;
    return {cell_index_1d(double(p.x), inv), cell_index_1d(double(p.y), inv),
            cell_index_1d(double(p.z), inv)};
}

SpatialIndex SpatialIndex::build(std::span<const Vec3f> points, double cell_size) {
    if (!(cell_size > 0.0) || !std::isfinite(cell_size))
        throw ConfigError("spatial index cell_size must be positive and finite");

    SpatialIndex index;
    index.cell_size_ = cell_size;
    index.count_ = points.size();
    if (points.empty()) return index;

    // Pass 1: assign cell slots in first-encounter order and count occupancy.
    std::vector<uint32_t> point_cell(points.size());
    std::vector<uint32_t> cell_counts;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const Vec3f p = points[i];
        if (!p.finite())
            throw InvalidInput("spatial index input point " + std::to_string(i) +
                               " is not finite");
        const CellCoord c = index.cell_of(p);
        auto [it, inserted] = index.cell_lookup_.try_emplace(c, uint32_t(cell_counts.size()));
        if (inserted) {
            cell_counts.push_back(0);
            if (index.cell_lookup_.size() == 1) {
                index.cell_lo_ = index.cell_hi_ = c;
            } else {
                index.cell_lo_ = {std::min(index.cell_lo_.x, c.x), std::min(index.cell_lo_.y, c.y),
                                  std::min(index.cell_lo_.z, c.z)};
                index.cell_hi_ = {std::max(index.cell_hi_.x, c.x), std::max(index.cell_hi_.y, c.y),
                                  std::max(index.cell_hi_.z, c.z)};
            }
        }
        point_cell[i] = it->second;
        ++cell_counts[it->second];
    }

    // Pass 2: prefix sums, then place points; ascending point order keeps ids
    // sorted within each cell.
    index.offsets_.assign(cell_counts.size() + 1, 0);
    for (std::size_t c = 0; c < cell_counts.size(); ++c)
        index.offsets_[c + 1] = index.offsets_[c] + cell_counts[c];

    index.ids_.resize(points.size());
    index.xs_.resize(points.size());
    index.ys_.resize(points.size());
    index.zs_.resize(points.size());
    std::vector<uint32_t> cursor(index.offsets_.begin(), index.offsets_.end() - 1);
    for (std::size_t i = 0; i < points.size(); ++i) {
        const uint32_t pos = cursor[point_cell[i]]++;
        index.ids_[pos] = uint32_t(i);
        index.xs_[pos] = points[i].x;
        index.ys_[pos] = points[i].y;
        index.zs_[pos] = points[i].z;
    }
    return index;
}

std::vector<uint32_t> SpatialIndex::radius_query(Vec3f q, double r) const {
    std::vector<uint32_t> out;
    radius_query(q, r, out);
    return out;
}

void SpatialIndex::radius_query(Vec3f q, double r, std::vector<uint32_t>& out) const {
    out.clear();
    if (count_ == 0 || !(r > 0.0)) return;

    const double inv = 1.0 / cell_size_;
    const auto lo = CellCoord{std::max(cell_index_1d(double(q.x) - r, inv), cell_lo_.x),
                              std::max(cell_index_1d(double(q.y) - r, inv), cell_lo_.y),
                              std::max(cell_index_1d(double(q.z) - r, inv), cell_lo_.z)};
    const auto hi = CellCoord{std::min(cell_index_1d(double(q.x) + r, inv), cell_hi_.x),
                              std::min(cell_index_1d(double(q.y) + r, inv), cell_hi_.y),
                              std::min(cell_index_1d(double(q.z) + r, inv), cell_hi_.z)};

    const float rf = float(r);
    float dist_buf[kScanChunk];
    const auto& k = kernels::ops();
    for (int64_t cx = lo.x; cx <= hi.x; ++cx)
        for (int64_t cy = lo.y; cy <= hi.y; ++cy)
            for (int64_t cz = lo.z; cz <= hi.z; ++cz) {
                const auto it = cell_lookup_.find({cx, cy, cz});
                if (it == cell_lookup_.end()) continue;
                const uint32_t begin = offsets_[it->second];
                const uint32_t end = offsets_[it->second + 1];
                for (uint32_t s = begin; s < end; s += kScanChunk) {
                    const std::size_t n = std::min<std::size_t>(kScanChunk, end - s);
                    k.l2_dist_batch(q.x, q.y, q.z, xs_.data() + s, ys_.data() + s,
                                    zs_.data() + s, n, dist_buf);
                    for (std::size_t j = 0; j < n; ++j)
                        if (dist_buf[j] < rf) out.push_back(ids_[s + j]);
                }
            }
    std::sort(out.begin(), out.end());
}

bool SpatialIndex::has_within(Vec3f q, double r) const {
    if (count_ == 0 || !(r > 0.0)) return false;

    const double inv = 1.0 / cell_size_;
    const auto lo = CellCoord{std::max(cell_index_1d(double(q.x) - r, inv), cell_lo_.x),
                              std::max(cell_index_1d(double(q.y) - r, inv), cell_lo_.y),
                              std::max(cell_index_1d(double(q.z) - r, inv), cell_lo_.z)};
    const auto hi = CellCoord{std::min(cell_index_1d(double(q.x) + r, inv), cell_hi_.x),
                              std::min(cell_index_1d(double(q.y) + r, inv), cell_hi_.y),
                              std::min(cell_index_1d(double(q.z) + r, inv), cell_hi_.z)};

    const float rf = float(r);
    float dist_buf[kScanChunk];
    const auto& k = kernels::ops();
    for (int64_t cx = lo.x; cx <= hi.x; ++cx)
        for (int64_t cy = lo.y; cy <= hi.y; ++cy)
            for (int64_t cz = lo.z; cz <= hi.z; ++cz) {
                const auto it = cell_lookup_.find({cx, cy, cz});
                if (it == cell_lookup_.end()) continue;
                const uint32_t begin = offsets_[it->second];
                const uint32_t end = offsets_[it->second + 1];
                for (uint32_t s = begin; s < end; s += kScanChunk) {
                    const std::size_t n = std::min<std::size_t>(kScanChunk, end - s);
                    k.l2_dist_batch(q.x, q.y, q.z, xs_.data() + s, ys_.data() + s,
                                    zs_.data() + s, n, dist_buf);
                    for (std::size_t j = 0; j < n; ++j)
                        if (dist_buf[j] < rf) return true;
                }
            }
    return false;
}

void SpatialIndex::scan_cell_min(uint32_t cell, Vec3f q, float& best,
                                 std::optional<uint32_t>& best_id) const {
    const uint32_t begin = offsets_[cell];
    const uint32_t end = offsets_[cell + 1];
    float dist_buf[kScanChunk];
    const auto& k = kernels::ops();
    for (uint32_t s = begin; s < end; s += kScanChunk) {
        const std::size_t n = std::min<std::size_t>(kScanChunk, end - s);
        k.l2_dist_batch(q.x, q.y, q.z, xs_.data() + s, ys_.data() + s, zs_.data() + s, n,
                        dist_buf);
        for (std::size_t j = 0; j < n; ++j) {
            const float d = dist_buf[j];
            const uint32_t id = ids_[s + j];
            if (d < best || (d == best && (!best_id || id < *best_id))) {
                best = d;
                best_id = id;
            }
        }
    }
}

std::pair<float, std::optional<uint32_t>> SpatialIndex::min_distance(Vec3f q) const {
    float best = std::numeric_limits<float>::infinity();
    std::optional<uint32_t> best_id;
    if (count_ == 0) return {best, best_id};

    const CellCoord c0 = cell_of(q);

    // Ring bounds: the first ring that can intersect the occupied box, and the
    // last ring that does.
    auto gap = [](int64_t v, int64_t lo, int64_t hi) -> int64_t {
        if (v < lo) return lo - v;
        if (v > hi) return v - hi;
        return 0;
    };
    auto span = [](int64_t v, int64_t lo, int64_t hi) -> int64_t {
        return std::max(std::llabs(v - lo), std::llabs(v - hi));
    };
    const int64_t first_ring = std::max({gap(c0.x, cell_lo_.x, cell_hi_.x),
                                         gap(c0.y, cell_lo_.y, cell_hi_.y),
                                         gap(c0.z, cell_lo_.z, cell_hi_.z)});
    const int64_t last_ring = std::max({span(c0.x, cell_lo_.x, cell_hi_.x),
                                        span(c0.y, cell_lo_.y, cell_hi_.y),
                                        span(c0.z, cell_lo_.z, cell_hi_.z)});

    auto visit = [&](int64_t cx, int64_t cy, int64_t cz) {
        if (cx < cell_lo_.x || cx > cell_hi_.x || cy < cell_lo_.y || cy > cell_hi_.y ||
            cz < cell_lo_.z || cz > cell_hi_.z)
            return;
        const auto it = cell_lookup_.find({cx, cy, cz});
        if (it != cell_lookup_.end()) scan_cell_min(it->second, q, best, best_id);
    };

    // Phase 1, dense/near case: expanding rings around the query cell. Any
    // point in a ring-L cell is at least (L-1)*cell_size away, so once that
    // bound exceeds the best distance the result is proven. Ties at the bound
    // are still scanned so the lowest-id rule holds. Shells grow as O(L^2),
    // so this phase is only worth it close to the occupied box; far or
    // unresolved queries fall through to the pruned cell scan below.
    const int64_t ring_budget = 2;
    bool resolved = false;
    if (first_ring <= ring_budget) {
        const int64_t ring_end = std::min(first_ring + ring_budget, last_ring);
        int64_t ring = first_ring;
        for (; ring <= ring_end; ++ring) {
            if (best_id && double(ring - 1) * cell_size_ > double(best)) {
                resolved = true;
                break;
            }
            if (ring == 0) {
                visit(c0.x, c0.y, c0.z);
                continue;
            }
            // Shell faces: x = +/-ring full, y = +/-ring without x edges,
            // z = +/-ring interior only.
            for (int64_t sx : {-ring, ring})
                for (int64_t dy = -ring; dy <= ring; ++dy)
                    for (int64_t dz = -ring; dz <= ring; ++dz)
                        visit(c0.x + sx, c0.y + dy, c0.z + dz);
            for (int64_t sy : {-ring, ring})
                for (int64_t dx = -ring + 1; dx <= ring - 1; ++dx)
                    for (int64_t dz = -ring; dz <= ring; ++dz)
                        visit(c0.x + dx, c0.y + sy, c0.z + dz);
            for (int64_t sz : {-ring, ring})
                for (int64_t dx = -ring + 1; dx <= ring - 1; ++dx)
                    for (int64_t dy = -ring + 1; dy <= ring - 1; ++dy)
                        visit(c0.x + dx, c0.y + dy, c0.z + sz);
        }
        if (!resolved && ring > last_ring)
            resolved = true;  // every occupied cell was visited
        if (!resolved && best_id && double(ring - 1) * cell_size_ > double(best))
            resolved = true;
    }
    if (resolved) return {best, best_id};

    // Phase 2, exact fallback: scan every occupied cell, pruned by the
    // distance from q to the (slightly widened) cell box. Rescanning phase-1
    // cells is harmless; the (distance, id) minimum is order-independent.
    const double pad = cell_size_ * 1e-9;
    const double qx = double(q.x), qy = double(q.y), qz = double(q.z);
    for (const auto& [cell, slot] : cell_lookup_) {
        auto axis_gap = [&](double v, int64_t c) {
            const double lo = double(c) * cell_size_ - pad;
            const double hi = double(c + 1) * cell_size_ + pad;
            return v < lo ? lo - v : (v > hi ? v - hi : 0.0);
        };
        const double dx = axis_gap(qx, cell.x);
        const double dy = axis_gap(qy, cell.y);
        const double dz = axis_gap(qz, cell.z);
        if (best_id && std::sqrt(dx * dx + dy * dy + dz * dz) > double(best)) continue;
        scan_cell_min(slot, q, best, best_id);
    }
    return {best, best_id};
}

double chamfer_distance(std::span<const Vec3f> a, std::span<const Vec3f> b) {
    if (a.empty() && b.empty()) return 0.0;
    if (a.empty() || b.empty()) return std::numeric_limits<double>::infinity();

    auto one_sided = [](std::span<const Vec3f> from, std::span<const Vec3f> to) {
        Aabb box;
        for (const Vec3f& p : to) box.extend(p);
        const double cell = std::max(box.diagonal() / 50.0, 1e-9);
        const SpatialIndex index = SpatialIndex::build(to, cell);
        double sum = 0.0;
        for (const Vec3f& p : from) sum += double(index.min_distance(p).first);
        return sum / double(from.size());
    };
    return 0.5 * (one_sided(a, b) + one_sided(b, a));
}

}  // namespace cog3d
