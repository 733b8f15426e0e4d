#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cog3d/patching.hpp"
#include "cog3d/spatial_index.hpp"
#include "cog3d/types.hpp"

namespace cog3d {

// Distance threshold selection. Static uses a fixed radius; Dynamic scales
// with the scene: delta = clamp(ratio * aabb_diagonal(current token positions
// plus the incoming patch positions), min, max).
struct ThresholdPolicy {
    enum class Mode : uint8_t { Static = 0, Dynamic = 1 };

    Mode mode = Mode::Dynamic;
    double value = 0.2;  // Static radius, scene units

    double ratio = 0.03;  // Dynamic: fraction of the scene diagonal
    double min = 1e-6;
    double max = 1e6;

    static ThresholdPolicy static_delta(double v) {
        ThresholdPolicy p;
        p.mode = Mode::Static;
        p.value = v;
        return p;
    }
    static ThresholdPolicy dynamic_delta(double ratio, double min, double max) {
        ThresholdPolicy p;
        p.mode = Mode::Dynamic;
        p.ratio = ratio;
        p.min = min;
        p.max = max;
        return p;
    }

    void validate() const;  // throws ConfigError
};

// One map entry, materialized. The map itself keeps flat storage; this is the
// API-boundary view used by the single-token operations.
struct MemoryToken {
    Vec3f position;
    std::vector<float> semantic;
    std::vector<float> geometric;
    uint32_t created_step = 0;
    uint32_t updated_step = 0;
};

// The 3D cognitive map at step n: an ordered token collection plus the
// bookkeeping the update rule needs. Feature rows are stored flat (row k at
// [k*df, (k+1)*df)) so averaging and fusion run on contiguous memory.
struct MemoryState {
    uint32_t df = 0;
    uint32_t dg = 0;
    uint32_t step = 0;
    ThresholdPolicy delta_policy;
    uint64_t rng_seed = 0;

    // Running bounds over every patch position ever ingested. Updated token
    // positions are means of ingested positions, so this always contains all
    // token positions.
    Aabb aabb;

    std::vector<Vec3f> positions;
    std::vector<uint32_t> created;
    std::vector<uint32_t> updated;
    std::vector<float> semantic;   // size()*df
    std::vector<float> geometric;  // size()*dg

    MemoryState() = default;
    MemoryState(uint32_t df_, uint32_t dg_, ThresholdPolicy policy, uint64_t seed)
        : df(df_), dg(dg_), delta_policy(policy), rng_seed(seed) {
        policy.validate();
    }

    std::size_t size() const { return positions.size(); }

    std::span<const float> semantic_row(std::size_t k) const {
        return {semantic.data() + k * df, df};
    }
    std::span<const float> geometric_row(std::size_t k) const {
        return {geometric.data() + k * dg, dg};
    }

    MemoryToken token(std::size_t k) const;
    void push_token(const MemoryToken& t);
};

// Per-step observability for the compaction experiments.
struct StepReport {
    uint32_t step = 0;
    std::size_t incoming = 0;  // |M_new| for this frame
    std::size_t retained = 0;
    std::size_t updated = 0;
    std::size_t added = 0;
    std::size_t total_after = 0;
    double delta_used = 0.0;
    bool empty_frame = false;  // frame had no usable patch; step was a no-op

    struct Timing {
        double delta_ms = 0.0;
        double index_ms = 0.0;
        double classify_ms = 0.0;
        double update_ms = 0.0;
        double select_ms = 0.0;
        double total_ms = 0.0;
    } timing;
};

struct StepPartition {
    std::vector<uint32_t> upd;
    std::vector<uint32_t> ret;
};

// Threshold for this step. Throws InvalidFrame on an empty token set.
double effective_delta(const MemoryState& state, const PatchTokenSet& new_tokens);

// d_k = min over new positions of ||p_k - p_uv||2 for every existing token,
// f32 math matching the brute-force oracle bit for bit. index must be built
// over new_tokens positions.
std::vector<float> min_distances(const MemoryState& state, const PatchTokenSet& new_tokens,
                                 const SpatialIndex& new_index);

// Splits token indices into updated (d_k < delta) and retained (d_k >= delta);
// both lists ascending. Throws InternalInvariantViolation on a length
// mismatch.
StepPartition partition(const MemoryState& state, std::span<const float> distances, double delta);

// Ids (ascending) of the new tokens strictly within delta of old_position.
// Callers classify the token as updated first, which guarantees a witness;
// an empty result therefore throws InternalInvariantViolation.
std::vector<uint32_t> neighborhood(Vec3f old_position, const PatchTokenSet& new_tokens,
                                   double delta, const SpatialIndex& new_index);

// Replaces a token with the component-wise mean over its neighborhood. The
// old token's own values do not enter the average; created_step survives.
MemoryToken update_token(const MemoryToken& old_token, const PatchTokenSet& new_tokens,
                         std::span<const uint32_t> nbhd_ids, uint32_t step);

// Ids (ascending) of new tokens at distance >= delta from every pre-update
// memory position. old_index must be built over the pre-update positions;
// with empty memory every new token qualifies.
std::vector<uint32_t> select_additions(const PatchTokenSet& new_tokens, const MemoryState& state,
                                       double delta, const SpatialIndex& old_index);

// One recurrent update: classify existing tokens against the frame, average
// the updated ones over their neighborhoods, append non-overlapping new
// tokens. Retained/updated tokens keep their prior order; additions append in
// patch row-major order. Throws InvalidFrame on dimension/timestep mismatch or
// non-finite inputs.
StepReport step(MemoryState& state, const PatchTokenSet& frame_tokens);

// Uniform random subset of at most `budget` tokens, order-preserving and
// deterministic per seed. Identity when already within budget.
MemoryState subsample(const MemoryState& state, std::size_t budget, uint64_t seed);

}  // namespace cog3d
