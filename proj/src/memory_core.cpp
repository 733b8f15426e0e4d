#include "cog3d/memory_core.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "cog3d/kernels.hpp"
#include "cog3d/parallel.hpp"
#include "cog3d/rng.hpp"

namespace cog3d {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void check_frame_tokens(const MemoryState& state, const PatchTokenSet& frame) {
    if (frame.df != state.df || frame.dg != state.dg)
        throw InvalidFrame("frame dims (" + std::to_string(frame.df) + "," +
                           std::to_string(frame.dg) + ") do not match state dims (" +
                           std::to_string(state.df) + "," + std::to_string(state.dg) + ")");
    if (frame.timestep != state.step + 1)
        throw InvalidFrame("frame timestep " + std::to_string(frame.timestep) +
                           " out of order, expected " + std::to_string(state.step + 1));
    if (frame.semantic.size() != frame.size() * frame.df ||
        frame.geometric.size() != frame.size() * frame.dg ||
        frame.coords.size() != frame.size())
        throw InvalidFrame("patch token set has inconsistent array sizes");
    for (std::size_t i = 0; i < frame.size(); ++i) {
        if (!frame.positions[i].finite())
            throw InvalidFrame("non-finite patch position at token " + std::to_string(i));
    }
    for (float v : frame.semantic)
        if (!std::isfinite(v)) throw InvalidFrame("non-finite semantic feature");
    for (float v : frame.geometric)
        if (!std::isfinite(v)) throw InvalidFrame("non-finite geometric feature");
}

}  // namespace

void ThresholdPolicy::validate() const {
    if (mode == Mode::Static) {
        if (!(value > 0.0) || !std::isfinite(value))
            throw ConfigError("static delta must be positive and finite");
    } else {
        if (!(ratio > 0.0) || !std::isfinite(ratio))
            throw ConfigError("dynamic delta ratio must be positive and finite");
        if (!(min > 0.0) || !(min <= max))
            throw ConfigError("dynamic delta clamp requires 0 < min <= max");
    }
}

MemoryToken MemoryState::token(std::size_t k) const {
    MemoryToken t;
    t.position = positions[k];
    t.semantic.assign(semantic.begin() + k * df, semantic.begin() + (k + 1) * df);
    t.geometric.assign(geometric.begin() + k * dg, geometric.begin() + (k + 1) * dg);
    t.created_step = created[k];
    t.updated_step = updated[k];
    return t;
}

void MemoryState::push_token(const MemoryToken& t) {
    positions.push_back(t.position);
    created.push_back(t.created_step);
    updated.push_back(t.updated_step);
    semantic.insert(semantic.end(), t.semantic.begin(), t.semantic.end());
    geometric.insert(geometric.end(), t.geometric.begin(), t.geometric.end());
}

double effective_delta(const MemoryState& state, const PatchTokenSet& new_tokens) {
    if (new_tokens.size() == 0) throw InvalidFrame("effective_delta on empty token set");
    const ThresholdPolicy& p = state.delta_policy;
    p.validate();
    if (p.mode == ThresholdPolicy::Mode::Static) return p.value;

    Aabb box;
    for (const Vec3f& pos : state.positions) box.extend(pos);
    for (const Vec3f& pos : new_tokens.positions) box.extend(pos);
    const double raw = p.ratio * box.diagonal();
    return std::min(std::max(raw, p.min), p.max);
}

std::vector<float> min_distances(const MemoryState& state, const PatchTokenSet& new_tokens,
                                 const SpatialIndex& new_index) {
    (void)new_tokens;
    std::vector<float> out(state.size());
    parallel_for(state.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k)
            out[k] = new_index.min_distance(state.positions[k]).first;
    });
    return out;
}

StepPartition partition(const MemoryState& state, std::span<const float> distances, double delta) {
    if (distances.size() != state.size())
        throw InternalInvariantViolation("partition distance count " +
                                         std::to_string(distances.size()) +
                                         " != token count " + std::to_string(state.size()));
    StepPartition part;
    const float delta_f = float(delta);
    for (std::size_t k = 0; k < distances.size(); ++k) {
        // Strict less-than: a token exactly at delta is retained, mirroring
        // the >= rule for additions.
        if (distances[k] < delta_f)
            part.upd.push_back(uint32_t(k));
        else
            part.ret.push_back(uint32_t(k));
    }
    return part;
}

std::vector<uint32_t> neighborhood(Vec3f old_position, const PatchTokenSet& new_tokens,
                                   double delta, const SpatialIndex& new_index) {
    (void)new_tokens;
    std::vector<uint32_t> ids = new_index.radius_query(old_position, delta);
    if (ids.empty())
        throw InternalInvariantViolation(
            "empty neighborhood for a token classified as updated");
    return ids;
}

MemoryToken update_token(const MemoryToken& old_token, const PatchTokenSet& new_tokens,
                         std::span<const uint32_t> nbhd_ids, uint32_t step) {
    if (nbhd_ids.empty())
        throw InternalInvariantViolation("update_token with empty neighborhood");

    const auto& k = kernels::ops();
    const uint32_t df = new_tokens.df;
    const uint32_t dg = new_tokens.dg;

    double px = 0.0, py = 0.0, pz = 0.0;
    std::vector<double> sem_acc(df, 0.0);
    std::vector<double> geo_acc(dg, 0.0);
    for (uint32_t id : nbhd_ids) {
        const Vec3f p = new_tokens.positions[id];
        px += double(p.x);
        py += double(p.y);
        pz += double(p.z);
        k.accum_add(sem_acc.data(), new_tokens.semantic.data() + std::size_t(id) * df, df);
        k.accum_add(geo_acc.data(), new_tokens.geometric.data() + std::size_t(id) * dg, dg);
    }

    const double n = double(nbhd_ids.size());
    MemoryToken out;
    out.position = {float(px / n), float(py / n), float(pz / n)};
    out.semantic.resize(df);
    out.geometric.resize(dg);
    k.mean_finalize(out.semantic.data(), sem_acc.data(), n, df);
    k.mean_finalize(out.geometric.data(), geo_acc.data(), n, dg);
    out.created_step = old_token.created_step;
    out.updated_step = step;
    return out;
}

std::vector<uint32_t> select_additions(const PatchTokenSet& new_tokens, const MemoryState& state,
                                       double delta, const SpatialIndex& old_index) {
    (void)state;
    std::vector<uint8_t> is_add(new_tokens.size(), 0);
    parallel_for(new_tokens.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i)
            is_add[i] = old_index.has_within(new_tokens.positions[i], delta) ? 0 : 1;
    });
    std::vector<uint32_t> adds;
    for (std::size_t i = 0; i < new_tokens.size(); ++i)
        if (is_add[i]) adds.push_back(uint32_t(i));
    return adds;
}

StepReport step(MemoryState& state, const PatchTokenSet& frame_tokens) {
    const auto t_total = Clock::now();
    check_frame_tokens(state, frame_tokens);

    StepReport report;
    report.incoming = frame_tokens.size();

    if (frame_tokens.size() == 0) {
        // A fully invalid frame is consumed as a no-op so the stream stays in
        // timestep order.
        state.step += 1;
        report.step = state.step;
        report.empty_frame = true;
        report.retained = state.size();
        report.total_after = state.size();
        report.timing.total_ms = ms_since(t_total);
        return report;
    }

    auto t0 = Clock::now();
    const double delta = effective_delta(state, frame_tokens);
    report.delta_used = delta;
    report.timing.delta_ms = ms_since(t0);

    t0 = Clock::now();
    const SpatialIndex new_index = SpatialIndex::build(frame_tokens.positions, delta);
    const SpatialIndex old_index = SpatialIndex::build(state.positions, delta);
    report.timing.index_ms = ms_since(t0);

    t0 = Clock::now();
    const std::vector<float> dists = min_distances(state, frame_tokens, new_index);
    const StepPartition part = partition(state, dists, delta);
    report.timing.classify_ms = ms_since(t0);

    const uint32_t next_step = state.step + 1;
    const uint32_t df = state.df;
    const uint32_t dg = state.dg;

    // Averaged replacements are computed against the immutable pre-update
    // state, then written in place; retained rows are untouched, so prior
    // relative order is preserved for both classes.
    t0 = Clock::now();
    std::vector<uint8_t> is_upd(state.size(), 0);
    for (uint32_t k : part.upd) is_upd[k] = 1;

    std::vector<Vec3f> upd_positions(part.upd.size());
    std::vector<float> upd_semantic(part.upd.size() * df);
    std::vector<float> upd_geometric(part.upd.size() * dg);
    parallel_for(part.upd.size(), [&](std::size_t begin, std::size_t end) {
        const auto& k = kernels::ops();
        std::vector<uint32_t> ids;
        std::vector<double> sem_acc(df);
        std::vector<double> geo_acc(dg);
        for (std::size_t u = begin; u < end; ++u) {
            const uint32_t token_id = part.upd[u];
            new_index.radius_query(state.positions[token_id], delta, ids);
            if (ids.empty())
                throw InternalInvariantViolation(
                    "empty neighborhood for updated token " + std::to_string(token_id));

            double px = 0.0, py = 0.0, pz = 0.0;
            std::fill(sem_acc.begin(), sem_acc.end(), 0.0);
            std::fill(geo_acc.begin(), geo_acc.end(), 0.0);
            for (uint32_t id : ids) {
                const Vec3f p = frame_tokens.positions[id];
                px += double(p.x);
                py += double(p.y);
                pz += double(p.z);
                k.accum_add(sem_acc.data(), frame_tokens.semantic.data() + std::size_t(id) * df,
                            df);
                k.accum_add(geo_acc.data(), frame_tokens.geometric.data() + std::size_t(id) * dg,
                            dg);
            }
            const double n = double(ids.size());
            upd_positions[u] = {float(px / n), float(py / n), float(pz / n)};
            k.mean_finalize(upd_semantic.data() + u * df, sem_acc.data(), n, df);
            k.mean_finalize(upd_geometric.data() + u * dg, geo_acc.data(), n, dg);
        }
    });
    report.timing.update_ms = ms_since(t0);

    t0 = Clock::now();
    const std::vector<uint32_t> adds = select_additions(frame_tokens, state, delta, old_index);
    report.timing.select_ms = ms_since(t0);

    // Compose M_n: retained and updated in prior order, additions appended in
    // patch row-major order.
    for (std::size_t u = 0; u < part.upd.size(); ++u) {
        const uint32_t k = part.upd[u];
        state.positions[k] = upd_positions[u];
        std::copy_n(upd_semantic.data() + u * df, df, state.semantic.data() + std::size_t(k) * df);
        std::copy_n(upd_geometric.data() + u * dg, dg,
                    state.geometric.data() + std::size_t(k) * dg);
        state.updated[k] = next_step;
    }
    for (uint32_t id : adds) {
        state.positions.push_back(frame_tokens.positions[id]);
        state.created.push_back(next_step);
        state.updated.push_back(next_step);
        const float* sem = frame_tokens.semantic.data() + std::size_t(id) * df;
        const float* geo = frame_tokens.geometric.data() + std::size_t(id) * dg;
        state.semantic.insert(state.semantic.end(), sem, sem + df);
        state.geometric.insert(state.geometric.end(), geo, geo + dg);
    }
    for (const Vec3f& p : frame_tokens.positions) state.aabb.extend(p);
    state.step = next_step;

    report.step = next_step;
    report.retained = part.ret.size();
    report.updated = part.upd.size();
    report.added = adds.size();
    report.total_after = state.size();
    report.timing.total_ms = ms_since(t_total);
    return report;
}

MemoryState subsample(const MemoryState& state, std::size_t budget, uint64_t seed) {
    if (budget == 0) throw ConfigError("subsample budget must be positive");
    if (state.size() <= budget) return state;

    // Partial Fisher-Yates draw of `budget` distinct indices, then re-sorted
    // so survivors keep their relative order.
    std::vector<uint32_t> order(state.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = uint32_t(i);
    Rng rng(seed);
    for (std::size_t i = 0; i < budget; ++i) {
        const std::size_t j = i + std::size_t(rng.next_below(uint64_t(order.size() - i)));
        std::swap(order[i], order[j]);
    }
    order.resize(budget);
    std::sort(order.begin(), order.end());

    MemoryState out(state.df, state.dg, state.delta_policy, state.rng_seed);
    out.step = state.step;
    out.aabb = state.aabb;
    out.positions.reserve(budget);
    for (uint32_t k : order) {
        out.positions.push_back(state.positions[k]);
        out.created.push_back(state.created[k]);
        out.updated.push_back(state.updated[k]);
        const auto sem = state.semantic_row(k);
        const auto geo = state.geometric_row(k);
        out.semantic.insert(out.semantic.end(), sem.begin(), sem.end());
        out.geometric.insert(out.geometric.end(), geo.begin(), geo.end());
    }
    return out;
}

}  // namespace cog3d
