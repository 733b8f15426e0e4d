#include <cmath>
#include <vector>

#include <doctest.h>

#include "cog3d/fusion_embed.hpp"
#include "support/oracles.hpp"

using namespace cog3d;

namespace {

MemoryToken make_token(Vec3f pos, std::vector<float> f, std::vector<float> g, uint32_t created,
                       uint32_t updated) {
    MemoryToken t;
    t.position = pos;
    t.semantic = std::move(f);
    t.geometric = std::move(g);
    t.created_step = created;
    t.updated_step = updated;
    return t;
}

double l2_norm(std::span<const float> v) {
    double s = 0.0;
    for (float x : v) s += double(x) * double(x);
    return std::sqrt(s);
}

}  // namespace

TEST_CASE("zero projector is the identity on semantics") {
    const MemoryToken t = make_token({0, 0, 0}, {1.5f, -2.25f, 0.125f}, {9.0f, 9.0f}, 1, 1);
    const auto v = fuse(t, Projector::zero(2, 3));
    CHECK(v == t.semantic);
}

TEST_CASE("identity projector adds g to f") {
    const MemoryToken t = make_token({0, 0, 0}, {1.0f, 2.0f}, {3.0f, 4.0f}, 1, 1);
    const auto v = fuse(t, Projector::identity(2));
    CHECK(v == std::vector<float>{4.0f, 6.0f});
}

TEST_CASE("bias-only projector shifts f by b") {
    Projector proj = Projector::zero(2, 2);
    proj.bias = {10.0f, -10.0f};
    const MemoryToken t = make_token({0, 0, 0}, {1.0f, 2.0f}, {3.0f, 4.0f}, 1, 1);
    const auto v = fuse(t, proj);
    CHECK(v == std::vector<float>{11.0f, -8.0f});
}

TEST_CASE("fuse rejects shape mismatches") {
    const MemoryToken t = make_token({0, 0, 0}, {1.0f}, {1.0f, 2.0f}, 1, 1);
    CHECK_THROWS_AS(fuse(t, Projector::zero(3, 1)), ConfigError);
    Projector broken = Projector::zero(2, 1);
    broken.weights.pop_back();
    CHECK_THROWS_AS(fuse(t, broken), ConfigError);
}

TEST_CASE("fuse is affine in g") {
    Rng rng(21);
    const Projector proj = Projector::seeded(5, 4, 77);
    Projector no_bias = proj;
    std::fill(no_bias.bias.begin(), no_bias.bias.end(), 0.0f);

    for (int trial = 0; trial < 50; ++trial) {
        std::vector<float> f(4), g1(5), g2(5), gsum(5);
        for (auto& x : f) x = rng.uniform_f(-1, 1);
        for (std::size_t i = 0; i < 5; ++i) {
            g1[i] = rng.uniform_f(-1, 1);
            g2[i] = rng.uniform_f(-1, 1);
            gsum[i] = g1[i] + g2[i];
        }
        const auto va = fuse(make_token({}, f, gsum, 1, 1), no_bias);
        const auto v1 = fuse(make_token({}, f, g1, 1, 1), no_bias);
        const auto v2 = fuse(make_token({}, f, g2, 1, 1), no_bias);
        for (std::size_t i = 0; i < 4; ++i)
            CHECK(double(va[i]) ==
                  doctest::Approx(double(v1[i]) + double(v2[i]) - double(f[i])).epsilon(1e-5));
    }
}

TEST_CASE("fourier_pe at the origin is zeros then ones") {
    const std::vector<float> bases = {0.3f, -1.0f, 2.0f, 5.0f, 0.0f, 0.25f};
    const auto pe = fourier_pe({0, 0, 0}, bases);
    REQUIRE(pe.size() == 4);
    CHECK(pe[0] == 0.0f);
    CHECK(pe[1] == 0.0f);
    CHECK(pe[2] == 1.0f);
    CHECK(pe[3] == 1.0f);
}

TEST_CASE("zero bases give the same embedding for every position") {
    const std::vector<float> bases(6, 0.0f);
    const auto a = fourier_pe({1, 2, 3}, bases);
    const auto b = fourier_pe({-9, 0.5f, 100}, bases);
    CHECK(a == b);
}

TEST_CASE("single-row fourier basis evaluates sin and cos by hand") {
    const std::vector<float> bases = {3.14159265358979f, 0.0f, 0.0f};
    const auto pe = fourier_pe({0.5f, 7.0f, -3.0f}, bases);
    REQUIRE(pe.size() == 2);
    CHECK(double(pe[0]) == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(double(pe[1]) == doctest::Approx(0.0).epsilon(1e-7));
    CHECK_THROWS_AS(fourier_pe({0, 0, 0}, std::vector<float>{1.0f, 2.0f}), ConfigError);
}

TEST_CASE("hrope at the origin is the identity") {
    HRopeConfig cfg;
    cfg.band_freqs = {1.0, 0.1};
    std::vector<float> v(12);
    Rng rng(3);
    for (auto& x : v) x = rng.uniform_f(-2, 2);
    CHECK(hrope(v, {0, 0, 0}, cfg) == v);
}

TEST_CASE("hrope rotates the x group by freq * p_x") {
    HRopeConfig cfg;
    cfg.band_freqs = {1.0};
    const std::vector<float> v = {1.0f, 0.0f, 0.0f, 0.0f, 0.0f, 0.0f};
    const auto out = hrope(v, {1.5707963267948966f, 0.0f, 0.0f}, cfg);
    CHECK(double(out[0]) == doctest::Approx(0.0).epsilon(1e-7));
    CHECK(double(out[1]) == doctest::Approx(1.0).epsilon(1e-7));
    for (std::size_t i = 2; i < 6; ++i) CHECK(out[i] == 0.0f);
}

TEST_CASE("hrope preserves the L2 norm") {
    HRopeConfig cfg;
    cfg.band_freqs = {1.0, 0.25, 0.0625};
    Rng rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<float> v(18);
        for (auto& x : v) x = rng.uniform_f(-3, 3);
        const Vec3f p{rng.uniform_f(-10, 10), rng.uniform_f(-10, 10), rng.uniform_f(-10, 10)};
        const auto out = hrope(v, p, cfg);
        CHECK(l2_norm(out) == doctest::Approx(l2_norm(v)).epsilon(1e-6));
    }
}

TEST_CASE("hrope rejects non-divisible dims") {
    HRopeConfig cfg;
    cfg.band_freqs = {1.0};
    CHECK_THROWS_AS(hrope(std::vector<float>(4, 0.0f), {0, 0, 0}, cfg), ConfigError);
    cfg.band_freqs.clear();
    CHECK_THROWS_AS(hrope(std::vector<float>(6, 0.0f), {0, 0, 0}, cfg), ConfigError);
}

TEST_CASE("rope4d identity at zero coordinates, norm preservation, divisibility") {
    Rope4dConfig cfg;
    std::vector<float> v(16);
    Rng rng(5);
    for (auto& x : v) x = rng.uniform_f(-2, 2);
    CHECK(rope4d(v, 0.0, {0, 0, 0}, cfg) == v);

    for (int trial = 0; trial < 200; ++trial) {
        std::vector<float> u(24);
        for (auto& x : u) x = rng.uniform_f(-3, 3);
        const auto out = rope4d(u, rng.uniform(0, 50),
                                {rng.uniform_f(-5, 5), rng.uniform_f(-5, 5), rng.uniform_f(-5, 5)},
                                cfg);
        CHECK(l2_norm(out) == doctest::Approx(l2_norm(u)).epsilon(1e-6));
    }

    CHECK_THROWS_AS(rope4d(std::vector<float>(12, 0.0f), 0.0, {0, 0, 0}, cfg), ConfigError);
}

TEST_CASE("rope4d single-pair group matches the 2-D rotation example") {
    // D=8: each coordinate group is one pair with frequency base^0 = 1, so the
    // t group rotates [1,0] by t = pi/2 exactly like the hrope example.
    Rope4dConfig cfg;
    std::vector<float> v(8, 0.0f);
    v[0] = 1.0f;
    const auto out = rope4d(v, 1.5707963267948966, {0, 0, 0}, cfg);
    CHECK(double(out[0]) == doctest::Approx(0.0).epsilon(1e-7));
    CHECK(double(out[1]) == doctest::Approx(1.0).epsilon(1e-7));
    for (std::size_t i = 2; i < 8; ++i) CHECK(out[i] == 0.0f);
}

TEST_CASE("export of a single-frame map is one separator then K tokens") {
    Rng rng(6);
    MemoryState state(3, 2, ThresholdPolicy::static_delta(0.2), 0);
    PatchTokenSet frame = oracle::random_tokens(rng, 10, 3, 2, 1);
    step(state, frame);

    const ExportStream stream =
        export_stream(state, Projector::zero(2, 3), PosEmbedConfig::none());
    REQUIRE(stream.records.size() == 11);
    CHECK(stream.records[0].kind == ExportRecord::Kind::Separator);
    CHECK(stream.records[0].timestep == 1);
    for (std::size_t i = 1; i < stream.records.size(); ++i)
        CHECK(stream.records[i].kind == ExportRecord::Kind::Token);
    CHECK(stream.token_count() == 10);
}

TEST_CASE("export orders by last update, not creation") {
    // Hand-built 3-token map: A untouched since step 1; B created at 1 but
    // updated at 2; C created at 2.
    MemoryState state(1, 1, ThresholdPolicy::static_delta(0.2), 0);
    state.step = 2;
    const auto add = [&](float x, uint32_t created, uint32_t updated, float feat) {
        MemoryToken t;
        t.position = {x, 0, 0};
        t.semantic = {feat};
        t.geometric = {0.0f};
        t.created_step = created;
        t.updated_step = updated;
        state.push_token(t);
        state.aabb.extend(t.position);
    };
    add(0.0f, 1, 1, 10.0f);  // A
    add(1.0f, 1, 2, 20.0f);  // B
    add(2.0f, 2, 2, 30.0f);  // C

    const ExportStream stream =
        export_stream(state, Projector::zero(1, 1), PosEmbedConfig::none());
    REQUIRE(stream.records.size() == 5);
    CHECK(stream.records[0].kind == ExportRecord::Kind::Separator);
    CHECK(stream.records[0].timestep == 1);
    CHECK(stream.records[1].feature[0] == 10.0f);
    CHECK(stream.records[2].kind == ExportRecord::Kind::Separator);
    CHECK(stream.records[2].timestep == 2);
    CHECK(stream.records[3].feature[0] == 20.0f);  // B precedes C (stable)
    CHECK(stream.records[4].feature[0] == 30.0f);

    // Timesteps non-decreasing with a separator opening each group.
    uint32_t last = 0;
    for (const auto& rec : stream.records) {
        CHECK(rec.timestep >= last);
        last = rec.timestep;
    }
}

TEST_CASE("export with zero projector and no embedding returns raw semantics") {
    Rng rng(7);
    MemoryState state(2, 2, ThresholdPolicy::static_delta(0.2), 0);
    PatchTokenSet frame = oracle::random_tokens(rng, 25, 2, 2, 1);
    step(state, frame);
    const ExportStream stream =
        export_stream(state, Projector::zero(2, 2), PosEmbedConfig::none());
    std::size_t k = 0;
    for (const auto& rec : stream.records) {
        if (rec.kind != ExportRecord::Kind::Token) continue;
        CHECK(rec.feature == std::vector<float>(state.semantic_row(k).begin(),
                                                state.semantic_row(k).end()));
        ++k;
    }
}

TEST_CASE("export determinism and rotary variants keep record counts") {
    Rng rng(8);
    MemoryState state(6, 2, ThresholdPolicy::static_delta(0.3), 0);
    for (int s = 1; s <= 3; ++s) {
        PatchTokenSet frame = oracle::random_tokens(rng, 40, 6, 2, uint32_t(s));
        step(state, frame);
    }
    const Projector proj = Projector::seeded(2, 6, 123);

    PosEmbedConfig hrope_cfg;
    hrope_cfg.variant = PosEmbedConfig::Variant::HRope;
    hrope_cfg.hrope.band_freqs = {1.0};  // 6 dims / (1 band * 3 axes) = 2 per group
    const ExportStream a = export_stream(state, proj, hrope_cfg);
    const ExportStream b = export_stream(state, proj, hrope_cfg);
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        CHECK(a.records[i].kind == b.records[i].kind);
        CHECK(a.records[i].feature == b.records[i].feature);
    }
    CHECK(a.token_count() == state.size());
}

TEST_CASE("fourier export validates projection shapes") {
    MemoryState state(4, 2, ThresholdPolicy::static_delta(0.2), 0);
    Rng rng(9);
    PatchTokenSet frame = oracle::random_tokens(rng, 5, 4, 2, 1);
    step(state, frame);
    const Projector proj = Projector::zero(2, 4);

    PosEmbedConfig direct;
    direct.variant = PosEmbedConfig::Variant::LearnableFourier;
    direct.fourier_bases = {1.0f, 0.0f, 0.0f, 0.0f, 1.0f, 0.0f};  // 2 bands -> dim 4 == df
    CHECK_NOTHROW(export_stream(state, proj, direct));

    PosEmbedConfig missing_proj;
    missing_proj.variant = PosEmbedConfig::Variant::LearnableFourier;
    missing_proj.fourier_bases = {1.0f, 0.0f, 0.0f};  // dim 2 != df, no projection
    CHECK_THROWS_AS(export_stream(state, proj, missing_proj), ConfigError);

    const PosEmbedConfig seeded = PosEmbedConfig::seeded_fourier(3, 4, 55);
    CHECK_NOTHROW(export_stream(state, proj, seeded));
}

TEST_CASE("fourier embedding at position zero adds [0..0,1..1]") {
    MemoryState state(2, 1, ThresholdPolicy::static_delta(0.2), 0);
    MemoryToken t = make_token({0, 0, 0}, {1.0f, 2.0f}, {0.0f}, 1, 1);
    state.step = 1;
    state.push_token(t);
    state.aabb.extend(t.position);

    PosEmbedConfig cfg;
    cfg.variant = PosEmbedConfig::Variant::LearnableFourier;
    cfg.fourier_bases = {0.7f, -0.3f, 2.0f};  // one band -> [sin, cos]
    const ExportStream stream = export_stream(state, Projector::zero(1, 2), cfg);
    REQUIRE(stream.records.size() == 2);
    CHECK(stream.records[1].feature == std::vector<float>{1.0f, 3.0f});
}
