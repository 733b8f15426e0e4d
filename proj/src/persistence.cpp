#include "cog3d/persistence.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "cog3d/detail/binary_io.hpp"
#include "cog3d/rng.hpp"

namespace cog3d {

namespace {

constexpr char kMapMagic[4] = {'C', '3', 'D', 'M'};
constexpr char kStreamMagic[4] = {'C', '3', 'D', 'S'};
constexpr char kWeightMagic[4] = {'C', '3', 'D', 'W'};

void append_crc(std::vector<uint8_t>& buf) {
    detail::put_u32(buf, detail::crc32(buf.data(), buf.size()));
}

// Common prologue: magic, CRC over everything before the trailer, version.
detail::Reader open_checked(const std::vector<uint8_t>& bytes, const char* magic,
                            uint32_t version, const std::string& what) {
    detail::Reader r(bytes.data(), bytes.size(), what);
    char got[4];
    r.bytes(reinterpret_cast<uint8_t*>(got), 4);
    if (std::memcmp(got, magic, 4) != 0) throw FormatError(what + ": bad magic", 0);

    if (bytes.size() < 12) throw FormatError(what + ": too short for checksum", bytes.size());
    const uint32_t stored = uint32_t(bytes[bytes.size() - 4]) |
                            uint32_t(bytes[bytes.size() - 3]) << 8 |
                            uint32_t(bytes[bytes.size() - 2]) << 16 |
                            uint32_t(bytes[bytes.size() - 1]) << 24;
    if (detail::crc32(bytes.data(), bytes.size() - 4) != stored)
        throw CorruptFile(what + ": checksum mismatch");

    const uint32_t got_version = r.u32();
    if (got_version != version)
        throw VersionError(what + ": unsupported version " + std::to_string(got_version));
    return r;
}

}  // namespace

void save_map(const MemoryState& state, const std::string& path) {
    const std::size_t k = state.size();
    std::vector<uint8_t> buf;
    buf.reserve(64 + k * (12 + 8 + 4 * (std::size_t(state.df) + state.dg)));
    buf.insert(buf.end(), kMapMagic, kMapMagic + 4);
    detail::put_u32(buf, kMapFileVersion);
    detail::put_u64(buf, k);
    detail::put_u32(buf, state.df);
    detail::put_u32(buf, state.dg);
    detail::put_u32(buf, state.step);
    detail::put_u8(buf, uint8_t(state.delta_policy.mode));
    if (state.delta_policy.mode == ThresholdPolicy::Mode::Static) {
        detail::put_f64(buf, state.delta_policy.value);
    } else {
        detail::put_f64(buf, state.delta_policy.ratio);
        detail::put_f64(buf, state.delta_policy.min);
        detail::put_f64(buf, state.delta_policy.max);
    }
    detail::put_u64(buf, state.rng_seed);

    for (std::size_t i = 0; i < k; ++i) {
        detail::put_f32(buf, state.positions[i].x);
        detail::put_f32(buf, state.positions[i].y);
        detail::put_f32(buf, state.positions[i].z);
        detail::put_u32(buf, state.created[i]);
        detail::put_u32(buf, state.updated[i]);
        detail::put_f32_array(buf, state.semantic.data() + i * state.df, state.df);
        detail::put_f32_array(buf, state.geometric.data() + i * state.dg, state.dg);
    }
    append_crc(buf);
    detail::write_file(path, buf);
}

MemoryState load_map(const std::string& path) {
    const std::vector<uint8_t> bytes = detail::read_file(path);
    const std::string what = "map file '" + path + "'";
    detail::Reader r = open_checked(bytes, kMapMagic, kMapFileVersion, what);

    MemoryState state;
    const uint64_t k = r.u64();
    state.df = r.u32();
    state.dg = r.u32();
    state.step = r.u32();
    const uint8_t mode = r.u8();
    if (mode == uint8_t(ThresholdPolicy::Mode::Static)) {
        state.delta_policy.mode = ThresholdPolicy::Mode::Static;
        state.delta_policy.value = r.f64();
    } else if (mode == uint8_t(ThresholdPolicy::Mode::Dynamic)) {
        state.delta_policy.mode = ThresholdPolicy::Mode::Dynamic;
        state.delta_policy.ratio = r.f64();
        state.delta_policy.min = r.f64();
        state.delta_policy.max = r.f64();
    } else {
        throw FormatError(what + ": unknown delta mode " + std::to_string(mode), r.offset() - 1);
    }
    state.rng_seed = r.u64();

    // Validate the record payload length before allocating anything.
    const uint64_t record_bytes = 12 + 8 + 4 * (uint64_t(state.df) + state.dg);
    if (r.remaining() < 4 || (r.remaining() - 4) / record_bytes < k ||
        k * record_bytes != r.remaining() - 4)
        throw FormatError(what + ": token payload does not match K=" + std::to_string(k),
                          r.offset());

    state.positions.resize(k);
    state.created.resize(k);
    state.updated.resize(k);
    state.semantic.resize(k * state.df);
    state.geometric.resize(k * state.dg);
    for (uint64_t i = 0; i < k; ++i) {
        state.positions[i].x = r.f32();
        state.positions[i].y = r.f32();
        state.positions[i].z = r.f32();
        state.created[i] = r.u32();
        state.updated[i] = r.u32();
        r.f32_array(state.semantic.data() + i * state.df, state.df);
        r.f32_array(state.geometric.data() + i * state.dg, state.dg);
    }
    if (r.remaining() != 4)
        throw FormatError(what + ": trailing bytes beyond token records", r.offset());

    for (const Vec3f& p : state.positions) state.aabb.extend(p);
    return state;
}

void export_ply(const MemoryState& state, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot create '" + path + "'", 0);

    out << "ply\nformat ascii 1.0\ncomment cog3dmap token positions\nelement vertex "
        << state.size()
        << "\nproperty float x\nproperty float y\nproperty float z\nproperty uchar red\n"
           "property uchar green\nproperty uchar blue\nend_header\n";

    char line[160];
    for (std::size_t i = 0; i < state.size(); ++i) {
        const Vec3f p = state.positions[i];
        uint64_t h = hash_mix(0xC01C01ULL, state.created[i]);
        const unsigned r = unsigned(h & 0xFF);
        const unsigned g = unsigned((h >> 8) & 0xFF);
        const unsigned b = unsigned((h >> 16) & 0xFF);
        // %.9g round-trips f32 exactly.
        std::snprintf(line, sizeof line, "%.9g %.9g %.9g %u %u %u\n", double(p.x), double(p.y),
                      double(p.z), r, g, b);
        out << line;
    }
    out.flush();
    if (!out) throw FormatError("write failed for '" + path + "'", 0);
}

void save_stream(const ExportStream& stream, const std::string& path) {
    std::vector<uint8_t> buf;
    buf.insert(buf.end(), kStreamMagic, kStreamMagic + 4);
    detail::put_u32(buf, kStreamFileVersion);
    detail::put_u32(buf, stream.df);
    detail::put_u64(buf, stream.records.size());
    for (const auto& rec : stream.records) {
        detail::put_u8(buf, uint8_t(rec.kind));
        detail::put_u32(buf, rec.timestep);
        if (rec.kind == ExportRecord::Kind::Token) {
            detail::put_f32(buf, rec.position.x);
            detail::put_f32(buf, rec.position.y);
            detail::put_f32(buf, rec.position.z);
            if (rec.feature.size() != stream.df)
                throw InternalInvariantViolation("stream token feature size mismatch");
            detail::put_f32_array(buf, rec.feature.data(), rec.feature.size());
        }
    }
    append_crc(buf);
    detail::write_file(path, buf);
}

ExportStream load_stream(const std::string& path) {
    const std::vector<uint8_t> bytes = detail::read_file(path);
    const std::string what = "stream file '" + path + "'";
    detail::Reader r = open_checked(bytes, kStreamMagic, kStreamFileVersion, what);

    ExportStream stream;
    stream.df = r.u32();
    const uint64_t count = r.u64();
    if (count > r.remaining() / 5)  // separator records are 5 bytes minimum
        throw FormatError(what + ": record count exceeds payload", r.offset());
    stream.records.reserve(count);
    for (uint64_t i = 0; i < count; ++i) {
        ExportRecord rec;
        const uint8_t kind = r.u8();
        if (kind > 1) throw FormatError(what + ": unknown record kind", r.offset() - 1);
        rec.kind = ExportRecord::Kind(kind);
        rec.timestep = r.u32();
        if (rec.kind == ExportRecord::Kind::Token) {
            rec.position.x = r.f32();
            rec.position.y = r.f32();
            rec.position.z = r.f32();
            rec.feature.resize(stream.df);
            r.f32_array(rec.feature.data(), stream.df);
        }
        stream.records.push_back(std::move(rec));
    }
    if (r.remaining() != 4) throw FormatError(what + ": trailing bytes", r.offset());
    return stream;
}

const WeightBlob::Entry* WeightBlob::find(const std::string& name) const {
    for (const auto& e : entries)
        if (e.name == name) return &e;
    return nullptr;
}

void WeightBlob::add(std::string name, uint64_t rows, uint64_t cols, std::vector<float> data) {
    if (data.size() != rows * cols)
        throw ConfigError("weight tensor '" + name + "' data size does not match shape");
    entries.push_back({std::move(name), rows, cols, std::move(data)});
}

void save_weights(const WeightBlob& blob, const std::string& path) {
    std::vector<uint8_t> buf;
    buf.insert(buf.end(), kWeightMagic, kWeightMagic + 4);
    detail::put_u32(buf, kWeightFileVersion);
    detail::put_u32(buf, uint32_t(blob.entries.size()));
    for (const auto& e : blob.entries) {
        detail::put_u32(buf, uint32_t(e.name.size()));
        buf.insert(buf.end(), e.name.begin(), e.name.end());
        detail::put_u64(buf, e.rows);
        detail::put_u64(buf, e.cols);
        detail::put_f32_array(buf, e.data.data(), e.data.size());
    }
    append_crc(buf);
    detail::write_file(path, buf);
}

WeightBlob load_weights(const std::string& path) {
    const std::vector<uint8_t> bytes = detail::read_file(path);
    const std::string what = "weight file '" + path + "'";
    detail::Reader r = open_checked(bytes, kWeightMagic, kWeightFileVersion, what);

    WeightBlob blob;
    const uint32_t count = r.u32();
    for (uint32_t i = 0; i < count; ++i) {
        WeightBlob::Entry e;
        const uint32_t name_len = r.u32();
        if (name_len > 4096) throw FormatError(what + ": tensor name too long", r.offset() - 4);
        e.name.resize(name_len);
        r.bytes(reinterpret_cast<uint8_t*>(e.name.data()), name_len);
        e.rows = r.u64();
        e.cols = r.u64();
        if (e.cols != 0 && e.rows > r.remaining() / 4 / e.cols)
            throw FormatError(what + ": tensor '" + e.name + "' exceeds payload",
                              r.offset() - 16);
        e.data.resize(e.rows * e.cols);
        r.f32_array(e.data.data(), e.data.size());
        blob.entries.push_back(std::move(e));
    }
    if (r.remaining() != 4) throw FormatError(what + ": trailing bytes", r.offset());
    return blob;
}

WeightBlob pack_projector(const Projector& proj) {
    proj.validate();
    WeightBlob blob;
    blob.add("proj.weight", proj.d_in, proj.d_out, proj.weights);
    blob.add("proj.bias", 1, proj.d_out, proj.bias);
    return blob;
}

Projector unpack_projector(const WeightBlob& blob) {
    const auto* w = blob.find("proj.weight");
    const auto* b = blob.find("proj.bias");
    if (w == nullptr || b == nullptr)
        throw ConfigError("weight blob is missing proj.weight / proj.bias");
    if (b->rows != 1 || b->cols != w->cols)
        throw ConfigError("projector bias shape does not match weight");
    Projector proj;
    proj.d_in = uint32_t(w->rows);
    proj.d_out = uint32_t(w->cols);
    proj.weights = w->data;
    proj.bias = b->data;
    proj.validate();
    return proj;
}

WeightBlob pack_pos_embed(const PosEmbedConfig& pe) {
    WeightBlob blob;
    blob.add("pe.variant", 1, 1, {float(uint8_t(pe.variant))});
    switch (pe.variant) {
        case PosEmbedConfig::Variant::None:
            break;
        case PosEmbedConfig::Variant::LearnableFourier: {
            blob.add("pe.fourier.bases", pe.fourier_bases.size() / 3, 3, pe.fourier_bases);
            if (!pe.fourier_proj.empty()) {
                const uint64_t two_b = (pe.fourier_bases.size() / 3) * 2;
                blob.add("pe.fourier.proj", two_b, pe.fourier_proj.size() / two_b,
                         pe.fourier_proj);
            }
            break;
        }
        case PosEmbedConfig::Variant::HRope: {
            std::vector<float> bands(pe.hrope.band_freqs.begin(), pe.hrope.band_freqs.end());
            const uint64_t n_bands = bands.size();
            blob.add("pe.hrope.bands", 1, n_bands, std::move(bands));
            break;
        }
        case PosEmbedConfig::Variant::Rope4d:
            blob.add("pe.rope4d.base", 1, 1, {float(pe.rope4d.base)});
            break;
    }
    return blob;
}

PosEmbedConfig unpack_pos_embed(const WeightBlob& blob) {
    const auto* variant = blob.find("pe.variant");
    if (variant == nullptr || variant->data.size() != 1)
        throw ConfigError("weight blob is missing pe.variant");
    PosEmbedConfig pe;
    const int code = int(variant->data[0]);
    switch (code) {
        case 0:
            pe.variant = PosEmbedConfig::Variant::None;
            break;
        case 1: {
            pe.variant = PosEmbedConfig::Variant::LearnableFourier;
            const auto* bases = blob.find("pe.fourier.bases");
            if (bases == nullptr || bases->cols != 3)
                throw ConfigError("fourier embedding requires pe.fourier.bases (Bx3)");
            pe.fourier_bases = bases->data;
            if (const auto* proj = blob.find("pe.fourier.proj")) pe.fourier_proj = proj->data;
            break;
        }
        case 2: {
            pe.variant = PosEmbedConfig::Variant::HRope;
            const auto* bands = blob.find("pe.hrope.bands");
            if (bands == nullptr || bands->data.empty())
                throw ConfigError("hrope embedding requires pe.hrope.bands");
            pe.hrope.band_freqs.assign(bands->data.begin(), bands->data.end());
            break;
        }
        case 3: {
            pe.variant = PosEmbedConfig::Variant::Rope4d;
            const auto* base = blob.find("pe.rope4d.base");
            if (base == nullptr || base->data.size() != 1)
                throw ConfigError("rope4d embedding requires pe.rope4d.base");
            pe.rope4d.base = double(base->data[0]);
            break;
        }
        default:
            throw ConfigError("unknown pe.variant code " + std::to_string(code));
    }
    return pe;
}

}  // namespace cog3d
