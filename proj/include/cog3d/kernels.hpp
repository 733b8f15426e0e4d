#pragma once

#include <cstddef>

namespace cog3d::kernels {

// Data-parallel inner loops behind the map pipeline. Every entry has a scalar
// reference implementation and, on x86-64 with AVX2, a vector variant that is
// bit-identical to it: per-element operations keep the scalar evaluation
// order, no FMA contraction, and IEEE-correct sqrt/div/convert only. The
// equivalence suite asserts bitwise equality between the two backends.
//
// All float inputs are assumed finite.
struct Ops {
    // out[i] = sqrt((xs[i]-qx)^2 + (ys[i]-qy)^2 + (zs[i]-qz)^2), f32 math,
    // summed as (dx*dx + dy*dy) + dz*dz.
    void (*l2_dist_batch)(float qx, float qy, float qz, const float* xs, const float* ys,
                          const float* zs, std::size_t n, float* out);

    // acc[i] += (double)src[i]
    void (*accum_add)(double* acc, const float* src, std::size_t n);

    // dst[i] = (float)(acc[i] / divisor)
    void (*mean_finalize)(float* dst, const double* acc, double divisor, std::size_t n);

    // dst[i] = dst[i] > src[i] ? dst[i] : src[i]
    void (*max_update)(float* dst, const float* src, std::size_t n);

    // acc[i] += (double)w[i] * (double)s  — one input column of a matvec.
    void (*axpy_acc)(double* acc, const float* w, float s, std::size_t n);

    // dst[i] = (float)((double)base[i] + acc[i])
    void (*add_finalize)(float* dst, const float* base, const double* acc, std::size_t n);

    const char* name;
};

// Active backend. Chosen once per process: AVX2 when the CPU supports it,
// scalar otherwise. COG3DMAP_SIMD={auto|scalar|avx2} overrides.
const Ops& ops();

// Named backends for the equivalence tests.
const Ops& scalar_ops();
const Ops* avx2_ops();  // nullptr when unavailable at build or run time

}  // namespace cog3d::kernels
