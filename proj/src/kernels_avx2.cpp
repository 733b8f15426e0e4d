#include "cog3d/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>
#include <cstddef>

// AVX2 backend. Lanes are independent elements, so vectorizing never reorders
// a per-element computation; VSQRTPS/VDIVPD/VCVTPD2PS are IEEE correctly
// rounded, which keeps every result bit-identical to the scalar reference.
// Tails run the same scalar expressions.

namespace cog3d::kernels {

namespace {

void l2_dist_batch_avx2(float qx, float qy, float qz, const float* xs, const float* ys,
                        const float* zs, std::size_t n, float* out) {
    const __m256 vqx = _mm256_set1_ps(qx);
    const __m256 vqy = _mm256_set1_ps(qy);
    const __m256 vqz = _mm256_set1_ps(qz);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 dx = _mm256_sub_ps(_mm256_loadu_ps(xs + i), vqx);
        const __m256 dy = _mm256_sub_ps(_mm256_loadu_ps(ys + i), vqy);
        const __m256 dz = _mm256_sub_ps(_mm256_loadu_ps(zs + i), vqz);
        const __m256 sum = _mm256_add_ps(
            _mm256_add_ps(_mm256_mul_ps(dx, dx), _mm256_mul_ps(dy, dy)), _mm256_mul_ps(dz, dz));
        _mm256_storeu_ps(out + i, _mm256_sqrt_ps(sum));
    }
    for (; i < n; ++i) {
        const float dx = xs[i] - qx;
        const float dy = ys[i] - qy;
        const float dz = zs[i] - qz;
        out[i] = std::sqrt((dx * dx + dy * dy) + dz * dz);
    }
}

void accum_add_avx2(double* acc, const float* src, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d s = _mm256_cvtps_pd(_mm_loadu_ps(src + i));
        _mm256_storeu_pd(acc + i, _mm256_add_pd(_mm256_loadu_pd(acc + i), s));
    }
    for (; i < n; ++i) acc[i] += double(src[i]);
}

void mean_finalize_avx2(float* dst, const double* acc, double divisor, std::size_t n) {
    const __m256d vdiv = _mm256_set1_pd(divisor);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d q = _mm256_div_pd(_mm256_loadu_pd(acc + i), vdiv);
        _mm_storeu_ps(dst + i, _mm256_cvtpd_ps(q));
    }
    for (; i < n; ++i) dst[i] = float(acc[i] / divisor);
}

void max_update_avx2(float* dst, const float* src, std::size_t n) {
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 m = _mm256_max_ps(_mm256_loadu_ps(dst + i), _mm256_loadu_ps(src + i));
        _mm256_storeu_ps(dst + i, m);
    }
    for (; i < n; ++i) dst[i] = dst[i] > src[i] ? dst[i] : src[i];
}

void axpy_acc_avx2(double* acc, const float* w, float s, std::size_t n) {
    const double sd = double(s);
    const __m256d vs = _mm256_set1_pd(sd);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d wv = _mm256_cvtps_pd(_mm_loadu_ps(w + i));
        const __m256d sum = _mm256_add_pd(_mm256_loadu_pd(acc + i), _mm256_mul_pd(wv, vs));
        _mm256_storeu_pd(acc + i, sum);
    }
    for (; i < n; ++i) acc[i] += double(w[i]) * sd;
}

void add_finalize_avx2(float* dst, const float* base, const double* acc, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d b = _mm256_cvtps_pd(_mm_loadu_ps(base + i));
        const __m256d sum = _mm256_add_pd(b, _mm256_loadu_pd(acc + i));
        _mm_storeu_ps(dst + i, _mm256_cvtpd_ps(sum));
    }
    for (; i < n; ++i) dst[i] = float(double(base[i]) + acc[i]);
}

}  // namespace

const Ops* avx2_ops_table() {
    static const Ops table{
        l2_dist_batch_avx2, accum_add_avx2, mean_finalize_avx2,
        max_update_avx2,    axpy_acc_avx2,  add_finalize_avx2,
        "avx2",
    };
    return &table;
}

}  // namespace cog3d::kernels

#else

namespace cog3d::kernels {
const Ops* avx2_ops_table() { return nullptr; }
}  // namespace cog3d::kernels

#endif
