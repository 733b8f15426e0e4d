#include <cmath>
#include <cstddef>

#include "cog3d/kernels.hpp"

// Reference backend. These loops define the numeric contract; the AVX2
// variants must reproduce them bit for bit (the TU is compiled with
// -ffp-contract=off so the compiler cannot fuse the multiply-adds).

namespace cog3d::kernels {

namespace {

void l2_dist_batch_scalar(float qx, float qy, float qz, const float* xs, const float* ys,
                          const float* zs, std::size_t n, float* out) {
    for (std::size_t i = 0; i < n; ++i) {
        const float dx = xs[i] - qx;
        const float dy = ys[i] - qy;
        const float dz = zs[i] - qz;
        out[i] = std::sqrt((dx * dx + dy * dy) + dz * dz);
    }
}

void accum_add_scalar(double* acc, const float* src, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) acc[i] += double(src[i]);
}

void mean_finalize_scalar(float* dst, const double* acc, double divisor, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = float(acc[i] / divisor);
}

void max_update_scalar(float* dst, const float* src, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = dst[i] > src[i] ? dst[i] : src[i];
}

void axpy_acc_scalar(double* acc, const float* w, float s, std::size_t n) {
    const double sd = double(s);
    for (std::size_t i = 0; i < n; ++i) acc[i] += double(w[i]) * sd;
}

void add_finalize_scalar(float* dst, const float* base, const double* acc, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = float(double(base[i]) + acc[i]);
}

}  // namespace

const Ops& scalar_ops() {
    static const Ops table{
        l2_dist_batch_scalar, accum_add_scalar, mean_finalize_scalar,
        max_update_scalar,    axpy_acc_scalar,  add_finalize_scalar,
        "scalar",
    };
    return table;
}

}  // namespace cog3d::kernels
