#include "cog3d/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace cog3d::kernels {

const Ops* avx2_ops_table();  // defined in kernels_avx2.cpp

namespace {

bool cpu_has_avx2() {
#if (defined(__x86_64__) || defined(_M_X64)) && defined(__GNUC__)
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

const Ops* select_backend() {
    const Ops* avx2 = avx2_ops();
    const char* env = std::getenv("COG3DMAP_SIMD");
    if (env != nullptr) {
        if (std::strcmp(env, "scalar") == 0) return &scalar_ops();
        if (std::strcmp(env, "avx2") == 0 && avx2 != nullptr) return avx2;
        // "auto" or anything unrecognized falls through to detection.
    }
    return avx2 != nullptr ? avx2 : &scalar_ops();
}

}  // namespace

const Ops* avx2_ops() {
    static const Ops* table = cpu_has_avx2() ? avx2_ops_table() : nullptr;
    return table;
}

const Ops& ops() {
    static const Ops* selected = select_backend();
    return *selected;
}

}  // namespace cog3d::kernels
