#include "dot_kernel.hpp"

#include <cmath>

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>
#define CBIR_AVX2_KERNEL 1
#endif

namespace cbir::detail {

namespace {

inline float combine_lanes(const float* s) noexcept {
    const float t0 = s[0] + s[4];
    const float t1 = s[1] + s[5];
    const float t2 = s[2] + s[6];
    const float t3 = s[3] + s[7];
    return (t0 + t2) + (t1 + t3);
}

#ifdef CBIR_AVX2_KERNEL

inline float hsum(__m256 acc) noexcept {
    const __m128 t = _mm_add_ps(_mm256_castps256_ps128(acc), _mm256_extractf128_ps(acc, 1));
    const __m128 u = _mm_add_ps(t, _mm_movehl_ps(t, t));
    const __m128 w = _mm_add_ss(u, _mm_shuffle_ps(u, u, 0x55));
    return _mm_cvtss_f32(w);
}

template <int Q, int R>
inline void tile(const float* queries, const float* rows, std::size_t stride, float* out,
                 std::size_t out_stride) noexcept {
    __m256 acc[Q][R];
    for (int q = 0; q < Q; ++q)
        for (int r = 0; r < R; ++r) acc[q][r] = _mm256_setzero_ps();

    for (std::size_t k = 0; k < stride; k += kDotLanes) {
        __m256 rv[R];
        for (int r = 0; r < R; ++r) rv[r] = _mm256_loadu_ps(rows + r * stride + k);
        for (int q = 0; q < Q; ++q) {
            const __m256 qv = _mm256_loadu_ps(queries + q * stride + k);
            for (int r = 0; r < R; ++r) acc[q][r] = _mm256_fmadd_ps(qv, rv[r], acc[q][r]);
        }
    }
    for (int q = 0; q < Q; ++q)
        for (int r = 0; r < R; ++r) out[q * out_stride + r] = hsum(acc[q][r]);
}

#endif

}  // namespace

float dot_fixed_order(const float* a, const float* b, std::size_t length) noexcept {
    float s[kDotLanes] = {};
    std::size_t i = 0;
    for (; i + kDotLanes <= length; i += kDotLanes) {
        for (std::size_t l = 0; l < kDotLanes; ++l) s[l] = std::fma(a[i + l], b[i + l], s[l]);
    }
    for (std::size_t l = 0; i < length; ++i, ++l) s[l] = std::fma(a[i], b[i], s[l]);
    return combine_lanes(s);
}

void score_block(const float* queries, std::size_t query_count, const float* rows, std::size_t row_count,
                 std::size_t stride, float* out, std::size_t out_stride) noexcept {
#ifdef CBIR_AVX2_KERNEL
    constexpr std::size_t kQ = 3;
    constexpr std::size_t kR = 4;
    std::size_t r = 0;
    for (; r + kR <= row_count; r += kR) {
        const float* row_tile = rows + r * stride;
        std::size_t q = 0;
        for (; q + kQ <= query_count; q += kQ) {
            tile<kQ, kR>(queries + q * stride, row_tile, stride, out + q * out_stride + r, out_stride);
        }
        for (; q < query_count; ++q) {
            tile<1, kR>(queries + q * stride, row_tile, stride, out + q * out_stride + r, out_stride);
        }
    }
    for (; r < row_count; ++r) {
        for (std::size_t q = 0; q < query_count; ++q) {
            tile<1, 1>(queries + q * stride, rows + r * stride, stride, out + q * out_stride + r, out_stride);
        }
    }
#else
    for (std::size_t r = 0; r < row_count; ++r) {
        for (std::size_t q = 0; q < query_count; ++q) {
            out[q * out_stride + r] = dot_fixed_order(queries + q * stride, rows + r * stride, stride);
        }
    }
#endif
}

}  // namespace cbir::detail
