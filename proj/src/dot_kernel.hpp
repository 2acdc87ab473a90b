#pragma once

#include <cstddef>

namespace cbir::detail {

inline constexpr std::size_t kDotLanes = 8;

/// Portable dot product with the documented lane order (see
/// cosine_similarity). Works for any length.
float dot_fixed_order(const float* a, const float* b, std::size_t length) noexcept;

/// out[q * out_stride + r] = dot(query q, row r) for a block of padded
/// queries against a block of padded rows. `stride` must be a multiple of
/// kDotLanes and padding must be zero; results are bit-identical to
/// dot_fixed_order on the unpadded vectors.
void score_block(const float* queries, std::size_t query_count, const float* rows, std::size_t row_count,
                 std::size_t stride, float* out, std::size_t out_stride) noexcept;

}  // namespace cbir::detail
