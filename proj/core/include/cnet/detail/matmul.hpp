#pragma once

#include <cstdint>
#include <vector>

namespace cnet::detail {

// Row-major accumulating kernels. Per output element the summation order over
// the shared dimension is fixed, so results are reproducible run to run. The
// four-row blocks reuse each streamed row of B across four accumulator rows;
// inner loops run over contiguous memory and auto-vectorize.

/// C[m x n] += A[m x k] * B[k x n]
template <class T>
void matmul_acc(const T* a, const T* b, T* c, std::int64_t m, std::int64_t k, std::int64_t n) {
    std::int64_t i = 0;
    for (; i + 4 <= m; i += 4) {
        const T* a0 = a + (i + 0) * k;
        const T* a1 = a + (i + 1) * k;
        const T* a2 = a + (i + 2) * k;
        const T* a3 = a + (i + 3) * k;
        T* c0 = c + (i + 0) * n;
        T* c1 = c + (i + 1) * n;
        T* c2 = c + (i + 2) * n;
        T* c3 = c + (i + 3) * n;
        for (std::int64_t p = 0; p < k; ++p) {
            const T v0 = a0[p];
            const T v1 = a1[p];
            const T v2 = a2[p];
            const T v3 = a3[p];
            if (v0 == T(0) && v1 == T(0) && v2 == T(0) && v3 == T(0)) {
                continue;
            }
            const T* brow = b + p * n;
            for (std::int64_t j = 0; j < n; ++j) {
                const T bv = brow[j];
                c0[j] += v0 * bv;
                c1[j] += v1 * bv;
                c2[j] += v2 * bv;
                c3[j] += v3 * bv;
            }
        }
    }
    for (; i < m; ++i) {
        const T* arow = a + i * k;
        T* crow = c + i * n;
        for (std::int64_t p = 0; p < k; ++p) {
            const T av = arow[p];
            if (av == T(0)) {
                continue;
            }
            const T* brow = b + p * n;
            for (std::int64_t j = 0; j < n; ++j) {
                crow[j] += av * brow[j];
            }
        }
    }
}

/// C[m x n] += A[k x m]^T * B[k x n]
template <class T>
void matmul_atb_acc(const T* a, const T* b, T* c, std::int64_t k, std::int64_t m, std::int64_t n) {
    std::int64_t p = 0;
    for (; p + 4 <= k; p += 4) {
        const T* a0 = a + (p + 0) * m;
        const T* a1 = a + (p + 1) * m;
        const T* a2 = a + (p + 2) * m;
        const T* a3 = a + (p + 3) * m;
        const T* b0 = b + (p + 0) * n;
        const T* b1 = b + (p + 1) * n;
        const T* b2 = b + (p + 2) * n;
        const T* b3 = b + (p + 3) * n;
        for (std::int64_t i = 0; i < m; ++i) {
            const T v0 = a0[i];
            const T v1 = a1[i];
            const T v2 = a2[i];
            const T v3 = a3[i];
            if (v0 == T(0) && v1 == T(0) && v2 == T(0) && v3 == T(0)) {
                continue;
            }
            T* crow = c + i * n;
            for (std::int64_t j = 0; j < n; ++j) {
                // One fixed expression per element keeps the order stable.
                crow[j] += ((v0 * b0[j] + v1 * b1[j]) + (v2 * b2[j] + v3 * b3[j]));
            }
        }
    }
    for (; p < k; ++p) {
        const T* arow = a + p * m;
        const T* brow = b + p * n;
        for (std::int64_t i = 0; i < m; ++i) {
            const T av = arow[i];
            if (av == T(0)) {
                continue;
            }
            T* crow = c + i * n;
            for (std::int64_t j = 0; j < n; ++j) {
                crow[j] += av * brow[j];
            }
        }
    }
}

/// dst[n x m] = src[m x n]^T
template <class T>
void transpose(const T* src, T* dst, std::int64_t m, std::int64_t n) {
    for (std::int64_t i = 0; i < m; ++i) {
        for (std::int64_t j = 0; j < n; ++j) {
            dst[j * m + i] = src[i * n + j];
        }
    }
}

}  // namespace cnet::detail
