#pragma once

#include <cstddef>

#include "aoff/parallel.hpp"

// Row-major accumulate-into-C matrix kernels shared by the training
// and fine-tuning loops. Parallel over output rows with a static
// partition, so results are reproducible for a fixed thread count.

namespace aoff::detail {

/// C[m x n] += A[m x k] * B[n x k]^T  (dot over the shared k axis)
inline void gemm_nt(double* C, const double* A, const double* B, size_t m, size_t n, size_t k) {
    parallel_chunks(0, m, [&](size_t lo, size_t hi, int) {
        for (size_t i = lo; i < hi; ++i) {
            const double* a = A + i * k;
            double* c = C + i * n;
            for (size_t j = 0; j < n; ++j) {
                const double* b = B + j * k;
                double s = 0.0;
                for (size_t t = 0; t < k; ++t) s += a[t] * b[t];
                c[j] += s;
            }
        }
    });
}

/// C[m x n] += A[b x m]^T * B[b x n]  (outer products accumulated over b)
inline void gemm_tn(double* C, const double* A, const double* B, size_t b, size_t m, size_t n) {
    parallel_chunks(0, m, [&](size_t lo, size_t hi, int) {
        for (size_t i = lo; i < hi; ++i) {
            double* c = C + i * n;
            for (size_t s = 0; s < b; ++s) {
                const double a = A[s * m + i];
                if (a == 0.0) continue;
                const double* bb = B + s * n;
                for (size_t j = 0; j < n; ++j) c[j] += a * bb[j];
            }
        }
    });
}

/// C[m x n] += A[m x k] * B[k x n]
inline void gemm_nn(double* C, const double* A, const double* B, size_t m, size_t n, size_t k) {
    parallel_chunks(0, m, [&](size_t lo, size_t hi, int) {
        for (size_t i = lo; i < hi; ++i) {
            double* c = C + i * n;
            const double* a = A + i * k;
            for (size_t t = 0; t < k; ++t) {
                const double av = a[t];
                if (av == 0.0) continue;
                const double* b = B + t * n;
                for (size_t j = 0; j < n; ++j) c[j] += av * b[j];
            }
        }
    });
}

}  // namespace aoff::detail
