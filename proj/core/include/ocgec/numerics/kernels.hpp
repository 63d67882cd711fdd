#pragma once

#include <cstddef>

// Raw row-major loops shared by the differentiable ops. All accumulate into
// their output (C += ...). Zero entries of the left operand are skipped,
// which pays off on masked and zero-padded feature matrices.
namespace ocgec::numerics::kernels {

/// C[m×n] += A[m×k] · B[k×n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) noexcept;

/// C[m×k] += A[m×n] · B[k×n]ᵀ
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
             std::size_t k) noexcept;

/// C[k×n] += A[m×k]ᵀ · B[m×n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) noexcept;

double dot(const double* a, const double* b, std::size_t n) noexcept;

}  // namespace ocgec::numerics::kernels
