#pragma once

// Dense double-precision inner loops used by the tensor core. Each kernel set
// implements the same contract; the scalar set is the reference and the
// vector sets must agree with it to rounding. The active set is chosen once
// at startup from CPU features and can be forced with UBERT_KERNELS=scalar.

#include <cstddef>
#include <string_view>
#include <vector>

namespace ubert::kernels {

struct KernelSet {
  std::string_view name;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // C[m,n] += A[m,k] * B[k,n]
  void (*gemm_nn)(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b,
                  double* c);
  // C[m,n] += A[m,k] * B[n,k]^T
  void (*gemm_nt)(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b,
                  double* c);
  // C[m,n] += A[k,m]^T * B[k,n]
  void (*gemm_tn)(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b,
                  double* c);
};

const KernelSet& scalar();
// nullptr when the build has no AVX2 variant.
const KernelSet* avx2();

bool cpu_has_avx2_fma();

// Every kernel set usable on this machine, scalar first.
std::vector<const KernelSet*> available();

const KernelSet& active();
// "scalar", "avx2" or "auto". Returns false if the request cannot be honored.
bool select(std::string_view name);

}  // namespace ubert::kernels
