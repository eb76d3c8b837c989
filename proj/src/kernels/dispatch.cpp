#include <atomic>
#include <cstdlib>
#include <string>

#include "ubert/kernels.hpp"

namespace ubert::kernels {

#if !UBERT_HAVE_AVX2
const KernelSet* avx2() { return nullptr; }
#endif

bool cpu_has_avx2_fma() {
#if UBERT_HAVE_AVX2 && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

std::vector<const KernelSet*> available() {
  std::vector<const KernelSet*> out{&scalar()};
  if (avx2() != nullptr && cpu_has_avx2_fma()) out.push_back(avx2());
  return out;
}

namespace {

const KernelSet* pick(std::string_view name) {
  if (name == "scalar") return &scalar();
  const bool vec_ok = avx2() != nullptr && cpu_has_avx2_fma();
  if (name == "avx2") return vec_ok ? avx2() : nullptr;
  if (name == "auto" || name.empty()) return vec_ok ? avx2() : &scalar();
  return nullptr;
}

std::atomic<const KernelSet*>& slot() {
  static std::atomic<const KernelSet*> current = [] {
    const char* env = std::getenv("UBERT_KERNELS");
    const KernelSet* k = pick(env ? std::string_view(env) : std::string_view("auto"));
    return k ? k : pick("auto");
  }();
  return current;
}

}  // namespace

const KernelSet& active() { return *slot().load(std::memory_order_relaxed); }

bool select(std::string_view name) {
  const KernelSet* k = pick(name);
  if (!k) return false;
  slot().store(k, std::memory_order_relaxed);
  return true;
}

}  // namespace ubert::kernels
