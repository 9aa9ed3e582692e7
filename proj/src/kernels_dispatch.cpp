#include <atomic>
#include <cstdlib>

#include "delta/common.hpp"
#include "delta/kernels.hpp"

namespace delta::kernels {

#if defined(__x86_64__) || defined(_M_X64)
const Ops* avx2_ops_impl();
#endif
#if defined(__aarch64__)
const Ops* neon_ops_impl();
#endif

const Ops* simd_ops() {
#if defined(__x86_64__) || defined(_M_X64)
  if (__builtin_cpu_supports("avx2")) return avx2_ops_impl();
  return nullptr;
#elif defined(__aarch64__)
  return neon_ops_impl();  // NEON is architectural on aarch64
#else
  return nullptr;
#endif
}

namespace {

std::atomic<const Ops*> g_active{nullptr};

const Ops* resolve(const std::string& name) {
  if (name == "auto") {
    const Ops* simd = simd_ops();
    return simd ? simd : &scalar_ops();
  }
  if (name == "scalar") return &scalar_ops();
  if (name == "avx2" || name == "neon") {
    const Ops* simd = simd_ops();
    if (simd && name == simd->name) return simd;
    throw ConfigError("kernel variant '" + name + "' not available on this machine");
  }
  throw ConfigError("unknown kernel variant '" + name + "' (expected scalar|avx2|neon|auto)");
}

const Ops* initial_choice() {
  if (const char* env = std::getenv("DELTA_KERNELS")) return resolve(env);
  return resolve("auto");
}

}  // namespace

const Ops& active() {
  const Ops* ops = g_active.load(std::memory_order_acquire);
  if (!ops) {
    ops = initial_choice();
    g_active.store(ops, std::memory_order_release);
  }
  return *ops;
}

void force(const std::string& name) {
  g_active.store(resolve(name), std::memory_order_release);
}

}  // namespace delta::kernels
