#include "lanepe/kernels.hpp"

#include <cstdlib>
#include <stdexcept>

namespace lanepe::kernels {

const Ops& scalar_ops();
#if defined(LANEPE_HAVE_AVX2)
const Ops& avx2_ops();
#endif
#if defined(__aarch64__)
const Ops& neon_ops();
#endif

bool supported(Backend b) {
  switch (b) {
    case Backend::scalar:
      return true;
    case Backend::avx2:
#if defined(LANEPE_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") != 0;
#else
      return false;
#endif
    case Backend::neon:
#if defined(__aarch64__)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Backend best_supported() {
  if (supported(Backend::avx2)) return Backend::avx2;
  if (supported(Backend::neon)) return Backend::neon;
  return Backend::scalar;
}

const char* name(Backend b) {
  switch (b) {
    case Backend::scalar: return "scalar";
    case Backend::avx2: return "avx2";
    case Backend::neon: return "neon";
  }
  return "?";
}

Backend parse_backend(const std::string& s) {
  if (s == "scalar") return Backend::scalar;
  if (s == "avx2") return Backend::avx2;
  if (s == "neon") return Backend::neon;
  throw std::invalid_argument("unknown kernel backend '" + s +
                              "' (expected scalar, avx2 or neon)");
}

namespace {

Backend initial_backend() {
  if (const char* env = std::getenv("LANEPE_KERNELS")) {
    const Backend b = parse_backend(env);
    if (!supported(b))
      throw std::runtime_error(std::string("LANEPE_KERNELS requests '") +
                               name(b) + "' but this CPU does not support it");
    return b;
  }
  return best_supported();
}

Backend& active_slot() {
  static Backend b = initial_backend();
  return b;
}

}  // namespace

Backend active() { return active_slot(); }

void force(Backend b) {
  if (!supported(b))
    throw std::invalid_argument(std::string("kernel backend '") + name(b) +
                                "' is not supported on this CPU");
  active_slot() = b;
}

const Ops& ops_for(Backend b) {
  if (!supported(b))
    throw std::invalid_argument(std::string("kernel backend '") + name(b) +
                                "' is not supported on this CPU");
  switch (b) {
    case Backend::scalar:
      return scalar_ops();
    case Backend::avx2:
#if defined(LANEPE_HAVE_AVX2)
      return avx2_ops();
#else
      break;
#endif
    case Backend::neon:
#if defined(__aarch64__)
      return neon_ops();
#else
      break;
#endif
  }
  return scalar_ops();
}

const Ops& ops() { return ops_for(active()); }

}  // namespace lanepe::kernels
