#include <cstdlib>
#include <cstring>

#include "cartanlab/kernels.hpp"

namespace cartanlab {
namespace kern {

const Ops* avx2_ops_table();  // kernels_avx2.cpp

namespace {

bool want_scalar() {
  const char* env = std::getenv("CARTANLAB_SIMD");
  return env != nullptr && std::strcmp(env, "scalar") == 0;
}

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") != 0;
#else
  return false;
#endif
}

struct Selection {
  const Ops* table;
  const char* name;
};

Selection select() {
  const Ops* vec = avx2_ops_table();
  if (vec != nullptr && cpu_has_avx2() && !want_scalar())
    return {vec, "avx2"};
  return {&scalar_ops(), "scalar"};
}

const Selection& selection() {
  static const Selection s = select();
  return s;
}

}  // namespace

const Ops& ops() { return *selection().table; }

const Ops* avx2_ops() {
  const Ops* vec = avx2_ops_table();
  return (vec != nullptr && cpu_has_avx2()) ? vec : nullptr;
}

std::string active_path() { return selection().name; }

}  // namespace kern
}  // namespace cartanlab
