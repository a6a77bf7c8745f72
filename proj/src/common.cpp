#include "tfkit/common.hpp"

#include <omp.h>

namespace tfkit {

namespace {
int thread_count = 0;

int hardware_threads() {
  static const int n = omp_get_max_threads();
  return n;
}
}  // namespace

void set_threads(int n) {
  hardware_threads();
  thread_count = n > 0 ? n : 0;
  omp_set_num_threads(threads());
}

int threads() { return thread_count > 0 ? thread_count : hardware_threads(); }

}  // namespace tfkit
