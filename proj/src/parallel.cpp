#include "qpme/parallel.hpp"

#include <omp.h>

#include <cstdlib>
#include <string>

namespace qpme {

int worker_threads() {
  const char* env = std::getenv("QPME_THREADS");
  if (env != nullptr && *env != '\0') {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return omp_get_max_threads();
}

void configure_threads() { omp_set_num_threads(worker_threads()); }

}  // namespace qpme
