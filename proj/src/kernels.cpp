#include "spes/kernels.hpp"

namespace spes::kernels {

int& serial_depth() {
  thread_local int depth = 0;
  return depth;
}

}  // namespace spes::kernels
