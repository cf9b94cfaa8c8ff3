#pragma once

namespace phn {

// Process-wide worker count for the OpenMP kernels. 0 means "auto"
// (PHN_THREADS env var if set, otherwise the OpenMP default). 1 forces
// the bit-reproducible serial mode.
void set_threads(int n);
int threads();

} // namespace phn
