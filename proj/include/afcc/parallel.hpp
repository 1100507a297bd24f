#pragma once

namespace afcc::parallel {

// Process-wide thread cap for the OpenMP kernels.
// 0 = runtime default, 1 = serial reference path.
void set_max_threads(int n);
int max_threads();

// Thread count a parallel region should request right now.
int resolved_threads();
bool serial();

}  // namespace afcc::parallel
