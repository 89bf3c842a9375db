/* Copyright 2026 The JD3Net Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Prints the entropy frontier for one budget, d <= 4 against d pinned to 1.
//
//   search_frontier [budget_gflops] [rho]

#include <cstdio>
#include <cstdlib>

#include "jd3/search.hpp"

int main(int argc, char** argv) {
  jd3::SearchConstraints c;
  c.budget_gflops = argc > 1 ? std::atof(argv[1]) : 25.0;
  c.rho = argc > 2 ? std::atof(argv[2]) : 1.0;
  c.top_n = 5;
  for (std::size_t d_max : {4u, 1u}) {
    c.d_max = d_max;
    const auto r = jd3::solve(c);
    std::printf("d <= %zu: %llu feasible configs\n", d_max, static_cast<unsigned long long>(r.feasible_count));
    if (!r.feasible) continue;
    for (const auto& p : r.frontier)
      std::printf("  %-22s H %9.2f  %7.3f GFLOPs  %9llu params\n", p.config.str().c_str(), p.entropy,
                  p.flops.gflops(), static_cast<unsigned long long>(jd3::params(p.config)));
  }
  return 0;
}
