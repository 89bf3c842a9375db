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

// Mosaics the built-in test card through each CFA and prints the bilinear
// reconstruction quality.

#include <cstdio>

#include "jd3/cfa.hpp"
#include "jd3/harness.hpp"
#include "jd3/metrics.hpp"

int main() {
  const auto card = jd3::test_card<double>();
  for (const char* name : {"bayer", "quad", "nona", "hybridevs"}) {
    const auto pattern = jd3::pattern_by_name(name);
    const auto m = jd3::mosaic(card, pattern);
    const auto rec = jd3::bilinear_demosaic(m);
    const auto q = jd3::evaluate(rec, card);
    std::printf("%-10s period %zux%zu  PSNR %6.2f dB  SSIM %.4f\n", name, pattern.period_h(), pattern.period_w(),
                q.psnr, q.ssim);
  }
  return 0;
}
