#pragma once

#include <cstdio>

#include "eiqa/manifest.hpp"

// In-memory manifest of n_scenes x k records; MOS is arbitrary but varied.
inline eiqa::Manifest grid_manifest(int n_scenes, int k, int image_size = 64) {
  eiqa::Manifest m;
  m.k_algorithms = k;
  m.image_size = image_size;
  char name[64];
  for (int s = 0; s < n_scenes; ++s)
    for (int a = 0; a < k; ++a) {
      std::snprintf(name, sizeof(name), "images/s%05d_a%02d.ppm", s, a);
      m.records.push_back({s, s / 10, a, name, static_cast<double>((s * 37 + a * 11) % 100)});
    }
  return m;
}
