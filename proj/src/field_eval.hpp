#pragma once

// Scalar-generic field evaluation shared by decode() and the optimizer.

#include <algorithm>
#include <cmath>
#include <vector>

#include "tfkit/field.hpp"

namespace tfkit::detail {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

template <typename P>
void gather_features(const FieldLayout& layout, const P* params, const GridStencil& st, double* out) {
  const int cp = layout.plane_channels, cc = layout.cube_channels;
  for (int p = 0; p < 3; p++) {
    double* f = out + p * cp;
    std::fill(f, f + cp, 0.0);
    for (int k = 0; k < 4; k++) {
      const double w = st.plane_weight[p][k];
      const P* src = params + st.plane_index[p][k];
      for (int c = 0; c < cp; c++) f[c] += w * double(src[c]);
    }
  }
  double* f = out + 3 * cp;
  std::fill(f, f + cc, 0.0);
  for (int k = 0; k < 8; k++) {
    const double w = st.cube_weight[k];
    const P* src = params + st.cube_index[k];
    for (int c = 0; c < cc; c++) f[c] += w * double(src[c]);
  }
}

template <typename P>
vec3 mlp_forward(const FieldLayout& layout, const P* params, const double* features) {
  std::vector<double> in(features, features + layout.widths[0]), out;
  for (int l = 0; l < layout.layers(); l++) {
    int ni = layout.widths[l], no = layout.widths[l + 1];
    const P* w = params + layout.weight_offset[l];
    const P* b = params + layout.bias_offset[l];
    out.assign(no, 0.0);
    for (int o = 0; o < no; o++) {
      double acc = double(b[o]);
      for (int i = 0; i < ni; i++) acc += double(w[size_t(o) * ni + i]) * in[i];
      out[o] = l + 1 < layout.layers() ? std::max(0.0, acc) : sigmoid(acc);
    }
    in.swap(out);
  }
  return {in[0], in[1], in[2]};
}

}  // namespace tfkit::detail
