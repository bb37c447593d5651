#include <limits>

#include "hunter/simd/kernels.hpp"

// Reference kernels. Operation order matches the AVX2 variant so that the
// compare/select kernels are bit-identical across variants; this TU is
// compiled with -ffp-contract=off.
namespace hunter::simd {

namespace {

void merge_cells_scalar(std::size_t n, CellsView a, CellsView b, CellsOut out) {
  for (std::size_t i = 0; i < n; ++i) {
    // tie goes to b (the instance side of the nearest-return merge)
    if (a.range[i] < b.range[i]) {
      out.range[i] = a.range[i];
      out.x[i] = a.x[i];
      out.y[i] = a.y[i];
      out.z[i] = a.z[i];
      out.occ[i] = a.occ[i];
      out.src[i] = a.src[i];
    } else {
      out.range[i] = b.range[i];
      out.x[i] = b.x[i];
      out.y[i] = b.y[i];
      out.z[i] = b.z[i];
      out.occ[i] = b.occ[i];
      out.src[i] = b.src[i];
    }
  }
}

void ray_triangle_scalar(std::size_t n, const double* dx, const double* dy,
                         const double* dz, const TrianglePre& tri, double eps,
                         double* t_out) {
  const double inf = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double d0 = dx[i], d1 = dy[i], d2 = dz[i];
    // p = dir x e2
    const double p0 = d1 * tri.e2[2] - d2 * tri.e2[1];
    const double p1 = d2 * tri.e2[0] - d0 * tri.e2[2];
    const double p2 = d0 * tri.e2[1] - d1 * tri.e2[0];
    const double det = tri.e1[0] * p0 + tri.e1[1] * p1 + tri.e1[2] * p2;
    const double adet = det < 0 ? -det : det;
    if (adet < eps) {
      t_out[i] = inf;
      continue;
    }
    const double inv = 1.0 / det;
    const double u = (tri.s[0] * p0 + tri.s[1] * p1 + tri.s[2] * p2) * inv;
    const double v = (d0 * tri.q[0] + d1 * tri.q[1] + d2 * tri.q[2]) * inv;
    const double t = tri.t_num * inv;
    if (u >= 0.0 && u <= 1.0 && v >= 0.0 && u + v <= 1.0 && t > 0.0)
      t_out[i] = t;
    else
      t_out[i] = inf;
  }
}

PlaneStats plane_stats_scalar(std::size_t n, const double* x, const double* y,
                              const double* z, double nx, double ny, double nz,
                              double d, double thr) {
  PlaneStats st;
  for (std::size_t i = 0; i < n; ++i) {
    const double sd = nx * x[i] + ny * y[i] + nz * z[i] - d;
    const double ad = sd < 0 ? -sd : sd;
    if (ad <= thr) ++st.inliers;
    if (sd < -thr) {
      ++st.below;
      st.below_sum += -sd;
    }
  }
  return st;
}

bool any_within_bev_scalar(std::size_t n, const double* x, const double* y,
                           double cx, double cy, double r2) {
  for (std::size_t i = 0; i < n; ++i) {
    const double ddx = x[i] - cx;
    const double ddy = y[i] - cy;
    if (ddx * ddx + ddy * ddy < r2) return true;
  }
  return false;
}

}  // namespace

const KernelSet& scalar_kernels() {
  static const KernelSet set{merge_cells_scalar, ray_triangle_scalar,
                             plane_stats_scalar, any_within_bev_scalar};
  return set;
}

}  // namespace hunter::simd
