#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <limits>

#include "hunter/simd/kernels.hpp"

// AVX2 variants. No FMA is used anywhere: every lane performs the same
// exactly-rounded mul/add/sub/div sequence as the scalar reference, so
// compare-and-select results are bit-identical.
namespace hunter::simd {

namespace {

inline __m256d abs_pd(__m256d v) {
  return _mm256_andnot_pd(_mm256_set1_pd(-0.0), v);
}

void merge_cells_avx2(std::size_t n, CellsView a, CellsView b, CellsOut out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d ra = _mm256_loadu_pd(a.range + i);
    const __m256d rb = _mm256_loadu_pd(b.range + i);
    const __m256d take_a = _mm256_cmp_pd(ra, rb, _CMP_LT_OQ);
    _mm256_storeu_pd(out.range + i, _mm256_blendv_pd(rb, ra, take_a));
    _mm256_storeu_pd(out.x + i,
                     _mm256_blendv_pd(_mm256_loadu_pd(b.x + i),
                                      _mm256_loadu_pd(a.x + i), take_a));
    _mm256_storeu_pd(out.y + i,
                     _mm256_blendv_pd(_mm256_loadu_pd(b.y + i),
                                      _mm256_loadu_pd(a.y + i), take_a));
    _mm256_storeu_pd(out.z + i,
                     _mm256_blendv_pd(_mm256_loadu_pd(b.z + i),
                                      _mm256_loadu_pd(a.z + i), take_a));
    const int mask = _mm256_movemask_pd(take_a);
    for (int k = 0; k < 4; ++k) {
      const bool ta = (mask >> k) & 1;
      out.occ[i + k] = ta ? a.occ[i + k] : b.occ[i + k];
      out.src[i + k] = ta ? a.src[i + k] : b.src[i + k];
    }
  }
  for (; i < n; ++i) {
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

void ray_triangle_avx2(std::size_t n, const double* dx, const double* dy,
                       const double* dz, const TrianglePre& tri, double eps,
                       double* t_out) {
  const __m256d inf = _mm256_set1_pd(std::numeric_limits<double>::infinity());
  const __m256d veps = _mm256_set1_pd(eps);
  const __m256d zero = _mm256_setzero_pd();
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d e10 = _mm256_set1_pd(tri.e1[0]), e11 = _mm256_set1_pd(tri.e1[1]),
                e12 = _mm256_set1_pd(tri.e1[2]);
  const __m256d e20 = _mm256_set1_pd(tri.e2[0]), e21 = _mm256_set1_pd(tri.e2[1]),
                e22 = _mm256_set1_pd(tri.e2[2]);
  const __m256d s0 = _mm256_set1_pd(tri.s[0]), s1 = _mm256_set1_pd(tri.s[1]),
                s2 = _mm256_set1_pd(tri.s[2]);
  const __m256d q0 = _mm256_set1_pd(tri.q[0]), q1 = _mm256_set1_pd(tri.q[1]),
                q2 = _mm256_set1_pd(tri.q[2]);
  const __m256d tnum = _mm256_set1_pd(tri.t_num);

  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d0 = _mm256_loadu_pd(dx + i);
    const __m256d d1 = _mm256_loadu_pd(dy + i);
    const __m256d d2 = _mm256_loadu_pd(dz + i);
    const __m256d p0 = _mm256_sub_pd(_mm256_mul_pd(d1, e22), _mm256_mul_pd(d2, e21));
    const __m256d p1 = _mm256_sub_pd(_mm256_mul_pd(d2, e20), _mm256_mul_pd(d0, e22));
    const __m256d p2 = _mm256_sub_pd(_mm256_mul_pd(d0, e21), _mm256_mul_pd(d1, e20));
    const __m256d det = _mm256_add_pd(
        _mm256_add_pd(_mm256_mul_pd(e10, p0), _mm256_mul_pd(e11, p1)),
        _mm256_mul_pd(e12, p2));
    const __m256d ok_det = _mm256_cmp_pd(abs_pd(det), veps, _CMP_GE_OQ);
    const __m256d inv = _mm256_div_pd(one, det);
    const __m256d u = _mm256_mul_pd(
        _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(s0, p0), _mm256_mul_pd(s1, p1)),
                      _mm256_mul_pd(s2, p2)),
        inv);
    const __m256d v = _mm256_mul_pd(
        _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(d0, q0), _mm256_mul_pd(d1, q1)),
                      _mm256_mul_pd(d2, q2)),
        inv);
    const __m256d t = _mm256_mul_pd(tnum, inv);
    __m256d ok = _mm256_and_pd(ok_det, _mm256_cmp_pd(u, zero, _CMP_GE_OQ));
    ok = _mm256_and_pd(ok, _mm256_cmp_pd(u, one, _CMP_LE_OQ));
    ok = _mm256_and_pd(ok, _mm256_cmp_pd(v, zero, _CMP_GE_OQ));
    ok = _mm256_and_pd(ok, _mm256_cmp_pd(_mm256_add_pd(u, v), one, _CMP_LE_OQ));
    ok = _mm256_and_pd(ok, _mm256_cmp_pd(t, zero, _CMP_GT_OQ));
    _mm256_storeu_pd(t_out + i, _mm256_blendv_pd(inf, t, ok));
  }
  if (i < n) scalar_kernels().ray_triangle(n - i, dx + i, dy + i, dz + i, tri, eps, t_out + i);
}

PlaneStats plane_stats_avx2(std::size_t n, const double* x, const double* y,
                            const double* z, double nx, double ny, double nz,
                            double d, double thr) {
  PlaneStats st;
  const __m256d vnx = _mm256_set1_pd(nx), vny = _mm256_set1_pd(ny),
                vnz = _mm256_set1_pd(nz), vd = _mm256_set1_pd(d);
  const __m256d vthr = _mm256_set1_pd(thr);
  const __m256d vneg_thr = _mm256_set1_pd(-thr);
  __m256d below_acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d sd = _mm256_sub_pd(
        _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(vnx, _mm256_loadu_pd(x + i)),
                                    _mm256_mul_pd(vny, _mm256_loadu_pd(y + i))),
                      _mm256_mul_pd(vnz, _mm256_loadu_pd(z + i))),
        vd);
    const __m256d is_in = _mm256_cmp_pd(abs_pd(sd), vthr, _CMP_LE_OQ);
    const __m256d is_below = _mm256_cmp_pd(sd, vneg_thr, _CMP_LT_OQ);
    st.inliers += __builtin_popcount(_mm256_movemask_pd(is_in));
    st.below += __builtin_popcount(_mm256_movemask_pd(is_below));
    below_acc = _mm256_add_pd(
        below_acc, _mm256_and_pd(is_below, _mm256_sub_pd(_mm256_setzero_pd(), sd)));
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, below_acc);
  st.below_sum = ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3]));
  for (; i < n; ++i) {
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

bool any_within_bev_avx2(std::size_t n, const double* x, const double* y,
                         double cx, double cy, double r2) {
  const __m256d vcx = _mm256_set1_pd(cx), vcy = _mm256_set1_pd(cy),
                vr2 = _mm256_set1_pd(r2);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d ddx = _mm256_sub_pd(_mm256_loadu_pd(x + i), vcx);
    const __m256d ddy = _mm256_sub_pd(_mm256_loadu_pd(y + i), vcy);
    const __m256d d2 =
        _mm256_add_pd(_mm256_mul_pd(ddx, ddx), _mm256_mul_pd(ddy, ddy));
    if (_mm256_movemask_pd(_mm256_cmp_pd(d2, vr2, _CMP_LT_OQ)) != 0) return true;
  }
  for (; i < n; ++i) {
    const double ddx = x[i] - cx;
    const double ddy = y[i] - cy;
    if (ddx * ddx + ddy * ddy < r2) return true;
  }
  return false;
}

}  // namespace

const KernelSet& avx2_kernels() {
  static const KernelSet set{merge_cells_avx2, ray_triangle_avx2,
                             plane_stats_avx2, any_within_bev_avx2};
  return set;
}

}  // namespace hunter::simd

#endif  // x86_64
