#pragma once

#include <cstddef>
#include <cstdint>

// Data-parallel inner loops with a scalar reference implementation and an
// AVX2 variant selected at runtime. Both variants are restricted to
// exactly-rounded IEEE arithmetic (no FMA contraction, comparisons and
// blends only), so merge_cells, ray_triangle and any_within_bev are
// bit-identical across variants; plane_stats accumulates its below-plane
// sum in lane order, which the equivalence tests bound at 1e-12 relative.
namespace hunter::simd {

enum class Variant { scalar, avx2 };

// Read-only SoA view of range-image cells.
struct CellsView {
  const double* range;  // +inf for unoccupied cells
  const double* x;
  const double* y;
  const double* z;
  const std::uint8_t* occ;
  const std::uint8_t* src;
};

struct CellsOut {
  double* range;
  double* x;
  double* y;
  double* z;
  std::uint8_t* occ;
  std::uint8_t* src;
};

struct PlaneStats {
  std::int64_t inliers = 0;     // |n.p - d| <= thr
  std::int64_t below = 0;       // n.p - d < -thr
  double below_sum = 0.0;       // sum of (d - n.p) over below points
};

// One triangle against a batch of rays from a fixed origin.
// Precomputed per triangle: e1 = v1 - v0, e2 = v2 - v0, s = origin - v0,
// q = s x e1, t_num = e2 . q.
struct TrianglePre {
  double e1[3];
  double e2[3];
  double s[3];
  double q[3];
  double t_num;
};

struct KernelSet {
  // Per-cell nearest-return select: out = (a.range < b.range) ? a : b.
  void (*merge_cells)(std::size_t n, CellsView a, CellsView b, CellsOut out);
  // Moller-Trumbore; writes hit distance into t_out[i], +inf on miss.
  // Rays with |det| < eps are treated as parallel misses.
  void (*ray_triangle)(std::size_t n, const double* dx, const double* dy,
                       const double* dz, const TrianglePre& tri, double eps,
                       double* t_out);
  // Inlier / below-plane statistics for a unit-normal plane n.p = d.
  PlaneStats (*plane_stats)(std::size_t n, const double* x, const double* y,
                            const double* z, double nx, double ny, double nz,
                            double d, double thr);
  // True iff any (x[i], y[i]) lies strictly within sqrt(r2) of (cx, cy) in BEV.
  bool (*any_within_bev)(std::size_t n, const double* x, const double* y,
                         double cx, double cy, double r2);
};

bool avx2_supported();
Variant active_variant();
// Force a variant (tests); throws std::runtime_error if unsupported.
void force_variant(Variant v);
void reset_variant();  // back to auto-detection
const KernelSet& active();

const KernelSet& scalar_kernels();
#if defined(__x86_64__) || defined(_M_X64)
const KernelSet& avx2_kernels();
#endif

}  // namespace hunter::simd
