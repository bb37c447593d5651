#pragma once

#include <vector>

#include "hunter/geometry.hpp"
#include "hunter/supervision.hpp"

namespace hunter {

struct LossConfig {
  double beta1 = 2.0;      // focal exponent on the prediction
  double beta2 = 4.0;      // focal exponent on the soft target
  double epsilon = 1e-12;  // log guard
  double beta3 = 1.0;      // weight of the mean-alignment term
  double beta4 = 1.0;      // weight of the norm term
  double delta_var = 0.1;  // allowed deviation of feature norms from 1

  void validate() const;
};

enum class FeatureRole { synthetic, real };

struct FeatureBatch {
  std::vector<std::vector<double>> features;  // uniform dimension
  FeatureRole role = FeatureRole::synthetic;

  std::size_t size() const { return features.size(); }
  std::size_t dim() const { return features.empty() ? 0 : features.front().size(); }
};

struct HeatmapLossResult {
  double value = 0.0;
  std::vector<double> grad;  // d value / d x, cell-aligned
};

struct BoxLossResult {
  double value = 0.0;
  std::vector<std::vector<double>> grad;  // per prediction vector
};

struct TotalLossResult {
  double value = 0.0;
  std::vector<double> heatmap_grad;
  std::vector<std::vector<double>> box_grad;
};

struct AlignLossResult {
  double l_s2r = 0.0;
  double l_norm = 0.0;
  double l_total = 0.0;  // beta3 * l_s2r + beta4 * l_norm
  std::vector<std::vector<double>> grad_s;  // d l_total / d f for f in F_s
  std::vector<std::vector<double>> grad_r;
};

// Masked focal heatmap loss; per cell:
//   0                                    where mask = 0
//   -(1-x)^b1 ln(x + eps)                where mask = 1 and y = 1
//   -x^b1 (1-y)^b2 ln(1 - x + eps)       otherwise
// summed row-major. Throws std::invalid_argument("shape-mismatch").
HeatmapLossResult heatmap_loss(const HeatmapGrid& pred, const HeatmapGrid& target,
                               const Mask& mask, const LossConfig& cfg);

// Mean squared L2 distance over matched parameter vectors.
// Throws std::invalid_argument("cardinality-mismatch").
BoxLossResult bbox_loss(const std::vector<std::vector<double>>& pred,
                        const std::vector<std::vector<double>>& gt);

TotalLossResult total_loss(const HeatmapLossResult& hm, const BoxLossResult& box);

// Synthetic-to-real alignment:
//   l_s2r  = sum_dim (mean(F_s) - mean(F_r))^2
//   l_norm = mean_f relu(|1 - ||f||| - delta_var)^2 over each batch, summed
// Throws std::invalid_argument("empty-batch" / "dim-mismatch").
AlignLossResult align_loss(const FeatureBatch& f_s, const FeatureBatch& f_r,
                           const LossConfig& cfg);

// BEV feature map with per-cell channel vectors; gather convention for
// building feature batches from label centers.
struct BevFeatureMap {
  BevGrid grid;
  std::int32_t channels = 0;
  std::vector<double> data;  // ((row * cols + col) * channels + ch)

  std::vector<double> at(std::int64_t row, std::int64_t col) const;
};

// Samples the feature map at each label's center cell; labels outside the
// grid are skipped.
FeatureBatch gather_label_features(const BevFeatureMap& map,
                                   const std::vector<BBox3D>& labels, FeatureRole role);

}  // namespace hunter
