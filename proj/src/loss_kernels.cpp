#include "hunter/loss_kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace hunter {

void LossConfig::validate() const {
  if (beta1 < 0 || beta2 < 0 || !(epsilon > 0) || beta3 < 0 || beta4 < 0 || delta_var < 0)
    throw std::invalid_argument("loss-config: invalid field");
}

HeatmapLossResult heatmap_loss(const HeatmapGrid& pred, const HeatmapGrid& target,
                               const Mask& mask, const LossConfig& cfg) {
  cfg.validate();
  if (!(pred.grid == target.grid) || !(pred.grid == mask.grid))
    throw std::invalid_argument("shape-mismatch");
  const std::size_t n = pred.values.size();
  HeatmapLossResult out;
  out.grad.assign(n, 0.0);
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (mask.cells[k] == 0) continue;
    const double x = pred.values[k];
    const double y = target.values[k];
    if (y == 1.0) {
      const double lg = std::log(x + cfg.epsilon);
      const double w = std::pow(1.0 - x, cfg.beta1);
      sum += -w * lg;
      out.grad[k] = cfg.beta1 * std::pow(1.0 - x, cfg.beta1 - 1.0) * lg -
                    w / (x + cfg.epsilon);
    } else {
      const double lg = std::log(1.0 - x + cfg.epsilon);
      const double wy = std::pow(1.0 - y, cfg.beta2);
      const double wx = std::pow(x, cfg.beta1);
      sum += -wx * wy * lg;
      out.grad[k] = -cfg.beta1 * std::pow(x, cfg.beta1 - 1.0) * wy * lg +
                    wx * wy / (1.0 - x + cfg.epsilon);
    }
  }
  out.value = sum;
  return out;
}

BoxLossResult bbox_loss(const std::vector<std::vector<double>>& pred,
                        const std::vector<std::vector<double>>& gt) {
  if (pred.size() != gt.size()) throw std::invalid_argument("cardinality-mismatch");
  BoxLossResult out;
  out.grad.resize(pred.size());
  if (pred.empty()) return out;
  const double inv_n = 1.0 / static_cast<double>(pred.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    if (pred[k].size() != gt[k].size()) throw std::invalid_argument("cardinality-mismatch");
    out.grad[k].resize(pred[k].size());
    for (std::size_t d = 0; d < pred[k].size(); ++d) {
      const double diff = pred[k][d] - gt[k][d];
      sum += diff * diff;
      out.grad[k][d] = 2.0 * diff * inv_n;
    }
  }
  out.value = sum * inv_n;
  return out;
}

TotalLossResult total_loss(const HeatmapLossResult& hm, const BoxLossResult& box) {
  TotalLossResult out;
  out.value = hm.value + box.value;
  out.heatmap_grad = hm.grad;
  out.box_grad = box.grad;
  return out;
}

AlignLossResult align_loss(const FeatureBatch& f_s, const FeatureBatch& f_r,
                           const LossConfig& cfg) {
  cfg.validate();
  if (f_s.features.empty() || f_r.features.empty())
    throw std::invalid_argument("empty-batch");
  const std::size_t dim = f_s.dim();
  if (f_r.dim() != dim) throw std::invalid_argument("dim-mismatch");
  for (const auto& f : f_s.features)
    if (f.size() != dim) throw std::invalid_argument("dim-mismatch");
  for (const auto& f : f_r.features)
    if (f.size() != dim) throw std::invalid_argument("dim-mismatch");

  AlignLossResult out;
  const double ns = static_cast<double>(f_s.size());
  const double nr = static_cast<double>(f_r.size());

  std::vector<double> mean_s(dim, 0.0), mean_r(dim, 0.0);
  for (const auto& f : f_s.features)
    for (std::size_t d = 0; d < dim; ++d) mean_s[d] += f[d];
  for (const auto& f : f_r.features)
    for (std::size_t d = 0; d < dim; ++d) mean_r[d] += f[d];
  for (std::size_t d = 0; d < dim; ++d) {
    mean_s[d] /= ns;
    mean_r[d] /= nr;
    const double diff = mean_s[d] - mean_r[d];
    out.l_s2r += diff * diff;
  }

  out.grad_s.assign(f_s.size(), std::vector<double>(dim, 0.0));
  out.grad_r.assign(f_r.size(), std::vector<double>(dim, 0.0));
  for (std::size_t d = 0; d < dim; ++d) {
    const double g = 2.0 * (mean_s[d] - mean_r[d]);
    for (auto& grad : out.grad_s) grad[d] = cfg.beta3 * g / ns;
    for (auto& grad : out.grad_r) grad[d] = -cfg.beta3 * g / nr;
  }

  // norm term: relu(|1 - ||f||| - delta)^2, averaged within each batch
  const auto add_norm_terms = [&](const FeatureBatch& batch,
                                  std::vector<std::vector<double>>& grads, double inv_n) {
    double acc = 0.0;
    for (std::size_t k = 0; k < batch.size(); ++k) {
      const auto& f = batch.features[k];
      double norm2 = 0.0;
      for (const double v : f) norm2 += v * v;
      const double norm = std::sqrt(norm2);
      const double excess = std::abs(1.0 - norm) - cfg.delta_var;
      if (excess <= 0.0) continue;
      acc += excess * excess;
      if (norm > 0.0) {
        // d excess / d f = -sign(1 - norm) * f / norm
        const double coeff =
            cfg.beta4 * inv_n * 2.0 * excess * -(1.0 - norm >= 0 ? 1.0 : -1.0) / norm;
        for (std::size_t d = 0; d < f.size(); ++d) grads[k][d] += coeff * f[d];
      }
    }
    return acc * inv_n;
  };
  out.l_norm = add_norm_terms(f_s, out.grad_s, 1.0 / ns) +
               add_norm_terms(f_r, out.grad_r, 1.0 / nr);
  out.l_total = cfg.beta3 * out.l_s2r + cfg.beta4 * out.l_norm;
  return out;
}

std::vector<double> BevFeatureMap::at(std::int64_t row, std::int64_t col) const {
  const std::size_t base =
      static_cast<std::size_t>((row * grid.cols() + col) * channels);
  return std::vector<double>(data.begin() + static_cast<std::ptrdiff_t>(base),
                             data.begin() + static_cast<std::ptrdiff_t>(base + channels));
}

FeatureBatch gather_label_features(const BevFeatureMap& map,
                                   const std::vector<BBox3D>& labels, FeatureRole role) {
  FeatureBatch batch;
  batch.role = role;
  std::int64_t row, col;
  for (const auto& box : labels) {
    if (!map.grid.cell_of(box.center.x(), box.center.y(), row, col)) continue;
    batch.features.push_back(map.at(row, col));
  }
  return batch;
}

}  // namespace hunter
