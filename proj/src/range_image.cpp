#include "hunter/range_image.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "hunter/simd/kernels.hpp"

namespace hunter {

namespace {
constexpr double kDegPerRad = 180.0 / std::numbers::pi;
constexpr double kRadPerDeg = std::numbers::pi / 180.0;

template <typename T>
void put(std::vector<std::uint8_t>& buf, T v) {
  const std::size_t at = buf.size();
  buf.resize(at + sizeof(T));
  std::memcpy(buf.data() + at, &v, sizeof(T));
}

template <typename T>
T get(const std::vector<std::uint8_t>& buf, std::size_t& at) {
  if (at + sizeof(T) > buf.size())
    throw std::runtime_error("range-image: truncated buffer");
  T v;
  std::memcpy(&v, buf.data() + at, sizeof(T));
  at += sizeof(T);
  return v;
}
}  // namespace

void LidarSpec::validate() const {
  if (rows < 1 || cols < 1) throw std::invalid_argument("lidar-spec: H and W must be >= 1");
  if (!(max_range > 0)) throw std::invalid_argument("lidar-spec: max_range must be > 0");
  if (!(min_elev_deg < max_elev_deg))
    throw std::invalid_argument("lidar-spec: min_elev must be < max_elev");
}

Vec3 LidarSpec::cell_direction(std::int32_t i, std::int32_t j) const {
  const double elev = (min_elev_deg + (i + 0.5) * elev_bin_deg()) * kRadPerDeg;
  const double azim = (-180.0 + (j + 0.5) * azim_bin_deg()) * kRadPerDeg;
  const double ce = std::cos(elev);
  return {ce * std::cos(azim), ce * std::sin(azim), std::sin(elev)};
}

RangeImage::RangeImage(const LidarSpec& spec) : spec_(spec) {
  spec_.validate();
  const std::size_t n = static_cast<std::size_t>(spec_.rows) * spec_.cols;
  range_.assign(n, kEmptyRange);
  x_.assign(n, 0.0);
  y_.assign(n, 0.0);
  z_.assign(n, 0.0);
  occ_.assign(n, 0);
  src_.assign(n, 0);
}

std::size_t RangeImage::occupied_count() const {
  std::size_t n = 0;
  for (const auto o : occ_) n += o != 0;
  return n;
}

void RangeImage::set_cell(std::size_t idx, const Vec3& p, double range, PointSource src) {
  range_[idx] = range;
  x_[idx] = p.x();
  y_[idx] = p.y();
  z_[idx] = p.z();
  occ_[idx] = 1;
  src_[idx] = static_cast<std::uint8_t>(src);
}

void RangeImage::clear_cell(std::size_t idx) {
  range_[idx] = kEmptyRange;
  x_[idx] = y_[idx] = z_[idx] = 0.0;
  occ_[idx] = 0;
  src_[idx] = 0;
}

bool project_point(const LidarSpec& spec, const Vec3& p, CellIndex& out) {
  const Vec3 v = p - spec.origin;
  const double r = v.norm();
  if (!(r > 0.0) || r > spec.max_range) return false;
  const double elev = std::atan2(v.z(), std::hypot(v.x(), v.y())) * kDegPerRad;
  if (elev < spec.min_elev_deg || elev > spec.max_elev_deg) return false;
  const double azim = std::atan2(v.y(), v.x()) * kDegPerRad;
  const auto row = grid_bin(elev, spec.min_elev_deg, spec.elev_bin_deg());
  const auto col = grid_bin(azim, -180.0, spec.azim_bin_deg());
  out.row = static_cast<std::int32_t>(row);
  out.col = static_cast<std::int32_t>(col);
  out.range = r;
  return true;
}

RangeImage project(const PointCloud& cloud, const LidarSpec& spec) {
  RangeImage image(spec);
  CellIndex cell;
  for (std::size_t k = 0; k < cloud.size(); ++k) {
    if (!project_point(spec, cloud.points[k], cell)) continue;
    const std::size_t idx = image.index(cell.row, cell.col);
    // nearest return wins; a tie keeps the earlier point
    if (cell.range < image.range(idx))
      image.set_cell(idx, cloud.points[k], cell.range, cloud.source_of(k));
  }
  return image;
}

PointCloud backproject(const RangeImage& image) {
  PointCloud cloud;
  const std::size_t n = image.size();
  cloud.points.reserve(image.occupied_count());
  cloud.sources.reserve(cloud.points.capacity());
  for (std::size_t idx = 0; idx < n; ++idx) {
    if (!image.occupied(idx)) continue;
    cloud.points.push_back(image.point(idx));
    cloud.sources.push_back(image.source(idx));
  }
  return cloud;
}

RangeImage merge(const RangeImage& scene, const RangeImage& instance) {
  if (!(scene.spec() == instance.spec())) throw std::invalid_argument("spec-mismatch");
  RangeImage out(scene.spec());
  const simd::CellsView a{scene.range_.data(), scene.x_.data(), scene.y_.data(),
                          scene.z_.data(), scene.occ_.data(), scene.src_.data()};
  const simd::CellsView b{instance.range_.data(), instance.x_.data(),
                          instance.y_.data(), instance.z_.data(),
                          instance.occ_.data(), instance.src_.data()};
  const simd::CellsOut dst{out.range_.data(), out.x_.data(), out.y_.data(),
                           out.z_.data(), out.occ_.data(), out.src_.data()};
  simd::active().merge_cells(out.size(), a, b, dst);
  return out;
}

double occlusion_rate(const RangeImage& instance, const RangeImage& merged) {
  if (!(instance.spec() == merged.spec())) throw std::invalid_argument("spec-mismatch");
  std::size_t occupied = 0, survived = 0;
  const std::size_t n = instance.size();
  for (std::size_t idx = 0; idx < n; ++idx) {
    if (!instance.occupied(idx)) continue;
    ++occupied;
    if (merged.occupied(idx) && merged.range(idx) == instance.range(idx) &&
        merged.point(idx) == instance.point(idx))
      ++survived;
  }
  if (occupied == 0) throw std::invalid_argument("empty-instance");
  return 1.0 - static_cast<double>(survived) / static_cast<double>(occupied);
}

std::vector<std::uint8_t> serialize(const RangeImage& image) {
  const LidarSpec& s = image.spec();
  std::vector<std::uint8_t> buf;
  buf.reserve(64 + image.size() * 13);
  put<double>(buf, static_cast<double>(s.rows));
  put<double>(buf, static_cast<double>(s.cols));
  put<double>(buf, s.min_elev_deg);
  put<double>(buf, s.max_elev_deg);
  put<double>(buf, s.max_range);
  put<double>(buf, s.origin.x());
  put<double>(buf, s.origin.y());
  put<double>(buf, s.origin.z());
  for (std::size_t idx = 0; idx < image.size(); ++idx) {
    const bool occ = image.occupied(idx);
    put<std::uint8_t>(buf, occ ? 1 : 0);
    const Vec3 p = occ ? image.point(idx) : Vec3::Zero();
    put<float>(buf, static_cast<float>(p.x()));
    put<float>(buf, static_cast<float>(p.y()));
    put<float>(buf, static_cast<float>(p.z()));
  }
  return buf;
}

RangeImage deserialize_range_image(const std::vector<std::uint8_t>& bytes) {
  std::size_t at = 0;
  LidarSpec s;
  s.rows = static_cast<std::int32_t>(std::llround(get<double>(bytes, at)));
  s.cols = static_cast<std::int32_t>(std::llround(get<double>(bytes, at)));
  s.min_elev_deg = get<double>(bytes, at);
  s.max_elev_deg = get<double>(bytes, at);
  s.max_range = get<double>(bytes, at);
  s.origin.x() = get<double>(bytes, at);
  s.origin.y() = get<double>(bytes, at);
  s.origin.z() = get<double>(bytes, at);
  RangeImage image(s);
  for (std::size_t idx = 0; idx < image.size(); ++idx) {
    const auto occ = get<std::uint8_t>(bytes, at);
    const double x = get<float>(bytes, at);
    const double y = get<float>(bytes, at);
    const double z = get<float>(bytes, at);
    if (occ) {
      const Vec3 p(x, y, z);
      image.set_cell(idx, p, (p - s.origin).norm(), PointSource::scene);
    }
  }
  return image;
}

void save_range_image(const RangeImage& image, const std::filesystem::path& path) {
  const auto buf = serialize(image);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

RangeImage load_range_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
  return deserialize_range_image(buf);
}

}  // namespace hunter
