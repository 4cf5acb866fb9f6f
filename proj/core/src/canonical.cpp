#include "drape/canonical.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "drape/check.hpp"

namespace drape {

void CanonicalConfig::validate(const BodyModelAsset& asset) const {
  DRAPE_REQUIRE(sigma > 0.0, "canonical kernel sigma must be > 0, got ", sigma);
  DRAPE_REQUIRE(knn >= 1, "canonical neighbor count must be >= 1, got ", knn);
  DRAPE_REQUIRE(canonical_theta.size() == asset.pose_dim(), "canonical pose has ",
                canonical_theta.size(), " entries, asset expects ", asset.pose_dim());
}

bool CanonicalConfig::same_as(const CanonicalConfig& other) const {
  return sigma == other.sigma && knn == other.knn &&
         canonical_theta.size() == other.canonical_theta.size() &&
         canonical_theta == other.canonical_theta;
}

VecX canonical_pose(const BodyModelAsset& asset) {
  VecX theta = VecX::Zero(asset.pose_dim());
  if (asset.joint_count() >= 8) {
    const double arm = 45.0 * M_PI / 180.0;
    const double leg = 15.0 * M_PI / 180.0;
    theta[3 + 3 * 4 + 2] = -arm;  // left shoulder, about the view axis
    theta[3 + 3 * 5 + 2] = arm;   // right shoulder
    theta[3 + 3 * 6 + 2] = -leg;  // left hip
    theta[3 + 3 * 7 + 2] = leg;   // right hip
  }
  return theta;
}

void VertexKnn::build(const Points3& points) {
  DRAPE_REQUIRE(points.rows() > 0, "knn index over empty mesh");
  points_ = &points;
  Vec3 lo = points.colwise().minCoeff();
  Vec3 hi = points.colwise().maxCoeff();
  const int n = static_cast<int>(points.rows());
  const int target = std::max(2, static_cast<int>(std::cbrt(static_cast<double>(n))));
  const double extent = std::max({hi.x() - lo.x(), hi.y() - lo.y(), hi.z() - lo.z(), 1e-9});
  cell_ = extent / target;
  origin_ = lo;
  for (int a = 0; a < 3; ++a) {
    dims_[a] = std::max(1, static_cast<int>(std::floor((hi[a] - lo[a]) / cell_)) + 1);
  }
  cells_.assign(static_cast<size_t>(dims_[0]) * dims_[1] * dims_[2], {});
  for (int i = 0; i < n; ++i) {
    const Vec3 p = points.row(i);
    const size_t idx = static_cast<size_t>(cell_of(p, 0)) +
                       static_cast<size_t>(dims_[0]) *
                           (static_cast<size_t>(cell_of(p, 1)) +
                            static_cast<size_t>(dims_[1]) * static_cast<size_t>(cell_of(p, 2)));
    cells_[idx].push_back(i);
  }
}

int VertexKnn::cell_of(const Vec3& p, int axis) const {
  int c = static_cast<int>(std::floor((p[axis] - origin_[axis]) / cell_));
  return std::clamp(c, 0, dims_[axis] - 1);
}

void VertexKnn::query(const Vec3& x, int k, std::vector<int>& out, bool* clamped) const {
  DRAPE_ASSERT(points_, "knn query before build");
  const int n = static_cast<int>(points_->rows());
  if (clamped) *clamped = k > n;
  k = std::min(k, n);

  const int cx = cell_of(x, 0), cy = cell_of(x, 1), cz = cell_of(x, 2);
  const int max_ring = std::max({dims_[0], dims_[1], dims_[2]});

  std::vector<std::pair<double, int>> cand;
  cand.reserve(static_cast<size_t>(k) * 4);
  auto scan_ring = [&](int r) {
    for (int dz = -r; dz <= r; ++dz) {
      const int z = cz + dz;
      if (z < 0 || z >= dims_[2]) continue;
      for (int dy = -r; dy <= r; ++dy) {
        const int y = cy + dy;
        if (y < 0 || y >= dims_[1]) continue;
        for (int dx = -r; dx <= r; ++dx) {
          if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != r) continue;
          const int xx = cx + dx;
          if (xx < 0 || xx >= dims_[0]) continue;
          const size_t idx = static_cast<size_t>(xx) +
                             static_cast<size_t>(dims_[0]) *
                                 (static_cast<size_t>(y) +
                                  static_cast<size_t>(dims_[1]) * static_cast<size_t>(z));
          for (int i : cells_[idx]) {
            const double d2 = (Vec3(points_->row(i)) - x).squaredNorm();
            cand.emplace_back(d2, i);
          }
        }
      }
    }
  };

  int ring = 0;
  for (; ring <= max_ring; ++ring) {
    scan_ring(ring);
    if (static_cast<int>(cand.size()) < k) continue;
    // kth best so far vs. closest possible point in the next ring
    std::nth_element(cand.begin(), cand.begin() + (k - 1), cand.end());
    const double kth = cand[static_cast<size_t>(k - 1)].first;
    const double ring_gap = (static_cast<double>(ring)) * cell_;  // conservative lower bound
    if (ring_gap * ring_gap > kth) break;
  }
  std::sort(cand.begin(), cand.end());
  out.resize(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i) out[static_cast<size_t>(i)] = cand[static_cast<size_t>(i)].second;
}

CanonicalBody canonical_body(const BodyModelAsset& asset, const VecX& canonical_theta) {
  BodyParams p = BodyParams::rest(asset);
  p.theta = canonical_theta;
  BodyPose pose = pose_body(p, asset);
  CanonicalBody body;
  body.vertex_tf = std::move(pose.vertex_tf);
  body.verts = std::move(pose.verts);
  return body;
}

Mat4 affine_inverse(const Mat4& m) {
  Mat4 inv = Mat4::Identity();
  const Mat3 r_inv = m.block<3, 3>(0, 0).inverse();
  inv.block<3, 3>(0, 0) = r_inv;
  inv.block<3, 1>(0, 3) = -r_inv * m.block<3, 1>(0, 3);
  return inv;
}

CanonicalFrame build_canonical_frame(const BodyModelAsset& asset, const BodyParams& params,
                                     const CanonicalConfig& cfg,
                                     const CanonicalBody* cached_canonical) {
  cfg.validate(asset);
  CanonicalFrame frame;
  frame.asset = &asset;
  frame.cfg = cfg;
  frame.observed = pose_body(params, asset);

  BodyParams pose_only_params = BodyParams::rest(asset);
  pose_only_params.theta = params.theta;
  frame.pose_only = pose_body(pose_only_params, asset);

  if (cached_canonical) {
    frame.canonical_tf = cached_canonical->vertex_tf;
    frame.canonical_verts = cached_canonical->verts;
  } else {
    CanonicalBody body = canonical_body(asset, cfg.canonical_theta);
    frame.canonical_tf = std::move(body.vertex_tf);
    frame.canonical_verts = std::move(body.verts);
  }

  const int n_v = asset.vertex_count();
  frame.observed_inv.resize(static_cast<size_t>(n_v));
  for (int i = 0; i < n_v; ++i) {
    const Mat4& m = frame.observed.vertex_tf[static_cast<size_t>(i)];
    const Mat4 inv = affine_inverse(m);
    frame.observed_inv[static_cast<size_t>(i)] = inv;
    DRAPE_ASSERT(((inv * m) - Mat4::Identity()).cwiseAbs().maxCoeff() <= 1e-9,
                 "vertex transform ", i, " is not invertible to tolerance");
  }
  frame.knn.build(frame.observed.verts);
  return frame;
}

CanonWeights canonicalization_weights(const Vec3& x, std::span<const int> neighbors,
                                      const Points3& posed_verts, const MatX& skin_weights,
                                      double sigma) {
  DRAPE_REQUIRE(!neighbors.empty(), "canonicalization needs at least one neighbor");
  CanonWeights w;
  w.omega.resize(static_cast<Eigen::Index>(neighbors.size()));
  const int nn = neighbors[0];
  const double inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma);
  for (size_t i = 0; i < neighbors.size(); ++i) {
    const int v = neighbors[i];
    const double dist = (x - Vec3(posed_verts.row(v))).norm();
    const double wdist = (skin_weights.col(nn) - skin_weights.col(v)).norm();
    w.omega[static_cast<Eigen::Index>(i)] = std::exp(-dist * wdist * inv_two_sigma2);
  }
  w.total = w.omega.sum();
  if (!(w.total > 0.0)) {
    // far-field fallback: pure nearest-neighbor transform
    w.omega.setZero();
    w.omega[0] = 1.0;
    w.total = 1.0;
    w.fallback = true;
  }
  return w;
}

CanonicalSample canonicalize_with_neighbors(const Vec3& x, std::span<const int> neighbors,
                                            const CanonicalFrame& frame) {
  CanonicalSample s;
  s.x = x;
  s.neighbors.assign(neighbors.begin(), neighbors.end());
  s.weights = canonicalization_weights(x, neighbors, frame.observed.verts,
                                       frame.asset->skin_weights, frame.cfg.sigma);
  s.inv_applied.resize(neighbors.size());
  Vec3 acc = Vec3::Zero();
  double w_acc = 0.0;
  for (size_t i = 0; i < neighbors.size(); ++i) {
    const int v = neighbors[i];
    const Mat4& inv = frame.observed_inv[static_cast<size_t>(v)];
    const Vec3 y = inv.block<3, 3>(0, 0) * x + inv.block<3, 1>(0, 3);
    s.inv_applied[i] = y;
    const Mat4& c = frame.canonical_tf[static_cast<size_t>(v)];
    const Vec3 z = c.block<3, 3>(0, 0) * y + c.block<3, 1>(0, 3);
    const double wi = s.weights.omega[static_cast<Eigen::Index>(i)] / s.weights.total;
    acc += wi * z;
    w_acc += wi;
  }
  DRAPE_ASSERT(std::abs(w_acc - 1.0) <= 1e-9,
               "canonicalization blend is not a partition of unity (w = ", w_acc,
               "), broken transform");
  s.canonical = acc;
  return s;
}

CanonicalSample canonicalize_point(const Vec3& x, const CanonicalFrame& frame) {
  std::vector<int> nb;
  frame.knn.query(x, frame.cfg.knn, nb);
  return canonicalize_with_neighbors(x, nb, frame);
}

Vec3 canonicalize_backward(const CanonicalSample& s, const CanonicalFrame& frame,
                           const Vec3& d_canonical, std::vector<Mat4>& d_observed_tf,
                           Points3& d_observed_verts) {
  const size_t n = s.neighbors.size();
  Vec3 d_x = Vec3::Zero();

  // x^c = sum_i (omega_i / Omega) z_i
  VecX d_wbar(static_cast<Eigen::Index>(n));
  for (size_t i = 0; i < n; ++i) {
    const int v = s.neighbors[i];
    const Mat4& c = frame.canonical_tf[static_cast<size_t>(v)];
    const Vec3 z = c.block<3, 3>(0, 0) * s.inv_applied[i] + c.block<3, 1>(0, 3);
    d_wbar[static_cast<Eigen::Index>(i)] = d_canonical.dot(z);

    // z path: through the inverted observed transform and into x
    const double wbar = s.weights.omega[static_cast<Eigen::Index>(i)] / s.weights.total;
    const Vec3 d_z = wbar * d_canonical;
    const Vec3 d_y = c.block<3, 3>(0, 0).transpose() * d_z;
    const Mat4& inv = frame.observed_inv[static_cast<size_t>(v)];
    d_x += inv.block<3, 3>(0, 0).transpose() * d_y;

    // dL/dM = -inv^T dL/dinv inv^T, restricted to the structural rows
    Mat4 d_inv = Mat4::Zero();
    Vec4 xh;
    xh << s.x.x(), s.x.y(), s.x.z(), 1.0;
    for (int r = 0; r < 3; ++r) d_inv.row(r) = d_y[r] * xh.transpose();
    d_observed_tf[static_cast<size_t>(v)].noalias() -=
        inv.transpose() * d_inv * inv.transpose();
  }

  if (!s.weights.fallback) {
    const double mean_d = [&] {
      double acc = 0.0;
      for (size_t i = 0; i < n; ++i)
        acc += (s.weights.omega[static_cast<Eigen::Index>(i)] / s.weights.total) *
               d_wbar[static_cast<Eigen::Index>(i)];
      return acc;
    }();
    const int nn = s.neighbors[0];
    const double inv_two_sigma2 = 1.0 / (2.0 * frame.cfg.sigma * frame.cfg.sigma);
    for (size_t i = 0; i < n; ++i) {
      const int v = s.neighbors[i];
      const double d_omega =
          (d_wbar[static_cast<Eigen::Index>(i)] - mean_d) / s.weights.total;
      const double wdist =
          (frame.asset->skin_weights.col(nn) - frame.asset->skin_weights.col(v)).norm();
      if (wdist == 0.0) continue;  // the nearest neighbor's weight is constant 1
      const Vec3 diff = s.x - Vec3(frame.observed.verts.row(v));
      const double dist = diff.norm();
      if (dist < 1e-12) continue;
      const double d_dist =
          d_omega * s.weights.omega[static_cast<Eigen::Index>(i)] * (-wdist * inv_two_sigma2);
      const Vec3 dir = diff / dist;
      d_x += d_dist * dir;
      d_observed_verts.row(v) -= d_dist * dir.transpose();
    }
  }
  return d_x;
}

}  // namespace drape
