#include "drape/body_model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

#include "drape/check.hpp"
#include "drape/serialization.hpp"

namespace drape {

namespace {

Mat4 translation(const Vec3& t) {
  Mat4 m = Mat4::Identity();
  m.block<3, 1>(0, 3) = t;
  return m;
}

Mat3 cross_matrix(const Vec3& a) {
  Mat3 k;
  k << 0, -a.z(), a.y(), a.z(), 0, -a.x(), -a.y(), a.x(), 0;
  return k;
}

// Topological order of the kinematic tree (parents before children).
std::vector<int> topo_order(const std::vector<int>& parents) {
  const int n = static_cast<int>(parents.size());
  std::vector<int> order;
  order.reserve(n);
  std::vector<char> placed(n, 0);
  while (static_cast<int>(order.size()) < n) {
    bool progress = false;
    for (int k = 0; k < n; ++k) {
      if (placed[k]) continue;
      if (parents[k] < 0 || placed[parents[k]]) {
        order.push_back(k);
        placed[k] = 1;
        progress = true;
      }
    }
    DRAPE_REQUIRE(progress, "parent table contains a cycle");
  }
  return order;
}

}  // namespace

std::vector<int> BodyModelAsset::hand_vertices() const {
  std::vector<int> idx;
  for (int i = 0; i < vertex_count(); ++i)
    if (region[static_cast<size_t>(i)] == Region::Hand) idx.push_back(i);
  return idx;
}

void BodyModelAsset::validate() const {
  const int n_v = vertex_count();
  const int n_k = joint_count();
  DRAPE_REQUIRE(n_v > 0, "asset has no vertices");
  DRAPE_REQUIRE(n_k > 0, "asset has no joints");
  DRAPE_REQUIRE(rest_template.allFinite(), "template contains non-finite values");
  DRAPE_REQUIRE(shape_basis.rows() == 3 * n_v, "shape basis rows != 3*n_v");
  DRAPE_REQUIRE(pose_basis.rows() == 3 * n_v, "pose basis rows != 3*n_v");
  DRAPE_REQUIRE(pose_basis.cols() == pose_feature_dim(),
                "pose basis cols != 9*(n_k-1): got ", pose_basis.cols());
  DRAPE_REQUIRE(expr_basis.rows() == 3 * n_v, "expression basis rows != 3*n_v");
  DRAPE_REQUIRE(shape_basis.allFinite() && pose_basis.allFinite() && expr_basis.allFinite(),
                "blendshape basis contains non-finite values");
  DRAPE_REQUIRE(skin_weights.rows() == n_k && skin_weights.cols() == n_v,
                "skinning weights must be n_k x n_v");
  DRAPE_REQUIRE(joint_regressor.rows() == n_k && joint_regressor.cols() == n_v,
                "joint regressor must be n_k x n_v");
  DRAPE_REQUIRE(static_cast<int>(region.size()) == n_v, "region labels must cover all vertices");

  for (int i = 0; i < n_v; ++i) {
    const double sum = skin_weights.col(i).sum();
    DRAPE_REQUIRE(std::abs(sum - 1.0) <= 1e-9, "skinning weights of vertex ", i,
                  " sum to ", sum, ", expected 1");
    DRAPE_REQUIRE(skin_weights.col(i).minCoeff() >= -1e-12,
                  "negative skinning weight at vertex ", i);
  }
  for (int f = 0; f < face_count(); ++f)
    for (int c = 0; c < 3; ++c)
      DRAPE_REQUIRE(faces(f, c) >= 0 && faces(f, c) < n_v, "face ", f,
                    " references out-of-range vertex ", faces(f, c));

  DRAPE_REQUIRE(static_cast<int>(parents.size()) == n_k, "parent table size != n_k");
  DRAPE_REQUIRE(parents[0] == -1, "joint 0 (pelvis) must be the root");
  for (int k = 1; k < n_k; ++k)
    DRAPE_REQUIRE(parents[static_cast<size_t>(k)] >= 0 && parents[static_cast<size_t>(k)] < n_k &&
                      parents[static_cast<size_t>(k)] != k,
                  "invalid parent for joint ", k);
  topo_order(parents);  // throws on cycles
}

BodyParams BodyParams::rest(const BodyModelAsset& asset) {
  BodyParams p;
  p.beta = VecX::Zero(asset.shape_dim());
  p.theta = VecX::Zero(asset.pose_dim());
  p.psi = VecX::Zero(asset.expr_dim());
  p.offsets = Points3::Zero(asset.vertex_count(), 3);
  return p;
}

void BodyParams::validate_against(const BodyModelAsset& asset) const {
  DRAPE_REQUIRE(beta.size() == asset.shape_dim(), "beta has ", beta.size(),
                " entries, asset expects ", asset.shape_dim());
  DRAPE_REQUIRE(theta.size() == asset.pose_dim(), "theta has ", theta.size(),
                " entries, asset expects ", asset.pose_dim());
  DRAPE_REQUIRE(psi.size() == asset.expr_dim(), "psi has ", psi.size(),
                " entries, asset expects ", asset.expr_dim());
  DRAPE_REQUIRE(offsets.rows() == asset.vertex_count(), "offsets have ", offsets.rows(),
                " rows, asset expects ", asset.vertex_count());
  DRAPE_REQUIRE(beta.allFinite() && theta.allFinite() && psi.allFinite() && offsets.allFinite(),
                "body parameters contain non-finite values");
}

Mat3 rodrigues(const Vec3& a) {
  const double phi2 = a.squaredNorm();
  const Mat3 k = cross_matrix(a);
  if (phi2 < 1e-16) {
    // second-order series, exact enough below sqrt(1e-16)
    return Mat3::Identity() + k + 0.5 * (k * k);
  }
  const double phi = std::sqrt(phi2);
  return Mat3::Identity() + (std::sin(phi) / phi) * k + ((1.0 - std::cos(phi)) / phi2) * (k * k);
}

void rodrigues_jacobian(const Vec3& a, Mat3 dR[3]) {
  const double phi = a.norm();
  if (phi < 1e-4) {
    // dR/da_i = [e_i]x + 0.5 ([e_i]x [a]x + [a]x [e_i]x) + O(|a|^2)
    const Mat3 k = cross_matrix(a);
    for (int i = 0; i < 3; ++i) {
      const Mat3 ei = cross_matrix(Vec3::Unit(i));
      dR[i] = ei + 0.5 * (ei * k + k * ei);
    }
    return;
  }
  // Compact exact formula for the derivative of the exponential map.
  const Mat3 r = rodrigues(a);
  const Mat3 k = cross_matrix(a);
  const Mat3 eye_minus_r = Mat3::Identity() - r;
  for (int i = 0; i < 3; ++i) {
    const Vec3 v = a.cross(eye_minus_r.col(i));
    dR[i] = ((a[i] * k + cross_matrix(v)) / (phi * phi)) * r;
  }
}

VecX pose_feature(const VecX& theta, int n_joints) {
  DRAPE_REQUIRE(theta.size() == 3 * n_joints + 3, "theta has ", theta.size(),
                " entries, expected ", 3 * n_joints + 3);
  VecX feat(9 * (n_joints - 1));
  for (int j = 1; j < n_joints; ++j) {
    const Mat3 r = rodrigues(theta.segment<3>(3 + 3 * j)) - Mat3::Identity();
    for (int row = 0; row < 3; ++row)
      for (int col = 0; col < 3; ++col) feat[9 * (j - 1) + 3 * row + col] = r(row, col);
  }
  return feat;
}

Points3 blend_shapes(const BodyParams& params, const BodyModelAsset& asset) {
  params.validate_against(asset);
  const int n_v = asset.vertex_count();
  VecX b = asset.shape_basis * params.beta;
  b.noalias() += asset.pose_basis * pose_feature(params.theta, asset.joint_count());
  b.noalias() += asset.expr_basis * params.psi;
  Points3 out(n_v, 3);
  for (int i = 0; i < n_v; ++i)
    for (int c = 0; c < 3; ++c) out(i, c) = b[3 * i + c];
  return out;
}

Points3 regress_joints(const VecX& beta, const BodyModelAsset& asset) {
  DRAPE_REQUIRE(beta.size() == asset.shape_dim(), "beta has ", beta.size(),
                " entries, asset expects ", asset.shape_dim());
  const int n_v = asset.vertex_count();
  const VecX shaped = asset.shape_basis * beta;
  Points3 pts = asset.rest_template;
  for (int i = 0; i < n_v; ++i)
    for (int c = 0; c < 3; ++c) pts(i, c) += shaped[3 * i + c];
  return asset.joint_regressor * pts;
}

JointTransforms joint_transforms(const VecX& theta, const Points3& rest_joints,
                                 const std::vector<int>& parents) {
  const int n_k = static_cast<int>(parents.size());
  DRAPE_REQUIRE(theta.size() == 3 * n_k + 3, "theta has ", theta.size(), " entries, expected ",
                3 * n_k + 3);
  DRAPE_REQUIRE(theta.allFinite(), "theta contains non-finite values");
  DRAPE_REQUIRE(rest_joints.rows() == n_k, "rest joints size mismatch");

  JointTransforms out;
  out.world.resize(static_cast<size_t>(n_k));
  out.rel.resize(static_cast<size_t>(n_k));
  const Mat3 global = rodrigues(theta.head<3>());
  for (int k : topo_order(parents)) {
    Mat3 rot = rodrigues(theta.segment<3>(3 + 3 * k));
    if (parents[static_cast<size_t>(k)] < 0) rot = global * rot;
    Mat4 local = Mat4::Identity();
    local.block<3, 3>(0, 0) = rot;
    const int par = parents[static_cast<size_t>(k)];
    local.block<3, 1>(0, 3) = par < 0
                                  ? Vec3(rest_joints.row(k))
                                  : Vec3(rest_joints.row(k) - rest_joints.row(par));
    out.world[static_cast<size_t>(k)] =
        par < 0 ? local : Mat4(out.world[static_cast<size_t>(par)] * local);
    out.rel[static_cast<size_t>(k)] =
        out.world[static_cast<size_t>(k)] * translation(-Vec3(rest_joints.row(k)));
  }
  return out;
}

BodyPose pose_body(const BodyParams& params, const BodyModelAsset& asset) {
  params.validate_against(asset);
  const int n_v = asset.vertex_count();
  const int n_k = asset.joint_count();

  BodyPose pose;
  pose.blend = blend_shapes(params, asset);
  pose.rest_joints = regress_joints(params.beta, asset);
  pose.global_rot = rodrigues(params.theta.head<3>());
  pose.joint_rot.resize(static_cast<size_t>(n_k));
  for (int k = 0; k < n_k; ++k)
    pose.joint_rot[static_cast<size_t>(k)] = rodrigues(params.theta.segment<3>(3 + 3 * k));

  JointTransforms jt = joint_transforms(params.theta, pose.rest_joints, asset.parents);
  pose.world = std::move(jt.world);
  pose.rel = std::move(jt.rel);
  pose.posed_joints.resize(n_k, 3);
  for (int k = 0; k < n_k; ++k)
    pose.posed_joints.row(k) = pose.world[static_cast<size_t>(k)].block<3, 1>(0, 3).transpose();

  pose.blended.resize(static_cast<size_t>(n_v));
  pose.vertex_tf.resize(static_cast<size_t>(n_v));
  pose.verts.resize(n_v, 3);
  for (int i = 0; i < n_v; ++i) {
    Mat4 blended = Mat4::Zero();
    for (int k = 0; k < n_k; ++k) {
      const double w = asset.skin_weights(k, i);
      if (w != 0.0) blended.noalias() += w * pose.rel[static_cast<size_t>(k)];
    }
    pose.blended[static_cast<size_t>(i)] = blended;
    const Vec3 shift = Vec3(params.offsets.row(i)) + Vec3(pose.blend.row(i));
    const Mat4 m = blended * translation(shift);
    pose.vertex_tf[static_cast<size_t>(i)] = m;
    const Vec3 t = asset.rest_template.row(i);
    pose.verts.row(i) = (m.block<3, 3>(0, 0) * t + m.block<3, 1>(0, 3)).transpose();
  }
  return pose;
}

std::vector<Mat4> vertex_transforms(const BodyParams& params, const BodyModelAsset& asset) {
  return pose_body(params, asset).vertex_tf;
}

BodyGrads BodyGrads::zero(const BodyModelAsset& asset) {
  BodyGrads g;
  g.beta = VecX::Zero(asset.shape_dim());
  g.theta = VecX::Zero(asset.pose_dim());
  g.psi = VecX::Zero(asset.expr_dim());
  g.offsets = Points3::Zero(asset.vertex_count(), 3);
  return g;
}

BodyGrads lbs_backward(const BodyModelAsset& asset, const BodyParams& params,
                       const BodyPose& pose, const std::vector<Mat4>& d_vertex_tf,
                       const Points3* d_verts) {
  const int n_v = asset.vertex_count();
  const int n_k = asset.joint_count();
  DRAPE_ASSERT(static_cast<int>(d_vertex_tf.size()) == n_v, "d_vertex_tf size mismatch");

  BodyGrads g = BodyGrads::zero(asset);
  Points3 d_blend = Points3::Zero(n_v, 3);
  std::vector<Mat4> d_rel(static_cast<size_t>(n_k), Mat4::Zero());

  // Per-vertex: M_i = blended_i * translate(o_i + B_i).
  for (int i = 0; i < n_v; ++i) {
    Mat4 dm = d_vertex_tf[static_cast<size_t>(i)];
    if (d_verts) {
      Vec4 th;
      th << asset.rest_template(i, 0), asset.rest_template(i, 1), asset.rest_template(i, 2), 1.0;
      for (int r = 0; r < 3; ++r) dm.row(r) += (*d_verts)(i, r) * th.transpose();
    }
    dm.row(3).setZero();  // homogeneous row is structural

    const Vec3 shift = Vec3(params.offsets.row(i)) + Vec3(pose.blend.row(i));
    const Mat4 tr = translation(shift);
    const Mat4 d_blended = dm * tr.transpose();
    const Mat4 d_tr = pose.blended[static_cast<size_t>(i)].transpose() * dm;
    const Vec3 d_shift = d_tr.block<3, 1>(0, 3);
    g.offsets.row(i) += d_shift.transpose();
    d_blend.row(i) += d_shift.transpose();
    for (int k = 0; k < n_k; ++k) {
      const double w = asset.skin_weights(k, i);
      if (w != 0.0) d_rel[static_cast<size_t>(k)].noalias() += w * d_blended;
    }
  }

  // rel_k = world_k * translate(-J_k).
  Points3 d_joints = Points3::Zero(n_k, 3);
  std::vector<Mat4> d_world(static_cast<size_t>(n_k), Mat4::Zero());
  for (int k = 0; k < n_k; ++k) {
    const Mat4 tr = translation(-Vec3(pose.rest_joints.row(k)));
    d_world[static_cast<size_t>(k)] = d_rel[static_cast<size_t>(k)] * tr.transpose();
    const Mat4 d_tr = pose.world[static_cast<size_t>(k)].transpose() * d_rel[static_cast<size_t>(k)];
    d_joints.row(k) -= d_tr.block<3, 1>(0, 3).transpose();
  }

  // Chain: world_k = world_parent * local_k, children first.
  std::vector<Mat3> d_rot(static_cast<size_t>(n_k), Mat3::Zero());
  const std::vector<int> order = topo_order(asset.parents);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const int k = *it;
    const int par = asset.parents[static_cast<size_t>(k)];
    Mat4 local = Mat4::Identity();
    Mat3 rot = pose.joint_rot[static_cast<size_t>(k)];
    if (par < 0) rot = pose.global_rot * rot;
    local.block<3, 3>(0, 0) = rot;
    local.block<3, 1>(0, 3) =
        par < 0 ? Vec3(pose.rest_joints.row(k))
                : Vec3(pose.rest_joints.row(k) - pose.rest_joints.row(par));

    Mat4 d_local;
    if (par < 0) {
      d_local = d_world[static_cast<size_t>(k)];
    } else {
      d_local = pose.world[static_cast<size_t>(par)].transpose() * d_world[static_cast<size_t>(k)];
      d_world[static_cast<size_t>(par)].noalias() +=
          d_world[static_cast<size_t>(k)] * local.transpose();
    }
    d_rot[static_cast<size_t>(k)] += d_local.block<3, 3>(0, 0);
    const Vec3 d_t = d_local.block<3, 1>(0, 3);
    d_joints.row(k) += d_t.transpose();
    if (par >= 0) d_joints.row(par) -= d_t.transpose();
  }

  // Pose-corrective features also touch the non-global rotations.
  VecX d_feat = asset.pose_basis.transpose() * [&] {
    VecX v(3 * n_v);
    for (int i = 0; i < n_v; ++i)
      for (int c = 0; c < 3; ++c) v[3 * i + c] = d_blend(i, c);
    return v;
  }();

  // Rotations -> theta.
  Mat3 jac[3];
  for (int k = 0; k < n_k; ++k) {
    Mat3 d_own = d_rot[static_cast<size_t>(k)];
    if (asset.parents[static_cast<size_t>(k)] < 0) {
      // composed root rotation R_g * R_0
      const Mat3 d_composed = d_own;
      const Mat3 d_global = d_composed * pose.joint_rot[static_cast<size_t>(k)].transpose();
      d_own = pose.global_rot.transpose() * d_composed;
      rodrigues_jacobian(params.theta.head<3>(), jac);
      for (int i = 0; i < 3; ++i) g.theta[i] += (d_global.array() * jac[i].array()).sum();
    }
    if (k >= 1) {
      for (int row = 0; row < 3; ++row)
        for (int col = 0; col < 3; ++col)
          d_own(row, col) += d_feat[9 * (k - 1) + 3 * row + col];
    }
    rodrigues_jacobian(params.theta.segment<3>(3 + 3 * k), jac);
    for (int i = 0; i < 3; ++i)
      g.theta[3 + 3 * k + i] += (d_own.array() * jac[i].array()).sum();
  }

  // Joints: J = regressor * (T + reshape(S beta)).
  const Points3 d_shaped = asset.joint_regressor.transpose() * d_joints;
  VecX d_shaped_vec(3 * n_v);
  for (int i = 0; i < n_v; ++i)
    for (int c = 0; c < 3; ++c) d_shaped_vec[3 * i + c] = d_shaped(i, c);
  g.beta.noalias() += asset.shape_basis.transpose() * d_shaped_vec;

  // Blendshape contraction.
  VecX d_blend_vec(3 * n_v);
  for (int i = 0; i < n_v; ++i)
    for (int c = 0; c < 3; ++c) d_blend_vec[3 * i + c] = d_blend(i, c);
  g.beta.noalias() += asset.shape_basis.transpose() * d_blend_vec;
  g.psi.noalias() += asset.expr_basis.transpose() * d_blend_vec;

  return g;
}

BodyModelAsset subdivide(const BodyModelAsset& asset) {
  asset.validate();
  const int n_v = asset.vertex_count();
  const int n_t = asset.face_count();

  // Midpoint index per undirected edge; reject non-manifold connectivity.
  std::map<std::pair<int, int>, int> edge_vertex;
  std::map<std::pair<int, int>, int> edge_uses;
  auto edge_key = [](int a, int b) { return std::make_pair(std::min(a, b), std::max(a, b)); };
  for (int f = 0; f < n_t; ++f)
    for (int c = 0; c < 3; ++c) {
      const auto key = edge_key(asset.faces(f, c), asset.faces(f, (c + 1) % 3));
      const int uses = ++edge_uses[key];
      DRAPE_REQUIRE(uses <= 2, "non-manifold edge (", key.first, ",", key.second,
                    ") shared by more than 2 faces");
    }
  int next = n_v;
  for (const auto& [key, uses] : edge_uses) edge_vertex[key] = next++;
  const int n_edges = static_cast<int>(edge_vertex.size());
  const int new_n_v = n_v + n_edges;

  BodyModelAsset out;
  out.rest_template.resize(new_n_v, 3);
  out.rest_template.topRows(n_v) = asset.rest_template;
  out.shape_basis.resize(3 * new_n_v, asset.shape_dim());
  out.shape_basis.topRows(3 * n_v) = asset.shape_basis;
  out.pose_basis.resize(3 * new_n_v, asset.pose_feature_dim());
  out.pose_basis.topRows(3 * n_v) = asset.pose_basis;
  out.expr_basis.resize(3 * new_n_v, asset.expr_dim());
  out.expr_basis.topRows(3 * n_v) = asset.expr_basis;
  out.skin_weights.resize(asset.joint_count(), new_n_v);
  out.skin_weights.leftCols(n_v) = asset.skin_weights;
  out.joint_regressor.resize(asset.joint_count(), new_n_v);
  out.joint_regressor.leftCols(n_v) = asset.joint_regressor;
  out.parents = asset.parents;
  out.region = asset.region;
  out.region.resize(static_cast<size_t>(new_n_v));

  for (const auto& [key, m] : edge_vertex) {
    const auto [a, b] = key;
    out.rest_template.row(m) = 0.5 * (asset.rest_template.row(a) + asset.rest_template.row(b));
    for (int c = 0; c < 3; ++c) {
      out.shape_basis.row(3 * m + c) =
          0.5 * (asset.shape_basis.row(3 * a + c) + asset.shape_basis.row(3 * b + c));
      out.pose_basis.row(3 * m + c) =
          0.5 * (asset.pose_basis.row(3 * a + c) + asset.pose_basis.row(3 * b + c));
      out.expr_basis.row(3 * m + c) =
          0.5 * (asset.expr_basis.row(3 * a + c) + asset.expr_basis.row(3 * b + c));
    }
    out.skin_weights.col(m) = 0.5 * (asset.skin_weights.col(a) + asset.skin_weights.col(b));
    out.joint_regressor.col(m) =
        0.5 * (asset.joint_regressor.col(a) + asset.joint_regressor.col(b));
    out.region[static_cast<size_t>(m)] = asset.region[static_cast<size_t>(std::min(a, b))];
  }

  // Re-normalize skinning columns and regressor rows.
  for (int i = 0; i < new_n_v; ++i) out.skin_weights.col(i) /= out.skin_weights.col(i).sum();
  for (int k = 0; k < asset.joint_count(); ++k) {
    const double sum = out.joint_regressor.row(k).sum();
    DRAPE_REQUIRE(std::abs(sum) > 1e-12, "joint regressor row ", k, " sums to 0");
    out.joint_regressor.row(k) /= sum;
  }

  out.faces.resize(4 * n_t, 3);
  for (int f = 0; f < n_t; ++f) {
    const int a = asset.faces(f, 0), b = asset.faces(f, 1), c = asset.faces(f, 2);
    const int mab = edge_vertex.at(edge_key(a, b));
    const int mbc = edge_vertex.at(edge_key(b, c));
    const int mca = edge_vertex.at(edge_key(c, a));
    out.faces.row(4 * f + 0) << a, mab, mca;
    out.faces.row(4 * f + 1) << mab, b, mbc;
    out.faces.row(4 * f + 2) << mca, mbc, c;
    out.faces.row(4 * f + 3) << mab, mbc, mca;
  }

  out.validate();
  return out;
}

void save_body_asset(const BodyModelAsset& asset, const std::string& path) {
  asset.validate();
  BinaryWriter w(path);
  w.magic("DRAPEBM1");
  w.u32(1);
  w.u64(static_cast<uint64_t>(asset.vertex_count()));
  w.u64(static_cast<uint64_t>(asset.face_count()));
  w.u64(static_cast<uint64_t>(asset.joint_count()));
  w.u64(static_cast<uint64_t>(asset.shape_dim()));
  w.u64(static_cast<uint64_t>(asset.expr_dim()));
  w.matrix(asset.rest_template);
  for (int f = 0; f < asset.face_count(); ++f)
    for (int c = 0; c < 3; ++c) w.u32(static_cast<uint32_t>(asset.faces(f, c)));
  w.matrix(asset.shape_basis);
  w.matrix(asset.pose_basis);
  w.matrix(asset.expr_basis);
  w.matrix(asset.skin_weights);
  w.matrix(asset.joint_regressor);
  for (int p : asset.parents) w.i32(p);
  for (Region r : asset.region) w.u8(static_cast<uint8_t>(r));
  w.close();
}

BodyModelAsset load_body_asset(const std::string& path) {
  BinaryReader r(path);
  r.expect_magic("DRAPEBM1");
  const uint32_t version = r.u32();
  DRAPE_REQUIRE(version == 1, "unsupported body asset version ", version, " in ", path);
  const auto n_v = static_cast<int>(r.u64());
  const auto n_t = static_cast<int>(r.u64());
  const auto n_k = static_cast<int>(r.u64());
  r.u64();  // shape dim, recovered from matrices
  r.u64();  // expr dim

  BodyModelAsset asset;
  asset.rest_template = r.matrix();
  asset.faces.resize(n_t, 3);
  for (int f = 0; f < n_t; ++f)
    for (int c = 0; c < 3; ++c) asset.faces(f, c) = static_cast<int>(r.u32());
  asset.shape_basis = r.matrix();
  asset.pose_basis = r.matrix();
  asset.expr_basis = r.matrix();
  asset.skin_weights = r.matrix();
  asset.joint_regressor = r.matrix();
  asset.parents.resize(static_cast<size_t>(n_k));
  for (int k = 0; k < n_k; ++k) asset.parents[static_cast<size_t>(k)] = r.i32();
  asset.region.resize(static_cast<size_t>(n_v));
  for (int i = 0; i < n_v; ++i) {
    const uint8_t v = r.u8();
    DRAPE_REQUIRE(v <= 2, "invalid region label ", static_cast<int>(v), " at vertex ", i);
    asset.region[static_cast<size_t>(i)] = static_cast<Region>(v);
  }
  DRAPE_REQUIRE(asset.vertex_count() == n_v && asset.joint_count() == n_k,
                "inconsistent dimensions in ", path);
  asset.validate();
  return asset;
}

}  // namespace drape
