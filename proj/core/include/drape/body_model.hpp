#pragma once

#include <string>
#include <vector>

#include "drape/common.hpp"

namespace drape {

enum class Region : uint8_t { Body = 0, Face = 1, Hand = 2 };

// Parametric body model asset: rest-pose template, linear blendshape bases,
// skinning weights, joint regressor and kinematic tree. Immutable after load.
//
// Conventions (see docs in README / file format notes):
//  - pose vector theta has 3*n_joints+3 entries: [global orientation (3),
//    then one axis-angle triple per joint, joint 0 = pelvis/root].
//  - pose-corrective features are row-major flattened (R(theta_j) - I) for
//    the non-global joints j = 1..n_joints-1, i.e. 9*(n_joints-1) features.
//  - skinning weight columns (one per vertex) are non-negative and sum to 1.
struct BodyModelAsset {
  Points3 rest_template;           // n_v x 3 (meters)
  Faces faces;                     // n_t x 3
  MatX shape_basis;                // 3*n_v x |beta|, row = 3*vertex + coord
  MatX pose_basis;                 // 3*n_v x 9*(n_k-1)
  MatX expr_basis;                 // 3*n_v x |psi|
  MatX skin_weights;               // n_k x n_v, columns sum to 1
  MatX joint_regressor;            // n_k x n_v
  std::vector<int> parents;        // n_k entries, parents[0] == -1 (pelvis root)
  std::vector<Region> region;      // n_v labels

  int vertex_count() const { return static_cast<int>(rest_template.rows()); }
  int face_count() const { return static_cast<int>(faces.rows()); }
  int joint_count() const { return static_cast<int>(skin_weights.rows()); }
  int shape_dim() const { return static_cast<int>(shape_basis.cols()); }
  int expr_dim() const { return static_cast<int>(expr_basis.cols()); }
  int pose_dim() const { return 3 * joint_count() + 3; }
  int pose_feature_dim() const { return 9 * (joint_count() - 1); }

  std::vector<int> hand_vertices() const;

  // Throws ValidationError naming the offending field if any invariant fails.
  void validate() const;
};

struct BodyParams {
  VecX beta;        // |beta|
  VecX theta;       // 3*n_k+3 axis-angle, radians, incl. global
  VecX psi;         // |psi|
  Points3 offsets;  // n_v x 3 (meters)

  static BodyParams rest(const BodyModelAsset& asset);
  void validate_against(const BodyModelAsset& asset) const;
};

// Forward LBS record. Carries every intermediate the backward pass needs.
struct BodyPose {
  Points3 blend;                 // B(beta, theta, psi), n_v x 3
  Points3 rest_joints;           // J(beta), n_k x 3
  Mat3 global_rot;               // R(theta[0:3])
  std::vector<Mat3> joint_rot;   // per-joint own rotation R(theta_j)
  std::vector<Mat4> world;       // uncorrected chain transforms G~_k
  std::vector<Mat4> rel;         // rest-relative transforms (identity at rest)
  std::vector<Mat4> blended;     // per-vertex skinning blend sum_k w_ki rel_k
  std::vector<Mat4> vertex_tf;   // M_i = blended_i * translate(o_i + B_i)
  Points3 verts;                 // n_v x 3 posed positions
  Points3 posed_joints;          // n_k x 3
};

struct JointTransforms {
  std::vector<Mat4> world;  // chain composition G~_k
  std::vector<Mat4> rel;    // relative-to-rest, identity at rest pose
};

// B = B_S(beta) + B_P(theta) + B_E(psi).
Points3 blend_shapes(const BodyParams& params, const BodyModelAsset& asset);

// J = joint_regressor * (template + B_S(beta)).
Points3 regress_joints(const VecX& beta, const BodyModelAsset& asset);

// Axis-angle to rotation matrix (Rodrigues) and its partials d R / d a_i.
Mat3 rodrigues(const Vec3& axis_angle);
void rodrigues_jacobian(const Vec3& axis_angle, Mat3 dR[3]);

// Pose-corrective feature vector: row-major (R(theta_j) - I), j = 1..n_k-1.
VecX pose_feature(const VecX& theta, int n_joints);

// Kinematic-chain composition with rest-relative correction.
JointTransforms joint_transforms(const VecX& theta, const Points3& rest_joints,
                                 const std::vector<int>& parents);

// Per-vertex transforms M_i of the skinning equation.
std::vector<Mat4> vertex_transforms(const BodyParams& params, const BodyModelAsset& asset);

// Full posing; returns transforms for reuse by canonicalization.
BodyPose pose_body(const BodyParams& params, const BodyModelAsset& asset);

// One round of edge-midpoint triangle subdivision with per-vertex attribute
// interpolation. Rejects non-manifold input (an edge shared by >2 faces).
BodyModelAsset subdivide(const BodyModelAsset& asset);

// Gradients of a scalar loss w.r.t. body parameters.
struct BodyGrads {
  VecX beta, theta, psi;
  Points3 offsets;

  static BodyGrads zero(const BodyModelAsset& asset);
};

// Reverse-mode pass through pose_body. d_vertex_tf holds dL/dM_i per vertex
// (only the top 3 rows are read; the homogeneous row is structural).
// d_verts, when non-null, is dL/dV_i and is folded in via V_i = M_i t~_i.
BodyGrads lbs_backward(const BodyModelAsset& asset, const BodyParams& params,
                       const BodyPose& pose, const std::vector<Mat4>& d_vertex_tf,
                       const Points3* d_verts = nullptr);

// Versioned binary container I/O ("DRPBMA1" format).
void save_body_asset(const BodyModelAsset& asset, const std::string& path);
BodyModelAsset load_body_asset(const std::string& path);

}  // namespace drape
