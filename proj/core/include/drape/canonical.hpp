#pragma once

#include <span>
#include <vector>

#include "drape/body_model.hpp"
#include "drape/common.hpp"

namespace drape {

struct CanonicalConfig {
  double sigma = 0.1;       // kernel width (meters * weight-distance)
  int knn = 6;              // |N(x)|
  VecX canonical_theta;     // star-like canonical pose

  void validate(const BodyModelAsset& asset) const;
  bool same_as(const CanonicalConfig& other) const;
};

// Star-like canonical pose for the bundled skeleton convention (joints 4/5 =
// shoulders, 6/7 = hips): arms abducted 45 degrees, legs 15, others at rest.
// Assets with a different layout configure canonical_theta explicitly.
VecX canonical_pose(const BodyModelAsset& asset);

// Uniform-grid k-nearest-neighbor index over posed vertices. Results are
// exactly those of a brute-force distance sort (ascending, ties by index).
class VertexKnn {
 public:
  void build(const Points3& points);
  // Returns up to k indices; clamps k to the vertex count (reported).
  void query(const Vec3& x, int k, std::vector<int>& out, bool* clamped = nullptr) const;

 private:
  int cell_of(const Vec3& p, int axis) const;
  const Points3* points_ = nullptr;
  Vec3 origin_;
  double cell_ = 1.0;
  int dims_[3] = {0, 0, 0};
  std::vector<std::vector<int>> cells_;
};

// Everything needed to move observation-space points of one frame into
// canonical space. Immutable once built per (frame, iteration).
struct CanonicalFrame {
  const BodyModelAsset* asset = nullptr;
  CanonicalConfig cfg;
  BodyPose observed;                  // full-parameter posed body
  BodyPose pose_only;                 // pose-only body for deformation conditioning
  std::vector<Mat4> observed_inv;     // affine inverses of observed vertex transforms
  std::vector<Mat4> canonical_tf;     // vertex transforms at the canonical pose
  Points3 canonical_verts;
  VertexKnn knn;                      // index over observed.verts
};

// Canonical-pose transforms depend only on the asset and canonical pose;
// callers cache the result across frames and iterations.
struct CanonicalBody {
  std::vector<Mat4> vertex_tf;
  Points3 verts;
};
CanonicalBody canonical_body(const BodyModelAsset& asset, const VecX& canonical_theta);

CanonicalFrame build_canonical_frame(const BodyModelAsset& asset, const BodyParams& params,
                                     const CanonicalConfig& cfg,
                                     const CanonicalBody* cached_canonical = nullptr);

// Blended inverse-skinning weights for one query point. neighbors[0] must be
// the nearest vertex. All weights are in (0,1]; if the sum underflows, the
// nearest neighbor alone gets weight 1 (reported via fallback flag).
struct CanonWeights {
  VecX omega;
  double total = 0.0;
  bool fallback = false;
};
CanonWeights canonicalization_weights(const Vec3& x, std::span<const int> neighbors,
                                      const Points3& posed_verts, const MatX& skin_weights,
                                      double sigma);

// Forward record of one canonicalized point; kept for the backward pass.
struct CanonicalSample {
  Vec3 x = Vec3::Zero();            // observation-space input
  Vec3 canonical = Vec3::Zero();    // x^c
  std::vector<int> neighbors;       // nb[0] = nn(x)
  CanonWeights weights;
  std::vector<Vec3> inv_applied;    // per-neighbor M_i(obs)^-1 x
};

CanonicalSample canonicalize_with_neighbors(const Vec3& x, std::span<const int> neighbors,
                                            const CanonicalFrame& frame);

// Convenience path that also runs the neighbor query.
CanonicalSample canonicalize_point(const Vec3& x, const CanonicalFrame& frame);

// Reverse pass. d_canonical is dL/dx^c. Gradients accumulate into the
// caller's per-vertex transform/position buffers; the returned vector is
// dL/dx (flows to the ray origin, hence the camera). Neighbor selection is
// non-differentiable by design.
Vec3 canonicalize_backward(const CanonicalSample& sample, const CanonicalFrame& frame,
                           const Vec3& d_canonical, std::vector<Mat4>& d_observed_tf,
                           Points3& d_observed_verts);

// Affine inverse assuming the homogeneous row (0,0,0,1).
Mat4 affine_inverse(const Mat4& m);

}  // namespace drape
