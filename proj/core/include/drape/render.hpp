#pragma once

#include <optional>
#include <vector>

#include "drape/canonical.hpp"
#include "drape/common.hpp"
#include "drape/fields.hpp"
#include "drape/image.hpp"
#include "drape/rng.hpp"

namespace drape {

// Scaled-orthographic camera: image-plane ndc = scale * xy + translation.
struct Camera {
  double scale = 1.0;
  Vec2 translation = Vec2::Zero();
};

struct RenderConfig {
  double t_near = -0.6;
  double t_far = 0.6;
  int coarse_samples = 64;
  int fine_samples = 32;
  double soft_silhouette_px = 2.0;
  Vec3 background = Vec3::Zero();
  CanonicalConfig canonical;
};

// Ray through the center of pixel (u, v): origin on the z=0 plane, direction
// +z. Pixel centers sit at half-integer coordinates; the image maps to the
// [-1,1] ndc square before inverting (scale, translation).
struct PixelRay {
  Vec3 origin;
  Vec3 dir;  // always (0,0,1)
};
PixelRay generate_ray(double u, double v, const Camera& camera, int width, int height);

// Forward projection into pixel coordinates (the inverse of generate_ray).
Vec2 project_to_pixels(const Vec3& x, const Camera& camera, int width, int height);

struct RayHit {
  int face = -1;
  double t = 0.0;
  Vec3 bary = Vec3::Zero();  // weights of the face's three vertices
};

// Watertight ray/triangle test; accepts hits from either side.
std::optional<RayHit> intersect_triangle_watertight(const Vec3& o, const Vec3& d, const Vec3& v0,
                                                    const Vec3& v1, const Vec3& v2, double t_min,
                                                    double t_max);

// Binary AABB tree over triangles. Nearest hit wins; exact-distance ties go
// to the lower face index, matching an exhaustive scan.
class TriangleBvh {
 public:
  void build(const Points3& verts, const Faces& faces);
  std::optional<RayHit> intersect(const Vec3& o, const Vec3& d, double t_min, double t_max) const;
  bool empty() const { return nodes_.empty(); }

 private:
  struct Node {
    Vec3 lo, hi;
    int left = -1, right = -1;   // children, or
    int first = 0, count = 0;    // leaf triangle range
  };
  int build_node(std::vector<int>& order, int begin, int end);
  const Points3* verts_ = nullptr;
  const Faces* faces_ = nullptr;
  std::vector<Node> nodes_;
  std::vector<int> tris_;
};

// One uniform draw per bin over [t_near, t_eff]; when hit_t is given the far
// bound is the hit distance and the final sample is pinned to it exactly.
VecX stratified_samples(double t_near, double t_far, int n, UniformSource& u,
                        std::optional<double> hit_t = std::nullopt);

// Inverse-CDF draws proportional to per-interval weights (weights[i] covers
// [depths[i], depths[i+1]]). All-zero weights fall back to a uniform pdf.
VecX importance_resample(const VecX& depths, const VecX& weights, int n_fine, UniformSource& u);

VecX merge_sorted(const VecX& a, const VecX& b);

// Mesh-integrated alpha compositing. colors has one column per sample; the
// terminal sample takes terminal_color when present (mesh surface or
// background), otherwise the final sample's own field color.
struct CompositeResult {
  Vec3 color = Vec3::Zero();
  double tau = 1.0;
  VecX alpha;  // n_s - 1 entries
};
CompositeResult composite(const VecX& depths, const MatX& colors, const VecX& densities,
                          const std::optional<Vec3>& terminal_color);

// d_color is dL/d(pixel rgb); outputs are accumulated (+=). terminal_color
// must match the forward call.
void composite_backward(const VecX& depths, const MatX& colors, const VecX& densities,
                        const std::optional<Vec3>& terminal_color, const Vec3& d_color,
                        MatX& d_colors, VecX& d_densities, Vec3& d_terminal);

// Clothing opacity of one ray (the far/mesh term excluded).
double render_mask_ray(const VecX& depths, const VecX& densities);
void render_mask_backward(const VecX& depths, const VecX& densities, double d_mask,
                          VecX& d_densities);

// ---------------------------------------------------------------------------
// Rasterization by per-pixel ray casting (one intersection code path for the
// volume and mesh renderers).

struct RasterStructure {
  int width = 0, height = 0;
  std::vector<RayHit> hits;                          // per pixel, face < 0 = miss
  std::vector<std::pair<int, int>> silhouette_edges; // vertex index pairs
};

RasterStructure capture_raster_structure(const Points3& verts, const Faces& faces,
                                         const TriangleBvh& bvh, const Camera& camera, int width,
                                         int height, double t_near, double t_far);

struct RasterForward {
  Image color;       // 3-channel
  Image silhouette;  // soft coverage in (0,1)
  std::vector<int> nearest_edge;  // per pixel, -1 when no silhouette edges
  std::vector<double> distance_px;
};

RasterForward rasterize(const RasterStructure& structure, const Points3& verts,
                        const Faces& faces, const Points3& vertex_colors, const Camera& camera,
                        double soft_silhouette_px, const Vec3& background);

struct CameraGrad {
  double scale = 0.0;
  Vec2 translation = Vec2::Zero();
};

// Color gradients flow to vertex colors (exact, via frozen barycentrics);
// silhouette gradients flow to vertex positions and the camera.
void rasterize_backward(const RasterStructure& structure, const RasterForward& fwd,
                        const Points3& verts, const Faces& faces, const Camera& camera,
                        double soft_silhouette_px, const Image& d_color,
                        const Image& d_silhouette, Points3& d_verts, Points3& d_vertex_colors,
                        CameraGrad& d_camera);

// ---------------------------------------------------------------------------
// Volume rendering of rays against a posed scene.

// Everything rendering needs for one frame at one parameter state.
struct SceneContext {
  const BodyModelAsset* asset = nullptr;
  RenderConfig cfg;
  Camera camera;
  int width = 0, height = 0;
  CanonicalFrame frame;
  TriangleBvh bvh;                 // over frame.observed.verts
  Points3 vertex_colors;           // F_t evaluated on the template
  const ClothingField* coarse = nullptr;
  const ClothingField* fine = nullptr;
  const DeformationField* deformation = nullptr;  // null: zero displacement
};

// Frozen per-ray sampling structure: sample depths, neighbor lists and the
// mesh hit are captured once per iteration and treated as constants by the
// gradient pass (and by finite differences over it).
struct RaySampleStructure {
  int px = 0, py = 0;
  std::optional<RayHit> hit;
  VecX coarse_depths;
  VecX fine_depths;                // sorted union of coarse + importance draws
  std::vector<int> coarse_neighbors;  // k per sample, flattened
  std::vector<int> fine_neighbors;
};

RaySampleStructure capture_ray_structure(const SceneContext& scene, int px, int py,
                                         UniformSource& u);

// Forward record of one compositing pass (coarse or fine) along one ray.
struct RayPassForward {
  MatX positions;                       // 3 x n observation-space samples
  std::vector<CanonicalSample> canon;
  MatX xc;                              // canonical positions (pre-deformation)
  MatX field_input;                     // xc + displacement
  std::optional<DeformationField::Forward> def_ws;
  MatX displacement;
  std::optional<MlpClothingField::Forward> field_ws;  // trainable fields only
  MatX colors;
  VecX densities;
  Vec3 terminal_color = Vec3::Zero();
  bool terminal_is_mesh = false;
  CompositeResult comp;
  double mask = 0.0;
};

void render_ray_pass(const SceneContext& scene, const RaySampleStructure& ray, bool fine_pass,
                     RayPassForward& out);

// Gradient sinks for the ray backward pass; all accumulated with +=.
struct RayGradSinks {
  MlpGrads* d_field = nullptr;        // the pass's clothing net
  MlpGrads* d_deformation = nullptr;
  std::vector<Mat4>* d_observed_tf = nullptr;
  Points3* d_observed_verts = nullptr;
  Points3* d_pose_only_verts = nullptr;
  Points3* d_vertex_colors = nullptr;
  CameraGrad* d_camera = nullptr;
};

void render_ray_pass_backward(const SceneContext& scene, const RaySampleStructure& ray,
                              bool fine_pass, const RayPassForward& fwd, const Vec3& d_color,
                              double d_mask, RayGradSinks& sinks);

// Full-frame render: per pixel, coarse pass -> importance resampling -> fine
// pass -> mesh-integrated compositing. Deterministic given (seed, iteration).
struct RenderedImages {
  Image rgb;          // fine
  Image mask;         // fine clothing opacity
  Image rgb_coarse;
  Image mask_coarse;
};
RenderedImages render_image(const SceneContext& scene, uint64_t seed, uint64_t iteration);

Vec3 interpolate_vertex_color(const Points3& vertex_colors, const Faces& faces, const RayHit& hit);

}  // namespace drape
