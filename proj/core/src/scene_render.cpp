#include <cmath>

#include "drape/check.hpp"
#include "drape/render.hpp"

namespace drape {

namespace {

const MlpClothingField* as_trainable(const ClothingField* field) {
  return dynamic_cast<const MlpClothingField*>(field);
}

}  // namespace

RaySampleStructure capture_ray_structure(const SceneContext& scene, int px, int py,
                                         UniformSource& u) {
  RaySampleStructure ray;
  ray.px = px;
  ray.py = py;
  const PixelRay r = generate_ray(px, py, scene.camera, scene.width, scene.height);
  const auto hit = scene.bvh.intersect(r.origin, r.dir, scene.cfg.t_near, scene.cfg.t_far);
  if (hit) ray.hit = *hit;

  ray.coarse_depths =
      stratified_samples(scene.cfg.t_near, scene.cfg.t_far, scene.cfg.coarse_samples, u,
                         hit ? std::optional<double>(hit->t) : std::nullopt);

  const int k = scene.cfg.canonical.knn;
  std::vector<int> nb;
  auto gather_neighbors = [&](const VecX& depths, std::vector<int>& out) {
    out.clear();
    out.reserve(static_cast<size_t>(depths.size() - 1) * static_cast<size_t>(k));
    for (Eigen::Index i = 0; i + 1 < depths.size(); ++i) {
      const Vec3 x = r.origin + depths[i] * r.dir;
      scene.frame.knn.query(x, k, nb);
      out.insert(out.end(), nb.begin(), nb.end());
    }
  };
  gather_neighbors(ray.coarse_depths, ray.coarse_neighbors);

  if (scene.cfg.fine_samples > 0) {
    RayPassForward coarse;
    render_ray_pass(scene, ray, /*fine_pass=*/false, coarse);
    const VecX extra =
        importance_resample(ray.coarse_depths, coarse.comp.alpha, scene.cfg.fine_samples, u);
    ray.fine_depths = merge_sorted(ray.coarse_depths, extra);
  } else {
    ray.fine_depths = ray.coarse_depths;
  }
  gather_neighbors(ray.fine_depths, ray.fine_neighbors);
  return ray;
}

void render_ray_pass(const SceneContext& scene, const RaySampleStructure& ray, bool fine_pass,
                     RayPassForward& out) {
  const VecX& depths = fine_pass ? ray.fine_depths : ray.coarse_depths;
  const std::vector<int>& neighbors = fine_pass ? ray.fine_neighbors : ray.coarse_neighbors;
  const ClothingField* field = fine_pass ? scene.fine : scene.coarse;
  const int k = scene.cfg.canonical.knn;
  const Eigen::Index n = depths.size();
  const Eigen::Index m = n - 1;  // field samples; the terminal takes mesh/background color
  DRAPE_ASSERT(static_cast<Eigen::Index>(neighbors.size()) == m * k,
               "neighbor structure does not match sample count");

  const PixelRay r = generate_ray(ray.px, ray.py, scene.camera, scene.width, scene.height);
  out.positions.resize(3, m);
  for (Eigen::Index i = 0; i < m; ++i) out.positions.col(i) = r.origin + depths[i] * r.dir;

  out.canon.resize(static_cast<size_t>(m));
  out.xc.resize(3, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const std::span<const int> nb(neighbors.data() + i * k, static_cast<size_t>(k));
    out.canon[static_cast<size_t>(i)] =
        canonicalize_with_neighbors(out.positions.col(i), nb, scene.frame);
    out.xc.col(i) = out.canon[static_cast<size_t>(i)].canonical;
  }

  if (scene.deformation) {
    MatX vp(3, m);
    for (Eigen::Index i = 0; i < m; ++i)
      vp.col(i) = scene.frame.pose_only.verts.row(neighbors[static_cast<size_t>(i * k)]);
    out.def_ws.emplace();
    out.displacement = scene.deformation->evaluate(out.xc, vp, &*out.def_ws);
    out.field_input = out.xc + out.displacement;
  } else {
    out.field_input = out.xc;
  }

  MatX colors;
  VecX densities;
  if (const MlpClothingField* mlp = as_trainable(field)) {
    out.field_ws.emplace();
    mlp->evaluate_diff(out.field_input, *out.field_ws, colors, densities);
  } else {
    field->evaluate(out.field_input, colors, densities);
  }
  out.colors.resize(3, n);
  out.colors.leftCols(m) = colors;
  out.colors.col(m).setZero();
  out.densities = VecX::Zero(n);
  out.densities.head(m) = densities;

  if (ray.hit) {
    out.terminal_color =
        interpolate_vertex_color(scene.vertex_colors, scene.asset->faces, *ray.hit);
    out.terminal_is_mesh = true;
  } else {
    out.terminal_color = scene.cfg.background;
    out.terminal_is_mesh = false;
  }
  out.comp = composite(depths, out.colors, out.densities, out.terminal_color);
  out.mask = render_mask_ray(depths, out.densities);
}

void render_ray_pass_backward(const SceneContext& scene, const RaySampleStructure& ray,
                              bool fine_pass, const RayPassForward& fwd, const Vec3& d_color,
                              double d_mask, RayGradSinks& sinks) {
  const VecX& depths = fine_pass ? ray.fine_depths : ray.coarse_depths;
  const std::vector<int>& neighbors = fine_pass ? ray.fine_neighbors : ray.coarse_neighbors;
  const int k = scene.cfg.canonical.knn;
  const Eigen::Index n = depths.size();
  const Eigen::Index m = n - 1;

  MatX d_colors = MatX::Zero(3, n);
  VecX d_densities = VecX::Zero(n);
  Vec3 d_terminal = Vec3::Zero();
  composite_backward(depths, fwd.colors, fwd.densities, fwd.terminal_color, d_color, d_colors,
                     d_densities, d_terminal);
  if (d_mask != 0.0) render_mask_backward(depths, fwd.densities, d_mask, d_densities);

  if (fwd.terminal_is_mesh && sinks.d_vertex_colors) {
    for (int i = 0; i < 3; ++i)
      sinks.d_vertex_colors->row(scene.asset->faces(ray.hit->face, i)) +=
          ray.hit->bary[i] * d_terminal.transpose();
  }

  // Field backward: colors/densities of the first m samples.
  DRAPE_ASSERT(fwd.field_ws.has_value(), "ray backward requires a trainable clothing field");
  const MlpClothingField* mlp = as_trainable(fine_pass ? scene.fine : scene.coarse);
  DRAPE_ASSERT(mlp != nullptr, "trainable field vanished between forward and backward");
  DRAPE_ASSERT(sinks.d_field, "missing field gradient sink");
  MatX d_input =
      mlp->backward(*fwd.field_ws, d_colors.leftCols(m), d_densities.head(m), *sinks.d_field);

  // Deformation: field input = xc + F_m(xc, vp).
  MatX d_xc = d_input;
  if (scene.deformation) {
    DRAPE_ASSERT(sinks.d_deformation, "missing deformation gradient sink");
    MatX d_vp;
    d_xc += scene.deformation->backward(*fwd.def_ws, d_input, d_vp, *sinks.d_deformation);
    if (sinks.d_pose_only_verts) {
      for (Eigen::Index i = 0; i < m; ++i)
        sinks.d_pose_only_verts->row(neighbors[static_cast<size_t>(i * k)]) +=
            d_vp.col(i).transpose();
    }
  }

  // Canonicalization and the ray origin (camera).
  Vec3 d_origin = Vec3::Zero();
  for (Eigen::Index i = 0; i < m; ++i) {
    const Vec3 dx = canonicalize_backward(fwd.canon[static_cast<size_t>(i)], scene.frame,
                                          d_xc.col(i), *sinks.d_observed_tf,
                                          *sinks.d_observed_verts);
    d_origin += dx;
  }
  if (sinks.d_camera) {
    const PixelRay r = generate_ray(ray.px, ray.py, scene.camera, scene.width, scene.height);
    // o = ((ndc - t) / s, 0): d t = -g/s, d s = -o g / s
    sinks.d_camera->translation.x() += -d_origin.x() / scene.camera.scale;
    sinks.d_camera->translation.y() += -d_origin.y() / scene.camera.scale;
    sinks.d_camera->scale += (-r.origin.x() * d_origin.x() - r.origin.y() * d_origin.y()) /
                             scene.camera.scale;
  }
}

RenderedImages render_image(const SceneContext& scene, uint64_t seed, uint64_t iteration) {
  RenderedImages out;
  out.rgb = Image(scene.width, scene.height, 3);
  out.mask = Image(scene.width, scene.height, 1);
  out.rgb_coarse = Image(scene.width, scene.height, 3);
  out.mask_coarse = Image(scene.width, scene.height, 1);
  for (int py = 0; py < scene.height; ++py)
    for (int px = 0; px < scene.width; ++px) {
      PrngUniformSource u(Prng::keyed(seed, 0x52415953ull, iteration,
                                      static_cast<uint64_t>(py) * scene.width + px));
      const RaySampleStructure ray = capture_ray_structure(scene, px, py, u);
      RayPassForward coarse, fine;
      render_ray_pass(scene, ray, /*fine_pass=*/false, coarse);
      render_ray_pass(scene, ray, /*fine_pass=*/true, fine);
      out.rgb.set_rgb(px, py, fine.comp.color);
      out.mask.at(px, py, 0) = fine.mask;
      out.rgb_coarse.set_rgb(px, py, coarse.comp.color);
      out.mask_coarse.at(px, py, 0) = coarse.mask;
    }
  return out;
}

}  // namespace drape
