#include <algorithm>
#include <cmath>
#include <map>

#include "drape/check.hpp"
#include "drape/render.hpp"

namespace drape {

Vec3 interpolate_vertex_color(const Points3& vertex_colors, const Faces& faces,
                              const RayHit& hit) {
  Vec3 c = Vec3::Zero();
  for (int i = 0; i < 3; ++i) c += hit.bary[i] * Vec3(vertex_colors.row(faces(hit.face, i)));
  return c;
}

RasterStructure capture_raster_structure(const Points3& verts, const Faces& faces,
                                         const TriangleBvh& bvh, const Camera& camera, int width,
                                         int height, double t_near, double t_far) {
  RasterStructure s;
  s.width = width;
  s.height = height;
  s.hits.resize(static_cast<size_t>(width) * height);
  for (int py = 0; py < height; ++py)
    for (int px = 0; px < width; ++px) {
      const PixelRay ray = generate_ray(px, py, camera, width, height);
      const auto hit = bvh.intersect(ray.origin, ray.dir, t_near, t_far);
      s.hits[static_cast<size_t>(py) * width + px] = hit.value_or(RayHit{});
    }

  // Silhouette candidates: boundary edges and edges whose adjacent faces have
  // opposite (or zero) projected orientation.
  std::map<std::pair<int, int>, std::vector<int>> edge_faces;
  for (int f = 0; f < faces.rows(); ++f)
    for (int c = 0; c < 3; ++c) {
      const int a = faces(f, c), b = faces(f, (c + 1) % 3);
      edge_faces[{std::min(a, b), std::max(a, b)}].push_back(f);
    }
  auto signed_area = [&](int f) {
    const Vec2 p0 = project_to_pixels(verts.row(faces(f, 0)), camera, width, height);
    const Vec2 p1 = project_to_pixels(verts.row(faces(f, 1)), camera, width, height);
    const Vec2 p2 = project_to_pixels(verts.row(faces(f, 2)), camera, width, height);
    return (p1.x() - p0.x()) * (p2.y() - p0.y()) - (p1.y() - p0.y()) * (p2.x() - p0.x());
  };
  for (const auto& [edge, fs] : edge_faces) {
    if (fs.size() == 1) {
      s.silhouette_edges.push_back(edge);
    } else {
      const double a0 = signed_area(fs[0]);
      const double a1 = signed_area(fs[1]);
      if (a0 * a1 <= 0.0) s.silhouette_edges.push_back(edge);
    }
  }
  return s;
}

namespace {

struct SegDist {
  double dist;
  double q;  // clamped parameter along the segment
};

SegDist point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  double q = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
  q = std::clamp(q, 0.0, 1.0);
  return {(p - (a + q * ab)).norm(), q};
}

}  // namespace

RasterForward rasterize(const RasterStructure& structure, const Points3& verts,
                        const Faces& faces, const Points3& vertex_colors, const Camera& camera,
                        double soft_silhouette_px, const Vec3& background) {
  const int w = structure.width, h = structure.height;
  RasterForward out;
  out.color = Image(w, h, 3);
  out.silhouette = Image(w, h, 1);
  out.nearest_edge.assign(static_cast<size_t>(w) * h, -1);
  out.distance_px.assign(static_cast<size_t>(w) * h, 0.0);

  std::vector<Vec2> projected(static_cast<size_t>(verts.rows()));
  for (int i = 0; i < verts.rows(); ++i)
    projected[static_cast<size_t>(i)] = project_to_pixels(verts.row(i), camera, w, h);

  // color pass (frozen hit map, frozen barycentrics)
  for (int py = 0; py < h; ++py)
    for (int px = 0; px < w; ++px) {
      const RayHit& hit = structure.hits[static_cast<size_t>(py) * w + px];
      out.color.set_rgb(px, py, hit.face >= 0
                                    ? interpolate_vertex_color(vertex_colors, faces, hit)
                                    : background);
    }

  // silhouette pass
  for (int py = 0; py < h; ++py)
    for (int px = 0; px < w; ++px) {
      const size_t at = static_cast<size_t>(py) * w + px;
      const bool inside = structure.hits[at].face >= 0;
      if (structure.silhouette_edges.empty()) {
        out.silhouette.at(px, py, 0) = inside ? 1.0 : 0.0;
        continue;
      }
      const Vec2 p(static_cast<double>(px), static_cast<double>(py));
      double best = std::numeric_limits<double>::infinity();
      int best_edge = -1;
      for (size_t e = 0; e < structure.silhouette_edges.size(); ++e) {
        const auto& [a, b] = structure.silhouette_edges[e];
        const SegDist sd = point_segment_distance(p, projected[static_cast<size_t>(a)],
                                                  projected[static_cast<size_t>(b)]);
        if (sd.dist < best) {
          best = sd.dist;
          best_edge = static_cast<int>(e);
        }
      }
      out.nearest_edge[at] = best_edge;
      out.distance_px[at] = best;
      const double sd_signed = inside ? -best : best;
      out.silhouette.at(px, py, 0) = 1.0 / (1.0 + std::exp(sd_signed / soft_silhouette_px));
    }
  return out;
}

void rasterize_backward(const RasterStructure& structure, const RasterForward& fwd,
                        const Points3& verts, const Faces& faces, const Camera& camera,
                        double soft_silhouette_px, const Image& d_color,
                        const Image& d_silhouette, Points3& d_verts, Points3& d_vertex_colors,
                        CameraGrad& d_camera) {
  const int w = structure.width, h = structure.height;
  std::vector<Vec2> projected(static_cast<size_t>(verts.rows()));
  for (int i = 0; i < verts.rows(); ++i)
    projected[static_cast<size_t>(i)] = project_to_pixels(verts.row(i), camera, w, h);

  auto chain_projection = [&](int vertex, const Vec2& d_px) {
    // px = ((s x + tx) + 1) W/2 - 0.5, py = (1 - (s y + ty)) H/2 - 0.5
    const double half_w = w / 2.0, half_h = h / 2.0;
    d_verts(vertex, 0) += d_px.x() * camera.scale * half_w;
    d_verts(vertex, 1) += -d_px.y() * camera.scale * half_h;
    d_camera.translation.x() += d_px.x() * half_w;
    d_camera.translation.y() += -d_px.y() * half_h;
    d_camera.scale += d_px.x() * verts(vertex, 0) * half_w - d_px.y() * verts(vertex, 1) * half_h;
  };

  for (int py = 0; py < h; ++py)
    for (int px = 0; px < w; ++px) {
      const size_t at = static_cast<size_t>(py) * w + px;
      const RayHit& hit = structure.hits[at];

      if (hit.face >= 0) {
        const Vec3 g(d_color.at(px, py, 0), d_color.at(px, py, 1), d_color.at(px, py, 2));
        for (int i = 0; i < 3; ++i)
          d_vertex_colors.row(faces(hit.face, i)) += hit.bary[i] * g.transpose();
      }

      const double g_sil = d_silhouette.at(px, py, 0);
      const int edge = fwd.nearest_edge[at];
      if (g_sil == 0.0 || edge < 0) continue;
      const double mag = fwd.distance_px[at];
      if (mag <= 1e-12) continue;  // on the boundary; measure-zero
      const bool inside = hit.face >= 0;
      const double sd_signed = inside ? -mag : mag;
      const double s = 1.0 / (1.0 + std::exp(sd_signed / soft_silhouette_px));
      const double d_sd = g_sil * (-s * (1.0 - s) / soft_silhouette_px);
      const double d_mag = inside ? -d_sd : d_sd;

      const auto& [a, b] = structure.silhouette_edges[static_cast<size_t>(edge)];
      const Vec2 p(static_cast<double>(px), static_cast<double>(py));
      const Vec2 pa = projected[static_cast<size_t>(a)];
      const Vec2 pb = projected[static_cast<size_t>(b)];
      const SegDist sd = point_segment_distance(p, pa, pb);
      const Vec2 closest = pa + sd.q * (pb - pa);
      const Vec2 dir = (p - closest) / sd.dist;
      // envelope theorem: hold q fixed at the minimizer
      chain_projection(a, -d_mag * (1.0 - sd.q) * dir);
      chain_projection(b, -d_mag * sd.q * dir);
    }
}

}  // namespace drape
