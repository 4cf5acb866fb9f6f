#include "drape/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "drape/check.hpp"

namespace drape {

PixelRay generate_ray(double u, double v, const Camera& camera, int width, int height) {
  DRAPE_REQUIRE(camera.scale > 0.0, "camera scale must be > 0");
  const double x_ndc = 2.0 * (u + 0.5) / width - 1.0;
  const double y_ndc = 1.0 - 2.0 * (v + 0.5) / height;
  PixelRay ray;
  ray.origin = Vec3((x_ndc - camera.translation.x()) / camera.scale,
                    (y_ndc - camera.translation.y()) / camera.scale, 0.0);
  ray.dir = Vec3(0.0, 0.0, 1.0);
  return ray;
}

Vec2 project_to_pixels(const Vec3& x, const Camera& camera, int width, int height) {
  const double x_ndc = camera.scale * x.x() + camera.translation.x();
  const double y_ndc = camera.scale * x.y() + camera.translation.y();
  return Vec2((x_ndc + 1.0) * width / 2.0 - 0.5, (1.0 - y_ndc) * height / 2.0 - 0.5);
}

std::optional<RayHit> intersect_triangle_watertight(const Vec3& o, const Vec3& d, const Vec3& v0,
                                                    const Vec3& v1, const Vec3& v2, double t_min,
                                                    double t_max) {
  // Woop/Benthin/Wald watertight test: shear the triangle into ray space.
  int kz = 0;
  if (std::abs(d[1]) > std::abs(d[kz])) kz = 1;
  if (std::abs(d[2]) > std::abs(d[kz])) kz = 2;
  int kx = (kz + 1) % 3;
  int ky = (kx + 1) % 3;
  if (d[kz] < 0.0) std::swap(kx, ky);

  const double sx = d[kx] / d[kz];
  const double sy = d[ky] / d[kz];
  const double sz = 1.0 / d[kz];

  const Vec3 a = v0 - o, b = v1 - o, c = v2 - o;
  const double ax = a[kx] - sx * a[kz], ay = a[ky] - sy * a[kz];
  const double bx = b[kx] - sx * b[kz], by = b[ky] - sy * b[kz];
  const double cx = c[kx] - sx * c[kz], cy = c[ky] - sy * c[kz];

  const double u = cx * by - cy * bx;
  const double v = ax * cy - ay * cx;
  const double w = bx * ay - by * ax;
  if ((u < 0.0 || v < 0.0 || w < 0.0) && (u > 0.0 || v > 0.0 || w > 0.0)) return std::nullopt;

  const double det = u + v + w;
  if (det == 0.0) return std::nullopt;

  const double az = sz * a[kz], bz = sz * b[kz], cz = sz * c[kz];
  const double t = (u * az + v * bz + w * cz) / det;
  if (!(t > t_min && t < t_max)) return std::nullopt;

  RayHit hit;
  hit.t = t;
  hit.bary = Vec3(u / det, v / det, w / det);
  return hit;
}

void TriangleBvh::build(const Points3& verts, const Faces& faces) {
  verts_ = &verts;
  faces_ = &faces;
  nodes_.clear();
  tris_.clear();
  const int n = static_cast<int>(faces.rows());
  if (n == 0) return;
  std::vector<int> order(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  nodes_.reserve(static_cast<size_t>(2 * n));
  build_node(order, 0, n);
}

int TriangleBvh::build_node(std::vector<int>& order, int begin, int end) {
  Node node;
  node.lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  node.hi = -node.lo;
  Vec3 clo = node.lo, chi = node.hi;
  for (int i = begin; i < end; ++i) {
    const int f = order[static_cast<size_t>(i)];
    Vec3 centroid = Vec3::Zero();
    for (int c = 0; c < 3; ++c) {
      const Vec3 p = verts_->row((*faces_)(f, c));
      node.lo = node.lo.cwiseMin(p);
      node.hi = node.hi.cwiseMax(p);
      centroid += p / 3.0;
    }
    clo = clo.cwiseMin(centroid);
    chi = chi.cwiseMax(centroid);
  }
  const int index = static_cast<int>(nodes_.size());
  nodes_.push_back(node);

  const int count = end - begin;
  if (count <= 4) {
    nodes_[static_cast<size_t>(index)].first = static_cast<int>(tris_.size());
    nodes_[static_cast<size_t>(index)].count = count;
    for (int i = begin; i < end; ++i) tris_.push_back(order[static_cast<size_t>(i)]);
    return index;
  }

  int axis = 0;
  const Vec3 extent = chi - clo;
  if (extent[1] > extent[axis]) axis = 1;
  if (extent[2] > extent[axis]) axis = 2;
  const int mid = begin + count / 2;
  std::nth_element(order.begin() + begin, order.begin() + mid, order.begin() + end,
                   [&](int fa, int fb) {
                     double ca = 0.0, cb = 0.0;
                     for (int c = 0; c < 3; ++c) {
                       ca += (*verts_)((*faces_)(fa, c), axis);
                       cb += (*verts_)((*faces_)(fb, c), axis);
                     }
                     return ca < cb || (ca == cb && fa < fb);
                   });
  const int left = build_node(order, begin, mid);
  const int right = build_node(order, mid, end);
  nodes_[static_cast<size_t>(index)].left = left;
  nodes_[static_cast<size_t>(index)].right = right;
  return index;
}

namespace {

// Entry distance of a ray into a box, or +inf when missed. Handles the
// axis-parallel directions our orthographic rays always have.
double box_entry(const Vec3& lo, const Vec3& hi, const Vec3& o, const Vec3& d, double t_min,
                 double t_max) {
  double lo_t = t_min, hi_t = t_max;
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < lo[a] || o[a] > hi[a]) return std::numeric_limits<double>::infinity();
      continue;
    }
    double t0 = (lo[a] - o[a]) / d[a];
    double t1 = (hi[a] - o[a]) / d[a];
    if (t0 > t1) std::swap(t0, t1);
    lo_t = std::max(lo_t, t0);
    hi_t = std::min(hi_t, t1);
    if (lo_t > hi_t) return std::numeric_limits<double>::infinity();
  }
  return lo_t;
}

}  // namespace

std::optional<RayHit> TriangleBvh::intersect(const Vec3& o, const Vec3& d, double t_min,
                                             double t_max) const {
  if (nodes_.empty()) return std::nullopt;
  RayHit best;
  best.t = t_max;
  bool found = false;

  int stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[static_cast<size_t>(stack[--top])];
    // keep nodes at exactly the best distance: ties resolve by face index
    if (box_entry(node.lo, node.hi, o, d, t_min, best.t) > best.t) continue;
    if (node.count > 0) {
      for (int i = 0; i < node.count; ++i) {
        const int f = tris_[static_cast<size_t>(node.first + i)];
        const auto hit = intersect_triangle_watertight(
            o, d, verts_->row((*faces_)(f, 0)), verts_->row((*faces_)(f, 1)),
            verts_->row((*faces_)(f, 2)), t_min, t_max);
        if (!hit) continue;
        if (hit->t < best.t || (hit->t == best.t && (!found || f < best.face))) {
          best = *hit;
          best.face = f;
          found = true;
        }
      }
    } else {
      DRAPE_ASSERT(top + 2 <= 128, "BVH traversal stack overflow");
      const double tl = box_entry(nodes_[static_cast<size_t>(node.left)].lo,
                                  nodes_[static_cast<size_t>(node.left)].hi, o, d, t_min, best.t);
      const double tr = box_entry(nodes_[static_cast<size_t>(node.right)].lo,
                                  nodes_[static_cast<size_t>(node.right)].hi, o, d, t_min, best.t);
      // near child on top of the stack
      if (tl <= tr) {
        if (tr <= best.t) stack[top++] = node.right;
        if (tl <= best.t) stack[top++] = node.left;
      } else {
        if (tl <= best.t) stack[top++] = node.left;
        if (tr <= best.t) stack[top++] = node.right;
      }
    }
  }
  if (!found) return std::nullopt;
  return best;
}

VecX stratified_samples(double t_near, double t_far, int n, UniformSource& u,
                        std::optional<double> hit_t) {
  DRAPE_REQUIRE(n >= 2, "stratified sampling needs at least 2 bins, got ", n);
  const double far = hit_t.value_or(t_far);
  DRAPE_REQUIRE(far > t_near, "empty sampling interval [", t_near, ", ", far, "]");
  const double step = (far - t_near) / n;
  VecX depths(n);
  for (int i = 0; i < n; ++i) depths[i] = t_near + (i + u.draw()) * step;
  if (hit_t) depths[n - 1] = *hit_t;  // terminal sample sits on the surface
  return depths;
}

VecX importance_resample(const VecX& depths, const VecX& weights, int n_fine, UniformSource& u) {
  DRAPE_REQUIRE(depths.size() >= 2, "importance resampling needs at least 2 depths");
  DRAPE_REQUIRE(weights.size() == depths.size() - 1,
                "importance weights must cover the depth intervals: got ", weights.size(),
                " for ", depths.size(), " depths");
  VecX out(n_fine);
  if (n_fine == 0) return out;
  const double total = weights.sum();
  if (!(total > 0.0)) {
    for (int i = 0; i < n_fine; ++i)
      out[i] = depths[0] + u.draw() * (depths[depths.size() - 1] - depths[0]);
  } else {
    VecX cdf(weights.size() + 1);
    cdf[0] = 0.0;
    for (Eigen::Index i = 0; i < weights.size(); ++i) {
      DRAPE_ASSERT(weights[i] >= 0.0, "negative importance weight");
      cdf[i + 1] = cdf[i] + weights[i];
    }
    for (int i = 0; i < n_fine; ++i) {
      const double r = u.draw() * total;
      // first interval whose cumulative mass exceeds r
      const auto it = std::upper_bound(cdf.begin() + 1, cdf.end(), r);
      Eigen::Index idx = std::min<Eigen::Index>(it - (cdf.begin() + 1), weights.size() - 1);
      const double frac = weights[idx] > 0.0 ? (r - cdf[idx]) / weights[idx] : 0.0;
      out[i] = depths[idx] + frac * (depths[idx + 1] - depths[idx]);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

VecX merge_sorted(const VecX& a, const VecX& b) {
  VecX out(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), out.begin());
  return out;
}

CompositeResult composite(const VecX& depths, const MatX& colors, const VecX& densities,
                          const std::optional<Vec3>& terminal_color) {
  const Eigen::Index n = depths.size();
  DRAPE_REQUIRE(n >= 2, "compositing needs at least 2 samples");
  DRAPE_ASSERT(colors.cols() == n && densities.size() == n, "sample arrays must align");

  CompositeResult res;
  res.alpha.resize(n - 1);
  Vec3 acc = Vec3::Zero();
  double trans = 1.0;
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    DRAPE_ASSERT(densities[i] >= 0.0, "negative density reached the compositor at sample ", i);
    const double delta = depths[i + 1] - depths[i];
    const double e = std::exp(-densities[i] * delta);
    const double alpha = trans * (1.0 - e);
    res.alpha[i] = alpha;
    acc += alpha * Vec3(colors.col(i));
    trans *= e;
  }
  res.tau = 1.0 - res.alpha.sum();
  const Vec3 terminal = terminal_color ? *terminal_color : Vec3(colors.col(n - 1));
  res.color = acc + res.tau * terminal;
  return res;
}

void composite_backward(const VecX& depths, const MatX& colors, const VecX& densities,
                        const std::optional<Vec3>& terminal_color, const Vec3& d_color,
                        MatX& d_colors, VecX& d_densities, Vec3& d_terminal) {
  const Eigen::Index n = depths.size();
  const Eigen::Index m = n - 1;

  VecX e(m), gamma(m), alpha(m);
  double trans = 1.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double delta = depths[i + 1] - depths[i];
    e[i] = std::exp(-densities[i] * delta);
    gamma[i] = trans;
    alpha[i] = trans * (1.0 - e[i]);
    trans *= e[i];
  }
  const double tau = 1.0 - alpha.sum();
  const Vec3 terminal = terminal_color ? *terminal_color : Vec3(colors.col(n - 1));

  for (Eigen::Index i = 0; i < m; ++i) d_colors.col(i) += alpha[i] * d_color;
  if (terminal_color)
    d_terminal += tau * d_color;
  else
    d_colors.col(n - 1) += tau * d_color;

  // dL/dsigma_k = delta_k [ e_k gamma_k g.(c_k - c_t) + A_k g.c_t - S_k ]
  // with suffix sums S_k = sum_{i>k} alpha_i g.c_i and A_k = sum_{i>k} alpha_i.
  const double g_ct = d_color.dot(terminal);
  double suffix_gc = 0.0;
  double suffix_a = 0.0;
  for (Eigen::Index k = m - 1; k >= 0; --k) {
    const double delta = depths[k + 1] - depths[k];
    const double g_ck = d_color.dot(colors.col(k));
    d_densities[k] += delta * (e[k] * gamma[k] * (g_ck - g_ct) + suffix_a * g_ct - suffix_gc);
    suffix_gc += alpha[k] * g_ck;
    suffix_a += alpha[k];
  }
}

double render_mask_ray(const VecX& depths, const VecX& densities) {
  const Eigen::Index n = depths.size();
  double acc = 0.0;
  double trans = 1.0;
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    const double delta = depths[i + 1] - depths[i];
    const double e = std::exp(-densities[i] * delta);
    acc += trans * (1.0 - e);
    trans *= e;
  }
  return acc;
}

void render_mask_backward(const VecX& depths, const VecX& densities, double d_mask,
                          VecX& d_densities) {
  const Eigen::Index n = depths.size();
  const Eigen::Index m = n - 1;
  VecX e(m), gamma(m), alpha(m);
  double trans = 1.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double delta = depths[i + 1] - depths[i];
    e[i] = std::exp(-densities[i] * delta);
    gamma[i] = trans;
    alpha[i] = trans * (1.0 - e[i]);
    trans *= e[i];
  }
  double suffix_a = 0.0;
  for (Eigen::Index k = m - 1; k >= 0; --k) {
    const double delta = depths[k + 1] - depths[k];
    d_densities[k] += d_mask * delta * (e[k] * gamma[k] - suffix_a);
    suffix_a += alpha[k];
  }
}

}  // namespace drape
