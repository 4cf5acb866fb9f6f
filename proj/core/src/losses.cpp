#include "drape/losses.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "drape/check.hpp"

namespace drape {

void LossWeights::validate() const {
  const double all[] = {vol,        mrf,      clothing,   silhouette,
                        bodymask,   skin,     inside,     skininside,
                        edge,       offset,   huber_delta,
                        offset_region_ratio.x(), offset_region_ratio.y(),
                        offset_region_ratio.z()};
  for (double v : all) DRAPE_REQUIRE(v >= 0.0, "loss weights must be non-negative, got ", v);
}

int FrameObservation::validate_and_clip() {
  DRAPE_REQUIRE(image.channels == 3, "frame image must be rgb");
  DRAPE_REQUIRE(mask_clothed.same_shape(mask_clothing) && mask_clothed.same_shape(mask_body),
                "mask shapes disagree");
  DRAPE_REQUIRE(mask_clothed.width == image.width && mask_clothed.height == image.height,
                "mask resolution does not match the image");
  int clipped = 0;
  for (size_t i = 0; i < mask_clothed.data.size(); ++i) {
    for (Image* m : {&mask_clothed, &mask_clothing, &mask_body}) {
      double& v = m->data[i];
      if (v != 0.0 && v != 1.0) {
        v = v >= 0.5 ? 1.0 : 0.0;
        ++clipped;
      }
    }
    if (mask_clothing.data[i] > mask_clothed.data[i]) {
      mask_clothing.data[i] = mask_clothed.data[i];
      ++clipped;
    }
    if (mask_body.data[i] > mask_clothed.data[i]) {
      mask_body.data[i] = mask_clothed.data[i];
      ++clipped;
    }
  }
  return clipped;
}

double huber(double x, double delta) {
  const double a = std::abs(x);
  return a <= delta ? 0.5 * x * x : delta * (a - 0.5 * delta);
}

double huber_grad(double x, double delta) {
  if (x > delta) return delta;
  if (x < -delta) return -delta;
  return x;
}

double huber_mean(const VecX& residuals, double delta) {
  if (residuals.size() == 0) return 0.0;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < residuals.size(); ++i) acc += huber(residuals[i], delta);
  return acc / static_cast<double>(residuals.size());
}

VecX huber_mean_backward(const VecX& residuals, double delta, double d_out) {
  VecX g(residuals.size());
  const double scale = d_out / static_cast<double>(residuals.size());
  for (Eigen::Index i = 0; i < residuals.size(); ++i)
    g[i] = scale * huber_grad(residuals[i], delta);
  return g;
}

double l1_mean(const VecX& a, const VecX& b) {
  DRAPE_ASSERT(a.size() == b.size(), "l1 operands must align");
  if (a.size() == 0) return 0.0;
  return (a - b).cwiseAbs().sum() / static_cast<double>(a.size());
}

VecX l1_mean_backward(const VecX& a, const VecX& b, double d_out) {
  VecX g(a.size());
  const double scale = d_out / static_cast<double>(a.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double r = a[i] - b[i];
    g[i] = r > 0.0 ? scale : (r < 0.0 ? -scale : 0.0);
  }
  return g;
}

namespace {

VecX image_residual(const Image& a, const Image& b) {
  DRAPE_REQUIRE(a.same_shape(b), "image shapes disagree");
  VecX r(static_cast<Eigen::Index>(a.data.size()));
  for (size_t i = 0; i < a.data.size(); ++i)
    r[static_cast<Eigen::Index>(i)] = a.data[i] - b.data[i];
  return r;
}

}  // namespace

double recon_loss(const Image& rendered, const Image& target, const LossWeights& w,
                  const PerceptualHook& hook) {
  double loss = w.vol * huber_mean(image_residual(rendered, target), w.huber_delta);
  if (w.mrf > 0.0 && hook) loss += w.mrf * hook(rendered, target);
  return loss;
}

double clothing_mask_loss(const Image& rendered_mask, const Image& clothing_mask,
                          const LossWeights& w) {
  DRAPE_REQUIRE(rendered_mask.same_shape(clothing_mask), "mask shapes disagree");
  VecX a(static_cast<Eigen::Index>(rendered_mask.data.size()));
  VecX b(a.size());
  for (size_t i = 0; i < rendered_mask.data.size(); ++i) {
    a[static_cast<Eigen::Index>(i)] = rendered_mask.data[i];
    b[static_cast<Eigen::Index>(i)] = clothing_mask.data[i];
  }
  return w.clothing * l1_mean(a, b);
}

BodyLossTerms body_losses(const Image& raster_rgb, const Image& raster_silhouette,
                          const FrameObservation& obs, const Vec3& hand_color,
                          bool has_hand_color, const LossWeights& w) {
  const size_t np = raster_silhouette.data.size();
  DRAPE_REQUIRE(np == obs.mask_clothed.data.size(), "silhouette/mask resolution mismatch");
  BodyLossTerms terms;
  const double delta = w.huber_delta;

  double sil = 0.0, bodymask = 0.0, inside = 0.0;
  for (size_t i = 0; i < np; ++i) {
    const double rs = raster_silhouette.data[i];
    sil += huber(rs - obs.mask_clothed.data[i], delta);
    bodymask += huber(obs.mask_body.data[i] * (rs - 1.0), delta);
    inside += huber(std::max(rs - obs.mask_clothing.data[i], 0.0), delta);
  }
  terms.silhouette = w.silhouette * sil / static_cast<double>(np);
  terms.bodymask = w.bodymask * bodymask / static_cast<double>(np);
  terms.inside = w.inside * inside / static_cast<double>(np);

  double skin = 0.0, skininside = 0.0;
  for (size_t i = 0; i < np; ++i) {
    for (int c = 0; c < 3; ++c) {
      const double rgb = raster_rgb.data[i * 3 + c];
      skin += huber(obs.mask_body.data[i] * (rgb - obs.image.data[i * 3 + c]), delta);
      if (has_hand_color)
        skininside += huber(obs.mask_clothing.data[i] * (rgb - hand_color[c]), delta);
    }
  }
  terms.skin = w.skin * skin / static_cast<double>(np * 3);
  if (has_hand_color)
    terms.skininside = w.skininside * skininside / static_cast<double>(np * 3);
  else
    terms.skininside_skipped = true;
  return terms;
}

void body_losses_backward(const Image& raster_rgb, const Image& raster_silhouette,
                          const FrameObservation& obs, const Vec3& hand_color,
                          bool has_hand_color, const LossWeights& w, Image& d_rgb,
                          Image& d_silhouette) {
  const size_t np = raster_silhouette.data.size();
  const double delta = w.huber_delta;
  const double sil_scale = w.silhouette / static_cast<double>(np);
  const double bodymask_scale = w.bodymask / static_cast<double>(np);
  const double inside_scale = w.inside / static_cast<double>(np);
  const double skin_scale = w.skin / static_cast<double>(np * 3);
  const double skininside_scale = w.skininside / static_cast<double>(np * 3);

  for (size_t i = 0; i < np; ++i) {
    const double rs = raster_silhouette.data[i];
    double g = sil_scale * huber_grad(rs - obs.mask_clothed.data[i], delta);
    const double sb = obs.mask_body.data[i];
    g += bodymask_scale * huber_grad(sb * (rs - 1.0), delta) * sb;
    const double over = rs - obs.mask_clothing.data[i];
    if (over > 0.0) g += inside_scale * huber_grad(over, delta);
    d_silhouette.data[i] += g;

    for (int c = 0; c < 3; ++c) {
      const double rgb = raster_rgb.data[i * 3 + c];
      double gc = skin_scale * huber_grad(sb * (rgb - obs.image.data[i * 3 + c]), delta) * sb;
      if (has_hand_color) {
        const double sc = obs.mask_clothing.data[i];
        gc += skininside_scale * huber_grad(sc * (rgb - hand_color[c]), delta) * sc;
      }
      d_rgb.data[i * 3 + c] += gc;
    }
  }
}

std::vector<std::pair<int, int>> mesh_edges(const Faces& faces) {
  std::map<std::pair<int, int>, bool> seen;
  for (int f = 0; f < faces.rows(); ++f)
    for (int c = 0; c < 3; ++c) {
      const int a = faces(f, c), b = faces(f, (c + 1) % 3);
      seen[{std::min(a, b), std::max(a, b)}] = true;
    }
  std::vector<std::pair<int, int>> edges;
  edges.reserve(seen.size());
  for (const auto& [e, _] : seen) edges.push_back(e);
  return edges;
}

RegularizerTerms regularizers(const Points3& verts_with_offsets,
                              const Points3& verts_without_offsets,
                              const std::vector<std::pair<int, int>>& edges, const Points3& offsets,
                              const std::vector<Region>& region, const LossWeights& w) {
  RegularizerTerms terms;
  if (!edges.empty()) {
    double acc = 0.0;
    for (const auto& [a, b] : edges) {
      const double with_len =
          (verts_with_offsets.row(a) - verts_with_offsets.row(b)).norm();
      const double base_len =
          (verts_without_offsets.row(a) - verts_without_offsets.row(b)).norm();
      const double r = (with_len - base_len) / base_len;
      acc += r * r;
    }
    terms.edge = w.edge * acc / static_cast<double>(edges.size());
  }

  double off = 0.0;
  for (int i = 0; i < offsets.rows(); ++i) {
    const double rw = w.offset_region_ratio[static_cast<int>(region[static_cast<size_t>(i)])];
    off += rw * offsets.row(i).squaredNorm();
  }
  terms.offset = w.offset * off;
  return terms;
}

void regularizers_backward(const Points3& verts_with_offsets,
                           const Points3& verts_without_offsets,
                           const std::vector<std::pair<int, int>>& edges, const Points3& offsets,
                           const std::vector<Region>& region, const LossWeights& w,
                           Points3& d_verts_with, Points3& d_verts_without, Points3& d_offsets) {
  if (!edges.empty()) {
    const double scale = w.edge / static_cast<double>(edges.size());
    for (const auto& [a, b] : edges) {
      const Vec3 ew = verts_with_offsets.row(a) - verts_with_offsets.row(b);
      const Vec3 eb = verts_without_offsets.row(a) - verts_without_offsets.row(b);
      const double lw = ew.norm(), lb = eb.norm();
      const double r = (lw - lb) / lb;
      const double d_r = scale * 2.0 * r;
      const Vec3 d_ew = (d_r / lb) * (ew / lw);
      const Vec3 d_eb = d_r * (-lw / (lb * lb)) * (eb / lb);
      d_verts_with.row(a) += d_ew.transpose();
      d_verts_with.row(b) -= d_ew.transpose();
      d_verts_without.row(a) += d_eb.transpose();
      d_verts_without.row(b) -= d_eb.transpose();
    }
  }
  for (int i = 0; i < offsets.rows(); ++i) {
    const double rw = w.offset_region_ratio[static_cast<int>(region[static_cast<size_t>(i)])];
    d_offsets.row(i) += w.offset * rw * 2.0 * offsets.row(i);
  }
}

}  // namespace drape
