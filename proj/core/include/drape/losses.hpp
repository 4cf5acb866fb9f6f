#pragma once

#include <functional>
#include <vector>

#include "drape/common.hpp"
#include "drape/image.hpp"

namespace drape {

struct LossWeights {
  double vol = 1.0;
  double mrf = 0.0;  // perceptual hook weight; the hook defaults to zero
  double clothing = 0.5;
  double silhouette = 0.001;
  double bodymask = 30.0;
  double skin = 1.0;
  double inside = 40.0;
  double skininside = 0.01;
  double edge = 500.0;
  double offset = 400.0;
  Vec3 offset_region_ratio = Vec3(2.0, 3.0, 12.0);  // body : face : hand
  double huber_delta = 1.0;

  void validate() const;
};

// One video frame and its supervision masks.
struct FrameObservation {
  Image image;          // rgb in [0,1]
  Image mask_clothed;   // S, whole subject
  Image mask_clothing;  // S_c
  Image mask_body;      // S_b, visible body parts

  // Enforces binary masks and the containments S_c <= S, S_b <= S by
  // clipping; returns the number of clipped pixels.
  int validate_and_clip();
};

// Elementwise Huber: x^2/2 inside [-delta, delta], linear tails.
double huber(double x, double delta);
double huber_grad(double x, double delta);

// Mean elementwise Huber over a residual array.
double huber_mean(const VecX& residuals, double delta);
// d(residual_i) for upstream gradient d_out.
VecX huber_mean_backward(const VecX& residuals, double delta, double d_out);

// Mean absolute difference.
double l1_mean(const VecX& a, const VecX& b);
VecX l1_mean_backward(const VecX& a, const VecX& b, double d_out);

// Optional perceptual-loss plugin for the reconstruction term.
using PerceptualHook = std::function<double(const Image& rendered, const Image& target)>;

// lambda_vol * Huber(rendered - target) + lambda_mrf * hook(rendered, target).
double recon_loss(const Image& rendered, const Image& target, const LossWeights& w,
                  const PerceptualHook& hook = nullptr);

// lambda_clothing * |mask - clothing_mask|_1 (per-pixel mean).
double clothing_mask_loss(const Image& rendered_mask, const Image& clothing_mask,
                          const LossWeights& w);

struct BodyLossTerms {
  double silhouette = 0.0;
  double bodymask = 0.0;
  double skin = 0.0;
  double inside = 0.0;
  double skininside = 0.0;
  bool skininside_skipped = false;

  double sum() const { return silhouette + bodymask + skin + inside + skininside; }
};

// The mesh-side objectives. hand_color is the current mean hand vertex color,
// treated as a constant target. When the asset has no hand vertices the
// caller passes has_hand_color = false and the term is skipped.
BodyLossTerms body_losses(const Image& raster_rgb, const Image& raster_silhouette,
                          const FrameObservation& obs, const Vec3& hand_color,
                          bool has_hand_color, const LossWeights& w);

// Gradients of body_losses w.r.t. the rendered images (accumulated).
void body_losses_backward(const Image& raster_rgb, const Image& raster_silhouette,
                          const FrameObservation& obs, const Vec3& hand_color,
                          bool has_hand_color, const LossWeights& w, Image& d_rgb,
                          Image& d_silhouette);

// Unique undirected mesh edges.
std::vector<std::pair<int, int>> mesh_edges(const Faces& faces);

struct RegularizerTerms {
  double edge = 0.0;
  double offset = 0.0;
  double sum() const { return edge + offset; }
};

// Relative edge-length change between the shaped mesh with and without
// offsets, plus the region-weighted squared offset norm.
RegularizerTerms regularizers(const Points3& verts_with_offsets,
                              const Points3& verts_without_offsets,
                              const std::vector<std::pair<int, int>>& edges, const Points3& offsets,
                              const std::vector<Region>& region, const LossWeights& w);

void regularizers_backward(const Points3& verts_with_offsets,
                           const Points3& verts_without_offsets,
                           const std::vector<std::pair<int, int>>& edges, const Points3& offsets,
                           const std::vector<Region>& region, const LossWeights& w,
                           Points3& d_verts_with, Points3& d_verts_without, Points3& d_offsets);

// Per-term report of one optimization step.
struct LossBreakdown {
  double vol_fine = 0.0, vol_coarse = 0.0, mrf = 0.0;
  double clothing_fine = 0.0, clothing_coarse = 0.0;
  double silhouette = 0.0, bodymask = 0.0, skin = 0.0, inside = 0.0, skininside = 0.0;
  double edge = 0.0, offset = 0.0;

  double total() const {
    return vol_fine + vol_coarse + mrf + clothing_fine + clothing_coarse + silhouette + bodymask +
           skin + inside + skininside + edge + offset;
  }
};

}  // namespace drape
