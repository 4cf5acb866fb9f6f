#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "drape/body_model.hpp"
#include "drape/common.hpp"
#include "drape/rng.hpp"

namespace drape {

// Frequency encoding with octaves 2^0 .. 2^(L-1); output rows are laid out as
// [input | all sines | all cosines] so the zero vector encodes to (0..0,1..1).
struct EncodingSpec {
  int levels = 6;
  bool include_input = true;

  int encoded_dim(int input_dim) const {
    return input_dim * ((include_input ? 1 : 0) + 2 * levels);
  }
};

MatX positional_encode(const EncodingSpec& spec, const MatX& x);
MatX positional_encode_backward(const EncodingSpec& spec, const MatX& x, const MatX& d_encoded);

enum class Activation : uint8_t { Softplus = 0, Relu = 1 };

struct MlpSpec {
  int in_dim = 0;
  std::vector<int> hidden;
  int out_dim = 0;
  int skip_at = -1;  // hidden layer whose input is concatenated with the network input
  Activation activation = Activation::Softplus;

  bool operator==(const MlpSpec&) const = default;
};

struct MlpGrads {
  std::vector<MatX> weights;
  std::vector<VecX> biases;

  void add(const MlpGrads& other);
  void scale(double s);
  VecX flatten() const;
};

// Plain fully connected network on 64-bit floats with a recorded forward pass
// and hand-written reverse-mode accumulation. Heads live in the field wrappers.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(MlpSpec spec);

  void init(Prng& rng, bool zero_final_layer = false);

  struct Forward {
    MatX input;
    std::vector<MatX> pre;   // pre-activations per layer
    std::vector<MatX> post;  // activations per layer (last = raw output)
    bool valid = false;
  };

  // X is in_dim x N; returns out_dim x N.
  MatX forward(const MatX& x, Forward& ws) const;

  // Accumulates parameter gradients into g and returns dL/dX.
  // Requires a recorded forward pass.
  MatX backward(const Forward& ws, const MatX& d_out, MlpGrads& g) const;

  MlpGrads zero_grads() const;
  size_t param_count() const;
  VecX flatten() const;
  void unflatten(const VecX& flat);
  bool all_finite() const;

  const MlpSpec& spec() const { return spec_; }
  std::vector<MatX>& weights() { return weights_; }
  const std::vector<MatX>& weights() const { return weights_; }
  std::vector<VecX>& biases() { return biases_; }
  const std::vector<VecX>& biases() const { return biases_; }

 private:
  int layer_in_dim(size_t layer) const;
  MlpSpec spec_;
  std::vector<MatX> weights_;
  std::vector<VecX> biases_;
};

double softplus(double x);
double sigmoid(double x);

// Radiance source for the clothing volume: canonical position -> color, density.
class ClothingField {
 public:
  virtual ~ClothingField() = default;
  // x: 3 x N canonical positions. colors in [0,1], densities >= 0.
  virtual void evaluate(const MatX& x, MatX& colors, VecX& densities) const = 0;
  virtual std::unique_ptr<ClothingField> clone() const = 0;
  virtual bool trainable() const { return false; }
};

// F_c: positional-encoded MLP with sigmoid color head and softplus density head.
class MlpClothingField final : public ClothingField {
 public:
  MlpClothingField() = default;
  MlpClothingField(const EncodingSpec& enc, std::vector<int> hidden, int skip_at, Prng& rng);

  void evaluate(const MatX& x, MatX& colors, VecX& densities) const override;
  std::unique_ptr<ClothingField> clone() const override;
  bool trainable() const override { return true; }

  struct Forward {
    MatX x;
    Mlp::Forward ws;
    MatX raw;  // 4 x N pre-head outputs
  };
  void evaluate_diff(const MatX& x, Forward& fwd, MatX& colors, VecX& densities) const;
  // d_colors: 3 x N, d_densities: N. Returns dL/dx (3 x N).
  MatX backward(const Forward& fwd, const MatX& d_colors, const VecX& d_densities,
                MlpGrads& g) const;

  EncodingSpec encoding;
  Mlp mlp;
};

// Constant color/density everywhere; handy for transparent or saturated cases.
class UniformClothingField final : public ClothingField {
 public:
  UniformClothingField() = default;
  UniformClothingField(const Vec3& color, double density) : color_(color), density_(density) {}
  void evaluate(const MatX& x, MatX& colors, VecX& densities) const override;
  std::unique_ptr<ClothingField> clone() const override;

  Vec3 color_ = Vec3::Zero();
  double density_ = 0.0;
};

// Hard shell of constant density at an offset band around a set of canonical
// skeleton segments, with a striped procedural color. Used by the synthetic
// scene generator; has a closed-form optical depth along any ray.
class CapsuleShellField final : public ClothingField {
 public:
  struct Segment {
    Vec3 a, b;
  };

  CapsuleShellField() = default;
  CapsuleShellField(std::vector<Segment> segments, double inner, double outer, double density,
                    Vec3 base_color, Vec3 stripe_color, double stripe_freq);

  void evaluate(const MatX& x, MatX& colors, VecX& densities) const override;
  std::unique_ptr<ClothingField> clone() const override;

  double distance(const Vec3& x) const;  // distance to the segment set
  bool inside(const Vec3& x) const;
  Vec3 color_at(const Vec3& x) const;
  // Exact optical depth of a ray footprint [t0, t1]; boundaries located by
  // bisection on the shell indicator, refined to ~1e-12 in t.
  double optical_depth(const Vec3& origin, const Vec3& dir, double t0, double t1) const;

  std::vector<Segment> segments_;
  double inner_ = 0.0, outer_ = 0.0, density_ = 0.0;
  Vec3 base_color_ = Vec3::Zero(), stripe_color_ = Vec3::Zero();
  double stripe_freq_ = 0.0;
};

// F_m: residual non-rigid deformation conditioned on the nearest posed vertex.
struct DeformationField {
  EncodingSpec encoding;  // applied to both inputs
  Mlp mlp;

  DeformationField() = default;
  DeformationField(const EncodingSpec& enc, std::vector<int> hidden, Prng& rng);

  struct Forward {
    MatX xc, vp;
    Mlp::Forward ws;
  };
  // xc, vp: 3 x N. Returns displacements 3 x N.
  MatX evaluate(const MatX& xc, const MatX& vp, Forward* fwd = nullptr) const;
  // Returns dL/dxc and writes dL/dvp.
  MatX backward(const Forward& fwd, const MatX& d_out, MatX& d_vp, MlpGrads& g) const;
};

// F_d and F_t evaluated on the template: per-vertex offsets and colors.
// Either two small MLPs (trainable avatars) or explicit arrays (synthetic
// ground-truth avatars).
struct BodyAppearance {
  EncodingSpec encoding;
  std::optional<Mlp> offset_net;   // identity head, meters
  std::optional<Mlp> texture_net;  // sigmoid head
  Points3 explicit_offsets;        // used when the nets are absent
  Points3 explicit_colors;

  static BodyAppearance mlps(const EncodingSpec& enc, std::vector<int> hidden_offset,
                             std::vector<int> hidden_texture, int n_template_inputs, Prng& rng);
  static BodyAppearance explicit_data(Points3 offsets, Points3 colors);

  bool trainable() const { return offset_net.has_value(); }

  struct Forward {
    MatX encoded;
    Mlp::Forward offset_ws, texture_ws;
    MatX texture_raw;
  };
  // Evaluates all template vertices; batch evaluation is bit-identical to
  // one-at-a-time evaluation.
  void evaluate(const Points3& rest_template, Forward* fwd, Points3& offsets,
                Points3& colors) const;
  void backward(const Forward& fwd, const Points3& d_offsets, const Points3& d_colors,
                MlpGrads& d_offset_net, MlpGrads& d_texture_net) const;
};

// The optimizable implicit functions of one avatar.
struct FieldSet {
  std::unique_ptr<ClothingField> clothing_coarse;  // coarse and fine share the
  std::unique_ptr<ClothingField> clothing_fine;    // architecture, not weights
  std::optional<DeformationField> deformation;
  BodyAppearance appearance;

  FieldSet() = default;
  FieldSet(const FieldSet& other);
  FieldSet& operator=(const FieldSet& other);
  FieldSet(FieldSet&&) = default;
  FieldSet& operator=(FieldSet&&) = default;
};

}  // namespace drape
