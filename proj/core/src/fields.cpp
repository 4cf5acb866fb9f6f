#include "drape/fields.hpp"

#include <cmath>

#include "drape/check.hpp"

namespace drape {

MatX positional_encode(const EncodingSpec& spec, const MatX& x) {
  const int d = static_cast<int>(x.rows());
  const int n = static_cast<int>(x.cols());
  MatX out(spec.encoded_dim(d), n);
  int row = 0;
  if (spec.include_input) {
    out.topRows(d) = x;
    row = d;
  }
  const int sin_base = row;
  const int cos_base = row + d * spec.levels;
  for (int l = 0; l < spec.levels; ++l) {
    const double freq = std::ldexp(1.0, l);  // 2^l
    for (int i = 0; i < d; ++i)
      for (int c = 0; c < n; ++c) {
        const double v = freq * x(i, c);
        out(sin_base + l * d + i, c) = std::sin(v);
        out(cos_base + l * d + i, c) = std::cos(v);
      }
  }
  return out;
}

MatX positional_encode_backward(const EncodingSpec& spec, const MatX& x, const MatX& d_encoded) {
  const int d = static_cast<int>(x.rows());
  const int n = static_cast<int>(x.cols());
  DRAPE_ASSERT(d_encoded.rows() == spec.encoded_dim(d), "encoding gradient shape mismatch");
  MatX dx = MatX::Zero(d, n);
  int row = 0;
  if (spec.include_input) {
    dx = d_encoded.topRows(d);
    row = d;
  }
  const int sin_base = row;
  const int cos_base = row + d * spec.levels;
  for (int l = 0; l < spec.levels; ++l) {
    const double freq = std::ldexp(1.0, l);
    for (int i = 0; i < d; ++i)
      for (int c = 0; c < n; ++c) {
        const double v = freq * x(i, c);
        dx(i, c) += d_encoded(sin_base + l * d + i, c) * freq * std::cos(v);
        dx(i, c) -= d_encoded(cos_base + l * d + i, c) * freq * std::sin(v);
      }
  }
  return dx;
}

double softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

namespace {

double activate(Activation a, double x) {
  switch (a) {
    case Activation::Softplus:
      return softplus(x);
    case Activation::Relu:
      return x > 0.0 ? x : 0.0;
  }
  return x;
}

double activate_grad(Activation a, double pre) {
  switch (a) {
    case Activation::Softplus:
      return sigmoid(pre);
    case Activation::Relu:
      return pre > 0.0 ? 1.0 : 0.0;
  }
  return 1.0;
}

}  // namespace

void MlpGrads::add(const MlpGrads& other) {
  for (size_t i = 0; i < weights.size(); ++i) {
    weights[i] += other.weights[i];
    biases[i] += other.biases[i];
  }
}

void MlpGrads::scale(double s) {
  for (size_t i = 0; i < weights.size(); ++i) {
    weights[i] *= s;
    biases[i] *= s;
  }
}

VecX MlpGrads::flatten() const {
  Eigen::Index total = 0;
  for (size_t i = 0; i < weights.size(); ++i) total += weights[i].size() + biases[i].size();
  VecX flat(total);
  Eigen::Index at = 0;
  for (size_t i = 0; i < weights.size(); ++i) {
    for (Eigen::Index c = 0; c < weights[i].cols(); ++c)
      for (Eigen::Index r = 0; r < weights[i].rows(); ++r) flat[at++] = weights[i](r, c);
    for (Eigen::Index r = 0; r < biases[i].size(); ++r) flat[at++] = biases[i][r];
  }
  return flat;
}

Mlp::Mlp(MlpSpec spec) : spec_(std::move(spec)) {
  DRAPE_REQUIRE(spec_.in_dim > 0 && spec_.out_dim > 0, "MLP needs positive input/output dims");
  const size_t layers = spec_.hidden.size() + 1;
  weights_.resize(layers);
  biases_.resize(layers);
  for (size_t l = 0; l < layers; ++l) {
    const int out = l < spec_.hidden.size() ? spec_.hidden[l] : spec_.out_dim;
    weights_[l] = MatX::Zero(out, layer_in_dim(l));
    biases_[l] = VecX::Zero(out);
  }
}

int Mlp::layer_in_dim(size_t layer) const {
  if (layer == 0) return spec_.in_dim;
  int dim = spec_.hidden[layer - 1];
  if (static_cast<int>(layer) == spec_.skip_at) dim += spec_.in_dim;
  return dim;
}

void Mlp::init(Prng& rng, bool zero_final_layer) {
  for (size_t l = 0; l < weights_.size(); ++l) {
    const double bound = std::sqrt(6.0 / (weights_[l].rows() + weights_[l].cols()));
    for (Eigen::Index c = 0; c < weights_[l].cols(); ++c)
      for (Eigen::Index r = 0; r < weights_[l].rows(); ++r)
        weights_[l](r, c) = rng.uniform(-bound, bound);
    biases_[l].setZero();
  }
  if (zero_final_layer) {
    weights_.back().setZero();
    biases_.back().setZero();
  }
}

MatX Mlp::forward(const MatX& x, Forward& ws) const {
  DRAPE_REQUIRE(x.rows() == spec_.in_dim, "MLP input has ", x.rows(), " rows, expected ",
                spec_.in_dim);
  const size_t layers = weights_.size();
  ws.input = x;
  ws.pre.resize(layers);
  ws.post.resize(layers);
  const MatX* cur = &ws.input;
  MatX skip_buf;
  for (size_t l = 0; l < layers; ++l) {
    if (static_cast<int>(l) == spec_.skip_at && l > 0) {
      skip_buf.resize(cur->rows() + x.rows(), x.cols());
      skip_buf.topRows(cur->rows()) = *cur;
      skip_buf.bottomRows(x.rows()) = x;
      ws.pre[l].noalias() = weights_[l] * skip_buf;
    } else {
      ws.pre[l].noalias() = weights_[l] * (*cur);
    }
    ws.pre[l].colwise() += biases_[l];
    if (l + 1 < layers) {
      ws.post[l] = ws.pre[l].unaryExpr(
          [a = spec_.activation](double v) { return activate(a, v); });
    } else {
      ws.post[l] = ws.pre[l];  // raw output, heads applied by wrappers
    }
    cur = &ws.post[l];
  }
  ws.valid = true;
  return ws.post.back();
}

MatX Mlp::backward(const Forward& ws, const MatX& d_out, MlpGrads& g) const {
  DRAPE_ASSERT(ws.valid, "MLP backward without a recorded forward pass");
  const size_t layers = weights_.size();
  DRAPE_ASSERT(g.weights.size() == layers, "gradient buffer layer count mismatch");

  MatX d_cur = d_out;
  MatX d_input = MatX::Zero(ws.input.rows(), ws.input.cols());
  for (size_t l = layers; l-- > 0;) {
    if (l + 1 < layers) {
      // chain through the activation
      d_cur.array() *= ws.pre[l].unaryExpr([a = spec_.activation](double v) {
                                   return activate_grad(a, v);
                                 }).array();
    }
    const MatX* in = l == 0 ? &ws.input : &ws.post[l - 1];
    if (static_cast<int>(l) == spec_.skip_at && l > 0) {
      MatX joined(in->rows() + ws.input.rows(), in->cols());
      joined.topRows(in->rows()) = *in;
      joined.bottomRows(ws.input.rows()) = ws.input;
      g.weights[l].noalias() += d_cur * joined.transpose();
      g.biases[l] += d_cur.rowwise().sum();
      const MatX d_joined = weights_[l].transpose() * d_cur;
      d_input += d_joined.bottomRows(ws.input.rows());
      d_cur = d_joined.topRows(in->rows());
    } else {
      g.weights[l].noalias() += d_cur * in->transpose();
      g.biases[l] += d_cur.rowwise().sum();
      d_cur = weights_[l].transpose() * d_cur;
    }
  }
  d_input += d_cur;
  return d_input;
}

MlpGrads Mlp::zero_grads() const {
  MlpGrads g;
  g.weights.resize(weights_.size());
  g.biases.resize(biases_.size());
  for (size_t l = 0; l < weights_.size(); ++l) {
    g.weights[l] = MatX::Zero(weights_[l].rows(), weights_[l].cols());
    g.biases[l] = VecX::Zero(biases_[l].size());
  }
  return g;
}

size_t Mlp::param_count() const {
  size_t n = 0;
  for (size_t l = 0; l < weights_.size(); ++l)
    n += static_cast<size_t>(weights_[l].size() + biases_[l].size());
  return n;
}

VecX Mlp::flatten() const {
  VecX flat(static_cast<Eigen::Index>(param_count()));
  Eigen::Index at = 0;
  for (size_t l = 0; l < weights_.size(); ++l) {
    for (Eigen::Index c = 0; c < weights_[l].cols(); ++c)
      for (Eigen::Index r = 0; r < weights_[l].rows(); ++r) flat[at++] = weights_[l](r, c);
    for (Eigen::Index r = 0; r < biases_[l].size(); ++r) flat[at++] = biases_[l][r];
  }
  return flat;
}

void Mlp::unflatten(const VecX& flat) {
  DRAPE_REQUIRE(flat.size() == static_cast<Eigen::Index>(param_count()),
                "flat parameter vector has wrong size");
  Eigen::Index at = 0;
  for (size_t l = 0; l < weights_.size(); ++l) {
    for (Eigen::Index c = 0; c < weights_[l].cols(); ++c)
      for (Eigen::Index r = 0; r < weights_[l].rows(); ++r) weights_[l](r, c) = flat[at++];
    for (Eigen::Index r = 0; r < biases_[l].size(); ++r) biases_[l][r] = flat[at++];
  }
}

bool Mlp::all_finite() const {
  for (size_t l = 0; l < weights_.size(); ++l)
    if (!weights_[l].allFinite() || !biases_[l].allFinite()) return false;
  return true;
}

MlpClothingField::MlpClothingField(const EncodingSpec& enc, std::vector<int> hidden, int skip_at,
                                   Prng& rng)
    : encoding(enc) {
  MlpSpec spec;
  spec.in_dim = enc.encoded_dim(3);
  spec.hidden = std::move(hidden);
  spec.out_dim = 4;
  spec.skip_at = skip_at;
  mlp = Mlp(spec);
  mlp.init(rng, /*zero_final_layer=*/false);
}

void MlpClothingField::evaluate(const MatX& x, MatX& colors, VecX& densities) const {
  Forward fwd;
  evaluate_diff(x, fwd, colors, densities);
}

void MlpClothingField::evaluate_diff(const MatX& x, Forward& fwd, MatX& colors,
                                     VecX& densities) const {
  fwd.x = x;
  const MatX encoded = positional_encode(encoding, x);
  fwd.raw = mlp.forward(encoded, fwd.ws);
  const int n = static_cast<int>(x.cols());
  colors.resize(3, n);
  densities.resize(n);
  for (int c = 0; c < n; ++c) {
    for (int i = 0; i < 3; ++i) colors(i, c) = sigmoid(fwd.raw(i, c));
    densities[c] = softplus(fwd.raw(3, c));
  }
}

MatX MlpClothingField::backward(const Forward& fwd, const MatX& d_colors,
                                const VecX& d_densities, MlpGrads& g) const {
  const int n = static_cast<int>(fwd.raw.cols());
  MatX d_raw(4, n);
  for (int c = 0; c < n; ++c) {
    for (int i = 0; i < 3; ++i) {
      const double s = sigmoid(fwd.raw(i, c));
      d_raw(i, c) = d_colors(i, c) * s * (1.0 - s);
    }
    d_raw(3, c) = d_densities[c] * sigmoid(fwd.raw(3, c));
  }
  const MatX d_encoded = mlp.backward(fwd.ws, d_raw, g);
  return positional_encode_backward(encoding, fwd.x, d_encoded);
}

std::unique_ptr<ClothingField> MlpClothingField::clone() const {
  return std::make_unique<MlpClothingField>(*this);
}

void UniformClothingField::evaluate(const MatX& x, MatX& colors, VecX& densities) const {
  const int n = static_cast<int>(x.cols());
  colors.resize(3, n);
  colors.colwise() = color_;
  densities = VecX::Constant(n, density_);
}

std::unique_ptr<ClothingField> UniformClothingField::clone() const {
  return std::make_unique<UniformClothingField>(*this);
}

CapsuleShellField::CapsuleShellField(std::vector<Segment> segments, double inner, double outer,
                                     double density, Vec3 base_color, Vec3 stripe_color,
                                     double stripe_freq)
    : segments_(std::move(segments)),
      inner_(inner),
      outer_(outer),
      density_(density),
      base_color_(base_color),
      stripe_color_(stripe_color),
      stripe_freq_(stripe_freq) {
  DRAPE_REQUIRE(inner_ >= 0.0 && outer_ > inner_, "shell band must satisfy 0 <= inner < outer");
}

double CapsuleShellField::distance(const Vec3& x) const {
  double best = std::numeric_limits<double>::infinity();
  for (const Segment& s : segments_) {
    const Vec3 ab = s.b - s.a;
    const double len2 = ab.squaredNorm();
    double q = len2 > 0.0 ? (x - s.a).dot(ab) / len2 : 0.0;
    q = std::clamp(q, 0.0, 1.0);
    best = std::min(best, (x - (s.a + q * ab)).norm());
  }
  return best;
}

bool CapsuleShellField::inside(const Vec3& x) const {
  const double d = distance(x);
  return d >= inner_ && d <= outer_;
}

Vec3 CapsuleShellField::color_at(const Vec3& x) const {
  const double s = 0.5 + 0.5 * std::sin(stripe_freq_ * x.y());
  return (1.0 - s) * base_color_ + s * stripe_color_;
}

void CapsuleShellField::evaluate(const MatX& x, MatX& colors, VecX& densities) const {
  const int n = static_cast<int>(x.cols());
  colors.resize(3, n);
  densities.resize(n);
  for (int c = 0; c < n; ++c) {
    const Vec3 p = x.col(c);
    colors.col(c) = color_at(p);
    densities[c] = inside(p) ? density_ : 0.0;
  }
}

double CapsuleShellField::optical_depth(const Vec3& origin, const Vec3& dir, double t0,
                                        double t1) const {
  // Locate indicator transitions by scan + bisection, then sum chord lengths.
  const int scan = 4096;
  const double dt = (t1 - t0) / scan;
  auto is_in = [&](double t) { return inside(origin + t * dir); };
  double depth = 0.0;
  bool prev = is_in(t0);
  double seg_start = prev ? t0 : 0.0;
  double t_prev = t0;
  for (int i = 1; i <= scan; ++i) {
    const double t = t0 + i * dt;
    const bool cur = is_in(t);
    if (cur != prev) {
      double lo = t_prev, hi = t;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (is_in(mid) == prev)
          lo = mid;
        else
          hi = mid;
      }
      const double boundary = 0.5 * (lo + hi);
      if (prev)
        depth += (boundary - seg_start) * density_;
      else
        seg_start = boundary;
      prev = cur;
    }
    t_prev = t;
  }
  if (prev) depth += (t1 - seg_start) * density_;
  return depth;
}

std::unique_ptr<ClothingField> CapsuleShellField::clone() const {
  return std::make_unique<CapsuleShellField>(*this);
}

DeformationField::DeformationField(const EncodingSpec& enc, std::vector<int> hidden, Prng& rng)
    : encoding(enc) {
  MlpSpec spec;
  spec.in_dim = 2 * enc.encoded_dim(3);
  spec.hidden = std::move(hidden);
  spec.out_dim = 3;
  mlp = Mlp(spec);
  mlp.init(rng, /*zero_final_layer=*/true);  // starts from the stage-1 solution
}

MatX DeformationField::evaluate(const MatX& xc, const MatX& vp, Forward* fwd) const {
  DRAPE_ASSERT(xc.cols() == vp.cols(), "deformation inputs must align");
  const MatX exc = positional_encode(encoding, xc);
  const MatX evp = positional_encode(encoding, vp);
  MatX joined(exc.rows() + evp.rows(), exc.cols());
  joined.topRows(exc.rows()) = exc;
  joined.bottomRows(evp.rows()) = evp;
  Forward local;
  Forward& f = fwd ? *fwd : local;
  f.xc = xc;
  f.vp = vp;
  return mlp.forward(joined, f.ws);
}

MatX DeformationField::backward(const Forward& fwd, const MatX& d_out, MatX& d_vp,
                                MlpGrads& g) const {
  const MatX d_joined = mlp.backward(fwd.ws, d_out, g);
  const int half = encoding.encoded_dim(3);
  const MatX d_xc = positional_encode_backward(encoding, fwd.xc, d_joined.topRows(half));
  d_vp = positional_encode_backward(encoding, fwd.vp, d_joined.bottomRows(half));
  return d_xc;
}

BodyAppearance BodyAppearance::mlps(const EncodingSpec& enc, std::vector<int> hidden_offset,
                                    std::vector<int> hidden_texture, int, Prng& rng) {
  BodyAppearance a;
  a.encoding = enc;
  MlpSpec off;
  off.in_dim = enc.encoded_dim(3);
  off.hidden = std::move(hidden_offset);
  off.out_dim = 3;
  a.offset_net = Mlp(off);
  a.offset_net->init(rng, /*zero_final_layer=*/true);  // O = 0 at start
  MlpSpec tex;
  tex.in_dim = enc.encoded_dim(3);
  tex.hidden = std::move(hidden_texture);
  tex.out_dim = 3;
  a.texture_net = Mlp(tex);
  a.texture_net->init(rng, /*zero_final_layer=*/false);
  return a;
}

BodyAppearance BodyAppearance::explicit_data(Points3 offsets, Points3 colors) {
  BodyAppearance a;
  a.explicit_offsets = std::move(offsets);
  a.explicit_colors = std::move(colors);
  return a;
}

void BodyAppearance::evaluate(const Points3& rest_template, Forward* fwd, Points3& offsets,
                              Points3& colors) const {
  const int n = static_cast<int>(rest_template.rows());
  if (!trainable()) {
    DRAPE_REQUIRE(explicit_offsets.rows() == n && explicit_colors.rows() == n,
                  "explicit appearance arrays do not match the template");
    offsets = explicit_offsets;
    colors = explicit_colors;
    return;
  }
  const MatX x = rest_template.transpose();
  Forward local;
  Forward& f = fwd ? *fwd : local;
  f.encoded = positional_encode(encoding, x);
  const MatX o = offset_net->forward(f.encoded, f.offset_ws);
  f.texture_raw = texture_net->forward(f.encoded, f.texture_ws);
  offsets.resize(n, 3);
  colors.resize(n, 3);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) {
      offsets(i, c) = o(c, i);
      colors(i, c) = sigmoid(f.texture_raw(c, i));
    }
}

void BodyAppearance::backward(const Forward& fwd, const Points3& d_offsets,
                              const Points3& d_colors, MlpGrads& d_offset_net,
                              MlpGrads& d_texture_net) const {
  DRAPE_ASSERT(trainable(), "appearance backward on explicit data");
  const int n = static_cast<int>(d_offsets.rows());
  MatX d_o(3, n), d_raw(3, n);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) {
      d_o(c, i) = d_offsets(i, c);
      const double s = sigmoid(fwd.texture_raw(c, i));
      d_raw(c, i) = d_colors(i, c) * s * (1.0 - s);
    }
  offset_net->backward(fwd.offset_ws, d_o, d_offset_net);
  texture_net->backward(fwd.texture_ws, d_raw, d_texture_net);
}

FieldSet::FieldSet(const FieldSet& other)
    : clothing_coarse(other.clothing_coarse ? other.clothing_coarse->clone() : nullptr),
      clothing_fine(other.clothing_fine ? other.clothing_fine->clone() : nullptr),
      deformation(other.deformation),
      appearance(other.appearance) {}

FieldSet& FieldSet::operator=(const FieldSet& other) {
  if (this == &other) return *this;
  clothing_coarse = other.clothing_coarse ? other.clothing_coarse->clone() : nullptr;
  clothing_fine = other.clothing_fine ? other.clothing_fine->clone() : nullptr;
  deformation = other.deformation;
  appearance = other.appearance;
  return *this;
}

}  // namespace drape
