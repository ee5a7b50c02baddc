#include "deocclude/model.hpp"

#include <algorithm>
#include <cmath>

#include "deocclude/error.hpp"

namespace deoc {

// ---------------------------------------------------------------------------
// ModelConfig

void ModelConfig::validate() const {
  if (latent_dim != 256) throw ConfigError("latent_dim is fixed at 256");
  if (input_channels != 4) throw ConfigError("input_channels is fixed at 4 (RGB + mask)");
  if (depth < 3 || depth > 8) throw ConfigError("depth must lie in [3, 8]");
  if (base_width < 1) throw ConfigError("base_width must be positive");
  if (blocks_per_stage < 1) throw ConfigError("blocks_per_stage must be >= 1");
  if (max_width_mult < 1) throw ConfigError("max_width_mult must be >= 1");
  if (resolution < (1 << depth) || resolution % (1 << depth) != 0)
    throw ConfigError("resolution must be a positive multiple of 2^depth");
}

int ModelConfig::width_at(int stage) const {
  const std::int64_t w = static_cast<std::int64_t>(base_width) << stage;
  return static_cast<int>(std::min<std::int64_t>(w, static_cast<std::int64_t>(base_width) * max_width_mult));
}

bool ModelConfig::structurally_equal(const ModelConfig& o) const {
  return resolution == o.resolution && base_width == o.base_width && latent_dim == o.latent_dim &&
         input_channels == o.input_channels && depth == o.depth &&
         blocks_per_stage == o.blocks_per_stage && max_width_mult == o.max_width_mult &&
         disc_base_width == o.disc_base_width;
}

namespace nn {

// ---------------------------------------------------------------------------
// ResBlock

ResBlock::ResBlock(ParamRegistry& reg, const std::string& name, int in_ch, int out_ch, Kind kind)
    : kind_(kind),
      identity_skip_(kind == Kind::flat && in_ch == out_ch),
      conv1_(reg, name + ".conv1", in_ch, out_ch, 3, kind == Kind::down ? 2 : 1, 1, false),
      norm1_(reg, name + ".norm1", out_ch),
      conv2_(reg, name + ".conv2", out_ch, out_ch, 3, 1, 1, false),
      norm2_(reg, name + ".norm2", out_ch) {
  if (!identity_skip_)
    skip_.emplace(reg, name + ".skip", in_ch, out_ch, 1, kind == Kind::down ? 2 : 1, 0, false);
}

void ResBlock::init(Rng& rng) {
  conv1_.init(rng);
  norm1_.init();
  conv2_.init(rng);
  norm2_.init();
  if (skip_) skip_->init(rng);
}

Tensor ResBlock::forward(const Tensor& x) {
  const Tensor* h = &x;
  Tensor up_out;
  if (kind_ == Kind::up) {
    up_out = up_.forward(x);
    h = &up_out;
  }
  Tensor m = conv1_.forward(*h);
  m = norm1_.forward(m);
  m = act1_.forward(m);
  m = conv2_.forward(m);
  m = norm2_.forward(m);
  Tensor s = identity_skip_ ? *h : skip_->forward(*h);
  for (std::int64_t i = 0; i < m.size(); ++i) m[i] += s[i];
  return act_out_.forward(m);
}

Tensor ResBlock::backward(const Tensor& dy, bool param_grads, bool input_grad) {
  Tensor dsum = act_out_.backward(dy);
  Tensor dm = norm2_.backward(dsum, param_grads);
  dm = conv2_.backward(dm, param_grads);
  dm = act1_.backward(dm);
  dm = norm1_.backward(dm, param_grads);
  dm = conv1_.backward(dm, param_grads, input_grad || kind_ == Kind::up);
  if (!input_grad && kind_ != Kind::up) {
    if (!identity_skip_) skip_->backward(dsum, param_grads, false);
    return Tensor();
  }
  Tensor dh;
  if (identity_skip_) {
    dh = std::move(dsum);
    for (std::int64_t i = 0; i < dh.size(); ++i) dh[i] += dm[i];
  } else {
    dh = skip_->backward(dsum, param_grads, true);
    for (std::int64_t i = 0; i < dh.size(); ++i) dh[i] += dm[i];
  }
  if (kind_ == Kind::up) {
    if (!input_grad) return Tensor();
    return up_.backward(dh);
  }
  return dh;
}

// ---------------------------------------------------------------------------
// AttentionFuse

AttentionFuse::AttentionFuse(ParamRegistry& reg, const std::string& name, int channels)
    : channels_(channels),
      conv1_(reg, name + ".conv1", 2 * channels, std::max(4, channels / 4), 3, 1, 1, false),
      norm1_(reg, name + ".norm1", std::max(4, channels / 4)),
      conv2_(reg, name + ".conv2", std::max(4, channels / 4), 2, 3, 1, 1, true) {}

void AttentionFuse::init(Rng& rng) {
  conv1_.init(rng);
  norm1_.init();
  conv2_.init_zero();  // zero-centered logits -> exactly 0.5/0.5 maps
}

void AttentionFuse::init_random_logits(Rng& rng) {
  conv1_.init(rng);
  norm1_.init();
  conv2_.init(rng);
}

AttentionFuse::Result AttentionFuse::forward(const Tensor& f_enc, const Tensor& f_dec) {
  if (!f_enc.same_shape(f_dec) || f_enc.dim(0) != channels_)
    throw ShapeError("attention_fuse: feature maps must share shape (C,H,W)");
  f_enc_ = f_enc;
  f_dec_ = f_dec;
  const int c = channels_, h = f_enc.dim(1), w = f_enc.dim(2);

  Tensor cat({2 * c, h, w});
  std::copy(f_enc.data(), f_enc.data() + f_enc.size(), cat.data());
  std::copy(f_dec.data(), f_dec.data() + f_dec.size(), cat.data() + f_enc.size());

  Tensor t = act1_.forward(norm1_.forward(conv1_.forward(cat)));
  Tensor logits = conv2_.forward(t);  // (2, h, w)

  Result r;
  r.attn_enc = Tensor({h, w});
  r.attn_dec = Tensor({h, w});
  const float* l0 = logits.data();
  const float* l1 = logits.data() + static_cast<std::size_t>(h) * w;
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(h) * w; ++i) {
    const float m = std::max(l0[i], l1[i]);
    const float e0 = std::exp(l0[i] - m);
    const float e1 = std::exp(l1[i] - m);
    const float ae = e0 / (e0 + e1);
    r.attn_enc[i] = ae;
    r.attn_dec[i] = 1.0f - ae;  // sums to 1 exactly
  }
  attn_enc_ = r.attn_enc;
  r.fused = fuse_features(f_enc, f_dec, r.attn_enc, r.attn_dec);
  return r;
}

std::pair<Tensor, Tensor> AttentionFuse::backward(const Tensor& d_fused, bool param_grads) {
  const int c = channels_, h = d_fused.dim(1), w = d_fused.dim(2);
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;

  Tensor d_enc(f_enc_.shape());
  Tensor d_dec(f_dec_.shape());
  Tensor d_logits({2, h, w});
  float* dl0 = d_logits.data();
  float* dl1 = d_logits.data() + plane;

  for (std::int64_t p = 0; p < plane; ++p) {
    const float ae = attn_enc_[p];
    const float ad = 1.0f - ae;
    double d_ae = 0.0;
    for (int ch = 0; ch < c; ++ch) {
      const std::int64_t idx = ch * plane + p;
      const float g = d_fused[idx];
      d_enc[idx] = g * ae;
      d_dec[idx] = g * ad;
      d_ae += static_cast<double>(g) * (f_enc_[idx] - f_dec_[idx]);
    }
    // 2-way softmax: d l0 = d_ae * ae * ad, d l1 = -d l0.
    const float dl = static_cast<float>(d_ae) * ae * ad;
    dl0[p] = dl;
    dl1[p] = -dl;
  }

  Tensor dt = conv2_.backward(d_logits, param_grads);
  dt = act1_.backward(dt);
  dt = norm1_.backward(dt, param_grads);
  Tensor dcat = conv1_.backward(dt, param_grads);

  const std::int64_t half = static_cast<std::int64_t>(c) * plane;
  for (std::int64_t i = 0; i < half; ++i) {
    d_enc[i] += dcat[i];
    d_dec[i] += dcat[half + i];
  }
  return {std::move(d_enc), std::move(d_dec)};
}

}  // namespace nn

Tensor fuse_features(const Tensor& f_enc, const Tensor& f_dec, const Tensor& attn_enc,
                     const Tensor& attn_dec) {
  if (!f_enc.same_shape(f_dec)) throw ShapeError("fuse_features: feature shape mismatch");
  if (!attn_enc.same_shape(attn_dec) || attn_enc.rank() != 2 ||
      attn_enc.dim(0) != f_enc.dim(1) || attn_enc.dim(1) != f_enc.dim(2))
    throw ShapeError("fuse_features: attention map shape mismatch");
  const int c = f_enc.dim(0);
  const std::int64_t plane = static_cast<std::int64_t>(f_enc.dim(1)) * f_enc.dim(2);
  Tensor out(f_enc.shape());
  for (int ch = 0; ch < c; ++ch) {
    const float* fe = f_enc.data() + ch * plane;
    const float* fd = f_dec.data() + ch * plane;
    float* o = out.data() + ch * plane;
    for (std::int64_t p = 0; p < plane; ++p)
      o[p] = fe[p] * attn_enc[p] + fd[p] * attn_dec[p];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Generator

Generator::Generator(const ModelConfig& config) : config_(config) {
  config_.validate();
  const int depth = config_.depth;

  stem_ = std::make_unique<nn::Conv2d>(params_, "stem", config_.input_channels,
                                       config_.width_at(0), 3, 1, 1, false);
  stem_norm_ = std::make_unique<nn::InstanceNorm>(params_, "stem.norm", config_.width_at(0));

  // Encoder: one strided block per stage (+ optional flat blocks).
  int enc_index = 0;
  for (int i = 0; i < depth; ++i) {
    enc_blocks_.push_back(std::make_unique<nn::ResBlock>(
        params_, "enc" + std::to_string(enc_index++), config_.width_at(i), config_.width_at(i + 1),
        nn::ResBlock::Kind::down));
    for (int b = 1; b < config_.blocks_per_stage; ++b)
      enc_blocks_.push_back(std::make_unique<nn::ResBlock>(
          params_, "enc" + std::to_string(enc_index++), config_.width_at(i + 1),
          config_.width_at(i + 1), nn::ResBlock::Kind::flat));
    if (i == 1) skip_block_index_ = enc_index - 1;  // 64x64 tap at resolution 256
  }

  to_latent_ = std::make_unique<nn::Linear>(params_, "to_latent", config_.width_at(depth),
                                            config_.latent_dim);

  const int bottom = config_.resolution >> depth;
  from_latent_ = std::make_unique<nn::Linear>(params_, "from_latent", config_.latent_dim,
                                              config_.width_at(depth) * bottom * bottom);

  // Decoder mirrors the encoder with upsampling blocks.
  int dec_index = 0;
  for (int i = depth - 1; i >= 0; --i) {
    dec_blocks_.push_back(std::make_unique<nn::ResBlock>(
        params_, "dec" + std::to_string(dec_index++), config_.width_at(i + 1), config_.width_at(i),
        nn::ResBlock::Kind::up));
    for (int b = 1; b < config_.blocks_per_stage; ++b)
      dec_blocks_.push_back(std::make_unique<nn::ResBlock>(
          params_, "dec" + std::to_string(dec_index++), config_.width_at(i), config_.width_at(i),
          nn::ResBlock::Kind::flat));
    if (i == 2) fuse_block_index_ = dec_index - 1;  // feature maps back at resolution / 4
  }

  attention_ = std::make_unique<nn::AttentionFuse>(params_, "attn", config_.width_at(2));
  head_ = std::make_unique<nn::Conv2d>(params_, "head", config_.width_at(0), 3, 3, 1, 1, true);
}

void Generator::init_params(Rng& rng) {
  stem_->init(rng);
  stem_norm_->init();
  for (auto& b : enc_blocks_) b->init(rng);
  to_latent_->init(rng);
  from_latent_->init(rng);
  for (auto& b : dec_blocks_) b->init(rng);
  attention_->init(rng);
  head_->init(rng);
}

Tensor Generator::check(Tensor t, const char* where) const {
  if (debug_checks_ && !t.all_finite())
    throw NumericError(std::string("non-finite activations after ") + where);
  return t;
}

EncodeResult Generator::encode(const Tensor& x) {
  if (x.rank() != 3 || x.dim(0) != config_.input_channels || x.dim(1) != config_.resolution ||
      x.dim(2) != config_.resolution)
    throw ShapeError("encode: expected (" + std::to_string(config_.input_channels) + ", " +
                     std::to_string(config_.resolution) + ", " +
                     std::to_string(config_.resolution) + ") input");
  Tensor h = check(stem_act_.forward(stem_norm_->forward(stem_->forward(x))), "stem");
  EncodeResult result;
  for (std::size_t i = 0; i < enc_blocks_.size(); ++i) {
    h = check(enc_blocks_[i]->forward(h), "encoder block");
    if (static_cast<int>(i) == skip_block_index_) result.f_enc = h;
  }
  result.latent = to_latent_->forward(gap_.forward(h));
  return result;
}

Tensor Generator::decode(const Tensor& latent, const Tensor& f_enc, bool use_attention) {
  if (latent.size() != config_.latent_dim) throw ShapeError("decode: latent must have length 256");
  const int bottom = config_.resolution >> config_.depth;
  Tensor h = dec_act_.forward(from_latent_->forward(latent));
  Tensor reshaped({config_.width_at(config_.depth), bottom, bottom});
  std::copy(h.data(), h.data() + h.size(), reshaped.data());
  h = std::move(reshaped);

  last_used_attention_ = use_attention;
  for (std::size_t i = 0; i < dec_blocks_.size(); ++i) {
    h = check(dec_blocks_[i]->forward(h), "decoder block");
    if (static_cast<int>(i) == fuse_block_index_ && use_attention) {
      last_attention_ = attention_->forward(f_enc, h);
      h = check(last_attention_.fused, "attention fusion");
    }
  }
  head_out_ = nn::tanh01_forward(head_->forward(h));
  return head_out_;
}

Tensor Generator::forward(const Tensor& x, bool use_attention) {
  EncodeResult enc = encode(x);
  if (!use_attention) last_attention_ = nn::AttentionFuse::Result{};
  return decode(enc.latent, enc.f_enc, use_attention);
}

Tensor Generator::backward(const Tensor& d_out, bool param_grads, bool input_grad) {
  Tensor dh = nn::tanh01_backward(head_out_, d_out);
  dh = head_->backward(dh, param_grads);

  Tensor d_f_enc;  // gradient joining the encoder at the skip tap
  for (int i = static_cast<int>(dec_blocks_.size()) - 1; i >= 0; --i) {
    if (i == fuse_block_index_ && last_used_attention_) {
      auto [de, dd] = attention_->backward(dh, param_grads);
      d_f_enc = std::move(de);
      dh = std::move(dd);
    }
    dh = dec_blocks_[static_cast<std::size_t>(i)]->backward(dh, param_grads);
  }
  Tensor d_latent_flat = from_latent_->backward(dec_act_.backward(dh), param_grads, true);

  // Encoder: latent path joins at the top, skip path at the tap.
  Tensor d_enc_top = gap_.backward(to_latent_->backward(d_latent_flat, param_grads, true));
  Tensor dcur = std::move(d_enc_top);
  for (int i = static_cast<int>(enc_blocks_.size()) - 1; i >= 0; --i) {
    if (i == skip_block_index_ && !d_f_enc.empty()) {
      for (std::int64_t k = 0; k < dcur.size(); ++k) dcur[k] += d_f_enc[k];
    }
    dcur = enc_blocks_[static_cast<std::size_t>(i)]->backward(dcur, param_grads, true);
  }
  dcur = stem_act_.backward(dcur);
  dcur = stem_norm_->backward(dcur, param_grads);
  return stem_->backward(dcur, param_grads, input_grad);
}

Tensor Generator::make_input(const Image& occ, const BinaryMask& mask) {
  if (occ.height != mask.height || occ.width != mask.width)
    throw ShapeError("make_input: image/mask shape mismatch");
  const int h = occ.height, w = occ.width;
  Tensor x({4, h, w});
  for (int y = 0; y < h; ++y) {
    for (int xx = 0; xx < w; ++xx) {
      const std::int64_t p = static_cast<std::int64_t>(y) * w + xx;
      x[0 * h * w + p] = occ.at(y, xx, 0) * 2.0f - 1.0f;
      x[1 * static_cast<std::int64_t>(h) * w + p] = occ.at(y, xx, 1) * 2.0f - 1.0f;
      x[2 * static_cast<std::int64_t>(h) * w + p] = occ.at(y, xx, 2) * 2.0f - 1.0f;
      x[3 * static_cast<std::int64_t>(h) * w + p] = mask.at(y, xx);
    }
  }
  return x;
}

// ---------------------------------------------------------------------------
// Discriminator

Discriminator::Discriminator(const ModelConfig& config) : config_(config) {
  config_.validate();
  const int w = config_.disc_width();
  const int channels[5] = {3, w, 2 * w, 4 * w, 4 * w};
  for (int i = 0; i < 4; ++i) {
    convs_.push_back(std::make_unique<nn::Conv2d>(params_, "conv" + std::to_string(i),
                                                  channels[i], channels[i + 1], 4, 2, 1,
                                                  /*bias=*/i == 0));
    if (i > 0)
      norms_.push_back(std::make_unique<nn::InstanceNorm>(params_, "norm" + std::to_string(i),
                                                          channels[i + 1]));
    acts_.emplace_back(0.2f);
  }
  patch_head_ = std::make_unique<nn::Conv2d>(params_, "patch", channels[4], 1, 1, 1, 0, true);
  const int p = config_.resolution >> 4;
  patch_count_ = p * p;
}

void Discriminator::init_params(Rng& rng) {
  for (auto& c : convs_) c->init(rng);
  for (auto& n : norms_) n->init();
  patch_head_->init(rng);
}

double Discriminator::discriminate(const Image& img) {
  return discriminate(image_to_tensor(img));
}

double Discriminator::discriminate(const Tensor& rgb01) {
  if (rgb01.rank() != 3 || rgb01.dim(0) != 3 || rgb01.dim(1) != config_.resolution ||
      rgb01.dim(2) != config_.resolution)
    throw ShapeError("discriminate: expected (3, " + std::to_string(config_.resolution) + ", " +
                     std::to_string(config_.resolution) + ") input");
  Tensor h(rgb01.shape());
  for (std::int64_t i = 0; i < rgb01.size(); ++i) h[i] = rgb01[i] * 2.0f - 1.0f;
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    h = convs_[i]->forward(h);
    if (i > 0) h = norms_[i - 1]->forward(h);
    h = acts_[i].forward(h);
  }
  h = patch_head_->forward(h);
  double mean = 0.0;
  for (std::int64_t i = 0; i < h.size(); ++i) mean += h[i];
  mean /= static_cast<double>(h.size());
  const double score = 1.0 / (1.0 + std::exp(-mean));
  return std::clamp(score, 1e-12, 1.0 - 1e-12);
}

Tensor Discriminator::backward(double d_mean_logit, bool param_grads, bool input_grad) {
  const int p = config_.resolution >> 4;
  Tensor dh({1, p, p});
  const float g = static_cast<float>(d_mean_logit / patch_count_);
  for (std::int64_t i = 0; i < dh.size(); ++i) dh[i] = g;
  Tensor d = patch_head_->backward(dh, param_grads);
  for (int i = static_cast<int>(convs_.size()) - 1; i >= 0; --i) {
    d = acts_[static_cast<std::size_t>(i)].backward(d);
    if (i > 0) d = norms_[static_cast<std::size_t>(i - 1)]->backward(d, param_grads);
    const bool need_input = input_grad || i > 0;
    d = convs_[static_cast<std::size_t>(i)]->backward(d, param_grads, need_input);
  }
  if (!input_grad) return Tensor();
  for (std::int64_t i = 0; i < d.size(); ++i) d[i] *= 2.0f;  // input remap chain rule
  return d;
}

// ---------------------------------------------------------------------------
// composite and conversions

Image composite(const Image& raw_out, const Image& occ, const BinaryMask& mask) {
  if (!raw_out.same_shape(occ) || raw_out.height != mask.height || raw_out.width != mask.width)
    throw ShapeError("composite: shape mismatch");
  Image rec = occ;  // unmasked pixels are bit-identical to occ
  for (int y = 0; y < occ.height; ++y) {
    for (int x = 0; x < occ.width; ++x) {
      if (mask.at(y, x) != 0.0f) {
        rec.at(y, x, 0) = raw_out.at(y, x, 0);
        rec.at(y, x, 1) = raw_out.at(y, x, 1);
        rec.at(y, x, 2) = raw_out.at(y, x, 2);
      }
    }
  }
  return rec;
}

Tensor image_to_tensor(const Image& img) {
  Tensor t({3, img.height, img.width});
  const std::int64_t plane = static_cast<std::int64_t>(img.height) * img.width;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const std::int64_t p = static_cast<std::int64_t>(y) * img.width + x;
      t[p] = img.at(y, x, 0);
      t[plane + p] = img.at(y, x, 1);
      t[2 * plane + p] = img.at(y, x, 2);
    }
  }
  return t;
}

Image tensor_to_image(const Tensor& t) {
  if (t.rank() != 3 || t.dim(0) != 3) throw ShapeError("tensor_to_image: expected (3,H,W)");
  Image img(t.dim(1), t.dim(2));
  const std::int64_t plane = static_cast<std::int64_t>(t.dim(1)) * t.dim(2);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const std::int64_t p = static_cast<std::int64_t>(y) * img.width + x;
      img.at(y, x, 0) = t[p];
      img.at(y, x, 1) = t[plane + p];
      img.at(y, x, 2) = t[2 * plane + p];
    }
  }
  return img;
}

}  // namespace deoc
