#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "deocclude/image.hpp"
#include "deocclude/nn/layers.hpp"
#include "deocclude/nn/params.hpp"
#include "deocclude/rng.hpp"
#include "deocclude/tensor.hpp"

namespace deoc {

struct ModelConfig {
  int resolution = 256;
  int base_width = 64;
  int latent_dim = 256;
  int input_channels = 4;  // RGB + mask plane
  bool attention = true;
  int depth = 5;            // strided blocks per path; bottleneck at resolution / 2^depth
  int blocks_per_stage = 1; // extra stride-1 residual blocks after each strided block
  int max_width_mult = 8;   // channel cap = base_width * max_width_mult
  int disc_base_width = 0;  // 0 = follow base_width

  void validate() const;

  /// Channel count entering stage i (0 = full resolution).
  int width_at(int stage) const;
  int disc_width() const { return disc_base_width > 0 ? disc_base_width : base_width; }

  /// True when parameter shapes agree (the attention flag is stage-dependent
  /// and deliberately not compared).
  bool structurally_equal(const ModelConfig& o) const;
};

namespace nn {

/// Residual block. `down` halves the resolution (strided conv), `up` doubles
/// it (nearest upsample ahead of both paths), `flat` keeps it. The skip path
/// is a 1x1 convolution unless the block is flat with matching widths.
class ResBlock {
 public:
  enum class Kind { down, up, flat };

  ResBlock(ParamRegistry& reg, const std::string& name, int in_ch, int out_ch, Kind kind);

  void init(Rng& rng);
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy, bool param_grads, bool input_grad = true);

 private:
  Kind kind_;
  bool identity_skip_;
  Upsample2x up_;
  Conv2d conv1_;
  InstanceNorm norm1_;
  LeakyReLU act1_;
  Conv2d conv2_;
  InstanceNorm norm2_;
  std::optional<Conv2d> skip_;
  LeakyReLU act_out_;
};

/// Eq.-style attention fusion at the skip resolution: concat -> conv ->
/// conv -> per-pixel 2-way softmax -> convex blend of f_enc and f_dec.
class AttentionFuse {
 public:
  AttentionFuse(ParamRegistry& reg, const std::string& name, int channels);

  /// Hidden conv gets He init; the logit conv starts at exactly zero so the
  /// initial maps are a uniform 0.5/0.5 blend.
  void init(Rng& rng);
  /// Test hook: random logit conv as well.
  void init_random_logits(Rng& rng);

  struct Result {
    Tensor fused;     // (C, H, W)
    Tensor attn_enc;  // (H, W)
    Tensor attn_dec;  // (H, W)
  };

  Result forward(const Tensor& f_enc, const Tensor& f_dec);
  /// Returns (d_f_enc, d_f_dec) for a gradient w.r.t. the fused map.
  std::pair<Tensor, Tensor> backward(const Tensor& d_fused, bool param_grads);

 private:
  int channels_;
  Conv2d conv1_;
  InstanceNorm norm1_;
  LeakyReLU act1_;
  Conv2d conv2_;
  Tensor f_enc_, f_dec_, attn_enc_;  // forward caches
};

}  // namespace nn

/// Convex blend per the fusion rule, for an externally supplied attention
/// pair: fused = f_enc * attn_enc + f_dec * attn_dec (maps broadcast over
/// channels). Used by the network and directly testable.
Tensor fuse_features(const Tensor& f_enc, const Tensor& f_dec, const Tensor& attn_enc,
                     const Tensor& attn_dec);

struct EncodeResult {
  Tensor latent;  // (latent_dim,)
  Tensor f_enc;   // (C, R/4, R/4) skip feature from the second strided block
};

/// Encoder/decoder generator with the skip-level attention module.
/// Parameters are owned by the embedded registry; forward passes are pure
/// functions of (input, params).
class Generator {
 public:
  explicit Generator(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  nn::ParamRegistry& params() { return params_; }
  const nn::ParamRegistry& params() const { return params_; }

  /// Seeded init; the attention logit conv starts zeroed (0.5/0.5 maps).
  void init_params(Rng& rng);

  /// When enabled, every block output is checked for NaN/Inf and a
  /// NumericError names the offending block.
  void set_debug_checks(bool on) { debug_checks_ = on; }

  /// x: (input_channels, R, R) with RGB mapped to [-1,1] plus the raw mask
  /// plane. Returns the bottleneck latent and the skip feature.
  EncodeResult encode(const Tensor& x);

  /// Decodes to a (3, R, R) image in [0,1]. With use_attention false the
  /// output does not depend on f_enc.
  Tensor decode(const Tensor& latent, const Tensor& f_enc, bool use_attention);

  /// encode + decode. Attention maps from the last call are kept for
  /// inspection (empty when attention was off).
  Tensor forward(const Tensor& x, bool use_attention);

  /// Backpropagates d(loss)/d(output in [0,1]) through decode and encode.
  /// Returns d(input) when input_grad is set.
  Tensor backward(const Tensor& d_out, bool param_grads, bool input_grad = false);

  const nn::AttentionFuse::Result& last_attention() const { return last_attention_; }

  /// Assembles the 4-channel input plane stack from an occluded image and
  /// its mask: RGB affine-mapped to [-1,1], mask appended as-is.
  static Tensor make_input(const Image& occ, const BinaryMask& mask);

 private:
  Tensor check(Tensor t, const char* where) const;

  ModelConfig config_;
  nn::ParamRegistry params_;

  // encoder
  std::unique_ptr<nn::Conv2d> stem_;
  std::unique_ptr<nn::InstanceNorm> stem_norm_;
  nn::LeakyReLU stem_act_;
  std::vector<std::unique_ptr<nn::ResBlock>> enc_blocks_;
  nn::GlobalAvgPool gap_;
  std::unique_ptr<nn::Linear> to_latent_;

  // decoder
  std::unique_ptr<nn::Linear> from_latent_;
  nn::LeakyReLU dec_act_;
  std::vector<std::unique_ptr<nn::ResBlock>> dec_blocks_;
  std::unique_ptr<nn::AttentionFuse> attention_;
  std::unique_ptr<nn::Conv2d> head_;

  int skip_block_index_ = 0;  // encoder block whose output is f_enc
  int fuse_block_index_ = 0;  // decoder block after which fusion happens
  bool debug_checks_ = false;

  // forward caches
  bool last_used_attention_ = false;
  Tensor head_out_;
  nn::AttentionFuse::Result last_attention_;
};

/// Patch-level convolutional classifier; the mean patch logit is squashed to
/// a strictly-interior (0,1) score.
class Discriminator {
 public:
  explicit Discriminator(const ModelConfig& config);

  nn::ParamRegistry& params() { return params_; }
  const nn::ParamRegistry& params() const { return params_; }
  void init_params(Rng& rng);

  /// img in [0,1]; remapped to [-1,1] internally.
  double discriminate(const Image& img);
  double discriminate(const Tensor& rgb01);

  /// Backward from d(loss)/d(mean patch logit). Returns d(input in [0,1])
  /// when input_grad is set.
  Tensor backward(double d_mean_logit, bool param_grads, bool input_grad);

 private:
  ModelConfig config_;
  nn::ParamRegistry params_;
  std::vector<std::unique_ptr<nn::Conv2d>> convs_;
  std::vector<std::unique_ptr<nn::InstanceNorm>> norms_;
  std::vector<nn::LeakyReLU> acts_;
  std::unique_ptr<nn::Conv2d> patch_head_;
  int patch_count_ = 0;
};

/// X_rec: network output under the mask, untouched input elsewhere
/// (unmasked pixels are copied, so they match occ bit-exactly).
Image composite(const Image& raw_out, const Image& occ, const BinaryMask& mask);

/// Tensor (3,H,W) in [0,1] <-> Image conversions.
Tensor image_to_tensor(const Image& img);
Image tensor_to_image(const Tensor& t);

}  // namespace deoc
