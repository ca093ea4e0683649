#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "egogaze/gaze_maps.hpp"
#include "egogaze/nn/blur.hpp"
#include "egogaze/nn/layers.hpp"
#include "egogaze/recording.hpp"
#include "egogaze/tensor.hpp"

namespace egogaze {

enum class Backbone { x3d, slow_r50, none };

std::string backbone_name(Backbone b);
Backbone backbone_from_name(const std::string& s);

// All width/depth constants live here so presets are plain data. The
// "published" preset approximates the reported parameter totals (12.8M x3d /
// 42.5M slow_r50 / 6.1M no-video); "desk" is a CPU-sized configuration for
// training runs; "miniature" is a 16x16 head used by the gradient checks.
struct ModelConfig {
  Backbone backbone = Backbone::x3d;
  std::string preset = "published";
  int clip_len = 16;       // T
  int input_size = 224;    // H = W
  int temporal_stride = 4; // slow pathway frame subsampling

  // image encoder: two stem convs (/4), two downsamples (/16), ResNeXt trunk,
  // two transpose-conv upsamples back to /4.
  int img_w1 = 24, img_w2 = 48, img_w3 = 96, img_trunk = 1104;
  // spatio-temporal encoder over the backbone tap
  int st_width = 208;
  std::vector<int> st_up = {192, 96, 96};  // convT channel chain; last == branch_out
  int branch_out = 96;
  int encoder_blocks = 2;
  int cardinality = 8;
  // decoder: 3x3 pre-conv then two x2 transpose convs to 1 channel
  int dec_pre = 96, dec_mid = 48;

  // x3d-style backbone: stem + 4 stages of inverted bottlenecks + pointwise tap
  int x3d_stem = 40;
  std::array<int, 4> x3d_widths = {40, 80, 160, 320};
  std::array<int, 4> x3d_depths = {2, 4, 6, 5};
  double x3d_expansion = 2.25;
  // slow-pathway ResNet-50 backbone
  int slow_base = 64;
  std::array<int, 4> slow_depths = {3, 4, 6, 3};

  int feat_dim = 768;      // f_D at the tap (0 disables the st branch)
  int patch_stride = 32;   // p

  double post_sigma = 6.0;
  double prior_weight = 0.3;  // lambda
  uint64_t seed = 17;

  int temporal_len() const;  // T'
  int feat_hw() const { return input_size / patch_stride; }
  void validate() const;

  static ModelConfig published(Backbone b);
  static ModelConfig desk(Backbone b);
  static ModelConfig miniature();
};

// Frozen-backbone output: T' feature maps of shape (feat_dim, H/p, W/p),
// stored with T' as the leading (batch) axis.
struct BackboneFeatures {
  Tensor<float> features;  // (T', f_D, H/p, W/p)
  int patch_stride = 32;
  int temporal_len = 0;
  int feat_dim = 0;
  bool absent = false;
};

namespace detail {

// Forward-only 3-D convolution over a single (C, T, H, W) volume.
struct Conv3d {
  int in_ch = 0, out_ch = 0, kt = 1, ks = 1, stride_t = 1, stride_s = 1, pad_t = 0, pad_s = 0, groups = 1;
  Tensor<float> w;  // (out_ch, in_ch/groups, kt, ks, ks)
  Tensor<float> b;

  void init(int in_c, int out_c, int kt_, int ks_, int st_, int ss_, int pt_, int ps_, int g, std::mt19937_64& rng);
  Tensor<float> forward(const Tensor<float>& x) const;
  int64_t param_count() const { return w.numel() + b.numel(); }
};

}  // namespace detail

// Frozen random-weight stand-ins for the published video backbones: the layer
// topology matches the originals at the tap, and per-channel RMS normalization
// at the tap keeps feature magnitudes comparable to trained networks.
class VideoBackbone {
 public:
  VideoBackbone(const ModelConfig& cfg);
  BackboneFeatures forward(const Tensor<float>& clip) const;  // clip (T, 3, H, W), normalized
  int64_t param_count() const { return param_count_; }
  uint64_t checksum() const;  // FNV-1a over raw weight bytes; freeze invariant

 private:
  Backbone kind_;
  int clip_len_, input_size_, temporal_stride_, feat_dim_;
  std::vector<detail::Conv3d> convs_;  // flat list, wired in forward
  struct UnitRef { int expand, dw, project, proj_skip; bool stride2; };   // x3d
  struct BlockRef { int c1, c2, c3, proj_skip; };                         // slow_r50
  std::vector<std::vector<UnitRef>> x3d_stages_;
  std::vector<std::vector<BlockRef>> slow_stages_;
  int stem_ = -1, tap_ = -1;
  int64_t param_count_ = 0;
};

// Head geometry derived from ModelConfig (everything the trainable part needs).
struct HeadSpec {
  int input_size = 224;
  int img_w1 = 24, img_w2 = 48, img_w3 = 96, img_trunk = 1104;
  int st_width = 208;
  std::vector<int> st_up = {192, 96, 96};
  int branch_out = 96;
  int feat_dim = 768, feat_hw = 7;
  int blocks = 2, cardinality = 8;
  int dec_pre = 96, dec_mid = 48;
  double post_sigma = 6.0;
  double prior_weight = 0.3;

  bool has_st() const { return feat_dim > 0; }
  int fused_channels() const { return has_st() ? 2 * branch_out : branch_out; }
};

HeadSpec head_spec(const ModelConfig& cfg);

// The trainable part: image encoder, spatio-temporal encoder, fusion decoder,
// and the differentiable post-processing chain. Templated so gradient checks
// can run the identical graph in double precision.
template <typename T>
class GazeHead {
 public:
  HeadSpec spec;

  void init(const HeadSpec& s, std::mt19937_64& rng);

  // (B, 3, H, W) -> (B, branch_out, H/4, W/4)
  Tensor<T> encode_image(const Tensor<T>& frames, bool keep = false);
  // (B, f_D, H/p, W/p) -> (B, branch_out, H/4, W/4)
  Tensor<T> encode_st(const Tensor<T>& feat, bool keep = false);
  // concat [S', I] (or I alone) -> raw (B, 1, H, W)
  Tensor<T> decode(const Tensor<T>& fused, bool keep = false);

  Tensor<T> forward(const Tensor<T>& frames, const Tensor<T>* st_feat, bool keep = false);
  void backward(const Tensor<T>& grad_raw);  // accumulates parameter gradients

  // out = normalize(blur(softplus(raw)) + lambda * prior); batched, differentiable
  Tensor<T> postprocess_fwd(const Tensor<T>& raw, const Tensor<T>& prior_grid, bool keep = false);
  Tensor<T> postprocess_bwd(const Tensor<T>& grad_out);

  std::vector<nn::Param<T>*> params();
  int64_t param_count();
  uint64_t grad_checksum();  // debugging aid for freeze tests

 private:
  // image branch
  nn::Conv2d<T> stem_a_, stem_b_, down_a_, down_b_;
  std::vector<nn::ResNeXtBlock<T>> img_blocks_;
  nn::ConvTranspose2d<T> img_up1_, img_up2_;
  nn::ReLU<T> i_r1_, i_r2_, i_r3_, i_r4_, i_r5_;
  // st branch
  nn::Conv2d<T> st_in_;
  std::vector<nn::ResNeXtBlock<T>> st_blocks_;
  std::vector<nn::ConvTranspose2d<T>> st_ups_;
  nn::ReLU<T> s_r1_;
  std::vector<nn::ReLU<T>> s_up_relus_;  // after all but the last convT
  // decoder
  nn::Conv2d<T> dec_pre_;
  nn::ConvTranspose2d<T> dec_up1_, dec_up2_;
  nn::ReLU<T> d_r1_, d_r2_;

  bool fused_has_st_ = false;
  // postprocess caches
  Tensor<T> pp_raw_, pp_out_;
  std::vector<T> pp_sums_;
  std::vector<T> pp_kernel_;
};

struct ParamCount {
  int64_t trainable = 0;
  int64_t frozen = 0;
  int64_t total() const { return trainable + frozen; }
};

class EcnModel {
 public:
  ModelConfig cfg;
  std::unique_ptr<VideoBackbone> backbone;  // null for Backbone::none
  GazeHead<float> head;
  CenterPrior prior;  // fitted on the training split; default centered

  static EcnModel create(const ModelConfig& cfg);

  BackboneFeatures extract_video_features(const Tensor<float>& clip) const;
  GridD predict(const ClipSample& clip);            // full pipeline, sums to 1
  Tensor<float> prior_tensor() const;               // prior grid as (1,1,H,W) float
};

// Normalized model input from stored uint8 frames; resizes to `size` when needed.
Tensor<float> clip_tensor(const std::vector<cv::Mat>& frames, int size);
Tensor<float> frame_tensor(const cv::Mat& frame, int size);

ParamCount count_parameters(const EcnModel& model);

// out = normalize(blur(softplus(raw), sigma) + lambda * prior.grid); the
// double-precision twin of GazeHead::postprocess_fwd for single maps.
GridD postprocess_map(const GridD& raw, const CenterPrior& prior, double sigma, double lambda);

void save_checkpoint(const EcnModel& model, const std::filesystem::path& path);
EcnModel load_checkpoint(const std::filesystem::path& path);

}  // namespace egogaze
