// Copyright 2026 The bitdet Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef BITDET_TOY_MODEL_HPP_
#define BITDET_TOY_MODEL_HPP_

#include <cstdint>
#include <vector>

#include "bitdet/proposal.hpp"
#include "bitdet/tensor.hpp"
#include "bitdet/toy_data.hpp"

namespace bitdet {
namespace toy {

// Small single-scale detector over 64 x 64 scenes:
//
//   stem    conv 3 -> 12, stride 2   (12, 32, 32)   always real
//   block2  conv 12 -> 24, stride 2  (24, 16, 16)   binarizable
//   block3  conv 24 -> 24, + skip    (24, 16, 16)   binarizable
//   block4  conv 24 -> 24, + skip    (24, 16, 16)   binarizable
//   neck    conv 24 -> 32            (32, 16, 16)   binarizable (stage 2)
//   heads   1x1 convs on the neck feature: objectness (1), class logits
//           (5), box offsets (4); always real
//
// Every backbone layer is conv -> leaky ReLU -> per-channel instance
// normalization with learned affine. Normalizing each scene independently
// keeps results deterministic and batch-order-free, and it keeps the
// pre-sign activations centered, which matters once layers binarize.
//
// A binarized layer computes sign(x) * (alpha * sign(W)) where alpha is
// the per-output-channel mean |W|; activation borders pad with -1 (the
// packed kernel has no zero), and gradients flow through both signs with
// the straight-through |.| <= 1 window plus the alpha chain.

inline constexpr double kLeak = 0.1;         // leaky ReLU negative slope
inline constexpr double kNormEpsilon = 1e-5;
inline constexpr std::size_t kStemWidth = 12;
inline constexpr std::size_t kBlockWidth = 24;
inline constexpr std::size_t kNeckWidth = 32;
inline constexpr std::size_t kBoxFields = 4;
// Proposed regions span this many feature cells on a side.
inline constexpr double kProposalExtent = 5.0;

struct DetectorOutput {
  Tensor obj;   // (1, 16, 16) objectness logits
  Tensor cls;   // (5, 16, 16) class logits
  Tensor box;   // (4, 16, 16) offsets (tx, ty, tw, th)
  Tensor neck;  // (32, 16, 16) neck feature map
};

// Per-layer intermediate values kept for the backward pass.
struct LayerTrace {
  Tensor input;                 // layer input, unpadded
  Tensor padded;                // padded conv operand (signs if binarized)
  Tensor pre;                   // conv output, before activation
  Tensor xhat;                  // normalized activation, before affine
  std::vector<double> inv_std;  // per-channel 1 / sqrt(var + eps)
};

struct ForwardTrace {
  std::vector<LayerTrace> layers;
  Tensor neck;  // final backbone output fed to the heads
};

struct LayerGrads {
  Tensor w;
  std::vector<double> gain;
  std::vector<double> bias;
};

struct HeadGrads {
  Tensor w;
  std::vector<double> b;
};

struct ModelGrads {
  std::vector<LayerGrads> layers;
  HeadGrads obj, cls, box;
};

class ToyDetector {
 public:
  struct Layer {
    ConvSpec spec;
    Tensor w;                  // (c_out, c_in, k, k)
    std::vector<double> gain;  // normalization affine, per channel
    std::vector<double> bias;
    bool skip = false;
    bool binarized = false;
  };
  struct Head {
    Tensor w;  // (c_out, neck_width, 1, 1)
    std::vector<double> b;
  };

  // Random initialization (He-scaled normals) from a dedicated stream.
  static ToyDetector init(std::uint64_t seed);

  // stage 0: all layers real; stage 1: blocks 2-4 binarized; stage 2:
  // blocks 2-4 and the neck binarized.
  void set_stage(int stage);
  int stage() const { return stage_; }

  DetectorOutput forward(const Tensor& image,
                         ForwardTrace* trace = nullptr) const;

  // Accumulates parameter gradients into *grads given the head-output
  // gradients; g_neck_extra (optional) is added to the neck feature
  // gradient before the backbone backward pass. `trace` must come from a
  // forward over the current parameters.
  void backward(const ForwardTrace& trace, const Tensor& g_obj,
                const Tensor& g_cls, const Tensor& g_box,
                const Tensor* g_neck_extra, ModelGrads* grads) const;

  ModelGrads make_grads() const;

  // Sum of per-layer mean-square binarization residuals over the layers
  // that are currently binarized (zero when none are).
  double reconstruction_penalty_sum() const;

  // Adds mu * d(reconstruction penalty)/dW to the gradients; the scale and
  // sign factors are treated as constants of the current weights.
  void add_reconstruction_grads(double mu, ModelGrads* grads) const;

  // Momentum SGD step: v = momentum * v + g; w -= lr * v. When clip_norm
  // is positive the gradients are first rescaled so their global L2 norm
  // does not exceed it.
  void sgd_step(const ModelGrads& grads, double lr, double momentum,
                double clip_norm, ModelGrads* velocity);

  const std::vector<Layer>& layers() const { return layers_; }
  const Head& obj_head() const { return obj_; }
  const Head& cls_head() const { return cls_; }
  const Head& box_head() const { return box_; }

 private:
  std::vector<Layer> layers_;
  Head obj_, cls_, box_;
  int stage_ = 0;
};

// Global gradient L2 norm (used by tests; sgd_step applies it).
double grad_global_norm(const ModelGrads& grads);

// Multiplies every gradient entry by `factor` (e.g. 1/batch).
void scale_grads(ModelGrads* grads, double factor);

// Top-n objectness cells (descending logit, raster order on ties) as
// square regions of kProposalExtent feature cells centered on the cell.
std::vector<Region> propose(const Tensor& obj_logits, std::size_t n);

// Ground-truth encoding: each object owns its center cell. Offsets are
// (tx, ty) = center displacement within the cell in cell units and
// (tw, th) = log(extent / 16 px).
struct CellTarget {
  std::size_t cy = 0;
  std::size_t cx = 0;
  double t[kBoxFields] = {0, 0, 0, 0};
  int cls = 0;
};
std::vector<CellTarget> encode_targets(const Scene& scene);
Box decode_box(std::size_t cy, std::size_t cx, const double t[kBoxFields]);

// Detection quality of one scene in [0, 1]: classification accuracy at the
// object center cells times the fraction of objects recovered by the top-k
// objectness cells (k = object count) with IoU >= 0.5 after greedy
// matching. Both factors must be right to score; an untrained detector
// scores 0.
double score_scene(const DetectorOutput& out, const Scene& scene);

// Mean score_scene over a scene list.
double evaluate(const ToyDetector& model, const std::vector<Scene>& scenes);

}  // namespace toy
}  // namespace bitdet

#endif  // BITDET_TOY_MODEL_HPP_
