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

#include "bitdet/toy_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "bitdet/rng.hpp"

namespace bitdet {
namespace toy {
namespace {

// Valid (unpadded) convolution: y[oc, oy, ox] += sum over (ic, ky, kx) of
// x[ic, oy*s + ky, ox*s + kx] * w[oc, ic, ky, kx]. y must be zeroed. The
// inner loop runs along contiguous output rows so it vectorizes.
void conv_fwd(const double* x, std::size_t cin, std::size_t hp,
              std::size_t wp, const double* w, std::size_t cout,
              std::size_t k, std::size_t s, double* y, std::size_t ho,
              std::size_t wo) {
  for (std::size_t oc = 0; oc < cout; ++oc) {
    double* ybase = y + oc * ho * wo;
    for (std::size_t ic = 0; ic < cin; ++ic) {
      const double* xbase = x + ic * hp * wp;
      const double* wbase = w + (oc * cin + ic) * k * k;
      for (std::size_t ky = 0; ky < k; ++ky) {
        for (std::size_t kx = 0; kx < k; ++kx) {
          const double wv = wbase[ky * k + kx];
          for (std::size_t oy = 0; oy < ho; ++oy) {
            const double* xrow = xbase + (oy * s + ky) * wp + kx;
            double* yrow = ybase + oy * wo;
            if (s == 1) {
              for (std::size_t ox = 0; ox < wo; ++ox) {
                yrow[ox] += wv * xrow[ox];
              }
            } else {
              for (std::size_t ox = 0; ox < wo; ++ox) {
                yrow[ox] += wv * xrow[ox * s];
              }
            }
          }
        }
      }
    }
  }
}

// Gradient with respect to the (padded) input; gx must be zeroed.
void conv_bwd_input(const double* gy, std::size_t cout, std::size_t ho,
                    std::size_t wo, const double* w, std::size_t cin,
                    std::size_t k, std::size_t s, double* gx, std::size_t hp,
                    std::size_t wp) {
  for (std::size_t oc = 0; oc < cout; ++oc) {
    const double* gybase = gy + oc * ho * wo;
    for (std::size_t ic = 0; ic < cin; ++ic) {
      double* gxbase = gx + ic * hp * wp;
      const double* wbase = w + (oc * cin + ic) * k * k;
      for (std::size_t ky = 0; ky < k; ++ky) {
        for (std::size_t kx = 0; kx < k; ++kx) {
          const double wv = wbase[ky * k + kx];
          for (std::size_t oy = 0; oy < ho; ++oy) {
            const double* gyrow = gybase + oy * wo;
            double* gxrow = gxbase + (oy * s + ky) * wp + kx;
            if (s == 1) {
              for (std::size_t ox = 0; ox < wo; ++ox) {
                gxrow[ox] += wv * gyrow[ox];
              }
            } else {
              for (std::size_t ox = 0; ox < wo; ++ox) {
                gxrow[ox * s] += wv * gyrow[ox];
              }
            }
          }
        }
      }
    }
  }
}

// Gradient with respect to the weights; accumulates into gw.
void conv_bwd_weights(const double* x, std::size_t cin, std::size_t hp,
                      std::size_t wp, const double* gy, std::size_t cout,
                      std::size_t ho, std::size_t wo, std::size_t k,
                      std::size_t s, double* gw) {
  for (std::size_t oc = 0; oc < cout; ++oc) {
    const double* gybase = gy + oc * ho * wo;
    for (std::size_t ic = 0; ic < cin; ++ic) {
      const double* xbase = x + ic * hp * wp;
      double* gwbase = gw + (oc * cin + ic) * k * k;
      for (std::size_t ky = 0; ky < k; ++ky) {
        for (std::size_t kx = 0; kx < k; ++kx) {
          double acc = 0.0;
          for (std::size_t oy = 0; oy < ho; ++oy) {
            const double* xrow = xbase + (oy * s + ky) * wp + kx;
            const double* gyrow = gybase + oy * wo;
            if (s == 1) {
              for (std::size_t ox = 0; ox < wo; ++ox) {
                acc += gyrow[ox] * xrow[ox];
              }
            } else {
              for (std::size_t ox = 0; ox < wo; ++ox) {
                acc += gyrow[ox] * xrow[ox * s];
              }
            }
          }
          gwbase[ky * k + kx] += acc;
        }
      }
    }
  }
}

// Extracts the interior (C, H, W) block of a padded (C, H+2p, W+2p) grad.
Tensor crop_interior(const Tensor& padded, std::size_t padding,
                     std::size_t h, std::size_t w) {
  const std::size_t c = padded.dim(0);
  const std::size_t hp = padded.dim(1);
  const std::size_t wp = padded.dim(2);
  Tensor out({c, h, w});
  for (std::size_t ic = 0; ic < c; ++ic) {
    for (std::size_t y = 0; y < h; ++y) {
      const double* src =
          padded.data() + (ic * hp + y + padding) * wp + padding;
      std::copy(src, src + w, out.data() + (ic * h + y) * w);
    }
  }
  return out;
}

Tensor sign_tensor(const Tensor& x) {
  Tensor s(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    s[i] = x[i] > 0.0 ? 1.0 : -1.0;
  }
  return s;
}

// Per-output-channel mean |w| and the corresponding +/-alpha weights.
void effective_binary_weights(const Tensor& w, std::vector<double>* alphas,
                              Tensor* wq) {
  const std::size_t cout = w.dim(0);
  const std::size_t per = w.size() / cout;
  alphas->assign(cout, 0.0);
  *wq = Tensor(w.shape());
  for (std::size_t oc = 0; oc < cout; ++oc) {
    const double* src = w.data() + oc * per;
    double a = 0.0;
    for (std::size_t i = 0; i < per; ++i) a += std::abs(src[i]);
    a /= static_cast<double>(per);
    if (a == 0.0) {
      throw std::runtime_error(
          "binarized layer: output channel " + std::to_string(oc) +
          " collapsed to all-zero weights");
    }
    (*alphas)[oc] = a;
    double* dst = wq->data() + oc * per;
    for (std::size_t i = 0; i < per; ++i) {
      dst[i] = src[i] > 0.0 ? a : -a;
    }
  }
}

struct HeadOut {
  Tensor y;
};

Tensor head_forward(const Tensor& neck, const ToyDetector::Head& head) {
  const std::size_t cin = neck.dim(0);
  const std::size_t hw = neck.dim(1) * neck.dim(2);
  const std::size_t cout = head.w.dim(0);
  Tensor y({cout, neck.dim(1), neck.dim(2)});
  for (std::size_t oc = 0; oc < cout; ++oc) {
    double* yrow = y.data() + oc * hw;
    for (std::size_t i = 0; i < hw; ++i) yrow[i] = head.b[oc];
    for (std::size_t ic = 0; ic < cin; ++ic) {
      const double wv = head.w.at(oc, ic, 0, 0);
      const double* xrow = neck.data() + ic * hw;
      for (std::size_t i = 0; i < hw; ++i) yrow[i] += wv * xrow[i];
    }
  }
  return y;
}

void head_backward(const Tensor& neck, const ToyDetector::Head& head,
                   const Tensor& gy, HeadGrads* hg, Tensor* g_neck) {
  const std::size_t cin = neck.dim(0);
  const std::size_t hw = neck.dim(1) * neck.dim(2);
  const std::size_t cout = head.w.dim(0);
  for (std::size_t oc = 0; oc < cout; ++oc) {
    const double* gyrow = gy.data() + oc * hw;
    double gb = 0.0;
    for (std::size_t i = 0; i < hw; ++i) gb += gyrow[i];
    hg->b[oc] += gb;
    for (std::size_t ic = 0; ic < cin; ++ic) {
      const double* xrow = neck.data() + ic * hw;
      double* gxrow = g_neck->data() + ic * hw;
      const double wv = head.w.at(oc, ic, 0, 0);
      double gw = 0.0;
      for (std::size_t i = 0; i < hw; ++i) {
        gw += gyrow[i] * xrow[i];
        gxrow[i] += wv * gyrow[i];
      }
      hg->w.at(oc, ic, 0, 0) += gw;
    }
  }
}

void he_init(Tensor* w, Rng* rng) {
  const double fan_in = static_cast<double>(w->size() / w->dim(0));
  const double std_dev = std::sqrt(2.0 / fan_in);
  for (std::size_t i = 0; i < w->size(); ++i) {
    (*w)[i] = rng->normal() * std_dev;
  }
}

}  // namespace

ToyDetector ToyDetector::init(std::uint64_t seed) {
  Rng rng(seed);
  ToyDetector m;
  auto add_layer = [&](std::size_t cin, std::size_t cout, std::size_t kernel,
                       std::size_t stride, bool skip) {
    Layer l;
    l.spec = ConvSpec{cin, cout, kernel, stride, 1};
    l.w = Tensor({cout, cin, kernel, kernel});
    he_init(&l.w, &rng);
    l.gain.assign(cout, 1.0);
    l.bias.assign(cout, 0.0);
    l.skip = skip;
    m.layers_.push_back(std::move(l));
  };
  // Downsampling layers use 4x4 kernels: with stride 2 and padding 1 an
  // even kernel tiles the even image extents exactly, which the conv
  // geometry contract requires.
  add_layer(kImageChannels, kStemWidth, 4, 2, false);  // stem
  add_layer(kStemWidth, kBlockWidth, 4, 2, false);     // block2
  add_layer(kBlockWidth, kBlockWidth, 3, 1, true);     // block3
  add_layer(kBlockWidth, kBlockWidth, 3, 1, true);     // block4
  add_layer(kBlockWidth, kNeckWidth, 3, 1, false);     // neck

  auto make_head = [&](std::size_t cout, double bias_init) {
    Head h;
    h.w = Tensor({cout, kNeckWidth, 1, 1});
    he_init(&h.w, &rng);
    h.b.assign(cout, bias_init);
    return h;
  };
  // Objectness starts biased negative: most cells are background.
  m.obj_ = make_head(1, -2.0);
  m.cls_ = make_head(kNumClasses, 0.0);
  m.box_ = make_head(kBoxFields, 0.0);
  return m;
}

void ToyDetector::set_stage(int stage) {
  if (stage < 0 || stage > 2) {
    throw std::invalid_argument("ToyDetector stage must be 0, 1, or 2");
  }
  stage_ = stage;
  // layers_: 0 stem, 1..3 blocks, 4 neck.
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (i == 0) {
      layers_[i].binarized = false;
    } else if (i < layers_.size() - 1) {
      layers_[i].binarized = stage >= 1;
    } else {
      layers_[i].binarized = stage >= 2;
    }
  }
}

DetectorOutput ToyDetector::forward(const Tensor& image,
                                    ForwardTrace* trace) const {
  if (image.rank() != 3 || image.dim(0) != kImageChannels) {
    throw std::invalid_argument("ToyDetector::forward: bad image shape " +
                                shape_to_string(image.shape()));
  }
  if (trace) {
    trace->layers.clear();
    trace->layers.resize(layers_.size());
  }

  Tensor cur = image;
  ForwardTrace local;  // used when the caller does not want a trace
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    const Layer& l = layers_[li];
    LayerTrace& tr = trace ? trace->layers[li] : local.layers.emplace_back();
    tr.input = std::move(cur);

    Tensor wq;
    const Tensor* weights = &l.w;
    if (l.binarized) {
      std::vector<double> alphas;
      effective_binary_weights(l.w, &alphas, &wq);
      weights = &wq;
      tr.padded = pad_spatial(sign_tensor(tr.input), l.spec.padding, -1.0);
    } else {
      tr.padded = pad_spatial(tr.input, l.spec.padding, 0.0);
    }

    const std::size_t hp = tr.padded.dim(1);
    const std::size_t wp = tr.padded.dim(2);
    const auto [ho, wo] = l.spec.output_dims(tr.input.dim(1),
                                             tr.input.dim(2));
    tr.pre = Tensor({l.spec.c_out, ho, wo});
    conv_fwd(tr.padded.data(), l.spec.c_in, hp, wp, weights->data(),
             l.spec.c_out, l.spec.kernel, l.spec.stride, tr.pre.data(), ho,
             wo);

    // Leaky ReLU, then per-channel normalization with learned affine.
    const std::size_t per = ho * wo;
    tr.xhat = Tensor(tr.pre.shape());
    tr.inv_std.assign(l.spec.c_out, 0.0);
    Tensor out(tr.pre.shape());
    for (std::size_t c = 0; c < l.spec.c_out; ++c) {
      const double* pre = tr.pre.data() + c * per;
      double* xh = tr.xhat.data() + c * per;
      double* o = out.data() + c * per;
      double mean = 0.0;
      for (std::size_t i = 0; i < per; ++i) {
        xh[i] = pre[i] > 0.0 ? pre[i] : kLeak * pre[i];  // activation
        mean += xh[i];
      }
      mean /= static_cast<double>(per);
      double var = 0.0;
      for (std::size_t i = 0; i < per; ++i) {
        const double d = xh[i] - mean;
        var += d * d;
      }
      var /= static_cast<double>(per);
      const double inv = 1.0 / std::sqrt(var + kNormEpsilon);
      tr.inv_std[c] = inv;
      const double g = l.gain[c];
      const double b = l.bias[c];
      for (std::size_t i = 0; i < per; ++i) {
        xh[i] = (xh[i] - mean) * inv;
        o[i] = g * xh[i] + b;
      }
    }
    if (l.skip) {
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += tr.input[i];
    }
    cur = std::move(out);
  }

  DetectorOutput det;
  det.neck = std::move(cur);
  det.obj = head_forward(det.neck, obj_);
  det.cls = head_forward(det.neck, cls_);
  det.box = head_forward(det.neck, box_);
  if (trace) trace->neck = det.neck;
  return det;
}

ModelGrads ToyDetector::make_grads() const {
  ModelGrads g;
  g.layers.resize(layers_.size());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    g.layers[i].w = Tensor(layers_[i].w.shape());
    g.layers[i].gain.assign(layers_[i].gain.size(), 0.0);
    g.layers[i].bias.assign(layers_[i].bias.size(), 0.0);
  }
  g.obj = HeadGrads{Tensor(obj_.w.shape()),
                    std::vector<double>(obj_.b.size(), 0.0)};
  g.cls = HeadGrads{Tensor(cls_.w.shape()),
                    std::vector<double>(cls_.b.size(), 0.0)};
  g.box = HeadGrads{Tensor(box_.w.shape()),
                    std::vector<double>(box_.b.size(), 0.0)};
  return g;
}

void ToyDetector::backward(const ForwardTrace& trace, const Tensor& g_obj,
                           const Tensor& g_cls, const Tensor& g_box,
                           const Tensor* g_neck_extra,
                           ModelGrads* grads) const {
  if (trace.layers.size() != layers_.size()) {
    throw std::invalid_argument("ToyDetector::backward: trace does not match");
  }
  Tensor g_neck(trace.neck.shape());
  head_backward(trace.neck, obj_, g_obj, &grads->obj, &g_neck);
  head_backward(trace.neck, cls_, g_cls, &grads->cls, &g_neck);
  head_backward(trace.neck, box_, g_box, &grads->box, &g_neck);
  if (g_neck_extra) {
    if (!g_neck_extra->same_shape(g_neck)) {
      throw std::invalid_argument(
          "ToyDetector::backward: extra neck gradient shape mismatch");
    }
    for (std::size_t i = 0; i < g_neck.size(); ++i) {
      g_neck[i] += (*g_neck_extra)[i];
    }
  }

  Tensor g_out = std::move(g_neck);
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const Layer& l = layers_[li];
    const LayerTrace& tr = trace.layers[li];
    const std::size_t cout = l.spec.c_out;
    const std::size_t per = tr.pre.dim(1) * tr.pre.dim(2);

    // Normalization backward: out = gain * xhat + bias (+ skip input).
    Tensor g_act(tr.pre.shape());
    LayerGrads& lg = grads->layers[li];
    for (std::size_t c = 0; c < cout; ++c) {
      const double* go = g_out.data() + c * per;
      const double* xh = tr.xhat.data() + c * per;
      double* ga = g_act.data() + c * per;
      double sum_go = 0.0, sum_goxh = 0.0;
      for (std::size_t i = 0; i < per; ++i) {
        sum_go += go[i];
        sum_goxh += go[i] * xh[i];
      }
      lg.bias[c] += sum_go;
      lg.gain[c] += sum_goxh;
      const double g = l.gain[c];
      const double inv = tr.inv_std[c];
      const double mean_gxh = g * sum_go / static_cast<double>(per);
      const double mean_gxh_xh = g * sum_goxh / static_cast<double>(per);
      for (std::size_t i = 0; i < per; ++i) {
        ga[i] = inv * (g * go[i] - mean_gxh - xh[i] * mean_gxh_xh);
      }
    }

    // Activation backward into the conv output.
    Tensor g_pre(tr.pre.shape());
    for (std::size_t i = 0; i < g_pre.size(); ++i) {
      g_pre[i] = g_act[i] * (tr.pre[i] > 0.0 ? 1.0 : kLeak);
    }

    // Convolution backward.
    const std::size_t hp = tr.padded.dim(1);
    const std::size_t wp = tr.padded.dim(2);
    const std::size_t h = tr.input.dim(1);
    const std::size_t w = tr.input.dim(2);
    Tensor g_padded({l.spec.c_in, hp, wp});
    if (l.binarized) {
      std::vector<double> alphas;
      Tensor wq;
      effective_binary_weights(l.w, &alphas, &wq);

      // Gradient w.r.t. the +/-alpha weights, then the chain into the
      // real weights: the straight-through window for the sign, plus the
      // mean-|w| path for alpha.
      Tensor g_wq(l.w.shape());
      conv_bwd_weights(tr.padded.data(), l.spec.c_in, hp, wp, g_pre.data(),
                       cout, tr.pre.dim(1), tr.pre.dim(2), l.spec.kernel,
                       l.spec.stride, g_wq.data());
      const std::size_t per_w = l.w.size() / cout;
      for (std::size_t oc = 0; oc < cout; ++oc) {
        const double* wrow = l.w.data() + oc * per_w;
        const double* gq = g_wq.data() + oc * per_w;
        double* gw = lg.w.data() + oc * per_w;
        double alpha_path = 0.0;
        for (std::size_t i = 0; i < per_w; ++i) {
          alpha_path += gq[i] * (wrow[i] > 0.0 ? 1.0 : -1.0);
        }
        alpha_path /= static_cast<double>(per_w);
        const double a = alphas[oc];
        for (std::size_t i = 0; i < per_w; ++i) {
          const double ste = std::abs(wrow[i]) <= 1.0 ? a * gq[i] : 0.0;
          gw[i] += ste + (wrow[i] > 0.0 ? 1.0 : -1.0) * alpha_path;
        }
      }

      conv_bwd_input(g_pre.data(), cout, tr.pre.dim(1), tr.pre.dim(2),
                     wq.data(), l.spec.c_in, l.spec.kernel, l.spec.stride,
                     g_padded.data(), hp, wp);
      Tensor g_sign = crop_interior(g_padded, l.spec.padding, h, w);
      // Straight-through window on the activation sign.
      Tensor g_in(tr.input.shape());
      for (std::size_t i = 0; i < g_in.size(); ++i) {
        g_in[i] =
            std::abs(tr.input[i]) <= 1.0 ? g_sign[i] : 0.0;
      }
      if (l.skip) {
        for (std::size_t i = 0; i < g_in.size(); ++i) g_in[i] += g_out[i];
      }
      g_out = std::move(g_in);
    } else {
      conv_bwd_weights(tr.padded.data(), l.spec.c_in, hp, wp, g_pre.data(),
                       cout, tr.pre.dim(1), tr.pre.dim(2), l.spec.kernel,
                       l.spec.stride, lg.w.data());
      conv_bwd_input(g_pre.data(), cout, tr.pre.dim(1), tr.pre.dim(2),
                     l.w.data(), l.spec.c_in, l.spec.kernel, l.spec.stride,
                     g_padded.data(), hp, wp);
      Tensor g_in = crop_interior(g_padded, l.spec.padding, h, w);
      if (l.skip) {
        for (std::size_t i = 0; i < g_in.size(); ++i) g_in[i] += g_out[i];
      }
      g_out = std::move(g_in);
    }
  }
}

double ToyDetector::reconstruction_penalty_sum() const {
  double total = 0.0;
  for (const Layer& l : layers_) {
    if (!l.binarized) continue;
    const std::size_t cout = l.spec.c_out;
    const std::size_t per = l.w.size() / cout;
    double layer_sum = 0.0;
    for (std::size_t oc = 0; oc < cout; ++oc) {
      const double* w = l.w.data() + oc * per;
      double a = 0.0;
      for (std::size_t i = 0; i < per; ++i) a += std::abs(w[i]);
      a /= static_cast<double>(per);
      for (std::size_t i = 0; i < per; ++i) {
        const double d = w[i] - (w[i] > 0.0 ? a : -a);
        layer_sum += d * d;
      }
    }
    total += layer_sum / static_cast<double>(l.w.size());
  }
  return total;
}

void ToyDetector::add_reconstruction_grads(double mu,
                                           ModelGrads* grads) const {
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    const Layer& l = layers_[li];
    if (!l.binarized) continue;
    const std::size_t cout = l.spec.c_out;
    const std::size_t per = l.w.size() / cout;
    const double scale = 2.0 * mu / static_cast<double>(l.w.size());
    for (std::size_t oc = 0; oc < cout; ++oc) {
      const double* w = l.w.data() + oc * per;
      double* gw = grads->layers[li].w.data() + oc * per;
      double a = 0.0;
      for (std::size_t i = 0; i < per; ++i) a += std::abs(w[i]);
      a /= static_cast<double>(per);
      for (std::size_t i = 0; i < per; ++i) {
        gw[i] += scale * (w[i] - (w[i] > 0.0 ? a : -a));
      }
    }
  }
}

namespace {

template <class Fn>
void for_each_chunk(ToyDetector::Layer* layers, std::size_t n_layers,
                    ToyDetector::Head* heads[3], ModelGrads* g, ModelGrads* v,
                    Fn fn) {
  for (std::size_t i = 0; i < n_layers; ++i) {
    fn(layers[i].w.data(), g->layers[i].w.data(), v->layers[i].w.data(),
       layers[i].w.size());
    fn(layers[i].gain.data(), g->layers[i].gain.data(),
       v->layers[i].gain.data(), layers[i].gain.size());
    fn(layers[i].bias.data(), g->layers[i].bias.data(),
       v->layers[i].bias.data(), layers[i].bias.size());
  }
  HeadGrads* hg[3] = {&g->obj, &g->cls, &g->box};
  HeadGrads* hv[3] = {&v->obj, &v->cls, &v->box};
  for (int i = 0; i < 3; ++i) {
    fn(heads[i]->w.data(), hg[i]->w.data(), hv[i]->w.data(),
       heads[i]->w.size());
    fn(heads[i]->b.data(), hg[i]->b.data(), hv[i]->b.data(),
       heads[i]->b.size());
  }
}

double grads_sq_sum(const ModelGrads& g) {
  double sq = 0.0;
  auto add = [&sq](const double* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) sq += p[i] * p[i];
  };
  for (const LayerGrads& lg : g.layers) {
    add(lg.w.data(), lg.w.size());
    add(lg.gain.data(), lg.gain.size());
    add(lg.bias.data(), lg.bias.size());
  }
  for (const HeadGrads* hg : {&g.obj, &g.cls, &g.box}) {
    add(hg->w.data(), hg->w.size());
    add(hg->b.data(), hg->b.size());
  }
  return sq;
}

}  // namespace

double grad_global_norm(const ModelGrads& grads) {
  return std::sqrt(grads_sq_sum(grads));
}

void scale_grads(ModelGrads* grads, double factor) {
  auto mul = [factor](double* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) p[i] *= factor;
  };
  for (LayerGrads& lg : grads->layers) {
    mul(lg.w.data(), lg.w.size());
    mul(lg.gain.data(), lg.gain.size());
    mul(lg.bias.data(), lg.bias.size());
  }
  for (HeadGrads* hg : {&grads->obj, &grads->cls, &grads->box}) {
    mul(hg->w.data(), hg->w.size());
    mul(hg->b.data(), hg->b.size());
  }
}

void ToyDetector::sgd_step(const ModelGrads& grads, double lr,
                           double momentum, double clip_norm,
                           ModelGrads* velocity) {
  double scale = 1.0;
  if (clip_norm > 0.0) {
    const double norm = grad_global_norm(grads);
    if (norm > clip_norm) scale = clip_norm / norm;
  }
  ToyDetector::Head* heads[3] = {&obj_, &cls_, &box_};
  // for_each_chunk wants mutable grads; the lambda only reads them.
  ModelGrads& g = const_cast<ModelGrads&>(grads);
  for_each_chunk(layers_.data(), layers_.size(), heads, &g, velocity,
                 [lr, momentum, scale](double* w, double* gp, double* vp,
                                       std::size_t n) {
                   for (std::size_t i = 0; i < n; ++i) {
                     vp[i] = momentum * vp[i] + scale * gp[i];
                     w[i] -= lr * vp[i];
                   }
                 });
}

std::vector<Region> propose(const Tensor& obj_logits, std::size_t n) {
  if (obj_logits.rank() != 3 || obj_logits.dim(0) != 1) {
    throw std::invalid_argument("propose: objectness must be (1, H, W)");
  }
  const std::size_t cells = obj_logits.dim(1) * obj_logits.dim(2);
  n = std::min(n, cells);
  if (n == 0) throw std::invalid_argument("propose: need at least one cell");

  std::vector<std::size_t> order(cells);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (obj_logits[a] != obj_logits[b]) return obj_logits[a] > obj_logits[b];
    return a < b;
  });

  const std::size_t grid_w = obj_logits.dim(2);
  std::vector<Region> regions;
  regions.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double cy = static_cast<double>(order[i] / grid_w);
    const double cx = static_cast<double>(order[i] % grid_w);
    regions.push_back(Region{cx + 0.5 - kProposalExtent / 2.0,
                             cy + 0.5 - kProposalExtent / 2.0,
                             kProposalExtent, kProposalExtent});
  }
  return regions;
}

std::vector<CellTarget> encode_targets(const Scene& scene) {
  std::vector<CellTarget> targets;
  targets.reserve(scene.objects.size());
  for (const Box& b : scene.objects) {
    CellTarget t;
    const double cx_px = b.x + b.w / 2.0;
    const double cy_px = b.y + b.h / 2.0;
    t.cx = std::min<std::size_t>(
        static_cast<std::size_t>(cx_px / kCellSize), kGridSize - 1);
    t.cy = std::min<std::size_t>(
        static_cast<std::size_t>(cy_px / kCellSize), kGridSize - 1);
    t.t[0] = cx_px / kCellSize - (static_cast<double>(t.cx) + 0.5);
    t.t[1] = cy_px / kCellSize - (static_cast<double>(t.cy) + 0.5);
    t.t[2] = std::log(b.w / 16.0);
    t.t[3] = std::log(b.h / 16.0);
    t.cls = b.cls;
    targets.push_back(t);
  }
  return targets;
}

Box decode_box(std::size_t cy, std::size_t cx, const double t[kBoxFields]) {
  // Untrained heads can emit arbitrary logits; clamp so decoding stays
  // finite. Valid targets are well inside these ranges.
  const double tx = std::clamp(t[0], -2.0, 2.0);
  const double ty = std::clamp(t[1], -2.0, 2.0);
  const double tw = std::clamp(t[2], -4.0, 4.0);
  const double th = std::clamp(t[3], -4.0, 4.0);
  const double cx_px = (static_cast<double>(cx) + 0.5 + tx) * kCellSize;
  const double cy_px = (static_cast<double>(cy) + 0.5 + ty) * kCellSize;
  const double w = 16.0 * std::exp(tw);
  const double h = 16.0 * std::exp(th);
  return Box{cx_px - w / 2.0, cy_px - h / 2.0, w, h, 0};
}

double score_scene(const DetectorOutput& out, const Scene& scene) {
  const std::size_t n_obj = scene.objects.size();
  if (n_obj == 0) return 0.0;
  const std::vector<CellTarget> targets = encode_targets(scene);

  // Classification accuracy at the object center cells.
  std::size_t correct = 0;
  for (const CellTarget& t : targets) {
    int best = 0;
    double best_v = out.cls.at(0, t.cy, t.cx);
    for (std::size_t c = 1; c < kNumClasses; ++c) {
      const double v = out.cls.at(c, t.cy, t.cx);
      if (v > best_v) {
        best_v = v;
        best = static_cast<int>(c);
      }
    }
    if (best == t.cls) ++correct;
  }
  const double cls_acc =
      static_cast<double>(correct) / static_cast<double>(n_obj);

  // Localization: decode boxes at the top objectness cells and greedily
  // match against ground truth.
  const std::size_t cells = kGridSize * kGridSize;
  std::vector<std::size_t> order(cells);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (out.obj[a] != out.obj[b]) return out.obj[a] > out.obj[b];
    return a < b;
  });
  std::vector<bool> matched(n_obj, false);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n_obj; ++i) {
    const std::size_t cy = order[i] / kGridSize;
    const std::size_t cx = order[i] % kGridSize;
    double t[kBoxFields];
    for (std::size_t f = 0; f < kBoxFields; ++f) t[f] = out.box.at(f, cy, cx);
    const Box pred = decode_box(cy, cx, t);
    double best_iou = 0.0;
    std::size_t best_j = n_obj;
    for (std::size_t j = 0; j < n_obj; ++j) {
      if (matched[j]) continue;
      const double iou = box_iou(pred, scene.objects[j]);
      if (iou > best_iou) {
        best_iou = iou;
        best_j = j;
      }
    }
    if (best_j < n_obj && best_iou >= 0.5) {
      matched[best_j] = true;
      ++hits;
    }
  }
  const double hit_rate =
      static_cast<double>(hits) / static_cast<double>(n_obj);
  return cls_acc * hit_rate;
}

double evaluate(const ToyDetector& model, const std::vector<Scene>& scenes) {
  if (scenes.empty()) {
    throw std::invalid_argument("evaluate: empty scene list");
  }
  double total = 0.0;
  for (const Scene& s : scenes) {
    total += score_scene(model.forward(s.image), s);
  }
  return total / static_cast<double>(scenes.size());
}

}  // namespace toy
}  // namespace bitdet
