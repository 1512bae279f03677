#pragma once

#include "nucgrade/core_types.hpp"
#include "nucgrade/errors.hpp"
#include "nucgrade/graph.hpp"
#include "nucgrade/losses.hpp"
#include "nucgrade/postprocess.hpp"
#include "nucgrade/rng.hpp"

#include <array>
#include <deque>
#include <map>
#include <string>
#include <vector>

namespace nucgrade {

struct NetworkConfig {
  enum class Variant { kFull, kSingleHead };

  int input_h = 512;
  int input_w = 512;
  std::array<int, 5> backbone_widths = {64, 64, 128, 256, 512};
  std::array<int, 4> backbone_blocks = {3, 4, 6, 3};
  std::array<int, 3> hrfe_stream_widths = {16, 32, 64};
  int hrfe_exchanges = 2;
  int hrfe_blocks = 2;  // res-blocks per stream between exchanges
  std::array<int, 3> lunet_widths = {32, 64, 128};
  bool use_gc_attention = true;
  int n_final_classes = 5;
  int n_task_classes = 4;
  int min_input_divisor = 32;
  Variant variant = Variant::kFull;

  void validate() const {
    if (hrfe_stream_widths[0] >= hrfe_stream_widths[1] ||
        hrfe_stream_widths[1] >= hrfe_stream_widths[2]) {
      throw ConfigError("network: hrfe stream widths must strictly increase with coarser scale");
    }
    for (int v : backbone_widths)
      if (v < 1) throw ConfigError("network: backbone widths must be positive");
    for (int v : backbone_blocks)
      if (v < 1) throw ConfigError("network: backbone stages need at least one block");
    for (int v : lunet_widths)
      if (v < 1) throw ConfigError("network: lunet widths must be positive");
    if (hrfe_exchanges < 1 || hrfe_blocks < 1) {
      throw ConfigError("network: hrfe depth fields must be >= 1");
    }
    if (n_final_classes != 5 || n_task_classes != 4) {
      throw ConfigError("network: class counts are fixed at 5 final / 4 per task");
    }
    if (min_input_divisor < 16 || (min_input_divisor & (min_input_divisor - 1)) != 0) {
      throw ConfigError("network: min_input_divisor must be a power of two >= 16");
    }
    if (input_h % min_input_divisor != 0 || input_w % min_input_divisor != 0) {
      throw ConfigError("network: input size must be divisible by min_input_divisor");
    }
  }
};

// Composite connection: bilinear upsample to the target grid, 1x1 conv to the
// target width, batch normalization. The result is meant to be summed into
// the receiving stream input. Downscaling is rejected.
template <typename T>
int composite_connect(Graph<T>& g, int feature_id, Parameter<T>& w, Parameter<T>& gamma,
                      Parameter<T>& beta, BnStats<T>& stats, int out_h, int out_w) {
  const Tensor<T>& x = g.value(feature_id);
  if (out_h < x.h() || out_w < x.w()) {
    throw ConfigError("composite_connect: target below source resolution");
  }
  if (out_h % x.h() != 0 || out_w % x.w() != 0 || out_h / x.h() != out_w / x.w()) {
    throw ConfigError("composite_connect: target must be an integer multiple of the source");
  }
  int y = g.upsample_bilinear(feature_id, out_h / x.h());
  y = g.conv2d(y, w, nullptr, 1);
  return g.batch_norm(y, gamma, beta, stats);
}

// CHR-Net: shared backbone encoder, W-Net segmentation heads (binary decoder
// plus the lightweight distance net), two high-resolution classification
// branches with composite connections and auxiliary stems, and the fusion
// head. Templated on scalar so the whole model runs in double for gradient
// verification.
template <typename T>
class ChrNet {
 public:
  struct Features {
    int f0 = -1, f1 = -1, f2 = -1, f3 = -1, f4 = -1;  // 1/2 .. 1/32
  };

  ChrNet(const NetworkConfig& cfg, std::uint64_t seed) : cfg_(cfg), rng_(derive_seed(seed, 0x9e7)) {
    cfg_.validate();
    const auto& bw = cfg_.backbone_widths;
    stem_ = make_conv_bn("backbone.stem", 7, 3, bw[0], 2);
    int cin = bw[0];
    for (int s = 0; s < 4; ++s) {
      const std::string prefix = "backbone.stage" + std::to_string(s + 1);
      const int cout = bw[std::size_t(s + 1)];
      const int stride = s == 0 ? 1 : 2;  // stage1 follows the stem pool
      Stage stage;
      for (int b = 0; b < cfg_.backbone_blocks[std::size_t(s)]; ++b) {
        stage.blocks.push_back(make_res(prefix + ".block" + std::to_string(b), b == 0 ? cin : cout,
                                        cout, b == 0 ? stride : 1));
      }
      if (cfg_.use_gc_attention) stage.gc = make_gc(prefix + ".gc", cout);
      stages_[std::size_t(s)] = std::move(stage);
      cin = cout;
    }

    if (cfg_.variant == NetworkConfig::Variant::kFull) {
      // stage-1 decoder: one block per skip level, then a full-resolution block
      const std::array<int, 4> skip_w = {bw[3], bw[2], bw[1], bw[0]};
      int dec_in = bw[4];
      for (int i = 0; i < 4; ++i) {
        dec_[std::size_t(i)] =
            make_res("decoder.level" + std::to_string(3 - i), dec_in + skip_w[std::size_t(i)],
                     skip_w[std::size_t(i)], 1);
        dec_in = skip_w[std::size_t(i)];
      }
      dec_full_ = make_res("decoder.full", bw[0], bw[0], 1);
      binary_head_ = make_conv("decoder.head", 1, bw[0], 1, 1, true);

      // LU-Net over the predicted binary map
      const auto& lw = cfg_.lunet_widths;
      lunet_enc0_ = make_simple("lunet.enc0", 1, lw[0]);
      lunet_enc1_ = make_simple("lunet.enc1", lw[0], lw[1]);
      lunet_bottom_ = make_simple("lunet.bottom", lw[1], lw[2]);
      lunet_dec1_ = make_simple("lunet.dec1", lw[2] + lw[1], lw[1]);
      lunet_dec0_ = make_simple("lunet.dec0", lw[1] + lw[0], lw[0]);
      distance_head_ = make_conv("lunet.head", 1, lw[0], 1, 1, true);
    }

    const int n_tasks = cfg_.variant == NetworkConfig::Variant::kFull ? 2 : 1;
    const int head_classes =
        cfg_.variant == NetworkConfig::Variant::kFull ? cfg_.n_task_classes : cfg_.n_final_classes;
    if (cfg_.variant == NetworkConfig::Variant::kFull) {
      aux100_ = make_simple("aux100", 3, cfg_.hrfe_stream_widths[0]);
    }
    aux400_ = make_simple("aux400", 3, cfg_.hrfe_stream_widths[0]);
    for (int t = 0; t < n_tasks; ++t) {
      hrfes_.push_back(make_hrfe("hrfe" + std::to_string(t + 1), head_classes));
    }
    if (cfg_.variant == NetworkConfig::Variant::kFull) {
      fusion_ = make_conv("fusion", 1, 2 * cfg_.n_task_classes, cfg_.n_final_classes, 1, true);
    }
  }

  ChrNet(const ChrNet&) = delete;
  ChrNet& operator=(const ChrNet&) = delete;

  const NetworkConfig& config() const { return cfg_; }

  // --- forward pieces -------------------------------------------------------

  Features backbone_forward(Graph<T>& g, int image_id) {
    Features f;
    int x = conv_bn_relu(g, stem_, image_id);
    f.f0 = x;
    x = g.maxpool3x3s2(x);
    for (int s = 0; s < 4; ++s) {
      for (auto& block : stages_[std::size_t(s)].blocks) x = res_forward(g, block, x);
      if (stages_[std::size_t(s)].gc.enabled) x = gc_forward(g, stages_[std::size_t(s)].gc, x);
      (s == 0 ? f.f1 : s == 1 ? f.f2 : s == 2 ? f.f3 : f.f4) = x;
    }
    return f;
  }

  // U-Net style decoder over F0..F4, ending in the 1-channel sigmoid binary map.
  int decode_binary(Graph<T>& g, const Features& f) {
    const std::array<int, 4> skips = {f.f3, f.f2, f.f1, f.f0};
    int x = f.f4;
    for (int i = 0; i < 4; ++i) {
      const int skip = skips[std::size_t(i)];
      const int factor = g.value(skip).h() / g.value(x).h();
      x = g.upsample_bilinear(x, factor);
      x = g.concat_channels({x, skip});
      x = res_forward(g, dec_[std::size_t(i)], x);
    }
    x = g.upsample_bilinear(x, 2);
    x = res_forward(g, dec_full_, x);
    x = conv_forward(g, binary_head_, x);
    return g.sigmoid(x);
  }

  // Lightweight 3-level encoder-decoder from the binary probability map to
  // the sigmoid distance map.
  int lunet_forward(Graph<T>& g, int binary_id) {
    const int e0 = simple_forward(g, lunet_enc0_, binary_id);
    const int e1 = simple_forward(g, lunet_enc1_, g.maxpool3x3s2(e0));
    const int mid = simple_forward(g, lunet_bottom_, g.maxpool3x3s2(e1));
    int x = g.upsample_bilinear(mid, g.value(e1).h() / g.value(mid).h());
    x = simple_forward(g, lunet_dec1_, g.concat_channels({x, e1}));
    x = g.upsample_bilinear(x, g.value(e0).h() / g.value(x).h());
    x = simple_forward(g, lunet_dec0_, g.concat_channels({x, e0}));
    x = conv_forward(g, distance_head_, x);
    return g.sigmoid(x);
  }

  // 100x auxiliary stem: simple block on the quarter-scale image, upsampled
  // back to full resolution. 400x stem: simple block on the full image.
  int aux100_forward(Graph<T>& g, int aux_image_id) {
    return g.upsample_bilinear(simple_forward(g, aux100_, aux_image_id), 4);
  }
  int aux400_forward(Graph<T>& g, int image_id) { return simple_forward(g, aux400_, image_id); }

  // task: 0 -> task1 branch (100x aux), 1 -> task2 branch (400x aux)
  int hrfe_forward(Graph<T>& g, int task, const Features& f, int aux_feat_id) {
    Hrfe& h = hrfes_.at(std::size_t(task));
    const std::array<int, 3> taps = {f.f0, f.f1, f.f2};
    std::array<int, 3> streams{};
    for (int s = 0; s < 3; ++s) {
      ConvBn& comp = h.comp[std::size_t(s)];
      const Tensor<T>& tap = g.value(taps[std::size_t(s)]);
      streams[std::size_t(s)] = composite_connect(g, taps[std::size_t(s)], *comp.conv.w,
                                                  *comp.bn.gamma, *comp.bn.beta, *comp.bn.stats,
                                                  tap.h() * 2, tap.w() * 2);
    }
    streams[0] = g.add(streams[0], aux_feat_id);

    for (int e = 0; e < cfg_.hrfe_exchanges; ++e) {
      auto& stage = h.exchanges[std::size_t(e)];
      for (int s = 0; s < 3; ++s) {
        for (auto& block : stage.blocks[std::size_t(s)]) {
          streams[std::size_t(s)] = res_forward(g, block, streams[std::size_t(s)]);
        }
      }
      std::array<int, 3> fused{};
      for (int to = 0; to < 3; ++to) {
        int acc = streams[std::size_t(to)];
        for (int from = 0; from < 3; ++from) {
          if (from == to) continue;
          acc = g.add(acc, transition_forward(g, stage.fuse[std::size_t(to)][std::size_t(from)],
                                              streams[std::size_t(from)]));
        }
        fused[std::size_t(to)] = g.relu(acc);
      }
      streams = fused;
    }

    const int up1 = g.upsample_bilinear(streams[1], 2);
    const int up2 = g.upsample_bilinear(streams[2], 4);
    const int cat = g.concat_channels({streams[0], up1, up2});
    return g.softmax(conv_forward(g, h.head, cat));
  }

  int fusion_forward(Graph<T>& g, int task1_id, int task2_id) {
    const int cat = g.concat_channels({task1_id, task2_id});
    return g.softmax(conv_forward(g, fusion_, cat));
  }

  // Full forward pass. `image` is (N,H,W,3) in [0,1]; `aux100` is the
  // (N,H/4,W/4,3) quarter-scale image. Throws ConfigError when H or W is not
  // divisible by min_input_divisor, std::invalid_argument on an aux shape
  // mismatch.
  OutputIds<T> forward(Graph<T>& g, const Tensor<T>& image, const Tensor<T>& aux100) {
    if (image.h() % cfg_.min_input_divisor != 0 || image.w() % cfg_.min_input_divisor != 0) {
      throw ConfigError("forward: image size must be divisible by min_input_divisor");
    }
    if (aux100.n() != image.n() || aux100.h() != image.h() / 4 || aux100.w() != image.w() / 4 ||
        aux100.c() != 3) {
      throw std::invalid_argument("forward: aux100 must be the quarter-scale companion image");
    }
    const int img = g.input(image);
    const Features f = backbone_forward(g, img);
    OutputIds<T> out;
    if (cfg_.variant == NetworkConfig::Variant::kSingleHead) {
      const int aux = aux400_forward(g, img);
      out.final = hrfe_forward(g, 0, f, aux);
      return out;
    }
    out.binary = decode_binary(g, f);
    out.distance = lunet_forward(g, out.binary);
    const int aux1 = aux100_forward(g, g.input(aux100));
    const int aux2 = aux400_forward(g, img);
    out.task1 = hrfe_forward(g, 0, f, aux1);
    out.task2 = hrfe_forward(g, 1, f, aux2);
    out.final = fusion_forward(g, out.task1, out.task2);
    return out;
  }

  // Convenience evaluation pass (no tape, running BN statistics).
  NetworkOutputsT<T> infer(const Tensor<T>& image, const Tensor<T>& aux100) {
    Graph<T> g(false, false);
    const OutputIds<T> ids = forward(g, image, aux100);
    NetworkOutputsT<T> out;
    if (ids.binary >= 0) out.binary = g.value(ids.binary);
    if (ids.distance >= 0) out.distance = g.value(ids.distance);
    if (ids.task1 >= 0) out.task1 = g.value(ids.task1);
    if (ids.task2 >= 0) out.task2 = g.value(ids.task2);
    out.final = g.value(ids.final);
    return out;
  }

  // --- parameter access -----------------------------------------------------

  std::vector<Parameter<T>*> parameters() {
    std::vector<Parameter<T>*> out;
    out.reserve(params_.size());
    for (auto& p : params_) out.push_back(&p);
    return out;
  }
  std::vector<BnStats<T>*> bn_stats() {
    std::vector<BnStats<T>*> out;
    out.reserve(bnstats_.size());
    for (auto& s : bnstats_) out.push_back(&s);
    return out;
  }

  Parameter<T>* find_parameter(const std::string& name) {
    for (auto& p : params_)
      if (p.name == name) return &p;
    return nullptr;
  }

  void zero_grads() {
    for (auto& p : params_) p.zero_grad();
  }

  static bool is_backbone(const std::string& name) { return name.rfind("backbone.", 0) == 0; }

  void set_backbone_trainable(bool trainable) {
    for (auto& p : params_)
      if (is_backbone(p.name)) p.trainable = trainable;
  }

  // Copies externally supplied arrays into parameters with matching names
  // and shapes (backbone import hook). Returns the number applied.
  int load_named(const std::map<std::string, Tensor<T>>& values) {
    int applied = 0;
    for (auto& p : params_) {
      auto it = values.find(p.name);
      if (it == values.end() || !(it->second.shape() == p.value.shape())) continue;
      p.value.vec() = it->second.vec();
      ++applied;
    }
    return applied;
  }

 private:
  struct Conv {
    Parameter<T>* w = nullptr;
    Parameter<T>* b = nullptr;
    int stride = 1;
  };
  struct Norm {
    Parameter<T>* gamma = nullptr;
    Parameter<T>* beta = nullptr;
    BnStats<T>* stats = nullptr;
  };
  struct ConvBn {
    Conv conv;
    Norm bn;
  };
  struct Res {
    ConvBn c1, c2;
    bool has_proj = false;
    ConvBn proj;
  };
  struct Gc {
    bool enabled = false;
    Conv key;
    Conv reduce;
    Parameter<T>* ln_gamma = nullptr;
    Parameter<T>* ln_beta = nullptr;
    Conv expand;
  };
  struct Stage {
    std::vector<Res> blocks;
    Gc gc;
  };
  struct Simple {
    ConvBn c1, c2;
  };
  struct Transition {
    std::vector<ConvBn> steps;  // stride-2 convs (down) or 1x1 conv (up)
    int up_factor = 1;          // bilinear factor for upward transitions
  };
  struct ExchangeStage {
    std::array<std::vector<Res>, 3> blocks;
    std::array<std::array<Transition, 3>, 3> fuse;  // [to][from]
  };
  struct Hrfe {
    std::array<ConvBn, 3> comp;  // composite connections from F0..F2
    std::vector<ExchangeStage> exchanges;
    Conv head;
  };

  // --- construction helpers ---

  Parameter<T>* add_param(const std::string& name, Tensor<T> value) {
    params_.emplace_back(name, value);
    return &params_.back();
  }

  Tensor<T> he_tensor(int kh, int kw, int cin, int cout) {
    Tensor<T> t(kh, kw, cin, cout);
    const double std_dev = std::sqrt(2.0 / double(kh * kw * cin));
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = T(rng_.normal() * std_dev);
    return t;
  }

  Conv make_conv(const std::string& name, int k, int cin, int cout, int stride, bool bias) {
    Conv c;
    c.w = add_param(name + ".w", he_tensor(k, k, cin, cout));
    if (bias) {
      Tensor<T> b(1, 1, 1, cout);
      c.b = add_param(name + ".b", b);
    }
    c.stride = stride;
    return c;
  }

  Norm make_bn(const std::string& name, int c) {
    Norm n;
    Tensor<T> gamma(1, 1, 1, c);
    gamma.fill(T(1));
    n.gamma = add_param(name + ".gamma", gamma);
    n.beta = add_param(name + ".beta", Tensor<T>(1, 1, 1, c));
    bnstats_.emplace_back(name, c);
    n.stats = &bnstats_.back();
    return n;
  }

  ConvBn make_conv_bn(const std::string& name, int k, int cin, int cout, int stride) {
    return ConvBn{make_conv(name + ".conv", k, cin, cout, stride, false),
                  make_bn(name + ".bn", cout)};
  }

  Res make_res(const std::string& name, int cin, int cout, int stride) {
    Res r;
    r.c1 = make_conv_bn(name + ".a", 3, cin, cout, stride);
    r.c2 = make_conv_bn(name + ".b", 3, cout, cout, 1);
    if (stride != 1 || cin != cout) {
      r.has_proj = true;
      r.proj = make_conv_bn(name + ".proj", 1, cin, cout, stride);
    }
    return r;
  }

  Simple make_simple(const std::string& name, int cin, int cout) {
    return Simple{make_conv_bn(name + ".c1", 3, cin, cout, 1),
                  make_conv_bn(name + ".c2", 3, cout, cout, 1)};
  }

  Gc make_gc(const std::string& name, int c) {
    Gc gc;
    gc.enabled = true;
    const int mid = std::max(1, c / 4);
    gc.key = make_conv(name + ".key", 1, c, 1, 1, true);
    gc.reduce = make_conv(name + ".reduce", 1, c, mid, 1, true);
    Tensor<T> g(1, 1, 1, mid);
    g.fill(T(1));
    gc.ln_gamma = add_param(name + ".ln.gamma", g);
    gc.ln_beta = add_param(name + ".ln.beta", Tensor<T>(1, 1, 1, mid));
    gc.expand = make_conv(name + ".expand", 1, mid, c, 1, true);
    return gc;
  }

  Transition make_transition(const std::string& name, int from, int to, int w_from, int w_to) {
    Transition t;
    if (from < to) {  // high resolution to low: stride-2 conv chain
      int cin = w_from;
      for (int step = 0; step < to - from; ++step) {
        const int cout = step == to - from - 1 ? w_to : cin;
        t.steps.push_back(make_conv_bn(name + ".down" + std::to_string(step), 3, cin, cout, 2));
        cin = cout;
      }
    } else {  // low to high: upsample then 1x1 conv
      t.up_factor = 1 << (from - to);
      t.steps.push_back(make_conv_bn(name + ".up", 1, w_from, w_to, 1));
    }
    return t;
  }

  Hrfe make_hrfe(const std::string& name, int head_classes) {
    Hrfe h;
    const auto& sw = cfg_.hrfe_stream_widths;
    const auto& bw = cfg_.backbone_widths;
    for (int s = 0; s < 3; ++s) {
      h.comp[std::size_t(s)] = ConvBn{
          make_conv(name + ".comp" + std::to_string(s) + ".conv", 1, bw[std::size_t(s)],
                    sw[std::size_t(s)], 1, false),
          make_bn(name + ".comp" + std::to_string(s) + ".bn", sw[std::size_t(s)])};
    }
    for (int e = 0; e < cfg_.hrfe_exchanges; ++e) {
      ExchangeStage stage;
      const std::string ep = name + ".ex" + std::to_string(e);
      for (int s = 0; s < 3; ++s) {
        for (int b = 0; b < cfg_.hrfe_blocks; ++b) {
          stage.blocks[std::size_t(s)].push_back(
              make_res(ep + ".s" + std::to_string(s) + ".block" + std::to_string(b),
                       sw[std::size_t(s)], sw[std::size_t(s)], 1));
        }
      }
      for (int to = 0; to < 3; ++to) {
        for (int from = 0; from < 3; ++from) {
          if (from == to) continue;
          stage.fuse[std::size_t(to)][std::size_t(from)] = make_transition(
              ep + ".f" + std::to_string(from) + "to" + std::to_string(to), from, to,
              sw[std::size_t(from)], sw[std::size_t(to)]);
        }
      }
      h.exchanges.push_back(std::move(stage));
    }
    const int cat_w = sw[0] + sw[1] + sw[2];
    h.head = make_conv(name + ".head", 1, cat_w, head_classes, 1, true);
    return h;
  }

  // --- forward helpers ---

  int conv_forward(Graph<T>& g, const Conv& c, int x) {
    return g.conv2d(x, *c.w, c.b, c.stride);
  }
  int bn_forward(Graph<T>& g, const Norm& n, int x) {
    return g.batch_norm(x, *n.gamma, *n.beta, *n.stats);
  }
  int conv_bn_relu(Graph<T>& g, const ConvBn& cb, int x) {
    return g.relu(bn_forward(g, cb.bn, conv_forward(g, cb.conv, x)));
  }
  int res_forward(Graph<T>& g, const Res& r, int x) {
    int h = g.relu(bn_forward(g, r.c1.bn, conv_forward(g, r.c1.conv, x)));
    h = bn_forward(g, r.c2.bn, conv_forward(g, r.c2.conv, h));
    const int shortcut =
        r.has_proj ? bn_forward(g, r.proj.bn, conv_forward(g, r.proj.conv, x)) : x;
    return g.relu(g.add(h, shortcut));
  }
  int simple_forward(Graph<T>& g, const Simple& s, int x) {
    return conv_bn_relu(g, s.c2, conv_bn_relu(g, s.c1, x));
  }
  int gc_forward(Graph<T>& g, const Gc& gc, int x) {
    const int logits = conv_forward(g, gc.key, x);
    int ctx = g.spatial_attention_pool(x, logits);
    ctx = conv_forward(g, gc.reduce, ctx);
    ctx = g.layer_norm(ctx, *gc.ln_gamma, *gc.ln_beta);
    ctx = g.relu(ctx);
    ctx = conv_forward(g, gc.expand, ctx);
    return g.broadcast_add(x, ctx);
  }
  int transition_forward(Graph<T>& g, const Transition& t, int x) {
    if (t.up_factor > 1) {
      x = g.upsample_bilinear(x, t.up_factor);
      x = conv_forward(g, t.steps[0].conv, x);
      return bn_forward(g, t.steps[0].bn, x);
    }
    for (std::size_t i = 0; i < t.steps.size(); ++i) {
      x = bn_forward(g, t.steps[i].bn, conv_forward(g, t.steps[i].conv, x));
      if (i + 1 < t.steps.size()) x = g.relu(x);
    }
    return x;
  }

  NetworkConfig cfg_;
  RandomStream rng_;
  std::deque<Parameter<T>> params_;
  std::deque<BnStats<T>> bnstats_;

  ConvBn stem_;
  std::array<Stage, 4> stages_;
  std::array<Res, 4> dec_;
  Res dec_full_;
  Conv binary_head_;
  Simple lunet_enc0_, lunet_enc1_, lunet_bottom_, lunet_dec1_, lunet_dec0_;
  Conv distance_head_;
  Simple aux100_, aux400_;
  std::vector<Hrfe> hrfes_;
  Conv fusion_;
};

// Image helpers shared by training and inference.
template <typename T>
Tensor<T> image_to_tensor(const ImagePatch& image) {
  Tensor<T> t(1, image.height, image.width, 3);
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = T(image.pixels[std::size_t(i)]) / T(255);
  return t;
}

template <typename T>
Tensor<T> stack_image_tensors(const std::vector<Tensor<T>>& images) {
  if (images.empty()) return Tensor<T>();
  const auto& first = images[0];
  Tensor<T> out(int(images.size()), first.h(), first.w(), first.c());
  std::int64_t offset = 0;
  for (const auto& img : images) {
    std::copy(img.data(), img.data() + img.size(), out.data() + offset);
    offset += img.size();
  }
  return out;
}

}  // namespace nucgrade
