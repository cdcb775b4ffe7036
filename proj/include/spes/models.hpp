#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "spes/graph.hpp"
#include "spes/params.hpp"
#include "spes/rng.hpp"

namespace spes {

enum class Family { cnn_divergent, cnn_convergent, cnn_transformer };

const char* to_string(Family f);
Family family_from_string(const std::string& s);

// Multi-scale 1D ResNet: shared stem, one residual branch per kernel size,
// global average pooling per branch, concatenation, linear projection to the
// embedding. Every residual block downsamples by 2.
struct MSResNetSpec {
  int in_channels = 1;
  std::vector<int> branch_kernel_sizes = {3, 5, 7};
  int blocks_per_branch = 2;
  int base_width = 32;
  int embedding_dim = 16;
  double fc_dropout = 0.0;

  void validate() const;
  size_t param_count() const;
};

struct TransformerSpec {
  int embedding_dim = 16;  // must be divisible by 8
  int num_layers = 2;
  double dropout = 0.46;
  int mlp_hidden = 0;  // 0 -> 4 * embedding_dim

  int num_heads() const { return embedding_dim / 8; }
  int hidden() const { return mlp_hidden > 0 ? mlp_hidden : 4 * embedding_dim; }
  void validate() const;
};

// One hidden layer of width embedding_dim, searched dropout, single logit out.
struct MlpHeadSpec {
  int in_dim = 16;
  double dropout = 0.0;
};

struct ModelConfig {
  Family family = Family::cnn_transformer;
  MSResNetSpec resnet;          // CNN input spec, or the per-channel embedder
  TransformerSpec transformer;  // used by cnn_transformer only
  double head_dropout = 0.0;

  void validate() const;
  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
};

template <typename T>
class Model {
 public:
  Model(ModelConfig cfg, uint64_t init_seed);

  const ModelConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }
  size_t param_count() const { return params_.total(); }

  // input {C, T}; CNN families require C == resnet.in_channels, the
  // Transformer accepts any C >= 1. rng drives dropout in train mode only.
  int forward_logit(Graph<T>& g, const Tensor<T>& input, bool train, Rng& rng);

  // standalone pieces, exposed for unit and gradient tests
  int resnet_embed(Graph<T>& g, int x, bool train, Rng& rng);
  int encode_tokens(Graph<T>& g, int tokens, bool train, Rng& rng);  // {C,E} -> {E}
  int head_logit(Graph<T>& g, int embedding, bool train, Rng& rng);
  int attention_block(Graph<T>& g, int x, int layer, bool train, Rng& rng);

  double predict_logit(const Tensor<T>& input);  // eval mode
  double predict(const Tensor<T>& input);        // sigmoid(logit)

 private:
  struct BlockIds {
    int w1, b1, w2, b2, ws, bs;
  };
  struct LayerIds {
    int ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo;
    int ln2_g, ln2_b, ff1_w, ff1_b, ff2_w, ff2_b;
  };

  ModelConfig cfg_;
  ParamStore<T> params_;

  int stem_w_ = -1, stem_b_ = -1;
  std::vector<std::vector<BlockIds>> branches_;
  int fc_w_ = -1, fc_b_ = -1;
  int cls_ = -1;
  std::vector<LayerIds> layers_;
  int lnf_g_ = -1, lnf_b_ = -1;
  int h1_w_ = -1, h1_b_ = -1, h2_w_ = -1, h2_b_ = -1;

  Tensor<T> uniform_init(const std::vector<int>& shape, int fan_in, Rng& rng);
  void build(Rng& rng);
};

using ModelF = Model<float>;
using ModelD = Model<double>;

extern template class Model<float>;
extern template class Model<double>;

}  // namespace spes
