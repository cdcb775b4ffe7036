#include "spes/models.hpp"

#include <json.hpp>

using nlohmann::json;

namespace spes {

const char* to_string(Family f) {
  switch (f) {
    case Family::cnn_divergent: return "cnn_divergent";
    case Family::cnn_convergent: return "cnn_convergent";
    case Family::cnn_transformer: return "cnn_transformer";
  }
  return "cnn_transformer";
}

Family family_from_string(const std::string& s) {
  if (s == "cnn_divergent") return Family::cnn_divergent;
  if (s == "cnn_convergent") return Family::cnn_convergent;
  if (s == "cnn_transformer") return Family::cnn_transformer;
  throw Error(ErrorKind::config, "unknown model family: '" + s + "'");
}

void MSResNetSpec::validate() const {
  if (in_channels < 1) throw Error(ErrorKind::config, "resnet: in_channels must be >= 1");
  if (embedding_dim < 1) throw Error(ErrorKind::config, "resnet: embedding_dim must be >= 1");
  if (base_width < 1) throw Error(ErrorKind::config, "resnet: base_width must be >= 1");
  if (blocks_per_branch < 1)
    throw Error(ErrorKind::config, "resnet: blocks_per_branch must be >= 1");
  if (branch_kernel_sizes.empty())
    throw Error(ErrorKind::config, "resnet: need at least one branch kernel size");
  for (int k : branch_kernel_sizes)
    if (k < 1 || k % 2 == 0)
      throw Error(ErrorKind::config, "resnet: kernel sizes must be odd");
  if (fc_dropout < 0.0 || fc_dropout >= 1.0)
    throw Error(ErrorKind::config, "resnet: fc_dropout must be in [0,1)");
}

size_t MSResNetSpec::param_count() const {
  size_t w = size_t(base_width);
  size_t total = w * size_t(in_channels) * 7 + w;  // stem
  for (int k : branch_kernel_sizes)
    total += size_t(blocks_per_branch) * (w * w * size_t(k) + w     // conv1
                                          + w * w * size_t(k) + w   // conv2
                                          + w * w + w);             // 1x1 skip
  total += size_t(embedding_dim) * (w * branch_kernel_sizes.size()) + size_t(embedding_dim);
  return total;
}

void TransformerSpec::validate() const {
  if (embedding_dim < 8 || embedding_dim % 8 != 0)
    throw Error(ErrorKind::config, "transformer: embedding_dim must be a multiple of 8");
  if (num_layers < 1) throw Error(ErrorKind::config, "transformer: num_layers must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0)
    throw Error(ErrorKind::config, "transformer: dropout must be in [0,1)");
}

void ModelConfig::validate() const {
  resnet.validate();
  if (family == Family::cnn_transformer) {
    transformer.validate();
    if (resnet.in_channels != 1)
      throw Error(ErrorKind::config, "transformer embedder must have in_channels = 1");
    if (resnet.embedding_dim != transformer.embedding_dim)
      throw Error(ErrorKind::config,
                  "embedder embedding_dim must match transformer embedding_dim");
  }
  if (head_dropout < 0.0 || head_dropout >= 1.0)
    throw Error(ErrorKind::config, "head_dropout must be in [0,1)");
}

std::string ModelConfig::to_json() const {
  json j;
  j["family"] = to_string(family);
  j["resnet"] = {{"in_channels", resnet.in_channels},
                 {"branch_kernel_sizes", resnet.branch_kernel_sizes},
                 {"blocks_per_branch", resnet.blocks_per_branch},
                 {"base_width", resnet.base_width},
                 {"embedding_dim", resnet.embedding_dim},
                 {"fc_dropout", resnet.fc_dropout}};
  j["transformer"] = {{"embedding_dim", transformer.embedding_dim},
                      {"num_layers", transformer.num_layers},
                      {"dropout", transformer.dropout},
                      {"mlp_hidden", transformer.mlp_hidden}};
  j["head_dropout"] = head_dropout;
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  json j = json::parse(text);
  ModelConfig cfg;
  cfg.family = family_from_string(j.at("family").get<std::string>());
  const json& r = j.at("resnet");
  cfg.resnet.in_channels = r.at("in_channels").get<int>();
  cfg.resnet.branch_kernel_sizes = r.at("branch_kernel_sizes").get<std::vector<int>>();
  cfg.resnet.blocks_per_branch = r.at("blocks_per_branch").get<int>();
  cfg.resnet.base_width = r.at("base_width").get<int>();
  cfg.resnet.embedding_dim = r.at("embedding_dim").get<int>();
  cfg.resnet.fc_dropout = r.at("fc_dropout").get<double>();
  const json& t = j.at("transformer");
  cfg.transformer.embedding_dim = t.at("embedding_dim").get<int>();
  cfg.transformer.num_layers = t.at("num_layers").get<int>();
  cfg.transformer.dropout = t.at("dropout").get<double>();
  cfg.transformer.mlp_hidden = t.at("mlp_hidden").get<int>();
  cfg.head_dropout = j.at("head_dropout").get<double>();
  cfg.validate();
  return cfg;
}

template <typename T>
Tensor<T> Model<T>::uniform_init(const std::vector<int>& shape, int fan_in, Rng& rng) {
  Tensor<T> t(shape);
  double bound = 1.0 / std::sqrt(double(fan_in));
  for (T& v : t.data) v = T(rng.uniform(-bound, bound));
  return t;
}

template <typename T>
Model<T>::Model(ModelConfig cfg, uint64_t init_seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Rng rng(init_seed);
  build(rng);
}

template <typename T>
void Model<T>::build(Rng& rng) {
  const MSResNetSpec& rs = cfg_.resnet;
  const int w = rs.base_width;

  stem_w_ = params_.add("stem.w", uniform_init({w, rs.in_channels, 7}, rs.in_channels * 7, rng));
  stem_b_ = params_.add("stem.b", Tensor<T>({w}));

  for (size_t bi = 0; bi < rs.branch_kernel_sizes.size(); ++bi) {
    int k = rs.branch_kernel_sizes[bi];
    std::vector<BlockIds> blocks;
    for (int blk = 0; blk < rs.blocks_per_branch; ++blk) {
      std::string p = "branch" + std::to_string(k) + ".block" + std::to_string(blk);
      BlockIds ids;
      ids.w1 = params_.add(p + ".conv1.w", uniform_init({w, w, k}, w * k, rng));
      ids.b1 = params_.add(p + ".conv1.b", Tensor<T>({w}));
      ids.w2 = params_.add(p + ".conv2.w", uniform_init({w, w, k}, w * k, rng));
      ids.b2 = params_.add(p + ".conv2.b", Tensor<T>({w}));
      ids.ws = params_.add(p + ".skip.w", uniform_init({w, w, 1}, w, rng));
      ids.bs = params_.add(p + ".skip.b", Tensor<T>({w}));
      blocks.push_back(ids);
    }
    branches_.push_back(std::move(blocks));
  }

  int concat_dim = w * int(rs.branch_kernel_sizes.size());
  fc_w_ = params_.add("fc.w", uniform_init({rs.embedding_dim, concat_dim}, concat_dim, rng));
  fc_b_ = params_.add("fc.b", Tensor<T>({rs.embedding_dim}));

  if (cfg_.family == Family::cnn_transformer) {
    const TransformerSpec& ts = cfg_.transformer;
    const int e = ts.embedding_dim;
    Tensor<T> cls({1, e});
    for (T& v : cls.data) v = T(rng.normal(0.0, 0.02));
    cls_ = params_.add("cls", std::move(cls));
    for (int l = 0; l < ts.num_layers; ++l) {
      std::string p = "layer" + std::to_string(l);
      LayerIds ids;
      Tensor<T> ones({e});
      std::fill(ones.data.begin(), ones.data.end(), T(1));
      ids.ln1_g = params_.add(p + ".ln1.g", ones);
      ids.ln1_b = params_.add(p + ".ln1.b", Tensor<T>({e}));
      ids.wq = params_.add(p + ".wq", uniform_init({e, e}, e, rng));
      ids.bq = params_.add(p + ".bq", Tensor<T>({e}));
      ids.wk = params_.add(p + ".wk", uniform_init({e, e}, e, rng));
      ids.bk = params_.add(p + ".bk", Tensor<T>({e}));
      ids.wv = params_.add(p + ".wv", uniform_init({e, e}, e, rng));
      ids.bv = params_.add(p + ".bv", Tensor<T>({e}));
      ids.wo = params_.add(p + ".wo", uniform_init({e, e}, e, rng));
      ids.bo = params_.add(p + ".bo", Tensor<T>({e}));
      ids.ln2_g = params_.add(p + ".ln2.g", ones);
      ids.ln2_b = params_.add(p + ".ln2.b", Tensor<T>({e}));
      int h = ts.hidden();
      ids.ff1_w = params_.add(p + ".ff1.w", uniform_init({h, e}, e, rng));
      ids.ff1_b = params_.add(p + ".ff1.b", Tensor<T>({h}));
      ids.ff2_w = params_.add(p + ".ff2.w", uniform_init({e, h}, h, rng));
      ids.ff2_b = params_.add(p + ".ff2.b", Tensor<T>({e}));
      layers_.push_back(ids);
    }
    Tensor<T> ones({e});
    std::fill(ones.data.begin(), ones.data.end(), T(1));
    lnf_g_ = params_.add("lnf.g", ones);
    lnf_b_ = params_.add("lnf.b", Tensor<T>({e}));
  }

  int e = rs.embedding_dim;
  h1_w_ = params_.add("head.h1.w", uniform_init({e, e}, e, rng));
  h1_b_ = params_.add("head.h1.b", Tensor<T>({e}));
  h2_w_ = params_.add("head.h2.w", uniform_init({1, e}, e, rng));
  h2_b_ = params_.add("head.h2.b", Tensor<T>({1}));
}

template <typename T>
int Model<T>::resnet_embed(Graph<T>& g, int x, bool train, Rng& rng) {
  const MSResNetSpec& rs = cfg_.resnet;
  int h = g.relu(g.conv1d(x, g.param(params_, stem_w_), g.param(params_, stem_b_), 2, 3));
  h = g.avgpool1d(h, 3, 2, 1);

  std::vector<int> branch_outs;
  for (size_t bi = 0; bi < branches_.size(); ++bi) {
    int k = rs.branch_kernel_sizes[bi];
    int pad = (k - 1) / 2;
    int u = h;
    for (const BlockIds& blk : branches_[bi]) {
      int v = g.relu(g.conv1d(u, g.param(params_, blk.w1), g.param(params_, blk.b1), 2, pad));
      v = g.conv1d(v, g.param(params_, blk.w2), g.param(params_, blk.b2), 1, pad);
      int sk = g.conv1d(u, g.param(params_, blk.ws), g.param(params_, blk.bs), 2, 0);
      u = g.relu(g.add(v, sk));
    }
    branch_outs.push_back(g.mean_cols(u));
  }
  int z = g.concat_vec(branch_outs);
  if (train && rs.fc_dropout > 0.0) z = g.dropout(z, rs.fc_dropout, rng);
  return g.linear(z, g.param(params_, fc_w_), g.param(params_, fc_b_));
}

template <typename T>
int Model<T>::attention_block(Graph<T>& g, int x, int layer, bool train, Rng& rng) {
  const TransformerSpec& ts = cfg_.transformer;
  const LayerIds& L = layers_[size_t(layer)];
  int a = g.layer_norm(x, g.param(params_, L.ln1_g), g.param(params_, L.ln1_b));
  int q = g.linear(a, g.param(params_, L.wq), g.param(params_, L.bq));
  int k = g.linear(a, g.param(params_, L.wk), g.param(params_, L.bk));
  int v = g.linear(a, g.param(params_, L.wv), g.param(params_, L.bv));
  int heads = ts.num_heads();
  int dh = ts.embedding_dim / heads;
  std::vector<int> outs;
  for (int hd = 0; hd < heads; ++hd) {
    int qh = g.cols(q, hd * dh, (hd + 1) * dh);
    int kh = g.cols(k, hd * dh, (hd + 1) * dh);
    int vh = g.cols(v, hd * dh, (hd + 1) * dh);
    int scores = g.mul_scalar(g.matmul_nt(qh, kh), 1.0 / std::sqrt(double(dh)));
    int p = g.softmax_rows(scores);
    outs.push_back(g.matmul_nn(p, vh));
  }
  int att = g.linear(outs.size() == 1 ? outs[0] : g.concat_cols(outs),
                     g.param(params_, L.wo), g.param(params_, L.bo));
  if (train && ts.dropout > 0.0) att = g.dropout(att, ts.dropout, rng);
  x = g.add(x, att);

  int f = g.layer_norm(x, g.param(params_, L.ln2_g), g.param(params_, L.ln2_b));
  int ff = g.linear(g.gelu(g.linear(f, g.param(params_, L.ff1_w), g.param(params_, L.ff1_b))),
                    g.param(params_, L.ff2_w), g.param(params_, L.ff2_b));
  if (train && ts.dropout > 0.0) ff = g.dropout(ff, ts.dropout, rng);
  return g.add(x, ff);
}

template <typename T>
int Model<T>::encode_tokens(Graph<T>& g, int tokens, bool train, Rng& rng) {
  int x = g.concat_rows({g.param(params_, cls_), tokens});
  for (int l = 0; l < cfg_.transformer.num_layers; ++l)
    x = attention_block(g, x, l, train, rng);
  x = g.layer_norm(x, g.param(params_, lnf_g_), g.param(params_, lnf_b_));
  return g.row(x, 0);
}

template <typename T>
int Model<T>::head_logit(Graph<T>& g, int embedding, bool train, Rng& rng) {
  int h = g.relu(g.linear(embedding, g.param(params_, h1_w_), g.param(params_, h1_b_)));
  if (train && cfg_.head_dropout > 0.0) h = g.dropout(h, cfg_.head_dropout, rng);
  return g.linear(h, g.param(params_, h2_w_), g.param(params_, h2_b_));
}

template <typename T>
int Model<T>::forward_logit(Graph<T>& g, const Tensor<T>& input, bool train, Rng& rng) {
  if (input.rank() != 2) throw Error(ErrorKind::shape, "forward: input must be {C,T}");
  const int c = input.dim(0), t = input.dim(1);
  if (cfg_.family != Family::cnn_transformer) {
    if (c != cfg_.resnet.in_channels)
      throw Error(ErrorKind::shape,
                  "forward: sample has " + std::to_string(c) + " channels, model expects " +
                      std::to_string(cfg_.resnet.in_channels));
    int x = g.input(input);
    return head_logit(g, resnet_embed(g, x, train, rng), train, rng);
  }
  if (c < 1) throw Error(ErrorKind::shape, "forward: need at least one channel");
  // per-channel embedding with the shared weights, then cross-channel attention
  std::vector<int> token_ids;
  token_ids.reserve(size_t(c));
  for (int ci = 0; ci < c; ++ci) {
    Tensor<T> chan({1, t});
    std::copy_n(input.data.begin() + size_t(ci) * t, t, chan.data.begin());
    token_ids.push_back(resnet_embed(g, g.input(std::move(chan)), train, rng));
  }
  int tokens = g.concat_rows(token_ids);
  if (train && cfg_.transformer.dropout > 0.0)
    tokens = g.dropout(tokens, cfg_.transformer.dropout, rng);
  int cls_repr = encode_tokens(g, tokens, train, rng);
  return head_logit(g, cls_repr, train, rng);
}

template <typename T>
double Model<T>::predict_logit(const Tensor<T>& input) {
  Graph<T> g;
  Rng rng(0);  // eval mode draws nothing
  int logit = forward_logit(g, input, /*train=*/false, rng);
  return double(g.value(logit).data[0]);
}

template <typename T>
double Model<T>::predict(const Tensor<T>& input) {
  return sigmoid(predict_logit(input));
}

template class Model<float>;
template class Model<double>;

}  // namespace spes
