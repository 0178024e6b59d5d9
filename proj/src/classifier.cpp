#include "stlctl/classifier.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "stlctl/rng.hpp"

namespace stlctl {

namespace {

Tensor init_layer(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor w = Tensor::zeros({rows, cols});
  const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
  for (double& v : w.data) v = rng.uniform(-bound, bound);
  return w;
}

Mlp init_mlp(const std::vector<std::size_t>& dims, Rng& rng) {
  Mlp m;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    m.W.push_back(init_layer(dims[i + 1], dims[i], rng));
    Tensor b = Tensor::zeros({dims[i + 1]});
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims[i]));
    for (double& v : b.data) v = rng.uniform(-bound, bound);
    m.b.push_back(std::move(b));
  }
  return m;
}

double activate(double x, Activation act) {
  return act == Activation::Tanh ? std::tanh(x) : (x > 0.0 ? x : 0.0);
}

Vec mlp_forward(const Mlp& m, Vec x, Activation act, bool activate_last) {
  for (std::size_t layer = 0; layer < m.W.size(); ++layer) {
    const Tensor& W = m.W[layer];
    const Tensor& b = m.b[layer];
    const std::size_t rows = W.shape[0], cols = W.shape[1];
    Vec y(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      double s = b.data[r];
      const double* wr = W.data.data() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) s += wr[c] * x[c];
      y[r] = s;
    }
    const bool is_last = layer + 1 == m.W.size();
    if (!is_last || activate_last)
      for (double& v : y) v = activate(v, act);
    x = std::move(y);
  }
  return x;
}

// Obstacles in canonical (lexicographic) order so sum pooling has one
// fixed accumulation order regardless of how Xi arrived.
ObstacleSet canonical_order(ObstacleSet xi) {
  std::sort(xi.begin(), xi.end());
  return xi;
}

Vec logits_plain(const ClassifierWeights& w, const Vec& x0, const ObstacleSet& xi_raw) {
  if (static_cast<int>(xi_raw.size()) != w.n_obs)
    throw Error("classifier was trained for " + std::to_string(w.n_obs) + " obstacles, got " +
                std::to_string(xi_raw.size()));
  const ObstacleSet xi = canonical_order(xi_raw);
  const std::size_t pooled_dim =
      w.encoder.W.empty() ? (xi.empty() ? 0 : xi[0].size()) : w.encoder.W.back().shape[0];
  Vec pooled(pooled_dim, 0.0);
  for (const Vec& ob : xi) {
    Vec enc = mlp_forward(w.encoder, w.xi_norm.apply(ob), w.act, true);
    for (std::size_t i = 0; i < pooled_dim; ++i) pooled[i] += enc[i];
  }
  Vec head_in = w.x0_norm.apply(x0);
  head_in.insert(head_in.end(), pooled.begin(), pooled.end());
  return mlp_forward(w.head, std::move(head_in), w.act, false);
}

}  // namespace

ClassifierWeights init_classifier(const ClassifierShape& s, const AffineNorm& x0_norm,
                                  const AffineNorm& xi_norm, std::uint64_t seed) {
  if (s.n_c < 1) throw Error("classifier needs at least one class");
  Rng rng(seed);
  ClassifierWeights w;
  w.n_c = s.n_c;
  w.n_obs = s.n_obs;
  w.act = s.act;
  w.x0_norm = x0_norm;
  w.xi_norm = xi_norm;
  std::vector<std::size_t> enc_dims{static_cast<std::size_t>(s.xi_dim)};
  for (int i = 0; i < s.enc_layers; ++i) enc_dims.push_back(static_cast<std::size_t>(s.enc_hidden));
  w.encoder = init_mlp(enc_dims, rng);
  std::vector<std::size_t> head_dims{static_cast<std::size_t>(s.x0_dim) + enc_dims.back()};
  for (int i = 0; i < s.head_layers; ++i) head_dims.push_back(static_cast<std::size_t>(s.head_hidden));
  head_dims.push_back(static_cast<std::size_t>(s.n_c));
  w.head = init_mlp(head_dims, rng);
  return w;
}

Vec class_probabilities(const ClassifierWeights& w, const Vec& x0, const ObstacleSet& xi) {
  Vec logits = logits_plain(w, x0, xi);
  double m = logits[0];
  for (double v : logits) m = std::max(m, v);
  double s = 0.0;
  Vec p(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    s += p[i];
  }
  for (double& v : p) v /= s;
  return p;
}

int classify(const ClassifierWeights& w, const Vec& x0, const ObstacleSet& xi) {
  Vec logits = logits_plain(w, x0, xi);
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[best]) best = i;
  return static_cast<int>(best) + 1;
}

namespace {

struct TapeMlp {
  std::vector<int> W, b;
};

TapeMlp mlp_leaves(ad::Tape& t, const Mlp& m, ParamMap& params, const std::string& prefix,
                   std::map<std::string, int>& leaf_ids) {
  TapeMlp out;
  for (std::size_t i = 0; i < m.W.size(); ++i) {
    const std::string kw = prefix + ".W" + std::to_string(i);
    const std::string kb = prefix + ".b" + std::to_string(i);
    params[kw] = m.W[i];
    params[kb] = m.b[i];
    out.W.push_back(t.leaf(m.W[i]));
    out.b.push_back(t.leaf(m.b[i]));
    leaf_ids[kw] = out.W.back();
    leaf_ids[kb] = out.b.back();
  }
  return out;
}

int mlp_tape(ad::Tape& t, const TapeMlp& m, int x, Activation act, bool activate_last) {
  for (std::size_t layer = 0; layer < m.W.size(); ++layer) {
    x = t.add(t.matvec(m.W[layer], x), m.b[layer]);
    const bool is_last = layer + 1 == m.W.size();
    if (!is_last || activate_last) x = act == Activation::Tanh ? t.tanh(x) : t.relu(x);
  }
  return x;
}

}  // namespace

double classifier_batch_loss(const ClassifierWeights& w, const std::vector<LabeledInstance>& batch,
                             ParamMap* grads) {
  if (batch.empty()) throw Error("classifier_batch_loss: empty batch");
  ad::Tape t;
  ParamMap params;
  std::map<std::string, int> leaf_ids;
  TapeMlp enc = mlp_leaves(t, w.encoder, params, "enc", leaf_ids);
  TapeMlp head = mlp_leaves(t, w.head, params, "head", leaf_ids);
  int loss_acc = -1;
  for (const LabeledInstance& s : batch) {
    if (s.label < 1 || s.label > w.n_c)
      throw Error("classifier_batch_loss: label " + std::to_string(s.label) + " out of range");
    const ObstacleSet xi = canonical_order(s.xi);
    int pooled = -1;
    for (const Vec& ob : xi) {
      int x = ad::const_vector(t, w.xi_norm.apply(ob));
      int e = mlp_tape(t, enc, x, w.act, true);
      pooled = pooled < 0 ? e : t.add(pooled, e);
    }
    int head_in = ad::const_vector(t, w.x0_norm.apply(s.x0));
    if (pooled >= 0) head_in = t.concat(head_in, pooled);
    int logits = mlp_tape(t, head, head_in, w.act, false);
    // cross-entropy = logsumexp(logits) - logit[label]
    int ce = t.sub(t.softmax(logits, 1.0), t.index(logits, s.label - 1));
    loss_acc = loss_acc < 0 ? ce : t.add(loss_acc, ce);
  }
  int loss = t.affine(loss_acc, 1.0 / static_cast<double>(batch.size()), 0.0);
  const double value = t.val(loss).value();
  if (grads) {
    t.backward(loss);
    for (const auto& [key, id] : leaf_ids) (*grads)[key] = t.grad(id);
  }
  return value;
}

ClassifierWeights train_classifier(const std::vector<LabeledInstance>& data,
                                   const ClassifierShape& shape, const AffineNorm& x0_norm,
                                   const AffineNorm& xi_norm, const ClassifierTrainConfig& cfg,
                                   std::uint64_t seed, std::vector<ClassifierTraceRow>* trace) {
  if (data.empty()) throw Error("train_classifier: empty dataset");
  for (const auto& d : data)
    if (d.label < 1 || d.label > shape.n_c)
      throw Error("train_classifier: label " + std::to_string(d.label) + " out of range 1.." +
                  std::to_string(shape.n_c));

  ClassifierWeights w = init_classifier(shape, x0_norm, xi_norm, derive_seed(seed, 0));
  Rng shuffle_rng(derive_seed(seed, 1));
  OptimizerState opt_state;

  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
      std::vector<LabeledInstance> batch;
      for (std::size_t bi = start; bi < end; ++bi) batch.push_back(data[order[bi]]);
      ParamMap params;
      for (std::size_t i = 0; i < w.encoder.W.size(); ++i) {
        params["enc.W" + std::to_string(i)] = w.encoder.W[i];
        params["enc.b" + std::to_string(i)] = w.encoder.b[i];
      }
      for (std::size_t i = 0; i < w.head.W.size(); ++i) {
        params["head.W" + std::to_string(i)] = w.head.W[i];
        params["head.b" + std::to_string(i)] = w.head.b[i];
      }
      ParamMap grads;
      const double loss_val = classifier_batch_loss(w, batch, &grads);
      if (!std::isfinite(loss_val))
        throw TrainError("train_classifier: non-finite loss at epoch " + std::to_string(epoch) +
                         ", batch starting " + std::to_string(start));
      loss_sum += loss_val * static_cast<double>(end - start);
      adam_step(params, grads, opt_state, cfg.lr);
      for (std::size_t i = 0; i < w.encoder.W.size(); ++i) {
        w.encoder.W[i] = params["enc.W" + std::to_string(i)];
        w.encoder.b[i] = params["enc.b" + std::to_string(i)];
      }
      for (std::size_t i = 0; i < w.head.W.size(); ++i) {
        w.head.W[i] = params["head.W" + std::to_string(i)];
        w.head.b[i] = params["head.b" + std::to_string(i)];
      }
    }
    if (trace) {
      int correct = 0;
      for (const auto& s : data)
        if (classify(w, s.x0, s.xi) == s.label) ++correct;
      trace->push_back({epoch + 1, loss_sum / static_cast<double>(data.size()),
                        static_cast<double>(correct) / static_cast<double>(data.size())});
    }
  }
  return w;
}

namespace {

nlohmann::json mlp_to_json(const Mlp& m) {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t i = 0; i < m.W.size(); ++i) {
    layers.push_back({{"W", {{"shape", m.W[i].shape}, {"data", m.W[i].data}}},
                      {"b", {{"shape", m.b[i].shape}, {"data", m.b[i].data}}}});
  }
  return layers;
}

Mlp mlp_from_json(const nlohmann::json& j) {
  Mlp m;
  for (const auto& layer : j) {
    Tensor W, b;
    W.shape = layer.at("W").at("shape").get<std::vector<std::size_t>>();
    W.data = layer.at("W").at("data").get<Vec>();
    b.shape = layer.at("b").at("shape").get<std::vector<std::size_t>>();
    b.data = layer.at("b").at("data").get<Vec>();
    if (W.data.size() != W.count() || b.data.size() != b.count())
      throw ConfigError("classifier JSON: layer data does not match its shape");
    m.W.push_back(std::move(W));
    m.b.push_back(std::move(b));
  }
  return m;
}

}  // namespace

std::string classifier_to_json(const ClassifierWeights& w) {
  nlohmann::json j;
  j["version"] = 1;
  j["type"] = "deepsets_classifier";
  j["n_c"] = w.n_c;
  j["n_obs"] = w.n_obs;
  j["activation"] = w.act == Activation::Tanh ? "tanh" : "relu";
  j["x0_norm"] = {{"lo", w.x0_norm.lo}, {"hi", w.x0_norm.hi}};
  j["xi_norm"] = {{"lo", w.xi_norm.lo}, {"hi", w.xi_norm.hi}};
  j["encoder"] = mlp_to_json(w.encoder);
  j["head"] = mlp_to_json(w.head);
  return j.dump(2);
}

ClassifierWeights classifier_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (j.at("type") != "deepsets_classifier") throw ConfigError("not a classifier weight file");
  ClassifierWeights w;
  w.n_c = j.at("n_c").get<int>();
  w.n_obs = j.at("n_obs").get<int>();
  w.act = j.at("activation") == "tanh" ? Activation::Tanh : Activation::Relu;
  w.x0_norm = AffineNorm(j.at("x0_norm").at("lo").get<Vec>(), j.at("x0_norm").at("hi").get<Vec>());
  w.xi_norm = AffineNorm(j.at("xi_norm").at("lo").get<Vec>(), j.at("xi_norm").at("hi").get<Vec>());
  w.encoder = mlp_from_json(j.at("encoder"));
  w.head = mlp_from_json(j.at("head"));
  return w;
}

}  // namespace stlctl
