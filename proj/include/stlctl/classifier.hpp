#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "stlctl/norm.hpp"
#include "stlctl/optim.hpp"
#include "stlctl/tape.hpp"
#include "stlctl/trajopt.hpp"

namespace stlctl {

enum class Activation { Tanh, Relu };

// Fully-connected stack; layer i maps with W[i] {out,in} and b[i].
struct Mlp {
  std::vector<Tensor> W;
  std::vector<Tensor> b;
};

// Permutation-invariant classifier: per-obstacle encoder pooled by sum
// (deep-sets), concatenated with the normalized initial state, then a
// classification head ending in linear logits. Obstacle encodings are
// accumulated in canonical (lexicographically sorted) order, which
// makes the outputs bit-equal under any input permutation of Xi.
struct ClassifierWeights {
  int n_c = 0;
  int n_obs = 0;  // obstacle count the model was trained for
  Activation act = Activation::Tanh;
  AffineNorm x0_norm;
  AffineNorm xi_norm;
  Mlp encoder;  // every layer activated; last width is the pooled dim
  Mlp head;     // hidden layers activated, final layer linear
};

struct ClassifierShape {
  int x0_dim = 5;
  int xi_dim = 3;
  int n_obs = 2;
  int n_c = 2;
  int enc_hidden = 128;
  int enc_layers = 2;
  int head_hidden = 64;
  int head_layers = 2;
  Activation act = Activation::Tanh;
};

// Seeded uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) initialization.
ClassifierWeights init_classifier(const ClassifierShape& shape, const AffineNorm& x0_norm,
                                  const AffineNorm& xi_norm, std::uint64_t seed);

// Softmax class probabilities; entries sum to 1.
Vec class_probabilities(const ClassifierWeights& w, const Vec& x0, const ObstacleSet& xi);

// Argmax label in {1..n_c}; ties break toward the lowest index.
int classify(const ClassifierWeights& w, const Vec& x0, const ObstacleSet& xi);

struct LabeledInstance {
  Vec x0;
  ObstacleSet xi;
  int label = 1;  // 1-based
};

struct ClassifierTrainConfig {
  int epochs = 500;
  int batch = 32;
  double lr = 0.001;
};

struct ClassifierTraceRow {
  int epoch;
  double loss;      // mean cross-entropy over the epoch
  double accuracy;  // training accuracy after the epoch
};

// Mean cross-entropy of one batch on a fresh tape; optionally returns
// gradients keyed enc.W<i>/enc.b<i>/head.W<i>/head.b<i>. This is the
// exact quantity the training step descends.
double classifier_batch_loss(const ClassifierWeights& w, const std::vector<LabeledInstance>& batch,
                             ParamMap* grads = nullptr);

// Mini-batch Adam on the mean cross-entropy (seeded shuffle per epoch,
// last partial batch kept). Throws TrainError on NaN loss.
ClassifierWeights train_classifier(const std::vector<LabeledInstance>& data,
                                   const ClassifierShape& shape, const AffineNorm& x0_norm,
                                   const AffineNorm& xi_norm, const ClassifierTrainConfig& cfg,
                                   std::uint64_t seed,
                                   std::vector<ClassifierTraceRow>* trace = nullptr);

std::string classifier_to_json(const ClassifierWeights& w);
ClassifierWeights classifier_from_json(const std::string& text);

}  // namespace stlctl
