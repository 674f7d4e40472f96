#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vrff/graph.hpp"
#include "vrff/rng.hpp"
#include "vrff/tensor.hpp"

namespace vrff {

enum class Activation { none, relu, elu };

enum class RecurrentMode { vanilla_lstm, bi_lstm, no_lstm };

const char* to_string(RecurrentMode mode);
RecurrentMode recurrent_mode_from_string(const std::string& name);

struct DenseLayer {
  Tensor weight;  // in x out
  Tensor bias;    // 1 x out
  Activation act = Activation::none;
};

/// Stack of dense layers applied row-wise; consecutive widths must chain.
struct Mlp {
  std::vector<DenseLayer> layers;
  int64_t input_width() const;
  int64_t output_width() const;
};

/// Four-gate LSTM cell parameters for hidden width H. The forget-gate bias
/// is initialized to 1, other weights uniform in +-1/sqrt(fan_in).
struct LstmCell {
  Tensor input_wx, input_wh, input_b;
  Tensor forget_wx, forget_wh, forget_b;
  Tensor cell_wx, cell_wh, cell_b;
  Tensor output_wx, output_wh, output_b;

  int64_t input_width() const { return input_wx.rows(); }
  int64_t hidden_width() const { return input_wx.cols(); }
};

struct LstmStateVars {
  Var hidden;  // 1 x H
  Var cell;    // 1 x H
  bool valid() const { return hidden.valid() && cell.valid(); }
};

/// Amortized posterior head: pre-MLP (ELU), a recurrent (or dense) core, and
/// two linear heads mapping tanh(core output) to the frequency mean and
/// log-variance, each of the feature width.
struct InferenceNet {
  RecurrentMode mode = RecurrentMode::vanilla_lstm;
  Mlp pre;                     // feature width -> feature width, ELU
  LstmCell cell;               // vanilla + bi (forward direction)
  LstmCell cell_backward;      // bi only
  DenseLayer replacement;      // no_lstm: dense ELU layer of hidden width
  DenseLayer mean_head;        // (H or 2H) -> d
  DenseLayer log_var_head;     // (H or 2H) -> d

  int64_t feature_width() const { return mean_head.weight.cols(); }
  int64_t hidden_width() const;
};

/// Query-conditioned prior: ELU body plus linear mean / log-variance heads.
struct PriorNet {
  Mlp body;  // d -> d, ELU
  DenseLayer mean_head;
  DenseLayer log_var_head;
};

struct GaussianVars {
  Var mean;     // n x d
  Var log_var;  // n x d
};

Mlp make_mlp(const std::vector<int64_t>& widths, Activation act, Rng& rng);
LstmCell make_lstm_cell(int64_t input_width, int64_t hidden_width, Rng& rng);
DenseLayer make_dense(int64_t in, int64_t out, Activation act, Rng& rng);
InferenceNet make_inference_net(int64_t feature_width, int64_t hidden_width,
                                RecurrentMode mode, Rng& rng);
PriorNet make_prior_net(int64_t feature_width, Rng& rng);

Var dense_forward(Binder& bind, const DenseLayer& layer, Var x);
Var mlp_forward(Binder& bind, const Mlp& mlp, Var x);

/// Row-wise embedding of raw inputs; alias of mlp_forward named for its role.
Var embed(Binder& bind, const Mlp& psi, Var x);

/// One step of the standard four-gate cell:
///   i,f,o = sigmoid(x Wx + h Wh + b), g = tanh(...),
///   c' = f*c + i*g, h' = o*tanh(c').
LstmStateVars lstm_step(Binder& bind, const LstmCell& cell, Var input,
                        LstmStateVars state);

LstmStateVars zero_lstm_state(Graph& g, int64_t hidden_width);

/// Per-class mean of feature rows (classes of exactly `shots` rows each).
/// Output row c is the mean of the rows labeled c; invariant to within-class
/// order. Rejects unbalanced classes.
Var instance_pool(Var features, const std::vector<int>& labels, int ways, int shots);

/// Laplace-kernel attention: softmax over keys of the negative L1 distance
/// to the query row, then the weighted sum of value rows.
Var cross_attention(Var query_row, Var keys, Var values);

/// All query rows at once; row i is cross_attention(queries[i], keys, values).
Var batched_cross_attention(Var queries, Var keys, Var values);

struct InferenceResult {
  GaussianVars posterior;
  LstmStateVars state;  // updated carried state (invalid in no_lstm mode)
};

/// Posterior head over one aggregated episode representation (1 x d).
/// `carried` may be invalid to start from the zero state. Not usable in
/// bi-directional mode (which needs the whole sequence).
InferenceResult infer_posterior(Binder& bind, const InferenceNet& net,
                                Var aggregated, LstmStateVars carried);

/// Posteriors for an episode sequence. In bi-directional mode the forward and
/// backward passes run over the sequence and their hidden states are
/// concatenated per position before the heads.
std::vector<GaussianVars> infer_posterior_sequence(Binder& bind, const InferenceNet& net,
                                                   const std::vector<Var>& aggregated);

/// Prior for one query row: attentive representation over the pooled support,
/// then the prior body and heads.
GaussianVars prior_from_query(Binder& bind, const PriorNet& net, Var query_row,
                              Var pooled_support);

/// Per-query priors for all query rows at once (rows of the results align
/// with query rows).
GaussianVars prior_from_queries(Binder& bind, const PriorNet& net, Var query_features,
                                Var pooled_support);

/// The trainable bundle: embedding psi, inference net phi, prior net.
struct Model {
  Mlp embedding;
  InferenceNet inference;
  PriorNet prior;
};

Model make_model(int64_t input_dim, int64_t feature_width, int64_t hidden_width,
                 RecurrentMode mode, Rng& init_rng);

/// Stable name -> tensor view of every trainable array, in a fixed order.
struct ParamRegistry {
  std::vector<std::pair<std::string, Tensor*>> entries;

  void add(const std::string& name, Tensor& t) { entries.emplace_back(name, &t); }
  std::vector<Tensor*> tensors() const;
  int64_t total_size() const;
};

ParamRegistry registry_of(Model& model);
int64_t parameter_count(Model& model);

}  // namespace vrff
