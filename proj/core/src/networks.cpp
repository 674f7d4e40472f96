#include "vrff/networks.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace vrff {

const char* to_string(RecurrentMode mode) {
  switch (mode) {
    case RecurrentMode::vanilla_lstm: return "lstm";
    case RecurrentMode::bi_lstm: return "bi-lstm";
    case RecurrentMode::no_lstm: return "no-lstm";
  }
  return "?";
}

RecurrentMode recurrent_mode_from_string(const std::string& name) {
  if (name == "lstm") return RecurrentMode::vanilla_lstm;
  if (name == "bi-lstm") return RecurrentMode::bi_lstm;
  if (name == "no-lstm") return RecurrentMode::no_lstm;
  throw std::invalid_argument("unknown recurrent mode '" + name +
                              "' (expected lstm, bi-lstm, or no-lstm)");
}

int64_t Mlp::input_width() const {
  if (layers.empty()) throw std::logic_error("empty mlp");
  return layers.front().weight.rows();
}

int64_t Mlp::output_width() const {
  if (layers.empty()) throw std::logic_error("empty mlp");
  return layers.back().weight.cols();
}

int64_t InferenceNet::hidden_width() const {
  switch (mode) {
    case RecurrentMode::vanilla_lstm:
    case RecurrentMode::bi_lstm:
      return cell.hidden_width();
    case RecurrentMode::no_lstm:
      return replacement.weight.cols();
  }
  return 0;
}

namespace {

Tensor uniform_init(int64_t rows, int64_t cols, int64_t fan_in, Rng& rng) {
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  return rng.uniform_matrix(rows, cols, -bound, bound);
}

}  // namespace

DenseLayer make_dense(int64_t in, int64_t out, Activation act, Rng& rng) {
  DenseLayer layer;
  layer.weight = uniform_init(in, out, in, rng);
  layer.bias = Tensor::zeros(1, out);
  layer.act = act;
  return layer;
}

Mlp make_mlp(const std::vector<int64_t>& widths, Activation act, Rng& rng) {
  if (widths.size() < 2) throw std::invalid_argument("mlp needs at least two widths");
  Mlp mlp;
  for (size_t i = 0; i + 1 < widths.size(); ++i) {
    mlp.layers.push_back(make_dense(widths[i], widths[i + 1], act, rng));
  }
  return mlp;
}

LstmCell make_lstm_cell(int64_t input_width, int64_t hidden_width, Rng& rng) {
  LstmCell c;
  auto wx = [&] { return uniform_init(input_width, hidden_width, input_width, rng); };
  auto wh = [&] { return uniform_init(hidden_width, hidden_width, hidden_width, rng); };
  c.input_wx = wx(); c.input_wh = wh(); c.input_b = Tensor::zeros(1, hidden_width);
  c.forget_wx = wx(); c.forget_wh = wh();
  c.forget_b = Tensor::filled(1, hidden_width, 1.0);
  c.cell_wx = wx(); c.cell_wh = wh(); c.cell_b = Tensor::zeros(1, hidden_width);
  c.output_wx = wx(); c.output_wh = wh(); c.output_b = Tensor::zeros(1, hidden_width);
  return c;
}

InferenceNet make_inference_net(int64_t feature_width, int64_t hidden_width,
                                RecurrentMode mode, Rng& rng) {
  InferenceNet net;
  net.mode = mode;
  net.pre = make_mlp({feature_width, feature_width, feature_width}, Activation::elu, rng);
  int64_t head_in = hidden_width;
  switch (mode) {
    case RecurrentMode::vanilla_lstm:
      net.cell = make_lstm_cell(feature_width, hidden_width, rng);
      break;
    case RecurrentMode::bi_lstm:
      net.cell = make_lstm_cell(feature_width, hidden_width, rng);
      net.cell_backward = make_lstm_cell(feature_width, hidden_width, rng);
      head_in = 2 * hidden_width;
      break;
    case RecurrentMode::no_lstm:
      net.replacement = make_dense(feature_width, hidden_width, Activation::elu, rng);
      break;
  }
  net.mean_head = make_dense(head_in, feature_width, Activation::none, rng);
  net.log_var_head = make_dense(head_in, feature_width, Activation::none, rng);
  return net;
}

PriorNet make_prior_net(int64_t feature_width, Rng& rng) {
  PriorNet net;
  net.body = make_mlp({feature_width, feature_width, feature_width}, Activation::elu, rng);
  net.mean_head = make_dense(feature_width, feature_width, Activation::none, rng);
  net.log_var_head = make_dense(feature_width, feature_width, Activation::none, rng);
  return net;
}

Var dense_forward(Binder& bind, const DenseLayer& layer, Var x) {
  Var w = bind(layer.weight);
  Var b = bind(layer.bias);
  Var pre = matmul(x, w) + broadcast_rows(b, x.value().rows());
  switch (layer.act) {
    case Activation::none: return pre;
    case Activation::relu: return relu(pre);
    case Activation::elu: return elu(pre);
  }
  return pre;
}

Var mlp_forward(Binder& bind, const Mlp& mlp, Var x) {
  Var h = x;
  for (const auto& layer : mlp.layers) h = dense_forward(bind, layer, h);
  return h;
}

Var embed(Binder& bind, const Mlp& psi, Var x) { return mlp_forward(bind, psi, x); }

LstmStateVars zero_lstm_state(Graph& g, int64_t hidden_width) {
  LstmStateVars s;
  s.hidden = g.constant(Tensor::zeros(1, hidden_width));
  s.cell = g.constant(Tensor::zeros(1, hidden_width));
  return s;
}

LstmStateVars lstm_step(Binder& bind, const LstmCell& cell, Var input,
                        LstmStateVars state) {
  if (!state.valid()) throw std::invalid_argument("lstm_step needs a valid state");
  auto gate = [&](const Tensor& wx, const Tensor& wh, const Tensor& b) {
    return matmul(input, bind(wx)) + matmul(state.hidden, bind(wh)) + bind(b);
  };
  Var i = sigmoid(gate(cell.input_wx, cell.input_wh, cell.input_b));
  Var f = sigmoid(gate(cell.forget_wx, cell.forget_wh, cell.forget_b));
  Var g = tanh(gate(cell.cell_wx, cell.cell_wh, cell.cell_b));
  Var o = sigmoid(gate(cell.output_wx, cell.output_wh, cell.output_b));
  LstmStateVars next;
  next.cell = f * state.cell + i * g;
  next.hidden = o * tanh(next.cell);
  return next;
}

Var instance_pool(Var features, const std::vector<int>& labels, int ways, int shots) {
  const Tensor& val = features.value();
  if (static_cast<int64_t>(labels.size()) != val.rows()) {
    throw std::invalid_argument("instance_pool: labels/rows mismatch");
  }
  if (ways <= 0 || shots <= 0) throw std::invalid_argument("instance_pool: ways and shots must be positive");
  if (val.rows() != static_cast<int64_t>(ways) * shots) {
    throw std::invalid_argument("instance_pool: expected ways*shots rows");
  }
  std::vector<std::vector<int64_t>> by_class(ways);
  for (int64_t r = 0; r < val.rows(); ++r) {
    int c = labels[static_cast<size_t>(r)];
    if (c < 0 || c >= ways) throw std::invalid_argument("instance_pool: label out of range");
    by_class[static_cast<size_t>(c)].push_back(r);
  }
  std::vector<Var> pooled;
  pooled.reserve(static_cast<size_t>(ways));
  for (int c = 0; c < ways; ++c) {
    const auto& rows = by_class[static_cast<size_t>(c)];
    if (static_cast<int>(rows.size()) != shots) {
      std::ostringstream msg;
      msg << "instance_pool: class " << c << " has " << rows.size()
          << " rows, expected " << shots;
      throw std::invalid_argument(msg.str());
    }
    bool contiguous = true;
    for (size_t k = 1; k < rows.size(); ++k) {
      if (rows[k] != rows[k - 1] + 1) { contiguous = false; break; }
    }
    Var block;
    if (contiguous) {
      block = slice_rows(features, rows.front(), rows.front() + shots);
    } else {
      block = slice_rows(features, rows[0], rows[0] + 1);
      for (size_t k = 1; k < rows.size(); ++k) {
        block = concat_rows(block, slice_rows(features, rows[k], rows[k] + 1));
      }
    }
    pooled.push_back(mean_rows(block));
  }
  Var out = pooled[0];
  for (size_t c = 1; c < pooled.size(); ++c) out = concat_rows(out, pooled[c]);
  return out;
}

namespace {

/// 1 x C row of negative L1 distances from each query row to every key row,
/// stacked to n x C. |x| is built as relu(x) + relu(-x) so the graph stays
/// within the primitive op set.
Var negative_l1_to_keys(Var queries, Var keys) {
  int64_t n = queries.value().rows();
  int64_t c = keys.value().rows();
  Var cols;
  for (int64_t j = 0; j < c; ++j) {
    Var key_j = slice_rows(keys, j, j + 1);
    Var diff = queries - broadcast_rows(key_j, n);
    Var absd = relu(diff) + relu(negate(diff));
    Var dist = sum_cols(absd);  // n x 1
    cols = (j == 0) ? dist : concat_cols(cols, dist);
  }
  return negate(cols);
}

}  // namespace

Var batched_cross_attention(Var queries, Var keys, Var values) {
  if (keys.value().rows() != values.value().rows()) {
    throw std::invalid_argument("cross_attention: keys/values row mismatch");
  }
  if (queries.value().cols() != keys.value().cols()) {
    throw std::invalid_argument("cross_attention: query/key width mismatch");
  }
  Var weights = softmax_rows(negative_l1_to_keys(queries, keys));
  return matmul(weights, values);
}

Var cross_attention(Var query_row, Var keys, Var values) {
  if (query_row.value().rows() != 1) {
    throw std::invalid_argument("cross_attention: query must be a single row");
  }
  return batched_cross_attention(query_row, keys, values);
}

namespace {

GaussianVars heads_from(Binder& bind, const InferenceNet& net, Var h) {
  GaussianVars out;
  Var squashed = tanh(h);
  out.mean = dense_forward(bind, net.mean_head, squashed);
  out.log_var = dense_forward(bind, net.log_var_head, squashed);
  return out;
}

}  // namespace

InferenceResult infer_posterior(Binder& bind, const InferenceNet& net,
                                Var aggregated, LstmStateVars carried) {
  if (net.mode == RecurrentMode::bi_lstm) {
    throw std::logic_error("bi-directional mode needs infer_posterior_sequence");
  }
  Var x = mlp_forward(bind, net.pre, aggregated);
  InferenceResult res;
  if (net.mode == RecurrentMode::vanilla_lstm) {
    LstmStateVars state = carried.valid()
        ? carried
        : zero_lstm_state(bind.graph(), net.cell.hidden_width());
    res.state = lstm_step(bind, net.cell, x, state);
    res.posterior = heads_from(bind, net, res.state.hidden);
  } else {
    Var h = dense_forward(bind, net.replacement, x);
    res.posterior = heads_from(bind, net, h);
  }
  return res;
}

std::vector<GaussianVars> infer_posterior_sequence(Binder& bind, const InferenceNet& net,
                                                   const std::vector<Var>& aggregated) {
  if (aggregated.empty()) throw std::invalid_argument("empty episode sequence");
  std::vector<GaussianVars> out;
  out.reserve(aggregated.size());
  if (net.mode != RecurrentMode::bi_lstm) {
    LstmStateVars carried;  // invalid: start at zero, then chain
    for (Var a : aggregated) {
      InferenceResult r = infer_posterior(bind, net, a, carried);
      carried = r.state;
      out.push_back(r.posterior);
    }
    return out;
  }
  Graph& g = bind.graph();
  std::vector<Var> pre;
  pre.reserve(aggregated.size());
  for (Var a : aggregated) pre.push_back(mlp_forward(bind, net.pre, a));
  size_t n = pre.size();
  std::vector<Var> fwd(n), bwd(n);
  LstmStateVars state = zero_lstm_state(g, net.cell.hidden_width());
  for (size_t t = 0; t < n; ++t) {
    state = lstm_step(bind, net.cell, pre[t], state);
    fwd[t] = state.hidden;
  }
  state = zero_lstm_state(g, net.cell_backward.hidden_width());
  for (size_t t = n; t-- > 0;) {
    state = lstm_step(bind, net.cell_backward, pre[t], state);
    bwd[t] = state.hidden;
  }
  for (size_t t = 0; t < n; ++t) {
    out.push_back(heads_from(bind, net, concat_cols(fwd[t], bwd[t])));
  }
  return out;
}

GaussianVars prior_from_query(Binder& bind, const PriorNet& net, Var query_row,
                              Var pooled_support) {
  Var attended = cross_attention(query_row, pooled_support, pooled_support);
  Var h = mlp_forward(bind, net.body, attended);
  GaussianVars out;
  out.mean = dense_forward(bind, net.mean_head, h);
  out.log_var = dense_forward(bind, net.log_var_head, h);
  return out;
}

GaussianVars prior_from_queries(Binder& bind, const PriorNet& net, Var query_features,
                                Var pooled_support) {
  Var attended = batched_cross_attention(query_features, pooled_support, pooled_support);
  Var h = mlp_forward(bind, net.body, attended);
  GaussianVars out;
  out.mean = dense_forward(bind, net.mean_head, h);
  out.log_var = dense_forward(bind, net.log_var_head, h);
  return out;
}

Model make_model(int64_t input_dim, int64_t feature_width, int64_t hidden_width,
                 RecurrentMode mode, Rng& init_rng) {
  Model m;
  m.embedding = make_mlp({input_dim, feature_width, feature_width}, Activation::relu, init_rng);
  m.inference = make_inference_net(feature_width, hidden_width, mode, init_rng);
  m.prior = make_prior_net(feature_width, init_rng);
  return m;
}

std::vector<Tensor*> ParamRegistry::tensors() const {
  std::vector<Tensor*> out;
  out.reserve(entries.size());
  for (const auto& [name, t] : entries) out.push_back(t);
  return out;
}

int64_t ParamRegistry::total_size() const {
  int64_t n = 0;
  for (const auto& [name, t] : entries) n += t->size();
  return n;
}

namespace {

void add_mlp(ParamRegistry& reg, const std::string& prefix, Mlp& mlp) {
  for (size_t i = 0; i < mlp.layers.size(); ++i) {
    std::string base = prefix + ".layer" + std::to_string(i);
    reg.add(base + ".weight", mlp.layers[i].weight);
    reg.add(base + ".bias", mlp.layers[i].bias);
  }
}

void add_dense(ParamRegistry& reg, const std::string& prefix, DenseLayer& layer) {
  reg.add(prefix + ".weight", layer.weight);
  reg.add(prefix + ".bias", layer.bias);
}

void add_cell(ParamRegistry& reg, const std::string& prefix, LstmCell& c) {
  reg.add(prefix + ".input.wx", c.input_wx);
  reg.add(prefix + ".input.wh", c.input_wh);
  reg.add(prefix + ".input.b", c.input_b);
  reg.add(prefix + ".forget.wx", c.forget_wx);
  reg.add(prefix + ".forget.wh", c.forget_wh);
  reg.add(prefix + ".forget.b", c.forget_b);
  reg.add(prefix + ".cell.wx", c.cell_wx);
  reg.add(prefix + ".cell.wh", c.cell_wh);
  reg.add(prefix + ".cell.b", c.cell_b);
  reg.add(prefix + ".output.wx", c.output_wx);
  reg.add(prefix + ".output.wh", c.output_wh);
  reg.add(prefix + ".output.b", c.output_b);
}

}  // namespace

ParamRegistry registry_of(Model& model) {
  ParamRegistry reg;
  add_mlp(reg, "embedding", model.embedding);
  add_mlp(reg, "inference.pre", model.inference.pre);
  switch (model.inference.mode) {
    case RecurrentMode::vanilla_lstm:
      add_cell(reg, "inference.cell", model.inference.cell);
      break;
    case RecurrentMode::bi_lstm:
      add_cell(reg, "inference.cell", model.inference.cell);
      add_cell(reg, "inference.cell_back", model.inference.cell_backward);
      break;
    case RecurrentMode::no_lstm:
      add_dense(reg, "inference.replacement", model.inference.replacement);
      break;
  }
  add_dense(reg, "inference.mean_head", model.inference.mean_head);
  add_dense(reg, "inference.log_var_head", model.inference.log_var_head);
  add_mlp(reg, "prior.body", model.prior.body);
  add_dense(reg, "prior.mean_head", model.prior.mean_head);
  add_dense(reg, "prior.log_var_head", model.prior.log_var_head);
  return reg;
}

int64_t parameter_count(Model& model) { return registry_of(model).total_size(); }

}  // namespace vrff
