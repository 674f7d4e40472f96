#include "vrff/graph.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace vrff {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

std::string shapes(const Tensor& a, const Tensor& b) {
  return a.shape_str() + " vs " + b.shape_str();
}

Tensor matmul_values(const Tensor& a, const Tensor& b) {
  const int64_t m = a.rows(), k = a.cols(), n = b.cols();
  if (k != b.rows()) fail("matmul: inner dimensions differ, " + shapes(a, b));
  Tensor c({m, n});
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t l = 0; l < k; ++l) {
      const double av = pa[i * k + l];
      if (av == 0.0) continue;
      const double* brow = pb + l * n;
      double* crow = pc + i * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

// C += A * B
void matmul_add(Tensor& c, const Tensor& a, const Tensor& b) {
  const int64_t m = a.rows(), k = a.cols(), n = b.cols();
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t l = 0; l < k; ++l) {
      const double av = pa[i * k + l];
      if (av == 0.0) continue;
      const double* brow = pb + l * n;
      double* crow = pc + i * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C += A^T * B  (A is k x m, result m x n)
void matmul_add_at_b(Tensor& c, const Tensor& a, const Tensor& b) {
  const int64_t k = a.rows(), m = a.cols(), n = b.cols();
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
  for (int64_t l = 0; l < k; ++l) {
    const double* arow = pa + l * m;
    const double* brow = pb + l * n;
    for (int64_t i = 0; i < m; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* crow = pc + i * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C += A * B^T  (B is n x k, A is m x k, result m x n)
void matmul_add_a_bt(Tensor& c, const Tensor& a, const Tensor& b) {
  const int64_t m = a.rows(), k = a.cols(), n = b.rows();
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
  for (int64_t i = 0; i < m; ++i) {
    const double* arow = pa + i * k;
    double* crow = pc + i * n;
    for (int64_t j = 0; j < n; ++j) {
      const double* brow = pb + j * k;
      double s = 0.0;
      for (int64_t l = 0; l < k; ++l) s += arow[l] * brow[l];
      crow[j] += s;
    }
  }
}

Tensor transpose_values(const Tensor& a) {
  Tensor t({a.cols(), a.rows()});
  for (int64_t i = 0; i < a.rows(); ++i)
    for (int64_t j = 0; j < a.cols(); ++j) t.at(j, i) = a.at(i, j);
  return t;
}

// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
// Throws std::runtime_error when a pivot is not strictly positive.
Tensor cholesky_factor(const Tensor& a) {
  const int64_t n = a.rows();
  if (a.cols() != n) fail("cholesky_solve: matrix is not square, " + a.shape_str());
  Tensor l({n, n});
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j <= i; ++j) {
      double s = a.at(i, j);
      for (int64_t k = 0; k < j; ++k) s -= l.at(i, k) * l.at(j, k);
      if (i == j) {
        if (!(s > 0.0) || !std::isfinite(s)) {
          std::ostringstream os;
          os << "cholesky_solve: matrix is not positive definite (pivot " << s
             << " at index " << i << ")";
          throw std::runtime_error(os.str());
        }
        l.at(i, j) = std::sqrt(s);
      } else {
        l.at(i, j) = s / l.at(j, j);
      }
    }
  }
  return l;
}

// Solves (L L^T) X = B given the lower factor L.
Tensor cholesky_backsolve(const Tensor& l, const Tensor& b) {
  const int64_t n = l.rows(), m = b.cols();
  Tensor x = b;
  // forward: L y = b
  for (int64_t c = 0; c < m; ++c) {
    for (int64_t i = 0; i < n; ++i) {
      double s = x.at(i, c);
      for (int64_t k = 0; k < i; ++k) s -= l.at(i, k) * x.at(k, c);
      x.at(i, c) = s / l.at(i, i);
    }
    // backward: L^T x = y
    for (int64_t i = n - 1; i >= 0; --i) {
      double s = x.at(i, c);
      for (int64_t k = i + 1; k < n; ++k) s -= l.at(k, i) * x.at(k, c);
      x.at(i, c) = s / l.at(i, i);
    }
  }
  return x;
}

}  // namespace

int Graph::check(Var v) const {
  if (v.graph != this || v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
    fail("Var does not belong to this graph");
  return v.id;
}

Var Graph::leaf(Tensor value, bool trainable) {
  if (value.rank() != 2) fail("graph values must be rank 2, got " + value.shape_str());
  Node n;
  n.op = Op::leaf;
  n.value = std::move(value);
  n.trainable = trainable;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

const Tensor& Graph::value(Var v) const { return nodes_[check(v)].value; }

bool Graph::has_grad(Var v) const { return !nodes_[check(v)].grad.empty(); }

Tensor& Graph::grad_buffer(int id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

const Tensor& Graph::grad(Var v) { return grad_buffer(check(v)); }

Var Graph::apply(Op op, Var a) { return apply(op, a, Var{}); }

Var Graph::apply_with_scalar(Op op, Var a, double s) {
  Var v = apply(op, a, Var{});
  nodes_[v.id].scalar = s;
  // recompute forward with the scalar now that it is set
  Node& n = nodes_[v.id];
  const Tensor& x = nodes_[n.parents[0]].value;
  if (op == Op::scale) {
    for (int64_t i = 0; i < x.size(); ++i) n.value[i] = x[i] * s;
  } else if (op == Op::add_scalar) {
    for (int64_t i = 0; i < x.size(); ++i) n.value[i] = x[i] + s;
  } else {
    fail("apply_with_scalar: op does not take a scalar attribute");
  }
  return v;
}

Var Graph::apply_slice(Var a, int64_t r0, int64_t r1, int64_t c0, int64_t c1) {
  const int ia = check(a);
  const Tensor& x = nodes_[ia].value;
  if (r0 < 0 || r1 > x.rows() || c0 < 0 || c1 > x.cols() || r0 >= r1 || c0 >= c1) {
    std::ostringstream os;
    os << "slice: bounds [" << r0 << "," << r1 << ")x[" << c0 << "," << c1
       << ") invalid for " << x.shape_str();
    fail(os.str());
  }
  Node n;
  n.op = Op::slice;
  n.parents = {ia, -1};
  n.bounds = {r0, r1, c0, c1};
  n.value = Tensor({r1 - r0, c1 - c0});
  for (int64_t i = r0; i < r1; ++i)
    for (int64_t j = c0; j < c1; ++j) n.value.at(i - r0, j - c0) = x.at(i, j);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::apply(Op op, Var a, Var b) {
  const int ia = check(a);
  const int ib = b.valid() ? check(b) : -1;
  const Tensor& x = nodes_[ia].value;
  const Tensor* y = ib >= 0 ? &nodes_[ib].value : nullptr;

  Node n;
  n.op = op;
  n.parents = {ia, ib};

  switch (op) {
    case Op::add:
    case Op::sub:
    case Op::mul: {
      require_same_shape(x, *y, op == Op::add ? "add" : (op == Op::sub ? "sub" : "mul"));
      n.value = Tensor(x.shape());
      for (int64_t i = 0; i < x.size(); ++i) {
        n.value[i] = op == Op::add   ? x[i] + (*y)[i]
                     : op == Op::sub ? x[i] - (*y)[i]
                                     : x[i] * (*y)[i];
      }
      break;
    }
    case Op::matmul:
      n.value = matmul_values(x, *y);
      break;
    case Op::transpose:
      n.value = transpose_values(x);
      break;
    case Op::concat_rows: {
      if (x.cols() != y->cols())
        fail("concat_rows: column counts differ, " + shapes(x, *y));
      n.value = Tensor({x.rows() + y->rows(), x.cols()});
      std::copy(x.data(), x.data() + x.size(), n.value.data());
      std::copy(y->data(), y->data() + y->size(), n.value.data() + x.size());
      break;
    }
    case Op::concat_cols: {
      if (x.rows() != y->rows())
        fail("concat_cols: row counts differ, " + shapes(x, *y));
      n.value = Tensor({x.rows(), x.cols() + y->cols()});
      for (int64_t i = 0; i < x.rows(); ++i) {
        for (int64_t j = 0; j < x.cols(); ++j) n.value.at(i, j) = x.at(i, j);
        for (int64_t j = 0; j < y->cols(); ++j) n.value.at(i, x.cols() + j) = y->at(i, j);
      }
      break;
    }
    case Op::sum_all:
    case Op::mean_all: {
      double s = 0.0;
      for (int64_t i = 0; i < x.size(); ++i) s += x[i];
      if (op == Op::mean_all) s /= static_cast<double>(x.size());
      n.value = Tensor::scalar(s);
      break;
    }
    case Op::sum_rows:
    case Op::mean_rows: {
      n.value = Tensor({1, x.cols()});
      for (int64_t i = 0; i < x.rows(); ++i)
        for (int64_t j = 0; j < x.cols(); ++j) n.value.at(0, j) += x.at(i, j);
      if (op == Op::mean_rows) {
        for (int64_t j = 0; j < x.cols(); ++j)
          n.value.at(0, j) /= static_cast<double>(x.rows());
      }
      break;
    }
    case Op::sum_cols: {
      n.value = Tensor({x.rows(), 1});
      for (int64_t i = 0; i < x.rows(); ++i) {
        double s = 0.0;
        for (int64_t j = 0; j < x.cols(); ++j) s += x.at(i, j);
        n.value.at(i, 0) = s;
      }
      break;
    }
    case Op::tanh:
    case Op::sigmoid:
    case Op::relu:
    case Op::elu:
    case Op::exp:
    case Op::log:
    case Op::square:
    case Op::negate:
    case Op::cos: {
      n.value = Tensor(x.shape());
      for (int64_t i = 0; i < x.size(); ++i) {
        const double v = x[i];
        switch (op) {
          case Op::tanh: n.value[i] = std::tanh(v); break;
          case Op::sigmoid: n.value[i] = 1.0 / (1.0 + std::exp(-v)); break;
          case Op::relu: n.value[i] = v > 0.0 ? v : 0.0; break;
          case Op::elu: n.value[i] = v > 0.0 ? v : std::exp(v) - 1.0; break;
          case Op::exp: n.value[i] = std::exp(v); break;
          case Op::log: n.value[i] = std::log(v); break;
          case Op::square: n.value[i] = v * v; break;
          case Op::negate: n.value[i] = -v; break;
          case Op::cos: n.value[i] = std::cos(v); break;
          default: break;
        }
      }
      break;
    }
    case Op::softmax_rows: {
      n.value = Tensor(x.shape());
      for (int64_t i = 0; i < x.rows(); ++i) {
        double mx = x.at(i, 0);
        for (int64_t j = 1; j < x.cols(); ++j) mx = std::max(mx, x.at(i, j));
        double denom = 0.0;
        for (int64_t j = 0; j < x.cols(); ++j) {
          const double e = std::exp(x.at(i, j) - mx);
          n.value.at(i, j) = e;
          denom += e;
        }
        for (int64_t j = 0; j < x.cols(); ++j) n.value.at(i, j) /= denom;
      }
      break;
    }
    case Op::scale:
    case Op::add_scalar:
      // forward recomputed in apply_with_scalar once the scalar is known
      n.value = Tensor(x.shape());
      break;
    case Op::cholesky_solve: {
      n.factor = cholesky_factor(x);
      if (x.rows() != y->rows())
        fail("cholesky_solve: row counts differ, " + shapes(x, *y));
      n.value = cholesky_backsolve(n.factor, *y);
      break;
    }
    case Op::leaf:
    case Op::slice:
      fail("apply: op requires a dedicated constructor");
  }

  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

void Graph::backward(Var loss) {
  const int root = check(loss);
  const Tensor& lv = nodes_[root].value;
  if (lv.size() != 1)
    fail("backward: loss must be scalar (1x1), got " + lv.shape_str());

  for (Node& n : nodes_) n.grad = Tensor();
  grad_buffer(root)[0] = 1.0;

  for (int id = root; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.grad.empty() || n.op == Op::leaf) continue;
    const Tensor& g = n.grad;
    const int pa = n.parents[0];
    const int pb = n.parents[1];
    const Tensor& x = nodes_[pa].value;

    switch (n.op) {
      case Op::add: {
        Tensor& da = grad_buffer(pa);
        Tensor& db = grad_buffer(pb);
        for (int64_t i = 0; i < g.size(); ++i) {
          da[i] += g[i];
          db[i] += g[i];
        }
        break;
      }
      case Op::sub: {
        Tensor& da = grad_buffer(pa);
        Tensor& db = grad_buffer(pb);
        for (int64_t i = 0; i < g.size(); ++i) {
          da[i] += g[i];
          db[i] -= g[i];
        }
        break;
      }
      case Op::mul: {
        const Tensor& y = nodes_[pb].value;
        Tensor& da = grad_buffer(pa);
        Tensor& db = grad_buffer(pb);
        for (int64_t i = 0; i < g.size(); ++i) {
          da[i] += g[i] * y[i];
          db[i] += g[i] * x[i];
        }
        break;
      }
      case Op::matmul: {
        const Tensor& y = nodes_[pb].value;
        matmul_add_a_bt(grad_buffer(pa), g, y);   // dA += G B^T
        matmul_add_at_b(grad_buffer(pb), x, g);   // dB += A^T G
        break;
      }
      case Op::transpose: {
        Tensor& da = grad_buffer(pa);
        for (int64_t i = 0; i < g.rows(); ++i)
          for (int64_t j = 0; j < g.cols(); ++j) da.at(j, i) += g.at(i, j);
        break;
      }
      case Op::concat_rows: {
        Tensor& da = grad_buffer(pa);
        Tensor& db = grad_buffer(pb);
        for (int64_t i = 0; i < da.size(); ++i) da[i] += g[i];
        for (int64_t i = 0; i < db.size(); ++i) db[i] += g[da.size() + i];
        break;
      }
      case Op::concat_cols: {
        Tensor& da = grad_buffer(pa);
        Tensor& db = grad_buffer(pb);
        const int64_t ca = da.cols(), cb = db.cols();
        for (int64_t i = 0; i < da.rows(); ++i) {
          for (int64_t j = 0; j < ca; ++j) da.at(i, j) += g.at(i, j);
          for (int64_t j = 0; j < cb; ++j) db.at(i, j) += g.at(i, ca + j);
        }
        break;
      }
      case Op::slice: {
        Tensor& da = grad_buffer(pa);
        const auto [r0, r1, c0, c1] = n.bounds;
        for (int64_t i = r0; i < r1; ++i)
          for (int64_t j = c0; j < c1; ++j) da.at(i, j) += g.at(i - r0, j - c0);
        break;
      }
      case Op::sum_all: {
        Tensor& da = grad_buffer(pa);
        const double gv = g[0];
        for (int64_t i = 0; i < da.size(); ++i) da[i] += gv;
        break;
      }
      case Op::mean_all: {
        Tensor& da = grad_buffer(pa);
        const double gv = g[0] / static_cast<double>(da.size());
        for (int64_t i = 0; i < da.size(); ++i) da[i] += gv;
        break;
      }
      case Op::sum_rows: {
        Tensor& da = grad_buffer(pa);
        for (int64_t i = 0; i < da.rows(); ++i)
          for (int64_t j = 0; j < da.cols(); ++j) da.at(i, j) += g.at(0, j);
        break;
      }
      case Op::mean_rows: {
        Tensor& da = grad_buffer(pa);
        const double inv = 1.0 / static_cast<double>(da.rows());
        for (int64_t i = 0; i < da.rows(); ++i)
          for (int64_t j = 0; j < da.cols(); ++j) da.at(i, j) += g.at(0, j) * inv;
        break;
      }
      case Op::sum_cols: {
        Tensor& da = grad_buffer(pa);
        for (int64_t i = 0; i < da.rows(); ++i)
          for (int64_t j = 0; j < da.cols(); ++j) da.at(i, j) += g.at(i, 0);
        break;
      }
      case Op::tanh: {
        Tensor& da = grad_buffer(pa);
        const Tensor& y = n.value;
        for (int64_t i = 0; i < g.size(); ++i) da[i] += g[i] * (1.0 - y[i] * y[i]);
        break;
      }
      case Op::sigmoid: {
        Tensor& da = grad_buffer(pa);
        const Tensor& y = n.value;
        for (int64_t i = 0; i < g.size(); ++i) da[i] += g[i] * y[i] * (1.0 - y[i]);
        break;
      }
      case Op::relu: {
        Tensor& da = grad_buffer(pa);
        for (int64_t i = 0; i < g.size(); ++i) da[i] += x[i] > 0.0 ? g[i] : 0.0;
        break;
      }
      case Op::elu: {
        Tensor& da = grad_buffer(pa);
        const Tensor& y = n.value;
        // d/dx = 1 for x>0, exp(x) = y+1 otherwise
        for (int64_t i = 0; i < g.size(); ++i)
          da[i] += g[i] * (x[i] > 0.0 ? 1.0 : y[i] + 1.0);
        break;
      }
      case Op::softmax_rows: {
        Tensor& da = grad_buffer(pa);
        const Tensor& y = n.value;
        for (int64_t i = 0; i < y.rows(); ++i) {
          double dot = 0.0;
          for (int64_t j = 0; j < y.cols(); ++j) dot += g.at(i, j) * y.at(i, j);
          for (int64_t j = 0; j < y.cols(); ++j)
            da.at(i, j) += y.at(i, j) * (g.at(i, j) - dot);
        }
        break;
      }
      case Op::exp: {
        Tensor& da = grad_buffer(pa);
        const Tensor& y = n.value;
        for (int64_t i = 0; i < g.size(); ++i) da[i] += g[i] * y[i];
        break;
      }
      case Op::log: {
        Tensor& da = grad_buffer(pa);
        for (int64_t i = 0; i < g.size(); ++i) da[i] += g[i] / x[i];
        break;
      }
      case Op::square: {
        Tensor& da = grad_buffer(pa);
        for (int64_t i = 0; i < g.size(); ++i) da[i] += 2.0 * g[i] * x[i];
        break;
      }
      case Op::negate: {
        Tensor& da = grad_buffer(pa);
        for (int64_t i = 0; i < g.size(); ++i) da[i] -= g[i];
        break;
      }
      case Op::cos: {
        Tensor& da = grad_buffer(pa);
        for (int64_t i = 0; i < g.size(); ++i) da[i] -= g[i] * std::sin(x[i]);
        break;
      }
      case Op::scale: {
        Tensor& da = grad_buffer(pa);
        for (int64_t i = 0; i < g.size(); ++i) da[i] += g[i] * n.scalar;
        break;
      }
      case Op::add_scalar: {
        Tensor& da = grad_buffer(pa);
        for (int64_t i = 0; i < g.size(); ++i) da[i] += g[i];
        break;
      }
      case Op::cholesky_solve: {
        // X = A^-1 B with A = L L^T.
        // dB = A^-1 G (reuse the factor); dA = -dB X^T.
        Tensor db_term = cholesky_backsolve(n.factor, g);
        Tensor& db = grad_buffer(pb);
        for (int64_t i = 0; i < db.size(); ++i) db[i] += db_term[i];
        Tensor& da = grad_buffer(pa);
        const Tensor& xval = n.value;
        const int64_t rows = da.rows(), cols = da.cols(), m = xval.cols();
        for (int64_t i = 0; i < rows; ++i)
          for (int64_t j = 0; j < cols; ++j) {
            double s = 0.0;
            for (int64_t c = 0; c < m; ++c) s += db_term.at(i, c) * xval.at(j, c);
            da.at(i, j) -= s;
          }
        break;
      }
      case Op::leaf:
        break;
    }
  }
}

Var Binder::operator()(const Tensor& param) {
  auto it = leaves_.find(&param);
  if (it != leaves_.end()) return it->second;
  Var v = graph_->leaf(param, /*trainable=*/true);
  leaves_.emplace(&param, v);
  return v;
}

bool Binder::bound(const Tensor& param) const { return leaves_.count(&param) > 0; }

Var Binder::lookup(const Tensor& param) const {
  auto it = leaves_.find(&param);
  return it == leaves_.end() ? Var{} : it->second;
}

namespace {
Graph& same_graph(Var a, Var b) {
  if (a.graph == nullptr || a.graph != b.graph)
    throw std::invalid_argument("operands belong to different graphs");
  return *a.graph;
}
}  // namespace

Var operator+(Var a, Var b) { return same_graph(a, b).apply(Op::add, a, b); }
Var operator-(Var a, Var b) { return same_graph(a, b).apply(Op::sub, a, b); }
Var operator*(Var a, Var b) { return same_graph(a, b).apply(Op::mul, a, b); }
Var matmul(Var a, Var b) { return same_graph(a, b).apply(Op::matmul, a, b); }
Var transposed(Var a) { return a.graph->apply(Op::transpose, a); }
Var concat_rows(Var a, Var b) { return same_graph(a, b).apply(Op::concat_rows, a, b); }
Var concat_cols(Var a, Var b) { return same_graph(a, b).apply(Op::concat_cols, a, b); }
Var slice(Var a, int64_t r0, int64_t r1, int64_t c0, int64_t c1) {
  return a.graph->apply_slice(a, r0, r1, c0, c1);
}
Var slice_rows(Var a, int64_t r0, int64_t r1) {
  return a.graph->apply_slice(a, r0, r1, 0, a.graph->value(a).cols());
}
Var broadcast_rows(Var row, int64_t n) {
  const Tensor& v = row.graph->value(row);
  if (v.rows() != 1) throw std::invalid_argument("broadcast_rows needs a 1xC row");
  if (n < 1) throw std::invalid_argument("broadcast_rows needs n >= 1");
  if (n == 1) return row;
  Var ones = row.graph->constant(Tensor::ones(n, 1));
  return matmul(ones, row);
}
Var sum_all(Var a) { return a.graph->apply(Op::sum_all, a); }
Var sum_rows(Var a) { return a.graph->apply(Op::sum_rows, a); }
Var sum_cols(Var a) { return a.graph->apply(Op::sum_cols, a); }
Var mean_all(Var a) { return a.graph->apply(Op::mean_all, a); }
Var mean_rows(Var a) { return a.graph->apply(Op::mean_rows, a); }
Var tanh(Var a) { return a.graph->apply(Op::tanh, a); }
Var sigmoid(Var a) { return a.graph->apply(Op::sigmoid, a); }
Var relu(Var a) { return a.graph->apply(Op::relu, a); }
Var elu(Var a) { return a.graph->apply(Op::elu, a); }
Var softmax_rows(Var a) { return a.graph->apply(Op::softmax_rows, a); }
Var exp(Var a) { return a.graph->apply(Op::exp, a); }
Var log(Var a) { return a.graph->apply(Op::log, a); }
Var square(Var a) { return a.graph->apply(Op::square, a); }
Var negate(Var a) { return a.graph->apply(Op::negate, a); }
Var cos(Var a) { return a.graph->apply(Op::cos, a); }
Var scale(Var a, double s) { return a.graph->apply_with_scalar(Op::scale, a, s); }
Var add_scalar(Var a, double s) { return a.graph->apply_with_scalar(Op::add_scalar, a, s); }
Var cholesky_solve(Var a, Var b) { return same_graph(a, b).apply(Op::cholesky_solve, a, b); }

}  // namespace vrff
