#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <vector>

#include "vrff/gradcheck.hpp"
#include "vrff/graph.hpp"
#include "vrff/rng.hpp"

using vrff::Graph;
using vrff::Rng;
using vrff::Tensor;
using vrff::Var;

namespace {

// Scalar loss from an arbitrary output: sum of entries times fixed weights,
// so every output entry contributes a distinct gradient path.
Var weighted(Graph& g, Var out, const Tensor& w) {
  return vrff::sum_all(out * g.constant(w));
}

using Builder = std::function<Var(Graph&, const std::vector<Var>&)>;

// Compares the reverse-mode gradient of every input against central finite
// differences, rebuilding the graph from scratch per perturbation.
void fd_check(const Builder& build, const std::vector<Tensor>& inputs,
              double tol = 1e-5) {
  Graph g;
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(g.leaf(t, true));
  Var loss = build(g, vars);
  REQUIRE(g.value(loss).size() == 1);
  g.backward(loss);

  for (size_t k = 0; k < inputs.size(); ++k) {
    auto f = [&](const Tensor& x) {
      Graph h;
      std::vector<Var> vs;
      for (size_t j = 0; j < inputs.size(); ++j)
        vs.push_back(h.leaf(j == k ? x : inputs[j], true));
      return h.value(build(h, vs))[0];
    };
    Tensor fd = vrff::finite_difference_gradient(f, inputs[k]);
    CAPTURE(k);
    CHECK(vrff::relative_error(g.grad(vars[k]), fd) < tol);
  }
}

Tensor away_from_zero(Tensor t, double margin = 0.2) {
  for (int64_t i = 0; i < t.size(); ++i) {
    if (std::abs(t[i]) < margin) t[i] = t[i] < 0 ? -margin : margin;
  }
  return t;
}

}  // namespace

TEST_CASE("elementwise add/sub/mul gradients match finite differences") {
  Rng rng(11);
  Tensor a = rng.normal_matrix(3, 4);
  Tensor b = rng.normal_matrix(3, 4);
  Tensor w = rng.normal_matrix(3, 4);

  fd_check([&](Graph& g, const std::vector<Var>& v) { return weighted(g, v[0] + v[1], w); },
           {a, b});
  fd_check([&](Graph& g, const std::vector<Var>& v) { return weighted(g, v[0] - v[1], w); },
           {a, b});
  fd_check([&](Graph& g, const std::vector<Var>& v) { return weighted(g, v[0] * v[1], w); },
           {a, b});
}

TEST_CASE("matmul value and gradients") {
  Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor b({3, 2}, {7, 8, 9, 10, 11, 12});
  Graph g;
  Tensor p = g.value(matmul(g.constant(a), g.constant(b)));
  CHECK(p.at(0, 0) == 58.0);
  CHECK(p.at(0, 1) == 64.0);
  CHECK(p.at(1, 0) == 139.0);
  CHECK(p.at(1, 1) == 154.0);

  Rng rng(12);
  Tensor x = rng.normal_matrix(3, 4);
  Tensor y = rng.normal_matrix(4, 2);
  Tensor w = rng.normal_matrix(3, 2);
  fd_check([&](Graph& h, const std::vector<Var>& v) { return weighted(h, matmul(v[0], v[1]), w); },
           {x, y});
}

TEST_CASE("transpose value and gradient") {
  Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
  Graph g;
  Tensor t = g.value(transposed(g.constant(a)));
  CHECK(t.rows() == 3);
  CHECK(t.cols() == 2);
  CHECK(t.at(2, 0) == 3.0);
  CHECK(t.at(2, 1) == 6.0);

  Rng rng(13);
  Tensor x = rng.normal_matrix(3, 5);
  Tensor w = rng.normal_matrix(5, 3);
  fd_check([&](Graph& h, const std::vector<Var>& v) { return weighted(h, transposed(v[0]), w); },
           {x});
}

TEST_CASE("concat gradients split cleanly") {
  Rng rng(14);
  Tensor a = rng.normal_matrix(2, 3);
  Tensor b = rng.normal_matrix(4, 3);
  Tensor wr = rng.normal_matrix(6, 3);
  fd_check([&](Graph& g, const std::vector<Var>& v) { return weighted(g, concat_rows(v[0], v[1]), wr); },
           {a, b});

  Tensor c = rng.normal_matrix(3, 2);
  Tensor d = rng.normal_matrix(3, 4);
  Tensor wc = rng.normal_matrix(3, 6);
  fd_check([&](Graph& g, const std::vector<Var>& v) { return weighted(g, concat_cols(v[0], v[1]), wc); },
           {c, d});
}

TEST_CASE("slice is half-open in both axes") {
  Tensor a({4, 3}, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11});
  Graph g;
  Tensor s = g.value(slice(g.constant(a), 1, 3, 0, 2));
  CHECK(s.rows() == 2);
  CHECK(s.cols() == 2);
  CHECK(s.at(0, 0) == 3.0);
  CHECK(s.at(1, 1) == 7.0);

  Tensor r = g.value(slice_rows(g.constant(a), 1, 3));
  CHECK(r.rows() == 2);
  CHECK(r.at(0, 0) == 3.0);
  CHECK(r.at(1, 2) == 8.0);

  Rng rng(15);
  Tensor x = rng.normal_matrix(5, 4);
  Tensor w = rng.normal_matrix(2, 3);
  fd_check([&](Graph& h, const std::vector<Var>& v) { return weighted(h, slice(v[0], 2, 4, 1, 4), w); },
           {x});
}

TEST_CASE("reductions match finite differences") {
  Rng rng(16);
  Tensor x = rng.normal_matrix(3, 4);

  fd_check([&](Graph& g, const std::vector<Var>& v) { return scale(sum_all(v[0]), 1.3); }, {x});
  fd_check([&](Graph& g, const std::vector<Var>& v) { return scale(mean_all(v[0]), -0.7); }, {x});

  Tensor w1 = rng.normal_matrix(1, 4);
  fd_check([&](Graph& g, const std::vector<Var>& v) { return weighted(g, sum_rows(v[0]), w1); }, {x});
  fd_check([&](Graph& g, const std::vector<Var>& v) { return weighted(g, mean_rows(v[0]), w1); }, {x});

  Tensor w2 = rng.normal_matrix(3, 1);
  fd_check([&](Graph& g, const std::vector<Var>& v) { return weighted(g, sum_cols(v[0]), w2); }, {x});

  // value spot checks
  Graph g;
  Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(g.value(sum_all(g.constant(t)))[0] == 21.0);
  CHECK(g.value(mean_all(g.constant(t)))[0] == 3.5);
  Tensor sr = g.value(sum_rows(g.constant(t)));
  CHECK(sr.rows() == 1);
  CHECK(sr.at(0, 0) == 5.0);
  CHECK(sr.at(0, 2) == 9.0);
  Tensor sc = g.value(sum_cols(g.constant(t)));
  CHECK(sc.cols() == 1);
  CHECK(sc.at(0, 0) == 6.0);
  CHECK(sc.at(1, 0) == 15.0);
  Tensor mr = g.value(mean_rows(g.constant(t)));
  CHECK(mr.at(0, 0) == 2.5);
}

TEST_CASE("smooth elementwise ops match finite differences") {
  Rng rng(17);
  Tensor x = rng.normal_matrix(3, 4);
  Tensor w = rng.normal_matrix(3, 4);

  fd_check([&](Graph& g, const std::vector<Var>& v) { return weighted(g, tanh(v[0]), w); }, {x});
  fd_check([&](Graph& g, const std::vector<Var>& v) { return weighted(g, sigmoid(v[0]), w); }, {x});
  fd_check([&](Graph& g, const std::vector<Var>& v) { return weighted(g, exp(v[0]), w); }, {x});
  fd_check([&](Graph& g, const std::vector<Var>& v) { return weighted(g, square(v[0]), w); }, {x});
  fd_check([&](Graph& g, const std::vector<Var>& v) { return weighted(g, negate(v[0]), w); }, {x});
  fd_check([&](Graph& g, const std::vector<Var>& v) { return weighted(g, cos(v[0]), w); }, {x});
  fd_check([&](Graph& g, const std::vector<Var>& v) { return weighted(g, scale(v[0], -2.5), w); }, {x});
  fd_check([&](Graph& g, const std::vector<Var>& v) { return weighted(g, add_scalar(v[0], 3.25), w); }, {x});

  Tensor pos = x;
  for (int64_t i = 0; i < pos.size(); ++i) pos[i] = std::abs(pos[i]) + 0.5;
  fd_check([&](Graph& g, const std::vector<Var>& v) { return weighted(g, log(v[0]), w); }, {pos});
}

TEST_CASE("kinked activations away from the kink") {
  Rng rng(18);
  Tensor x = away_from_zero(rng.normal_matrix(3, 4));
  Tensor w = rng.normal_matrix(3, 4);
  fd_check([&](Graph& g, const std::vector<Var>& v) { return weighted(g, relu(v[0]), w); }, {x});
  fd_check([&](Graph& g, const std::vector<Var>& v) { return weighted(g, elu(v[0]), w); }, {x});

  // elu value: identity above zero, exp(x)-1 below
  Graph g;
  Tensor t({1, 3}, {2.0, -1.0, -3.0});
  Tensor e = g.value(elu(g.constant(t)));
  CHECK(e.at(0, 0) == 2.0);
  CHECK(e.at(0, 1) == doctest::Approx(std::exp(-1.0) - 1.0).epsilon(1e-14));
  CHECK(e.at(0, 2) == doctest::Approx(std::exp(-3.0) - 1.0).epsilon(1e-14));
  Tensor r = g.value(relu(g.constant(t)));
  CHECK(r.at(0, 0) == 2.0);
  CHECK(r.at(0, 1) == 0.0);
}

TEST_CASE("softmax rows sum to one and gradients check out") {
  Rng rng(19);
  Tensor x = rng.normal_matrix(4, 5);
  Graph g;
  Tensor s = g.value(softmax_rows(g.constant(x)));
  for (int64_t r = 0; r < 4; ++r) {
    double total = 0.0;
    for (int64_t c = 0; c < 5; ++c) {
      CHECK(s.at(r, c) > 0.0);
      total += s.at(r, c);
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
  }

  // shift invariance per row
  Tensor shifted = x;
  for (int64_t c = 0; c < 5; ++c) shifted.at(1, c) += 100.0;
  Tensor s2 = g.value(softmax_rows(g.constant(shifted)));
  for (int64_t c = 0; c < 5; ++c)
    CHECK(s2.at(1, c) == doctest::Approx(s.at(1, c)).epsilon(1e-12));

  Tensor w = rng.normal_matrix(4, 5);
  fd_check([&](Graph& h, const std::vector<Var>& v) { return weighted(h, softmax_rows(v[0]), w); },
           {x});
}

TEST_CASE("broadcast_rows stacks one row and sums its gradient") {
  Rng rng(20);
  Tensor row = rng.normal_matrix(1, 4);
  Graph g;
  Tensor b = g.value(broadcast_rows(g.constant(row), 5));
  CHECK(b.rows() == 5);
  for (int64_t r = 0; r < 5; ++r)
    for (int64_t c = 0; c < 4; ++c) CHECK(b.at(r, c) == row.at(0, c));

  Tensor w = rng.normal_matrix(5, 4);
  fd_check([&](Graph& h, const std::vector<Var>& v) { return weighted(h, broadcast_rows(v[0], 5), w); },
           {row});

  CHECK_THROWS_AS(broadcast_rows(g.constant(rng.normal_matrix(2, 3)), 4), std::invalid_argument);
}

TEST_CASE("cholesky_solve matches a dense inverse and differentiates through the chain") {
  Rng rng(21);
  const int64_t n = 5;
  Tensor m = rng.normal_matrix(n, n);
  Tensor b = rng.normal_matrix(n, 2);

  // value vs Eigen on A = M M^T + 5 I
  Tensor a = Tensor::diagonal(n, 5.0);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < n; ++j)
      for (int64_t k = 0; k < n; ++k) a.at(i, j) += m.at(i, k) * m.at(j, k);

  Graph g;
  Tensor x = g.value(cholesky_solve(g.constant(a), g.constant(b)));

  Eigen::MatrixXd ea(n, n), eb(n, 2);
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < n; ++j) ea(i, j) = a.at(i, j);
    eb(i, 0) = b.at(i, 0);
    eb(i, 1) = b.at(i, 1);
  }
  Eigen::MatrixXd ex = ea.llt().solve(eb);
  for (int64_t i = 0; i < n; ++i) {
    CHECK(x.at(i, 0) == doctest::Approx(ex(i, 0)).epsilon(1e-10));
    CHECK(x.at(i, 1) == doctest::Approx(ex(i, 1)).epsilon(1e-10));
  }

  // gradient through the SPD chain A(M) = M M^T + 5I, as used by the solver
  Tensor w = rng.normal_matrix(n, 2);
  fd_check(
      [&](Graph& h, const std::vector<Var>& v) {
        Var spd = matmul(v[0], transposed(v[0])) + h.constant(Tensor::diagonal(n, 5.0));
        return weighted(h, cholesky_solve(spd, v[1]), w);
      },
      {m, b}, 1e-4);

  // non-SPD input is refused
  Tensor bad = Tensor::zeros(2, 2);
  bad.at(0, 0) = 1.0;
  bad.at(1, 1) = -1.0;
  CHECK_THROWS_AS(cholesky_solve(g.constant(bad), g.constant(Tensor::ones(2, 1))),
                  std::runtime_error);
}

TEST_CASE("composite network-shaped graph matches finite differences") {
  Rng rng(22);
  Tensor x = rng.normal_matrix(4, 3);
  Tensor w1 = rng.normal_matrix(3, 6);
  Tensor b1 = rng.normal_matrix(1, 6);
  Tensor w2 = rng.normal_matrix(6, 2);
  Tensor wl = rng.normal_matrix(4, 2);

  fd_check(
      [&](Graph& g, const std::vector<Var>& v) {
        Var h = tanh(matmul(v[0], v[1]) + broadcast_rows(v[2], 4));
        Var out = softmax_rows(matmul(h, v[3]));
        return weighted(g, out, wl);
      },
      {x, w1, b1, w2}, 1e-4);
}

TEST_CASE("Binder reuses one leaf per parameter and accumulates its gradient") {
  Rng rng(23);
  Tensor w = rng.normal_matrix(3, 3);
  Tensor x1 = rng.normal_matrix(2, 3);
  Tensor x2 = rng.normal_matrix(2, 3);
  Tensor lw = rng.normal_matrix(2, 3);

  Graph g;
  vrff::Binder bind(g);
  CHECK_FALSE(bind.bound(w));
  CHECK_FALSE(bind.lookup(w).valid());
  Var wa = bind(w);
  Var wb = bind(w);
  CHECK(wa.id == wb.id);
  CHECK(bind.bound(w));
  CHECK(bind.lookup(w).id == wa.id);

  Var loss = weighted(g, matmul(g.constant(x1), wa) + matmul(g.constant(x2), wb), lw);
  g.backward(loss);
  Tensor got = g.grad(wa);

  auto f = [&](const Tensor& wt) {
    Graph h;
    Var wv = h.leaf(wt, true);
    Var l = weighted(h, matmul(h.constant(x1), wv) + matmul(h.constant(x2), wv), lw);
    return h.value(l)[0];
  };
  Tensor fd = vrff::finite_difference_gradient(f, w);
  CHECK(vrff::relative_error(got, fd) < 1e-5);
}

TEST_CASE("backward demands a scalar loss") {
  Graph g;
  Var v = g.leaf(Tensor::ones(2, 2), true);
  CHECK_THROWS_AS(g.backward(v), std::invalid_argument);
}

TEST_CASE("grad of an unreached node is zero-filled at the node's shape") {
  Graph g;
  Var used = g.leaf(Tensor::ones(2, 2), true);
  Var unused = g.leaf(Tensor::ones(3, 1), true);
  Var loss = sum_all(used);
  CHECK_FALSE(g.has_grad(used));
  g.backward(loss);
  CHECK(g.has_grad(used));
  const Tensor& gz = g.grad(unused);
  CHECK(gz.rows() == 3);
  for (int64_t i = 0; i < gz.size(); ++i) CHECK(gz[i] == 0.0);
}

TEST_CASE("identical graphs give bit-identical values and gradients") {
  Rng rng(24);
  Tensor x = rng.normal_matrix(3, 3);
  Tensor w = rng.normal_matrix(3, 3);

  auto run = [&](Tensor* val, Tensor* grad) {
    Graph g;
    Var xv = g.leaf(x, true);
    Var loss = sum_all(softmax_rows(matmul(tanh(xv), g.constant(w))) * g.constant(w));
    *val = g.value(loss);
    g.backward(loss);
    *grad = g.grad(xv);
  };
  Tensor v1, g1, v2, g2;
  run(&v1, &g1);
  run(&v2, &g2);
  CHECK(v1.raw() == v2.raw());
  CHECK(g1.raw() == g2.raw());
}

TEST_CASE("shape mismatches are rejected") {
  Graph g;
  Var a = g.constant(Tensor::ones(2, 3));
  Var b = g.constant(Tensor::ones(3, 2));
  CHECK_THROWS_AS(a + b, std::invalid_argument);
  CHECK_THROWS_AS(a * b, std::invalid_argument);
  CHECK_THROWS_AS(matmul(a, g.constant(Tensor::ones(2, 2))), std::invalid_argument);
  CHECK_THROWS_AS(concat_rows(a, b), std::invalid_argument);
  CHECK_THROWS_AS(concat_cols(g.constant(Tensor::ones(2, 2)), b), std::invalid_argument);
  CHECK_THROWS_AS(slice(a, 0, 3, 0, 3), std::invalid_argument);
  CHECK_THROWS_AS(slice(a, 1, 1, 0, 2), std::invalid_argument);
  CHECK_THROWS_AS(cholesky_solve(a, b), std::invalid_argument);
}
