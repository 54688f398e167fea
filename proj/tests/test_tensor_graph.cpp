#include <cmath>

#include "doctest.h"
#include "spikestream/error.hpp"
#include "spikestream/gradcheck.hpp"
#include "spikestream/graph.hpp"
#include "spikestream/lif.hpp"
#include "spikestream/rng.hpp"
#include "spikestream/tensor.hpp"
#include "testutil.hpp"

using namespace spikestream;

TEST_CASE("tensor invariants") {
  Tensor t = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.numel() == 6);
  CHECK(t.shape_str() == "[2x3]");
  CHECK_THROWS_AS(Tensor({2, 3}, {1, 2}), Error);
  CHECK_THROWS_AS(Tensor::zeros({0, 3}), Error);

  t.ensure_grad();
  CHECK(t.grad.size() == t.data.size());

  Tensor bad = Tensor::from({2}, {1.0f, NAN});
  CHECK_THROWS_WITH_AS(check_finite(bad, "unit"),
                       doctest::Contains("unit"), Error);
}

TEST_CASE("argmax picks the largest element and breaks ties first") {
  CHECK(argmax(Tensor::from({3}, {0.1f, 0.9f, 0.3f})) == 1);
  CHECK(argmax(Tensor::from({3}, {0.5f, 0.5f, 0.1f})) == 0);
}

TEST_CASE("elementwise forward examples") {
  Graph g;
  Var a = g.constant(Tensor::from({2}, {1, 2}));
  Var b = g.constant(Tensor::from({2}, {3, 4}));
  CHECK(g.value(g.add(a, b)).data == std::vector<float>{4, 6});
  CHECK(g.value(g.scale(a, 0.0f)).data == std::vector<float>{0, 0});
  CHECK(g.value(g.exp(g.constant(Tensor::scalar(0.0f)))).data[0] == 1.0f);
  CHECK_THROWS_AS(g.log(g.constant(Tensor::scalar(-1.0f))), Error);
  CHECK_THROWS_AS(g.log(g.constant(Tensor::scalar(0.0f))), Error);
}

TEST_CASE("matmul forward examples and shape errors") {
  Graph g;
  Var a = g.constant(Tensor::from({1, 2}, {1, 2}));
  Var b = g.constant(Tensor::from({2, 1}, {3, 4}));
  CHECK(g.value(g.matmul(a, b)).data[0] == 11.0f);

  Var id = g.constant(Tensor::from({2, 2}, {1, 0, 0, 1}));
  Var v = g.constant(Tensor::from({2, 1}, {3, 4}));
  CHECK(g.value(g.matmul(id, v)).data == std::vector<float>{3, 4});

  Var bad = g.constant(Tensor::from({3, 1}, {1, 2, 3}));
  CHECK_THROWS_AS(g.matmul(a, bad), Error);
}

TEST_CASE("reductions") {
  Graph g;
  Var x = g.constant(Tensor::from({3}, {1, 2, 3}));
  CHECK(g.value(g.sum(x)).data[0] == 6.0f);
  Var m = g.constant(Tensor::from({2}, {5, 5}));
  CHECK(g.value(g.mean(m)).data[0] == 5.0f);

  Var grid = g.constant(Tensor::from({2, 2}, {1, 2, 3, 4}));
  CHECK(g.value(g.sum_axis0(grid)).data == std::vector<float>{4, 6});
  CHECK(g.value(g.mean_axis0(grid)).data == std::vector<float>{2, 3});
}

TEST_CASE("backward frozen examples") {
  {  // loss = sum(w), grad = ones
    Tensor w = Tensor::from({2}, {1, 2});
    w.ensure_grad();
    Graph g;
    Var loss = g.sum(g.leaf(&w));
    g.backward(loss);
    CHECK(w.grad == std::vector<float>{1, 1});
  }
  {  // loss = sum(w . w), w=[3] -> grad 6
    Tensor w = Tensor::from({1}, {3});
    w.ensure_grad();
    Graph g;
    Var wv = g.leaf(&w);
    g.backward(g.sum(g.mul(wv, wv)));
    CHECK(w.grad[0] == 6.0f);
  }
}

TEST_CASE("backward requires a scalar loss") {
  Tensor w = Tensor::from({2}, {1, 2});
  w.ensure_grad();
  Graph g;
  Var wv = g.leaf(&w);
  CHECK_THROWS_AS(g.backward(wv), Error);
}

TEST_CASE("gradient accumulation is additive and caller-zeroed") {
  Tensor w = Tensor::from({2}, {1, 2});
  w.ensure_grad();
  for (int round = 0; round < 2; ++round) {
    Graph g;
    g.backward(g.sum(g.leaf(&w)));
  }
  CHECK(w.grad == std::vector<float>{2, 2});
  w.zero_grad();
  CHECK(w.grad == std::vector<float>{0, 0});
}

TEST_CASE("broadcast add/mul with trailing and scalar rhs") {
  Graph g;
  Var a = g.constant(Tensor::from({2, 2}, {1, 2, 3, 4}));
  Var row = g.constant(Tensor::from({2}, {10, 20}));
  CHECK(g.value(g.add(a, row)).data == std::vector<float>{11, 22, 13, 24});
  Var s = g.constant(Tensor::scalar(2.0f));
  CHECK(g.value(g.mul(a, s)).data == std::vector<float>{2, 4, 6, 8});
  Var bad = g.constant(Tensor::from({3}, {1, 2, 3}));
  CHECK_THROWS_AS(g.add(a, bad), Error);
}

TEST_CASE("determinism: identical graphs give bit-identical results") {
  Rng rng(11);
  Tensor a = testutil::random_tensor({4, 4}, -1, 1, rng);
  Tensor b = testutil::random_tensor({4, 4}, -1, 1, rng);
  a.ensure_grad();
  b.ensure_grad();

  const auto run = [&](Tensor* ga, Tensor* gb) {
    Graph g(123);
    Var loss = g.sum(g.exp(g.scale(g.matmul(g.leaf(ga), g.leaf(gb)), 0.1f)));
    g.backward(loss);
    return g.value(loss).data[0];
  };
  a.zero_grad();
  b.zero_grad();
  const float l1 = run(&a, &b);
  const std::vector<float> grad1 = a.grad;
  a.zero_grad();
  b.zero_grad();
  const float l2 = run(&a, &b);
  CHECK(l1 == l2);
  CHECK(a.grad == grad1);
}

TEST_CASE("non-finite results raise errors naming the op") {
  Graph g;
  Var big = g.constant(Tensor::scalar(200.0f));
  CHECK_THROWS_WITH_AS(g.exp(big), doctest::Contains("exp"), Error);
}

TEST_CASE("spike op requires a registered surrogate") {
  install_triangle_surrogate();
  Graph g;
  Var u = g.constant(Tensor::from({3}, {0.2f, 1.0f, 1.7f}));
  Var s = g.spike(u, 1.0f, 1.0f);
  CHECK(g.value(s).data == std::vector<float>{0, 1, 1});
}

TEST_CASE("finite differences agree with analytic gradients for every op") {
  const auto rows = run_gradcheck(2026, 2);
  for (const auto& row : rows) {
    INFO(row.op, " max rel err ", row.max_rel_err);
    CHECK(row.pass);
  }
  CHECK(gradcheck_all_pass(rows));
  // spike + recurrence cases must be present
  bool has_spike = false, has_rec = false;
  for (const auto& row : rows) {
    has_spike = has_spike || row.op == "spike_surrogate";
    has_rec = has_rec || row.op == "lif_recurrence";
  }
  CHECK(has_spike);
  CHECK(has_rec);
}
