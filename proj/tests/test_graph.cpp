#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "skvg/attention.hpp"
#include "skvg/graph.hpp"

using namespace skvg;

namespace {

Mat random_mat(Rng& rng, int r, int c, double scale = 1.0) {
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.normal(0.0, scale);
  return m;
}

}  // namespace

TEST_CASE("softmax rows sum to one and are shift invariant") {
  Rng rng = Rng::seeded(1);
  Graph g;
  Mat x = random_mat(rng, 5, 7, 3.0);
  Var a = g.input(x);
  Var s = g.softmax_rows(a);
  const Mat& y = g.value(s);
  for (int r = 0; r < y.rows(); ++r) {
    CHECK(std::abs(y.row(r).sum() - 1.0) < 1e-12);
  }

  Mat shifted = x;
  shifted.array() += 123.456;  // same constant added to every logit of a row
  Graph g2;
  Var s2 = g2.softmax_rows(g2.input(shifted));
  CHECK((g2.value(s2) - y).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("masked softmax zeroes masked keys and rejects empty masks") {
  Graph g;
  Mat x(2, 4);
  x << 1, 2, 3, 4, 4, 3, 2, 1;
  std::vector<std::uint8_t> mask{1, 0, 1, 0};
  Var s = g.softmax_rows(g.input(x), &mask);
  const Mat& y = g.value(s);
  CHECK(y(0, 1) == 0.0);
  CHECK(y(0, 3) == 0.0);
  CHECK(std::abs(y.row(0).sum() - 1.0) < 1e-12);

  std::vector<std::uint8_t> empty{0, 0, 0, 0};
  CHECK_THROWS_AS(g.softmax_rows(g.input(x), &empty), ShapeError);
}

TEST_CASE("quadratic loss passes gradient check to near machine precision") {
  ParamStore store;
  Rng rng = Rng::seeded(5);
  Parameter& w = store.create_xavier("w", 3, 4, rng);
  Mat target = random_mat(rng, 3, 4);

  auto loss = [&](bool with_grad) {
    Graph g;
    Var d = g.sub(g.param(w), g.input(target));
    Var l = g.sum_all(g.mul_elem(d, d));
    if (with_grad) g.backward(l);
    return g.scalar(l);
  };

  GradCheckReport rep = grad_check(store, loss, {.epsilon = 1e-4});
  CHECK(rep.entries_checked == 12);
  CHECK(rep.max_rel_error < 1e-8);
}

TEST_CASE("deliberately doubled gradients are flagged with error near one") {
  ParamStore store;
  Rng rng = Rng::seeded(6);
  Parameter& w = store.create_xavier("w", 2, 2, rng);
  Mat target = Mat::Zero(2, 2);

  auto corrupted = [&](bool with_grad) {
    Graph g;
    Var d = g.sub(g.param(w), g.input(target));
    Var l = g.sum_all(g.mul_elem(d, d));
    if (with_grad) {
      g.backward(l);
      g.backward(l);  // accumulate twice: analytic gradient becomes 2x
    }
    return g.scalar(l);
  };

  GradCheckReport rep = grad_check(store, corrupted, {.epsilon = 1e-4});
  CHECK(rep.max_rel_error == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("composite ops pass gradient check") {
  ParamStore store;
  Rng rng = Rng::seeded(7);
  Parameter& w1 = store.create_xavier("w1", 6, 5, rng);
  Parameter& b1 = store.create("b1", 1, 5);
  Parameter& gain = store.create_constant("gain", 1, 5, 1.0);
  Parameter& offset = store.create("offset", 1, 5);
  Parameter& w2 = store.create_xavier("w2", 5, 3, rng);
  Mat x = random_mat(rng, 4, 6);
  Mat targets(4, 3);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 3; ++j) targets(i, j) = (i + j) % 2;

  auto loss = [&](bool with_grad) {
    Graph g;
    Var h = g.add_row_broadcast(g.matmul(g.input(x), g.param(w1)),
                                g.param(b1));
    h = g.layer_norm_rows(h, g.param(gain), g.param(offset));
    h = g.relu(h);
    Var logits = g.matmul(h, g.param(w2));
    Var l = g.bce_with_logits_mean(logits, targets);
    if (with_grad) g.backward(l);
    return g.scalar(l);
  };

  GradCheckReport rep = grad_check(store, loss, {.epsilon = 1e-4});
  CHECK(rep.max_rel_error < 1e-5);
}

TEST_CASE("giou op matches geometry and passes finite differences") {
  ParamStore store;
  Parameter& p = store.create("box", 1, 4);
  p.value << 0.4, 0.45, 0.3, 0.25;
  Mat gt(1, 4);
  gt << 0.6, 0.55, 0.2, 0.35;

  auto loss = [&](bool with_grad) {
    Graph g;
    Var giou_v = g.giou_value(g.param(p), gt);
    Var l = g.add_scalar(g.scale(g.giou_value(g.param(p), gt), -1.0), 1.0);
    (void)giou_v;
    if (with_grad) g.backward(l);
    return g.scalar(l);
  };
  GradCheckReport rep = grad_check(store, loss, {.epsilon = 1e-6});
  CHECK(rep.max_rel_error < 1e-6);

  // Disjoint boxes: gradient still informative (enclosing-box term).
  p.value << 0.1, 0.1, 0.05, 0.05;
  GradCheckReport rep2 = grad_check(store, loss, {.epsilon = 1e-6});
  CHECK(rep2.max_rel_error < 1e-6);
}

TEST_CASE("smooth_l1_mean and grounding-style composite pass finite differences") {
  ParamStore store;
  Rng rng = Rng::seeded(8);
  Parameter& w = store.create_xavier("w", 5, 4, rng);
  Mat x = random_mat(rng, 1, 5);
  Mat gt(1, 4);
  gt << 0.5, 0.5, 0.4, 0.3;

  auto loss = [&](bool with_grad) {
    Graph g;
    Var pred = g.sigmoid(g.matmul(g.input(x), g.param(w)));
    Var l1 = g.smooth_l1_mean(pred, gt, 1.0);
    Var gl = g.add_scalar(g.scale(g.giou_value(pred, gt), -1.0), 1.0);
    Var l = g.add(l1, gl);
    if (with_grad) g.backward(l);
    return g.scalar(l);
  };
  GradCheckReport rep = grad_check(store, loss, {.epsilon = 1e-5});
  CHECK(rep.max_rel_error < 1e-5);
}

TEST_CASE("adamw leaves parameters unchanged at zero learning rate") {
  ParamStore store;
  Rng rng = Rng::seeded(9);
  Parameter& w = store.create_xavier("w", 3, 3, rng);
  w.lr = 0.0;
  Mat before = w.value;
  w.grad.setConstant(1.0);
  AdamW opt(store);
  opt.step(1.0);
  CHECK((w.value - before).cwiseAbs().maxCoeff() == 0.0);

  // Non-zero rate moves every coordinate against the gradient sign.
  w.lr = 0.1;
  opt.step(1.0);
  CHECK((w.value.array() < before.array()).all());
}

TEST_CASE("gather_rows scatters gradients back into the table") {
  ParamStore store;
  Rng rng = Rng::seeded(10);
  Parameter& table = store.create_xavier("emb", 6, 3, rng);
  std::vector<int> ids{2, 2, 5};

  auto loss = [&](bool with_grad) {
    Graph g;
    Var e = g.gather_rows(table, ids);
    Var l = g.sum_all(g.mul_elem(e, e));
    if (with_grad) g.backward(l);
    return g.scalar(l);
  };
  GradCheckReport rep = grad_check(store, loss, {.epsilon = 1e-5});
  CHECK(rep.max_rel_error < 1e-7);

  Graph g;
  CHECK_THROWS_AS(g.gather_rows(table, {7}), ShapeError);
}

TEST_CASE("mean_rows, slices and concats round-trip gradients") {
  ParamStore store;
  Rng rng = Rng::seeded(12);
  Parameter& w = store.create_xavier("w", 6, 4, rng);

  auto loss = [&](bool with_grad) {
    Graph g;
    Var p = g.param(w);
    Var top = g.slice_rows(p, 0, 3);
    Var bottom = g.slice_rows(p, 3, 3);
    Var both = g.concat_cols({top, bottom});
    Var pooled = g.mean_rows(both, 0, 3);
    Var l = g.sum_all(g.mul_elem(pooled, pooled));
    if (with_grad) g.backward(l);
    return g.scalar(l);
  };
  GradCheckReport rep = grad_check(store, loss, {.epsilon = 1e-5});
  CHECK(rep.max_rel_error < 1e-7);
}

TEST_CASE("non-finite loss is rejected by grad_check") {
  ParamStore store;
  Parameter& w = store.create("w", 1, 1);
  auto loss = [&](bool) { return std::numeric_limits<double>::quiet_NaN(); };
  (void)w;
  CHECK_THROWS_AS(grad_check(store, loss, {}), Error);
}
