#include "doctest.h"

#include "hysod/losses.hpp"

#include "helpers/oracles.hpp"

using namespace hysod;

TEST_CASE("bce: perfect binary prediction scores (near) zero") {
  Tensor label(1, 1, 3, 3);
  Rng rng(5);
  for (double& v : label.v) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
  Tensor pred = label;
  double loss = bce(pred, label);
  CHECK(loss >= 0.0);
  CHECK(loss < 1e-6);  // only the epsilon clamp keeps it above zero
}

TEST_CASE("bce: p = 0.5 against all-ones is ln 2") {
  Tensor label(1, 1, 4, 4, 1.0);
  Tensor pred(1, 1, 4, 4, 0.5);
  CHECK(bce(pred, label) == doctest::Approx(0.6931471805599453).epsilon(1e-12));
}

TEST_CASE("bce matches the scalar oracle on random 3x3 pairs") {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor pred(1, 1, 3, 3), label(1, 1, 3, 3);
    for (double& v : pred.v) v = rng.uniform();
    for (double& v : label.v) v = rng.uniform();
    CHECK(bce(pred, label) == doctest::Approx(oracles::bce(pred.v, label.v)).epsilon(1e-9));
  }
}

TEST_CASE("bce shape mismatch throws") {
  CHECK_THROWS(bce(Tensor(1, 1, 2, 2), Tensor(1, 1, 3, 3)));
}

TEST_CASE("rnet_loss: zero when all heads equal the label") {
  Tensor label(1, 1, 4, 4);
  Rng rng(12);
  for (double& v : label.v) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
  SaliencyPrediction pred{label, {label, label, label}};
  CHECK(rnet_loss(pred, label) < 1e-5);
}

TEST_CASE("rnet_loss: lambda wiring gives the 2.4x composition") {
  // Every head produces the same loss `a`; the total must be
  // a * (1 + 0.2 + 0.4 + 0.8) = 2.4 a.
  Tensor label(1, 1, 4, 4, 1.0);
  Tensor half(1, 1, 4, 4, 0.5);
  double a = bce(half, label);
  SaliencyPrediction pred{half, {half, half, half}};
  CHECK(rnet_loss(pred, label) == doctest::Approx(2.4 * a).epsilon(1e-12));
}

TEST_CASE("rnet_loss matches the bce-composition oracle on random maps") {
  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor label(1, 1, 5, 5);
    for (double& v : label.v) v = rng.uniform();
    SaliencyPrediction pred;
    pred.final = Tensor(1, 1, 5, 5);
    for (double& v : pred.final.v) v = rng.uniform();
    for (auto& aux : pred.aux) {
      aux = Tensor(1, 1, 5, 5);
      for (double& v : aux.v) v = rng.uniform();
    }
    double expected = oracles::bce(pred.final.v, label.v) +
                      0.2 * oracles::bce(pred.aux[0].v, label.v) +
                      0.4 * oracles::bce(pred.aux[1].v, label.v) +
                      0.8 * oracles::bce(pred.aux[2].v, label.v);
    CHECK(rnet_loss(pred, label) == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("autograd rnet_loss agrees with the plain evaluation") {
  Rng rng(44);
  Tensor label(2, 1, 3, 3);
  for (double& v : label.v) v = rng.uniform();
  Parameter fin("f", Tensor(2, 1, 3, 3));
  for (double& v : fin.value.v) v = rng.uniform(0.05, 0.95);
  std::array<Parameter, 3> aux = {Parameter("a0", Tensor(2, 1, 3, 3)),
                                  Parameter("a1", Tensor(2, 1, 3, 3)),
                                  Parameter("a2", Tensor(2, 1, 3, 3))};
  for (auto& p : aux)
    for (double& v : p.value.v) v = rng.uniform(0.05, 0.95);

  Var loss = rnet_loss(leaf(fin), {leaf(aux[0]), leaf(aux[1]), leaf(aux[2])}, label);
  SaliencyPrediction plain{fin.value, {aux[0].value, aux[1].value, aux[2].value}};
  CHECK(loss->value.v[0] == doctest::Approx(rnet_loss(plain, label)).epsilon(1e-12));

  auto loss_fn = [&]() {
    NoGrad guard;
    SaliencyPrediction p{fin.value, {aux[0].value, aux[1].value, aux[2].value}};
    return rnet_loss(p, label);
  };
  auto backward_fn = [&]() {
    backward(rnet_loss(leaf(fin), {leaf(aux[0]), leaf(aux[1]), leaf(aux[2])}, label));
  };
  CHECK(oracles::max_grad_error({&fin, &aux[0], &aux[1], &aux[2]}, loss_fn, backward_fn, 1e-6) <
        1e-6);
}

TEST_CASE("loss weights reject negatives") {
  LossWeights w;
  w.lambda = {0.2, -0.1, 0.8};
  CHECK_THROWS_AS(w.validate(), ConfigError);
}
