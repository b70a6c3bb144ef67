#include "doctest.h"

#include "hysod/rnet.hpp"

#include "helpers/oracles.hpp"

using namespace hysod;

namespace {

RNetConfig tiny_config(int input_size = 16) {
  RNetConfig cfg;
  cfg.encoder_channels = {2, 3, 3, 4, 4};
  cfg.input_size = input_size;
  return cfg;
}

Var random_var(int b, int c, int h, int w, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Tensor t(b, c, h, w);
  Rng rng(seed);
  oracles::fill_uniform(t, rng, lo, hi);
  return constant(std::move(t));
}

double scalar_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("channel attention: weights strictly inside (0, 1)") {
  Rng rng(1);
  ChannelAttention ca("ca", 6, rng);
  Var f = random_var(2, 6, 4, 4, 2);
  Var w = ca.weights(f);
  REQUIRE(w->value.c == 6);
  REQUIRE(w->value.h == 1);
  for (double v : w->value.v) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("spatial attention: mask strictly inside (0, 1) with a single channel") {
  Rng rng(2);
  SpatialAttention sa("sa", rng);
  Var f = random_var(2, 5, 6, 6, 3);
  Var m = sa.mask(f);
  REQUIRE(m->value.c == 1);
  REQUIRE(m->value.h == 6);
  for (double v : m->value.v) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("channel attention broadcast is permutation-equivariant") {
  Var f = random_var(1, 4, 3, 3, 5);
  Tensor w(1, 4, 1, 1);
  w.v = {0.2, 0.4, 0.6, 0.8};
  Var out = mul_channel(f, constant(w));

  // Permute channels of both input and weights: the output permutes the same
  // way.
  int perm[4] = {2, 0, 3, 1};
  Tensor fp(1, 4, 3, 3), wp(1, 4, 1, 1);
  for (int c = 0; c < 4; ++c) {
    wp.at(0, c, 0, 0) = w.at(0, perm[c], 0, 0);
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 3; ++x) fp.at(0, c, y, x) = f->value.at(0, perm[c], y, x);
  }
  Var out_p = mul_channel(constant(fp), constant(wp));
  for (int c = 0; c < 4; ++c)
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 3; ++x)
        CHECK(out_p->value.at(0, c, y, x) == out->value.at(0, perm[c], y, x));
}

TEST_CASE("channel attention matches a hand-computed pooling/transform/sigmoid chain") {
  Rng rng(7);
  ChannelAttention ca("ca", 4, rng);  // hidden = 4
  // Hand-set bottleneck parameters.
  std::vector<Parameter*> params;
  ca.collect(params);
  REQUIRE(params.size() == 4);  // fc1.w, fc1.b, fc2.w, fc2.b
  Rng prng(8);
  for (auto* p : params)
    for (double& v : p->value.v) v = prng.uniform(-0.5, 0.5);

  Tensor f(1, 4, 2, 2);
  Rng frng(9);
  oracles::fill_uniform(f, frng);
  Var weights = ca.weights(constant(f));

  // Scalar recomputation.
  const Tensor& w1 = params[0]->value;  // (4,4,1,1)
  const Tensor& b1 = params[1]->value;
  const Tensor& w2 = params[2]->value;
  const Tensor& b2 = params[3]->value;
  double avg[4], mx[4];
  for (int c = 0; c < 4; ++c) {
    avg[c] = 0.0;
    mx[c] = f.at(0, c, 0, 0);
    for (int y = 0; y < 2; ++y)
      for (int x = 0; x < 2; ++x) {
        avg[c] += f.at(0, c, y, x) / 4.0;
        mx[c] = std::max(mx[c], f.at(0, c, y, x));
      }
  }
  auto mlp = [&](const double* in, double* out) {
    double hidden[4];
    for (int hch = 0; hch < 4; ++hch) {
      double acc = b1.at(0, hch, 0, 0);
      for (int c = 0; c < 4; ++c) acc += w1.at(hch, c, 0, 0) * in[c];
      hidden[hch] = std::max(acc, 0.0);
    }
    for (int c = 0; c < 4; ++c) {
      double acc = b2.at(0, c, 0, 0);
      for (int hch = 0; hch < 4; ++hch) acc += w2.at(c, hch, 0, 0) * hidden[hch];
      out[c] = acc;
    }
  };
  double path_avg[4], path_max[4];
  mlp(avg, path_avg);
  mlp(mx, path_max);
  for (int c = 0; c < 4; ++c) {
    double expected = scalar_sigmoid(path_avg[c] + path_max[c]);
    CHECK(weights->value.at(0, c, 0, 0) == doctest::Approx(expected).epsilon(1e-6));
  }
}

TEST_CASE("guidance stage: forced spatial masks reproduce the closed forms") {
  Rng rng(11);
  GuidanceFusion block("g", 3, rng);
  Var refine = random_var(1, 3, 4, 4, 12);
  Var rgb = random_var(1, 3, 4, 4, 13);

  Var com = block.complement(refine, rgb);

  block.sa.forced_value = 0.0;
  Var out0 = block.fuse(refine, rgb);
  Var expect0 = block.proj(com);
  for (std::size_t i = 0; i < out0->value.numel(); ++i)
    CHECK(out0->value.v[i] == expect0->value.v[i]);

  block.sa.forced_value = 1.0;
  Var out1 = block.fuse(refine, rgb);
  Var expect1 = block.proj(affine(com, 2.0, 0.0));
  for (std::size_t i = 0; i < out1->value.numel(); ++i)
    CHECK(out1->value.v[i] == expect1->value.v[i]);
}

TEST_CASE("guidance stage matches an elementwise hand evaluation") {
  Rng rng(17);
  GuidanceFusion block("g", 2, rng);
  Var refine = random_var(1, 2, 2, 2, 18);
  Var rgb = random_var(1, 2, 2, 2, 19);
  Var out = block.fuse(refine, rgb);

  // Hand evaluation: attention weights and masks through the block's own
  // submodules (already verified against scalar math above), combination
  // arithmetic recomputed from scratch.
  Var concat = concat_channels({refine, rgb});
  Var ca_w = block.ca.weights(concat);
  Var sa_m = block.sa.mask(rgb);
  const Tensor& wt = block.proj.weight.value;  // (2, 4, 1, 1)
  const Tensor& bt = block.proj.bias.value;
  for (int co = 0; co < 2; ++co)
    for (int y = 0; y < 2; ++y)
      for (int x = 0; x < 2; ++x) {
        double acc = bt.at(0, co, 0, 0);
        for (int ci = 0; ci < 4; ++ci) {
          double com = concat->value.at(0, ci, y, x) * ca_w->value.at(0, ci, 0, 0);
          double reinforced = sa_m->value.at(0, 0, y, x) * com + com;
          acc += wt.at(co, ci, 0, 0) * reinforced;
        }
        CHECK(out->value.at(0, co, y, x) == doctest::Approx(acc).epsilon(1e-6));
      }
}

TEST_CASE("semantic fusion: gate overrides hit both boundaries exactly") {
  Rng rng(23);
  SemanticGate gate("s", 3, rng);
  Var global_feat = random_var(1, 3, 4, 4, 24);
  Var encoder_feat = random_var(1, 3, 4, 4, 25);

  gate.forced_gate = 1.0;
  Var all_global = gate.fuse(global_feat, encoder_feat);
  for (std::size_t i = 0; i < all_global->value.numel(); ++i)
    CHECK(all_global->value.v[i] == global_feat->value.v[i]);

  gate.forced_gate = 0.0;
  Var all_encoder = gate.fuse(global_feat, encoder_feat);
  for (std::size_t i = 0; i < all_encoder->value.numel(); ++i)
    CHECK(all_encoder->value.v[i] == encoder_feat->value.v[i]);

  gate.forced_gate = 0.5;
  Var blended = gate.fuse(constant(Tensor(1, 3, 4, 4, 2.0)), constant(Tensor(1, 3, 4, 4, 4.0)));
  for (double v : blended->value.v) CHECK(v == 3.0);

  gate.forced_gate.reset();
  Var learned = gate.gate(global_feat, encoder_feat);
  for (double v : learned->value.v) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("aggregation stage: sigmoid-at-zero and zero-encoder identities") {
  Rng rng(31);
  AggregationFusion block("a", rng);
  Var decoder_above = random_var(1, 3, 2, 2, 32);

  SUBCASE("zero semantic features halve the upsampled decoder term") {
    Var zero_sem = constant(Tensor(1, 3, 4, 4, 0.0));
    Var zero_enc = constant(Tensor(1, 3, 4, 4, 0.0));
    block.sa.forced_value = 0.7;  // the mask multiplies a zero tensor anyway
    Var out = block.fuse(decoder_above, zero_sem, zero_enc);
    Var up = resize_bilinear(decoder_above, 4, 4);
    for (std::size_t i = 0; i < out->value.numel(); ++i)
      CHECK(out->value.v[i] == up->value.v[i] + 0.5 * up->value.v[i]);
  }

  SUBCASE("zero encoder features leave up * (1 + sigmoid(semantic))") {
    Var semantic = random_var(1, 3, 4, 4, 33);
    Var zero_enc = constant(Tensor(1, 3, 4, 4, 0.0));
    block.sa.forced_value.reset();
    Var out = block.fuse(decoder_above, semantic, zero_enc);
    Var up = resize_bilinear(decoder_above, 4, 4);
    for (std::size_t i = 0; i < out->value.numel(); ++i) {
      double expected = up->value.v[i] + up->value.v[i] * scalar_sigmoid(semantic->value.v[i]);
      CHECK(out->value.v[i] == expected);
    }
  }

  SUBCASE("random tensors match the hand-evaluated fusion") {
    Var semantic = random_var(1, 3, 4, 4, 34);
    Var encoder_feat = random_var(1, 3, 4, 4, 35);
    Var out = block.fuse(decoder_above, semantic, encoder_feat);
    Var up = resize_bilinear(decoder_above, 4, 4);
    Var sa_m = block.sa.mask(encoder_feat);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) {
          double u = up->value.at(0, c, y, x);
          double expected = u + u * scalar_sigmoid(semantic->value.at(0, c, y, x)) +
                            sa_m->value.at(0, 0, y, x) * encoder_feat->value.at(0, c, y, x);
          CHECK(out->value.at(0, c, y, x) == doctest::Approx(expected).epsilon(1e-6));
        }
  }
}

TEST_CASE("encoder level sizes follow the stride chain") {
  RNet net(tiny_config(32), 3);
  auto check_sizes = [&](int input, std::array<int, 5> expect) {
    NoGrad guard;
    auto [ms, rgb] = net.encode(constant(Tensor(1, 3, input, input, 0.1)),
                                constant(Tensor(1, 1, input, input, 0.2)));
    for (int i = 0; i < 5; ++i) {
      CHECK(ms[i]->value.h == expect[i]);
      CHECK(rgb[i]->value.h == expect[i]);
      CHECK(ms[i]->value.w == expect[i]);
    }
  };
  check_sizes(32, {16, 8, 4, 2, 1});
  check_sizes(288, {144, 72, 36, 18, 9});
  check_sizes(16, {8, 4, 2, 1, 1});
}

TEST_CASE("encoder: zero input with zero biases yields zero features") {
  RNet net(tiny_config(16), 5);
  NoGrad guard;
  auto [ms, rgb] = net.encode(constant(Tensor(2, 3, 16, 16, 0.0)),
                              constant(Tensor(2, 1, 16, 16, 0.0)));
  for (int i = 0; i < 5; ++i) {
    for (double v : ms[i]->value.v) CHECK(v == 0.0);
    for (double v : rgb[i]->value.v) CHECK(v == 0.0);
  }
}

TEST_CASE("encoder rejects mismatched image/coarse shapes") {
  RNet net(tiny_config(16), 5);
  CHECK_THROWS(net.encode(constant(Tensor(1, 3, 16, 16, 0.0)),
                          constant(Tensor(1, 1, 8, 8, 0.0))));
}

TEST_CASE("forward: outputs in [0, 1], identical items get identical maps") {
  RNet net(tiny_config(16), 7);
  NoGrad guard;
  Rng rng(41);
  Tensor image(2, 3, 16, 16), coarse(2, 1, 16, 16);
  // Batch of two identical items.
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) {
        double v = rng.uniform();
        image.at(0, c, y, x) = v;
        image.at(1, c, y, x) = v;
      }
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      double v = rng.uniform();
      coarse.at(0, 0, y, x) = v;
      coarse.at(1, 0, y, x) = v;
    }
  RNetVarOutput out = net.forward(constant(image), constant(coarse));
  REQUIRE(out.final->value.b == 2);
  REQUIRE(out.final->value.h == 16);
  for (double v : out.final->value.v) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  for (const auto& aux : out.aux)
    for (double v : aux->value.v) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x)
      CHECK(out.final->value.at(0, 0, y, x) == out.final->value.at(1, 0, y, x));
}

TEST_CASE("serialization round trip reproduces bit-identical forward outputs") {
  RNet net(tiny_config(16), 9);
  Rng rng(51);
  Tensor image(1, 3, 16, 16), coarse(1, 1, 16, 16);
  oracles::fill_uniform(image, rng, 0.0, 1.0);
  oracles::fill_uniform(coarse, rng, 0.0, 1.0);

  NoGrad guard;
  RNetVarOutput before = net.forward(constant(image), constant(coarse));

  std::ostringstream os(std::ios::binary);
  net.save(os);
  RNet restored(tiny_config(16), 999);  // different init seed
  std::istringstream is(os.str(), std::ios::binary);
  restored.load(is);
  RNetVarOutput after = restored.forward(constant(image), constant(coarse));

  for (std::size_t i = 0; i < before.final->value.numel(); ++i)
    CHECK(std::bit_cast<std::uint64_t>(after.final->value.v[i]) ==
          std::bit_cast<std::uint64_t>(before.final->value.v[i]));
}

TEST_CASE("full forward gradients agree with central differences (micro net)") {
  RNet net(tiny_config(8), 13);
  Rng rng(61);
  Tensor image(1, 3, 8, 8), coarse(1, 1, 8, 8), label(1, 1, 8, 8);
  oracles::fill_uniform(image, rng, 0.0, 1.0);
  oracles::fill_uniform(coarse, rng, 0.0, 1.0);
  for (double& v : label.v) v = rng.uniform() < 0.5 ? 0.0 : 1.0;

  auto loss_fn = [&]() {
    NoGrad guard;
    RNetVarOutput out = net.forward(constant(image), constant(coarse));
    SaliencyPrediction pred{out.final->value,
                            {out.aux[0]->value, out.aux[1]->value, out.aux[2]->value}};
    return rnet_loss(pred, label);
  };
  auto backward_fn = [&]() {
    RNetVarOutput out = net.forward(constant(image), constant(coarse));
    backward(rnet_loss(out.final, out.aux, label));
  };
  CHECK(oracles::max_grad_error(net.parameters(), loss_fn, backward_fn) < 1e-4);
}

TEST_CASE("predict_pseudo_labels contract") {
  RNet net(tiny_config(16), 15);

  CHECK(predict_pseudo_labels(net, {}).empty());

  Rng rng(71);
  std::vector<Sample> samples;
  for (int i = 0; i < 3; ++i) {
    Sample s;
    s.id = "p" + std::to_string(i);
    s.image = Image(20, 20);
    for (double& v : s.image.v) v = rng.uniform();
    Map coarse(20, 20);
    for (double& v : coarse.v) v = rng.uniform();
    s.coarse = coarse;
    s.kind = LabelKind::coarse;
    samples.push_back(std::move(s));
  }

  auto out = predict_pseudo_labels(net, samples, 2);
  REQUIRE(out.size() == 3);
  for (std::size_t i = 0; i < out.size(); ++i) {
    CHECK(out[i].kind == LabelKind::pseudo);
    CHECK(out[i].image.v == samples[i].image.v);
    REQUIRE(out[i].label.has_value());
    CHECK(out[i].label->h == 20);
    for (double v : out[i].label->v) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }

  auto again = predict_pseudo_labels(net, samples, 2);
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i].label->v == again[i].label->v);

  samples[1].coarse.reset();
  CHECK_THROWS_AS(predict_pseudo_labels(net, samples), DataError);
}
