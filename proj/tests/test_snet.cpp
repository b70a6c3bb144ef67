#include "doctest.h"

#include "hysod/snet.hpp"

#include "helpers/oracles.hpp"

using namespace hysod;

namespace {

SNetConfig tiny_config(int input_size = 16) {
  SNetConfig cfg;
  cfg.encoder_channels = {3, 4, 4, 6, 6};
  cfg.input_size = input_size;
  return cfg;
}

std::vector<Image> random_images(int n, int size, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Image> out;
  for (int i = 0; i < n; ++i) {
    Image img(size, size);
    for (double& v : img.v) v = rng.uniform();
    out.push_back(std::move(img));
  }
  return out;
}

}  // namespace

TEST_CASE("reference snet predicts values in [0, 1]") {
  ReferenceSNet net(tiny_config(), 3);
  auto maps = net.predict(random_images(2, 16, 4));
  REQUIRE(maps.size() == 2);
  for (const auto& m : maps) {
    CHECK(m.h == 16);
    for (double v : m.v) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("one small training step strictly decreases the loss") {
  ReferenceSNet net(tiny_config(), 5);
  auto images = random_images(1, 16, 7);
  Rng rng(8);
  std::vector<Map> labels{oracles::random_binary_map(rng, 16, 16)};

  double before;
  {
    NoGrad guard;
    before = bce(to_map_tensor(net.predict(images)), to_map_tensor(labels));
  }
  net.train_step(images, labels, 1e-3);
  double after;
  {
    NoGrad guard;
    after = bce(to_map_tensor(net.predict(images)), to_map_tensor(labels));
  }
  CHECK(after < before);
}

TEST_CASE("save -> load -> predict is bit-identical") {
  ReferenceSNet net(tiny_config(), 9);
  auto images = random_images(2, 16, 11);
  auto before = net.predict(images);

  std::ostringstream os(std::ios::binary);
  net.save(os);
  ReferenceSNet other(tiny_config(), 1234);
  std::istringstream is(os.str(), std::ios::binary);
  other.load(is);
  auto after = other.predict(images);
  for (std::size_t i = 0; i < before.size(); ++i)
    for (std::size_t j = 0; j < before[i].v.size(); ++j)
      CHECK(std::bit_cast<std::uint64_t>(after[i].v[j]) ==
            std::bit_cast<std::uint64_t>(before[i].v[j]));

  // from_checkpoint reconstructs the same network.
  std::istringstream is2(os.str(), std::ios::binary);
  ReferenceSNet rebuilt = ReferenceSNet::from_checkpoint(is2);
  auto restored = rebuilt.predict(images);
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(restored[i].v == before[i].v);
}

TEST_CASE("training accepts any supervision kind (soft maps included)") {
  ReferenceSNet net(tiny_config(), 13);
  auto images = random_images(2, 16, 14);
  Rng rng(15);
  std::vector<Map> soft{oracles::random_map(rng, 16, 16), oracles::random_map(rng, 16, 16)};
  double loss = net.train_step(images, soft, 1e-4);
  CHECK(std::isfinite(loss));
  CHECK(loss >= 0.0);
}

TEST_CASE("snet gradients agree with central differences (micro net)") {
  SNetConfig cfg;
  cfg.encoder_channels = {2, 3, 3, 4, 4};
  cfg.input_size = 8;
  ReferenceSNet net(cfg, 17);
  Rng rng(18);
  Tensor image(1, 3, 8, 8), label(1, 1, 8, 8);
  oracles::fill_uniform(image, rng, 0.0, 1.0);
  for (double& v : label.v) v = rng.uniform() < 0.5 ? 0.0 : 1.0;

  auto loss_fn = [&]() {
    NoGrad guard;
    return bce(net.forward(constant(image))->value, label);
  };
  auto backward_fn = [&]() { backward(bce(net.forward(constant(image)), label)); };
  CHECK(oracles::max_grad_error(net.parameters(), loss_fn, backward_fn) < 1e-4);
}

TEST_CASE("predict_pseudo_labels_s mirrors the refiner-side contract") {
  ReferenceSNet net(tiny_config(), 21);

  CHECK(predict_pseudo_labels_s(net, {}).empty());

  Rng rng(22);
  std::vector<Sample> samples;
  for (int i = 0; i < 3; ++i) {
    Sample s;
    s.id = "q" + std::to_string(i);
    s.image = Image(24, 24);
    for (double& v : s.image.v) v = rng.uniform();
    s.kind = LabelKind::coarse;  // no coarse map needed for the saliency net
    samples.push_back(std::move(s));
  }
  auto out = predict_pseudo_labels_s(net, samples, 2);
  REQUIRE(out.size() == 3);
  for (std::size_t i = 0; i < out.size(); ++i) {
    CHECK(out[i].kind == LabelKind::pseudo);
    CHECK(out[i].image.v == samples[i].image.v);
    CHECK(out[i].label->h == 24);
  }
  auto again = predict_pseudo_labels_s(net, samples, 3);
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i].label->v == again[i].label->v);
}
