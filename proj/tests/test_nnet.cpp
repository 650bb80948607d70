#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <limits>
#include <sstream>

#include "knobtune/nnet.hpp"

using namespace knobtune;

namespace {

// Sum of squared parameters, and its gradient 2*theta.
double param_norm2(const Mlp& net) {
  double sum = 0.0;
  for (const auto& w : net.weights())
    for (double x : w) sum += x * x;
  for (const auto& b : net.biases())
    for (double x : b) sum += x * x;
  return sum;
}

double scalar_loss(const Mlp& net, const std::vector<double>& input,
                   const std::vector<double>& upstream) {
  auto out = net.forward(input);
  double loss = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) loss += upstream[i] * out[i];
  return loss;
}

}  // namespace

TEST_CASE("zero weights pass the bias through the output activation", "[nnet]") {
  Mlp ident({3, 2}, OutputActivation::Identity);
  ident.biases()[0] = {0.25, -1.5};
  auto out = ident.forward(std::vector<double>{0.1, 0.2, 0.3});
  REQUIRE(out.size() == 2);
  CHECK(out[0] == 0.25);
  CHECK(out[1] == -1.5);

  Mlp sig({3, 2}, OutputActivation::Sigmoid);
  sig.biases()[0] = {0.0, 2.0};
  auto s = sig.forward(std::vector<double>{0.1, 0.2, 0.3});
  CHECK(s[0] == Catch::Approx(0.5));
  CHECK(s[1] == Catch::Approx(sigmoid(2.0)));
}

TEST_CASE("identity weight matrix reproduces the input", "[nnet]") {
  Mlp net({3, 3}, OutputActivation::Identity);
  for (std::size_t i = 0; i < 3; ++i) net.weights()[0][i * 3 + i] = 1.0;
  std::vector<double> x{-0.7, 0.0, 2.5};
  auto out = net.forward(x);
  CHECK(out == x);
}

TEST_CASE("forward computes affine layers with relu between", "[nnet]") {
  Mlp net({2, 2, 1}, OutputActivation::Identity);
  net.weights()[0] = {1.0, -1.0, 0.5, 0.5};
  net.biases()[0] = {0.0, -1.0};
  net.weights()[1] = {2.0, -2.0};
  net.biases()[1] = {0.25};

  // hidden pre-activations (1, 0.5), both positive
  CHECK(net.forward(std::vector<double>{2.0, 1.0})[0] == Catch::Approx(1.25));
  // hidden pre-activations (-3, -1.5), both clipped to zero by relu
  CHECK(net.forward(std::vector<double>{-2.0, 1.0})[0] == Catch::Approx(0.25));

  Mlp sig({2, 2, 1}, OutputActivation::Sigmoid);
  sig.weights() = net.weights();
  sig.biases() = net.biases();
  CHECK(sig.forward(std::vector<double>{2.0, 1.0})[0] == Catch::Approx(sigmoid(1.25)));
}

TEST_CASE("backward gradients match a linear layer's closed form", "[nnet]") {
  Mlp net({3, 2}, OutputActivation::Identity);
  net.weights()[0] = {1.0, 2.0, 3.0, -1.0, 0.5, 0.0};
  net.biases()[0] = {0.1, -0.2};
  std::vector<double> x{0.5, -1.0, 2.0};
  std::vector<double> u{2.0, -3.0};

  auto grads = net.zero_gradients();
  auto dx = net.backward(x, u, grads);

  // d/dW = u (outer) x, d/db = u, d/dx = W^T u
  CHECK(grads.biases[0] == std::vector<double>{2.0, -3.0});
  CHECK(grads.weights[0] ==
        std::vector<double>{1.0, -2.0, 4.0, -1.5, 3.0, -6.0});
  REQUIRE(dx.size() == 3);
  CHECK(dx[0] == Catch::Approx(1.0 * 2.0 + (-1.0) * (-3.0)));
  CHECK(dx[1] == Catch::Approx(2.0 * 2.0 + 0.5 * (-3.0)));
  CHECK(dx[2] == Catch::Approx(3.0 * 2.0 + 0.0 * (-3.0)));
}

TEST_CASE("backward accumulates into the gradient buffer", "[nnet]") {
  Mlp net({2, 2}, OutputActivation::Identity);
  net.weights()[0] = {1.0, 0.0, 0.0, 1.0};
  std::vector<double> x{1.0, 2.0};
  std::vector<double> u{1.0, 1.0};
  auto grads = net.zero_gradients();
  net.backward(x, u, grads);
  auto once = grads;
  net.backward(x, u, grads);
  for (std::size_t i = 0; i < grads.weights[0].size(); ++i)
    CHECK(grads.weights[0][i] == 2.0 * once.weights[0][i]);
  for (std::size_t i = 0; i < grads.biases[0].size(); ++i)
    CHECK(grads.biases[0][i] == 2.0 * once.biases[0][i]);

  grads.scale(0.5);
  CHECK(grads.weights[0] == once.weights[0]);
}

TEST_CASE("zero upstream gradient produces zero everywhere", "[nnet]") {
  auto rng = make_rng(3);
  Mlp net({4, 6, 2}, OutputActivation::Sigmoid);
  net.init_uniform(rng);
  auto grads = net.zero_gradients();
  std::vector<double> x{0.1, 0.9, 0.4, 0.2};
  auto dx = net.backward(x, std::vector<double>{0.0, 0.0}, grads);
  for (double v : dx) CHECK(v == 0.0);
  for (const auto& w : grads.weights)
    for (double v : w) CHECK(v == 0.0);
}

TEST_CASE("analytic gradients match central finite differences", "[nnet]") {
  const double h = 1e-5;
  const double tol = 1e-4;
  for (auto act : {OutputActivation::Sigmoid, OutputActivation::Identity}) {
    auto rng = make_rng(act == OutputActivation::Sigmoid ? 101 : 202);
    Mlp net({3, 8, 2}, act);
    net.init_uniform(rng);
    std::vector<double> x{0.37, -0.81, 0.52};
    std::vector<double> u{1.3, -0.7};

    auto grads = net.zero_gradients();
    auto dx = net.backward(x, u, grads);

    auto check_param = [&](double& theta, double analytic) {
      double saved = theta;
      theta = saved + h;
      double up = scalar_loss(net, x, u);
      theta = saved - h;
      double down = scalar_loss(net, x, u);
      theta = saved;
      double fd = (up - down) / (2.0 * h);
      double denom = std::max({1.0, std::abs(fd), std::abs(analytic)});
      CAPTURE(analytic, fd);
      CHECK(std::abs(analytic - fd) / denom <= tol);
    };

    for (std::size_t l = 0; l < net.num_layers(); ++l) {
      for (std::size_t i = 0; i < net.weights()[l].size(); ++i)
        check_param(net.weights()[l][i], grads.weights[l][i]);
      for (std::size_t i = 0; i < net.biases()[l].size(); ++i)
        check_param(net.biases()[l][i], grads.biases[l][i]);
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
      double saved = x[i];
      x[i] = saved + h;
      double up = scalar_loss(net, x, u);
      x[i] = saved - h;
      double down = scalar_loss(net, x, u);
      x[i] = saved;
      double fd = (up - down) / (2.0 * h);
      CHECK(std::abs(dx[i] - fd) / std::max(1.0, std::abs(fd)) <= tol);
    }
  }
}

TEST_CASE("first adam step moves by about the learning rate against the gradient", "[nnet]") {
  Mlp net({1, 1}, OutputActivation::Identity);
  net.weights()[0] = {1.0};
  net.biases()[0] = {-2.0};
  auto state = AdamState::for_net(net, 0.1);

  auto grads = net.zero_gradients();
  grads.weights[0] = {2.0};    // d(w^2)/dw at w=1
  grads.biases[0] = {-4.0};    // d(b^2)/db at b=-2
  adam_step(net, grads, state);

  CHECK(net.weights()[0][0] == Catch::Approx(0.9).margin(1e-6));
  CHECK(net.biases()[0][0] == Catch::Approx(-1.9).margin(1e-6));
  CHECK(state.step_count == 1);
}

TEST_CASE("adam with zero gradients leaves parameters unchanged", "[nnet]") {
  auto rng = make_rng(9);
  Mlp net({2, 4, 1}, OutputActivation::Identity);
  net.init_uniform(rng);
  Mlp before = net;
  auto state = AdamState::for_net(net, 0.1);
  auto grads = net.zero_gradients();
  adam_step(net, grads, state);
  CHECK(net.weights() == before.weights());
  CHECK(net.biases() == before.biases());
}

TEST_CASE("adam minimizes a quadratic by at least ninety percent in 200 steps", "[nnet]") {
  auto rng = make_rng(17);
  Mlp net({2, 3, 2}, OutputActivation::Identity);
  net.init_uniform(rng);
  double initial = param_norm2(net);
  REQUIRE(initial > 0.0);

  auto state = AdamState::for_net(net, 0.01);
  for (int step = 0; step < 200; ++step) {
    auto grads = net.zero_gradients();
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
      for (std::size_t i = 0; i < net.weights()[l].size(); ++i)
        grads.weights[l][i] = 2.0 * net.weights()[l][i];
      for (std::size_t i = 0; i < net.biases()[l].size(); ++i)
        grads.biases[l][i] = 2.0 * net.biases()[l][i];
    }
    adam_step(net, grads, state);
  }
  CHECK(param_norm2(net) <= 0.1 * initial);
}

TEST_CASE("adam raises DivergenceError on non-finite gradients", "[nnet]") {
  Mlp net({1, 1}, OutputActivation::Identity);
  auto state = AdamState::for_net(net, 0.1);
  auto grads = net.zero_gradients();
  grads.weights[0][0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(adam_step(net, grads, state), DivergenceError);
  grads.weights[0][0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(adam_step(net, grads, state), DivergenceError);
}

TEST_CASE("soft update interpolates between target and online", "[nnet]") {
  auto rng = make_rng(5);
  Mlp online({2, 3, 1}, OutputActivation::Identity);
  online.init_uniform(rng);
  Mlp target({2, 3, 1}, OutputActivation::Identity);
  target.init_uniform(rng);
  Mlp original = target;

  soft_update(target, online, 0.0);
  CHECK(target.weights() == original.weights());

  soft_update(target, online, 1.0);
  CHECK(target.weights() == online.weights());
  CHECK(target.biases() == online.biases());

  target = original;
  soft_update(target, online, 0.5);
  for (std::size_t l = 0; l < target.num_layers(); ++l)
    for (std::size_t i = 0; i < target.weights()[l].size(); ++i)
      CHECK(target.weights()[l][i] ==
            Catch::Approx(0.5 * (original.weights()[l][i] + online.weights()[l][i])));
}

TEST_CASE("repeated soft updates converge on the online network", "[nnet]") {
  auto rng = make_rng(6);
  Mlp online({3, 4, 2}, OutputActivation::Sigmoid);
  online.init_uniform(rng);
  Mlp target({3, 4, 2}, OutputActivation::Sigmoid);
  target.init_uniform(rng);

  auto distance = [&]() {
    double d = 0.0;
    for (std::size_t l = 0; l < target.num_layers(); ++l)
      for (std::size_t i = 0; i < target.weights()[l].size(); ++i)
        d = std::max(d, std::abs(target.weights()[l][i] - online.weights()[l][i]));
    return d;
  };

  double before = distance();
  REQUIRE(before > 0.0);
  for (int i = 0; i < 2000; ++i) soft_update(target, online, 0.005);
  CHECK(distance() < 1e-4 * before);
}

TEST_CASE("network save and load round-trips bit for bit", "[nnet]") {
  auto rng = make_rng(21);
  Mlp net({5, 8, 8, 3}, OutputActivation::Sigmoid);
  net.init_uniform(rng, 1e-3);

  std::stringstream ss;
  net.save(ss);
  Mlp loaded = Mlp::load(ss);

  CHECK(loaded.layer_sizes() == net.layer_sizes());
  CHECK(loaded.output_activation() == net.output_activation());
  CHECK(loaded.weights() == net.weights());
  CHECK(loaded.biases() == net.biases());
}

TEST_CASE("loading garbage raises CheckpointError", "[nnet]") {
  std::stringstream ss("not a network");
  CHECK_THROWS_AS(Mlp::load(ss), CheckpointError);
}

TEST_CASE("shape mismatches are rejected", "[nnet]") {
  Mlp net({2, 3, 1}, OutputActivation::Identity);
  CHECK_THROWS_AS(net.forward(std::vector<double>{1.0}), ShapeError);
  auto grads = net.zero_gradients();
  CHECK_THROWS_AS(net.backward(std::vector<double>{1.0, 2.0}, std::vector<double>{1.0, 2.0}, grads),
                  ShapeError);

  CHECK_THROWS_AS(Mlp({3}, OutputActivation::Identity), ShapeError);
  CHECK_THROWS_AS(Mlp({3, 0, 1}, OutputActivation::Identity), ShapeError);

  Mlp other({2, 4, 1}, OutputActivation::Identity);
  CHECK_THROWS_AS(soft_update(other, net, 0.5), ShapeError);
  CHECK_THROWS_AS(soft_update(net, net, 1.5), ValidationError);
}

TEST_CASE("init_uniform stays within the fan-in bound and scales the last layer", "[nnet]") {
  auto rng = make_rng(33);
  Mlp net({4, 16, 2}, OutputActivation::Sigmoid);
  net.init_uniform(rng, 1e-3);
  double bound0 = 1.0 / std::sqrt(4.0);
  for (double w : net.weights()[0]) CHECK(std::abs(w) <= bound0);
  double bound1 = 1e-3 / std::sqrt(16.0);
  for (double w : net.weights()[1]) CHECK(std::abs(w) <= bound1);
  // not all zero
  double sum = 0.0;
  for (double w : net.weights()[0]) sum += std::abs(w);
  CHECK(sum > 0.0);
}
