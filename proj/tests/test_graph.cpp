#include "hieum/error.hpp"
#include "hieum/sparse/adam.hpp"
#include "hieum/sparse/checkpoint.hpp"
#include "hieum/sparse/graph.hpp"

#include "dense_oracle.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

using namespace hieum;
using namespace hieum::sparse;

namespace {

void randomize(Rng& rng, Parameter<double>& p, double scale = 0.5) {
  for (auto& v : p.value) v = rng.uniform(-scale, scale);
}

}  // namespace

TEST_CASE("batch norm normalises in training and tracks running statistics") {
  Rng rng(3);
  auto coords = testing::random_coords(rng, {2, 6, 6}, 0.5);
  const int C = 3;
  auto x = testing::random_values(rng, coords->size() * C, 4.0);
  BatchNormLayer<double> bn("bn", C);
  bn.gamma.value = {1.0, 2.0, 0.5};
  bn.beta.value = {0.0, -1.0, 3.0};
  Graph<double> g;
  const auto in = g.input(SparseTensor<double>(coords, C, x));
  const auto out = g.batchnorm(in, bn, true);
  const auto y = g.value(out).feats();
  const auto n = static_cast<double>(coords->size());
  for (int c = 0; c < C; ++c) {
    double m = 0, v = 0, xm = 0, xv = 0;
    for (std::size_t i = 0; i < coords->size(); ++i) {
      m += y[i * C + c];
      xm += x[i * C + c];
    }
    m /= n;
    xm /= n;
    for (std::size_t i = 0; i < coords->size(); ++i) {
      v += (y[i * C + c] - m) * (y[i * C + c] - m);
      xv += (x[i * C + c] - xm) * (x[i * C + c] - xm);
    }
    v /= n;
    CHECK(m == doctest::Approx(bn.beta.value[c]));
    CHECK(v == doctest::Approx(bn.gamma.value[c] * bn.gamma.value[c] * (xv / n) / (xv / n + 1e-5)));
    CHECK(bn.running_mean[c] == doctest::Approx(0.1 * xm));
    CHECK(bn.running_var[c] == doctest::Approx(0.9 + 0.1 * xv / (n - 1)));
  }

  // Eval mode uses the running statistics.
  Graph<double> e(false);
  const auto ev = e.batchnorm(e.input(SparseTensor<double>(coords, C, x)), bn, false);
  const double expect = (x[1] - bn.running_mean[1]) / std::sqrt(bn.running_var[1] + 1e-5) * 2.0 - 1.0;
  CHECK(e.value(ev).feats()[1] == doctest::Approx(expect));
}

TEST_CASE("batch norm of an empty tensor is empty") {
  auto coords = std::make_shared<CoordSet>(std::vector<Coord>{}, Dims3{1, 2, 2});
  BatchNormLayer<double> bn("bn", 2);
  Graph<double> g;
  const auto out = g.batchnorm(g.input(SparseTensor<double>(coords, 2, {})), bn, true);
  CHECK(g.value(out).size() == 0);
  CHECK(bn.running_mean[0] == 0.0);
}

TEST_CASE("graph gradients match finite differences") {
  Rng rng(17);
  auto coords = testing::random_coords(rng, {2, 5, 5}, 0.5);
  const auto sub = build_rulebook(coords, {3, 3, 3}, {1, 1, 1}, ConvMode::Submanifold);
  const auto down = build_rulebook(coords, {1, 2, 2}, {1, 2, 2}, ConvMode::Strided);
  const auto up = build_rulebook(down.output, {1, 2, 2}, {1, 2, 2}, ConvMode::Transposed, coords);

  ConvLayer<double> c1("c1", ConvMode::Submanifold, {3, 3, 3}, {1, 1, 1}, 2, 3, true);
  BatchNormLayer<double> bn("bn", 3);
  ConvLayer<double> c2("c2", ConvMode::Strided, {1, 2, 2}, {1, 2, 2}, 3, 2, false);
  ConvLayer<double> c3("c3", ConvMode::Transposed, {1, 2, 2}, {1, 2, 2}, 2, 2, true);
  for (auto* p : {&c1.weight, &c1.bias, &bn.gamma, &bn.beta, &c2.weight, &c3.weight, &c3.bias}) randomize(rng, *p);
  for (auto& v : bn.gamma.value) v += 1.0;

  auto x = testing::random_values(rng, coords->size() * 2);
  const auto proj = testing::random_values(rng, coords->size() * 5);

  auto run = [&](Graph<double>& g, NodeId& in) {
    in = g.input(SparseTensor<double>(coords, 2, x), true);
    const auto a = g.relu(g.batchnorm(g.conv(in, c1, sub.rulebook, coords), bn, true));
    const auto b = g.conv(g.conv(a, c2, down.rulebook, down.output), c3, up.rulebook, coords);
    return g.sigmoid(g.concat(a, b));
  };
  auto loss = [&] {
    Graph<double> g(false);
    NodeId in;
    const auto out = run(g, in);
    double s = 0;
    const auto f = g.value(out).feats();
    for (std::size_t i = 0; i < f.size(); ++i) s += proj[i] * f[i];
    return s;
  };

  std::vector<Parameter<double>*> params{&c1.weight, &c1.bias, &bn.gamma, &bn.beta, &c2.weight, &c3.weight, &c3.bias};
  for (auto* p : params) p->zero_grad();
  Graph<double> g;
  NodeId in;
  const auto out = run(g, in);
  g.backward(out, proj);
  const std::vector<double> gx(g.grad(in).begin(), g.grad(in).end());

  const double h = 1e-6;
  double worst = 0.0;
  auto probe = [&](double& v, double analytic) {
    const double keep = v;
    v = keep + h;
    const double up_v = loss();
    v = keep - h;
    const double down_v = loss();
    v = keep;
    worst = std::max(worst, testing::rel_error((up_v - down_v) / (2 * h), analytic));
  };
  for (std::size_t i = 0; i < x.size(); ++i) probe(x[i], gx[i]);
  for (auto* p : params) {
    for (std::size_t i = 0; i < p->size(); ++i) probe(p->value[i], p->grad[i]);
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("stale graphs refuse to replay") {
  auto coords = std::make_shared<CoordSet>(std::vector<Coord>{{0, 0, 0}, {0, 0, 1}}, Dims3{1, 1, 2});
  const auto sub = build_rulebook(coords, {1, 1, 1}, {1, 1, 1}, ConvMode::Submanifold);
  ConvLayer<double> conv("c", ConvMode::Submanifold, {1, 1, 1}, {1, 1, 1}, 1, 1, false);
  conv.weight.value[0] = 2.0;
  const std::vector<double> seed{1.0, 1.0};

  Graph<double> g;
  auto out = g.conv(g.input(SparseTensor<double>(coords, 1, {1.0, 2.0})), conv, sub.rulebook, coords);
  g.backward(out, seed);
  CHECK(conv.weight.grad[0] == 3.0);
  try {
    g.backward(out, seed);
    FAIL("expected GraphStale");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::GraphStale);
  }

  Graph<double> h;
  out = h.conv(h.input(SparseTensor<double>(coords, 1, {1.0, 2.0})), conv, sub.rulebook, coords);
  conv.weight.value[0] = 5.0;
  conv.weight.touch();
  CHECK_THROWS_AS(h.backward(out, seed), Error);

  Graph<double> frozen(false);
  out = frozen.conv(frozen.input(SparseTensor<double>(coords, 1, {1.0, 2.0})), conv, sub.rulebook, coords);
  CHECK_THROWS_AS(frozen.backward(out, seed), Error);
}

TEST_CASE("adam follows the scalar update rule") {
  Parameter<float> p("p", {3});
  p.value = {1.0f, -2.0f, 0.5f};
  Adam<float> adam({&p}, {0.01, 0.9, 0.999, 1e-8});
  const std::vector<std::vector<double>> grads{{0.5, -1.0, 0.0}, {0.25, 2.0, 1e-3}, {-0.75, 0.5, 3.0}};
  std::vector<double> value{1.0, -2.0, 0.5}, m(3, 0.0), v(3, 0.0);
  for (int step = 1; step <= 3; ++step) {
    for (int i = 0; i < 3; ++i) p.grad[i] = static_cast<float>(grads[step - 1][i]);
    adam.step();
    for (int i = 0; i < 3; ++i) {
      const double g = static_cast<float>(grads[step - 1][i]);
      m[i] = 0.9 * m[i] + 0.1 * g;
      v[i] = 0.999 * v[i] + 0.001 * g * g;
      const double mh = m[i] / (1 - std::pow(0.9, step));
      const double vh = v[i] / (1 - std::pow(0.999, step));
      value[i] = static_cast<float>(value[i] - 0.01 * mh / (std::sqrt(vh) + 1e-8));
      CHECK(p.value[i] == doctest::Approx(value[i]).epsilon(1e-6));
    }
  }
  CHECK(adam.steps() == 3);
  CHECK(p.version == 3);
  adam.zero_grad();
  CHECK(p.grad[1] == 0.0f);
}

TEST_CASE("checkpoints round-trip bit for bit") {
  testing::TempDir tmp("ckpt");
  Checkpoint ckpt;
  ckpt.metadata_json = R"({"depth":2,"note":"x"})";
  ckpt.tensors.push_back({"a.weight", {2, 3}, {1.0f, -0.0f, 1e-40f, std::numeric_limits<float>::max(), 3.25f, -7.0f}});
  ckpt.tensors.push_back({"b", {0}, {}});
  ckpt.tensors.push_back({"c", {1}, {std::numeric_limits<float>::infinity()}});
  save_checkpoint(ckpt, tmp / "m.ckpt");
  const auto back = load_checkpoint(tmp / "m.ckpt");
  REQUIRE(back.tensors.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back.tensors[i].name == ckpt.tensors[i].name);
    CHECK(back.tensors[i].shape == ckpt.tensors[i].shape);
    CHECK(std::memcmp(back.tensors[i].data.data(), ckpt.tensors[i].data.data(), ckpt.tensors[i].data.size() * 4) == 0);
  }
  CHECK(back.find("c") != nullptr);
  CHECK(back.find("zz") == nullptr);
  CHECK(serialize_checkpoint(back) == serialize_checkpoint(ckpt));

  const auto bytes = serialize_checkpoint(ckpt);
  CHECK(std::string(bytes.begin(), bytes.begin() + 8) == "HIEUMCKP");
  auto truncated = bytes;
  truncated.resize(bytes.size() - 4);
  CHECK_THROWS_AS(deserialize_checkpoint(truncated), Error);
  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(deserialize_checkpoint(bad), Error);

  Checkpoint wrong;
  wrong.tensors.push_back({"w", {2, 2}, {1.0f}});
  CHECK_THROWS_AS(serialize_checkpoint(wrong), Error);
}
