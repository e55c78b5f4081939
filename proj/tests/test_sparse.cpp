#include "hieum/error.hpp"
#include "hieum/parallel.hpp"
#include "hieum/sparse/flops.hpp"
#include "hieum/sparse/tensor.hpp"

#include "dense_oracle.hpp"

#include <doctest.h>

using namespace hieum;
using namespace hieum::sparse;

namespace {

struct Case {
  ConvMode mode;
  Dims3 kernel;
  Dims3 stride;
};

// Runs one layer through the sparse engine and the dense oracle.
double compare_layer(Rng& rng, const Case& c, Dims3 shape, double density, int cin, int cout, bool with_bias) {
  auto fine = testing::random_coords(rng, shape, density);
  CoordSetPtr in = fine;
  CoordSetPtr target;
  if (c.mode == ConvMode::Transposed) {
    target = fine;
    in = build_rulebook(fine, c.kernel, c.stride, ConvMode::Strided).output;
  }
  const auto rb = build_rulebook(in, c.kernel, c.stride, c.mode, target);
  const auto feats = testing::random_values(rng, in->size() * cin);
  const auto w = testing::random_values(rng, static_cast<std::size_t>(c.kernel.volume()) * cin * cout);
  const auto b = with_bias ? testing::random_values(rng, cout) : std::vector<double>{};
  const auto got = conv_forward<double>(feats, cin, *rb.rulebook, w, b, cout);
  const auto want = testing::dense_conv(*in, feats, cin, *rb.output, c.kernel, c.stride,
                                        c.mode == ConvMode::Transposed, w, b, cout);
  REQUIRE(got.size() == want.size());
  return testing::max_rel_error(got, want);
}

}  // namespace

TEST_CASE("coordinate sets validate order and extent") {
  CHECK_THROWS_AS(CoordSet({{0, 1, 0}, {0, 0, 0}}, {1, 2, 2}), Error);
  CHECK_THROWS_AS(CoordSet({{0, 0, 0}, {0, 0, 0}}, {1, 2, 2}), Error);
  CHECK_THROWS_AS(CoordSet({{0, 2, 0}}, {1, 2, 2}), Error);
  const CoordSet set({{0, 0, 1}, {1, 1, 0}, {2, 0, 0}}, {3, 2, 2});
  CHECK(set.find({1, 1, 0}) == 1);
  CHECK(set.find({1, 1, 1}) == -1);
  CHECK(set.find({-1, 0, 0}) == -1);
  CHECK(set.frame_range(1) == std::pair<std::size_t, std::size_t>{1, 2});
}

TEST_CASE("from_points sorts rows with their features") {
  const auto t = SparseTensor<double>::from_points({{1, 0, 0}, {0, 1, 1}}, {2, 2, 2}, 2, {1, 2, 3, 4});
  CHECK(t.coords()[0] == Coord{0, 1, 1});
  CHECK(t.row(0)[0] == 3.0);
  CHECK(t.row(1)[1] == 2.0);
}

TEST_CASE("invalid kernels are rejected") {
  auto set = std::make_shared<CoordSet>(std::vector<Coord>{{0, 0, 0}}, Dims3{1, 4, 4});
  CHECK_THROWS_AS(build_rulebook(set, {2, 3, 3}, {1, 1, 1}, ConvMode::Submanifold), Error);
  CHECK_THROWS_AS(build_rulebook(set, {3, 3, 3}, {1, 2, 2}, ConvMode::Submanifold), Error);
  CHECK_THROWS_AS(build_rulebook(set, {1, 3, 3}, {1, 2, 2}, ConvMode::Strided), Error);
  CHECK_THROWS_AS(build_rulebook(set, {1, 1, 1}, {1, 2, 2}, ConvMode::Strided), Error);
  CHECK_THROWS_AS(build_rulebook(set, {1, 2, 2}, {1, 2, 2}, ConvMode::Transposed), Error);
  try {
    build_rulebook(set, {0, 3, 3}, {1, 1, 1}, ConvMode::Submanifold);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidKernel);
  }
}

TEST_CASE("submanifold output keeps the input coordinates") {
  Rng rng(1);
  auto in = testing::random_coords(rng, {4, 8, 8}, 0.2);
  const auto rb = build_rulebook(in, {3, 3, 3}, {1, 1, 1}, ConvMode::Submanifold);
  CHECK(rb.output.get() == in.get());
  // Centre offset pairs every site with itself.
  const auto& centre = rb.rulebook->in_rows[13];
  CHECK(centre.size() == in->size());
}

TEST_CASE("strided output is the set of floor divisions") {
  auto in = std::make_shared<CoordSet>(std::vector<Coord>{{0, 0, 0}, {0, 1, 1}, {0, 3, 2}, {1, 5, 5}}, Dims3{2, 6, 6});
  const auto rb = build_rulebook(in, {1, 2, 2}, {1, 2, 2}, ConvMode::Strided);
  const std::vector<Coord> want{{0, 0, 0}, {0, 1, 1}, {1, 2, 2}};
  CHECK(std::vector<Coord>(rb.output->coords().begin(), rb.output->coords().end()) == want);
  CHECK(rb.output->shape() == Dims3{2, 3, 3});
}

TEST_CASE("sparse layers match dense convolution") {
  Rng rng(77);
  const std::vector<Case> cases{
      {ConvMode::Submanifold, {3, 3, 3}, {1, 1, 1}}, {ConvMode::Submanifold, {1, 1, 1}, {1, 1, 1}},
      {ConvMode::Submanifold, {1, 3, 5}, {1, 1, 1}}, {ConvMode::Strided, {1, 2, 2}, {1, 2, 2}},
      {ConvMode::Strided, {3, 4, 4}, {1, 2, 2}},     {ConvMode::Strided, {2, 2, 2}, {2, 2, 2}},
      {ConvMode::Transposed, {1, 2, 2}, {1, 2, 2}},  {ConvMode::Transposed, {3, 4, 4}, {1, 2, 2}},
  };
  for (const auto& c : cases) {
    for (int trial = 0; trial < 5; ++trial) {
      const Dims3 shape{rng.uniform_int(1, 5), rng.uniform_int(2, 10), rng.uniform_int(2, 10)};
      const double err = compare_layer(rng, c, shape, rng.uniform(0.05, 0.5), rng.uniform_int(1, 4),
                                       rng.uniform_int(1, 4), trial % 2 == 0);
      CHECK(err <= 1e-12);
    }
  }
}

TEST_CASE("convolution results do not depend on the worker count") {
  Rng rng(5);
  auto in = testing::random_coords(rng, {3, 40, 40}, 0.3);
  const auto rb = build_rulebook(in, {3, 3, 3}, {1, 1, 1}, ConvMode::Submanifold);
  std::vector<float> feats(in->size() * 3), w(27 * 3 * 5);
  for (auto& v : feats) v = static_cast<float>(rng.uniform(-1, 1));
  for (auto& v : w) v = static_cast<float>(rng.uniform(-1, 1));
  const int before = threads();
  set_threads(1);
  const auto one = conv_forward<float>(feats, 3, *rb.rulebook, w, {}, 5);
  set_threads(3);
  const auto three = conv_forward<float>(feats, 3, *rb.rulebook, w, {}, 5);
  set_threads(before);
  CHECK(one == three);
}

TEST_CASE("conv backward matches finite differences") {
  Rng rng(9);
  for (auto mode : {ConvMode::Submanifold, ConvMode::Strided, ConvMode::Transposed}) {
    const Dims3 kernel = mode == ConvMode::Submanifold ? Dims3{3, 3, 3} : Dims3{1, 2, 2};
    const Dims3 stride = mode == ConvMode::Submanifold ? Dims3{1, 1, 1} : Dims3{1, 2, 2};
    auto fine = testing::random_coords(rng, {3, 6, 6}, 0.35);
    CoordSetPtr in = fine, target;
    if (mode == ConvMode::Transposed) {
      target = fine;
      in = build_rulebook(fine, kernel, stride, ConvMode::Strided).output;
    }
    const auto rb = build_rulebook(in, kernel, stride, mode, target).rulebook;
    const int ci = 2, co = 3;
    auto x = testing::random_values(rng, in->size() * ci);
    auto w = testing::random_values(rng, static_cast<std::size_t>(kernel.volume()) * ci * co);
    auto b = testing::random_values(rng, co);
    const auto proj = testing::random_values(rng, rb->num_outputs * co);
    auto loss = [&] {
      const auto y = conv_forward<double>(x, ci, *rb, w, b, co);
      double s = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) s += proj[i] * y[i];
      return s;
    };
    std::vector<double> gx(x.size()), gw(w.size()), gb(b.size());
    conv_backward<double>(x, ci, *rb, w, co, proj, gx, gw, gb);
    const double h = 1e-5;
    auto check = [&](std::vector<double>& v, const std::vector<double>& g) {
      for (std::size_t i = 0; i < v.size(); ++i) {
        const double keep = v[i];
        v[i] = keep + h;
        const double up = loss();
        v[i] = keep - h;
        const double down = loss();
        v[i] = keep;
        CHECK(testing::rel_error((up - down) / (2 * h), g[i]) < 1e-7);
      }
    };
    check(x, gx);
    check(w, gw);
    check(b, gb);
  }
}

TEST_CASE("multiply-accumulates are counted per rulebook pair") {
  Rng rng(2);
  auto in = testing::random_coords(rng, {2, 8, 8}, 0.3);
  const auto rb = build_rulebook(in, {3, 3, 3}, {1, 1, 1}, ConvMode::Submanifold).rulebook;
  std::vector<float> feats(in->size() * 2, 1.0f), w(27 * 2 * 4, 0.5f);
  MacScope scope;
  conv_forward<float>(feats, 2, *rb, w, {}, 4);
  CHECK(scope.elapsed() == rb->pair_count() * 2 * 4);
}
