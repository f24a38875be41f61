#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "ramlab/errors.hpp"
#include "ramlab/nn.hpp"
#include "ramlab/rng.hpp"

using namespace ramlab;

TEST_CASE("mlp shapes and parameter count") {
  // depth 1 over input 2 -> width 4 -> output 1: two affine maps.
  MlpParams p = mlp_init(2, 1, 4, 1, 42);
  REQUIRE(p.layers.size() == 2);
  CHECK(p.layers[0].w.rows == 4);
  CHECK(p.layers[0].w.cols == 2);
  CHECK(p.layers[0].b.size() == 4);
  CHECK(p.layers[1].w.rows == 1);
  CHECK(p.layers[1].w.cols == 4);
  CHECK(p.layers[1].b.size() == 1);
  CHECK(p.num_params() == 4 * 2 + 4 + 1 * 4 + 1);
  CHECK(param_count(p) == p.num_params());

  MlpParams affine = mlp_init(3, 2, 0, 0, 1);
  REQUIRE(affine.layers.size() == 1);
  CHECK(affine.layers[0].w.rows == 2);
  CHECK(affine.layers[0].w.cols == 3);
  CHECK(affine.num_params() == 8);

  MlpParams deep = mlp_init(5, 3, 7, 4, 9);
  REQUIRE(deep.layers.size() == 5);
  CHECK(deep.layers[2].w.rows == 7);
  CHECK(deep.layers[2].w.cols == 7);
  CHECK(deep.num_params() == (7 * 5 + 7) + 3 * (7 * 7 + 7) + (3 * 7 + 3));
}

TEST_CASE("mlp_init validates arguments") {
  CHECK_THROWS_AS(mlp_init(0, 1, 4, 1, 1), ConfigError);
  CHECK_THROWS_AS(mlp_init(2, 0, 4, 1, 1), ConfigError);
  CHECK_THROWS_AS(mlp_init(2, 1, 0, 1, 1), ConfigError);
  CHECK_THROWS_AS(mlp_init(2, 1, 4, -1, 1), ConfigError);
  CHECK_NOTHROW(mlp_init(2, 1, 0, 0, 1));  // hidden unused at depth 0
}

TEST_CASE("mlp_init is seed-deterministic with bounded weights and zero biases") {
  MlpParams a = mlp_init(3, 2, 5, 2, 123);
  MlpParams b = mlp_init(3, 2, 5, 2, 123);
  MlpParams c = mlp_init(3, 2, 5, 2, 124);
  bool identical = true, distinct = false;
  for (int i = 0; i < param_count(a); ++i) {
    if (get_param(a, i) != get_param(b, i)) identical = false;
    if (get_param(a, i) != get_param(c, i)) distinct = true;
  }
  CHECK(identical);
  CHECK(distinct);
  for (size_t l = 0; l < a.layers.size(); ++l) {
    double limit = std::sqrt(6.0 / a.layers[l].w.cols);
    for (double v : a.layers[l].w.a) CHECK(std::fabs(v) <= limit);
    for (double v : a.layers[l].b) CHECK(v == 0.0);
  }
}

TEST_CASE("forward matches a hand-computed two-layer network") {
  // 2 -> 3 -> 1 with explicit weights; input chosen so one hidden unit is
  // strictly negative before the ReLU.
  MlpParams p = mlp_init(2, 1, 3, 1, 7);
  double w0[3][2] = {{1.0, -2.0}, {0.5, 0.25}, {-1.0, 1.0}};
  double b0[3] = {0.1, -0.2, 0.3};
  double w1[3] = {2.0, -1.0, 0.5};
  double b1 = 0.05;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 2; ++c) p.layers[0].w.at(r, c) = w0[r][c];
    p.layers[0].b[static_cast<size_t>(r)] = b0[r];
  }
  for (int c = 0; c < 3; ++c) p.layers[1].w.at(0, c) = w1[c];
  p.layers[1].b[0] = b1;

  std::vector<double> x{0.7, 0.9};
  // pre0 = (0.7*1 - 0.9*2 + 0.1, 0.7*0.5 + 0.9*0.25 - 0.2, -0.7 + 0.9 + 0.3)
  //      = (-1.0, 0.375, 0.5); relu = (0, 0.375, 0.5)
  // out  = 2*0 - 1*0.375 + 0.5*0.5 + 0.05 = -0.075
  auto y = mlp_forward(p, x);
  REQUIRE(y.size() == 1);
  CHECK(y[0] == doctest::Approx(-0.075).epsilon(1e-15));

  // The dead unit's incoming weights must not receive gradient.
  std::vector<double> up{1.0};
  GradBuffer g = mlp_backward(p, x, up);
  CHECK(g.layers[0].w.at(0, 0) == 0.0);
  CHECK(g.layers[0].w.at(0, 1) == 0.0);
  CHECK(g.layers[0].b[0] == 0.0);
  // Live units: dL/dw0[1][0] = w1[1] * x0 = -0.7
  CHECK(g.layers[0].w.at(1, 0) == doctest::Approx(-0.7).epsilon(1e-15));
  CHECK(g.layers[1].w.at(0, 1) == doctest::Approx(0.375).epsilon(1e-15));
  CHECK(g.layers[1].b[0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("forward rejects mis-sized input") {
  MlpParams p = mlp_init(3, 2, 4, 1, 5);
  std::vector<double> x{1.0, 2.0};
  CHECK_THROWS_AS(mlp_forward(p, x), ShapeError);
}

namespace {

// Smallest |pre-activation| over all hidden layers for the given input.
double relu_margin(const MlpParams& p, std::span<const double> x) {
  MlpWorkspace ws;
  mlp_forward_ws(p, x, ws);
  double margin = 1e300;
  for (size_t l = 0; l + 1 < p.layers.size(); ++l)
    for (double v : ws.pre[l]) margin = std::min(margin, std::fabs(v));
  return margin;
}

double scalar_objective(const MlpParams& p, std::span<const double> x,
                        std::span<const double> up) {
  auto y = mlp_forward(p, x);
  double s = 0.0;
  for (size_t i = 0; i < y.size(); ++i) s += up[i] * y[i];
  return s;
}

}  // namespace

TEST_CASE("backward matches central finite differences away from kinks") {
  int tested = 0;
  for (std::uint64_t trial = 0; trial < 40 && tested < 12; ++trial) {
    Rng rng(derive_seed(77, trial));
    int in = 1 + static_cast<int>(rng.below(3));
    int out = 1 + static_cast<int>(rng.below(3));
    int depth = static_cast<int>(rng.below(3));
    int width = 2 + static_cast<int>(rng.below(3));
    MlpParams p = mlp_init(in, out, width, depth, rng.u64());
    std::vector<double> x(static_cast<size_t>(in)), up(static_cast<size_t>(out));
    for (double& v : x) v = rng.uniform(-1.0, 1.0);
    for (double& v : up) v = rng.uniform(-1.0, 1.0);
    if (depth > 0 && relu_margin(p, x) < 1e-3) continue;
    ++tested;

    GradBuffer g = mlp_backward(p, x, up);
    const double h = 1e-5;
    for (int idx = 0; idx < param_count(p); ++idx) {
      double p0 = get_param(p, idx);
      set_param(p, idx, p0 + h);
      double fp = scalar_objective(p, x, up);
      set_param(p, idx, p0 - h);
      double fm = scalar_objective(p, x, up);
      set_param(p, idx, p0);
      double fd = (fp - fm) / (2.0 * h);
      CHECK(std::fabs(get_grad(g, idx) - fd) <= 1e-6 * std::max(1.0, std::fabs(fd)));
    }
  }
  CHECK(tested >= 8);
}

TEST_CASE("backward is linear in the upstream vector") {
  Rng rng(991);
  MlpParams p = mlp_init(3, 2, 4, 2, rng.u64());
  std::vector<double> x{0.3, -0.8, 0.5};
  std::vector<double> u1{1.3, -0.4}, u2{0.7, 2.1};
  std::vector<double> mix{1.3 + 2.0 * 0.7, -0.4 + 2.0 * 2.1};
  GradBuffer g1 = mlp_backward(p, x, u1);
  GradBuffer g2 = mlp_backward(p, x, u2);
  GradBuffer gm = mlp_backward(p, x, mix);
  for (int i = 0; i < param_count(p); ++i)
    CHECK(std::fabs(get_grad(gm, i) - (get_grad(g1, i) + 2.0 * get_grad(g2, i))) <= 1e-12);
}

TEST_CASE("workspace forward/backward agree with the plain entry points") {
  Rng rng(5150);
  MlpParams p = mlp_init(4, 3, 5, 2, rng.u64());
  std::vector<double> x(4), up(3);
  for (double& v : x) v = rng.uniform(-1.0, 1.0);
  for (double& v : up) v = rng.uniform(-1.0, 1.0);

  auto y_plain = mlp_forward(p, x);
  MlpWorkspace ws;
  auto y_ws = mlp_forward_ws(p, x, ws);
  REQUIRE(y_ws.size() == y_plain.size());
  for (size_t i = 0; i < y_plain.size(); ++i) CHECK(y_ws[i] == y_plain[i]);

  GradBuffer ref = mlp_backward(p, x, up);
  GradBuffer acc = make_grad_buffer(p);
  mlp_backward_ws(p, ws, up, 2.5, acc);
  for (int i = 0; i < param_count(p); ++i)
    CHECK(get_grad(acc, i) == doctest::Approx(2.5 * get_grad(ref, i)).epsilon(1e-14));

  // Fused call accumulates on top of existing content.
  mlp_accumulate_grad(p, x, up, -2.5, acc, ws);
  for (int i = 0; i < param_count(p); ++i) CHECK(std::fabs(get_grad(acc, i)) <= 1e-12);
}

TEST_CASE("gradient buffer algebra") {
  MlpParams p = mlp_init(2, 2, 3, 1, 31);
  GradBuffer a = make_grad_buffer(p);
  GradBuffer b = make_grad_buffer(p);
  int n = param_count(p);
  // Fill via a backward pass to get nonzero content.
  std::vector<double> x{0.4, -0.6}, up{1.0, -2.0};
  a = mlp_backward(p, x, up);
  zero_grad(b);
  grad_axpy(b, a, 3.0);
  double sq = 0.0;
  for (int i = 0; i < n; ++i) {
    CHECK(get_grad(b, i) == doctest::Approx(3.0 * get_grad(a, i)).epsilon(1e-15));
    sq += get_grad(a, i) * get_grad(a, i);
  }
  CHECK(grad_sq_norm(a) == doctest::Approx(sq).epsilon(1e-12));
  grad_scale(b, 1.0 / 3.0);
  for (int i = 0; i < n; ++i)
    CHECK(get_grad(b, i) == doctest::Approx(get_grad(a, i)).epsilon(1e-14));
}

TEST_CASE("flat parameter indexing round-trips") {
  MlpParams p = mlp_init(3, 2, 4, 1, 66);
  int n = param_count(p);
  for (int i = 0; i < n; ++i) set_param(p, i, static_cast<double>(i) + 0.25);
  for (int i = 0; i < n; ++i) CHECK(get_param(p, i) == static_cast<double>(i) + 0.25);
  // Layer-0 weights come first, row-major, then layer-0 biases.
  CHECK(p.layers[0].w.at(0, 0) == 0.25);
  CHECK(p.layers[0].w.at(0, 1) == 1.25);
  CHECK(p.layers[0].w.at(1, 0) == 3.25);
  CHECK(p.layers[0].b[0] == 12.25);
  CHECK(p.layers[1].w.at(0, 0) == 16.25);
  CHECK_THROWS_AS(get_param(p, n), ShapeError);
  CHECK_THROWS_AS(get_param(p, -1), ShapeError);
}

TEST_CASE("checkpoint json round-trip is bit-exact") {
  Rng rng(404);
  MlpParams p = mlp_init(3, 2, 5, 2, rng.u64());
  // Values with no short decimal representation.
  for (int i = 0; i < param_count(p); ++i)
    set_param(p, i, get_param(p, i) + 1.0 / 3.0 * rng.uniform(-1.0, 1.0));
  MlpParams q = checkpoint_from_json(checkpoint_to_json(p));
  REQUIRE(param_count(q) == param_count(p));
  CHECK(q.in_dim == p.in_dim);
  CHECK(q.hidden == p.hidden);
  CHECK(q.out_dim == p.out_dim);
  CHECK(q.depth == p.depth);
  for (int i = 0; i < param_count(p); ++i) CHECK(get_param(q, i) == get_param(p, i));

  auto path = std::filesystem::temp_directory_path() / "ramlab_ckpt_test.json";
  save_checkpoint(p, path.string());
  MlpParams r = load_checkpoint(path.string());
  for (int i = 0; i < param_count(p); ++i) CHECK(get_param(r, i) == get_param(p, i));
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint parsing rejects malformed input") {
  CHECK_THROWS_AS(checkpoint_from_json("not json"), ConfigError);
  CHECK_THROWS_AS(checkpoint_from_json("{\"depth\": 1}"), ConfigError);
  MlpParams p = mlp_init(2, 1, 3, 1, 11);
  std::string good = checkpoint_to_json(p);
  // Claim a different hidden width than the stored matrices.
  std::string bad = good;
  auto pos = bad.find("\"widths\": [2, 3, 1]");
  REQUIRE(pos != std::string::npos);
  bad.replace(pos, std::string("\"widths\": [2, 3, 1]").size(), "\"widths\": [2, 4, 1]");
  CHECK_THROWS_AS(checkpoint_from_json(bad), ShapeError);
}
