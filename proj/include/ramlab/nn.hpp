#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ramlab {

// Dense row-major matrix.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}
  double& at(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
  const double* row(int r) const { return a.data() + static_cast<size_t>(r) * cols; }
};

struct Layer {
  Matrix w;
  std::vector<double> b;
};

// ReLU network with depth L: affine maps A_0..A_L with a ReLU between each
// consecutive pair (L+1 affine maps, L activations). Layer 0 maps in_dim ->
// hidden, layers 1..L-1 map hidden -> hidden, layer L maps hidden -> out_dim.
// depth == 0 degenerates to a single affine map in_dim -> out_dim.
struct MlpParams {
  int in_dim = 0;
  int hidden = 0;
  int out_dim = 0;
  int depth = 0;
  std::vector<Layer> layers;

  int num_params() const;
};

// Gradient holder shaped exactly like the parameters it differentiates.
struct GradBuffer {
  std::vector<Layer> layers;
};

// Scratch space reused across forward/backward calls to avoid reallocation.
struct MlpWorkspace {
  std::vector<std::vector<double>> acts;  // acts[l] = input of affine map l
  std::vector<std::vector<double>> pre;   // pre[l] = output of affine map l
  std::vector<std::vector<double>> delta;
};

MlpParams mlp_init(int in_dim, int out_dim, int hidden, int depth, std::uint64_t seed);

std::vector<double> mlp_forward(const MlpParams& p, std::span<const double> x);

// Gradient of <upstream, f(x)> with respect to every weight and bias.
GradBuffer mlp_backward(const MlpParams& p, std::span<const double> x,
                        std::span<const double> upstream);

// Workspace variants: forward records activations, backward reuses them and
// accumulates scale * gradient into an existing buffer.
std::span<const double> mlp_forward_ws(const MlpParams& p, std::span<const double> x,
                                       MlpWorkspace& ws);
void mlp_backward_ws(const MlpParams& p, const MlpWorkspace& ws,
                     std::span<const double> upstream, double scale, GradBuffer& g);
// Fused forward + backward accumulating scale * d<upstream, f(x)>/dparams.
void mlp_accumulate_grad(const MlpParams& p, std::span<const double> x,
                         std::span<const double> upstream, double scale, GradBuffer& g,
                         MlpWorkspace& ws);

GradBuffer make_grad_buffer(const MlpParams& p);
void zero_grad(GradBuffer& g);
// g += scale * h
void grad_axpy(GradBuffer& g, const GradBuffer& h, double scale);
double grad_sq_norm(const GradBuffer& g);
void grad_scale(GradBuffer& g, double s);

// Flat scalar indexing over (weights row-major, then biases) per layer, in
// layer order; used by finite differencing and the optimizer.
int param_count(const MlpParams& p);
double get_param(const MlpParams& p, int idx);
void set_param(MlpParams& p, int idx, double v);
double get_grad(const GradBuffer& g, int idx);

// Checkpoint format: {"depth": L, "widths": [in, hidden, out],
// "layers": [{"w": [[...]...], "b": [...]}, ...]} with reals written at 17
// significant digits so reload reproduces parameters bit-for-bit.
std::string checkpoint_to_json(const MlpParams& p);
MlpParams checkpoint_from_json(const std::string& text);
void save_checkpoint(const MlpParams& p, const std::string& path);
MlpParams load_checkpoint(const std::string& path);

}  // namespace ramlab
