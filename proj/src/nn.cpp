#include "ramlab/nn.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "ramlab/errors.hpp"
#include "ramlab/rng.hpp"

namespace ramlab {

int MlpParams::num_params() const {
  int n = 0;
  for (const auto& l : layers) n += l.w.rows * l.w.cols + static_cast<int>(l.b.size());
  return n;
}

MlpParams mlp_init(int in_dim, int out_dim, int hidden, int depth, std::uint64_t seed) {
  if (in_dim < 1 || out_dim < 1) throw ConfigError("mlp_init: dimensions must be positive");
  if (depth < 0) throw ConfigError("mlp_init: depth must be non-negative");
  if (depth >= 1 && hidden < 1) throw ConfigError("mlp_init: hidden width must be positive");

  MlpParams p;
  p.in_dim = in_dim;
  p.hidden = depth >= 1 ? hidden : 0;
  p.out_dim = out_dim;
  p.depth = depth;
  p.layers.resize(static_cast<size_t>(depth) + 1);

  Rng rng(seed);
  for (int l = 0; l <= depth; ++l) {
    int rows = (l == depth) ? out_dim : hidden;
    int cols = (l == 0) ? in_dim : hidden;
    Layer& layer = p.layers[static_cast<size_t>(l)];
    layer.w = Matrix(rows, cols);
    double bound = std::sqrt(6.0 / static_cast<double>(cols));
    for (double& v : layer.w.a) v = rng.uniform(-bound, bound);
    layer.b.assign(static_cast<size_t>(rows), 0.0);
  }
  return p;
}

static void affine(const Layer& l, std::span<const double> in, std::vector<double>& out) {
  out.resize(static_cast<size_t>(l.w.rows));
  for (int r = 0; r < l.w.rows; ++r) {
    const double* wr = l.w.row(r);
    double s = l.b[static_cast<size_t>(r)];
    for (int c = 0; c < l.w.cols; ++c) s += wr[c] * in[static_cast<size_t>(c)];
    out[static_cast<size_t>(r)] = s;
  }
}

std::span<const double> mlp_forward_ws(const MlpParams& p, std::span<const double> x,
                                       MlpWorkspace& ws) {
  if (static_cast<int>(x.size()) != p.in_dim) throw ShapeError("mlp_forward: input size mismatch");
  size_t n = p.layers.size();
  ws.acts.resize(n);
  ws.pre.resize(n);
  ws.acts[0].assign(x.begin(), x.end());
  for (size_t l = 0; l < n; ++l) {
    affine(p.layers[l], ws.acts[l], ws.pre[l]);
    if (l + 1 < n) {
      auto& nxt = ws.acts[l + 1];
      nxt.resize(ws.pre[l].size());
      for (size_t i = 0; i < nxt.size(); ++i) {
        double v = ws.pre[l][i];
        nxt[i] = v > 0.0 ? v : 0.0;
      }
    }
  }
  return ws.pre[n - 1];
}

std::vector<double> mlp_forward(const MlpParams& p, std::span<const double> x) {
  MlpWorkspace ws;
  auto out = mlp_forward_ws(p, x, ws);
  return std::vector<double>(out.begin(), out.end());
}

void mlp_backward_ws(const MlpParams& p, const MlpWorkspace& ws,
                     std::span<const double> upstream, double scale, GradBuffer& g) {
  size_t n = p.layers.size();
  if (upstream.size() != ws.pre[n - 1].size())
    throw ShapeError("mlp_backward: upstream size mismatch");
  auto& delta = const_cast<MlpWorkspace&>(ws).delta;
  delta.resize(n);
  delta[n - 1].assign(upstream.begin(), upstream.end());
  for (size_t l = n; l-- > 0;) {
    const Layer& layer = p.layers[l];
    Layer& gl = g.layers[l];
    const auto& dl = delta[l];
    const auto& in = ws.acts[l];
    for (int r = 0; r < layer.w.rows; ++r) {
      double dr = scale * dl[static_cast<size_t>(r)];
      gl.b[static_cast<size_t>(r)] += dr;
      double* grow = gl.w.a.data() + static_cast<size_t>(r) * layer.w.cols;
      for (int c = 0; c < layer.w.cols; ++c) grow[c] += dr * in[static_cast<size_t>(c)];
    }
    if (l == 0) break;
    auto& dprev = delta[l - 1];
    dprev.assign(static_cast<size_t>(layer.w.cols), 0.0);
    for (int r = 0; r < layer.w.rows; ++r) {
      double dr = dl[static_cast<size_t>(r)];
      if (dr == 0.0) continue;
      const double* wr = layer.w.row(r);
      for (int c = 0; c < layer.w.cols; ++c) dprev[static_cast<size_t>(c)] += wr[c] * dr;
    }
    // ReLU subgradient: zero at non-positive pre-activations (including 0).
    const auto& z = ws.pre[l - 1];
    for (size_t i = 0; i < dprev.size(); ++i)
      if (z[i] <= 0.0) dprev[i] = 0.0;
  }
}

GradBuffer mlp_backward(const MlpParams& p, std::span<const double> x,
                        std::span<const double> upstream) {
  MlpWorkspace ws;
  mlp_forward_ws(p, x, ws);
  GradBuffer g = make_grad_buffer(p);
  mlp_backward_ws(p, ws, upstream, 1.0, g);
  return g;
}

void mlp_accumulate_grad(const MlpParams& p, std::span<const double> x,
                         std::span<const double> upstream, double scale, GradBuffer& g,
                         MlpWorkspace& ws) {
  mlp_forward_ws(p, x, ws);
  mlp_backward_ws(p, ws, upstream, scale, g);
}

GradBuffer make_grad_buffer(const MlpParams& p) {
  GradBuffer g;
  g.layers.resize(p.layers.size());
  for (size_t l = 0; l < p.layers.size(); ++l) {
    g.layers[l].w = Matrix(p.layers[l].w.rows, p.layers[l].w.cols);
    g.layers[l].b.assign(p.layers[l].b.size(), 0.0);
  }
  return g;
}

void zero_grad(GradBuffer& g) {
  for (auto& l : g.layers) {
    std::fill(l.w.a.begin(), l.w.a.end(), 0.0);
    std::fill(l.b.begin(), l.b.end(), 0.0);
  }
}

void grad_axpy(GradBuffer& g, const GradBuffer& h, double scale) {
  for (size_t l = 0; l < g.layers.size(); ++l) {
    auto& gw = g.layers[l].w.a;
    const auto& hw = h.layers[l].w.a;
    for (size_t i = 0; i < gw.size(); ++i) gw[i] += scale * hw[i];
    auto& gb = g.layers[l].b;
    const auto& hb = h.layers[l].b;
    for (size_t i = 0; i < gb.size(); ++i) gb[i] += scale * hb[i];
  }
}

double grad_sq_norm(const GradBuffer& g) {
  double s = 0.0;
  for (const auto& l : g.layers) {
    for (double v : l.w.a) s += v * v;
    for (double v : l.b) s += v * v;
  }
  return s;
}

void grad_scale(GradBuffer& g, double s) {
  for (auto& l : g.layers) {
    for (double& v : l.w.a) v *= s;
    for (double& v : l.b) v *= s;
  }
}

int param_count(const MlpParams& p) { return p.num_params(); }

namespace {
// Locates flat index idx inside layer-ordered (weights, then biases) storage.
template <typename Layers>
auto* locate(Layers& layers, int idx) {
  if (idx < 0) throw ShapeError("parameter index out of range");
  for (auto& l : layers) {
    int nw = l.w.rows * l.w.cols;
    if (idx < nw) return &l.w.a[static_cast<size_t>(idx)];
    idx -= nw;
    int nb = static_cast<int>(l.b.size());
    if (idx < nb) return &l.b[static_cast<size_t>(idx)];
    idx -= nb;
  }
  throw ShapeError("parameter index out of range");
}
}  // namespace

double get_param(const MlpParams& p, int idx) { return *locate(p.layers, idx); }
void set_param(MlpParams& p, int idx, double v) { *locate(p.layers, idx) = v; }
double get_grad(const GradBuffer& g, int idx) { return *locate(g.layers, idx); }

namespace {
void put_real(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}
}  // namespace

std::string checkpoint_to_json(const MlpParams& p) {
  std::string out;
  out += "{\n  \"depth\": " + std::to_string(p.depth) + ",\n  \"widths\": [" +
         std::to_string(p.in_dim) + ", " + std::to_string(p.hidden) + ", " +
         std::to_string(p.out_dim) + "],\n  \"layers\": [\n";
  for (size_t l = 0; l < p.layers.size(); ++l) {
    const Layer& layer = p.layers[l];
    out += "    {\"w\": [";
    for (int r = 0; r < layer.w.rows; ++r) {
      out += r ? ", [" : "[";
      for (int c = 0; c < layer.w.cols; ++c) {
        if (c) out += ", ";
        put_real(out, layer.w.at(r, c));
      }
      out += "]";
    }
    out += "], \"b\": [";
    for (size_t i = 0; i < layer.b.size(); ++i) {
      if (i) out += ", ";
      put_real(out, layer.b[i]);
    }
    out += "]}";
    if (l + 1 < p.layers.size()) out += ",";
    out += "\n";
  }
  out += "  ]\n}\n";
  return out;
}

MlpParams checkpoint_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint parse error: ") + e.what());
  }
  if (!j.contains("depth") || !j.contains("widths") || !j.contains("layers"))
    throw ConfigError("checkpoint missing depth/widths/layers");
  MlpParams p;
  p.depth = j["depth"].get<int>();
  auto widths = j["widths"].get<std::vector<int>>();
  if (widths.size() != 3) throw ConfigError("checkpoint widths must be [in, hidden, out]");
  p.in_dim = widths[0];
  p.hidden = widths[1];
  p.out_dim = widths[2];
  if (p.depth < 0 || static_cast<int>(j["layers"].size()) != p.depth + 1)
    throw ShapeError("checkpoint layer count does not match depth");
  p.layers.resize(j["layers"].size());
  for (int l = 0; l <= p.depth; ++l) {
    const auto& jl = j["layers"][static_cast<size_t>(l)];
    int rows = (l == p.depth) ? p.out_dim : p.hidden;
    int cols = (l == 0) ? p.in_dim : p.hidden;
    auto w = jl.at("w").get<std::vector<std::vector<double>>>();
    if (static_cast<int>(w.size()) != rows)
      throw ShapeError("checkpoint layer " + std::to_string(l) + " row count mismatch");
    Layer& layer = p.layers[static_cast<size_t>(l)];
    layer.w = Matrix(rows, cols);
    for (int r = 0; r < rows; ++r) {
      if (static_cast<int>(w[static_cast<size_t>(r)].size()) != cols)
        throw ShapeError("checkpoint layer " + std::to_string(l) + " column count mismatch");
      for (int c = 0; c < cols; ++c) layer.w.at(r, c) = w[static_cast<size_t>(r)][static_cast<size_t>(c)];
    }
    layer.b = jl.at("b").get<std::vector<double>>();
    if (static_cast<int>(layer.b.size()) != rows)
      throw ShapeError("checkpoint layer " + std::to_string(l) + " bias size mismatch");
  }
  return p;
}

void save_checkpoint(const MlpParams& p, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open checkpoint for writing: " + path);
  f << checkpoint_to_json(p);
  if (!f.good()) throw ConfigError("failed writing checkpoint: " + path);
}

MlpParams load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open checkpoint: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return checkpoint_from_json(ss.str());
}

}  // namespace ramlab
