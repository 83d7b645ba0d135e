#include "melex/neural.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "melex/errors.hpp"

namespace melex {

namespace {

constexpr double kBceEpsilon = 1e-7;

double glorot_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

void check_shape(bool ok, const char* what) {
  if (!ok) throw ShapeError(what);
}

}  // namespace

Parameter::Parameter(std::string name_, Tensor value_)
    : name(std::move(name_)),
      value(std::move(value_)),
      grad(Tensor::zeros(value.shape)),
      m(Tensor::zeros(value.shape)),
      v(Tensor::zeros(value.shape)) {}

Conv2d::Conv2d(std::size_t out_channels, std::size_t in_channels, std::size_t kernel_h,
               std::size_t kernel_w, std::string name)
    : kernels_(name + ".kernels",
               Tensor::zeros({out_channels, in_channels, kernel_h, kernel_w})),
      bias_(name + ".bias", Tensor::zeros({out_channels})) {}

Tensor Conv2d::forward(const Tensor& x) const {
  const auto& ks = kernels_.value.shape;  // [F,C,kh,kw]
  check_shape(x.rank() == 3, "conv2d: input must be rank 3 [C,H,W]");
  check_shape(x.shape[0] == ks[1], "conv2d: channel mismatch");
  check_shape(x.shape[1] >= ks[2] && x.shape[2] >= ks[3], "conv2d: kernel larger than input");
  const std::size_t F = ks[0], C = ks[1], kh = ks[2], kw = ks[3];
  const std::size_t H = x.shape[1], W = x.shape[2];
  const std::size_t oh = H - kh + 1, ow = W - kw + 1;

  Tensor out = Tensor::zeros({F, oh, ow});
  for (std::size_t f = 0; f < F; ++f) {
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        double acc = bias_.value[f];
        for (std::size_t c = 0; c < C; ++c) {
          for (std::size_t u = 0; u < kh; ++u) {
            const double* xrow = &x.data[(c * H + i + u) * W + j];
            const double* krow = &kernels_.value.data[((f * C + c) * kh + u) * kw];
            for (std::size_t vv = 0; vv < kw; ++vv) acc += xrow[vv] * krow[vv];
          }
        }
        out.at3(f, i, j) = acc;
      }
    }
  }
  return out;
}

Tensor Conv2d::backward(const Tensor& x, const Tensor& upstream) {
  const auto& ks = kernels_.value.shape;
  const std::size_t F = ks[0], C = ks[1], kh = ks[2], kw = ks[3];
  const std::size_t H = x.shape[1], W = x.shape[2];
  const std::size_t oh = H - kh + 1, ow = W - kw + 1;
  check_shape(upstream.rank() == 3 && upstream.shape[0] == F && upstream.shape[1] == oh &&
                  upstream.shape[2] == ow,
              "conv2d backward: upstream shape mismatch");

  Tensor dx = Tensor::zeros(x.shape);
  for (std::size_t f = 0; f < F; ++f) {
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        const double g = upstream.at3(f, i, j);
        if (g == 0.0) continue;
        bias_.grad[f] += g;
        for (std::size_t c = 0; c < C; ++c) {
          for (std::size_t u = 0; u < kh; ++u) {
            const double* xrow = &x.data[(c * H + i + u) * W + j];
            double* dxrow = &dx.data[(c * H + i + u) * W + j];
            double* kgrow = &kernels_.grad.data[((f * C + c) * kh + u) * kw];
            const double* krow = &kernels_.value.data[((f * C + c) * kh + u) * kw];
            for (std::size_t vv = 0; vv < kw; ++vv) {
              kgrow[vv] += g * xrow[vv];
              dxrow[vv] += g * krow[vv];
            }
          }
        }
      }
    }
  }
  return dx;
}

void Conv2d::init(Rng& rng) {
  const auto& ks = kernels_.value.shape;
  const std::size_t fan_in = ks[1] * ks[2] * ks[3];
  const std::size_t fan_out = ks[0] * ks[2] * ks[3];
  const double s = glorot_bound(fan_in, fan_out);
  for (double& w : kernels_.value.data) w = rng.uniform(-s, s);
  bias_.value.fill(0.0);
}

Dense::Dense(std::size_t out_features, std::size_t in_features, std::string name)
    : weights_(name + ".weights", Tensor::zeros({out_features, in_features})),
      bias_(name + ".bias", Tensor::zeros({out_features})) {}

Tensor Dense::forward(const Tensor& x) const {
  const std::size_t m = weights_.value.shape[0], n = weights_.value.shape[1];
  check_shape(x.size() == n, "dense: input length mismatch");
  Tensor out = Tensor::zeros({m});
  for (std::size_t i = 0; i < m; ++i) {
    const double* wrow = &weights_.value.data[i * n];
    double acc = bias_.value[i];
    for (std::size_t j = 0; j < n; ++j) acc += wrow[j] * x.data[j];
    out[i] = acc;
  }
  return out;
}

Tensor Dense::backward(const Tensor& x, const Tensor& upstream) {
  const std::size_t m = weights_.value.shape[0], n = weights_.value.shape[1];
  check_shape(upstream.size() == m, "dense backward: upstream shape mismatch");
  Tensor dx = Tensor::zeros(x.shape);
  for (std::size_t i = 0; i < m; ++i) {
    const double g = upstream[i];
    bias_.grad[i] += g;
    double* wgrow = &weights_.grad.data[i * n];
    const double* wrow = &weights_.value.data[i * n];
    for (std::size_t j = 0; j < n; ++j) {
      wgrow[j] += g * x.data[j];
      dx.data[j] += g * wrow[j];
    }
  }
  return dx;
}

void Dense::init(Rng& rng) {
  const std::size_t m = weights_.value.shape[0], n = weights_.value.shape[1];
  const double s = glorot_bound(n, m);
  for (double& w : weights_.value.data) w = rng.uniform(-s, s);
  bias_.value.fill(0.0);
}

Tensor Relu::forward(const Tensor& x) const {
  Tensor out = x;
  for (double& v : out.data) v = std::max(v, 0.0);
  return out;
}

Tensor Relu::backward(const Tensor& x, const Tensor& upstream) {
  check_shape(upstream.size() == x.size(), "relu backward: shape mismatch");
  Tensor dx = upstream;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    if (x.data[i] <= 0.0) dx.data[i] = 0.0;
  }
  return dx;
}

Tensor Sigmoid::forward(const Tensor& x) const {
  Tensor out = x;
  for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  return out;
}

Tensor Sigmoid::backward(const Tensor& x, const Tensor& upstream) {
  check_shape(upstream.size() == x.size(), "sigmoid backward: shape mismatch");
  Tensor dx = upstream;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    const double y = 1.0 / (1.0 + std::exp(-x.data[i]));
    dx.data[i] *= y * (1.0 - y);
  }
  return dx;
}

Tensor SoftmaxLayer::forward(const Tensor& x) const { return softmax(x); }

Tensor SoftmaxLayer::backward(const Tensor& x, const Tensor& upstream) {
  check_shape(upstream.size() == x.size(), "softmax backward: shape mismatch");
  const Tensor y = softmax(x);
  double dot = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) dot += upstream[i] * y[i];
  Tensor dx = y;
  for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] = y[i] * (upstream[i] - dot);
  return dx;
}

Tensor Flatten::forward(const Tensor& x) const {
  Tensor out = x;
  out.shape = {x.size()};
  return out;
}

Tensor Flatten::backward(const Tensor& x, const Tensor& upstream) {
  check_shape(upstream.size() == x.size(), "flatten backward: shape mismatch");
  Tensor dx = upstream;
  dx.shape = x.shape;
  return dx;
}

Tensor Network::forward(const Tensor& input, ForwardTrace* trace) const {
  if (trace != nullptr) {
    trace->inputs.clear();
    trace->inputs.reserve(layers_.size());
  }
  Tensor x = input;
  for (const auto& layer : layers_) {
    if (trace != nullptr) trace->inputs.push_back(x);
    x = layer->forward(x);
  }
  if (trace != nullptr) trace->output = x;
  return x;
}

Tensor Network::backward(const ForwardTrace& trace, const Tensor& upstream) {
  if (trace.inputs.size() != layers_.size()) {
    throw std::logic_error("network backward: no matching forward trace");
  }
  Tensor g = upstream;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    g = layers_[i]->backward(trace.inputs[i], g);
  }
  return g;
}

std::vector<Parameter*> Network::parameters() {
  std::vector<Parameter*> out;
  for (const auto& layer : layers_) {
    for (Parameter* p : layer->parameters()) out.push_back(p);
  }
  return out;
}

std::size_t Network::parameter_count() {
  std::size_t n = 0;
  for (Parameter* p : parameters()) n += p->value.size();
  return n;
}

void Network::zero_grads() {
  for (Parameter* p : parameters()) p->zero_grad();
}

void Network::init(std::uint64_t seed) {
  Rng rng(seed);
  for (const auto& layer : layers_) layer->init(rng);
}

BceResult binary_cross_entropy(double p, int y) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument("binary_cross_entropy: p must be in [0, 1]");
  }
  if (y != 0 && y != 1) throw std::invalid_argument("binary_cross_entropy: y must be 0 or 1");
  const double pc = std::clamp(p, kBceEpsilon, 1.0 - kBceEpsilon);
  BceResult r;
  r.loss = -(y * std::log(pc) + (1 - y) * std::log(1.0 - pc));
  r.dloss_dp = (pc - static_cast<double>(y)) / (pc * (1.0 - pc));
  return r;
}

Tensor softmax(const Tensor& logits) {
  if (logits.size() == 0) throw ShapeError("softmax: empty input");
  double mx = logits[0];
  for (double v : logits.data) mx = std::max(mx, v);
  Tensor out = logits;
  double sum = 0.0;
  for (double& v : out.data) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : out.data) {
    v /= sum;
    if (v <= 0.0) v = 1e-300;  // exp can underflow; keep outputs in (0,1)
  }
  return out;
}

CrossEntropyResult cross_entropy(const Tensor& logits, std::size_t target) {
  const std::size_t k = logits.size();
  if (k < 2) throw ShapeError("cross_entropy: need at least 2 classes");
  if (target >= k) throw std::invalid_argument("cross_entropy: target index out of range");

  double mx = logits[0];
  for (double v : logits.data) mx = std::max(mx, v);
  double sum = 0.0;
  for (double v : logits.data) sum += std::exp(v - mx);
  const double lse = mx + std::log(sum);

  CrossEntropyResult r;
  r.loss = lse - logits[target];
  r.grad_logits = logits;
  for (std::size_t i = 0; i < k; ++i) {
    r.grad_logits.data[i] = std::exp(logits[i] - lse) - (i == target ? 1.0 : 0.0);
  }
  return r;
}

void adam_step(const std::vector<Parameter*>& params, const AdamConfig& cfg) {
  for (Parameter* p : params) {
    if (!p->grad.same_shape(p->value)) throw ShapeError("adam_step: gradient shape mismatch");
    p->step += 1;
    const double t = static_cast<double>(p->step);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double g = p->grad[i];
      p->m.data[i] = cfg.beta1 * p->m.data[i] + (1.0 - cfg.beta1) * g;
      p->v.data[i] = cfg.beta2 * p->v.data[i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = p->m.data[i] / bc1;
      const double vhat = p->v.data[i] / bc2;
      p->value.data[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
  }
}

namespace {

void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& s, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& s, double d) {
  std::uint64_t u;
  std::memcpy(&u, &d, 8);
  put_u64(s, u);
}

void put_string(std::string& s, const std::string& v) {
  put_u32(s, static_cast<std::uint32_t>(v.size()));
  s += v;
}

class Reader {
 public:
  Reader(std::string bytes, std::string path)
      : bytes_(std::move(bytes)), path_(std::move(path)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(byte()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(byte()) << (8 * i);
    return v;
  }
  double f64() {
    const std::uint64_t u = u64();
    double d;
    std::memcpy(&d, &u, 8);
    return d;
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  unsigned char byte() { return static_cast<unsigned char>(bytes_[pos_++]); }
  void need(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw FormatError("truncated checkpoint: " + path_);
  }
  std::string bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

double Checkpoint::meta_value(const std::string& key) const {
  for (const auto& [k, v] : meta) {
    if (k == key) return v;
  }
  throw FormatError("checkpoint missing meta key: " + key);
}

const Tensor& Checkpoint::tensor(const std::string& name) const {
  for (const auto& [k, t] : tensors) {
    if (k == name) return t;
  }
  throw FormatError("checkpoint missing tensor: " + name);
}

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::string out;
  out += "MELO";
  put_u32(out, kCheckpointVersion);
  put_string(out, ckpt.kind);
  put_u32(out, static_cast<std::uint32_t>(ckpt.meta.size()));
  for (const auto& [k, v] : ckpt.meta) {
    put_string(out, k);
    put_f64(out, v);
  }
  put_u32(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    put_string(out, name);
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape) put_u64(out, d);
    for (double v : t.data) put_f64(out, v);
  }

  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path.string());
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!os) throw IoError("checkpoint write failed: " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 8 || bytes.compare(0, 4, "MELO") != 0) {
    throw FormatError("not a checkpoint (bad magic): " + path.string());
  }
  Reader r(bytes.substr(4), path.string());
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version) + ": " +
                      path.string());
  }
  Checkpoint ckpt;
  ckpt.kind = r.str();
  const std::uint32_t n_meta = r.u32();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string key = r.str();
    double value = r.f64();
    ckpt.meta.emplace_back(std::move(key), value);
  }
  const std::uint32_t n_tensors = r.u32();
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    std::string name = r.str();
    const std::uint32_t rank = r.u32();
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(r.u64());
    Tensor t = Tensor::zeros(shape);
    for (double& v : t.data) v = r.f64();
    ckpt.tensors.emplace_back(std::move(name), std::move(t));
  }
  if (!r.done()) throw FormatError("trailing bytes in checkpoint: " + path.string());
  return ckpt;
}

}  // namespace melex
