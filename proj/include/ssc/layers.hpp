#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "ssc/core.hpp"
#include "ssc/tensor.hpp"

namespace ssc {

enum class Padding { kSame, kValid };

inline const char* padding_name(Padding p) { return p == Padding::kSame ? "same" : "valid"; }

/// Spatial bookkeeping of one convolution. "in" is the large side (the conv
/// input), "out" the strided side. same: out = ceil(in / stride) with the
/// overhang split pad_begin = floor(total / 2). valid: no padding, the kernel
/// must fit.
struct ConvGeom {
  std::ptrdiff_t in_h = 0, in_w = 0;
  std::ptrdiff_t out_h = 0, out_w = 0;
  std::ptrdiff_t kh = 0, kw = 0;
  std::ptrdiff_t stride = 1;
  std::ptrdiff_t pad_top = 0, pad_left = 0;
};

inline ConvGeom make_conv_geom(std::ptrdiff_t in_h, std::ptrdiff_t in_w, std::ptrdiff_t kh,
                               std::ptrdiff_t kw, std::ptrdiff_t stride, Padding padding) {
  require(in_h >= 1 && in_w >= 1, "conv: input size must be positive");
  require(kh >= 1 && kw >= 1, "conv: kernel size must be positive");
  require(stride >= 1, "conv: stride must be >= 1");
  ConvGeom g;
  g.in_h = in_h;
  g.in_w = in_w;
  g.kh = kh;
  g.kw = kw;
  g.stride = stride;
  if (padding == Padding::kSame) {
    g.out_h = (in_h + stride - 1) / stride;
    g.out_w = (in_w + stride - 1) / stride;
    const std::ptrdiff_t pad_h = std::max<std::ptrdiff_t>((g.out_h - 1) * stride + kh - in_h, 0);
    const std::ptrdiff_t pad_w = std::max<std::ptrdiff_t>((g.out_w - 1) * stride + kw - in_w, 0);
    g.pad_top = pad_h / 2;
    g.pad_left = pad_w / 2;
  } else {
    require(in_h >= kh && in_w >= kw, "conv: kernel larger than input with valid padding");
    g.out_h = (in_h - kh) / stride + 1;
    g.out_w = (in_w - kw) / stride + 1;
  }
  return g;
}

namespace detail {

/// y[n,co,oy,ox] = sum_{ci,ky,kx} x[n,ci,oy*s-pt+ky,ox*s-pl+kx] * w[co,ci,ky,kx]
inline void conv_fwd_core(const Tensor& x, const Tensor& w, const ConvGeom& g, Tensor& y) {
  const std::size_t n = x.dim(0), cin = x.dim(1), cout = w.dim(0);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t co = 0; co < cout; ++co)
      for (std::ptrdiff_t oy = 0; oy < g.out_h; ++oy)
        for (std::ptrdiff_t ox = 0; ox < g.out_w; ++ox) {
          double acc = 0.0;
          for (std::size_t ci = 0; ci < cin; ++ci)
            for (std::ptrdiff_t ky = 0; ky < g.kh; ++ky) {
              const std::ptrdiff_t iy = oy * g.stride - g.pad_top + ky;
              if (iy < 0 || iy >= g.in_h) continue;
              for (std::ptrdiff_t kx = 0; kx < g.kw; ++kx) {
                const std::ptrdiff_t ix = ox * g.stride - g.pad_left + kx;
                if (ix < 0 || ix >= g.in_w) continue;
                acc += x(b, ci, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)) *
                       w(co, ci, static_cast<std::size_t>(ky), static_cast<std::size_t>(kx));
              }
            }
          y(b, co, static_cast<std::size_t>(oy), static_cast<std::size_t>(ox)) += acc;
        }
}

/// Adjoint of conv_fwd_core in x: scatters g_out back through the kernel.
inline void conv_input_grad_core(const Tensor& g_out, const Tensor& w, const ConvGeom& g,
                                 Tensor& g_in) {
  const std::size_t n = g_out.dim(0), cout = w.dim(0), cin = w.dim(1);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t co = 0; co < cout; ++co)
      for (std::ptrdiff_t oy = 0; oy < g.out_h; ++oy)
        for (std::ptrdiff_t ox = 0; ox < g.out_w; ++ox) {
          const double go = g_out(b, co, static_cast<std::size_t>(oy), static_cast<std::size_t>(ox));
          if (go == 0.0) continue;
          for (std::size_t ci = 0; ci < cin; ++ci)
            for (std::ptrdiff_t ky = 0; ky < g.kh; ++ky) {
              const std::ptrdiff_t iy = oy * g.stride - g.pad_top + ky;
              if (iy < 0 || iy >= g.in_h) continue;
              for (std::ptrdiff_t kx = 0; kx < g.kw; ++kx) {
                const std::ptrdiff_t ix = ox * g.stride - g.pad_left + kx;
                if (ix < 0 || ix >= g.in_w) continue;
                g_in(b, ci, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)) +=
                    go * w(co, ci, static_cast<std::size_t>(ky), static_cast<std::size_t>(kx));
              }
            }
        }
}

/// Adjoint of conv_fwd_core in w.
inline void conv_weight_grad_core(const Tensor& x, const Tensor& g_out, const ConvGeom& g,
                                  Tensor& g_w) {
  const std::size_t n = x.dim(0), cin = x.dim(1), cout = g_out.dim(1);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t co = 0; co < cout; ++co)
      for (std::ptrdiff_t oy = 0; oy < g.out_h; ++oy)
        for (std::ptrdiff_t ox = 0; ox < g.out_w; ++ox) {
          const double go = g_out(b, co, static_cast<std::size_t>(oy), static_cast<std::size_t>(ox));
          if (go == 0.0) continue;
          for (std::size_t ci = 0; ci < cin; ++ci)
            for (std::ptrdiff_t ky = 0; ky < g.kh; ++ky) {
              const std::ptrdiff_t iy = oy * g.stride - g.pad_top + ky;
              if (iy < 0 || iy >= g.in_h) continue;
              for (std::ptrdiff_t kx = 0; kx < g.kw; ++kx) {
                const std::ptrdiff_t ix = ox * g.stride - g.pad_left + kx;
                if (ix < 0 || ix >= g.in_w) continue;
                g_w(co, ci, static_cast<std::size_t>(ky), static_cast<std::size_t>(kx)) +=
                    go * x(b, ci, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
              }
            }
        }
}

inline void init_uniform_fan_in(Tensor& t, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-bound, bound);
}

}  // namespace detail

/// Named view of one trainable parameter block and its gradient accumulator.
struct ParamView {
  std::string name;
  Tensor* value = nullptr;
  Tensor* grad = nullptr;
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x) = 0;
  // Consumes the gradient wrt the last forward output, accumulates parameter
  // gradients, and returns the gradient wrt the input.
  virtual Tensor backward(const Tensor& grad_out) = 0;
  virtual std::vector<ParamView> params() { return {}; }
  virtual std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const = 0;
  virtual std::string describe() const = 0;
};

class Conv2d final : public Layer {
 public:
  Conv2d(std::size_t in_c, std::size_t out_c, std::size_t kernel, std::size_t stride,
         Padding padding, Rng& rng)
      : in_c_(in_c), out_c_(out_c), kernel_(kernel), stride_(stride), padding_(padding),
        weight_({out_c, in_c, kernel, kernel}, 0.0),
        bias_({out_c}, 0.0),
        grad_w_({out_c, in_c, kernel, kernel}, 0.0),
        grad_b_({out_c}, 0.0) {
    const std::size_t fan_in = in_c * kernel * kernel;
    detail::init_uniform_fan_in(weight_, fan_in, rng);
    detail::init_uniform_fan_in(bias_, fan_in, rng);
  }

  Tensor forward(const Tensor& x) override {
    require(x.rank() == 4 && x.dim(1) == in_c_,
            cat("conv ", describe(), ": bad input ", Tensor::shape_string(x.shape())));
    geom_ = make_conv_geom(static_cast<std::ptrdiff_t>(x.dim(2)),
                           static_cast<std::ptrdiff_t>(x.dim(3)),
                           static_cast<std::ptrdiff_t>(kernel_),
                           static_cast<std::ptrdiff_t>(kernel_),
                           static_cast<std::ptrdiff_t>(stride_), padding_);
    input_ = x;
    Tensor y({x.dim(0), out_c_, static_cast<std::size_t>(geom_.out_h),
              static_cast<std::size_t>(geom_.out_w)}, 0.0);
    detail::conv_fwd_core(x, weight_, geom_, y);
    for (std::size_t b = 0; b < y.dim(0); ++b)
      for (std::size_t co = 0; co < out_c_; ++co)
        for (std::size_t oy = 0; oy < y.dim(2); ++oy)
          for (std::size_t ox = 0; ox < y.dim(3); ++ox) y(b, co, oy, ox) += bias_[co];
    return y;
  }

  Tensor backward(const Tensor& g_out) override {
    require(input_.rank() == 4, "conv backward before forward");
    detail::conv_weight_grad_core(input_, g_out, geom_, grad_w_);
    for (std::size_t b = 0; b < g_out.dim(0); ++b)
      for (std::size_t co = 0; co < out_c_; ++co)
        for (std::size_t oy = 0; oy < g_out.dim(2); ++oy)
          for (std::size_t ox = 0; ox < g_out.dim(3); ++ox) grad_b_[co] += g_out(b, co, oy, ox);
    Tensor g_in(input_.shape(), 0.0);
    detail::conv_input_grad_core(g_out, weight_, geom_, g_in);
    return g_in;
  }

  std::vector<ParamView> params() override {
    return {{"w", &weight_, &grad_w_}, {"b", &bias_, &grad_b_}};
  }

  std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override {
    require(in.size() == 4 && in[1] == in_c_, "conv: bad input shape");
    const ConvGeom g = make_conv_geom(static_cast<std::ptrdiff_t>(in[2]),
                                      static_cast<std::ptrdiff_t>(in[3]),
                                      static_cast<std::ptrdiff_t>(kernel_),
                                      static_cast<std::ptrdiff_t>(kernel_),
                                      static_cast<std::ptrdiff_t>(stride_), padding_);
    return {in[0], out_c_, static_cast<std::size_t>(g.out_h), static_cast<std::size_t>(g.out_w)};
  }

  std::string describe() const override {
    return cat("conv(", in_c_, "->", out_c_, ", k=", kernel_, ", s=", stride_, ", ",
               padding_name(padding_), ")");
  }

 private:
  std::size_t in_c_, out_c_, kernel_, stride_;
  Padding padding_;
  Tensor weight_, bias_, grad_w_, grad_b_;
  Tensor input_;
  ConvGeom geom_;
};

/// Transposed convolution with an explicit output size, realized as the
/// adjoint of the convolution that maps the requested output geometry back
/// to this layer's input geometry. The size must be consistent with the
/// kernel, stride, and padding, which holds by construction when mirroring
/// an encoder convolution.
class Deconv2d final : public Layer {
 public:
  Deconv2d(std::size_t in_c, std::size_t out_c, std::size_t kernel, std::size_t stride,
           Padding padding, std::size_t out_h, std::size_t out_w, Rng& rng)
      : in_c_(in_c), out_c_(out_c), kernel_(kernel), stride_(stride), padding_(padding),
        out_h_(out_h), out_w_(out_w),
        weight_({in_c, out_c, kernel, kernel}, 0.0),
        bias_({out_c}, 0.0),
        grad_w_({in_c, out_c, kernel, kernel}, 0.0),
        grad_b_({out_c}, 0.0) {
    geom_ = make_conv_geom(static_cast<std::ptrdiff_t>(out_h), static_cast<std::ptrdiff_t>(out_w),
                           static_cast<std::ptrdiff_t>(kernel), static_cast<std::ptrdiff_t>(kernel),
                           static_cast<std::ptrdiff_t>(stride), padding);
    const std::size_t fan_in = in_c * kernel * kernel;
    detail::init_uniform_fan_in(weight_, fan_in, rng);
    detail::init_uniform_fan_in(bias_, fan_in, rng);
  }

  Tensor forward(const Tensor& x) override {
    require(x.rank() == 4 && x.dim(1) == in_c_,
            cat("deconv ", describe(), ": bad input ", Tensor::shape_string(x.shape())));
    require(static_cast<std::ptrdiff_t>(x.dim(2)) == geom_.out_h &&
                static_cast<std::ptrdiff_t>(x.dim(3)) == geom_.out_w,
            cat("deconv ", describe(), ": input ", Tensor::shape_string(x.shape()),
                " inconsistent with configured output ", out_h_, "x", out_w_));
    input_ = x;
    Tensor y({x.dim(0), out_c_, out_h_, out_w_}, 0.0);
    detail::conv_input_grad_core(x, weight_, geom_, y);
    for (std::size_t b = 0; b < y.dim(0); ++b)
      for (std::size_t co = 0; co < out_c_; ++co)
        for (std::size_t oy = 0; oy < out_h_; ++oy)
          for (std::size_t ox = 0; ox < out_w_; ++ox) y(b, co, oy, ox) += bias_[co];
    return y;
  }

  Tensor backward(const Tensor& g_out) override {
    require(input_.rank() == 4, "deconv backward before forward");
    detail::conv_weight_grad_core(g_out, input_, geom_, grad_w_);
    for (std::size_t b = 0; b < g_out.dim(0); ++b)
      for (std::size_t co = 0; co < out_c_; ++co)
        for (std::size_t oy = 0; oy < out_h_; ++oy)
          for (std::size_t ox = 0; ox < out_w_; ++ox) grad_b_[co] += g_out(b, co, oy, ox);
    Tensor g_in(input_.shape(), 0.0);
    detail::conv_fwd_core(g_out, weight_, geom_, g_in);
    return g_in;
  }

  std::vector<ParamView> params() override {
    return {{"w", &weight_, &grad_w_}, {"b", &bias_, &grad_b_}};
  }

  std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override {
    require(in.size() == 4 && in[1] == in_c_, "deconv: bad input shape");
    require(static_cast<std::ptrdiff_t>(in[2]) == geom_.out_h &&
                static_cast<std::ptrdiff_t>(in[3]) == geom_.out_w,
            "deconv: input shape inconsistent with configured output size");
    return {in[0], out_c_, out_h_, out_w_};
  }

  std::string describe() const override {
    return cat("deconv(", in_c_, "->", out_c_, ", k=", kernel_, ", s=", stride_, ", ",
               padding_name(padding_), ", out=", out_h_, "x", out_w_, ")");
  }

 private:
  std::size_t in_c_, out_c_, kernel_, stride_;
  Padding padding_;
  std::size_t out_h_, out_w_;
  Tensor weight_, bias_, grad_w_, grad_b_;
  Tensor input_;
  ConvGeom geom_;
};

class Relu final : public Layer {
 public:
  Tensor forward(const Tensor& x) override {
    input_ = x;
    Tensor y = x;
    for (std::size_t i = 0; i < y.numel(); ++i)
      if (y[i] < 0.0) y[i] = 0.0;
    return y;
  }

  Tensor backward(const Tensor& g_out) override {
    require(g_out.same_shape(input_), "relu backward: shape mismatch");
    Tensor g = g_out;
    for (std::size_t i = 0; i < g.numel(); ++i)
      if (input_[i] <= 0.0) g[i] = 0.0;
    return g;
  }

  std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override {
    return in;
  }

  std::string describe() const override { return "relu"; }

 private:
  Tensor input_;
};

/// [N, ...] -> [N, prod(...)].
class Flatten final : public Layer {
 public:
  Tensor forward(const Tensor& x) override {
    require(x.rank() >= 2, "flatten: need a batch dimension plus content");
    in_shape_ = x.shape();
    return x.reshaped({x.dim(0), x.numel() / x.dim(0)});
  }

  Tensor backward(const Tensor& g_out) override {
    return g_out.reshaped(in_shape_);
  }

  std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override {
    require(in.size() >= 2, "flatten: need a batch dimension plus content");
    std::size_t prod = 1;
    for (std::size_t i = 1; i < in.size(); ++i) prod *= in[i];
    return {in[0], prod};
  }

  std::string describe() const override { return "flatten"; }

 private:
  std::vector<std::size_t> in_shape_;
};

/// [N, prod(target)] -> [N, target...].
class Reshape final : public Layer {
 public:
  explicit Reshape(std::vector<std::size_t> per_sample) : per_sample_(std::move(per_sample)) {
    require(!per_sample_.empty(), "reshape: empty target shape");
  }

  Tensor forward(const Tensor& x) override {
    std::vector<std::size_t> target = {x.dim(0)};
    target.insert(target.end(), per_sample_.begin(), per_sample_.end());
    in_shape_ = x.shape();
    return x.reshaped(target);
  }

  Tensor backward(const Tensor& g_out) override { return g_out.reshaped(in_shape_); }

  std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override {
    std::size_t prod = 1;
    for (std::size_t d : per_sample_) prod *= d;
    require(in.size() == 2 && in[1] == prod, "reshape: element count mismatch");
    std::vector<std::size_t> out = {in[0]};
    out.insert(out.end(), per_sample_.begin(), per_sample_.end());
    return out;
  }

  std::string describe() const override {
    return cat("reshape(", Tensor::shape_string(per_sample_), ")");
  }

 private:
  std::vector<std::size_t> per_sample_;
  std::vector<std::size_t> in_shape_;
};

/// Row-wise softmax over the feature dimension of [N, F].
class Softmax final : public Layer {
 public:
  Tensor forward(const Tensor& x) override {
    require(x.rank() == 2, "softmax: need [N, F] input");
    output_ = x;
    for (std::size_t n = 0; n < x.dim(0); ++n) {
      double mx = x(n, 0);
      for (std::size_t f = 1; f < x.dim(1); ++f) mx = std::max(mx, x(n, f));
      double sum = 0.0;
      for (std::size_t f = 0; f < x.dim(1); ++f) {
        output_(n, f) = std::exp(x(n, f) - mx);
        sum += output_(n, f);
      }
      for (std::size_t f = 0; f < x.dim(1); ++f) output_(n, f) /= sum;
    }
    return output_;
  }

  Tensor backward(const Tensor& g_out) override {
    require(g_out.same_shape(output_), "softmax backward: shape mismatch");
    Tensor g_in(output_.shape(), 0.0);
    for (std::size_t n = 0; n < output_.dim(0); ++n) {
      double dot = 0.0;
      for (std::size_t f = 0; f < output_.dim(1); ++f) dot += g_out(n, f) * output_(n, f);
      for (std::size_t f = 0; f < output_.dim(1); ++f)
        g_in(n, f) = output_(n, f) * (g_out(n, f) - dot);
    }
    return g_in;
  }

  std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override {
    require(in.size() == 2, "softmax: need [N, F] input");
    return in;
  }

  std::string describe() const override { return "softmax"; }

 private:
  Tensor output_;
};

/// Affine map per sample: [N, in] -> [N, out].
class Dense final : public Layer {
 public:
  Dense(std::size_t in_dim, std::size_t out_dim, Rng& rng)
      : in_dim_(in_dim), out_dim_(out_dim),
        weight_({out_dim, in_dim}, 0.0), bias_({out_dim}, 0.0),
        grad_w_({out_dim, in_dim}, 0.0), grad_b_({out_dim}, 0.0) {
    detail::init_uniform_fan_in(weight_, in_dim, rng);
    detail::init_uniform_fan_in(bias_, in_dim, rng);
  }

  Tensor forward(const Tensor& x) override {
    require(x.rank() == 2 && x.dim(1) == in_dim_,
            cat("dense ", describe(), ": bad input ", Tensor::shape_string(x.shape())));
    input_ = x;
    Tensor y({x.dim(0), out_dim_}, 0.0);
    for (std::size_t n = 0; n < x.dim(0); ++n)
      for (std::size_t o = 0; o < out_dim_; ++o) {
        double acc = bias_[o];
        for (std::size_t i = 0; i < in_dim_; ++i) acc += weight_(o, i) * x(n, i);
        y(n, o) = acc;
      }
    return y;
  }

  Tensor backward(const Tensor& g_out) override {
    require(input_.rank() == 2, "dense backward before forward");
    Tensor g_in(input_.shape(), 0.0);
    for (std::size_t n = 0; n < input_.dim(0); ++n)
      for (std::size_t o = 0; o < out_dim_; ++o) {
        const double go = g_out(n, o);
        if (go == 0.0) continue;
        grad_b_[o] += go;
        for (std::size_t i = 0; i < in_dim_; ++i) {
          grad_w_(o, i) += go * input_(n, i);
          g_in(n, i) += go * weight_(o, i);
        }
      }
    return g_in;
  }

  std::vector<ParamView> params() override {
    return {{"w", &weight_, &grad_w_}, {"b", &bias_, &grad_b_}};
  }

  std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override {
    require(in.size() == 2 && in[1] == in_dim_, "dense: bad input shape");
    return {in[0], out_dim_};
  }

  std::string describe() const override { return cat("dense(", in_dim_, "->", out_dim_, ")"); }

 private:
  std::size_t in_dim_, out_dim_;
  Tensor weight_, bias_, grad_w_, grad_b_;
  Tensor input_;
};

/// An ordered stack of layers sharing one forward/backward pass.
class Network {
 public:
  Network() = default;

  Network& add(std::unique_ptr<Layer> layer) {
    layers_.push_back(std::move(layer));
    return *this;
  }

  bool empty() const { return layers_.empty(); }
  std::size_t size() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_.at(i); }
  const Layer& layer(std::size_t i) const { return *layers_.at(i); }

  Tensor forward(const Tensor& x) {
    Tensor h = x;
    for (auto& l : layers_) h = l->forward(h);
    return h;
  }

  Tensor backward(const Tensor& grad_out) {
    Tensor g = grad_out;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
  }

  std::vector<ParamView> params() {
    std::vector<ParamView> all;
    for (std::size_t i = 0; i < layers_.size(); ++i)
      for (ParamView p : layers_[i]->params()) {
        p.name = cat("layer", i, ".", layers_[i]->describe(), ".", p.name);
        all.push_back(p);
      }
    return all;
  }

  void zero_grad() {
    for (auto& l : layers_)
      for (ParamView p : l->params()) p.grad->fill(0.0);
  }

  std::vector<std::size_t> output_shape(std::vector<std::size_t> shape) const {
    for (const auto& l : layers_) shape = l->output_shape(shape);
    return shape;
  }

  std::string describe() const {
    std::string s;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (i) s += " -> ";
      s += layers_[i]->describe();
    }
    return s.empty() ? "identity" : s;
  }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

}  // namespace ssc
