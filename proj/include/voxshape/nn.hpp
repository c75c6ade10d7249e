#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "voxshape/common.hpp"
#include "voxshape/grid.hpp"
#include "voxshape/parallel.hpp"
#include "voxshape/rng.hpp"

namespace voxshape::nn {

// Worker cap for layer-internal parallelism. Every output element is still
// produced by exactly one task with a fixed reduction order, so results are
// bit-identical for any thread count.
void set_compute_threads(int threads);
int compute_threads();

template <class T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> values;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        values.assign(std::size_t(size_of(shape)), T(0));
    }

    static std::int64_t size_of(const std::vector<int>& s) {
        std::int64_t n = 1;
        for (int e : s) n *= e;
        return n;
    }

    std::int64_t size() const { return std::int64_t(values.size()); }
    int dim(int i) const { return shape[std::size_t(i)]; }
    T* data() { return values.data(); }
    const T* data() const { return values.data(); }
    void fill(T v) { std::fill(values.begin(), values.end(), v); }

    template <class U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.shape = shape;
        out.values.resize(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) out.values[i] = U(values[i]);
        return out;
    }
};

// Fixed-width lane accumulation: keeps reductions vectorizable without
// reassociating a single serial chain, and keeps results reproducible.
template <class T>
T lane_dot(const T* a, const T* b, std::int64_t n) {
    T lanes[8] = {};
    std::int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        for (int l = 0; l < 8; ++l) lanes[l] += a[i + l] * b[i + l];
    }
    T acc = ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) +
            ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]));
    for (; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

template <class T>
T lane_sum(const T* a, std::int64_t n) {
    T lanes[8] = {};
    std::int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        for (int l = 0; l < 8; ++l) lanes[l] += a[i + l];
    }
    T acc = ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) +
            ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]));
    for (; i < n; ++i) acc += a[i];
    return acc;
}

// dst[i] += a*s[i] + b*s[i+1] + c*s[i+2]: one pass over a row applies all
// three kernel taps along the fastest axis.
template <class T>
void axpy3(T* dst, const T* s, T a, T b, T c, std::int64_t n) {
    for (std::int64_t i = 0; i < n; ++i) {
        dst[i] += a * s[i] + b * s[i + 1] + c * s[i + 2];
    }
}

// out[k] += sum_i g[i] * s[i + k] for k in 0..2.
template <class T>
void lane_dot3(const T* g, const T* s, std::int64_t n, T out[3]) {
    T l0[8] = {}, l1[8] = {}, l2[8] = {};
    std::int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        for (int l = 0; l < 8; ++l) {
            const T gv = g[i + l];
            l0[l] += gv * s[i + l];
            l1[l] += gv * s[i + l + 1];
            l2[l] += gv * s[i + l + 2];
        }
    }
    T a0 = ((l0[0] + l0[1]) + (l0[2] + l0[3])) + ((l0[4] + l0[5]) + (l0[6] + l0[7]));
    T a1 = ((l1[0] + l1[1]) + (l1[2] + l1[3])) + ((l1[4] + l1[5]) + (l1[6] + l1[7]));
    T a2 = ((l2[0] + l2[1]) + (l2[2] + l2[3])) + ((l2[4] + l2[5]) + (l2[6] + l2[7]));
    for (; i < n; ++i) {
        a0 += g[i] * s[i];
        a1 += g[i] * s[i + 1];
        a2 += g[i] * s[i + 2];
    }
    out[0] += a0;
    out[1] += a1;
    out[2] += a2;
}

template <class T>
struct Param {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
    bool trainable = true;  // false for running statistics

    void init(std::string n, std::vector<int> shape) {
        name = std::move(n);
        value = Tensor<T>(shape);
        grad = Tensor<T>(std::move(shape));
    }
    void zero_grad() { grad.fill(T(0)); }
};

// A differentiable layer. forward caches whatever backward needs; backward
// consumes the cache, accumulates parameter gradients (unless frozen) and
// returns the gradient w.r.t. the input.
template <class T>
class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor<T> forward(const Tensor<T>& in, bool train) = 0;
    virtual Tensor<T> backward(const Tensor<T>& grad_out) = 0;
    virtual std::vector<Param<T>*> params() { return {}; }
    virtual std::string kind() const = 0;
    void set_frozen(bool frozen) { frozen_ = frozen; }
    bool frozen() const { return frozen_; }

protected:
    bool frozen_ = false;
};

// ---------------------------------------------------------------------------
// conv3d: 3x3x3 kernel, stride 1, zero padding 1; spatial shape preserved.

template <class T>
class Conv3d final : public Layer<T> {
public:
    Conv3d(int c_in, int c_out, const std::string& name) : c_in_(c_in), c_out_(c_out) {
        weight_.init(name + ".weight", {c_out, c_in, 3, 3, 3});
        bias_.init(name + ".bias", {c_out});
    }

    Tensor<T> forward(const Tensor<T>& in, bool) override {
        check_input(in);
        const int n = in.dim(0), h = in.dim(2), w = in.dim(3), d = in.dim(4);
        cache_input(in);
        Tensor<T> out({n, c_out_, h, w, d});
        const std::int64_t pj = pd_;
        const std::int64_t pi = pj * pw_;
        const std::int64_t pc = pi * ph_;
        for (int b = 0; b < n; ++b) {
            parallel_for(c_out_, compute_threads(), [&, b](int co) {
            const T* pad = padded_.data() + std::int64_t(b) * c_in_ * pc;
            T* oc = out.data() + (std::int64_t(b) * c_out_ + co) * h * w * d;
            const T bv = bias_.value.values[co];
            for (std::int64_t i = 0; i < std::int64_t(h) * w * d; ++i) oc[i] = bv;
            for (int ci = 0; ci < c_in_; ++ci) {
                const T* pcin = pad + std::int64_t(ci) * pc;
                const T* wk = weight_.value.data() + ((std::int64_t(co) * c_in_ + ci) * 27);
                for (int kh = 0; kh < 3; ++kh)
                    for (int kw = 0; kw < 3; ++kw) {
                        const T* w3 = wk + (kh * 3 + kw) * 3;
                        for (int y = 0; y < h; ++y) {
                            const T* src = pcin + (y + kh) * pi + kw * pj;
                            T* dst = oc + std::int64_t(y) * w * d;
                            for (int x = 0; x < w; ++x) {
                                axpy3(dst + std::int64_t(x) * d, src + std::int64_t(x) * pj,
                                      w3[0], w3[1], w3[2], d);
                            }
                        }
                    }
            }
            });
        }
        return out;
    }

    Tensor<T> backward(const Tensor<T>& grad_out) override {
        const int n = in_shape_[0], h = in_shape_[2], w = in_shape_[3], d = in_shape_[4];
        const std::int64_t pj = pd_;
        const std::int64_t pi = pj * pw_;
        const std::int64_t pc = pi * ph_;
        const std::int64_t plane = std::int64_t(h) * w * d;

        // Padded copy of grad_out for the input gradient.
        std::vector<T> gpad(std::size_t(n) * c_out_ * pc, T(0));
        parallel_for(n * c_out_, compute_threads(), [&](int task) {
            const T* src = grad_out.data() + std::int64_t(task) * plane;
            T* dst = gpad.data() + std::int64_t(task) * pc;
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    std::copy(src + (std::int64_t(y) * w + x) * d,
                              src + (std::int64_t(y) * w + x) * d + d,
                              dst + (y + 1) * pi + (x + 1) * pj + 1);
                }
        });

        if (!this->frozen_) {
            // Each task owns one output channel's gradient slice and walks the
            // batch in order, so results do not depend on the thread count.
            for (int b = 0; b < n; ++b) {
                parallel_for(c_out_, compute_threads(), [&, b](int co) {
                    const T* pad = padded_.data() + std::int64_t(b) * c_in_ * pc;
                    const T* gc = grad_out.data() +
                                  (std::int64_t(b) * c_out_ + co) * plane;
                    bias_.grad.values[co] += lane_sum(gc, plane);
                    for (int ci = 0; ci < c_in_; ++ci) {
                        const T* pcin = pad + std::int64_t(ci) * pc;
                        T* wg = weight_grad_at(co, ci);
                        for (int kh = 0; kh < 3; ++kh)
                            for (int kw = 0; kw < 3; ++kw) {
                                T acc[3] = {};
                                for (int y = 0; y < h; ++y) {
                                    const T* src = pcin + (y + kh) * pi + kw * pj;
                                    const T* g = gc + std::int64_t(y) * w * d;
                                    for (int x = 0; x < w; ++x) {
                                        lane_dot3(g + std::int64_t(x) * d,
                                                  src + std::int64_t(x) * pj, d, acc);
                                    }
                                }
                                for (int kd = 0; kd < 3; ++kd) {
                                    wg[(kh * 3 + kw) * 3 + kd] += acc[kd];
                                }
                            }
                    }
                });
            }
        }

        Tensor<T> grad_in(in_shape_);
        for (int b = 0; b < n; ++b) {
            parallel_for(c_in_, compute_threads(), [&, b](int ci) {
                T* gic = grad_in.data() + (std::int64_t(b) * c_in_ + ci) * plane;
                for (int co = 0; co < c_out_; ++co) {
                    const T* gp = gpad.data() + (std::int64_t(b) * c_out_ + co) * pc;
                    const T* wk = weight_.value.data() + ((std::int64_t(co) * c_in_ + ci) * 27);
                    for (int kh = 0; kh < 3; ++kh)
                        for (int kw = 0; kw < 3; ++kw) {
                            const T* w3 = wk + (kh * 3 + kw) * 3;
                            // d in[y] collects grad_out[y + 1 - k] per axis.
                            for (int y = 0; y < h; ++y) {
                                const T* src = gp + (y + 2 - kh) * pi + (2 - kw) * pj;
                                T* dst = gic + std::int64_t(y) * w * d;
                                for (int x = 0; x < w; ++x) {
                                    axpy3(dst + std::int64_t(x) * d,
                                          src + std::int64_t(x) * pj, w3[2], w3[1], w3[0],
                                          d);
                                }
                            }
                        }
                }
            });
        }
        return grad_in;
    }

    std::vector<Param<T>*> params() override { return {&weight_, &bias_}; }
    std::string kind() const override { return "conv3d"; }

private:
    void check_input(const Tensor<T>& in) {
        if (in.shape.size() != 5 || in.dim(1) != c_in_) {
            throw DegenerateInputError("conv3d: bad input shape");
        }
    }

    void cache_input(const Tensor<T>& in) {
        const int n = in.dim(0), h = in.dim(2), w = in.dim(3), d = in.dim(4);
        in_shape_ = in.shape;
        ph_ = h + 2;
        pw_ = w + 2;
        pd_ = d + 2;
        const std::int64_t pc = std::int64_t(ph_) * pw_ * pd_;
        padded_.assign(std::size_t(n) * c_in_ * pc, T(0));
        parallel_for(n * c_in_, compute_threads(), [&](int task) {
            const T* src = in.data() + std::int64_t(task) * (std::int64_t(h) * w * d);
            T* dst = padded_.data() + std::int64_t(task) * pc;
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    std::copy(src + (std::int64_t(y) * w + x) * d,
                              src + (std::int64_t(y) * w + x) * d + d,
                              dst + std::int64_t(y + 1) * pw_ * pd_ +
                                  std::int64_t(x + 1) * pd_ + 1);
                }
        });
    }

    T* weight_grad_at(int co, int ci) {
        return weight_.grad.data() + ((std::int64_t(co) * c_in_ + ci) * 27);
    }

    int c_in_, c_out_;
    int ph_ = 0, pw_ = 0, pd_ = 0;
    Param<T> weight_, bias_;
    std::vector<T> padded_;
    std::vector<int> in_shape_;
};

// ---------------------------------------------------------------------------

template <class T>
class Relu final : public Layer<T> {
public:
    Tensor<T> forward(const Tensor<T>& in, bool) override {
        mask_.assign(in.values.size(), 0);
        Tensor<T> out = in;
        for (std::size_t i = 0; i < out.values.size(); ++i) {
            if (out.values[i] > T(0)) {
                mask_[i] = 1;
            } else {
                out.values[i] = T(0);
            }
        }
        return out;
    }
    Tensor<T> backward(const Tensor<T>& grad_out) override {
        Tensor<T> g = grad_out;
        for (std::size_t i = 0; i < g.values.size(); ++i) {
            if (!mask_[i]) g.values[i] = T(0);
        }
        return g;
    }
    std::string kind() const override { return "relu"; }

private:
    std::vector<std::uint8_t> mask_;
};

template <class T>
class Sigmoid final : public Layer<T> {
public:
    Tensor<T> forward(const Tensor<T>& in, bool) override {
        out_ = in;
        for (auto& v : out_.values) v = T(1) / (T(1) + std::exp(-v));
        return out_;
    }
    Tensor<T> backward(const Tensor<T>& grad_out) override {
        Tensor<T> g = grad_out;
        for (std::size_t i = 0; i < g.values.size(); ++i) {
            g.values[i] *= out_.values[i] * (T(1) - out_.values[i]);
        }
        return g;
    }
    std::string kind() const override { return "sigmoid"; }

private:
    Tensor<T> out_;
};

// ---------------------------------------------------------------------------
// Per-channel batch normalization over [N, C, H, W, D]; biased batch
// variance; running statistics updated with the configured momentum.

template <class T>
class BatchNorm final : public Layer<T> {
public:
    BatchNorm(int channels, const std::string& name, double momentum = 0.1,
              double eps = 1e-5)
        : c_(channels), momentum_(momentum), eps_(eps) {
        gamma_.init(name + ".gamma", {channels});
        beta_.init(name + ".beta", {channels});
        running_mean_.init(name + ".running_mean", {channels});
        running_var_.init(name + ".running_var", {channels});
        gamma_.value.fill(T(1));
        running_var_.value.fill(T(1));
        running_mean_.trainable = false;
        running_var_.trainable = false;
    }

    Tensor<T> forward(const Tensor<T>& in, bool train) override {
        if (in.shape.size() != 5 || in.dim(1) != c_) {
            throw DegenerateInputError("batchnorm: bad input shape");
        }
        const int n = in.dim(0);
        if (train && n < 2) {
            throw DegenerateInputError("batchnorm: train mode needs batch >= 2");
        }
        in_ = in;
        train_ = train;
        const std::int64_t plane = std::int64_t(in.dim(2)) * in.dim(3) * in.dim(4);
        const std::int64_t m = std::int64_t(n) * plane;
        mean_.assign(c_, T(0));
        var_.assign(c_, T(0));
        if (train) {
            for (int b = 0; b < n; ++b)
                for (int ch = 0; ch < c_; ++ch) {
                    const T* src = in.data() + (std::int64_t(b) * c_ + ch) * plane;
                    T s = T(0);
                    for (std::int64_t i = 0; i < plane; ++i) s += src[i];
                    mean_[ch] += s;
                }
            for (int ch = 0; ch < c_; ++ch) mean_[ch] /= T(m);
            for (int b = 0; b < n; ++b)
                for (int ch = 0; ch < c_; ++ch) {
                    const T* src = in.data() + (std::int64_t(b) * c_ + ch) * plane;
                    T s = T(0);
                    for (std::int64_t i = 0; i < plane; ++i) {
                        const T dv = src[i] - mean_[ch];
                        s += dv * dv;
                    }
                    var_[ch] += s;
                }
            for (int ch = 0; ch < c_; ++ch) var_[ch] /= T(m);
            if (!this->frozen_) {
                for (int ch = 0; ch < c_; ++ch) {
                    running_mean_.value.values[ch] =
                        T(1.0 - momentum_) * running_mean_.value.values[ch] +
                        T(momentum_) * mean_[ch];
                    running_var_.value.values[ch] =
                        T(1.0 - momentum_) * running_var_.value.values[ch] +
                        T(momentum_) * var_[ch];
                }
            }
        } else {
            for (int ch = 0; ch < c_; ++ch) {
                mean_[ch] = running_mean_.value.values[ch];
                var_[ch] = running_var_.value.values[ch];
            }
        }

        Tensor<T> out(in.shape);
        xhat_ = Tensor<T>(in.shape);
        for (int b = 0; b < n; ++b)
            for (int ch = 0; ch < c_; ++ch) {
                const T inv = T(1) / std::sqrt(var_[ch] + T(eps_));
                const T* src = in.data() + (std::int64_t(b) * c_ + ch) * plane;
                T* xh = xhat_.data() + (std::int64_t(b) * c_ + ch) * plane;
                T* dst = out.data() + (std::int64_t(b) * c_ + ch) * plane;
                const T g = gamma_.value.values[ch];
                const T bt = beta_.value.values[ch];
                for (std::int64_t i = 0; i < plane; ++i) {
                    xh[i] = (src[i] - mean_[ch]) * inv;
                    dst[i] = g * xh[i] + bt;
                }
            }
        return out;
    }

    Tensor<T> backward(const Tensor<T>& grad_out) override {
        const int n = in_.dim(0);
        const std::int64_t plane = std::int64_t(in_.dim(2)) * in_.dim(3) * in_.dim(4);
        const std::int64_t m = std::int64_t(n) * plane;
        Tensor<T> grad_in(in_.shape);

        for (int ch = 0; ch < c_; ++ch) {
            const T inv = T(1) / std::sqrt(var_[ch] + T(eps_));
            T sum_g = T(0), sum_gx = T(0);
            for (int b = 0; b < n; ++b) {
                const T* g = grad_out.data() + (std::int64_t(b) * c_ + ch) * plane;
                const T* xh = xhat_.data() + (std::int64_t(b) * c_ + ch) * plane;
                for (std::int64_t i = 0; i < plane; ++i) {
                    sum_g += g[i];
                    sum_gx += g[i] * xh[i];
                }
            }
            if (!this->frozen_) {
                gamma_.grad.values[ch] += sum_gx;
                beta_.grad.values[ch] += sum_g;
            }
            const T gm = gamma_.value.values[ch];
            for (int b = 0; b < n; ++b) {
                const T* g = grad_out.data() + (std::int64_t(b) * c_ + ch) * plane;
                const T* xh = xhat_.data() + (std::int64_t(b) * c_ + ch) * plane;
                T* gi = grad_in.data() + (std::int64_t(b) * c_ + ch) * plane;
                if (train_) {
                    for (std::int64_t i = 0; i < plane; ++i) {
                        gi[i] = gm * inv *
                                (g[i] - sum_g / T(m) - xh[i] * sum_gx / T(m));
                    }
                } else {
                    for (std::int64_t i = 0; i < plane; ++i) gi[i] = gm * inv * g[i];
                }
            }
        }
        return grad_in;
    }

    std::vector<Param<T>*> params() override {
        return {&gamma_, &beta_, &running_mean_, &running_var_};
    }
    std::string kind() const override { return "batchnorm"; }

private:
    int c_;
    double momentum_, eps_;
    bool train_ = true;
    Param<T> gamma_, beta_, running_mean_, running_var_;
    Tensor<T> in_, xhat_;
    std::vector<T> mean_, var_;
};

// ---------------------------------------------------------------------------

template <class T>
class MaxPool3d final : public Layer<T> {
public:
    explicit MaxPool3d(std::array<int, 3> window) : win_(window) {}

    Tensor<T> forward(const Tensor<T>& in, bool) override {
        const int n = in.dim(0), c = in.dim(1);
        const int h = in.dim(2), w = in.dim(3), d = in.dim(4);
        if (h % win_[0] || w % win_[1] || d % win_[2]) {
            throw DegenerateInputError("maxpool3d: extent not divisible by window");
        }
        in_shape_ = in.shape;
        const int oh = h / win_[0], ow = w / win_[1], od = d / win_[2];
        Tensor<T> out({n, c, oh, ow, od});
        argmax_.assign(out.values.size(), 0);
        std::int64_t o = 0;
        for (int b = 0; b < n; ++b)
            for (int ch = 0; ch < c; ++ch) {
                const T* src =
                    in.data() + (std::int64_t(b) * c + ch) * (std::int64_t(h) * w * d);
                for (int y = 0; y < oh; ++y)
                    for (int x = 0; x < ow; ++x)
                        for (int z = 0; z < od; ++z, ++o) {
                            T best = -std::numeric_limits<T>::infinity();
                            std::int64_t best_i = 0;
                            for (int ky = 0; ky < win_[0]; ++ky)
                                for (int kx = 0; kx < win_[1]; ++kx)
                                    for (int kz = 0; kz < win_[2]; ++kz) {
                                        const std::int64_t i =
                                            (std::int64_t(y * win_[0] + ky) * w +
                                             (x * win_[1] + kx)) *
                                                d +
                                            (z * win_[2] + kz);
                                        if (src[i] > best) {
                                            best = src[i];
                                            best_i = i;
                                        }
                                    }
                            out.values[o] = best;
                            argmax_[o] = (std::int64_t(b) * c + ch) *
                                             (std::int64_t(h) * w * d) +
                                         best_i;
                        }
            }
        return out;
    }

    Tensor<T> backward(const Tensor<T>& grad_out) override {
        Tensor<T> grad_in(in_shape_);
        for (std::size_t i = 0; i < grad_out.values.size(); ++i) {
            grad_in.values[std::size_t(argmax_[i])] += grad_out.values[i];
        }
        return grad_in;
    }
    std::string kind() const override { return "maxpool3d"; }

private:
    std::array<int, 3> win_;
    std::vector<int> in_shape_;
    std::vector<std::int64_t> argmax_;
};

template <class T>
class UpsampleNearest final : public Layer<T> {
public:
    explicit UpsampleNearest(std::array<int, 3> factor) : f_(factor) {}

    Tensor<T> forward(const Tensor<T>& in, bool) override {
        const int n = in.dim(0), c = in.dim(1);
        const int h = in.dim(2), w = in.dim(3), d = in.dim(4);
        in_shape_ = in.shape;
        Tensor<T> out({n, c, h * f_[0], w * f_[1], d * f_[2]});
        const int oh = h * f_[0], ow = w * f_[1], od = d * f_[2];
        for (int b = 0; b < n; ++b)
            for (int ch = 0; ch < c; ++ch) {
                const T* src =
                    in.data() + (std::int64_t(b) * c + ch) * (std::int64_t(h) * w * d);
                T* dst = out.data() +
                         (std::int64_t(b) * c + ch) * (std::int64_t(oh) * ow * od);
                for (int y = 0; y < oh; ++y)
                    for (int x = 0; x < ow; ++x)
                        for (int z = 0; z < od; ++z) {
                            dst[(std::int64_t(y) * ow + x) * od + z] =
                                src[(std::int64_t(y / f_[0]) * w + x / f_[1]) * d +
                                    z / f_[2]];
                        }
            }
        return out;
    }

    Tensor<T> backward(const Tensor<T>& grad_out) override {
        const int n = in_shape_[0], c = in_shape_[1];
        const int h = in_shape_[2], w = in_shape_[3], d = in_shape_[4];
        const int oh = h * f_[0], ow = w * f_[1], od = d * f_[2];
        Tensor<T> grad_in(in_shape_);
        for (int b = 0; b < n; ++b)
            for (int ch = 0; ch < c; ++ch) {
                const T* src = grad_out.data() +
                               (std::int64_t(b) * c + ch) * (std::int64_t(oh) * ow * od);
                T* dst = grad_in.data() +
                         (std::int64_t(b) * c + ch) * (std::int64_t(h) * w * d);
                for (int y = 0; y < oh; ++y)
                    for (int x = 0; x < ow; ++x)
                        for (int z = 0; z < od; ++z) {
                            dst[(std::int64_t(y / f_[0]) * w + x / f_[1]) * d + z / f_[2]] +=
                                src[(std::int64_t(y) * ow + x) * od + z];
                        }
            }
        return grad_in;
    }
    std::string kind() const override { return "upsample"; }

private:
    std::array<int, 3> f_;
    std::vector<int> in_shape_;
};

// ---------------------------------------------------------------------------

template <class T>
class Dense final : public Layer<T> {
public:
    Dense(int in, int out, const std::string& name) : in_(in), out_(out) {
        weight_.init(name + ".weight", {out, in});
        bias_.init(name + ".bias", {out});
    }

    Tensor<T> forward(const Tensor<T>& in, bool) override {
        if (in.shape.size() != 2 || in.dim(1) != in_) {
            throw DegenerateInputError("dense: bad input shape");
        }
        input_ = in;
        const int n = in.dim(0);
        Tensor<T> out({n, out_});
        for (int b = 0; b < n; ++b) {
            const T* x = in.data() + std::int64_t(b) * in_;
            T* y = out.data() + std::int64_t(b) * out_;
            for (int o = 0; o < out_; ++o) {
                const T* wr = weight_.value.data() + std::int64_t(o) * in_;
                T acc = bias_.value.values[o];
                for (int i = 0; i < in_; ++i) acc += wr[i] * x[i];
                y[o] = acc;
            }
        }
        return out;
    }

    Tensor<T> backward(const Tensor<T>& grad_out) override {
        const int n = input_.dim(0);
        Tensor<T> grad_in({n, in_});
        for (int b = 0; b < n; ++b) {
            const T* x = input_.data() + std::int64_t(b) * in_;
            const T* g = grad_out.data() + std::int64_t(b) * out_;
            T* gi = grad_in.data() + std::int64_t(b) * in_;
            for (int o = 0; o < out_; ++o) {
                const T gv = g[o];
                const T* wr = weight_.value.data() + std::int64_t(o) * in_;
                if (!this->frozen_) {
                    T* wg = weight_.grad.data() + std::int64_t(o) * in_;
                    for (int i = 0; i < in_; ++i) wg[i] += gv * x[i];
                    bias_.grad.values[o] += gv;
                }
                for (int i = 0; i < in_; ++i) gi[i] += gv * wr[i];
            }
        }
        return grad_in;
    }

    std::vector<Param<T>*> params() override { return {&weight_, &bias_}; }
    std::string kind() const override { return "dense"; }

private:
    int in_, out_;
    Param<T> weight_, bias_;
    Tensor<T> input_;
};

// Reshape between [N, C*H*W*D] and [N, C, H, W, D] (either direction).
template <class T>
class Reshape final : public Layer<T> {
public:
    explicit Reshape(std::vector<int> to_tail) : tail_(std::move(to_tail)) {}

    Tensor<T> forward(const Tensor<T>& in, bool) override {
        in_shape_ = in.shape;
        std::vector<int> shape = {in.dim(0)};
        shape.insert(shape.end(), tail_.begin(), tail_.end());
        if (Tensor<T>::size_of(shape) != in.size()) {
            throw DegenerateInputError("reshape: element count mismatch");
        }
        Tensor<T> out;
        out.shape = shape;
        out.values = in.values;
        return out;
    }

    Tensor<T> backward(const Tensor<T>& grad_out) override {
        Tensor<T> g;
        g.shape = in_shape_;
        g.values = grad_out.values;
        return g;
    }
    std::string kind() const override { return "reshape"; }

private:
    std::vector<int> tail_;
    std::vector<int> in_shape_;
};

// ---------------------------------------------------------------------------

template <class T>
class Sequential {
public:
    Layer<T>* add(std::unique_ptr<Layer<T>> layer) {
        layers_.push_back(std::move(layer));
        return layers_.back().get();
    }

    Tensor<T> forward(const Tensor<T>& in, bool train) {
        Tensor<T> x = in;
        for (auto& l : layers_) x = l->forward(x, train);
        return x;
    }

    Tensor<T> backward(const Tensor<T>& grad_out) {
        Tensor<T> g = grad_out;
        for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
            g = (*it)->backward(g);
        }
        return g;
    }

    std::vector<Param<T>*> params() {
        std::vector<Param<T>*> out;
        for (auto& l : layers_) {
            for (auto* p : l->params()) out.push_back(p);
        }
        return out;
    }

    void set_frozen(bool frozen) {
        for (auto& l : layers_) l->set_frozen(frozen);
    }

    std::size_t size() const { return layers_.size(); }
    Layer<T>* at(std::size_t i) { return layers_[i].get(); }

private:
    std::vector<std::unique_ptr<Layer<T>>> layers_;
};

// ---------------------------------------------------------------------------
// Architecture description shared by encoder and decoder builders and
// serialized into checkpoints.

struct ArchConfig {
    GridDims dims{16, 16, 16};
    int in_channels = 2;
    int latent = 10;
    std::vector<int> stage_channels = {8, 16, 24};
    double bn_momentum = 0.1;

    // Per-stage pooling windows, derived from dims: prefer halving, fall back
    // to 3, keep 1 where the extent does not divide.
    std::vector<std::array<int, 3>> stage_windows() const;
    std::array<int, 3> bottleneck_spatial() const;
    std::string serialize() const;
    static ArchConfig deserialize(const std::string& line);
};

// Encoder: conv stages then two dense heads of width `latent`.
template <class T>
class Encoder {
public:
    Sequential<T> trunk;
    std::unique_ptr<Dense<T>> head_mu;
    std::unique_ptr<Dense<T>> head_logvar;

    struct Output {
        Tensor<T> mu;       // [N, Q]
        Tensor<T> logvar;   // [N, Q]
    };

    Output forward(const Tensor<T>& in, bool train) {
        const Tensor<T> feat = trunk.forward(in, train);
        return {head_mu->forward(feat, train), head_logvar->forward(feat, train)};
    }

    Tensor<T> backward(const Tensor<T>& grad_mu, const Tensor<T>& grad_logvar) {
        Tensor<T> g = head_mu->backward(grad_mu);
        const Tensor<T> g2 = head_logvar->backward(grad_logvar);
        for (std::size_t i = 0; i < g.values.size(); ++i) g.values[i] += g2.values[i];
        return trunk.backward(g);
    }

    std::vector<Param<T>*> params() {
        auto out = trunk.params();
        for (auto* p : head_mu->params()) out.push_back(p);
        for (auto* p : head_logvar->params()) out.push_back(p);
        return out;
    }

    void set_frozen(bool frozen) {
        trunk.set_frozen(frozen);
        head_mu->set_frozen(frozen);
        head_logvar->set_frozen(frozen);
    }
};

// Decoder: dense from the latent code, mirrored conv stages, then an
// occupancy head (sigmoid) and an SDF head (linear).
template <class T>
class Decoder {
public:
    Sequential<T> trunk;
    Sequential<T> head_occ;
    Sequential<T> head_sdf;

    struct Output {
        Tensor<T> occ;  // [N, 1, H, W, D] probabilities
        Tensor<T> sdf;  // [N, 1, H, W, D] logTSDF means
    };

    Output forward(const Tensor<T>& z, bool train) {
        const Tensor<T> feat = trunk.forward(z, train);
        return {head_occ.forward(feat, train), head_sdf.forward(feat, train)};
    }

    Tensor<T> backward(const Tensor<T>& grad_occ, const Tensor<T>& grad_sdf) {
        Tensor<T> g = head_occ.backward(grad_occ);
        const Tensor<T> g2 = head_sdf.backward(grad_sdf);
        for (std::size_t i = 0; i < g.values.size(); ++i) g.values[i] += g2.values[i];
        return trunk.backward(g);
    }

    std::vector<Param<T>*> params() {
        auto out = trunk.params();
        for (auto* p : head_occ.params()) out.push_back(p);
        for (auto* p : head_sdf.params()) out.push_back(p);
        return out;
    }

    void set_frozen(bool frozen) {
        trunk.set_frozen(frozen);
        head_occ.set_frozen(frozen);
        head_sdf.set_frozen(frozen);
    }
};

template <class T>
Encoder<T> make_encoder(const ArchConfig& arch, const std::string& prefix = "enc");
template <class T>
Decoder<T> make_decoder(const ArchConfig& arch, const std::string& prefix = "dec");

// ---------------------------------------------------------------------------
// Adam with coupled L2 weight decay and a step-interval learning rate decay.

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;
    double lr_decay = 0.925;
    int lr_decay_interval = 215;
    double lr_floor = 1e-16;
};

template <class T>
class Adam {
public:
    explicit Adam(AdamConfig cfg) : cfg_(cfg), lr_(cfg.lr) {}

    void step(const std::vector<Param<T>*>& params) {
        if (moments_.empty()) {
            for (auto* p : params) {
                moments_.push_back({Tensor<T>(p->value.shape), Tensor<T>(p->value.shape)});
            }
        }
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
        for (std::size_t k = 0; k < params.size(); ++k) {
            Param<T>* p = params[k];
            if (!p->trainable) continue;
            auto& [m, v] = moments_[k];
            for (std::size_t i = 0; i < p->value.values.size(); ++i) {
                const T g = p->grad.values[i] + T(cfg_.weight_decay) * p->value.values[i];
                m.values[i] = T(cfg_.beta1) * m.values[i] + T(1.0 - cfg_.beta1) * g;
                v.values[i] = T(cfg_.beta2) * v.values[i] + T(1.0 - cfg_.beta2) * g * g;
                const double mh = double(m.values[i]) / bc1;
                const double vh = double(v.values[i]) / bc2;
                p->value.values[i] -= T(lr_ * mh / (std::sqrt(vh) + cfg_.eps));
            }
        }
        if (cfg_.lr_decay_interval > 0 && t_ % cfg_.lr_decay_interval == 0) {
            lr_ = std::max(lr_ * cfg_.lr_decay, cfg_.lr_floor);
        }
    }

    double lr() const { return lr_; }
    std::int64_t step_count() const { return t_; }
    void set_lr(double lr) { lr_ = lr; }
    void set_step_count(std::int64_t t) { t_ = t; }

private:
    AdamConfig cfg_;
    double lr_;
    std::int64_t t_ = 0;
    std::vector<std::pair<Tensor<T>, Tensor<T>>> moments_;
};

// ---------------------------------------------------------------------------

// Glorot-uniform weights (variance 2 / (fan_in + fan_out)), zero biases;
// batchnorm scale 1 / shift 0 are preserved.
template <class T>
void glorot_init(const std::vector<Param<T>*>& params, std::uint64_t seed);

template <class T>
void zero_grads(const std::vector<Param<T>*>& params) {
    for (auto* p : params) p->zero_grad();
}

// Central-difference check of analytic gradients. loss() must recompute the
// full forward pass; grads must already hold the analytic gradients for the
// same point. Returns the worst error |fd - g| / max(|fd|, |g|, 1).
template <class T>
double grad_check(const std::vector<Param<T>*>& params,
                  const std::function<double()>& loss, double eps);

// ---------------------------------------------------------------------------
// Checkpoint container: text header plus named little-endian fp32 blobs.

struct Checkpoint {
    std::map<std::string, std::string> meta;
    std::vector<std::pair<std::string, Tensor<float>>> tensors;

    const Tensor<float>* find(const std::string& name) const;
};

void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

// Copies between live parameters and checkpoint tensor lists.
template <class T>
void export_params(const std::vector<Param<T>*>& params, Checkpoint& ckpt);
template <class T>
void import_params(const Checkpoint& ckpt, const std::vector<Param<T>*>& params);

}  // namespace voxshape::nn
