#include "tsccn/nn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "tsccn/error.hpp"

namespace tsccn::nn {

namespace {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMatrix = Eigen::Map<RowMatrix>;
using ConstMapMatrix = Eigen::Map<const RowMatrix>;

void require_rank(const Var& x, int rank, const char* op) {
    if (!x.defined() || x.value().rank() != rank)
        throw ShapeMismatch(std::string(op) + ": expected rank " + std::to_string(rank) + " input, got " +
                            (x.defined() ? shape_string(x.shape()) : "undefined"));
}

bool wants_grad(const Node& n, std::size_t i) { return n.inputs.size() > i && n.inputs[i]->requires_grad; }

struct ConvGeometry {
    int n, c, h, w, cout, k, stride, pad, ho, wo;
    int patch() const { return c * k * k; }
    int spatial_out() const { return ho * wo; }
    std::size_t cols() const { return static_cast<std::size_t>(n) * spatial_out(); }
};

void im2col(const float* x, const ConvGeometry& g, float* cols) {
    const std::size_t ncols = g.cols();
    const int hw_out = g.spatial_out();
    for (int b = 0; b < g.n; ++b) {
        for (int c = 0; c < g.c; ++c) {
            const float* plane = x + (static_cast<std::size_t>(b) * g.c + c) * g.h * g.w;
            for (int ki = 0; ki < g.k; ++ki) {
                for (int kj = 0; kj < g.k; ++kj) {
                    const std::size_t row = (static_cast<std::size_t>(c) * g.k + ki) * g.k + kj;
                    float* dst = cols + row * ncols + static_cast<std::size_t>(b) * hw_out;
                    for (int oh = 0; oh < g.ho; ++oh) {
                        const int ih = oh * g.stride - g.pad + ki;
                        float* drow = dst + oh * g.wo;
                        if (ih < 0 || ih >= g.h) {
                            std::fill(drow, drow + g.wo, 0.0f);
                            continue;
                        }
                        const float* srow = plane + static_cast<std::size_t>(ih) * g.w;
                        for (int ow = 0; ow < g.wo; ++ow) {
                            const int iw = ow * g.stride - g.pad + kj;
                            drow[ow] = (iw >= 0 && iw < g.w) ? srow[iw] : 0.0f;
                        }
                    }
                }
            }
        }
    }
}

void col2im(const float* cols, const ConvGeometry& g, float* dx) {
    const std::size_t ncols = g.cols();
    const int hw_out = g.spatial_out();
    for (int b = 0; b < g.n; ++b) {
        for (int c = 0; c < g.c; ++c) {
            float* plane = dx + (static_cast<std::size_t>(b) * g.c + c) * g.h * g.w;
            for (int ki = 0; ki < g.k; ++ki) {
                for (int kj = 0; kj < g.k; ++kj) {
                    const std::size_t row = (static_cast<std::size_t>(c) * g.k + ki) * g.k + kj;
                    const float* src = cols + row * ncols + static_cast<std::size_t>(b) * hw_out;
                    for (int oh = 0; oh < g.ho; ++oh) {
                        const int ih = oh * g.stride - g.pad + ki;
                        if (ih < 0 || ih >= g.h) continue;
                        float* drow = plane + static_cast<std::size_t>(ih) * g.w;
                        const float* srow = src + oh * g.wo;
                        for (int ow = 0; ow < g.wo; ++ow) {
                            const int iw = ow * g.stride - g.pad + kj;
                            if (iw >= 0 && iw < g.w) drow[iw] += srow[ow];
                        }
                    }
                }
            }
        }
    }
}

}  // namespace

Var conv2d(const Var& x, const Var& weight, Conv2dSpec spec) {
    require_rank(x, 4, "conv2d");
    require_rank(weight, 4, "conv2d weight");
    ConvGeometry g{};
    g.n = x.dim(0);
    g.c = x.dim(1);
    g.h = x.dim(2);
    g.w = x.dim(3);
    g.cout = weight.dim(0);
    g.k = weight.dim(2);
    g.stride = spec.stride;
    g.pad = spec.padding;
    if (weight.dim(1) != g.c || weight.dim(3) != g.k)
        throw ShapeMismatch("conv2d: weight " + shape_string(weight.shape()) + " incompatible with input " +
                            shape_string(x.shape()));
    if (g.stride < 1 || g.pad < 0) throw InvalidArgument("conv2d: invalid stride/padding");
    g.ho = (g.h + 2 * g.pad - g.k) / g.stride + 1;
    g.wo = (g.w + 2 * g.pad - g.k) / g.stride + 1;
    if (g.ho <= 0 || g.wo <= 0) throw ShapeMismatch("conv2d: kernel larger than padded input");

    auto cols = std::make_shared<std::vector<float>>(static_cast<std::size_t>(g.patch()) * g.cols());
    im2col(x.value().data(), g, cols->data());

    const std::size_t ncols = g.cols();
    RowMatrix out_mat = ConstMapMatrix(weight.value().data(), g.cout, g.patch()) *
                        ConstMapMatrix(cols->data(), g.patch(), static_cast<Eigen::Index>(ncols));

    Tensor out({g.n, g.cout, g.ho, g.wo});
    const int hw = g.spatial_out();
    for (int b = 0; b < g.n; ++b)
        for (int co = 0; co < g.cout; ++co)
            std::copy_n(out_mat.data() + static_cast<std::size_t>(co) * ncols + static_cast<std::size_t>(b) * hw,
                        hw, out.data() + (static_cast<std::size_t>(b) * g.cout + co) * hw);

    if (!grad_enabled()) return Var(std::move(out));

    return Var::from_op(std::move(out), {x, weight}, [g, cols](Node& self) {
        const std::size_t nc = g.cols();
        const int hw_out = g.spatial_out();
        RowMatrix dout(g.cout, static_cast<Eigen::Index>(nc));
        for (int b = 0; b < g.n; ++b)
            for (int co = 0; co < g.cout; ++co)
                std::copy_n(self.grad.data() + (static_cast<std::size_t>(b) * g.cout + co) * hw_out, hw_out,
                            dout.data() + static_cast<std::size_t>(co) * nc + static_cast<std::size_t>(b) * hw_out);
        ConstMapMatrix col_mat(cols->data(), g.patch(), static_cast<Eigen::Index>(nc));
        if (wants_grad(self, 1)) {
            Tensor dw(self.inputs[1]->value.shape());
            MapMatrix(dw.data(), g.cout, g.patch()).noalias() = dout * col_mat.transpose();
            self.inputs[1]->accumulate_grad(dw);
        }
        if (wants_grad(self, 0)) {
            ConstMapMatrix w_mat(self.inputs[1]->value.data(), g.cout, g.patch());
            RowMatrix dcols = w_mat.transpose() * dout;
            Tensor dx(self.inputs[0]->value.shape());
            col2im(dcols.data(), g, dx.data());
            self.inputs[0]->accumulate_grad(dx);
        }
    });
}

Var batch_norm2d(const Var& x, const Var& gamma, const Var& beta, BatchNormState& state, bool training) {
    require_rank(x, 4, "batch_norm2d");
    const int n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    if (gamma.value().size() != static_cast<std::size_t>(c) || beta.value().size() != static_cast<std::size_t>(c) ||
        state.running_mean.size() != static_cast<std::size_t>(c))
        throw ShapeMismatch("batch_norm2d: parameter size does not match channels " + std::to_string(c));
    const std::size_t m = static_cast<std::size_t>(n) * hw;
    const float* xv = x.value().data();

    std::vector<float> mean(c), invstd(c);
    if (training) {
        if (m < 2) throw InvalidArgument("batch_norm2d: training needs more than one value per channel");
        for (int ch = 0; ch < c; ++ch) {
            double s = 0.0, s2 = 0.0;
            for (int b = 0; b < n; ++b) {
                const float* p = xv + (static_cast<std::size_t>(b) * c + ch) * hw;
                for (int i = 0; i < hw; ++i) s += p[i];
            }
            const double mu = s / static_cast<double>(m);
            for (int b = 0; b < n; ++b) {
                const float* p = xv + (static_cast<std::size_t>(b) * c + ch) * hw;
                for (int i = 0; i < hw; ++i) {
                    const double d = p[i] - mu;
                    s2 += d * d;
                }
            }
            const double var = s2 / static_cast<double>(m);
            mean[ch] = static_cast<float>(mu);
            invstd[ch] = static_cast<float>(1.0 / std::sqrt(var + state.eps));
            const float mom = state.momentum;
            state.running_mean[ch] = (1.0f - mom) * state.running_mean[ch] + mom * static_cast<float>(mu);
            state.running_var[ch] = (1.0f - mom) * state.running_var[ch] +
                                    mom * static_cast<float>(var * static_cast<double>(m) / static_cast<double>(m - 1));
        }
    } else {
        for (int ch = 0; ch < c; ++ch) {
            mean[ch] = state.running_mean[ch];
            invstd[ch] = 1.0f / std::sqrt(state.running_var[ch] + state.eps);
        }
    }

    Tensor xhat(x.shape());
    Tensor out(x.shape());
    const float* g = gamma.value().data();
    const float* bt = beta.value().data();
    for (int b = 0; b < n; ++b) {
        for (int ch = 0; ch < c; ++ch) {
            const std::size_t off = (static_cast<std::size_t>(b) * c + ch) * hw;
            for (int i = 0; i < hw; ++i) {
                const float xh = (xv[off + i] - mean[ch]) * invstd[ch];
                xhat[off + i] = xh;
                out[off + i] = g[ch] * xh + bt[ch];
            }
        }
    }
    if (!grad_enabled()) return Var(std::move(out));

    return Var::from_op(std::move(out), {x, gamma, beta},
                        [xhat = std::move(xhat), invstd, training, n, c, hw](Node& self) {
                            const float* dy = self.grad.data();
                            const float* gm = self.inputs[1]->value.data();
                            const double m = static_cast<double>(n) * hw;
                            std::vector<double> sum_dy(c, 0.0), sum_dy_xh(c, 0.0);
                            for (int b = 0; b < n; ++b)
                                for (int ch = 0; ch < c; ++ch) {
                                    const std::size_t off = (static_cast<std::size_t>(b) * c + ch) * hw;
                                    for (int i = 0; i < hw; ++i) {
                                        sum_dy[ch] += dy[off + i];
                                        sum_dy_xh[ch] += static_cast<double>(dy[off + i]) * xhat[off + i];
                                    }
                                }
                            if (wants_grad(self, 1)) {
                                Tensor dg({c});
                                for (int ch = 0; ch < c; ++ch) dg[ch] = static_cast<float>(sum_dy_xh[ch]);
                                self.inputs[1]->accumulate_grad(dg);
                            }
                            if (wants_grad(self, 2)) {
                                Tensor db({c});
                                for (int ch = 0; ch < c; ++ch) db[ch] = static_cast<float>(sum_dy[ch]);
                                self.inputs[2]->accumulate_grad(db);
                            }
                            if (wants_grad(self, 0)) {
                                Tensor dx(self.value.shape());
                                for (int b = 0; b < n; ++b)
                                    for (int ch = 0; ch < c; ++ch) {
                                        const std::size_t off = (static_cast<std::size_t>(b) * c + ch) * hw;
                                        const float k = gm[ch] * invstd[ch];
                                        if (training) {
                                            const float mean_dy = static_cast<float>(sum_dy[ch] / m);
                                            const float mean_dy_xh = static_cast<float>(sum_dy_xh[ch] / m);
                                            for (int i = 0; i < hw; ++i)
                                                dx[off + i] = k * (dy[off + i] - mean_dy - xhat[off + i] * mean_dy_xh);
                                        } else {
                                            for (int i = 0; i < hw; ++i) dx[off + i] = k * dy[off + i];
                                        }
                                    }
                                self.inputs[0]->accumulate_grad(dx);
                            }
                        });
}

Var relu(const Var& x) {
    Tensor out(x.shape());
    const auto in = x.value().values();
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0.0f ? in[i] : 0.0f;
    return Var::from_op(std::move(out), {x}, [](Node& self) {
        Tensor dx(self.value.shape());
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = self.value[i] > 0.0f ? self.grad[i] : 0.0f;
        self.inputs[0]->accumulate_grad(dx);
    });
}

Var sigmoid(const Var& x) {
    Tensor out(x.shape());
    const auto in = x.value().values();
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = 1.0f / (1.0f + std::exp(-in[i]));
    return Var::from_op(std::move(out), {x}, [](Node& self) {
        Tensor dx(self.value.shape());
        for (std::size_t i = 0; i < dx.size(); ++i) {
            const float s = self.value[i];
            dx[i] = self.grad[i] * s * (1.0f - s);
        }
        self.inputs[0]->accumulate_grad(dx);
    });
}

Var bounded_sigmoid(const Var& x, float eps) {
    if (!(eps >= 0.0f && eps < 0.5f)) throw InvalidArgument("bounded_sigmoid: eps must lie in [0, 0.5)");
    const float span = 1.0f - 2.0f * eps;
    Tensor out(x.shape());
    const auto in = x.value().values();
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = eps + span / (1.0f + std::exp(-in[i]));
    return Var::from_op(std::move(out), {x}, [eps, span](Node& self) {
        Tensor dx(self.value.shape());
        for (std::size_t i = 0; i < dx.size(); ++i) {
            const float s = (self.value[i] - eps) / span;
            dx[i] = self.grad[i] * span * s * (1.0f - s);
        }
        self.inputs[0]->accumulate_grad(dx);
    });
}

Var add(const Var& a, const Var& b) {
    if (a.shape() != b.shape())
        throw ShapeMismatch("add: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    Tensor out = a.value();
    out.add_(b.value());
    return Var::from_op(std::move(out), {a, b}, [](Node& self) {
        for (std::size_t i = 0; i < 2; ++i)
            if (wants_grad(self, i)) self.inputs[i]->accumulate_grad(self.grad);
    });
}

Var scale(const Var& x, float factor) {
    Tensor out = x.value();
    for (float& v : out.values()) v *= factor;
    return Var::from_op(std::move(out), {x}, [factor](Node& self) {
        Tensor dx = self.grad;
        for (float& v : dx.values()) v *= factor;
        self.inputs[0]->accumulate_grad(dx);
    });
}

Var max_pool2d(const Var& x, int kernel, int stride, int padding) {
    require_rank(x, 4, "max_pool2d");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int ho = (h + 2 * padding - kernel) / stride + 1;
    const int wo = (w + 2 * padding - kernel) / stride + 1;
    if (ho <= 0 || wo <= 0) throw ShapeMismatch("max_pool2d: window larger than padded input");
    Tensor out({n, c, ho, wo});
    auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
    const float* xv = x.value().data();
    std::size_t o = 0;
    for (int b = 0; b < n; ++b)
        for (int ch = 0; ch < c; ++ch) {
            const std::size_t base = (static_cast<std::size_t>(b) * c + ch) * h * w;
            for (int oh = 0; oh < ho; ++oh)
                for (int ow = 0; ow < wo; ++ow, ++o) {
                    float best = -std::numeric_limits<float>::infinity();
                    std::size_t best_i = base;
                    for (int ki = 0; ki < kernel; ++ki) {
                        const int ih = oh * stride - padding + ki;
                        if (ih < 0 || ih >= h) continue;
                        for (int kj = 0; kj < kernel; ++kj) {
                            const int iw = ow * stride - padding + kj;
                            if (iw < 0 || iw >= w) continue;
                            const std::size_t idx = base + static_cast<std::size_t>(ih) * w + iw;
                            if (xv[idx] > best) {
                                best = xv[idx];
                                best_i = idx;
                            }
                        }
                    }
                    out[o] = best;
                    (*argmax)[o] = best_i;
                }
        }
    return Var::from_op(std::move(out), {x}, [argmax](Node& self) {
        Tensor dx(self.inputs[0]->value.shape());
        for (std::size_t i = 0; i < argmax->size(); ++i) dx[(*argmax)[i]] += self.grad[i];
        self.inputs[0]->accumulate_grad(dx);
    });
}

Var global_avg_pool(const Var& x) {
    require_rank(x, 4, "global_avg_pool");
    const int n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    Tensor out({n, c});
    const float* xv = x.value().data();
    for (int b = 0; b < n; ++b)
        for (int ch = 0; ch < c; ++ch) {
            const float* p = xv + (static_cast<std::size_t>(b) * c + ch) * hw;
            double s = 0.0;
            for (int i = 0; i < hw; ++i) s += p[i];
            out.at(b, ch) = static_cast<float>(s / hw);
        }
    return Var::from_op(std::move(out), {x}, [n, c, hw](Node& self) {
        Tensor dx(self.inputs[0]->value.shape());
        const float inv = 1.0f / static_cast<float>(hw);
        for (int b = 0; b < n; ++b)
            for (int ch = 0; ch < c; ++ch) {
                const float g = self.grad.at(b, ch) * inv;
                float* p = dx.data() + (static_cast<std::size_t>(b) * c + ch) * hw;
                std::fill(p, p + hw, g);
            }
        self.inputs[0]->accumulate_grad(dx);
    });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
    require_rank(x, 2, "linear");
    require_rank(weight, 2, "linear weight");
    const int n = x.dim(0), in = x.dim(1), out_dim = weight.dim(0);
    if (weight.dim(1) != in)
        throw ShapeMismatch("linear: weight " + shape_string(weight.shape()) + " incompatible with input " +
                            shape_string(x.shape()));
    const bool has_bias = bias.defined();
    if (has_bias && bias.value().size() != static_cast<std::size_t>(out_dim))
        throw ShapeMismatch("linear: bias size mismatch");
    Tensor out({n, out_dim});
    MapMatrix om(out.data(), n, out_dim);
    om.noalias() = ConstMapMatrix(x.value().data(), n, in) * ConstMapMatrix(weight.value().data(), out_dim, in).transpose();
    if (has_bias)
        for (int b = 0; b < n; ++b)
            for (int j = 0; j < out_dim; ++j) out.at(b, j) += bias.value()[j];

    std::vector<Var> inputs{x, weight};
    if (has_bias) inputs.push_back(bias);
    return Var::from_op(std::move(out), std::move(inputs), [n, in, out_dim](Node& self) {
        ConstMapMatrix dy(self.grad.data(), n, out_dim);
        if (wants_grad(self, 0)) {
            Tensor dx({n, in});
            MapMatrix(dx.data(), n, in).noalias() = dy * ConstMapMatrix(self.inputs[1]->value.data(), out_dim, in);
            self.inputs[0]->accumulate_grad(dx);
        }
        if (wants_grad(self, 1)) {
            Tensor dw({out_dim, in});
            MapMatrix(dw.data(), out_dim, in).noalias() =
                dy.transpose() * ConstMapMatrix(self.inputs[0]->value.data(), n, in);
            self.inputs[1]->accumulate_grad(dw);
        }
        if (wants_grad(self, 2)) {
            Tensor db({out_dim});
            for (int b = 0; b < n; ++b)
                for (int j = 0; j < out_dim; ++j) db[j] += self.grad.at(b, j);
            self.inputs[2]->accumulate_grad(db);
        }
    });
}

Var concat(const std::vector<Var>& parts) {
    if (parts.empty()) throw InvalidArgument("concat: no inputs");
    const Shape& first = parts.front().shape();
    if (first.size() != 2 && first.size() != 4) throw ShapeMismatch("concat: expects rank 2 or 4 inputs");
    const int n = first[0];
    std::size_t inner = 1;  // elements per unit of axis 1
    for (std::size_t d = 2; d < first.size(); ++d) inner *= static_cast<std::size_t>(first[d]);
    int total = 0;
    std::vector<int> widths;
    for (const auto& p : parts) {
        const Shape& s = p.shape();
        bool ok = s.size() == first.size() && s[0] == n;
        for (std::size_t d = 2; ok && d < s.size(); ++d) ok = s[d] == first[d];
        if (!ok) throw ShapeMismatch("concat: " + shape_string(s) + " incompatible with " + shape_string(first));
        widths.push_back(s[1]);
        total += s[1];
    }
    Shape out_shape = first;
    out_shape[1] = total;
    Tensor out(out_shape);
    const std::size_t out_row = static_cast<std::size_t>(total) * inner;
    std::size_t offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const std::size_t chunk = static_cast<std::size_t>(widths[k]) * inner;
        for (int b = 0; b < n; ++b)
            std::copy_n(parts[k].value().data() + b * chunk, chunk, out.data() + b * out_row + offset);
        offset += chunk;
    }
    return Var::from_op(std::move(out), parts, [widths, inner, n, out_row](Node& self) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < widths.size(); ++k) {
            const std::size_t chunk = static_cast<std::size_t>(widths[k]) * inner;
            if (wants_grad(self, k)) {
                Tensor d(self.inputs[k]->value.shape());
                for (int b = 0; b < n; ++b)
                    std::copy_n(self.grad.data() + b * out_row + off, chunk, d.data() + b * chunk);
                self.inputs[k]->accumulate_grad(d);
            }
            off += chunk;
        }
    });
}

Var column(const Var& x, int j) {
    require_rank(x, 2, "column");
    const int n = x.dim(0), k = x.dim(1);
    if (j < 0 || j >= k) throw InvalidArgument("column: index out of range");
    Tensor out({n, 1});
    for (int b = 0; b < n; ++b) out[b] = x.value().at(b, j);
    return Var::from_op(std::move(out), {x}, [n, k, j](Node& self) {
        Tensor dx({n, k});
        for (int b = 0; b < n; ++b) dx.at(b, j) = self.grad[b];
        self.inputs[0]->accumulate_grad(dx);
    });
}

Var divide(const Var& a, const Var& b) {
    if (a.shape() != b.shape())
        throw ShapeMismatch("divide: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    Tensor out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] / b.value()[i];
    return Var::from_op(std::move(out), {a, b}, [](Node& self) {
        const Tensor& av = self.inputs[0]->value;
        const Tensor& bv = self.inputs[1]->value;
        if (wants_grad(self, 0)) {
            Tensor da(av.shape());
            for (std::size_t i = 0; i < da.size(); ++i) da[i] = self.grad[i] / bv[i];
            self.inputs[0]->accumulate_grad(da);
        }
        if (wants_grad(self, 1)) {
            Tensor db(bv.shape());
            for (std::size_t i = 0; i < db.size(); ++i) db[i] = -self.grad[i] * av[i] / (bv[i] * bv[i]);
            self.inputs[1]->accumulate_grad(db);
        }
    });
}

Var scale_rows(const Var& x, const Var& s) {
    require_rank(x, 2, "scale_rows");
    const int n = x.dim(0), d = x.dim(1);
    if (s.shape() != Shape{n, 1}) throw ShapeMismatch("scale_rows: scale must be (N, 1)");
    Tensor out({n, d});
    for (int b = 0; b < n; ++b)
        for (int j = 0; j < d; ++j) out.at(b, j) = x.value().at(b, j) * s.value()[b];
    return Var::from_op(std::move(out), {x, s}, [n, d](Node& self) {
        const Tensor& xv = self.inputs[0]->value;
        const Tensor& sv = self.inputs[1]->value;
        if (wants_grad(self, 0)) {
            Tensor dx({n, d});
            for (int b = 0; b < n; ++b)
                for (int j = 0; j < d; ++j) dx.at(b, j) = self.grad.at(b, j) * sv[b];
            self.inputs[0]->accumulate_grad(dx);
        }
        if (wants_grad(self, 1)) {
            Tensor ds({n, 1});
            for (int b = 0; b < n; ++b) {
                double acc = 0.0;
                for (int j = 0; j < d; ++j) acc += static_cast<double>(self.grad.at(b, j)) * xv.at(b, j);
                ds[b] = static_cast<float>(acc);
            }
            self.inputs[1]->accumulate_grad(ds);
        }
    });
}

Var l2_normalize_rows(const Var& x, float eps) {
    require_rank(x, 2, "l2_normalize_rows");
    const int n = x.dim(0), d = x.dim(1);
    Tensor out({n, d});
    std::vector<float> norms(n);
    for (int b = 0; b < n; ++b) {
        double s = 0.0;
        for (int j = 0; j < d; ++j) s += static_cast<double>(x.value().at(b, j)) * x.value().at(b, j);
        norms[b] = std::max(static_cast<float>(std::sqrt(s)), eps);
        for (int j = 0; j < d; ++j) out.at(b, j) = x.value().at(b, j) / norms[b];
    }
    return Var::from_op(std::move(out), {x}, [n, d, norms](Node& self) {
        // d(x/|x|) = (g - y (y.g)) / |x|
        Tensor dx({n, d});
        for (int b = 0; b < n; ++b) {
            double dot = 0.0;
            for (int j = 0; j < d; ++j) dot += static_cast<double>(self.value.at(b, j)) * self.grad.at(b, j);
            for (int j = 0; j < d; ++j)
                dx.at(b, j) = (self.grad.at(b, j) - self.value.at(b, j) * static_cast<float>(dot)) / norms[b];
        }
        self.inputs[0]->accumulate_grad(dx);
    });
}

}  // namespace tsccn::nn
