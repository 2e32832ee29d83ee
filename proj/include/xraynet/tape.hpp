#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include "xraynet/errors.hpp"
#include "xraynet/tensor.hpp"

namespace xraynet {

enum class OpKind {
    Leaf,
    Add,
    Mul,
    Scale,
    Sum,
    Pick,
    Relu,
    Conv2dSame,
    MaxPool2x2,
    Upsample2x,
    ConcatChannels,
    GlobalAvgPool,
    Dense,
    SoftmaxCrossEntropy,
};

// Reverse-mode autodiff tape. Values are computed eagerly when an op is
// recorded, so the tape is always topologically ordered and every
// intermediate is cached for the backward sweep. One tape is confined to a
// single thread; distinct tapes may run concurrently.
template <typename T>
class Tape {
  public:
    using Tensor = TensorT<T>;

    struct Node {
        OpKind op = OpKind::Leaf;
        std::vector<int> parents;
        Tensor value;
        Tensor grad;
        // Op-specific payload.
        std::vector<std::size_t> argmax;  // MaxPool2x2: flat input index per output cell
        Tensor probs;                     // SoftmaxCrossEntropy
        std::size_t index = 0;            // Pick / SoftmaxCrossEntropy target
        T factor = T{0};                  // Scale
    };

    int leaf(Tensor value) { return push(OpKind::Leaf, {}, std::move(value)); }

    int add(int a, int b) {
        requireSameShape(a, b, "add");
        Tensor out = val(a);
        const Tensor& rhs = val(b);
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] += rhs[i];
        }
        return push(OpKind::Add, {a, b}, std::move(out));
    }

    int mul(int a, int b) {
        requireSameShape(a, b, "mul");
        Tensor out = val(a);
        const Tensor& rhs = val(b);
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] *= rhs[i];
        }
        return push(OpKind::Mul, {a, b}, std::move(out));
    }

    int scale(int a, T factor) {
        Tensor out = val(a);
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] *= factor;
        }
        int id = push(OpKind::Scale, {a}, std::move(out));
        nodes_[id].factor = factor;
        return id;
    }

    int sum(int a) {
        T acc = T{0};
        const Tensor& x = val(a);
        for (std::size_t i = 0; i < x.size(); ++i) {
            acc += x[i];
        }
        return push(OpKind::Sum, {a}, Tensor({1}, acc));
    }

    int pick(int a, std::size_t index) {
        const Tensor& x = val(a);
        if (index >= x.size()) {
            throw UsageError("pick index out of range");
        }
        int id = push(OpKind::Pick, {a}, Tensor({1}, x[index]));
        nodes_[id].index = index;
        return id;
    }

    int relu(int a) {
        Tensor out = val(a);
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] = out[i] > T{0} ? out[i] : T{0};
        }
        return push(OpKind::Relu, {a}, std::move(out));
    }

    // Zero-padded "same" 3x3 convolution. input [C,H,W], weight [C',C,3,3],
    // bias [C'] -> [C',H,W].
    int conv2dSame(int input, int weight, int bias) {
        const Tensor& x = val(input);
        const Tensor& w = val(weight);
        const Tensor& b = val(bias);
        if (x.rank() != 3 || w.rank() != 4 || w.dim(2) != 3 || w.dim(3) != 3) {
            throw ShapeError("conv2dSame expects input [C,H,W] and weight [C',C,3,3]");
        }
        const std::size_t inC = x.dim(0), h = x.dim(1), wd = x.dim(2);
        const std::size_t outC = w.dim(0);
        if (w.dim(1) != inC) {
            std::ostringstream msg;
            msg << "conv2dSame channel mismatch: input node " << input << " has " << inC
                << " channels, weight node " << weight << " expects " << w.dim(1);
            throw ShapeError(msg.str());
        }
        if (b.rank() != 1 || b.dim(0) != outC) {
            throw ShapeError("conv2dSame bias shape must be [outChannels]");
        }
        Tensor out({outC, h, wd});
        for (std::size_t co = 0; co < outC; ++co) {
            T* outPlane = out.data() + co * h * wd;
            const T bv = b[co];
            for (std::size_t i = 0; i < h * wd; ++i) {
                outPlane[i] = bv;
            }
            for (std::size_t ci = 0; ci < inC; ++ci) {
                const T* inPlane = x.data() + ci * h * wd;
                const T* kernel = w.data() + (co * inC + ci) * 9;
                for (int ky = 0; ky < 3; ++ky) {
                    for (int kx = 0; kx < 3; ++kx) {
                        const T wv = kernel[ky * 3 + kx];
                        if (wv == T{0}) {
                            continue;
                        }
                        accumulateShifted(outPlane, inPlane, h, wd, ky - 1, kx - 1, wv);
                    }
                }
            }
        }
        return push(OpKind::Conv2dSame, {input, weight, bias}, std::move(out));
    }

    // [C,H,W] -> [C,H/2,W/2]; H and W must be even. Ties break to the first
    // element of the window in row-major order.
    int maxPool2x2(int a) {
        const Tensor& x = val(a);
        if (x.rank() != 3) {
            throw ShapeError("maxPool2x2 expects input [C,H,W]");
        }
        const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
        if (h % 2 != 0 || w % 2 != 0) {
            std::ostringstream msg;
            msg << "maxPool2x2 requires even spatial dims, got " << x.shapeString();
            throw ShapeError(msg.str());
        }
        Tensor out({c, h / 2, w / 2});
        std::vector<std::size_t> argmax(out.size());
        std::size_t o = 0;
        for (std::size_t ci = 0; ci < c; ++ci) {
            const T* plane = x.data() + ci * h * w;
            for (std::size_t y = 0; y < h; y += 2) {
                for (std::size_t xw = 0; xw < w; xw += 2) {
                    std::size_t best = y * w + xw;
                    T bestVal = plane[best];
                    const std::size_t candidates[3] = {y * w + xw + 1, (y + 1) * w + xw,
                                                       (y + 1) * w + xw + 1};
                    for (std::size_t idx : candidates) {
                        if (plane[idx] > bestVal) {
                            bestVal = plane[idx];
                            best = idx;
                        }
                    }
                    out[o] = bestVal;
                    argmax[o] = ci * h * w + best;
                    ++o;
                }
            }
        }
        int id = push(OpKind::MaxPool2x2, {a}, std::move(out));
        nodes_[id].argmax = std::move(argmax);
        return id;
    }

    // Nearest-neighbor 2x duplication: [C,H,W] -> [C,2H,2W].
    int upsample2x(int a) {
        const Tensor& x = val(a);
        if (x.rank() != 3) {
            throw ShapeError("upsample2x expects input [C,H,W]");
        }
        const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
        Tensor out({c, 2 * h, 2 * w});
        for (std::size_t ci = 0; ci < c; ++ci) {
            const T* inPlane = x.data() + ci * h * w;
            T* outPlane = out.data() + ci * 4 * h * w;
            for (std::size_t y = 0; y < h; ++y) {
                for (std::size_t xw = 0; xw < w; ++xw) {
                    const T v = inPlane[y * w + xw];
                    T* top = outPlane + (2 * y) * 2 * w + 2 * xw;
                    top[0] = v;
                    top[1] = v;
                    top[2 * w] = v;
                    top[2 * w + 1] = v;
                }
            }
        }
        return push(OpKind::Upsample2x, {a}, std::move(out));
    }

    // [Ca,H,W] ++ [Cb,H,W] -> [Ca+Cb,H,W], a's channels first.
    int concatChannels(int a, int b) {
        const Tensor& ta = val(a);
        const Tensor& tb = val(b);
        if (ta.rank() != 3 || tb.rank() != 3) {
            throw ShapeError("concatChannels expects [C,H,W] inputs");
        }
        if (ta.dim(1) != tb.dim(1) || ta.dim(2) != tb.dim(2)) {
            std::ostringstream msg;
            msg << "concatChannels spatial mismatch: node " << a << " is " << ta.shapeString()
                << ", node " << b << " is " << tb.shapeString();
            throw ShapeError(msg.str());
        }
        Tensor out({ta.dim(0) + tb.dim(0), ta.dim(1), ta.dim(2)});
        std::copy(ta.data(), ta.data() + ta.size(), out.data());
        std::copy(tb.data(), tb.data() + tb.size(), out.data() + ta.size());
        return push(OpKind::ConcatChannels, {a, b}, std::move(out));
    }

    // Per-channel spatial mean: [C,H,W] -> [C].
    int globalAvgPool(int a) {
        const Tensor& x = val(a);
        if (x.rank() != 3) {
            throw ShapeError("globalAvgPool expects input [C,H,W]");
        }
        const std::size_t c = x.dim(0), area = x.dim(1) * x.dim(2);
        Tensor out({c});
        for (std::size_t ci = 0; ci < c; ++ci) {
            T acc = T{0};
            const T* plane = x.data() + ci * area;
            for (std::size_t i = 0; i < area; ++i) {
                acc += plane[i];
            }
            out[ci] = acc / static_cast<T>(area);
        }
        return push(OpKind::GlobalAvgPool, {a}, std::move(out));
    }

    // W [m,n] . x [n] + b [m] -> [m].
    int dense(int input, int weight, int bias) {
        const Tensor& x = val(input);
        const Tensor& w = val(weight);
        const Tensor& b = val(bias);
        if (x.rank() != 1 || w.rank() != 2 || b.rank() != 1) {
            throw ShapeError("dense expects x [n], W [m,n], b [m]");
        }
        const std::size_t m = w.dim(0), n = w.dim(1);
        if (x.dim(0) != n || b.dim(0) != m) {
            std::ostringstream msg;
            msg << "dense dimension mismatch: x node " << input << " " << x.shapeString()
                << " vs W node " << weight << " " << w.shapeString();
            throw ShapeError(msg.str());
        }
        Tensor out({m});
        for (std::size_t i = 0; i < m; ++i) {
            T acc = b[i];
            const T* row = w.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) {
                acc += row[j] * x[j];
            }
            out[i] = acc;
        }
        return push(OpKind::Dense, {input, weight, bias}, std::move(out));
    }

    // Max-stabilized softmax fused with -ln p[target]. Returns the scalar
    // loss node; probabilities are readable via probs(node).
    int softmaxCrossEntropy(int logits, std::size_t target) {
        const Tensor& z = val(logits);
        if (z.rank() != 1) {
            throw ShapeError("softmaxCrossEntropy expects logits [K]");
        }
        if (target >= z.dim(0)) {
            throw UsageError("softmaxCrossEntropy target class out of range");
        }
        Tensor p = softmax(z);
        const T loss = -std::log(p[target]);
        int id = push(OpKind::SoftmaxCrossEntropy, {logits}, Tensor({1}, loss));
        nodes_[id].probs = std::move(p);
        nodes_[id].index = target;
        return id;
    }

    static Tensor softmax(const Tensor& logits) {
        Tensor p = logits;
        T maxLogit = p[0];
        for (std::size_t i = 1; i < p.size(); ++i) {
            maxLogit = std::max(maxLogit, p[i]);
        }
        T denom = T{0};
        for (std::size_t i = 0; i < p.size(); ++i) {
            p[i] = std::exp(p[i] - maxLogit);
            denom += p[i];
        }
        for (std::size_t i = 0; i < p.size(); ++i) {
            p[i] /= denom;
        }
        return p;
    }

    std::size_t nodeCount() const { return nodes_.size(); }

    const Tensor& value(int id) const { return checked(id).value; }
    const Tensor& grad(int id) const { return checked(id).grad; }
    const Tensor& probs(int id) const { return checked(id).probs; }

    // Value of the designated output node; the eager recording above has
    // already run the forward pass.
    const Tensor& forward(int output) const {
        if (nodes_.empty()) {
            throw UsageError("forward on an empty tape");
        }
        return checked(output).value;
    }

    void backward(int output) {
        const Node& outNode = checked(output);
        if (outNode.value.size() != 1) {
            throw UsageError("backward requires a scalar output node, got shape " +
                             outNode.value.shapeString());
        }
        for (Node& n : nodes_) {
            n.grad = Tensor::zerosLike(n.value);
        }
        nodes_[static_cast<std::size_t>(output)].grad[0] = T{1};
        for (int id = output; id >= 0; --id) {
            backwardOne(nodes_[static_cast<std::size_t>(id)]);
        }
    }

  private:
    int push(OpKind op, std::vector<int> parents, Tensor value) {
        Node n;
        n.op = op;
        n.parents = std::move(parents);
        n.value = std::move(value);
        nodes_.push_back(std::move(n));
        return static_cast<int>(nodes_.size()) - 1;
    }

    const Node& checked(int id) const {
        if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
            throw UsageError("node id out of range");
        }
        return nodes_[static_cast<std::size_t>(id)];
    }

    const Tensor& val(int id) const { return checked(id).value; }

    void requireSameShape(int a, int b, const char* op) const {
        if (!val(a).sameShape(val(b))) {
            std::ostringstream msg;
            msg << op << " shape mismatch: node " << a << " " << val(a).shapeString()
                << " vs node " << b << " " << val(b).shapeString();
            throw ShapeError(msg.str());
        }
    }

    // out[y][x] += wv * in[y+dy][x+dx] over the in-range region.
    static void accumulateShifted(T* out, const T* in, std::size_t h, std::size_t w, int dy,
                                  int dx, T wv) {
        const std::size_t y0 = dy < 0 ? static_cast<std::size_t>(-dy) : 0;
        const std::size_t y1 = dy > 0 ? h - static_cast<std::size_t>(dy) : h;
        const std::size_t x0 = dx < 0 ? static_cast<std::size_t>(-dx) : 0;
        const std::size_t x1 = dx > 0 ? w - static_cast<std::size_t>(dx) : w;
        for (std::size_t y = y0; y < y1; ++y) {
            T* outRow = out + y * w;
            const T* inRow = in + (y + static_cast<std::size_t>(dy)) * w;
            for (std::size_t x = x0; x < x1; ++x) {
                outRow[x] += wv * inRow[x + static_cast<std::size_t>(dx)];
            }
        }
    }

    void backwardOne(Node& n) {
        switch (n.op) {
            case OpKind::Leaf:
                break;
            case OpKind::Add: {
                addInto(gradOf(n.parents[0]), n.grad);
                addInto(gradOf(n.parents[1]), n.grad);
                break;
            }
            case OpKind::Mul: {
                Tensor& ga = gradOf(n.parents[0]);
                Tensor& gb = gradOf(n.parents[1]);
                const Tensor& a = val(n.parents[0]);
                const Tensor& b = val(n.parents[1]);
                for (std::size_t i = 0; i < n.grad.size(); ++i) {
                    ga[i] += n.grad[i] * b[i];
                    gb[i] += n.grad[i] * a[i];
                }
                break;
            }
            case OpKind::Scale: {
                Tensor& g = gradOf(n.parents[0]);
                for (std::size_t i = 0; i < n.grad.size(); ++i) {
                    g[i] += n.grad[i] * n.factor;
                }
                break;
            }
            case OpKind::Sum: {
                Tensor& g = gradOf(n.parents[0]);
                const T gy = n.grad[0];
                for (std::size_t i = 0; i < g.size(); ++i) {
                    g[i] += gy;
                }
                break;
            }
            case OpKind::Pick: {
                gradOf(n.parents[0])[n.index] += n.grad[0];
                break;
            }
            case OpKind::Relu: {
                Tensor& g = gradOf(n.parents[0]);
                const Tensor& x = val(n.parents[0]);
                for (std::size_t i = 0; i < g.size(); ++i) {
                    if (x[i] > T{0}) {
                        g[i] += n.grad[i];
                    }
                }
                break;
            }
            case OpKind::Conv2dSame:
                backwardConv(n);
                break;
            case OpKind::MaxPool2x2: {
                Tensor& g = gradOf(n.parents[0]);
                for (std::size_t i = 0; i < n.grad.size(); ++i) {
                    g[n.argmax[i]] += n.grad[i];
                }
                break;
            }
            case OpKind::Upsample2x: {
                Tensor& g = gradOf(n.parents[0]);
                const std::size_t c = g.dim(0), h = g.dim(1), w = g.dim(2);
                for (std::size_t ci = 0; ci < c; ++ci) {
                    T* gPlane = g.data() + ci * h * w;
                    const T* gyPlane = n.grad.data() + ci * 4 * h * w;
                    for (std::size_t y = 0; y < h; ++y) {
                        for (std::size_t xw = 0; xw < w; ++xw) {
                            const T* top = gyPlane + (2 * y) * 2 * w + 2 * xw;
                            gPlane[y * w + xw] += top[0] + top[1] + top[2 * w] + top[2 * w + 1];
                        }
                    }
                }
                break;
            }
            case OpKind::ConcatChannels: {
                Tensor& ga = gradOf(n.parents[0]);
                Tensor& gb = gradOf(n.parents[1]);
                for (std::size_t i = 0; i < ga.size(); ++i) {
                    ga[i] += n.grad[i];
                }
                for (std::size_t i = 0; i < gb.size(); ++i) {
                    gb[i] += n.grad[ga.size() + i];
                }
                break;
            }
            case OpKind::GlobalAvgPool: {
                Tensor& g = gradOf(n.parents[0]);
                const std::size_t c = g.dim(0), area = g.dim(1) * g.dim(2);
                for (std::size_t ci = 0; ci < c; ++ci) {
                    const T gy = n.grad[ci] / static_cast<T>(area);
                    T* plane = g.data() + ci * area;
                    for (std::size_t i = 0; i < area; ++i) {
                        plane[i] += gy;
                    }
                }
                break;
            }
            case OpKind::Dense: {
                Tensor& gx = gradOf(n.parents[0]);
                Tensor& gw = gradOf(n.parents[1]);
                Tensor& gb = gradOf(n.parents[2]);
                const Tensor& x = val(n.parents[0]);
                const Tensor& w = val(n.parents[1]);
                const std::size_t m = w.dim(0), nn = w.dim(1);
                for (std::size_t i = 0; i < m; ++i) {
                    const T gy = n.grad[i];
                    gb[i] += gy;
                    const T* row = w.data() + i * nn;
                    T* gwRow = gw.data() + i * nn;
                    for (std::size_t j = 0; j < nn; ++j) {
                        gx[j] += gy * row[j];
                        gwRow[j] += gy * x[j];
                    }
                }
                break;
            }
            case OpKind::SoftmaxCrossEntropy: {
                Tensor& g = gradOf(n.parents[0]);
                const T gy = n.grad[0];
                for (std::size_t i = 0; i < g.size(); ++i) {
                    const T onehot = (i == n.index) ? T{1} : T{0};
                    g[i] += gy * (n.probs[i] - onehot);
                }
                break;
            }
        }
    }

    void backwardConv(Node& n) {
        Tensor& gx = gradOf(n.parents[0]);
        Tensor& gw = gradOf(n.parents[1]);
        Tensor& gb = gradOf(n.parents[2]);
        const Tensor& x = val(n.parents[0]);
        const Tensor& w = val(n.parents[1]);
        const std::size_t inC = x.dim(0), h = x.dim(1), wd = x.dim(2);
        const std::size_t outC = w.dim(0);
        for (std::size_t co = 0; co < outC; ++co) {
            const T* gyPlane = n.grad.data() + co * h * wd;
            T acc = T{0};
            for (std::size_t i = 0; i < h * wd; ++i) {
                acc += gyPlane[i];
            }
            gb[co] += acc;
            for (std::size_t ci = 0; ci < inC; ++ci) {
                const T* inPlane = x.data() + ci * h * wd;
                T* gxPlane = gx.data() + ci * h * wd;
                const T* kernel = w.data() + (co * inC + ci) * 9;
                T* gKernel = gw.data() + (co * inC + ci) * 9;
                for (int ky = 0; ky < 3; ++ky) {
                    for (int kx = 0; kx < 3; ++kx) {
                        const int dy = ky - 1, dx = kx - 1;
                        const std::size_t y0 = dy < 0 ? static_cast<std::size_t>(-dy) : 0;
                        const std::size_t y1 = dy > 0 ? h - static_cast<std::size_t>(dy) : h;
                        const std::size_t x0 = dx < 0 ? static_cast<std::size_t>(-dx) : 0;
                        const std::size_t x1 = dx > 0 ? wd - static_cast<std::size_t>(dx) : wd;
                        const T wv = kernel[ky * 3 + kx];
                        T wAcc = T{0};
                        for (std::size_t y = y0; y < y1; ++y) {
                            const T* gyRow = gyPlane + y * wd;
                            const std::size_t shift = (y + static_cast<std::size_t>(dy)) * wd +
                                                      static_cast<std::size_t>(dx);
                            for (std::size_t xp = x0; xp < x1; ++xp) {
                                wAcc += gyRow[xp] * inPlane[shift + xp];
                                gxPlane[shift + xp] += gyRow[xp] * wv;
                            }
                        }
                        gKernel[ky * 3 + kx] += wAcc;
                    }
                }
            }
        }
    }

    Tensor& gradOf(int id) { return nodes_[static_cast<std::size_t>(id)].grad; }

    static void addInto(Tensor& dst, const Tensor& src) {
        for (std::size_t i = 0; i < dst.size(); ++i) {
            dst[i] += src[i];
        }
    }

    std::vector<Node> nodes_;
};

}  // namespace xraynet
