#pragma once

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "ppl/tensor.hpp"

namespace ppl {

/// Reverse-mode computation tape over dense tensors.
///
/// Every operation appends a node holding the forward value and a backward
/// closure that scatters the node's gradient into its inputs. Gradients are
/// only materialized for nodes created with requires_grad (and everything
/// downstream of them). Any non-finite value produced by an op aborts the
/// step with a tensor_error naming the op.
class Tape {
public:
    using Var = std::size_t;

    /// Register an input tensor. requires_grad marks trainable leaves.
    Var input(Tensor t, bool requires_grad = false) {
        check_finite(t, "input");
        return push(std::move(t), requires_grad, {});
    }

    Var constant(Tensor t) { return input(std::move(t), false); }

    const Tensor& value(Var v) const { return nodes_[v].value; }
    const Tensor& grad(Var v) const { return nodes_[v].grad; }

    /// C = A * B for 2-d A [m,k] and B [k,n].
    Var matmul(Var a, Var b) {
        const Tensor& A = val(a);
        const Tensor& B = val(b);
        if (A.cols() != B.rows())
            fail("matmul", "inner dims disagree: " + Tensor::shape_str(A.shape) + " * " +
                               Tensor::shape_str(B.shape));
        const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
        Tensor C = Tensor::zeros({m, n});
        // ikj loop order keeps the inner loop contiguous in B and C
        for (std::size_t i = 0; i < m; ++i) {
            const double* arow = &A.values[i * k];
            double* crow = &C.values[i * n];
            for (std::size_t p = 0; p < k; ++p) {
                const double av = arow[p];
                const double* brow = &B.values[p * n];
                for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
        return push_op("matmul", std::move(C), {a, b}, [a, b, m, k, n](Tape& t, Var out) {
            const Tensor& g = t.nodes_[out].grad;
            const Tensor& A = t.val(a);
            const Tensor& B = t.val(b);
            if (t.nodes_[a].needs_grad) {
                Tensor& ga = t.nodes_[a].grad;  // dA = g * B^T
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        double s = 0.0;
                        const double* grow = &g.values[i * n];
                        const double* brow = &B.values[p * n];
                        for (std::size_t j = 0; j < n; ++j) s += grow[j] * brow[j];
                        ga.values[i * k + p] += s;
                    }
            }
            if (t.nodes_[b].needs_grad) {
                Tensor& gb = t.nodes_[b].grad;  // dB = A^T * g
                for (std::size_t i = 0; i < m; ++i) {
                    const double* arow = &A.values[i * k];
                    const double* grow = &g.values[i * n];
                    for (std::size_t p = 0; p < k; ++p) {
                        const double av = arow[p];
                        double* gbrow = &gb.values[p * n];
                        for (std::size_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
                    }
                }
            }
        });
    }

    /// Elementwise sum; also broadcasts a [1,n] row across the rows of [m,n].
    Var add(Var a, Var b) {
        const Tensor& A = val(a);
        const Tensor& B = val(b);
        const bool same = A.shape == B.shape || (A.size() == B.size() && A.cols() == B.cols());
        const bool bcast = !same && A.cols() == B.cols() && B.rows() == 1;
        if (!same && !bcast)
            fail("add", "incompatible shapes " + Tensor::shape_str(A.shape) + " + " +
                            Tensor::shape_str(B.shape));
        Tensor C = A;
        const std::size_t n = A.cols();
        for (std::size_t i = 0; i < A.rows(); ++i)
            for (std::size_t j = 0; j < n; ++j)
                C.values[i * n + j] += B.values[(same ? i : 0) * n + j];
        return push_op("add", std::move(C), {a, b}, [a, b, same](Tape& t, Var out) {
            const Tensor& g = t.nodes_[out].grad;
            if (t.nodes_[a].needs_grad) {
                Tensor& ga = t.nodes_[a].grad;
                for (std::size_t i = 0; i < g.size(); ++i) ga.values[i] += g.values[i];
            }
            if (t.nodes_[b].needs_grad) {
                Tensor& gb = t.nodes_[b].grad;
                const std::size_t n = g.cols();
                for (std::size_t i = 0; i < g.rows(); ++i)
                    for (std::size_t j = 0; j < n; ++j)
                        gb.values[(same ? i : 0) * n + j] += g.values[i * n + j];
            }
        });
    }

    Var relu(Var a) {
        Tensor C = val(a);
        for (double& v : C.values) v = v > 0.0 ? v : 0.0;
        return push_op("relu", std::move(C), {a}, [a](Tape& t, Var out) {
            if (!t.nodes_[a].needs_grad) return;
            const Tensor& g = t.nodes_[out].grad;
            const Tensor& x = t.val(a);
            Tensor& ga = t.nodes_[a].grad;
            for (std::size_t i = 0; i < g.size(); ++i)
                if (x.values[i] > 0.0) ga.values[i] += g.values[i];
        });
    }

    Var tanh(Var a) {
        Tensor C = val(a);
        for (double& v : C.values) v = std::tanh(v);
        return push_op("tanh", std::move(C), {a}, [a](Tape& t, Var out) {
            if (!t.nodes_[a].needs_grad) return;
            const Tensor& g = t.nodes_[out].grad;
            const Tensor& y = t.nodes_[out].value;
            Tensor& ga = t.nodes_[a].grad;
            for (std::size_t i = 0; i < g.size(); ++i)
                ga.values[i] += g.values[i] * (1.0 - y.values[i] * y.values[i]);
        });
    }

    /// softplus(x) = log(1 + e^x), computed stably for large |x|.
    Var softplus(Var a) {
        Tensor C = val(a);
        for (double& v : C.values) {
            if (v > 30.0) continue;  // softplus(x) ~ x
            v = v < -30.0 ? std::exp(v) : std::log1p(std::exp(v));
        }
        return push_op("softplus", std::move(C), {a}, [a](Tape& t, Var out) {
            if (!t.nodes_[a].needs_grad) return;
            const Tensor& g = t.nodes_[out].grad;
            const Tensor& x = t.val(a);
            Tensor& ga = t.nodes_[a].grad;
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double s = 1.0 / (1.0 + std::exp(-x.values[i]));
                ga.values[i] += g.values[i] * s;
            }
        });
    }

    Var square(Var a) {
        Tensor C = val(a);
        for (double& v : C.values) v = v * v;
        return push_op("square", std::move(C), {a}, [a](Tape& t, Var out) {
            if (!t.nodes_[a].needs_grad) return;
            const Tensor& g = t.nodes_[out].grad;
            const Tensor& x = t.val(a);
            Tensor& ga = t.nodes_[a].grad;
            for (std::size_t i = 0; i < g.size(); ++i)
                ga.values[i] += 2.0 * g.values[i] * x.values[i];
        });
    }

    /// Mean over all elements; yields a scalar [1].
    Var mean(Var a) {
        const Tensor& A = val(a);
        if (A.size() == 0) fail("mean", "empty tensor");
        double s = 0.0;
        for (double v : A.values) s += v;
        Tensor C = Tensor::scalar(s / static_cast<double>(A.size()));
        return push_op("mean", std::move(C), {a}, [a](Tape& t, Var out) {
            if (!t.nodes_[a].needs_grad) return;
            const double g = t.nodes_[out].grad.values[0] /
                             static_cast<double>(t.val(a).size());
            Tensor& ga = t.nodes_[a].grad;
            for (double& v : ga.values) v += g;
        });
    }

    Var scalar_mul(Var a, double c) {
        Tensor C = val(a);
        for (double& v : C.values) v *= c;
        return push_op("scalar_mul", std::move(C), {a}, [a, c](Tape& t, Var out) {
            if (!t.nodes_[a].needs_grad) return;
            const Tensor& g = t.nodes_[out].grad;
            Tensor& ga = t.nodes_[a].grad;
            for (std::size_t i = 0; i < g.size(); ++i) ga.values[i] += c * g.values[i];
        });
    }

    /// Elementwise multiply by a constant [1,n] row, broadcast across rows.
    Var col_scale(Var a, Tensor scale) {
        const Tensor& A = val(a);
        if (scale.size() != A.cols())
            fail("col_scale", "scale length " + std::to_string(scale.size()) +
                                  " vs cols " + std::to_string(A.cols()));
        Tensor C = A;
        const std::size_t n = A.cols();
        for (std::size_t i = 0; i < A.rows(); ++i)
            for (std::size_t j = 0; j < n; ++j) C.values[i * n + j] *= scale.values[j];
        auto sc = std::make_shared<Tensor>(std::move(scale));
        return push_op("col_scale", std::move(C), {a}, [a, sc](Tape& t, Var out) {
            if (!t.nodes_[a].needs_grad) return;
            const Tensor& g = t.nodes_[out].grad;
            Tensor& ga = t.nodes_[a].grad;
            const std::size_t n = g.cols();
            for (std::size_t i = 0; i < g.rows(); ++i)
                for (std::size_t j = 0; j < n; ++j)
                    ga.values[i * n + j] += g.values[i * n + j] * sc->values[j];
        });
    }

    /// Concatenate along columns: [m,p] ++ [m,q] -> [m,p+q].
    Var concat(Var a, Var b) {
        const Tensor& A = val(a);
        const Tensor& B = val(b);
        if (A.rows() != B.rows())
            fail("concat", "row counts disagree: " + Tensor::shape_str(A.shape) + " ++ " +
                               Tensor::shape_str(B.shape));
        const std::size_t m = A.rows(), p = A.cols(), q = B.cols();
        Tensor C = Tensor::zeros({m, p + q});
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < p; ++j) C.values[i * (p + q) + j] = A.values[i * p + j];
            for (std::size_t j = 0; j < q; ++j)
                C.values[i * (p + q) + p + j] = B.values[i * q + j];
        }
        return push_op("concat", std::move(C), {a, b}, [a, b, m, p, q](Tape& t, Var out) {
            const Tensor& g = t.nodes_[out].grad;
            if (t.nodes_[a].needs_grad) {
                Tensor& ga = t.nodes_[a].grad;
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < p; ++j)
                        ga.values[i * p + j] += g.values[i * (p + q) + j];
            }
            if (t.nodes_[b].needs_grad) {
                Tensor& gb = t.nodes_[b].grad;
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < q; ++j)
                        gb.values[i * q + j] += g.values[i * (p + q) + p + j];
            }
        });
    }

    /// Run reverse accumulation from a scalar loss.
    void backward(Var loss) {
        if (!nodes_[loss].value.is_scalar())
            throw tensor_error("backward: loss must be scalar, got shape " +
                               Tensor::shape_str(nodes_[loss].value.shape));
        for (auto& n : nodes_)
            if (n.needs_grad) n.grad = Tensor::zeros(n.value.shape);
        nodes_[loss].grad.values.assign(nodes_[loss].grad.size(), 0.0);
        nodes_[loss].grad.values[0] = 1.0;
        for (std::size_t i = nodes_.size(); i-- > 0;) {
            auto& n = nodes_[i];
            if (n.backward && n.needs_grad) n.backward(*this, i);
        }
    }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool needs_grad = false;
        std::function<void(Tape&, Var)> backward;
    };

    std::vector<Node> nodes_;

    const Tensor& val(Var v) const { return nodes_[v].value; }

    [[noreturn]] static void fail(const std::string& op, const std::string& what) {
        throw tensor_error(op + ": " + what);
    }

    static void check_finite(const Tensor& t, const std::string& op) {
        if (!t.all_finite())
            throw tensor_error(op + ": non-finite value produced; aborting step");
    }

    Var push(Tensor value, bool needs_grad, std::function<void(Tape&, Var)> bwd) {
        Node n;
        n.value = std::move(value);
        n.needs_grad = needs_grad;
        n.backward = std::move(bwd);
        if (n.needs_grad) n.grad = Tensor::zeros(n.value.shape);
        nodes_.push_back(std::move(n));
        return nodes_.size() - 1;
    }

    Var push_op(const char* op, Tensor value, std::initializer_list<Var> inputs,
                std::function<void(Tape&, Var)> bwd) {
        check_finite(value, op);
        bool needs = false;
        for (Var v : inputs) needs = needs || nodes_[v].needs_grad;
        return push(std::move(value), needs, needs ? std::move(bwd) : nullptr);
    }
};

}  // namespace ppl
