#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "ppl/tape.hpp"
#include "ppl/tensor.hpp"

using namespace ppl;

namespace {

// Central finite differences on the trainable leaves of a tape program.
// program builds the graph from the registered leaf vars and returns the
// scalar loss var.
using Program = std::function<Tape::Var(Tape&, const std::vector<Tape::Var>&)>;

void check_gradients(const std::vector<Tensor>& leaves, const Program& program,
                     double h = 1e-5, double rel_tol = 1e-4) {
    Tape tape;
    std::vector<Tape::Var> vars;
    for (const auto& t : leaves) vars.push_back(tape.input(t, true));
    const Tape::Var loss = program(tape, vars);
    tape.backward(loss);

    for (std::size_t k = 0; k < leaves.size(); ++k) {
        const Tensor& analytic = tape.grad(vars[k]);
        for (std::size_t i = 0; i < leaves[k].size(); ++i) {
            auto eval = [&](double delta) {
                std::vector<Tensor> shifted = leaves;
                shifted[k].values[i] += delta;
                Tape t2;
                std::vector<Tape::Var> v2;
                for (const auto& t : shifted) v2.push_back(t2.input(t, false));
                return t2.value(program(t2, v2)).values[0];
            };
            const double fd = (eval(h) - eval(-h)) / (2.0 * h);
            const double got = analytic.values[i];
            const double scale = std::max({std::abs(fd), std::abs(got), 1e-8});
            INFO("leaf " << k << " element " << i << ": analytic " << got << " vs fd " << fd);
            CHECK(std::abs(got - fd) / scale <= rel_tol);
        }
    }
}

Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng,
                     double lo = -2.0, double hi = 2.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.values) v = u(rng);
    return t;
}

// keep relu inputs away from the kink so finite differences are valid
Tensor random_tensor_away_from_zero(std::vector<std::size_t> shape, std::mt19937_64& rng) {
    Tensor t = random_tensor(std::move(shape), rng);
    for (double& v : t.values)
        if (std::abs(v) < 1e-2) v = v < 0.0 ? v - 1e-2 : v + 1e-2;
    return t;
}

}  // namespace

TEST_CASE("forward values of the primitives match hand arithmetic") {
    Tape tape;
    SECTION("matmul 1x2 * 2x1") {
        const auto a = tape.constant(Tensor({1, 2}, {1.0, 2.0}));
        const auto b = tape.constant(Tensor({2, 1}, {3.0, 4.0}));
        const auto c = tape.matmul(a, b);
        CHECK(tape.value(c).shape == std::vector<std::size_t>{1, 1});
        CHECK(tape.value(c).values[0] == 11.0);
    }
    SECTION("relu") {
        const auto x = tape.constant(Tensor({3}, {-1.0, 0.0, 2.0}));
        CHECK(tape.value(tape.relu(x)).values == std::vector<double>{0.0, 0.0, 2.0});
    }
    SECTION("softplus(0) = ln 2") {
        const auto x = tape.constant(Tensor::scalar(0.0));
        CHECK(tape.value(tape.softplus(x)).values[0] == Catch::Approx(std::log(2.0)).epsilon(1e-12));
    }
    SECTION("softplus is stable for large inputs") {
        const auto x = tape.constant(Tensor({2}, {1000.0, -1000.0}));
        const Tensor& y = tape.value(tape.softplus(x));
        CHECK(y.values[0] == 1000.0);
        CHECK(y.values[1] == 0.0);
        CHECK(y.all_finite());
    }
    SECTION("add broadcasts a [1,n] row") {
        const auto a = tape.constant(Tensor({2, 2}, {1.0, 2.0, 3.0, 4.0}));
        const auto b = tape.constant(Tensor({1, 2}, {10.0, 20.0}));
        CHECK(tape.value(tape.add(a, b)).values ==
              std::vector<double>{11.0, 22.0, 13.0, 24.0});
    }
    SECTION("mean is a scalar") {
        const auto a = tape.constant(Tensor({2, 2}, {1.0, 2.0, 3.0, 4.0}));
        const auto m = tape.mean(a);
        CHECK(tape.value(m).is_scalar());
        CHECK(tape.value(m).values[0] == 2.5);
    }
    SECTION("concat along columns") {
        const auto a = tape.constant(Tensor({2, 1}, {1.0, 2.0}));
        const auto b = tape.constant(Tensor({2, 2}, {3.0, 4.0, 5.0, 6.0}));
        const Tensor& c = tape.value(tape.concat(a, b));
        CHECK(c.shape == std::vector<std::size_t>{2, 3});
        CHECK(c.values == std::vector<double>{1.0, 3.0, 4.0, 2.0, 5.0, 6.0});
    }
    SECTION("col_scale multiplies each column by its factor") {
        const auto a = tape.constant(Tensor({2, 2}, {1.0, 2.0, 3.0, 4.0}));
        const Tensor& c = tape.value(tape.col_scale(a, Tensor({1, 2}, {10.0, 0.5})));
        CHECK(c.values == std::vector<double>{10.0, 1.0, 30.0, 2.0});
    }
}

TEST_CASE("hand-computable gradients") {
    SECTION("loss = mean(square(x)), x=[1,2] -> grad [1, 2]") {
        Tape tape;
        const auto x = tape.input(Tensor({2}, {1.0, 2.0}), true);
        tape.backward(tape.mean(tape.square(x)));
        CHECK(tape.grad(x).values[0] == Catch::Approx(1.0).margin(1e-14));
        CHECK(tape.grad(x).values[1] == Catch::Approx(2.0).margin(1e-14));
    }
    SECTION("loss = tanh(x), x=0 -> grad 1") {
        Tape tape;
        const auto x = tape.input(Tensor::scalar(0.0), true);
        tape.backward(tape.tanh(x));
        CHECK(tape.grad(x).values[0] == Catch::Approx(1.0).margin(1e-14));
    }
}

TEST_CASE("finite-difference checks for every primitive") {
    std::mt19937_64 rng(42);
    SECTION("matmul (both operands)") {
        check_gradients({random_tensor({3, 4}, rng), random_tensor({4, 2}, rng)},
                        [](Tape& t, const std::vector<Tape::Var>& v) {
                            return t.mean(t.matmul(v[0], v[1]));
                        });
    }
    SECTION("add, elementwise") {
        check_gradients({random_tensor({3, 2}, rng), random_tensor({3, 2}, rng)},
                        [](Tape& t, const std::vector<Tape::Var>& v) {
                            return t.mean(t.square(t.add(v[0], v[1])));
                        });
    }
    SECTION("add, row broadcast") {
        check_gradients({random_tensor({4, 3}, rng), random_tensor({1, 3}, rng)},
                        [](Tape& t, const std::vector<Tape::Var>& v) {
                            return t.mean(t.square(t.add(v[0], v[1])));
                        });
    }
    SECTION("relu") {
        check_gradients({random_tensor_away_from_zero({4, 3}, rng)},
                        [](Tape& t, const std::vector<Tape::Var>& v) {
                            return t.mean(t.relu(v[0]));
                        });
    }
    SECTION("tanh") {
        check_gradients({random_tensor({4, 3}, rng)},
                        [](Tape& t, const std::vector<Tape::Var>& v) {
                            return t.mean(t.tanh(v[0]));
                        });
    }
    SECTION("softplus") {
        check_gradients({random_tensor({4, 3}, rng)},
                        [](Tape& t, const std::vector<Tape::Var>& v) {
                            return t.mean(t.softplus(v[0]));
                        });
    }
    SECTION("square") {
        check_gradients({random_tensor({4, 3}, rng)},
                        [](Tape& t, const std::vector<Tape::Var>& v) {
                            return t.mean(t.square(v[0]));
                        });
    }
    SECTION("mean") {
        check_gradients({random_tensor({5, 2}, rng)},
                        [](Tape& t, const std::vector<Tape::Var>& v) {
                            return t.mean(v[0]);
                        });
    }
    SECTION("scalar_mul") {
        check_gradients({random_tensor({4, 3}, rng)},
                        [](Tape& t, const std::vector<Tape::Var>& v) {
                            return t.mean(t.scalar_mul(v[0], -2.5));
                        });
    }
    SECTION("col_scale") {
        check_gradients({random_tensor({4, 3}, rng)},
                        [](Tape& t, const std::vector<Tape::Var>& v) {
                            return t.mean(t.col_scale(v[0], Tensor({1, 3}, {2.0, -1.0, 0.5})));
                        });
    }
    SECTION("concat (both operands)") {
        check_gradients({random_tensor({3, 2}, rng), random_tensor({3, 3}, rng)},
                        [](Tape& t, const std::vector<Tape::Var>& v) {
                            return t.mean(t.square(t.concat(v[0], v[1])));
                        });
    }
}

TEST_CASE("finite-difference checks on random composite MLP programs") {
    std::mt19937_64 rng(7);
    // three random 2-hidden-layer MLPs with different heads, checked end to end
    for (int trial = 0; trial < 3; ++trial) {
        DYNAMIC_SECTION("composite program " << trial) {
            const std::size_t in = 3, h1 = 5, h2 = 4, out = 2;
            std::vector<Tensor> leaves = {
                random_tensor({in, h1}, rng, -0.7, 0.7),  random_tensor({1, h1}, rng, -0.3, 0.3),
                random_tensor({h1, h2}, rng, -0.7, 0.7),  random_tensor({1, h2}, rng, -0.3, 0.3),
                random_tensor({h2, out}, rng, -0.7, 0.7), random_tensor({1, out}, rng, -0.3, 0.3)};
            const Tensor input = random_tensor({6, in}, rng);
            const Tensor target = random_tensor({6, out}, rng);
            check_gradients(leaves, [&, trial](Tape& t, const std::vector<Tape::Var>& v) {
                Tape::Var h = t.constant(input);
                h = t.relu(t.add(t.matmul(h, v[0]), v[1]));
                h = t.relu(t.add(t.matmul(h, v[2]), v[3]));
                h = t.add(t.matmul(h, v[4]), v[5]);
                if (trial == 1) h = t.tanh(h);
                if (trial == 2) h = t.softplus(h);
                const Tape::Var diff = t.add(h, t.scalar_mul(t.constant(target), -1.0));
                return t.mean(t.square(diff));
            });
        }
    }
}

TEST_CASE("shape errors name the offending primitive") {
    Tape tape;
    const auto a = tape.constant(Tensor({2, 3}, std::vector<double>(6, 1.0)));
    const auto b = tape.constant(Tensor({2, 2}, std::vector<double>(4, 1.0)));
    CHECK_THROWS_WITH(tape.matmul(a, b), Catch::Matchers::StartsWith("matmul"));
    CHECK_THROWS_WITH(tape.add(a, b), Catch::Matchers::StartsWith("add"));
    const auto c = tape.constant(Tensor({3, 2}, std::vector<double>(6, 1.0)));
    CHECK_THROWS_WITH(tape.concat(a, c), Catch::Matchers::StartsWith("concat"));
    CHECK_THROWS_WITH(tape.col_scale(a, Tensor({1, 2}, {1.0, 1.0})),
                      Catch::Matchers::StartsWith("col_scale"));
}

TEST_CASE("backward requires a scalar loss") {
    Tape tape;
    const auto x = tape.input(Tensor({2}, {1.0, 2.0}), true);
    CHECK_THROWS_AS(tape.backward(tape.square(x)), tensor_error);
}

TEST_CASE("non-finite values abort the step with a diagnostic") {
    Tape tape;
    const double inf = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(tape.input(Tensor({1}, {inf})), tensor_error);
    // overflow produced mid-graph: square of 1e200 is Inf
    const auto big = tape.constant(Tensor({1}, {1e200}));
    CHECK_THROWS_AS(tape.square(big), tensor_error);
}

TEST_CASE("tensor shape/value consistency is enforced") {
    CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0}), tensor_error);
    CHECK(Tensor::zeros({3, 2}).size() == 6);
    CHECK(Tensor::row({1.0, 2.0}).rows() == 1);
    CHECK(Tensor::row({1.0, 2.0}).cols() == 2);
    CHECK(Tensor::scalar(5.0).is_scalar());
}
