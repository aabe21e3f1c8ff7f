#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ppl {

/// Error thrown by graph construction and numeric checks.
struct tensor_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Dense row-major tensor of doubles. Rank 0 (scalar), 1 and 2 are used.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> values;

    Tensor() = default;
    Tensor(std::vector<std::size_t> s, std::vector<double> v)
        : shape(std::move(s)), values(std::move(v)) {
        if (values.size() != count(shape))
            throw tensor_error("tensor: value count " + std::to_string(values.size()) +
                               " does not match shape " + shape_str(shape));
    }

    static std::size_t count(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (auto d : s) n *= d;
        return n;
    }

    static std::string shape_str(const std::vector<std::size_t>& s) {
        std::ostringstream os;
        os << "[";
        for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
        os << "]";
        return os.str();
    }

    static Tensor zeros(std::vector<std::size_t> s) {
        auto n = count(s);
        return Tensor(std::move(s), std::vector<double>(n, 0.0));
    }

    static Tensor full(std::vector<std::size_t> s, double v) {
        auto n = count(s);
        return Tensor(std::move(s), std::vector<double>(n, v));
    }

    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    static Tensor row(std::vector<double> v) {
        auto n = v.size();
        return Tensor({1, n}, std::move(v));
    }

    std::size_t size() const { return values.size(); }

    // rank-1 tensors are treated as 1xN row vectors
    std::size_t rows() const {
        if (shape.size() < 2) return 1;
        return shape[0];
    }

    std::size_t cols() const {
        if (shape.empty()) return 1;
        if (shape.size() == 1) return shape[0];
        return shape[1];
    }

    bool is_scalar() const { return size() == 1; }

    double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }

    bool all_finite() const {
        for (double v : values)
            if (!std::isfinite(v)) return false;
        return true;
    }

    bool operator==(const Tensor& o) const {
        return shape == o.shape && values == o.values;
    }
};

}  // namespace ppl
