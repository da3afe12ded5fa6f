#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "hsd/error.hpp"

namespace hsd::nn {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

// Dense row-major array with a shape. Rank 1 and 2 tensors expose Eigen views.
template <typename T>
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape, T fill = T(0))
        : shape_(std::move(shape)), data_(element_count(shape_), fill) {}
    Tensor(std::vector<std::size_t> shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != element_count(shape_)) throw ValidationError("tensor: value count does not match shape");
    }

    [[nodiscard]] const std::vector<std::size_t>& shape() const { return shape_; }
    [[nodiscard]] std::size_t size() const { return data_.size(); }
    [[nodiscard]] std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
    [[nodiscard]] std::size_t cols() const { return shape_.size() < 2 ? 1 : shape_[1]; }

    [[nodiscard]] std::span<T> values() { return data_; }
    [[nodiscard]] std::span<const T> values() const { return data_; }
    [[nodiscard]] std::vector<T>& storage() { return data_; }
    [[nodiscard]] const std::vector<T>& storage() const { return data_; }

    [[nodiscard]] Eigen::Map<Mat<T>> matrix() { return {data_.data(), Eigen::Index(rows()), Eigen::Index(cols())}; }
    [[nodiscard]] Eigen::Map<const Mat<T>> matrix() const {
        return {data_.data(), Eigen::Index(rows()), Eigen::Index(cols())};
    }
    [[nodiscard]] Eigen::Map<Vec<T>> vector() { return {data_.data(), Eigen::Index(data_.size())}; }
    [[nodiscard]] Eigen::Map<const Vec<T>> vector() const { return {data_.data(), Eigen::Index(data_.size())}; }

    void fill(T value) { std::fill(data_.begin(), data_.end(), value); }
    [[nodiscard]] bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](T x) { return std::isfinite(x); });
    }

    template <typename U>
    [[nodiscard]] Tensor<U> cast() const {
        return Tensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
    }

    bool operator==(const Tensor&) const = default;

    static std::size_t element_count(const std::vector<std::size_t>& shape) {
        return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
    }

private:
    std::vector<std::size_t> shape_;
    std::vector<T> data_;
};

// Numerically stable logistic function.
template <typename T>
T sigmoid(T x) {
    if (x >= 0) return T(1) / (T(1) + std::exp(-x));
    T e = std::exp(x);
    return e / (T(1) + e);
}

inline constexpr double kBceClamp = 1e-7;

// Mean binary cross-entropy with probabilities clamped to [1e-7, 1 - 1e-7].
template <typename T>
T bce(std::span<const T> p, std::span<const T> y);

enum class Activation { Identity, Relu, Sigmoid };
std::string to_string(Activation a);
Activation parse_activation(const std::string& name);

// Gate blocks are stacked in the order input, forget, candidate, output.
template <typename T>
struct LstmParams {
    Tensor<T> w_input;      // 4h x d
    Tensor<T> w_recurrent;  // 4h x h
    Tensor<T> bias;         // 4h

    LstmParams() = default;
    LstmParams(std::size_t input_dim, std::size_t hidden);

    [[nodiscard]] std::size_t hidden() const { return w_recurrent.cols(); }
    [[nodiscard]] std::size_t input_dim() const { return w_input.cols(); }
    void check() const;
    bool operator==(const LstmParams&) const = default;
};

template <typename T>
struct DenseParams {
    Tensor<T> weights;  // out x in
    Tensor<T> bias;     // out
    Activation activation = Activation::Identity;

    DenseParams() = default;
    DenseParams(std::size_t in, std::size_t out, Activation act);
    bool operator==(const DenseParams&) const = default;
};

// Saved activations of one LSTM step over a batch.
template <typename T>
struct LstmStepCache {
    Mat<T> gates;   // B x 4h, post-nonlinearity [i f g o]
    Mat<T> cell;    // B x h
    Mat<T> cell_tanh;
    Mat<T> hidden;
};

// One batched step. x_proj = x * W^T (B x 4h) is passed in pre-computed.
template <typename T>
void lstm_step_forward(const Mat<T>& x_proj, const Mat<T>& h_prev, const Mat<T>& c_prev, const LstmParams<T>& p,
                       LstmStepCache<T>& out);

// Backprop through one step. d_hidden and d_cell are the incoming gradients of
// h' and c'; on return d_cell holds the gradient for c_prev. Parameter
// gradients are accumulated into grads; d_gates (B x 4h) is the pre-activation
// gradient, from which callers derive dx = d_gates * W and dh_prev = d_gates * U.
template <typename T>
void lstm_step_backward(const LstmStepCache<T>& step, const Mat<T>& c_prev, const Mat<T>& x, const Mat<T>& h_prev,
                        const Mat<T>& d_hidden, Mat<T>& d_cell, LstmParams<T>& grads, Mat<T>& d_gates);

// Single-example cell update: returns (h', c').
template <typename T>
std::pair<std::vector<T>, std::vector<T>> lstm_cell_step(std::span<const T> x, std::span<const T> h,
                                                         std::span<const T> c, const LstmParams<T>& p);

enum class SequenceOutput {
    FinalState,  // [h_fwd(L) ; h_bwd(1)], length 2h
    Flatten,     // [h_fwd(t) ; h_bwd(t)] for t = 1..L, length 2hL
};
std::string to_string(SequenceOutput s);
SequenceOutput parse_sequence_output(const std::string& name);

// Forward and backward scans over an L x d sequence (rows are positions).
template <typename T>
std::vector<T> bilstm_forward(const Mat<T>& sequence, const LstmParams<T>& fwd, const LstmParams<T>& bwd,
                              SequenceOutput mode = SequenceOutput::FinalState);

// Batched activations and dense layer.
template <typename T>
Mat<T> activate(const Mat<T>& z, Activation a);
template <typename T>
Mat<T> activation_derivative(const Mat<T>& z, const Mat<T>& activated, Activation a);

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

template <typename T>
struct AdamState {
    AdamConfig config;
    std::vector<std::vector<T>> first_moment;
    std::vector<std::vector<T>> second_moment;
    std::int64_t step = 0;
};

// One bias-corrected Adam update over a list of parameter tensors. All
// gradients are checked for finiteness before anything is modified.
template <typename T>
void adam_step(const std::vector<std::span<T>>& params, const std::vector<std::span<const T>>& grads,
               AdamState<T>& state);

// Central differences, one coordinate at a time.
std::vector<double> finite_diff_grad(const std::function<double(std::span<const double>)>& f,
                                     std::vector<double> params, double step = 1e-5);

// |a - n| / max(|a|, |n|, floor), the largest over all coordinates.
double max_relative_error(std::span<const double> analytic, std::span<const double> numeric, double floor = 1e-6);

}  // namespace hsd::nn
