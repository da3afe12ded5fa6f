#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hsd/neural.hpp"

namespace hsd::nn {

using IndexSequence = std::vector<std::int32_t>;

// Embedding lookup -> BiLSTM -> dense(dense1, activation) -> dense(1) -> sigmoid.
template <typename T>
struct NetworkParams {
    Tensor<T> embedding;  // V x d, row 0 (PAD) held at zero
    LstmParams<T> forward;
    LstmParams<T> backward;
    DenseParams<T> dense1;
    DenseParams<T> dense2;
    SequenceOutput output = SequenceOutput::FinalState;

    [[nodiscard]] std::size_t embed_dim() const { return embedding.cols(); }
    [[nodiscard]] std::size_t hidden() const { return forward.hidden(); }

    // Visits every tensor with a stable name, embedding first.
    template <typename F>
    void for_each(F&& f) {
        f("embedding", embedding);
        f("bilstm.forward.w_input", forward.w_input);
        f("bilstm.forward.w_recurrent", forward.w_recurrent);
        f("bilstm.forward.bias", forward.bias);
        f("bilstm.backward.w_input", backward.w_input);
        f("bilstm.backward.w_recurrent", backward.w_recurrent);
        f("bilstm.backward.bias", backward.bias);
        f("dense1.weights", dense1.weights);
        f("dense1.bias", dense1.bias);
        f("dense2.weights", dense2.weights);
        f("dense2.bias", dense2.bias);
    }
    template <typename F>
    void for_each(F&& f) const {
        const_cast<NetworkParams*>(this)->for_each([&](const char* name, Tensor<T>& t) { f(name, std::as_const(t)); });
    }

    // Same shapes and modes, every value zero.
    [[nodiscard]] NetworkParams zeros_like() const;

    // Throws ValidationError when tensor shapes disagree with each other.
    void check(std::size_t max_len) const;

    template <typename U>
    [[nodiscard]] NetworkParams<U> cast() const;

    bool operator==(const NetworkParams&) const = default;
};

struct NetworkShape {
    std::size_t vocab_size = 0;
    std::size_t embed_dim = 0;
    std::size_t hidden = 128;
    std::size_t dense1 = 64;
    std::size_t max_len = 50;
    Activation dense1_activation = Activation::Identity;
    SequenceOutput output = SequenceOutput::FinalState;
};

// LSTM and dense weights uniform in +-1/sqrt(fan), biases zero, embedding zero.
template <typename T>
NetworkParams<T> init_network(const NetworkShape& shape, std::uint64_t seed);

template <typename T>
struct ForwardCache {
    std::vector<IndexSequence> batch;
    Mat<T> inputs;  // (L*B) x d, position-major
    std::vector<LstmStepCache<T>> fwd;  // indexed by position
    std::vector<LstmStepCache<T>> bwd;  // indexed by position
    Mat<T> features;
    Mat<T> z1, a1;
    Mat<T> z2;
};

// Probabilities for a batch of equal-length index sequences.
template <typename T>
std::vector<T> network_forward(const NetworkParams<T>& params, std::span<const IndexSequence> batch,
                               ForwardCache<T>* cache = nullptr);

// Mean BCE over the batch; gradients are written (not accumulated) into grads,
// which must have the shapes of params. The embedding gradient is computed only
// when train_embedding is set; its PAD row is always zero.
template <typename T>
T network_loss_gradient(const NetworkParams<T>& params, std::span<const IndexSequence> batch,
                        std::span<const T> labels, NetworkParams<T>& grads, bool train_embedding);

}  // namespace hsd::nn
