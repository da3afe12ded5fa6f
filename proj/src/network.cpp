#include "hsd/network.hpp"

#include <algorithm>

#include "hsd/rng.hpp"

namespace hsd::nn {

template <typename T>
NetworkParams<T> NetworkParams<T>::zeros_like() const {
    NetworkParams out = *this;
    out.for_each([](const char*, Tensor<T>& t) { t.fill(T(0)); });
    return out;
}

template <typename T>
void NetworkParams<T>::check(std::size_t max_len) const {
    forward.check();
    backward.check();
    const std::size_t d = embedding.cols(), h = forward.hidden();
    if (forward.input_dim() != d || backward.input_dim() != d || backward.hidden() != h) {
        throw ValidationError("network: BiLSTM shapes do not match the embedding dimension");
    }
    const std::size_t features = output == SequenceOutput::FinalState ? 2 * h : 2 * h * max_len;
    if (dense1.weights.cols() != features || dense1.bias.size() != dense1.weights.rows()) {
        throw ValidationError("network: dense1 expects " + std::to_string(dense1.weights.cols()) +
                              " inputs, BiLSTM yields " + std::to_string(features));
    }
    if (dense2.weights.rows() != 1 || dense2.weights.cols() != dense1.weights.rows() || dense2.bias.size() != 1) {
        throw ValidationError("network: dense2 must map dense1 output to a single unit");
    }
}

template <typename T>
template <typename U>
NetworkParams<U> NetworkParams<T>::cast() const {
    NetworkParams<U> out;
    out.embedding = embedding.template cast<U>();
    out.forward.w_input = forward.w_input.template cast<U>();
    out.forward.w_recurrent = forward.w_recurrent.template cast<U>();
    out.forward.bias = forward.bias.template cast<U>();
    out.backward.w_input = backward.w_input.template cast<U>();
    out.backward.w_recurrent = backward.w_recurrent.template cast<U>();
    out.backward.bias = backward.bias.template cast<U>();
    out.dense1.weights = dense1.weights.template cast<U>();
    out.dense1.bias = dense1.bias.template cast<U>();
    out.dense1.activation = dense1.activation;
    out.dense2.weights = dense2.weights.template cast<U>();
    out.dense2.bias = dense2.bias.template cast<U>();
    out.dense2.activation = dense2.activation;
    out.output = output;
    return out;
}

template <typename T>
NetworkParams<T> init_network(const NetworkShape& shape, std::uint64_t seed) {
    if (shape.vocab_size < 2 || shape.embed_dim < 1 || shape.hidden < 1 || shape.dense1 < 1 || shape.max_len < 1) {
        throw ValidationError("network: all sizes must be >= 1");
    }
    NetworkParams<T> p;
    p.embedding = Tensor<T>({shape.vocab_size, shape.embed_dim});
    p.forward = LstmParams<T>(shape.embed_dim, shape.hidden);
    p.backward = LstmParams<T>(shape.embed_dim, shape.hidden);
    p.output = shape.output;
    const std::size_t features = shape.output == SequenceOutput::FinalState ? 2 * shape.hidden
                                                                             : 2 * shape.hidden * shape.max_len;
    p.dense1 = DenseParams<T>(features, shape.dense1, shape.dense1_activation);
    p.dense2 = DenseParams<T>(shape.dense1, 1, Activation::Sigmoid);

    Rng rng(seed);
    auto uniform = [&](Tensor<T>& t, double bound) {
        for (auto& x : t.values()) x = static_cast<T>((2 * rng.uniform_real() - 1) * bound);
    };
    const double lstm_bound = 1.0 / std::sqrt(static_cast<double>(shape.hidden));
    uniform(p.forward.w_input, lstm_bound);
    uniform(p.forward.w_recurrent, lstm_bound);
    uniform(p.backward.w_input, lstm_bound);
    uniform(p.backward.w_recurrent, lstm_bound);
    uniform(p.dense1.weights, 1.0 / std::sqrt(static_cast<double>(features)));
    uniform(p.dense2.weights, 1.0 / std::sqrt(static_cast<double>(shape.dense1)));
    return p;
}

namespace {

template <typename T>
std::size_t batch_length(std::span<const IndexSequence> batch) {
    if (batch.empty()) throw ValidationError("network: empty batch");
    const std::size_t len = batch.front().size();
    if (len == 0) throw ValidationError("network: empty sequence");
    for (const auto& s : batch) {
        if (s.size() != len) throw ValidationError("network: sequences in a batch must share one length");
    }
    return len;
}

}  // namespace

template <typename T>
std::vector<T> network_forward(const NetworkParams<T>& params, std::span<const IndexSequence> batch,
                               ForwardCache<T>* cache) {
    const std::size_t len = batch_length<T>(batch);
    params.check(len);
    const auto B = static_cast<Eigen::Index>(batch.size());
    const auto L = static_cast<Eigen::Index>(len);
    const auto d = static_cast<Eigen::Index>(params.embed_dim());
    const auto h = static_cast<Eigen::Index>(params.hidden());
    const auto vocab = static_cast<std::int32_t>(params.embedding.rows());

    ForwardCache<T> local;
    ForwardCache<T>& c = cache ? *cache : local;
    c.batch.assign(batch.begin(), batch.end());

    // Row t*B + b holds the embedding of token t of example b.
    const auto emb = params.embedding.matrix();
    c.inputs.resize(L * B, d);
    for (Eigen::Index t = 0; t < L; ++t) {
        for (Eigen::Index b = 0; b < B; ++b) {
            std::int32_t idx = batch[static_cast<std::size_t>(b)][static_cast<std::size_t>(t)];
            if (idx < 0 || idx >= vocab) throw ValidationError("network: token index out of range");
            c.inputs.row(t * B + b) = emb.row(idx);
        }
    }

    auto scan = [&](const LstmParams<T>& p, bool reverse, std::vector<LstmStepCache<T>>& steps) {
        const Mat<T> proj = c.inputs * p.w_input.matrix().transpose();
        steps.assign(len, {});
        Mat<T> zero = Mat<T>::Zero(B, h);
        const Mat<T>* hp = &zero;
        const Mat<T>* cp = &zero;
        for (Eigen::Index s = 0; s < L; ++s) {
            const Eigen::Index t = reverse ? L - 1 - s : s;
            auto& step = steps[static_cast<std::size_t>(t)];
            lstm_step_forward<T>(proj.middleRows(t * B, B), *hp, *cp, p, step);
            hp = &step.hidden;
            cp = &step.cell;
        }
    };
    scan(params.forward, false, c.fwd);
    scan(params.backward, true, c.bwd);

    if (params.output == SequenceOutput::FinalState) {
        c.features.resize(B, 2 * h);
        c.features.leftCols(h) = c.fwd.back().hidden;
        c.features.rightCols(h) = c.bwd.front().hidden;
    } else {
        c.features.resize(B, 2 * h * L);
        for (Eigen::Index t = 0; t < L; ++t) {
            c.features.middleCols(2 * h * t, h) = c.fwd[static_cast<std::size_t>(t)].hidden;
            c.features.middleCols(2 * h * t + h, h) = c.bwd[static_cast<std::size_t>(t)].hidden;
        }
    }

    c.z1 = c.features * params.dense1.weights.matrix().transpose();
    c.z1.rowwise() += params.dense1.bias.vector().transpose();
    c.a1 = activate(c.z1, params.dense1.activation);
    c.z2 = c.a1 * params.dense2.weights.matrix().transpose();
    c.z2.rowwise() += params.dense2.bias.vector().transpose();

    std::vector<T> probs(static_cast<std::size_t>(B));
    for (Eigen::Index b = 0; b < B; ++b) probs[static_cast<std::size_t>(b)] = sigmoid(c.z2(b, 0));
    return probs;
}

template <typename T>
T network_loss_gradient(const NetworkParams<T>& params, std::span<const IndexSequence> batch,
                        std::span<const T> labels, NetworkParams<T>& grads, bool train_embedding) {
    if (labels.size() != batch.size()) throw ValidationError("network: label count does not match batch");
    ForwardCache<T> c;
    const std::vector<T> probs = network_forward(params, batch, &c);
    const T loss = bce<T>(probs, labels);

    const auto B = static_cast<Eigen::Index>(batch.size());
    const auto L = static_cast<Eigen::Index>(c.fwd.size());
    const auto h = static_cast<Eigen::Index>(params.hidden());

    grads.for_each([](const char*, Tensor<T>& t) { t.fill(T(0)); });

    // d(mean BCE)/dz2 = (p - y)/B inside the clamp range, 0 where clamped.
    Mat<T> dz2(B, 1);
    const T lo = T(kBceClamp), hi = T(1) - T(kBceClamp);
    for (Eigen::Index b = 0; b < B; ++b) {
        const T p = probs[static_cast<std::size_t>(b)];
        dz2(b, 0) = (p < lo || p > hi) ? T(0) : (p - labels[static_cast<std::size_t>(b)]) / static_cast<T>(B);
    }

    grads.dense2.weights.matrix().noalias() = dz2.transpose() * c.a1;
    grads.dense2.bias.vector() = dz2.colwise().sum().transpose();
    Mat<T> da1 = dz2 * params.dense2.weights.matrix();

    Mat<T> dz1 = (da1.array() * activation_derivative(c.z1, c.a1, params.dense1.activation).array()).matrix();
    grads.dense1.weights.matrix().noalias() = dz1.transpose() * c.features;
    grads.dense1.bias.vector() = dz1.colwise().sum().transpose();
    Mat<T> dfeatures = dz1 * params.dense1.weights.matrix();

    // Hidden-state gradients arriving from the classifier head, per position.
    auto head_grad = [&](bool backward_dir, Eigen::Index t) -> Mat<T> {
        if (params.output == SequenceOutput::FinalState) {
            const Eigen::Index owner = backward_dir ? 0 : L - 1;
            if (t != owner) return Mat<T>::Zero(B, h);
            return backward_dir ? Mat<T>(dfeatures.rightCols(h)) : Mat<T>(dfeatures.leftCols(h));
        }
        return dfeatures.middleCols(2 * h * t + (backward_dir ? h : 0), h);
    };

    Mat<T> dinputs = Mat<T>::Zero(L * B, params.embed_dim());
    Mat<T> zero = Mat<T>::Zero(B, h);
    auto bptt = [&](const LstmParams<T>& p, LstmParams<T>& g, const std::vector<LstmStepCache<T>>& steps,
                    bool reverse) {
        Mat<T> dh_next = Mat<T>::Zero(B, h);
        Mat<T> dc = Mat<T>::Zero(B, h);
        Mat<T> dgates;
        // Walk the scan order backwards.
        for (Eigen::Index s = L - 1; s >= 0; --s) {
            const Eigen::Index t = reverse ? L - 1 - s : s;
            const Eigen::Index prev = reverse ? t + 1 : t - 1;
            const bool has_prev = s > 0;
            const Mat<T>& h_prev = has_prev ? steps[static_cast<std::size_t>(prev)].hidden : zero;
            const Mat<T>& c_prev = has_prev ? steps[static_cast<std::size_t>(prev)].cell : zero;
            Mat<T> dh = head_grad(reverse, t) + dh_next;
            const Mat<T> x = c.inputs.middleRows(t * B, B);
            lstm_step_backward<T>(steps[static_cast<std::size_t>(t)], c_prev, x, h_prev, dh, dc, g, dgates);
            dh_next.noalias() = dgates * p.w_recurrent.matrix();
            if (train_embedding) dinputs.middleRows(t * B, B).noalias() += dgates * p.w_input.matrix();
        }
    };
    bptt(params.forward, grads.forward, c.fwd, false);
    bptt(params.backward, grads.backward, c.bwd, true);

    if (train_embedding) {
        auto demb = grads.embedding.matrix();
        for (Eigen::Index t = 0; t < L; ++t) {
            for (Eigen::Index b = 0; b < B; ++b) {
                const std::int32_t idx = batch[static_cast<std::size_t>(b)][static_cast<std::size_t>(t)];
                if (idx != 0) demb.row(idx) += dinputs.row(t * B + b);
            }
        }
    }
    return loss;
}

template struct NetworkParams<float>;
template struct NetworkParams<double>;
template NetworkParams<double> NetworkParams<float>::cast<double>() const;
template NetworkParams<float> NetworkParams<double>::cast<float>() const;
template NetworkParams<float> NetworkParams<float>::cast<float>() const;
template NetworkParams<double> NetworkParams<double>::cast<double>() const;
template NetworkParams<float> init_network<float>(const NetworkShape&, std::uint64_t);
template NetworkParams<double> init_network<double>(const NetworkShape&, std::uint64_t);
template std::vector<float> network_forward<float>(const NetworkParams<float>&, std::span<const IndexSequence>,
                                                   ForwardCache<float>*);
template std::vector<double> network_forward<double>(const NetworkParams<double>&, std::span<const IndexSequence>,
                                                     ForwardCache<double>*);
template float network_loss_gradient<float>(const NetworkParams<float>&, std::span<const IndexSequence>,
                                            std::span<const float>, NetworkParams<float>&, bool);
template double network_loss_gradient<double>(const NetworkParams<double>&, std::span<const IndexSequence>,
                                              std::span<const double>, NetworkParams<double>&, bool);

}  // namespace hsd::nn
