#include "hsd/neural.hpp"

#include <algorithm>

namespace hsd::nn {

template <typename T>
T bce(std::span<const T> p, std::span<const T> y) {
    if (p.size() != y.size()) throw ValidationError("bce: length mismatch");
    if (p.empty()) throw ValidationError("bce: empty batch");
    const T lo = T(kBceClamp), hi = T(1) - T(kBceClamp);
    T sum = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        T pc = std::clamp(p[i], lo, hi);
        sum -= y[i] * std::log(pc) + (T(1) - y[i]) * std::log(T(1) - pc);
    }
    return sum / static_cast<T>(p.size());
}

std::string to_string(Activation a) {
    switch (a) {
        case Activation::Identity: return "identity";
        case Activation::Relu: return "relu";
        case Activation::Sigmoid: return "sigmoid";
    }
    return "identity";
}

Activation parse_activation(const std::string& name) {
    if (name == "identity" || name == "linear" || name == "none") return Activation::Identity;
    if (name == "relu") return Activation::Relu;
    if (name == "sigmoid") return Activation::Sigmoid;
    throw ValidationError("unknown activation: " + name);
}

std::string to_string(SequenceOutput s) { return s == SequenceOutput::FinalState ? "final_state" : "flatten"; }

SequenceOutput parse_sequence_output(const std::string& name) {
    if (name == "final_state") return SequenceOutput::FinalState;
    if (name == "flatten") return SequenceOutput::Flatten;
    throw ValidationError("unknown sequence output mode: " + name);
}

template <typename T>
LstmParams<T>::LstmParams(std::size_t input_dim, std::size_t hidden)
    : w_input({4 * hidden, input_dim}), w_recurrent({4 * hidden, hidden}), bias({4 * hidden}) {}

template <typename T>
void LstmParams<T>::check() const {
    const std::size_t h = w_recurrent.cols();
    if (w_recurrent.rows() != 4 * h || w_input.rows() != 4 * h || bias.size() != 4 * h) {
        throw ValidationError("lstm: inconsistent parameter shapes");
    }
}

template <typename T>
DenseParams<T>::DenseParams(std::size_t in, std::size_t out, Activation act)
    : weights({out, in}), bias({out}), activation(act) {}

namespace {

template <typename T>
auto sigmoid_op() {
    return [](T x) { return sigmoid(x); };
}

}  // namespace

template <typename T>
void lstm_step_forward(const Mat<T>& x_proj, const Mat<T>& h_prev, const Mat<T>& c_prev, const LstmParams<T>& p,
                       LstmStepCache<T>& out) {
    const Eigen::Index h = static_cast<Eigen::Index>(p.hidden());
    if (x_proj.cols() != 4 * h || h_prev.cols() != h || c_prev.cols() != h || x_proj.rows() != h_prev.rows()) {
        throw ValidationError("lstm step: shape mismatch");
    }
    Mat<T> z = x_proj;
    z.noalias() += h_prev * p.w_recurrent.matrix().transpose();
    z.rowwise() += p.bias.vector().transpose();

    out.gates.resize(z.rows(), z.cols());
    out.gates.leftCols(2 * h) = z.leftCols(2 * h).unaryExpr(sigmoid_op<T>());
    out.gates.middleCols(2 * h, h) = z.middleCols(2 * h, h).array().tanh();
    out.gates.rightCols(h) = z.rightCols(h).unaryExpr(sigmoid_op<T>());

    const auto i = out.gates.leftCols(h).array();
    const auto f = out.gates.middleCols(h, h).array();
    const auto g = out.gates.middleCols(2 * h, h).array();
    const auto o = out.gates.rightCols(h).array();
    out.cell = (f * c_prev.array() + i * g).matrix();
    out.cell_tanh = out.cell.array().tanh().matrix();
    out.hidden = (o * out.cell_tanh.array()).matrix();
}

template <typename T>
void lstm_step_backward(const LstmStepCache<T>& step, const Mat<T>& c_prev, const Mat<T>& x, const Mat<T>& h_prev,
                        const Mat<T>& d_hidden, Mat<T>& d_cell, LstmParams<T>& grads, Mat<T>& d_gates) {
    const Eigen::Index h = step.cell.cols();
    const auto i = step.gates.leftCols(h).array();
    const auto f = step.gates.middleCols(h, h).array();
    const auto g = step.gates.middleCols(2 * h, h).array();
    const auto o = step.gates.rightCols(h).array();
    const auto tc = step.cell_tanh.array();

    Mat<T> dc = (d_cell.array() + d_hidden.array() * o * (T(1) - tc * tc)).matrix();
    d_gates.resize(step.gates.rows(), 4 * h);
    d_gates.leftCols(h) = (dc.array() * g * i * (T(1) - i)).matrix();
    d_gates.middleCols(h, h) = (dc.array() * c_prev.array() * f * (T(1) - f)).matrix();
    d_gates.middleCols(2 * h, h) = (dc.array() * i * (T(1) - g * g)).matrix();
    d_gates.rightCols(h) = (d_hidden.array() * tc * o * (T(1) - o)).matrix();

    grads.w_input.matrix().noalias() += d_gates.transpose() * x;
    grads.w_recurrent.matrix().noalias() += d_gates.transpose() * h_prev;
    grads.bias.vector() += d_gates.colwise().sum().transpose();
    d_cell = (dc.array() * f).matrix();
}

template <typename T>
std::pair<std::vector<T>, std::vector<T>> lstm_cell_step(std::span<const T> x, std::span<const T> h,
                                                         std::span<const T> c, const LstmParams<T>& p) {
    p.check();
    const auto hid = static_cast<Eigen::Index>(p.hidden());
    if (x.size() != p.input_dim() || h.size() != p.hidden() || c.size() != p.hidden()) {
        throw ValidationError("lstm_cell_step: shape mismatch");
    }
    Mat<T> xm = Eigen::Map<const Mat<T>>(x.data(), 1, static_cast<Eigen::Index>(x.size()));
    Mat<T> hm = Eigen::Map<const Mat<T>>(h.data(), 1, hid);
    Mat<T> cm = Eigen::Map<const Mat<T>>(c.data(), 1, hid);
    Mat<T> proj = xm * p.w_input.matrix().transpose();
    LstmStepCache<T> cache;
    lstm_step_forward(proj, hm, cm, p, cache);
    return {std::vector<T>(cache.hidden.data(), cache.hidden.data() + hid),
            std::vector<T>(cache.cell.data(), cache.cell.data() + hid)};
}

template <typename T>
std::vector<T> bilstm_forward(const Mat<T>& sequence, const LstmParams<T>& fwd, const LstmParams<T>& bwd,
                              SequenceOutput mode) {
    fwd.check();
    bwd.check();
    const Eigen::Index len = sequence.rows();
    if (len < 1) throw ValidationError("bilstm_forward: empty sequence");
    if (sequence.cols() != static_cast<Eigen::Index>(fwd.input_dim()) ||
        sequence.cols() != static_cast<Eigen::Index>(bwd.input_dim()) || fwd.hidden() != bwd.hidden()) {
        throw ValidationError("bilstm_forward: shape mismatch");
    }
    const Eigen::Index h = static_cast<Eigen::Index>(fwd.hidden());

    auto scan = [&](const LstmParams<T>& p, bool reverse) {
        Mat<T> proj = sequence * p.w_input.matrix().transpose();
        Mat<T> hs(len, h);
        Mat<T> hp = Mat<T>::Zero(1, h), cp = Mat<T>::Zero(1, h);
        LstmStepCache<T> cache;
        for (Eigen::Index s = 0; s < len; ++s) {
            Eigen::Index t = reverse ? len - 1 - s : s;
            lstm_step_forward<T>(proj.row(t), hp, cp, p, cache);
            hp = cache.hidden;
            cp = cache.cell;
            hs.row(t) = hp;
        }
        return hs;
    };
    Mat<T> hf = scan(fwd, false);
    Mat<T> hb = scan(bwd, true);

    std::vector<T> out;
    if (mode == SequenceOutput::FinalState) {
        out.reserve(static_cast<std::size_t>(2 * h));
        for (Eigen::Index k = 0; k < h; ++k) out.push_back(hf(len - 1, k));
        for (Eigen::Index k = 0; k < h; ++k) out.push_back(hb(0, k));
    } else {
        out.reserve(static_cast<std::size_t>(2 * h * len));
        for (Eigen::Index t = 0; t < len; ++t) {
            for (Eigen::Index k = 0; k < h; ++k) out.push_back(hf(t, k));
            for (Eigen::Index k = 0; k < h; ++k) out.push_back(hb(t, k));
        }
    }
    return out;
}

template <typename T>
Mat<T> activate(const Mat<T>& z, Activation a) {
    switch (a) {
        case Activation::Identity: return z;
        case Activation::Relu: return z.cwiseMax(T(0));
        case Activation::Sigmoid: return z.unaryExpr(sigmoid_op<T>());
    }
    return z;
}

template <typename T>
Mat<T> activation_derivative(const Mat<T>& z, const Mat<T>& activated, Activation a) {
    switch (a) {
        case Activation::Identity: return Mat<T>::Ones(z.rows(), z.cols());
        case Activation::Relu: return (z.array() > T(0)).template cast<T>().matrix();
        case Activation::Sigmoid: return (activated.array() * (T(1) - activated.array())).matrix();
    }
    return Mat<T>::Ones(z.rows(), z.cols());
}

template <typename T>
void adam_step(const std::vector<std::span<T>>& params, const std::vector<std::span<const T>>& grads,
               AdamState<T>& state) {
    if (params.size() != grads.size()) throw ValidationError("adam: parameter/gradient count mismatch");
    if (state.first_moment.empty()) {
        for (const auto& p : params) {
            state.first_moment.emplace_back(p.size(), T(0));
            state.second_moment.emplace_back(p.size(), T(0));
        }
    }
    if (state.first_moment.size() != params.size()) throw ValidationError("adam: state does not match parameters");
    for (std::size_t k = 0; k < params.size(); ++k) {
        if (params[k].size() != grads[k].size() || state.first_moment[k].size() != params[k].size()) {
            throw ValidationError("adam: shape mismatch in tensor " + std::to_string(k));
        }
        for (T g : grads[k]) {
            if (!std::isfinite(g)) throw NumericError("adam: non-finite gradient in tensor " + std::to_string(k));
        }
    }

    const auto& c = state.config;
    ++state.step;
    const T b1 = T(c.beta1), b2 = T(c.beta2);
    const T correction1 = T(1) - static_cast<T>(std::pow(c.beta1, static_cast<double>(state.step)));
    const T correction2 = T(1) - static_cast<T>(std::pow(c.beta2, static_cast<double>(state.step)));
    const T lr = T(c.learning_rate), eps = T(c.epsilon);
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& m = state.first_moment[k];
        auto& v = state.second_moment[k];
        for (std::size_t i = 0; i < params[k].size(); ++i) {
            const T g = grads[k][i];
            m[i] = b1 * m[i] + (T(1) - b1) * g;
            v[i] = b2 * v[i] + (T(1) - b2) * g * g;
            const T m_hat = m[i] / correction1;
            const T v_hat = v[i] / correction2;
            params[k][i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
        }
    }
}

std::vector<double> finite_diff_grad(const std::function<double(std::span<const double>)>& f,
                                     std::vector<double> params, double step) {
    std::vector<double> grad(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = params[i];
        params[i] = saved + step;
        const double up = f(params);
        params[i] = saved - step;
        const double down = f(params);
        params[i] = saved;
        grad[i] = (up - down) / (2 * step);
    }
    return grad;
}

double max_relative_error(std::span<const double> analytic, std::span<const double> numeric, double floor) {
    if (analytic.size() != numeric.size()) throw ValidationError("max_relative_error: length mismatch");
    double worst = 0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
        worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
    }
    return worst;
}

#define HSD_INSTANTIATE(T)                                                                                         \
    template T bce<T>(std::span<const T>, std::span<const T>);                                                     \
    template struct LstmParams<T>;                                                                                 \
    template struct DenseParams<T>;                                                                                \
    template void lstm_step_forward<T>(const Mat<T>&, const Mat<T>&, const Mat<T>&, const LstmParams<T>&,          \
                                       LstmStepCache<T>&);                                                         \
    template void lstm_step_backward<T>(const LstmStepCache<T>&, const Mat<T>&, const Mat<T>&, const Mat<T>&,      \
                                        const Mat<T>&, Mat<T>&, LstmParams<T>&, Mat<T>&);                          \
    template std::pair<std::vector<T>, std::vector<T>> lstm_cell_step<T>(std::span<const T>, std::span<const T>,   \
                                                                         std::span<const T>, const LstmParams<T>&); \
    template std::vector<T> bilstm_forward<T>(const Mat<T>&, const LstmParams<T>&, const LstmParams<T>&,           \
                                              SequenceOutput);                                                     \
    template Mat<T> activate<T>(const Mat<T>&, Activation);                                                        \
    template Mat<T> activation_derivative<T>(const Mat<T>&, const Mat<T>&, Activation);                            \
    template void adam_step<T>(const std::vector<std::span<T>>&, const std::vector<std::span<const T>>&,           \
                               AdamState<T>&);

HSD_INSTANTIATE(float)
HSD_INSTANTIATE(double)

#undef HSD_INSTANTIATE

}  // namespace hsd::nn
