#include <algorithm>
#include <cmath>

#include "peernet/baselines.hpp"
#include "peernet/error.hpp"
#include "peernet/gat.hpp"
#include "peernet/optim.hpp"
#include "peernet/rng.hpp"

namespace peernet::baselines {

namespace {

constexpr double kClamp = 1e-7;

struct Activations {
    std::vector<Eigen::MatrixXd> pre;   // per layer, samples × units
    std::vector<Eigen::MatrixXd> post;  // post[0] = input
};

Activations run(const MlpParams& p, const Eigen::MatrixXd& x) {
    if (x.cols() != p.input_dim()) {
        throw Error(ErrorKind::data, "sample length " + std::to_string(x.cols()) + " does not match MLP input " +
                                         std::to_string(p.input_dim()));
    }
    Activations a;
    a.post.push_back(x);
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        Eigen::MatrixXd z = a.post.back() * p.weights[l].transpose();
        z.rowwise() += p.biases[l].transpose();
        a.pre.push_back(z);
        if (l + 1 < p.weights.size()) {
            a.post.push_back(z.cwiseMax(0.0));
        } else {
            a.post.push_back(z.unaryExpr([](double v) { return gat::logistic(v); }));
        }
    }
    return a;
}

} // namespace

MlpParams mlp_init(Index input_dim, const std::vector<Index>& hidden, std::uint64_t seed) {
    if (input_dim <= 0) {
        throw Error(ErrorKind::config, "MLP input width must be positive");
    }
    Rng rng(seed);
    MlpParams p;
    Index in = input_dim;
    std::vector<Index> sizes = hidden;
    sizes.push_back(1);
    for (Index out : sizes) {
        if (out <= 0) {
            throw Error(ErrorKind::config, "MLP layer widths must be positive");
        }
        const double r = std::sqrt(6.0 / static_cast<double>(in + out));
        Eigen::MatrixXd w(out, in);
        for (Index c = 0; c < in; ++c) {
            for (Index rr = 0; rr < out; ++rr) {
                w(rr, c) = (2.0 * uniform01(rng) - 1.0) * r;
            }
        }
        p.weights.push_back(std::move(w));
        p.biases.push_back(Eigen::VectorXd::Zero(out));
        in = out;
    }
    return p;
}

double mlp_predict(const MlpParams& params, const Eigen::Ref<const Eigen::RowVectorXd>& sample) {
    return run(params, Eigen::MatrixXd(sample)).post.back()(0, 0);
}

Eigen::VectorXd mlp_predict_batch(const MlpParams& params, const Eigen::MatrixXd& samples) {
    return run(params, samples).post.back().col(0);
}

MlpLossGrad mlp_loss_grad(const MlpParams& p, const Eigen::MatrixXd& x, std::span<const double> y,
                          std::span<const double> weights, MlpLoss loss) {
    if (static_cast<Index>(y.size()) != x.rows() || (!weights.empty() && weights.size() != y.size())) {
        throw Error(ErrorKind::data, "sample, target and weight counts differ");
    }
    if (y.empty()) {
        throw Error(ErrorKind::data, "empty batch");
    }
    const auto a = run(p, x);
    const Eigen::VectorXd yhat = a.post.back().col(0);
    double total_w = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) total_w += weights.empty() ? 1.0 : weights[k];

    MlpLossGrad out;
    out.grad = p;
    Eigen::MatrixXd delta(x.rows(), 1);  // ∂L/∂(output pre-activation)
    double total = 0.0;
    for (Index k = 0; k < x.rows(); ++k) {
        const double w = weights.empty() ? 1.0 : weights[static_cast<std::size_t>(k)];
        const double t = y[static_cast<std::size_t>(k)];
        const double ph = yhat(k);
        if (loss == MlpLoss::bce) {
            const double pc = std::clamp(ph, kClamp, 1.0 - kClamp);
            total += -w * (t * std::log(pc) + (1.0 - t) * std::log(1.0 - pc));
            delta(k, 0) = (ph < kClamp || ph > 1.0 - kClamp) ? 0.0 : w * (ph - t) / total_w;
        } else {
            total += w * (ph - t) * (ph - t);
            delta(k, 0) = 2.0 * w * (ph - t) * ph * (1.0 - ph) / total_w;
        }
    }
    out.loss = total / total_w;

    for (std::size_t l = p.weights.size(); l-- > 0;) {
        out.grad.weights[l] = delta.transpose() * a.post[l];
        out.grad.biases[l] = delta.colwise().sum().transpose();
        if (l > 0) {
            Eigen::MatrixXd back = delta * p.weights[l];
            delta = (a.pre[l - 1].array() > 0.0).select(back, 0.0);
        }
    }
    return out;
}

Eigen::VectorXd mlp_flatten(const MlpParams& p) {
    Index n = 0;
    for (std::size_t l = 0; l < p.weights.size(); ++l) n += p.weights[l].size() + p.biases[l].size();
    Eigen::VectorXd v(n);
    Index o = 0;
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        v.segment(o, p.weights[l].size()) = p.weights[l].reshaped();
        o += p.weights[l].size();
        v.segment(o, p.biases[l].size()) = p.biases[l];
        o += p.biases[l].size();
    }
    return v;
}

void mlp_unflatten(MlpParams& p, const Eigen::VectorXd& v) {
    Index o = 0;
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        p.weights[l].reshaped() = v.segment(o, p.weights[l].size());
        o += p.weights[l].size();
        p.biases[l] = v.segment(o, p.biases[l].size());
        o += p.biases[l].size();
    }
    if (o != v.size()) {
        throw Error(ErrorKind::model, "MLP parameter vector has wrong length");
    }
}

std::string mlp_parameter_name(const MlpParams& p, Index k) {
    Index o = 0;
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        const std::string prefix = "dense" + std::to_string(l + 1);
        if (k < o + p.weights[l].size()) {
            const Index local = k - o;
            return prefix + ".W[" + std::to_string(local % p.weights[l].rows()) + "," +
                   std::to_string(local / p.weights[l].rows()) + "]";
        }
        o += p.weights[l].size();
        if (k < o + p.biases[l].size()) {
            return prefix + ".b[" + std::to_string(k - o) + "]";
        }
        o += p.biases[l].size();
    }
    throw Error(ErrorKind::model, "parameter index out of range");
}

MlpParams mlp_train(const Eigen::MatrixXd& x, std::span<const double> y, std::span<const double> weights,
                    const MlpConfig& cfg) {
    if (cfg.epochs < 0 || !(cfg.learning_rate > 0.0)) {
        throw Error(ErrorKind::config, "invalid MLP configuration");
    }
    MlpParams p = mlp_init(x.cols(), cfg.hidden, cfg.seed);
    Eigen::VectorXd theta = mlp_flatten(p);
    Adam<double> adam({cfg.learning_rate, 0.9, 0.999, 1e-8, cfg.weight_decay});
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto lg = mlp_loss_grad(p, x, y, weights, cfg.loss);
        if (!std::isfinite(lg.loss)) {
            throw Error(ErrorKind::numeric, "MLP training diverged at epoch " + std::to_string(epoch));
        }
        adam.step(theta, mlp_flatten(lg.grad));
        mlp_unflatten(p, theta);
    }
    return p;
}

MlpParams mlp_train(const PairSamples& samples, const MlpConfig& cfg) {
    std::vector<double> y(samples.y.begin(), samples.y.end());
    if (std::find(y.begin(), y.end(), 0.0) == y.end() || std::find(y.begin(), y.end(), 1.0) == y.end()) {
        throw Error(ErrorKind::data, "MLP training needs both classes");
    }
    return mlp_train(samples.x, y, {}, cfg);
}

GradCheckReport mlp_grad_check(const MlpParams& params, const Eigen::MatrixXd& x, std::span<const double> y,
                               std::span<const double> weights, MlpLoss loss, double delta, double tolerance) {
    const auto analytic = mlp_flatten(mlp_loss_grad(params, x, y, weights, loss).grad);
    MlpParams probe = params;
    auto f = [&](const Eigen::VectorXd& theta) {
        mlp_unflatten(probe, theta);
        return mlp_loss_grad(probe, x, y, weights, loss).loss;
    };
    auto name = [&](Index k) { return mlp_parameter_name(params, k); };
    return check_gradients<double>(f, mlp_flatten(params), analytic, name, delta, tolerance);
}

} // namespace peernet::baselines
