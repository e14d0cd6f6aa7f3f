#ifndef PEERNET_OPTIM_HPP
#define PEERNET_OPTIM_HPP

#include <cmath>

#include <Eigen/Dense>

namespace peernet {

struct AdamConfig {
    double learning_rate = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.0;  // coupled L2: g += wd·θ
};

/// Adam over a flat parameter vector.
template <typename Scalar>
class Adam {
public:
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    void step(Vec& params, const Vec& grad) {
        if (m_.size() != params.size()) {
            m_ = Vec::Zero(params.size());
            v_ = Vec::Zero(params.size());
            t_ = 0;
        }
        ++t_;
        Vec g = grad;
        if (cfg_.weight_decay != 0.0) {
            g += Scalar(cfg_.weight_decay) * params;
        }
        const Scalar b1(cfg_.beta1), b2(cfg_.beta2);
        m_ = b1 * m_ + (Scalar(1) - b1) * g;
        v_ = b2 * v_ + (Scalar(1) - b2) * g.cwiseProduct(g);
        const Scalar c1 = Scalar(1) - std::pow(b1, Scalar(t_));
        const Scalar c2 = Scalar(1) - std::pow(b2, Scalar(t_));
        params.array() -= Scalar(cfg_.learning_rate) * (m_.array() / c1) /
                          ((v_.array() / c2).sqrt() + Scalar(cfg_.epsilon));
    }

    int steps() const { return t_; }

private:
    AdamConfig cfg_;
    Vec m_;
    Vec v_;
    int t_ = 0;
};

} // namespace peernet

#endif // PEERNET_OPTIM_HPP
