#ifndef PEERNET_GRADCHECK_HPP
#define PEERNET_GRADCHECK_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include <Eigen/Dense>

#include "peernet/error.hpp"

namespace peernet {

struct GradCheckReport {
    double max_relative_error = 0.0;
    Eigen::Index worst_index = -1;
    std::string worst_parameter;
    double analytic = 0.0;
    double numeric = 0.0;
    bool passed = true;
};

/// |g_a − g_n| / max(1e-8, |g_a| + |g_n|)
inline double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

/// Central differences of `loss` around `params`, compared entry by entry
/// with `analytic`. `name` maps a flat index to a parameter label.
template <typename Scalar>
GradCheckReport check_gradients(const std::function<Scalar(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>&)>& loss,
                                const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& params,
                                const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& analytic,
                                const std::function<std::string(Eigen::Index)>& name, double delta,
                                double tolerance) {
    if (!(delta > 0.0)) {
        throw Error(ErrorKind::config, "finite-difference step must be positive");
    }
    if (analytic.size() != params.size()) {
        throw Error(ErrorKind::model, "analytic gradient has wrong length");
    }
    GradCheckReport report;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> probe = params;
    for (Eigen::Index k = 0; k < params.size(); ++k) {
        const Scalar saved = probe(k);
        probe(k) = saved + Scalar(delta);
        const Scalar up = loss(probe);
        probe(k) = saved - Scalar(delta);
        const Scalar down = loss(probe);
        probe(k) = saved;
        const double numeric = static_cast<double>((up - down) / Scalar(2 * delta));
        const double a = static_cast<double>(analytic(k));
        const double err = relative_error(a, numeric);
        if (err > report.max_relative_error || report.worst_index < 0) {
            report.max_relative_error = err;
            report.worst_index = k;
            report.analytic = a;
            report.numeric = numeric;
        }
    }
    if (report.worst_index >= 0) {
        report.worst_parameter = name(report.worst_index);
    }
    report.passed = report.max_relative_error < tolerance;
    return report;
}

} // namespace peernet

#endif // PEERNET_GRADCHECK_HPP
