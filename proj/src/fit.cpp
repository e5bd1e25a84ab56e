#include "bbmgap/fit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace bbmgap {

LinearFit fit_line(std::span<const double> x, std::span<const double> y, std::span<const double> w)
{
    const std::size_t n = x.size();
    if (y.size() != n || (!w.empty() && w.size() != n)) throw std::invalid_argument("fit_line: size mismatch");
    if (n < 2) throw std::invalid_argument("fit_line: need at least two points");
    auto weight = [&](std::size_t i) { return w.empty() ? 1.0 : w[i]; };

    double sw = 0, sx = 0, sy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sw += weight(i);
        sx += weight(i) * x[i];
        sy += weight(i) * y[i];
    }
    const double mx = sx / sw, my = sy / sw;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxx += weight(i) * dx * dx;
        sxy += weight(i) * dx * dy;
        syy += weight(i) * dy * dy;
    }
    if (!(sxx > 0.0)) throw std::invalid_argument("fit_line: degenerate abscissae");

    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - fit.intercept - fit.slope * x[i];
        ss_res += weight(i) * r * r;
        fit.max_abs_residual = std::max(fit.max_abs_residual, std::abs(r));
    }
    fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
    fit.rms_residual = std::sqrt(ss_res / sw);
    if (n > 2) {
        const double sigma2 = ss_res / sw * static_cast<double>(n) / static_cast<double>(n - 2);
        fit.slope_stderr = std::sqrt(sigma2 / sxx);
        fit.intercept_stderr = std::sqrt(sigma2 * (1.0 / sw + mx * mx / sxx));
    }
    return fit;
}

ModelFit fit_linear_model(const std::vector<std::vector<double>>& columns, std::span<const double> y)
{
    const std::size_t p = columns.size(), n = y.size();
    if (p == 0 || n <= p) throw std::invalid_argument("fit_linear_model: need more points than parameters");
    Eigen::MatrixXd A(n, p);
    Eigen::VectorXd b(n);
    for (std::size_t j = 0; j < p; ++j) {
        if (columns[j].size() != n) throw std::invalid_argument("fit_linear_model: size mismatch");
        for (std::size_t i = 0; i < n; ++i) A(i, j) = columns[j][i];
    }
    for (std::size_t i = 0; i < n; ++i) b(i) = y[i];
    const auto qr = A.colPivHouseholderQr();
    if (qr.rank() < static_cast<Eigen::Index>(p)) throw std::invalid_argument("fit_linear_model: rank deficient design");
    const Eigen::VectorXd c = qr.solve(b);
    const Eigen::VectorXd r = b - A * c;

    ModelFit fit;
    fit.coef.assign(c.data(), c.data() + p);
    const double mean = b.mean();
    const double ss_tot = (b.array() - mean).square().sum();
    const double ss_res = r.squaredNorm();
    fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    fit.max_abs_residual = r.cwiseAbs().maxCoeff();
    const double sigma2 = ss_res / static_cast<double>(n - p);
    const Eigen::MatrixXd cov = (A.transpose() * A).inverse() * sigma2;
    for (std::size_t j = 0; j < p; ++j) fit.stderr_.push_back(std::sqrt(std::max(cov(j, j), 0.0)));
    return fit;
}

}  // namespace bbmgap

namespace bbmgap {

ModelFit fit_inverse_sqrt_tail(std::span<const double> t, std::span<const double> y, double t_lo)
{
    if (t.size() != y.size()) throw std::invalid_argument("fit_inverse_sqrt_tail: size mismatch");
    std::vector<std::vector<double>> cols(3);
    std::vector<double> v;
    for (std::size_t k = 0; k < t.size(); ++k)
        if (t[k] >= t_lo - 1e-9) {
            cols[0].push_back(1.0);
            cols[1].push_back(1.0 / std::sqrt(t[k]));
            cols[2].push_back(1.0 / t[k]);
            v.push_back(y[k]);
        }
    if (v.size() < 4) throw std::invalid_argument("fit_inverse_sqrt_tail: fewer than 4 samples in the window");
    return fit_linear_model(cols, v);
}

}  // namespace bbmgap
