#include "mwb/two_way_fe.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include <Eigen/Dense>

#include "mwb/event_study.hpp"
#include "mwb/types.hpp"

namespace mwb {

TwoWayFeFit fit_two_way_fe(std::span<const TwoWayRow> rows, std::span<const int> expected_times,
                           double level) {
    std::map<int, int> unit_col, time_col;
    for (const auto& r : rows) {
        unit_col.emplace(r.unit, 0);
        time_col.emplace(r.time, 0);
    }
    TwoWayFeFit fit;
    for (int t : expected_times)
        if (!time_col.count(t)) fit.dropped_times.push_back(t);
    std::sort(fit.dropped_times.begin(), fit.dropped_times.end());
    fit.dropped_times.erase(std::unique(fit.dropped_times.begin(), fit.dropped_times.end()),
                            fit.dropped_times.end());
    if (unit_col.empty() || time_col.size() < 2)
        throw EstimationError("two-way FE needs at least one unit and two periods");

    // Columns: intercept | units except the first | times except the first.
    int k = 1;
    for (auto it = std::next(unit_col.begin()); it != unit_col.end(); ++it) it->second = k++;
    for (auto it = std::next(time_col.begin()); it != time_col.end(); ++it) it->second = k++;
    const auto n = static_cast<Eigen::Index>(rows.size());
    if (n <= k) throw EstimationError("two-way FE has no residual degrees of freedom");

    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, k);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = rows[static_cast<std::size_t>(i)];
        X(i, 0) = 1.0;
        if (int c = unit_col[r.unit]) X(i, c) = 1.0;
        if (int c = time_col[r.time]) X(i, c) = 1.0;
        y[i] = r.y;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < k) throw EstimationError("two-way FE design is rank deficient");
    const Eigen::VectorXd beta = qr.solve(y);
    const Eigen::VectorXd resid = y - X * beta;

    // HC1: (X'X)^-1 X' diag(e^2) X (X'X)^-1 * n/(n-k)
    const Eigen::MatrixXd XtX_inv = (X.transpose() * X).ldlt().solve(Eigen::MatrixXd::Identity(k, k));
    const Eigen::MatrixXd Xe = X.array().colwise() * resid.array();
    const Eigen::MatrixXd meat = Xe.transpose() * Xe;
    const Eigen::MatrixXd V = XtX_inv * meat * XtX_inv *
                              (static_cast<double>(n) / static_cast<double>(n - k));

    const double crit = normal_quantile(0.5 + 0.5 * level);
    fit.n_obs = n;
    fit.residual_variance = resid.squaredNorm() / static_cast<double>(n - k);
    for (const auto& [u, c] : unit_col) {
        fit.units.push_back(u);
        fit.unit_effects.push_back(c ? beta[c] : 0.0);
    }
    fit.reference_time = time_col.begin()->first;
    for (const auto& [t, c] : time_col) {
        TimeEffect te;
        te.time = t;
        te.estimate = c ? beta[c] : 0.0;
        te.se = c ? std::sqrt(std::max(0.0, V(c, c))) : 0.0;
        te.ci_low = te.estimate - crit * te.se;
        te.ci_high = te.estimate + crit * te.se;
        fit.time_effects.push_back(te);
    }
    return fit;
}

}  // namespace mwb
