#include "mwb/event_study.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "mwb/types.hpp"

namespace mwb {

std::vector<int> EventStudyDesign::finite_groups() const {
    std::vector<int> out;
    for (int e = -1; e <= max_e; ++e) out.push_back(e);
    return out;
}

std::vector<int> EventStudyDesign::coefficient_rels() const {
    std::vector<int> out;
    for (int l = first_rel(); l <= last_rel(); ++l)
        if (l != reference_rel) out.push_back(l);
    return out;
}

void EventStudyDesign::validate() const {
    if (n_periods < 2) throw ConfigError("event study needs at least two periods");
    if (event_period < 2 || event_period > n_periods)
        throw ConfigError("event period must lie strictly inside the window");
    if (reference_rel < first_rel() || reference_rel > last_rel())
        throw ConfigError("reference period outside the window");
    if (max_e < -1) throw ConfigError("max_e must be >= -1");
}

ParamLayout::ParamLayout(const EventStudyDesign& design)
    : n_groups_(design.max_e + 2),
      n_periods_(design.n_periods),
      n_rels_(design.n_periods - 1),
      design_(design) {
    size_ = 1 + n_groups_ + (n_periods_ - 1) + n_rels_ * n_groups_;
}

int ParamLayout::alpha(int e) const {
    if (e < -1 || e > design_.max_e) throw std::out_of_range("alpha: group out of range");
    return 1 + (e + 1);
}

int ParamLayout::lambda(int t) const {
    const int ref = design_.reference_period();
    if (t < 1 || t > n_periods_ || t == ref) throw std::out_of_range("lambda: no such period");
    return 1 + n_groups_ + (t - 1) - (t > ref ? 1 : 0);
}

int ParamLayout::mu(int l, int e) const {
    if (l == design_.reference_rel || l < design_.first_rel() || l > design_.last_rel())
        throw std::out_of_range("mu: no coefficient for l=" + std::to_string(l));
    if (e < -1 || e > design_.max_e) throw std::out_of_range("mu: group out of range");
    const int ri = (l - design_.first_rel()) - (l > design_.reference_rel ? 1 : 0);
    return first_mu() + ri * n_groups_ + (e + 1);
}

std::string ParamLayout::name(int index) const {
    if (index == 0) return "intercept";
    if (index < 1 + n_groups_) return "alpha[e=" + std::to_string(index - 2) + "]";
    if (index < first_mu()) {
        int t = index - n_groups_;
        if (t >= design_.reference_period()) ++t;
        return "lambda[t=" + std::to_string(t) + "]";
    }
    const int k = index - first_mu();
    int l = design_.first_rel() + k / n_groups_;
    if (l >= design_.reference_rel) ++l;
    return "mu[l=" + std::to_string(l) + ",e=" + std::to_string(k % n_groups_ - 1) + "]";
}

const char* to_string(FitMethod m) {
    return m == FitMethod::CellMeans ? "cell_means" : "dummy_ols";
}

FitMethod parse_fit_method(std::string_view text) {
    if (text == "cell_means") return FitMethod::CellMeans;
    if (text == "dummy_ols") return FitMethod::DummyOls;
    throw ConfigError("unknown fit method '" + std::string(text) + "'");
}

const char* to_string(VcovKind k) { return k == VcovKind::CR0 ? "CR0" : "CR1"; }

VcovKind parse_vcov_kind(std::string_view text) {
    if (text == "CR0" || text == "cr0") return VcovKind::CR0;
    if (text == "CR1" || text == "cr1") return VcovKind::CR1;
    throw ConfigError("unsupported vcov variant '" + std::string(text) + "'");
}

double EventStudyFit::mu(int l, int e) const {
    if (l == design.reference_rel) return 0.0;
    return params[layout.mu(l, e)];
}

double EventStudyFit::mu_se(int l, int e) const {
    if (l == design.reference_rel || vcov.size() == 0) return 0.0;
    const int i = layout.mu(l, e);
    return std::sqrt(std::max(0.0, vcov(i, i)));
}

double EventStudyFit::lambda(int t) const {
    if (t == design.reference_period()) return 0.0;
    return params[layout.lambda(t)];
}

Eigen::VectorXd EventStudyFit::mu_vector() const {
    return params.segment(layout.first_mu(), layout.n_mu());
}

Eigen::MatrixXd EventStudyFit::mu_vcov() const {
    const int s = layout.first_mu();
    return vcov.block(s, s, layout.n_mu(), layout.n_mu());
}

namespace {

struct CellGrid {
    int n_groups;  // finite groups; infinity is row n_groups
    int n_periods;

    int rows() const { return n_groups + 1; }
    int size() const { return rows() * n_periods; }
    int index(int row, int t) const { return row * n_periods + (t - 1); }
};

int group_row(const ExposureGroup& g, const EventStudyDesign& d) {
    if (g.is_infinity()) return d.max_e + 2;
    if (!g.is_finite() || g.value() < -1 || g.value() > d.max_e)
        throw EstimationError("observation in group " + g.to_string() +
                              " is outside the estimation design");
    return g.value() + 1;
}

std::string cell_name(int row, int t, const EventStudyDesign& d) {
    const std::string e = row == d.max_e + 2 ? "inf" : std::to_string(row - 1);
    return "(e=" + e + ", t=" + std::to_string(t) + ")";
}

// Maps cell means to parameters: params = C * cell_means.
Eigen::MatrixXd contrast_matrix(const EventStudyDesign& d, const ParamLayout& layout,
                                const CellGrid& grid) {
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(layout.size(), grid.size());
    const int inf = grid.n_groups;
    const int ref = d.reference_period();
    C(0, grid.index(inf, ref)) = 1.0;
    for (int e : d.finite_groups()) {
        const int a = layout.alpha(e);
        C(a, grid.index(e + 1, ref)) += 1.0;
        C(a, grid.index(inf, ref)) -= 1.0;
    }
    for (int t = 1; t <= d.n_periods; ++t) {
        if (t == ref) continue;
        const int lam = layout.lambda(t);
        C(lam, grid.index(inf, t)) += 1.0;
        C(lam, grid.index(inf, ref)) -= 1.0;
    }
    for (int l : d.coefficient_rels()) {
        const int t = d.event_period + l;
        for (int e : d.finite_groups()) {
            const int m = layout.mu(l, e);
            C(m, grid.index(e + 1, t)) += 1.0;
            C(m, grid.index(e + 1, ref)) -= 1.0;
            C(m, grid.index(inf, t)) -= 1.0;
            C(m, grid.index(inf, ref)) += 1.0;
        }
    }
    return C;
}

double cr_scale(VcovKind kind, std::int64_t G, std::int64_t n, std::int64_t k) {
    if (kind == VcovKind::CR0) return 1.0;
    return (static_cast<double>(G) / static_cast<double>(G - 1)) *
           (static_cast<double>(n - 1) / static_cast<double>(n - k));
}

void check_dimensions(std::int64_t G, std::int64_t n, std::int64_t k) {
    if (G < 2) throw EstimationError("clustered covariance needs at least two clusters");
    if (k >= n)
        throw EstimationError("clustered covariance needs more observations (" +
                              std::to_string(n) + ") than parameters (" + std::to_string(k) +
                              ")");
}

// Indices sorted by cluster id (stable), and the number of distinct clusters.
std::vector<std::size_t> order_by_cluster(std::span<const std::int64_t> clusters,
                                          std::int64_t& n_clusters) {
    std::vector<std::size_t> order(clusters.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return clusters[a] < clusters[b]; });
    n_clusters = 0;
    for (std::size_t i = 0; i < order.size(); ++i)
        if (i == 0 || clusters[order[i]] != clusters[order[i - 1]]) ++n_clusters;
    return order;
}

// Clustered covariance through the influence of each observation on the
// cell means: every parameter is a fixed contrast of cell means.
Eigen::MatrixXd influence_vcov(const EventStudyDesign& d, const ParamLayout& layout,
                               std::span<const Observation> obs,
                               std::span<const double> residuals,
                               std::span<const std::int64_t> clusters,
                               const std::vector<double>& cell_weight, VcovKind kind,
                               bool weighted, std::int64_t* n_clusters_out) {
    const CellGrid grid{d.max_e + 2, d.n_periods};
    std::int64_t G = 0;
    const auto order = order_by_cluster(clusters, G);
    const auto n = static_cast<std::int64_t>(obs.size());
    check_dimensions(G, n, layout.size());
    if (n_clusters_out) *n_clusters_out = G;

    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(grid.size(), grid.size());
    std::vector<double> score(static_cast<std::size_t>(grid.size()), 0.0);
    std::vector<int> touched;
    std::size_t i = 0;
    while (i < order.size()) {
        const auto cid = clusters[order[i]];
        touched.clear();
        for (; i < order.size() && clusters[order[i]] == cid; ++i) {
            const auto& o = obs[order[i]];
            const int c = grid.index(group_row(o.group, d), o.period);
            const double w = weighted ? o.weight : 1.0;
            if (score[c] == 0.0) touched.push_back(c);
            score[c] += w * residuals[order[i]] / cell_weight[c];
        }
        std::sort(touched.begin(), touched.end());
        touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
        for (int a : touched)
            for (int b : touched) meat(a, b) += score[a] * score[b];
        for (int a : touched) score[a] = 0.0;
    }
    const Eigen::MatrixXd C = contrast_matrix(d, layout, grid);
    Eigen::MatrixXd V = C * meat * C.transpose();
    V *= cr_scale(kind, G, n, layout.size());
    return 0.5 * (V + V.transpose());
}

struct CellStats {
    std::vector<double> weight;
    std::vector<double> sum;
    std::vector<int> count;
};

CellStats tabulate_cells(std::span<const Observation> obs, const EventStudyDesign& d,
                         bool weighted) {
    const CellGrid grid{d.max_e + 2, d.n_periods};
    CellStats s{std::vector<double>(grid.size(), 0.0), std::vector<double>(grid.size(), 0.0),
                std::vector<int>(grid.size(), 0)};
    for (const auto& o : obs) {
        if (o.period < 1 || o.period > d.n_periods)
            throw EstimationError("observation period " + std::to_string(o.period) +
                                  " outside the window");
        const double w = weighted ? o.weight : 1.0;
        if (!(w >= 0.0)) throw EstimationError("negative or NaN observation weight");
        const int c = grid.index(group_row(o.group, d), o.period);
        s.weight[c] += w;
        s.sum[c] += w * o.y;
        ++s.count[c];
    }
    for (int row = 0; row < grid.rows(); ++row)
        for (int t = 1; t <= d.n_periods; ++t) {
            const int c = grid.index(row, t);
            if (s.count[c] == 0 || s.weight[c] <= 0.0)
                throw EstimationError("empty required cell " + cell_name(row, t, d));
        }
    return s;
}

void fill_cell_tables(EventStudyFit& fit, const CellStats& s, const CellGrid& grid) {
    fit.cell_means.resize(grid.rows(), grid.n_periods);
    fit.cell_counts.resize(grid.rows(), grid.n_periods);
    for (int row = 0; row < grid.rows(); ++row)
        for (int t = 1; t <= grid.n_periods; ++t) {
            const int c = grid.index(row, t);
            fit.cell_means(row, t - 1) = s.sum[c] / s.weight[c];
            fit.cell_counts(row, t - 1) = s.count[c];
        }
}

std::vector<std::int64_t> cluster_ids(std::span<const Observation> obs) {
    std::vector<std::int64_t> ids(obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) ids[i] = obs[i].cluster;
    return ids;
}

EventStudyFit fit_cell_means(std::span<const Observation> obs, const EventStudyDesign& d,
                             const FitOptions& options) {
    const CellGrid grid{d.max_e + 2, d.n_periods};
    EventStudyFit fit;
    fit.design = d;
    fit.layout = ParamLayout(d);
    const auto s = tabulate_cells(obs, d, options.weighted);
    fill_cell_tables(fit, s, grid);

    Eigen::VectorXd ybar(grid.size());
    for (int c = 0; c < grid.size(); ++c) ybar[c] = s.sum[c] / s.weight[c];
    fit.params = contrast_matrix(d, fit.layout, grid) * ybar;

    fit.residuals.resize(obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i)
        fit.residuals[i] = obs[i].y - ybar[grid.index(group_row(obs[i].group, d), obs[i].period)];
    fit.n_obs = static_cast<std::int64_t>(obs.size());

    const auto ids = cluster_ids(obs);
    if (options.compute_vcov) {
        fit.vcov = influence_vcov(d, fit.layout, obs, fit.residuals, ids, s.weight, options.vcov,
                                  options.weighted, &fit.n_clusters);
    } else {
        order_by_cluster(ids, fit.n_clusters);
    }
    return fit;
}

Eigen::MatrixXd inverse_from_qr(const Eigen::ColPivHouseholderQR<Eigen::MatrixXd>& qr) {
    const auto k = qr.cols();
    const Eigen::MatrixXd R = qr.matrixR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
    const Eigen::MatrixXd Rinv =
        R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
    const Eigen::MatrixXd inner = Rinv * Rinv.transpose();
    const auto& P = qr.colsPermutation();
    return P * inner * P.transpose();
}

EventStudyFit fit_dummy_ols(std::span<const Observation> obs, const EventStudyDesign& d,
                            const FitOptions& options) {
    const CellGrid grid{d.max_e + 2, d.n_periods};
    EventStudyFit fit;
    fit.design = d;
    fit.layout = ParamLayout(d);
    const auto s = tabulate_cells(obs, d, options.weighted);
    fill_cell_tables(fit, s, grid);

    const auto n = static_cast<Eigen::Index>(obs.size());
    const int k = fit.layout.size();
    const int ref = d.reference_period();
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, k);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& o = obs[static_cast<std::size_t>(i)];
        const double sw = options.weighted ? std::sqrt(o.weight) : 1.0;
        X(i, 0) = sw;
        if (o.group.is_finite()) X(i, fit.layout.alpha(o.group.value())) = sw;
        if (o.period != ref) {
            X(i, fit.layout.lambda(o.period)) = sw;
            if (o.group.is_finite())
                X(i, fit.layout.mu(o.period - d.event_period, o.group.value())) = sw;
        }
        y[i] = sw * o.y;
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < k)
        throw EstimationError("design is rank deficient beyond the omitted categories (rank " +
                              std::to_string(qr.rank()) + " < " + std::to_string(k) + ")");
    fit.params = qr.solve(y);

    const Eigen::VectorXd resid_w = y - X * fit.params;
    fit.residuals.resize(obs.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& o = obs[static_cast<std::size_t>(i)];
        const double sw = options.weighted ? std::sqrt(o.weight) : 1.0;
        // Zero-weight rows carry no information about their own residual.
        fit.residuals[static_cast<std::size_t>(i)] =
            sw > 0.0 ? resid_w[i] / sw
                     : o.y - fit.cell_means(group_row(o.group, d), o.period - 1);
    }
    fit.n_obs = n;

    const auto ids = cluster_ids(obs);
    if (options.compute_vcov) {
        const Eigen::MatrixXd bread = inverse_from_qr(qr);
        std::vector<double> rw(resid_w.data(), resid_w.data() + n);
        fit.vcov = cluster_vcov(X, rw, ids, options.vcov, &bread);
    }
    order_by_cluster(ids, fit.n_clusters);
    return fit;
}

}  // namespace

EventStudyFit fit_event_study(std::span<const Observation> observations,
                              const EventStudyDesign& design, const FitOptions& options) {
    design.validate();
    return options.method == FitMethod::CellMeans ? fit_cell_means(observations, design, options)
                                                  : fit_dummy_ols(observations, design, options);
}

Eigen::MatrixXd cluster_vcov(const Eigen::MatrixXd& X, std::span<const double> residuals,
                             std::span<const std::int64_t> clusters, VcovKind kind,
                             const Eigen::MatrixXd* bread) {
    const auto n = X.rows();
    const auto k = X.cols();
    if (static_cast<Eigen::Index>(residuals.size()) != n ||
        static_cast<Eigen::Index>(clusters.size()) != n)
        throw std::invalid_argument("cluster_vcov: dimension mismatch");
    std::int64_t G = 0;
    const auto order = order_by_cluster(clusters, G);
    check_dimensions(G, n, k);

    Eigen::MatrixXd inv;
    if (!bread) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
        if (qr.rank() < k) throw EstimationError("cluster_vcov: X is rank deficient");
        inv = inverse_from_qr(qr);
        bread = &inv;
    }

    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
    Eigen::VectorXd score(k);
    std::size_t i = 0;
    while (i < order.size()) {
        const auto cid = clusters[order[i]];
        score.setZero();
        for (; i < order.size() && clusters[order[i]] == cid; ++i)
            score.noalias() += X.row(static_cast<Eigen::Index>(order[i])).transpose() *
                               residuals[order[i]];
        meat.selfadjointView<Eigen::Lower>().rankUpdate(score);
    }
    meat = meat.selfadjointView<Eigen::Lower>();
    Eigen::MatrixXd V = (*bread) * meat * (*bread);
    V *= cr_scale(kind, G, n, k);
    return 0.5 * (V + V.transpose());
}

Eigen::MatrixXd cluster_vcov(const EventStudyFit& fit, std::span<const Observation> observations,
                             std::span<const std::int64_t> clusters, VcovKind kind,
                             bool weighted) {
    if (observations.size() != fit.residuals.size() || clusters.size() != observations.size())
        throw std::invalid_argument("cluster_vcov: observations do not match the fit");
    const auto s = tabulate_cells(observations, fit.design, weighted);
    return influence_vcov(fit.design, fit.layout, observations, fit.residuals, clusters,
                          s.weight, kind, weighted, nullptr);
}

double normal_two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

double chi_square_upper(double statistic, int df) {
    if (df <= 0) return 1.0;
    if (statistic <= 0.0) return 1.0;
    return boost::math::gamma_q(0.5 * df, 0.5 * statistic);
}

double normal_quantile(double p) {
    return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p);
}

PretrendReport pretrend_report(const EventStudyFit& fit) {
    PretrendReport report;
    std::vector<int> idx;
    for (int l : fit.design.coefficient_rels()) {
        if (l >= 0) continue;
        for (int e : fit.design.finite_groups()) {
            PretrendCell cell;
            cell.e = e;
            cell.l = l;
            cell.estimate = fit.mu(l, e);
            cell.se = fit.mu_se(l, e);
            if (cell.se > 0.0) {
                cell.z = cell.estimate / cell.se;
            } else {
                cell.z = cell.estimate == 0.0 ? 0.0 : std::copysign(HUGE_VAL, cell.estimate);
            }
            cell.p_value = normal_two_sided_p(cell.z);
            report.cells.push_back(cell);
            idx.push_back(fit.layout.mu(l, e));
        }
    }
    if (idx.empty() || fit.vcov.size() == 0) return report;

    const auto m = static_cast<Eigen::Index>(idx.size());
    Eigen::VectorXd b(m);
    Eigen::MatrixXd V(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        b[i] = fit.params[idx[static_cast<std::size_t>(i)]];
        for (Eigen::Index j = 0; j < m; ++j)
            V(i, j) = fit.vcov(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    // Moore-Penrose inverse over the numerically positive spectrum.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(V);
    const auto& lam = eig.eigenvalues();
    const double top = lam.cwiseAbs().maxCoeff();
    if (!(top > 0.0)) return report;
    const Eigen::VectorXd proj = eig.eigenvectors().transpose() * b;
    double wald = 0.0;
    int rank = 0;
    for (Eigen::Index i = 0; i < m; ++i) {
        if (lam[i] > 1e-12 * top) {
            wald += proj[i] * proj[i] / lam[i];
            ++rank;
        }
    }
    report.wald = wald;
    report.df = rank;
    report.p_value = chi_square_upper(wald, rank);
    return report;
}

}  // namespace mwb
