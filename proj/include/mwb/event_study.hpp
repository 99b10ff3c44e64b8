#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mwb/observation.hpp"

namespace mwb {

/// Saturated event-study layout: periods t = 1..n_periods, event at
/// `event_period`, coefficients for every relative period l != reference_rel
/// and every finite group e = -1..max_e, with group infinity as control.
struct EventStudyDesign {
    int n_periods = 12;
    int event_period = 7;
    int reference_rel = -1;
    int max_e = 3;

    int reference_period() const { return event_period + reference_rel; }
    int first_rel() const { return 1 - event_period; }
    int last_rel() const { return n_periods - event_period; }
    std::vector<int> finite_groups() const;
    /// Relative periods that carry a coefficient (reference omitted).
    std::vector<int> coefficient_rels() const;
    void validate() const;
};

/// Index map of the full parameter vector:
/// [intercept | alpha_e, finite e | lambda_t, t != ref | mu_{l,e}, l-major].
class ParamLayout {
  public:
    ParamLayout() = default;
    explicit ParamLayout(const EventStudyDesign& design);

    int size() const { return size_; }
    int intercept() const { return 0; }
    int alpha(int e) const;
    int lambda(int t) const;
    int mu(int l, int e) const;
    int n_mu() const { return n_rels_ * n_groups_; }
    int first_mu() const { return 1 + n_groups_ + (n_periods_ - 1); }
    std::string name(int index) const;

  private:
    int n_groups_ = 0;
    int n_periods_ = 0;
    int n_rels_ = 0;
    int size_ = 0;
    EventStudyDesign design_;
};

enum class FitMethod { CellMeans, DummyOls };
enum class VcovKind { CR0, CR1 };

const char* to_string(FitMethod m);
FitMethod parse_fit_method(std::string_view text);
const char* to_string(VcovKind k);
VcovKind parse_vcov_kind(std::string_view text);

struct FitOptions {
    FitMethod method = FitMethod::CellMeans;
    VcovKind vcov = VcovKind::CR1;
    /// Weighted least squares with Observation::weight.
    bool weighted = false;
    /// Skip the covariance (bootstrap replicates only need point estimates).
    bool compute_vcov = true;
};

struct EventStudyFit {
    EventStudyDesign design;
    ParamLayout layout;
    Eigen::VectorXd params;
    /// Cluster-robust covariance of `params`.
    Eigen::MatrixXd vcov;
    /// Mean outcome per cell; rows are e = -1..max_e then infinity, columns t = 1..T.
    Eigen::MatrixXd cell_means;
    Eigen::MatrixXi cell_counts;
    /// Aligned with the input observations.
    std::vector<double> residuals;
    std::int64_t n_obs = 0;
    std::int64_t n_clusters = 0;

    /// Zero at the reference period.
    double mu(int l, int e) const;
    double mu_se(int l, int e) const;
    double alpha(int e) const { return params[layout.alpha(e)]; }
    double lambda(int t) const;
    double intercept() const { return params[0]; }
    Eigen::VectorXd mu_vector() const;
    Eigen::MatrixXd mu_vcov() const;
    double cell_mean(int row, int t) const { return cell_means(row, t - 1); }
};

/// Fits the saturated regression. CellMeans forms the DID contrasts of cell
/// means directly; DummyOls solves the dummy-variable least-squares problem
/// with a column-pivoted QR. Both return the same coefficients and the same
/// clustered covariance.
EventStudyFit fit_event_study(std::span<const Observation> observations,
                              const EventStudyDesign& design, const FitOptions& options = {});

/// Cluster-robust sandwich (X'X)^-1 (sum_g X_g' e_g e_g' X_g) (X'X)^-1, with the
/// CR1 factor G/(G-1) (n-1)/(n-k). `bread` may pass a precomputed (X'X)^-1.
Eigen::MatrixXd cluster_vcov(const Eigen::MatrixXd& X, std::span<const double> residuals,
                             std::span<const std::int64_t> clusters, VcovKind kind = VcovKind::CR1,
                             const Eigen::MatrixXd* bread = nullptr);

/// Re-clusters an existing fit on a different assignment (one id per
/// observation, aligned with the observations that produced the fit).
Eigen::MatrixXd cluster_vcov(const EventStudyFit& fit, std::span<const Observation> observations,
                             std::span<const std::int64_t> clusters,
                             VcovKind kind = VcovKind::CR1, bool weighted = false);

struct PretrendCell {
    int e = 0;
    int l = 0;
    double estimate = 0.0;
    double se = 0.0;
    double z = 0.0;
    double p_value = 1.0;
};

struct PretrendReport {
    std::vector<PretrendCell> cells;
    double wald = 0.0;
    int df = 0;
    double p_value = 1.0;
};

/// Per-cell z statistics and the joint Wald test over every pre-period
/// coefficient (l < 0, l != reference).
PretrendReport pretrend_report(const EventStudyFit& fit);

/// Two-sided normal p-value.
double normal_two_sided_p(double z);
/// Upper-tail chi-square probability.
double chi_square_upper(double statistic, int df);
double normal_quantile(double p);

}  // namespace mwb
