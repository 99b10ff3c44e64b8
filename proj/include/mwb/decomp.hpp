#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mwb/event_study.hpp"
#include "mwb/observation.hpp"
#include "mwb/types.hpp"

namespace mwb {

struct Estimate {
    double value = 0.0;
    double se = 0.0;
};

/// Missing/excess-jobs decomposition of the post-event coefficients.
struct DecompositionResult {
    std::vector<int> post_rels;  // l = 0..L
    std::vector<Estimate> delta_a_l;
    std::vector<Estimate> delta_b_l;
    std::vector<Estimate> delta_e_l;
    Estimate delta_a;
    Estimate delta_b;
    Estimate delta_e;
    /// Post-period averages per group; the e = -1 entry equals delta_b.
    std::vector<int> groups;
    std::vector<Estimate> delta_a_e;
    /// False for amenity decompositions, which cover e >= 0 only.
    bool includes_below = true;

    const Estimate& group_effect(int e) const;
};

struct MuWeight {
    int l = 0;
    int e = 0;
    double weight = 0.0;
};

/// sum w * mu_{l,e} with standard error sqrt(c' V c) from the fit's vcov.
Estimate linear_combination(const EventStudyFit& fit, std::span<const MuWeight> weights);

struct AggregateOptions {
    bool include_below = true;
};

DecompositionResult aggregate(const EventStudyFit& fit, const AggregateOptions& options = {});

enum class BaselineWeighting { Postings, Unweighted };
enum class WageValuation { UpperEdge, Midpoint };

/// Pre-event quantities of the affected (e = -1) group, in the same per-bin
/// units as the event-study coefficients.
struct AffectedBaseline {
    double pct_mw_change = 0.0;  // average of new/old - 1
    double b_bar = 0.0;          // employment share below the new MW at l = -1
    double wb_bar = 0.0;         // wage bill of that group
    double mean_new_mw = 0.0;
    int group_width = 100;
};

/// Computed from employment-share observations at the reference period.
AffectedBaseline affected_baseline(std::span<const Observation> observations,
                                   const MinWageSchedule& schedule,
                                   const EventStudyDesign& design,
                                   BaselineWeighting weighting = BaselineWeighting::Postings,
                                   int group_width = 100);

struct ElasticityIdentities {
    std::optional<double> elasticity_mw;
    std::optional<double> pct_affected_employment;
    std::optional<double> own_wage_elasticity;
    std::string absent_reason;
};

/// elasticity_mw = de / %dMW, affected employment = de / b_bar,
/// own-wage = affected employment / %dw.
ElasticityIdentities elasticity_identities(double delta_e, double pct_mw_change, double b_bar,
                                           std::optional<double> pct_affected_wage);

struct ElasticityValues {
    double delta_b = 0.0;
    double delta_a = 0.0;
    double delta_e = 0.0;
    AffectedBaseline baseline;
    std::optional<double> w_bar_pre;
    double delta_wb = 0.0;
    std::optional<double> post_wage;
    std::optional<double> pct_affected_wage;
    ElasticityIdentities identities;
};

ElasticityValues compute_elasticities(const DecompositionResult& decomposition,
                                      const AffectedBaseline& baseline,
                                      WageValuation valuation = WageValuation::UpperEdge);

/// One row of the Table-A1-shaped output.
struct ElasticityQuantity {
    std::string name;
    std::optional<double> estimate;
    std::optional<double> se_delta;
    std::optional<double> se_bootstrap;
    std::string note;
};

/// Rows in table order: missing jobs, excess jobs, affected wages, affected
/// employment, elasticity w.r.t. MW, own-wage elasticity, jobs below new MW,
/// MW change.
std::vector<ElasticityQuantity> elasticity_table(const ElasticityValues& values);

/// Flattens the table estimates (NaN when absent) for resampling.
std::vector<double> elasticity_vector(const ElasticityValues& values);

/// Delta-method standard errors of the table quantities, holding the
/// baseline fixed. Entries without a linearization are nullopt.
std::vector<std::optional<double>> elasticity_delta_ses(const EventStudyFit& fit,
                                                        const ElasticityValues& values,
                                                        WageValuation valuation =
                                                            WageValuation::UpperEdge);

using BootstrapStatistic =
    std::function<std::vector<double>(const EventStudyFit&, std::span<const Observation>)>;

struct BootstrapOptions {
    int replicates = 999;
    std::uint64_t seed = 20231001;
    int jobs = 1;
    int max_redraws = 1000;
    double level = 0.95;
    FitOptions fit;
};

struct BootstrapResult {
    std::vector<double> estimate;  // statistic on the original sample
    std::vector<double> se;
    std::vector<double> ci_low;
    std::vector<double> ci_high;
    Eigen::MatrixXd replicates;  // replicates x statistics
    std::int64_t redraws = 0;
};

/// Wage-bin cluster bootstrap: resample whole clusters with replacement,
/// refit, recompute. Replicates run in parallel on per-replicate substreams,
/// so results do not depend on `jobs`.
BootstrapResult bootstrap_inference(std::span<const Observation> observations,
                                    const EventStudyDesign& design,
                                    const BootstrapStatistic& statistic,
                                    const BootstrapOptions& options = {});

/// Sequential reference with identical output.
BootstrapResult bootstrap_inference_serial(std::span<const Observation> observations,
                                           const EventStudyDesign& design,
                                           const BootstrapStatistic& statistic,
                                           const BootstrapOptions& options = {});

/// Statistic for the elasticity battery: refit, aggregate, rebuild the
/// baseline from the resampled rows.
BootstrapStatistic elasticity_statistic(const MinWageSchedule& schedule,
                                        BaselineWeighting weighting, WageValuation valuation,
                                        int group_width = 100);

}  // namespace mwb
