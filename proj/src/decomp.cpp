#include "mwb/decomp.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <random>

#include "mwb/rng.hpp"

namespace mwb {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Eigen::VectorXd full_vector(const EventStudyFit& fit, std::span<const MuWeight> weights) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(fit.layout.size());
    for (const auto& w : weights) {
        if (w.l == fit.design.reference_rel) continue;
        c[fit.layout.mu(w.l, w.e)] += w.weight;
    }
    return c;
}

std::vector<int> post_rels_of(const EventStudyDesign& d) {
    if (d.reference_rel >= 0)
        throw EstimationError("reference period lies after the event; post-period "
                              "coefficients are missing");
    std::vector<int> out;
    for (int l = 0; l <= d.last_rel(); ++l) out.push_back(l);
    if (out.empty()) throw EstimationError("no post-event periods in the design");
    return out;
}

}  // namespace

const Estimate& DecompositionResult::group_effect(int e) const {
    for (std::size_t i = 0; i < groups.size(); ++i)
        if (groups[i] == e) return delta_a_e[i];
    throw std::out_of_range("no decomposition entry for e=" + std::to_string(e));
}

Estimate linear_combination(const EventStudyFit& fit, std::span<const MuWeight> weights) {
    const Eigen::VectorXd c = full_vector(fit, weights);
    Estimate out;
    out.value = c.dot(fit.params);
    if (fit.vcov.size() != 0) out.se = std::sqrt(std::max(0.0, c.dot(fit.vcov * c)));
    return out;
}

DecompositionResult aggregate(const EventStudyFit& fit, const AggregateOptions& options) {
    const auto& d = fit.design;
    DecompositionResult r;
    r.post_rels = post_rels_of(d);
    r.includes_below = options.include_below;
    const double inv_L = 1.0 / static_cast<double>(r.post_rels.size());
    const int first_e = options.include_below ? -1 : 0;

    std::vector<MuWeight> all_a, all_b, all_e;
    for (int l : r.post_rels) {
        std::vector<MuWeight> a, b;
        for (int e = 0; e <= d.max_e; ++e) a.push_back({l, e, 1.0});
        if (options.include_below) b.push_back({l, -1, 1.0});
        std::vector<MuWeight> e_l = a;
        e_l.insert(e_l.end(), b.begin(), b.end());
        r.delta_a_l.push_back(linear_combination(fit, a));
        r.delta_b_l.push_back(options.include_below ? linear_combination(fit, b) : Estimate{});
        r.delta_e_l.push_back(linear_combination(fit, e_l));
        for (auto w : a) all_a.push_back({w.l, w.e, inv_L});
        for (auto w : b) all_b.push_back({w.l, w.e, inv_L});
    }
    all_e = all_a;
    all_e.insert(all_e.end(), all_b.begin(), all_b.end());
    r.delta_a = linear_combination(fit, all_a);
    r.delta_b = options.include_below ? linear_combination(fit, all_b) : Estimate{};
    r.delta_e = linear_combination(fit, all_e);

    for (int e = first_e; e <= d.max_e; ++e) {
        std::vector<MuWeight> w;
        for (int l : r.post_rels) w.push_back({l, e, inv_L});
        r.groups.push_back(e);
        r.delta_a_e.push_back(linear_combination(fit, w));
    }
    return r;
}

AffectedBaseline affected_baseline(std::span<const Observation> observations,
                                   const MinWageSchedule& schedule,
                                   const EventStudyDesign& design, BaselineWeighting weighting,
                                   int group_width) {
    struct Acc {
        double y = 0.0, wb = 0.0, postings = 0.0;
        int n = 0;
    };
    const int ref = design.reference_period();
    std::map<int, Acc> by_pref;
    for (const auto& o : observations) {
        if (o.period != ref || !o.group.is_finite() || o.group.value() != -1) continue;
        auto& a = by_pref[o.prefecture_id];
        a.y += o.y;
        a.wb += o.wage_bill;
        a.postings = o.postings;
        ++a.n;
    }
    AffectedBaseline out;
    out.group_width = group_width;
    double wsum = 0.0;
    for (const auto& [p, a] : by_pref) {
        const auto& entry = schedule.at(p);
        const double w = weighting == BaselineWeighting::Postings ? a.postings : 1.0;
        wsum += w;
        out.b_bar += w * a.y / a.n;
        out.wb_bar += w * a.wb / a.n;
        out.mean_new_mw += w * entry.new_mw;
        out.pct_mw_change += w * (static_cast<double>(entry.new_mw) / entry.old_mw - 1.0);
    }
    if (wsum > 0.0) {
        out.b_bar /= wsum;
        out.wb_bar /= wsum;
        out.mean_new_mw /= wsum;
        out.pct_mw_change /= wsum;
    }
    return out;
}

ElasticityIdentities elasticity_identities(double delta_e, double pct_mw_change, double b_bar,
                                           std::optional<double> pct_affected_wage) {
    ElasticityIdentities out;
    auto note = [&](const char* why) {
        if (!out.absent_reason.empty()) out.absent_reason += "; ";
        out.absent_reason += why;
    };
    if (pct_mw_change != 0.0)
        out.elasticity_mw = delta_e / pct_mw_change;
    else
        note("minimum wage did not change");
    if (b_bar > 0.0)
        out.pct_affected_employment = delta_e / b_bar;
    else
        note("no employment below the new minimum wage at l=-1");
    if (!pct_affected_wage)
        note("affected wage undefined");
    else if (*pct_affected_wage == 0.0)
        note("affected wage did not change");
    else if (out.pct_affected_employment)
        out.own_wage_elasticity = *out.pct_affected_employment / *pct_affected_wage;
    return out;
}

namespace {

double group_wage_value(const AffectedBaseline& b, int e, WageValuation valuation) {
    const double lower = b.mean_new_mw + b.group_width * e;
    return valuation == WageValuation::UpperEdge ? lower + b.group_width - 1
                                                 : lower + 0.5 * (b.group_width - 1);
}

}  // namespace

ElasticityValues compute_elasticities(const DecompositionResult& dec,
                                      const AffectedBaseline& baseline,
                                      WageValuation valuation) {
    if (!dec.includes_below)
        throw EstimationError("elasticities need the e=-1 group in the decomposition");
    ElasticityValues v;
    v.delta_b = dec.delta_b.value;
    v.delta_a = dec.delta_a.value;
    v.delta_e = dec.delta_e.value;
    v.baseline = baseline;
    for (std::size_t i = 0; i < dec.groups.size(); ++i)
        v.delta_wb += group_wage_value(baseline, dec.groups[i], valuation) * dec.delta_a_e[i].value;
    if (baseline.b_bar > 0.0) {
        v.w_bar_pre = baseline.wb_bar / baseline.b_bar;
        const double denom = baseline.b_bar + v.delta_e;
        if (denom > 0.0 && *v.w_bar_pre > 0.0) {
            v.post_wage = (baseline.wb_bar + v.delta_wb) / denom;
            v.pct_affected_wage = *v.post_wage / *v.w_bar_pre - 1.0;
        }
    }
    v.identities =
        elasticity_identities(v.delta_e, baseline.pct_mw_change, baseline.b_bar, v.pct_affected_wage);
    return v;
}

std::vector<ElasticityQuantity> elasticity_table(const ElasticityValues& v) {
    const auto& id = v.identities;
    std::vector<ElasticityQuantity> rows = {
        {"missing_jobs_below_new_mw", v.delta_b, {}, {}, {}},
        {"excess_jobs_above_new_mw", v.delta_a, {}, {}, {}},
        {"affected_wages", v.pct_affected_wage, {}, {}, {}},
        {"affected_employment", id.pct_affected_employment, {}, {}, {}},
        {"employment_elasticity_mw", id.elasticity_mw, {}, {}, {}},
        {"own_wage_elasticity", id.own_wage_elasticity, {}, {}, {}},
        {"jobs_below_new_mw", v.baseline.b_bar, {}, {}, {}},
        {"pct_mw_change", v.baseline.pct_mw_change, {}, {}, {}},
    };
    for (auto& r : rows)
        if (!r.estimate) r.note = id.absent_reason.empty() ? "undefined" : id.absent_reason;
    return rows;
}

std::vector<double> elasticity_vector(const ElasticityValues& values) {
    std::vector<double> out;
    for (const auto& q : elasticity_table(values)) out.push_back(q.estimate.value_or(kNaN));
    return out;
}

std::vector<std::optional<double>> elasticity_delta_ses(const EventStudyFit& fit,
                                                        const ElasticityValues& v,
                                                        WageValuation valuation) {
    const auto& d = fit.design;
    const auto post = post_rels_of(d);
    const double inv_L = 1.0 / static_cast<double>(post.size());
    const int k = fit.layout.size();
    Eigen::VectorXd g_a = Eigen::VectorXd::Zero(k), g_b = g_a, g_wb = g_a;
    for (int l : post)
        for (int e = -1; e <= d.max_e; ++e) {
            const int i = fit.layout.mu(l, e);
            (e == -1 ? g_b : g_a)[i] += inv_L;
            g_wb[i] += inv_L * group_wage_value(v.baseline, e, valuation);
        }
    const Eigen::VectorXd g_e = g_a + g_b;
    auto se = [&](const Eigen::VectorXd& g) -> std::optional<double> {
        if (fit.vcov.size() == 0) return std::nullopt;
        return std::sqrt(std::max(0.0, g.dot(fit.vcov * g)));
    };

    std::vector<std::optional<double>> out(8);
    out[0] = se(g_b);
    out[1] = se(g_a);
    const double b_bar = v.baseline.b_bar;
    std::optional<Eigen::VectorXd> g_p;
    if (v.pct_affected_wage && v.w_bar_pre) {
        const double num = b_bar > 0 ? v.baseline.wb_bar + v.delta_wb : 0.0;
        const double den = b_bar + v.delta_e;
        g_p = (g_wb * den - g_e * num) / (den * den * *v.w_bar_pre);
        out[2] = se(*g_p);
    }
    if (b_bar > 0.0) out[3] = se(g_e / b_bar);
    if (v.baseline.pct_mw_change != 0.0) out[4] = se(g_e / v.baseline.pct_mw_change);
    if (v.identities.own_wage_elasticity && g_p) {
        const double p = *v.pct_affected_wage;
        out[5] = se((g_e * p - *g_p * v.delta_e) / (b_bar * p * p));
    }
    return out;
}

BootstrapStatistic elasticity_statistic(const MinWageSchedule& schedule,
                                        BaselineWeighting weighting, WageValuation valuation,
                                        int group_width) {
    return [schedule, weighting, valuation, group_width](const EventStudyFit& fit,
                                                         std::span<const Observation> obs) {
        const auto dec = aggregate(fit);
        const auto base = affected_baseline(obs, schedule, fit.design, weighting, group_width);
        return elasticity_vector(compute_elasticities(dec, base, valuation));
    };
}

namespace {

struct ClusterIndex {
    std::vector<std::vector<std::size_t>> members;
};

ClusterIndex index_clusters(std::span<const Observation> obs) {
    std::map<std::int64_t, std::vector<std::size_t>> by_id;
    for (std::size_t i = 0; i < obs.size(); ++i) by_id[obs[i].cluster].push_back(i);
    ClusterIndex idx;
    idx.members.reserve(by_id.size());
    for (auto& [id, m] : by_id) idx.members.push_back(std::move(m));
    return idx;
}

struct Replicate {
    std::vector<double> values;
    int redraws = 0;
};

Replicate run_replicate(std::span<const Observation> obs, const ClusterIndex& idx,
                        const EventStudyDesign& design, const BootstrapStatistic& statistic,
                        const BootstrapOptions& options, int b) {
    FitOptions fit_options = options.fit;
    fit_options.compute_vcov = false;
    const auto G = idx.members.size();
    std::vector<Observation> sample;
    sample.reserve(obs.size());
    for (int attempt = 0; attempt <= options.max_redraws; ++attempt) {
        std::mt19937_64 rng(substream_seed(options.seed, {static_cast<std::uint64_t>(b),
                                                          static_cast<std::uint64_t>(attempt)}));
        std::uniform_int_distribution<std::size_t> pick(0, G - 1);
        sample.clear();
        for (std::size_t g = 0; g < G; ++g) {
            for (auto i : idx.members[pick(rng)]) {
                sample.push_back(obs[i]);
                sample.back().cluster = static_cast<std::int64_t>(g);
            }
        }
        try {
            const auto fit = fit_event_study(sample, design, fit_options);
            return {statistic(fit, sample), attempt};
        } catch (const EstimationError&) {
            // Empty required cell in this draw.
        }
    }
    throw EstimationError("bootstrap replicate " + std::to_string(b) + " failed after " +
                          std::to_string(options.max_redraws) + " redraws");
}

void check_bootstrap(std::span<const Observation> obs, const ClusterIndex& idx,
                     const BootstrapOptions& options) {
    if (options.replicates < 99) throw ConfigError("bootstrap needs at least 99 replicates");
    if (idx.members.size() < 2) throw EstimationError("bootstrap needs at least two clusters");
    if (obs.empty()) throw EstimationError("bootstrap on an empty sample");
}

double quantile7(std::vector<double>& sorted, double p) {
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

BootstrapResult summarize(std::vector<Replicate>& reps, std::vector<double> estimate,
                          double level) {
    BootstrapResult out;
    out.estimate = std::move(estimate);
    const auto m = out.estimate.size();
    const auto B = reps.size();
    out.replicates.resize(static_cast<Eigen::Index>(B), static_cast<Eigen::Index>(m));
    for (std::size_t b = 0; b < B; ++b) {
        if (reps[b].values.size() != m)
            throw std::logic_error("bootstrap statistic changed dimension across replicates");
        out.redraws += reps[b].redraws;
        for (std::size_t j = 0; j < m; ++j)
            out.replicates(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(j)) =
                reps[b].values[j];
    }
    const double alpha = 1.0 - level;
    for (std::size_t j = 0; j < m; ++j) {
        std::vector<double> v;
        for (std::size_t b = 0; b < B; ++b) {
            const double x = reps[b].values[j];
            if (std::isfinite(x)) v.push_back(x);
        }
        if (v.size() < 2) {
            out.se.push_back(kNaN);
            out.ci_low.push_back(kNaN);
            out.ci_high.push_back(kNaN);
            continue;
        }
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        out.se.push_back(std::sqrt(ss / static_cast<double>(v.size() - 1)));
        std::sort(v.begin(), v.end());
        out.ci_low.push_back(quantile7(v, 0.5 * alpha));
        out.ci_high.push_back(quantile7(v, 1.0 - 0.5 * alpha));
    }
    return out;
}

std::vector<double> full_sample_statistic(std::span<const Observation> obs,
                                          const EventStudyDesign& design,
                                          const BootstrapStatistic& statistic,
                                          const BootstrapOptions& options) {
    FitOptions fo = options.fit;
    fo.compute_vcov = false;
    return statistic(fit_event_study(obs, design, fo), obs);
}

}  // namespace

BootstrapResult bootstrap_inference(std::span<const Observation> observations,
                                    const EventStudyDesign& design,
                                    const BootstrapStatistic& statistic,
                                    const BootstrapOptions& options) {
    const auto idx = index_clusters(observations);
    check_bootstrap(observations, idx, options);
    auto estimate = full_sample_statistic(observations, design, statistic, options);

    std::vector<Replicate> reps(static_cast<std::size_t>(options.replicates));
    std::exception_ptr failure;
    int failed_at = options.replicates;
#pragma omp parallel for num_threads(std::max(1, options.jobs)) schedule(dynamic)
    for (int b = 0; b < options.replicates; ++b) {
        try {
            reps[static_cast<std::size_t>(b)] =
                run_replicate(observations, idx, design, statistic, options, b);
        } catch (...) {
#pragma omp critical(mwb_bootstrap_failure)
            if (b < failed_at) {
                failed_at = b;
                failure = std::current_exception();
            }
        }
    }
    if (failure) std::rethrow_exception(failure);
    return summarize(reps, std::move(estimate), options.level);
}

BootstrapResult bootstrap_inference_serial(std::span<const Observation> observations,
                                           const EventStudyDesign& design,
                                           const BootstrapStatistic& statistic,
                                           const BootstrapOptions& options) {
    const auto idx = index_clusters(observations);
    check_bootstrap(observations, idx, options);
    auto estimate = full_sample_statistic(observations, design, statistic, options);
    std::vector<Replicate> reps;
    reps.reserve(static_cast<std::size_t>(options.replicates));
    for (int b = 0; b < options.replicates; ++b)
        reps.push_back(run_replicate(observations, idx, design, statistic, options, b));
    return summarize(reps, std::move(estimate), options.level);
}

}  // namespace mwb
