// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mwb/cli.hpp"
#include "mwb/decomp.hpp"
#include "mwb/dgp.hpp"
#include "mwb/event_study.hpp"
#include "mwb/hetero.hpp"
#include "mwb/panel.hpp"
#include "support.hpp"

using namespace mwb;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::vector<std::string> notes;

    void check(bool ok, const std::string& what) {
        pass = pass && ok;
        notes.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
    }
};

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::string fmt(const char* f, double a, double b) {
    char buf[96];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

std::string fmt(const char* f, double a, double b, double c) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

int failures = 0;

void criterion(int id, const std::string& name, double budget_s,
               const std::function<void(Outcome&)>& body) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(o);
    } catch (const std::exception& e) {
        o.check(false, std::string("exception: ") + e.what());
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (budget_s > 0) o.check(secs < budget_s, fmt("runtime %.2f s < %.0f s", secs, budget_s));
    for (const auto& n : o.notes) std::printf("      %s\n", n.c_str());
    std::printf("%s  criterion %d: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failures;
}

// 1 -------------------------------------------------------------------------

void identities(Outcome& o) {
    const double db = -0.03, da = 0.012, pct_mw = 0.047, b_bar = 0.068, pct_w = 0.366;
    const auto id = elasticity_identities(db + da, pct_mw, b_bar, pct_w);
    o.check(id.elasticity_mw && std::abs(*id.elasticity_mw - -0.387) <= 0.01,
            fmt("elasticity wrt MW %.4f within 0.01 of -0.387", id.elasticity_mw.value_or(NAN)));
    o.check(id.pct_affected_employment && std::abs(*id.pct_affected_employment - -0.268) <= 0.01,
            fmt("affected employment %.4f within 0.01 of -0.268",
                id.pct_affected_employment.value_or(NAN)));
    o.check(id.own_wage_elasticity && std::abs(*id.own_wage_elasticity - -0.732) <= 0.005,
            fmt("own-wage elasticity %.4f within 0.005 of -0.732",
                id.own_wage_elasticity.value_or(NAN)));
}

// 2 -------------------------------------------------------------------------

void saturation(Outcome& o) {
    std::mt19937_64 rng(20240601);
    double worst_params = 0.0, worst_vcov = 0.0;
    for (int rep = 0; rep < 1000; ++rep) {
        EventStudyDesign d;
        d.n_periods = std::uniform_int_distribution<int>(3, 8)(rng);
        d.event_period = std::uniform_int_distribution<int>(2, d.n_periods)(rng);
        d.max_e = std::uniform_int_distribution<int>(0, 3)(rng);
        const int bins = std::uniform_int_distribution<int>(1, 3)(rng);
        const int prefs = std::uniform_int_distribution<int>(2, 3)(rng);
        const auto obs = test::random_observations(rng, d, bins, prefs);
        FitOptions f;
        f.weighted = rep % 2 == 1;
        f.method = FitMethod::CellMeans;
        const auto cm = fit_event_study(obs, d, f);
        f.method = FitMethod::DummyOls;
        const auto ols = fit_event_study(obs, d, f);
        worst_params = std::max(worst_params, test::max_rel_diff(cm.params, ols.params));
        worst_vcov = std::max(worst_vcov, test::max_rel_diff(cm.vcov, ols.vcov));
    }
    o.check(worst_params <= 1e-10, fmt("coefficient grids agree, worst rel diff %.2e", worst_params));
    o.check(worst_vcov <= 1e-10, fmt("clustered vcov agrees, worst rel diff %.2e", worst_vcov));
}

// 3 -------------------------------------------------------------------------

void recovery(Outcome& o) {
    const auto cfg = paper_scenario(20231001, 1.0e6);
    const auto data = generate(cfg);
    o.check(data.records.size() > 950000,
            fmt("%.0f contracts over %.0f prefectures", static_cast<double>(data.records.size()),
                static_cast<double>(cfg.prefectures.size())));
    const StudyWindow w;
    const auto panel = build_panel(data.records, data.schedule, w);
    const auto obs = make_observations(panel);
    const auto fit = fit_event_study(obs, design_for(w, {}));
    const auto dec = aggregate(fit);
    o.check(std::abs(dec.delta_b.value - -0.030) <= 0.003,
            fmt("delta_b %.5f (se %.5f), truth -0.030", dec.delta_b.value, dec.delta_b.se));
    o.check(std::abs(dec.delta_a.value - 0.012) <= 0.003,
            fmt("delta_a %.5f (se %.5f), truth 0.012", dec.delta_a.value, dec.delta_a.se));

    const auto pre = pretrend_report(fit);
    double max_z = 0.0;
    for (const auto& c : pre.cells) max_z = std::max(max_z, std::abs(c.z));
    // Monte-Carlo noise: joint Wald at the 0.1% level. Max |z| is informative only;
    // every coefficient shares the reference month, so the z's are correlated.
    o.check(pre.p_value > 0.001,
            fmt("pre-period coefficients: Wald p %.3f > 0.001 (max |z| %.2f)", pre.p_value, max_z));

    // The first band of the control tail, estimated as if it were exposed.
    BinningRules wide;
    wide.max_e = 4;
    wide.spill_offset = 500;
    PanelOptions po;
    po.rules = wide;
    const auto wide_panel = build_panel(data.records, data.schedule, w, po);
    const auto wide_obs = make_observations(wide_panel);
    const auto wide_fit = fit_event_study(wide_obs, design_for(w, wide));
    double tail_z = 0.0;
    std::vector<int> idx;
    for (int l : wide_fit.design.coefficient_rels()) {
        tail_z = std::max(tail_z, std::abs(wide_fit.mu(l, 4) / wide_fit.mu_se(l, 4)));
        idx.push_back(wide_fit.layout.mu(l, 4));
    }
    Eigen::VectorXd b(static_cast<Eigen::Index>(idx.size()));
    Eigen::MatrixXd V(b.size(), b.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        b(static_cast<Eigen::Index>(i)) = wide_fit.params(idx[i]);
        for (std::size_t j = 0; j < idx.size(); ++j)
            V(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = wide_fit.vcov(idx[i], idx[j]);
    }
    const double wald = b.dot(V.ldlt().solve(b));
    const double p = chi_square_upper(wald, static_cast<int>(b.size()));
    o.check(p > 0.001,
            fmt("upper-tail band [MW+400, MW+500): Wald p %.3f > 0.001 (max |z| %.2f)", p, tail_z));
}

// 4 -------------------------------------------------------------------------

void placebo(Outcome& o) {
    const int seeds = 1000;
    const StudyWindow w;
    const auto design = design_for(w, {});
    const double z975 = normal_quantile(0.975);
    std::int64_t covered = 0, cells = 0;
    int rejections = 0;
    for (int s = 1; s <= seeds; ++s) {
        const auto cfg = placebo_scenario(static_cast<std::uint64_t>(s) * 7919u, 10, 300);
        const auto data = generate(cfg);
        const auto panel = build_panel(data.records, data.schedule, w);
        const auto fit = fit_event_study(make_observations(panel), design);
        for (int l : design.coefficient_rels())
            for (int e : design.finite_groups()) {
                ++cells;
                if (std::abs(fit.mu(l, e)) <= z975 * fit.mu_se(l, e)) ++covered;
            }
        if (pretrend_report(fit).p_value < 0.05) ++rejections;
    }
    const double coverage = static_cast<double>(covered) / static_cast<double>(cells);
    const double reject = static_cast<double>(rejections) / seeds;
    o.check(coverage >= 0.93 && coverage <= 0.97,
            fmt("coverage of 0 by 95%% CIs: %.4f over %.0f cells", coverage, static_cast<double>(cells)));
    o.check(reject >= 0.03 && reject <= 0.08,
            fmt("pre-trend Wald rejection rate %.4f over %.0f seeds", reject, seeds));
}

// 5 -------------------------------------------------------------------------

/// Plain-loop CR1 sandwich, no matrix algebra beyond the inverse of X'X.
Eigen::MatrixXd literal_cr1(const Eigen::MatrixXd& X, const std::vector<double>& e,
                            const std::vector<std::int64_t>& g) {
    const int n = static_cast<int>(X.rows()), k = static_cast<int>(X.cols());
    Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(k, k);
    for (int i = 0; i < n; ++i)
        for (int a = 0; a < k; ++a)
            for (int b = 0; b < k; ++b) xtx(a, b) += X(i, a) * X(i, b);
    const Eigen::MatrixXd bread = xtx.inverse();
    std::map<std::int64_t, std::vector<double>> score;
    for (int i = 0; i < n; ++i) {
        auto& s = score[g[static_cast<std::size_t>(i)]];
        s.resize(static_cast<std::size_t>(k), 0.0);
        for (int a = 0; a < k; ++a) s[static_cast<std::size_t>(a)] += X(i, a) * e[static_cast<std::size_t>(i)];
    }
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
    for (const auto& [id, s] : score)
        for (int a = 0; a < k; ++a)
            for (int b = 0; b < k; ++b)
                meat(a, b) += s[static_cast<std::size_t>(a)] * s[static_cast<std::size_t>(b)];
    const double G = static_cast<double>(score.size());
    const double factor = G / (G - 1.0) * (n - 1.0) / (n - static_cast<double>(k));
    return factor * bread * meat * bread;
}

void vcov_oracle(Outcome& o) {
    EventStudyDesign d;
    d.n_periods = 3;
    d.event_period = 2;
    d.max_e = 0;
    std::mt19937_64 rng(5);
    std::normal_distribution<double> noise;
    std::vector<Observation> obs;
    const ExposureGroup groups[] = {ExposureGroup::finite(-1), ExposureGroup::finite(-1),
                                    ExposureGroup::finite(-1), ExposureGroup::finite(0),
                                    ExposureGroup::finite(0),  ExposureGroup::finite(0),
                                    ExposureGroup::infinity(), ExposureGroup::infinity(),
                                    ExposureGroup::infinity(), ExposureGroup::infinity()};
    for (int unit = 0; unit < 10; ++unit)
        for (int t = 1; t <= 3; ++t) {
            Observation ob;
            ob.cluster = unit;
            ob.prefecture_id = 1 + unit % 2;
            ob.group = groups[unit];
            ob.period = t;
            ob.y = noise(rng);
            obs.push_back(ob);
        }
    o.check(obs.size() == 30, "30 observations, 10 clusters");
    const Eigen::MatrixXd X = test::dummy_design(obs, d);
    Eigen::VectorXd y(static_cast<Eigen::Index>(obs.size()));
    std::vector<std::int64_t> g(obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) {
        y(static_cast<Eigen::Index>(i)) = obs[i].y;
        g[i] = obs[i].cluster;
    }
    const Eigen::VectorXd beta = (X.transpose() * X).ldlt().solve(X.transpose() * y);
    const Eigen::VectorXd resid = y - X * beta;
    const std::vector<double> e(resid.data(), resid.data() + resid.size());
    const Eigen::MatrixXd oracle = literal_cr1(X, e, g);
    for (auto method : {FitMethod::CellMeans, FitMethod::DummyOls}) {
        FitOptions f;
        f.method = method;
        const auto fit = fit_event_study(obs, d, f);
        const double diff = test::max_rel_diff(fit.vcov, oracle);
        o.check(diff <= 1e-10, std::string(to_string(method)) +
                                   fmt(" CR1 vs literal cluster loop, rel diff %.2e", diff));
    }
    const double generic = test::max_rel_diff(cluster_vcov(X, e, g), oracle);
    o.check(generic <= 1e-10, fmt("generic sandwich vs literal cluster loop, rel diff %.2e", generic));
}

// 6 -------------------------------------------------------------------------

void amenity(Outcome& o) {
    const auto cfg = make_scenario("amenity", 4242);
    const auto data = generate(cfg);
    const StudyWindow w;
    const auto panel = build_panel(data.records, data.schedule, w);
    for (auto kind : {OutcomeKind::ReimbAmount, OutcomeKind::ReimbProvision}) {
        ObservationOptions oo;
        oo.kind = kind;
        oo.normalizer = Normalizer::Matches;
        const auto fit = fit_event_study(make_observations(panel, oo), design_for(w, {}));
        AggregateOptions ao;
        ao.include_below = false;
        const auto dec = aggregate(fit, ao);
        const double za = dec.delta_a.value / dec.delta_a.se;
        const double ze = dec.delta_e.value / dec.delta_e.se;
        o.check(std::abs(za) <= 3.0 && std::abs(ze) <= 3.0,
                std::string(to_string(kind)) +
                    fmt(": delta_a %.4g (z %.2f), delta_e z %.2f", dec.delta_a.value, za, ze));
    }
}

// 7 -------------------------------------------------------------------------

void heterogeneity(Outcome& o) {
    const StudyWindow w;
    {
        const auto cfg = bite_scenario(31);
        const auto data = generate(cfg);
        const auto strata = run_stratified(data.records, data.schedule, w, StratumDimension::Prefecture);
        const auto kaitz = kaitz_index(data.records, data.schedule, w);
        const auto pts = kaitz_points(strata, kaitz);
        const int n_bins = std::min<int>(10, static_cast<int>(pts.size()));
        const auto bins = binned_scatter(pts, n_bins);
        std::vector<double> x, y;
        for (const auto& b : bins) {
            x.push_back(b.center);
            y.push_back(b.delta_e);
        }
        const double slope = ols_slope(x, y);
        o.check(slope < 0.0, fmt("bite: binned slope of delta_e on Kaitz %.4f over %.0f prefectures",
                                 slope, static_cast<double>(pts.size())));
    }
    {
        const auto cfg = occupation_scenario(32);
        const auto data = generate(cfg);
        const auto strata = run_stratified(data.records, data.schedule, w, StratumDimension::Occupation);
        std::vector<std::pair<double, int>> est, truth;
        for (const auto& s : strata.strata) {
            est.push_back({s.decomposition.delta_b.value, s.code});
            const auto g = true_cell_means(cfg, {}, {std::nullopt, static_cast<Occupation>(s.code)});
            truth.push_back({g.delta_b, s.code});
        }
        std::sort(est.begin(), est.end());
        std::sort(truth.begin(), truth.end());
        bool same = est.size() == kOccupationCount;
        std::string order;
        for (std::size_t i = 0; i < est.size(); ++i) {
            same = same && est[i].second == truth[i].second;
            order += std::string(i ? " < " : "") + std::string(to_string(static_cast<Occupation>(est[i].second)));
        }
        o.check(same, "occupation delta_b ordering matches the injected one: " + order);
    }
}

// 8 -------------------------------------------------------------------------

std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& f : fs::directory_iterator(dir)) {
        std::ifstream in(f.path(), std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        out[f.path().filename().string()] = ss.str();
    }
    return out;
}

void determinism(Outcome& o) {
    const auto root = fs::temp_directory_path() / "mwb_acceptance_determinism";
    fs::remove_all(root);
    const std::vector<std::vector<std::string>> commands = {
        {"simulate", "--total-contracts", "200000"},
        {"estimate"},
        {"estimate", "--inference", "delta", "--fit", "dummy_ols"},
        {"estimate", "--outcome", "reimb_provision", "--normalizer", "matches"},
        {"hetero", "--stratify", "prefecture"},
        {"hetero", "--stratify", "occupation"},
        {"hetero", "--stratify", "timeslot"},
        {"describe"},
        {"macro"},
        {"print-config"},
    };
    struct RunSpec {
        std::string name;
        std::string jobs;
    };
    const std::vector<RunSpec> runs = {{"a", "1"}, {"b", "1"}, {"c", "2"}, {"d", "4"}};
    std::map<std::string, std::vector<std::map<std::string, std::string>>> states;
    for (const auto& r : runs) {
        const auto dir = root / r.name;
        fs::create_directories(dir);
        for (std::size_t c = 0; c < commands.size(); ++c) {
            std::vector<std::string> args = {
                "--output-dir", dir.string(), "--contracts", (dir / "contracts.csv").string(),
                "--schedule", (dir / "schedule.csv").string(), "--users", (dir / "users.csv").string(),
                "--jobs", r.jobs, "--seed", "777"};
            args.insert(args.end(), commands[c].begin(), commands[c].end());
            std::ostringstream out, err;
            const int code = run_cli(args, out, err);
            auto snap = snapshot(dir);
            snap["<stdout>"] = out.str();
            snap["<exit>"] = std::to_string(code);
            // The printed config echoes the paths and --jobs; neutralize both.
            std::string& text = snap["<stdout>"];
            for (std::size_t p; (p = text.find(dir.string())) != std::string::npos;)
                text.replace(p, dir.string().size(), "<dir>");
            text = "\n" + text;
            if (auto p = text.find("\njobs="); p != std::string::npos)
                text.erase(p + 1, text.find('\n', p + 1) - p - 1);
            if (code != 0) o.check(false, commands[c][0] + " failed: " + err.str());
            states[r.name].push_back(std::move(snap));
        }
    }
    for (std::size_t c = 0; c < commands.size(); ++c) {
        std::string label;
        for (const auto& a : commands[c]) label += (label.empty() ? "" : " ") + a;
        bool same = true;
        for (const auto& r : runs) same = same && states[r.name][c] == states["a"][c];
        o.check(same, label + ": identical across reruns and --jobs 1/2/4 (" +
                          std::to_string(states["a"][c].size() - 2) + " files)");
    }
    fs::remove_all(root);
}

}  // namespace

int main() {
    std::printf("acceptance suite\n");
    criterion(1, "elasticity identities from the reported components", 1, identities);
    criterion(2, "saturation identity on 1000 random panels", 30, saturation);
    criterion(3, "oracle recovery on the calibrated generator", 120, recovery);
    criterion(4, "placebo coverage and pre-trend size", 600, placebo);
    criterion(5, "clustered covariance against a literal loop", 1, vcov_oracle);
    criterion(6, "amenity null", 120, amenity);
    criterion(7, "heterogeneity ordering", 300, heterogeneity);
    criterion(8, "determinism across reruns and worker counts", 0, determinism);
    std::printf("%d of 8 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
