#include <doctest.h>

#include <map>
#include <random>

#include "mwb/event_study.hpp"
#include "mwb/two_way_fe.hpp"
#include "support.hpp"

using namespace mwb;
using mwb::test::dummy_design;
using mwb::test::max_rel_diff;
using mwb::test::random_observations;

namespace {

EventStudyDesign small_design() {
    EventStudyDesign d;
    d.n_periods = 5;
    d.event_period = 3;
    d.max_e = 1;
    return d;
}

struct Oracle {
    Eigen::VectorXd beta;
    Eigen::MatrixXd vcov;
};

// Normal equations plus a literal loop over clusters.
Oracle ols_oracle(const std::vector<Observation>& obs, const EventStudyDesign& d, bool weighted,
                  bool cr1 = true) {
    const Eigen::MatrixXd X = dummy_design(obs, d);
    const auto n = X.rows();
    const auto k = X.cols();
    Eigen::VectorXd y(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        y[i] = obs[static_cast<std::size_t>(i)].y;
        w[i] = weighted ? obs[static_cast<std::size_t>(i)].weight : 1.0;
    }
    const Eigen::MatrixXd XtWX = X.transpose() * w.asDiagonal() * X;
    const Eigen::MatrixXd bread = XtWX.inverse();
    Oracle o;
    o.beta = bread * (X.transpose() * w.asDiagonal() * y);
    const Eigen::VectorXd e = y - X * o.beta;

    std::map<std::int64_t, Eigen::VectorXd> score;
    for (Eigen::Index i = 0; i < n; ++i) {
        auto [it, fresh] = score.try_emplace(obs[static_cast<std::size_t>(i)].cluster,
                                             Eigen::VectorXd::Zero(k));
        it->second += X.row(i).transpose() * (w[i] * e[i]);
    }
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
    for (const auto& [g, s] : score) meat += s * s.transpose();
    const double G = static_cast<double>(score.size());
    double factor = 1.0;
    if (cr1)
        factor = G / (G - 1.0) * (static_cast<double>(n) - 1.0) / static_cast<double>(n - k);
    o.vcov = bread * meat * bread * factor;
    return o;
}

}  // namespace

TEST_CASE("parameter layout orders intercept, groups, periods, interactions") {
    const auto d = small_design();
    const ParamLayout L(d);
    CHECK(L.size() == 1 + 3 + 4 + 4 * 3);
    CHECK(L.alpha(-1) == 1);
    CHECK(L.lambda(1) == 4);
    CHECK(L.lambda(3) == 5);  // reference t = 2 skipped
    CHECK(L.mu(-2, -1) == L.first_mu());
    CHECK(L.mu(0, -1) == L.first_mu() + 3);
    CHECK_THROWS_AS(L.mu(-1, 0), std::out_of_range);
    CHECK(L.name(L.mu(2, 1)) == "mu[l=2,e=1]");
}

TEST_CASE("both fit paths match the normal-equation oracle on random panels") {
    std::mt19937_64 rng(11);
    const auto d = small_design();
    for (int rep = 0; rep < 25; ++rep) {
        const int bins = 1 + rep % 3;
        const auto obs = random_observations(rng, d, bins, bins == 1 ? 2 : 1 + rep % 2);
        const bool weighted = rep % 2 == 1;
        const auto oracle = ols_oracle(obs, d, weighted);
        for (auto method : {FitMethod::CellMeans, FitMethod::DummyOls}) {
            FitOptions fo;
            fo.method = method;
            fo.weighted = weighted;
            const auto fit = fit_event_study(obs, d, fo);
            CHECK(max_rel_diff(fit.params, oracle.beta) < 1e-10);
            CHECK(max_rel_diff(fit.vcov, oracle.vcov) < 1e-10);
        }
    }
}

TEST_CASE("mu is the difference-in-differences of cell means") {
    std::mt19937_64 rng(3);
    const auto d = small_design();
    const auto obs = random_observations(rng, d, 3, 2);
    std::map<std::pair<int, int>, std::pair<double, int>> cell;
    for (const auto& o : obs) {
        auto& c = cell[{o.group.is_infinity() ? 99 : o.group.value(), o.period}];
        c.first += o.y;
        ++c.second;
    }
    auto mean = [&](int g, int t) { return cell[{g, t}].first / cell[{g, t}].second; };
    const auto fit = fit_event_study(obs, d);
    const int ref = d.reference_period();
    for (int l : d.coefficient_rels())
        for (int e : d.finite_groups()) {
            const int t = d.event_period + l;
            const double did = (mean(e, t) - mean(e, ref)) - (mean(99, t) - mean(99, ref));
            CHECK(fit.mu(l, e) == doctest::Approx(did).epsilon(1e-12));
        }
    CHECK(fit.mu(-1, 0) == 0.0);
    CHECK(fit.cell_mean(0, 1) == doctest::Approx(mean(-1, 1)).epsilon(1e-12));
}

TEST_CASE("CR0 and CR1 differ by the small-sample factor") {
    std::mt19937_64 rng(5);
    const auto d = small_design();
    const auto obs = random_observations(rng, d, 2, 2);
    FitOptions f0;
    f0.vcov = VcovKind::CR0;
    const auto a = fit_event_study(obs, d, f0);
    const auto b = fit_event_study(obs, d);
    const double n = static_cast<double>(obs.size());
    const double k = a.layout.size();
    const double G = static_cast<double>(a.n_clusters);
    CHECK(max_rel_diff(b.vcov, a.vcov * (G / (G - 1) * (n - 1) / (n - k))) < 1e-12);
    CHECK(max_rel_diff(a.vcov, ols_oracle(obs, d, false, false).vcov) < 1e-10);
}

TEST_CASE("generic cluster_vcov matches the literal loop") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> z(0.0, 1.0);
    const int n = 30, k = 4;
    Eigen::MatrixXd X(n, k);
    std::vector<double> e(n);
    std::vector<std::int64_t> cl(n);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = 1.0;
        for (int j = 1; j < k; ++j) X(i, j) = z(rng);
        e[static_cast<std::size_t>(i)] = z(rng);
        cl[static_cast<std::size_t>(i)] = i % 7;
    }
    const Eigen::MatrixXd bread = (X.transpose() * X).inverse();
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
    for (int g = 0; g < 7; ++g) {
        Eigen::VectorXd s = Eigen::VectorXd::Zero(k);
        for (int i = 0; i < n; ++i)
            if (cl[static_cast<std::size_t>(i)] == g) s += X.row(i).transpose() * e[static_cast<std::size_t>(i)];
        meat += s * s.transpose();
    }
    const Eigen::MatrixXd expect = bread * meat * bread * (7.0 / 6.0) * (29.0 / 26.0);
    CHECK(max_rel_diff(cluster_vcov(X, e, cl), expect) < 1e-10);
}

TEST_CASE("re-clustering a fit at a coarser level") {
    std::mt19937_64 rng(23);
    const auto d = small_design();
    const auto obs = random_observations(rng, d, 2, 3);
    const auto fit = fit_event_study(obs, d);
    std::vector<std::int64_t> by_pref;
    std::vector<Observation> relabeled = obs;
    for (auto& o : relabeled) {
        by_pref.push_back(o.prefecture_id);
        o.cluster = o.prefecture_id;
    }
    CHECK(max_rel_diff(cluster_vcov(fit, obs, by_pref), ols_oracle(relabeled, d, false).vcov) <
          1e-10);
}

TEST_CASE("invariances: scaling, level shifts, group shifts") {
    std::mt19937_64 rng(29);
    const auto d = small_design();
    auto obs = random_observations(rng, d, 2, 2);
    const auto base = fit_event_study(obs, d);

    auto scaled = obs;
    for (auto& o : scaled) o.y *= 3.5;
    const auto s = fit_event_study(scaled, d);
    CHECK(max_rel_diff(s.params, base.params * 3.5) < 1e-12);
    CHECK(max_rel_diff(s.vcov, base.vcov * 3.5 * 3.5) < 1e-12);

    auto shifted = obs;
    for (auto& o : shifted) {
        o.y += 2.0;
        if (o.group.is_finite() && o.group.value() == 0) o.y += 0.7;
    }
    const auto sh = fit_event_study(shifted, d);
    CHECK(sh.intercept() == doctest::Approx(base.intercept() + 2.0));
    CHECK(sh.alpha(0) == doctest::Approx(base.alpha(0) + 0.7));
    CHECK(max_rel_diff(sh.mu_vector(), base.mu_vector()) < 1e-10);
    CHECK(max_rel_diff(sh.mu_vcov(), base.mu_vcov()) < 1e-10);
}

TEST_CASE("permuting observations leaves the fit unchanged") {
    std::mt19937_64 rng(31);
    const auto d = small_design();
    auto obs = random_observations(rng, d, 2, 2);
    const auto a = fit_event_study(obs, d);
    std::shuffle(obs.begin(), obs.end(), rng);
    const auto b = fit_event_study(obs, d);
    CHECK(max_rel_diff(a.params, b.params) < 1e-12);
    CHECK(max_rel_diff(a.vcov, b.vcov) < 1e-12);
}

TEST_CASE("an empty required cell is an estimation error") {
    std::mt19937_64 rng(37);
    const auto d = small_design();
    auto obs = random_observations(rng, d, 1, 1);
    std::erase_if(obs, [](const Observation& o) {
        return o.group == ExposureGroup::finite(0) && o.period == 4;
    });
    for (auto m : {FitMethod::CellMeans, FitMethod::DummyOls}) {
        FitOptions fo;
        fo.method = m;
        CHECK_THROWS_AS(fit_event_study(obs, d, fo), EstimationError);
    }
    CHECK_THROWS_AS(fit_event_study(std::vector<Observation>{}, d), EstimationError);
}

TEST_CASE("distribution helpers") {
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
    CHECK(normal_two_sided_p(1.959963984540054) == doctest::Approx(0.05).epsilon(1e-10));
    CHECK(chi_square_upper(3.841458820694124, 1) == doctest::Approx(0.05).epsilon(1e-10));
    CHECK(chi_square_upper(18.307038053275146, 10) == doctest::Approx(0.05).epsilon(1e-10));
    CHECK(chi_square_upper(0.0, 4) == 1.0);
}

TEST_CASE("pretrend report: per-cell z and joint Wald") {
    std::mt19937_64 rng(41);
    const auto d = small_design();
    const auto obs = random_observations(rng, d, 3, 3);
    const auto fit = fit_event_study(obs, d);
    const auto rep = pretrend_report(fit);
    // Pre-period rels: l = -2 only (l = -1 is the reference), three groups.
    CHECK(rep.cells.size() == 3);
    CHECK(rep.df == 3);
    std::vector<int> idx;
    for (const auto& c : rep.cells) {
        CHECK(c.l == -2);
        CHECK(c.z == doctest::Approx(c.estimate / c.se));
        idx.push_back(fit.layout.mu(c.l, c.e));
    }
    Eigen::VectorXd b(3);
    Eigen::MatrixXd V(3, 3);
    for (int i = 0; i < 3; ++i) {
        b[i] = fit.params[idx[static_cast<std::size_t>(i)]];
        for (int j = 0; j < 3; ++j)
            V(i, j) = fit.vcov(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    const double wald = b.dot(V.ldlt().solve(b));
    CHECK(rep.wald == doctest::Approx(wald).epsilon(1e-8));
    CHECK(rep.p_value == doctest::Approx(chi_square_upper(wald, 3)).epsilon(1e-8));
}

TEST_CASE("two-way FE recovers additive week effects exactly") {
    std::vector<TwoWayRow> rows;
    const double a[] = {5.0, -1.0, 2.5};
    const double b[] = {0.0, 1.5, -0.5, 4.0};
    for (int p = 0; p < 3; ++p)
        for (int t = 0; t < 4; ++t) rows.push_back({p + 1, t + 1, a[p] + b[t]});
    const std::vector<int> expected = {1, 2, 3, 4, 5};
    const auto fit = fit_two_way_fe(rows, expected);
    REQUIRE(fit.time_effects.size() == 4);
    for (int t = 0; t < 4; ++t) {
        CHECK(fit.time_effects[static_cast<std::size_t>(t)].estimate ==
              doctest::Approx(b[t] - b[0]).epsilon(1e-10));
        CHECK(fit.time_effects[static_cast<std::size_t>(t)].se < 1e-6);
    }
    CHECK(fit.dropped_times == std::vector<int>{5});
}

TEST_CASE("two-way FE on constant earnings gives zero week effects") {
    std::vector<TwoWayRow> rows;
    for (int p = 1; p <= 4; ++p)
        for (int t = 1; t <= 6; ++t) rows.push_back({p, t, 1000.0});
    for (const auto& e : fit_two_way_fe(rows).time_effects) CHECK(std::abs(e.estimate) < 1e-9);
}

TEST_CASE("two-way FE HC1 matches the sandwich formula") {
    std::mt19937_64 rng(43);
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<TwoWayRow> rows;
    for (int p = 1; p <= 5; ++p)
        for (int t = 1; t <= 4; ++t) rows.push_back({p, t, p * 0.3 + t * 0.1 + z(rng)});
    const auto fit = fit_two_way_fe(rows);
    const int n = 20, k = 1 + 4 + 3;
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, k);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        const auto& r = rows[static_cast<std::size_t>(i)];
        X(i, 0) = 1.0;
        if (r.unit > 1) X(i, r.unit - 1) = 1.0;
        if (r.time > 1) X(i, 4 + r.time - 1) = 1.0;
        y[i] = r.y;
    }
    const Eigen::MatrixXd B = (X.transpose() * X).inverse();
    const Eigen::VectorXd beta = B * X.transpose() * y;
    const Eigen::VectorXd e = y - X * beta;
    const Eigen::MatrixXd V = B * X.transpose() * e.array().square().matrix().asDiagonal() * X * B *
                              (static_cast<double>(n) / (n - k));
    for (int t = 2; t <= 4; ++t) {
        const auto& te = fit.time_effects[static_cast<std::size_t>(t - 1)];
        CHECK(te.estimate == doctest::Approx(beta[4 + t - 1]).epsilon(1e-10));
        CHECK(te.se == doctest::Approx(std::sqrt(V(4 + t - 1, 4 + t - 1))).epsilon(1e-10));
        CHECK(te.ci_high - te.estimate == doctest::Approx(1.959963984540054 * te.se));
    }
}

TEST_CASE("two groups, three periods: a unit post-period jump gives mu = 1") {
    EventStudyDesign d;
    d.n_periods = 3;
    d.event_period = 2;
    d.max_e = 0;
    std::vector<Observation> obs;
    std::int64_t cluster = 0;
    for (const auto g : {ExposureGroup::finite(-1), ExposureGroup::finite(0), ExposureGroup::infinity()})
        for (int b = 0; b < 3; ++b, ++cluster)
            for (int t = 1; t <= 3; ++t) {
                Observation o;
                o.cluster = cluster;
                o.group = g;
                o.period = t;
                o.y = 2.0 + 0.5 * t + 0.1 * b + (g == ExposureGroup::finite(0) && t >= 2 ? 1.0 : 0.0);
                obs.push_back(o);
            }
    for (auto method : {FitMethod::CellMeans, FitMethod::DummyOls}) {
        FitOptions opt;
        opt.method = method;
        const auto fit = fit_event_study(obs, d, opt);
        CHECK(fit.mu(0, 0) == doctest::Approx(1.0));
        CHECK(fit.mu(1, 0) == doctest::Approx(1.0));
        CHECK(fit.mu(0, -1) == doctest::Approx(0.0));
        CHECK(fit.mu(1, -1) == doctest::Approx(0.0));
        CHECK(fit.mu(-1, 0) == 0.0);
    }
}

TEST_CASE("constant outcomes give zero effects and zero pretrend statistics") {
    std::mt19937_64 rng(21);
    const auto d = small_design();
    auto obs = random_observations(rng, d);
    for (auto& o : obs) o.y = 4.25;
    const auto fit = fit_event_study(obs, d);
    CHECK(fit.mu_vector().cwiseAbs().maxCoeff() < 1e-12);
    const auto rep = pretrend_report(fit);
    for (const auto& c : rep.cells) {
        CHECK(std::abs(c.estimate) < 1e-12);
        CHECK(std::abs(c.z) < 1e-6);
    }
    CHECK(rep.wald == 0.0);
}

TEST_CASE("re-basing to l = -2 shifts every coefficient by mu_{-2,e}") {
    std::mt19937_64 rng(22);
    auto d1 = small_design();
    auto d2 = d1;
    d2.reference_rel = -2;
    for (int rep = 0; rep < 20; ++rep) {
        const auto obs = random_observations(rng, d1, 2, 3);
        const auto f1 = fit_event_study(obs, d1);
        const auto f2 = fit_event_study(obs, d2);
        for (int e : d1.finite_groups())
            for (int l = d1.first_rel(); l <= d1.last_rel(); ++l)
                CHECK(f2.mu(l, e) == doctest::Approx(f1.mu(l, e) - f1.mu(-2, e)).epsilon(1e-10));
    }
}

TEST_CASE("clustered covariance is positive semi-definite") {
    std::mt19937_64 rng(23);
    const auto d = small_design();
    for (int rep = 0; rep < 50; ++rep) {
        const auto obs = random_observations(rng, d, 1 + rep % 3, 2 + rep % 3);
        for (auto kind : {VcovKind::CR0, VcovKind::CR1}) {
            FitOptions opt;
            opt.vcov = kind;
            const auto fit = fit_event_study(obs, d, opt);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(fit.vcov);
            CHECK(eig.eigenvalues().minCoeff() >= -1e-12 * fit.vcov.trace());
        }
    }
}

TEST_CASE("duplicating every observation within its cluster leaves estimates unchanged") {
    std::mt19937_64 rng(24);
    const auto d = small_design();
    const auto obs = random_observations(rng, d, 2, 2);
    auto twice = obs;
    twice.insert(twice.end(), obs.begin(), obs.end());
    FitOptions opt;
    opt.vcov = VcovKind::CR0;
    const auto a = fit_event_study(obs, d, opt);
    const auto b = fit_event_study(twice, d, opt);
    CHECK(max_rel_diff(a.params, b.params) < 1e-12);
    CHECK(max_rel_diff(a.vcov, b.vcov) < 1e-10);
}

TEST_CASE("singleton clusters reduce CR1 to HC1") {
    std::mt19937_64 rng(25);
    const auto d = small_design();
    auto obs = random_observations(rng, d, 2, 2);
    for (std::size_t i = 0; i < obs.size(); ++i) obs[i].cluster = static_cast<std::int64_t>(i);
    const auto fit = fit_event_study(obs, d);

    const Eigen::MatrixXd X = dummy_design(obs, d);
    const auto n = X.rows();
    const auto k = X.cols();
    const Eigen::MatrixXd bread = (X.transpose() * X).inverse();
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double e = fit.residuals[static_cast<std::size_t>(i)];
        meat += X.row(i).transpose() * X.row(i) * (e * e);
    }
    const Eigen::MatrixXd hc1 =
        bread * meat * bread * (static_cast<double>(n) / static_cast<double>(n - k));
    CHECK(max_rel_diff(fit.vcov, hc1) < 1e-10);
}
