#include "mwb/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <set>

#include <CLI11.hpp>

#include "mwb/binning.hpp"
#include "mwb/csv_io.hpp"
#include "mwb/decomp.hpp"
#include "mwb/describe.hpp"
#include "mwb/dgp.hpp"
#include "mwb/event_study.hpp"
#include "mwb/hetero.hpp"
#include "mwb/panel.hpp"
#include "mwb/two_way_fe.hpp"

namespace fs = std::filesystem;

namespace mwb {

namespace {

YearMonth year_month_arg(const std::string& text, const char* what) {
    auto ym = parse_year_month(text);
    if (!ym) throw ConfigError(std::string(what) + " must be YYYY-MM, got '" + text + "'");
    return *ym;
}

/// Resolved, validated view of a RunConfig.
struct Resolved {
    const RunConfig& cfg;
    StudyWindow window;
    BinningRules rules;
    EventStudyDesign design;
    fs::path out_dir;

    explicit Resolved(const RunConfig& c) : cfg(c) {
        const auto start = year_month_arg(c.window_start, "window-start");
        const auto end = year_month_arg(c.window_end, "window-end");
        const auto event = year_month_arg(c.event_month, "event-month");
        window.start = start;
        window.length = months_between(start, end) + 1;
        window.event_index = months_between(start, event) + 1;
        if (window.length < 2) throw ConfigError("window-end must come after window-start");
        if (window.event_index < 1 || window.event_index > window.length)
            throw ConfigError("event-month lies outside the study window");
        window.validate();
        rules = {c.bin_width, c.group_width, c.max_e, c.spill_offset};
        rules.validate();
        if (c.wage_ceiling <= 0 || c.jobs <= 0 || c.bootstrap_reps <= 0 ||
            c.min_records_per_cell <= 0 || c.kaitz_bins <= 0)
            throw ConfigError("numeric knobs must be positive");
        if (c.inference != "bootstrap" && c.inference != "delta")
            throw ConfigError("inference must be bootstrap or delta");
        if (c.inference == "bootstrap" && c.bootstrap_reps < 99)
            throw ConfigError("bootstrap needs at least 99 replicates");
        design = design_for(window, rules);
        out_dir = c.output_dir;
    }

    void require_output_dir() const {
        if (!fs::is_directory(out_dir))
            throw ConfigError("output directory '" + out_dir.string() + "' does not exist");
    }
    fs::path out(const std::string& name) const { return out_dir / name; }

    int study_month(const std::string& text, int fallback, const char* what) const {
        if (text.empty()) return fallback;
        const auto t = window.index_of(year_month_arg(text, what));
        if (!t) throw ConfigError(std::string(what) + " lies outside the study window");
        return *t;
    }
};

std::string group_label(int row, int max_e) {
    return row == max_e + 2 ? "inf" : std::to_string(row - 1);
}

// simulate

DgpConfig simulation_config(const Resolved& r) {
    const auto& c = r.cfg;
    DgpConfig d = make_scenario(c.scenario, c.seed);
    d.window = r.window;
    if (c.total_contracts) {
        if (*c.total_contracts <= 0) throw ConfigError("total-contracts must be positive");
        const double per = *c.total_contracts /
                           (static_cast<double>(d.prefectures.size()) * r.window.length);
        for (auto& p : d.prefectures) p.monthly_postings = per;
    }
    if (c.missing_frac) d.missing_frac = *c.missing_frac;
    if (c.excess_frac) d.excess_frac = *c.excess_frac;
    if (c.match_prob) d.match_prob = *c.match_prob;
    d.validate();
    return d;
}

CsvTable ground_truth_table(const GroundTruth& g) {
    CsvTable t({"quantity", "e", "l", "value"});
    const int rows = g.design.max_e + 3;
    for (int row = 0; row < rows; ++row)
        for (int tt = 1; tt <= g.design.n_periods; ++tt)
            t.row({"cell_mean", group_label(row, g.design.max_e),
                   std::to_string(tt - g.design.event_period),
                   format_double(g.cell_means(row, tt - 1))});
    for (int l : g.design.coefficient_rels())
        for (int e : g.design.finite_groups())
            t.row({"mu", std::to_string(e), std::to_string(l), format_double(g.mu(l, e))});
    for (std::size_t i = 0; i < g.delta_a_e.size(); ++i)
        t.row({"delta_a_e", std::to_string(static_cast<int>(i) - 1), "",
               format_double(g.delta_a_e[i])});
    t.row({"delta_a", "", "", format_double(g.delta_a)});
    t.row({"delta_b", "", "", format_double(g.delta_b)});
    t.row({"delta_e", "", "", format_double(g.delta_e)});
    return t;
}

int cmd_simulate(const Resolved& r, std::ostream& err) {
    r.require_output_dir();
    const auto config = simulation_config(r);
    const auto data = generate(config, r.cfg.jobs, r.rules);
    write_atomic(r.out("contracts.csv"), contracts_csv(data.records));
    write_atomic(r.out("schedule.csv"), schedule_csv(data.schedule));
    write_atomic(r.out("users.csv"), users_csv(data.users));
    ground_truth_table(data.truth).write(r.out("ground_truth.csv"));
    err << "simulate: " << data.records.size() << " contracts, scenario " << r.cfg.scenario
        << ", true delta_b " << format_double(data.truth.delta_b) << ", delta_a "
        << format_double(data.truth.delta_a) << "\n";
    return kExitOk;
}

// shared ingestion

struct Inputs {
    std::vector<ContractRecord> records;
    MinWageSchedule schedule;
};

Inputs load_inputs(const Resolved& r) {
    Inputs in;
    in.schedule = read_schedule(fs::path(r.cfg.schedule));
    check_event_alignment(in.schedule, r.window);
    in.records = read_contracts(fs::path(r.cfg.contracts));
    return in;
}

Panel load_panel(const Resolved& r, const Inputs& in, std::ostream& err) {
    PanelOptions po;
    po.rules = r.rules;
    po.wage_ceiling = r.cfg.wage_ceiling;
    po.jobs = r.cfg.jobs;
    Panel panel = build_panel(in.records, in.schedule, r.window, po);
    err << "ingest: " << panel.stats.records_used << " records used, "
        << panel.stats.skipped_out_of_window << " outside the window, "
        << panel.stats.flagged_above_ceiling << " above the wage ceiling\n";
    return panel;
}

ObservationOptions observation_options(const RunConfig& c) {
    ObservationOptions o;
    o.kind = parse_outcome_kind(c.outcome);
    o.normalizer = parse_normalizer(c.normalizer);
    return o;
}

FitOptions fit_options(const RunConfig& c) {
    FitOptions f;
    f.method = parse_fit_method(c.fit);
    f.vcov = parse_vcov_kind(c.vcov);
    return f;
}

void apply_cluster_level(std::vector<Observation>& obs, const std::string& level) {
    if (level == "bin") return;
    if (level != "prefecture") throw ConfigError("cluster must be bin or prefecture");
    for (auto& o : obs) o.cluster = o.prefecture_id;
}

BaselineWeighting parse_weighting(const std::string& s) {
    if (s == "postings") return BaselineWeighting::Postings;
    if (s == "unweighted") return BaselineWeighting::Unweighted;
    throw ConfigError("baseline-weighting must be postings or unweighted");
}

WageValuation parse_valuation(const std::string& s) {
    if (s == "upper") return WageValuation::UpperEdge;
    if (s == "midpoint") return WageValuation::Midpoint;
    throw ConfigError("wage-valuation must be upper or midpoint");
}

// estimate

void write_coefficients(const Resolved& r, const EventStudyFit& fit) {
    CsvTable coef({"outcome", "e", "l", "estimate", "se", "z"});
    for (int l : fit.design.coefficient_rels())
        for (int e : fit.design.finite_groups()) {
            const double est = fit.mu(l, e);
            const double se = fit.mu_se(l, e);
            coef.row({r.cfg.outcome, std::to_string(e), std::to_string(l), format_double(est),
                      format_double(se), format_double(se > 0 ? est / se : 0.0)});
        }
    coef.write(r.out("coefficients.csv"));

    CsvTable vcov({"term_i", "term_j", "value"});
    for (int i = 0; i < fit.layout.size(); ++i)
        for (int j = 0; j < fit.layout.size(); ++j)
            vcov.row({fit.layout.name(i), fit.layout.name(j), format_double(fit.vcov(i, j))});
    vcov.write(r.out("vcov.csv"));
}

void write_decomposition(const Resolved& r, const DecompositionResult& d) {
    CsvTable t({"outcome", "quantity", "l", "e", "estimate", "se"});
    auto put = [&](const char* q, const std::string& l, const std::string& e, const Estimate& x) {
        t.row({r.cfg.outcome, q, l, e, format_double(x.value), format_double(x.se)});
    };
    for (std::size_t i = 0; i < d.post_rels.size(); ++i) {
        const auto l = std::to_string(d.post_rels[i]);
        put("delta_a_l", l, "", d.delta_a_l[i]);
        if (d.includes_below) put("delta_b_l", l, "", d.delta_b_l[i]);
        put("delta_e_l", l, "", d.delta_e_l[i]);
    }
    for (std::size_t i = 0; i < d.groups.size(); ++i)
        put("delta_a_e", "", std::to_string(d.groups[i]), d.delta_a_e[i]);
    put("delta_a", "", "", d.delta_a);
    if (d.includes_below) put("delta_b", "", "", d.delta_b);
    put("delta_e", "", "", d.delta_e);
    t.write(r.out("decomposition.csv"));
}

void write_pretrends(const Resolved& r, const PretrendReport& p) {
    CsvTable t({"kind", "e", "l", "estimate", "se", "z", "p_value", "df"});
    for (const auto& c : p.cells)
        t.row({"cell", std::to_string(c.e), std::to_string(c.l), format_double(c.estimate),
               format_double(c.se), format_double(c.z), format_double(c.p_value), "1"});
    t.row({"joint_wald", "", "", format_double(p.wald), "", "", format_double(p.p_value),
           std::to_string(p.df)});
    t.write(r.out("pretrends.csv"));
}

void write_elasticities(const Resolved& r, const EventStudyFit& fit,
                        std::span<const Observation> obs, const MinWageSchedule& schedule,
                        const DecompositionResult& dec) {
    const auto weighting = parse_weighting(r.cfg.baseline_weighting);
    const auto valuation = parse_valuation(r.cfg.wage_valuation);
    const auto base = affected_baseline(obs, schedule, fit.design, weighting, r.rules.group_width);
    const auto values = compute_elasticities(dec, base, valuation);
    auto table = elasticity_table(values);
    const auto delta = elasticity_delta_ses(fit, values, valuation);
    for (std::size_t i = 0; i < table.size(); ++i) table[i].se_delta = delta[i];

    std::optional<BootstrapResult> boot;
    if (r.cfg.inference == "bootstrap") {
        BootstrapOptions bo;
        bo.replicates = r.cfg.bootstrap_reps;
        bo.seed = r.cfg.seed;
        bo.jobs = r.cfg.jobs;
        bo.fit = fit_options(r.cfg);
        boot = bootstrap_inference(
            obs, fit.design, elasticity_statistic(schedule, weighting, valuation, r.rules.group_width),
            bo);
        for (std::size_t i = 0; i < table.size(); ++i)
            if (std::isfinite(boot->se[i])) table[i].se_bootstrap = boot->se[i];
    } else if (r.cfg.inference != "delta") {
        throw ConfigError("inference must be bootstrap or delta");
    }

    CsvTable main({"quantity", "estimate", "se", "method", "note"});
    CsvTable cross({"quantity", "estimate", "se_delta", "se_bootstrap", "ci_low", "ci_high"});
    for (std::size_t i = 0; i < table.size(); ++i) {
        const auto& q = table[i];
        const auto& se = boot ? q.se_bootstrap : q.se_delta;
        main.row({q.name, format_optional(q.estimate), format_optional(se),
                  boot ? "bootstrap" : "delta", q.note});
        cross.row({q.name, format_optional(q.estimate), format_optional(q.se_delta),
                   format_optional(q.se_bootstrap),
                   boot ? format_double(boot->ci_low[i]) : "",
                   boot ? format_double(boot->ci_high[i]) : ""});
    }
    main.write(r.out("elasticities.csv"));
    cross.write(r.out("elasticities_crosscheck.csv"));
}

int cmd_estimate(const Resolved& r, std::ostream& err) {
    r.require_output_dir();
    const auto in = load_inputs(r);
    const auto panel = load_panel(r, in, err);
    const auto oo = observation_options(r.cfg);
    std::int64_t dropped = 0;
    auto obs = make_observations(panel, oo, &dropped);
    if (dropped > 0) err << "estimate: dropped " << dropped << " rows with a zero denominator\n";
    apply_cluster_level(obs, r.cfg.cluster);
    const auto fit = fit_event_study(obs, r.design, fit_options(r.cfg));

    AggregateOptions ao;
    ao.include_below =
        oo.kind == OutcomeKind::EmploymentShare || oo.kind == OutcomeKind::VacancyShare;
    const auto dec = aggregate(fit, ao);
    write_coefficients(r, fit);
    write_decomposition(r, dec);
    write_pretrends(r, pretrend_report(fit));
    if (oo.kind == OutcomeKind::EmploymentShare && oo.normalizer == Normalizer::Postings)
        write_elasticities(r, fit, obs, in.schedule, dec);
    err << "estimate: delta_b " << format_double(dec.delta_b.value) << " ("
        << format_double(dec.delta_b.se) << "), delta_a " << format_double(dec.delta_a.value)
        << " (" << format_double(dec.delta_a.se) << ")\n";
    return kExitOk;
}

// hetero

int cmd_hetero(const Resolved& r, std::ostream& err) {
    r.require_output_dir();
    const auto in = load_inputs(r);
    StratifiedOptions so;
    so.rules = r.rules;
    so.observations = observation_options(r.cfg);
    so.fit = fit_options(r.cfg);
    so.min_records_per_cell = r.cfg.min_records_per_cell;
    so.jobs = r.cfg.jobs;
    const auto dim = parse_stratum_dimension(r.cfg.stratify);
    const auto res = run_stratified(in.records, in.schedule, r.window, dim, so);
    const std::string dname = to_string(dim);

    CsvTable coef({"dimension", "stratum", "e", "l", "estimate", "se"});
    CsvTable decomp({"dimension", "stratum", "postings", "quantity", "estimate", "se"});
    for (const auto& s : res.strata) {
        for (int l : s.fit.design.coefficient_rels())
            for (int e : s.fit.design.finite_groups())
                coef.row({dname, s.label, std::to_string(e), std::to_string(l),
                          format_double(s.fit.mu(l, e)), format_double(s.fit.mu_se(l, e))});
        const auto& d = s.decomposition;
        const auto n = std::to_string(s.postings);
        decomp.row({dname, s.label, n, "delta_a", format_double(d.delta_a.value),
                    format_double(d.delta_a.se)});
        if (d.includes_below)
            decomp.row({dname, s.label, n, "delta_b", format_double(d.delta_b.value),
                        format_double(d.delta_b.se)});
        decomp.row({dname, s.label, n, "delta_e", format_double(d.delta_e.value),
                    format_double(d.delta_e.se)});
    }
    CsvTable skipped({"dimension", "stratum", "reason"});
    for (const auto& s : res.skipped) skipped.row({dname, s.label, s.reason});
    coef.write(r.out("strata_coefficients.csv"));
    decomp.write(r.out("strata_decomposition.csv"));
    skipped.write(r.out("strata_skipped.csv"));
    err << "hetero: " << res.strata.size() << " strata fitted, " << res.skipped.size()
        << " skipped\n";

    if (dim == StratumDimension::Prefecture) {
        const auto kaitz =
            kaitz_index(in.records, in.schedule, r.window, std::nullopt, r.cfg.kaitz_reciprocal);
        CsvTable kt({"prefecture_id", "new_mw", "median_wage", "kaitz", "reason"});
        for (const auto& k : kaitz)
            kt.row({std::to_string(k.prefecture_id),
                    std::to_string(in.schedule.at(k.prefecture_id).new_mw),
                    k.median_wage ? std::to_string(*k.median_wage) : "", format_optional(k.kaitz),
                    k.reason});
        kt.write(r.out("kaitz.csv"));

        const auto points = kaitz_points(res, kaitz);
        std::set<double> distinct;
        for (const auto& p : points) distinct.insert(p.kaitz);
        const int n_bins = std::min<int>(r.cfg.kaitz_bins, static_cast<int>(distinct.size()));
        CsvTable bs({"bin", "kaitz_center", "delta_a", "delta_b", "delta_e", "count"});
        if (n_bins > 0) {
            for (const auto& b : binned_scatter(points, n_bins))
                bs.row({std::to_string(b.bin), format_double(b.center), format_double(b.delta_a),
                        format_double(b.delta_b), format_double(b.delta_e),
                        std::to_string(b.count)});
        }
        bs.write(r.out("binned_scatter.csv"));
    }
    return kExitOk;
}

// describe

int cmd_describe(const Resolved& r, std::ostream&) {
    r.require_output_dir();
    const auto in = load_inputs(r);
    std::optional<int> pref;
    if (r.cfg.describe_prefecture != 0) pref = r.cfg.describe_prefecture;
    const int a = r.study_month(r.cfg.month_a, r.window.event_index - 1, "month-a");
    const int b = r.study_month(r.cfg.month_b, r.window.event_index, "month-b");

    const std::pair<DistributionAxis, const char*> axes[] = {
        {DistributionAxis::Wage, "distribution_wage.csv"},
        {DistributionAxis::Hours, "distribution_hours.csv"},
        {DistributionAxis::Reimbursement, "distribution_reimbursement.csv"}};
    for (const auto& [axis, file] : axes) {
        CsvTable t({"t", "month", "bin_lower", "employment"});
        for (const auto& row : distribution_table(in.records, r.window, axis, pref))
            t.row({std::to_string(row.month), format_year_month(r.window.month_at(row.month)),
                   format_double(row.bin_lower), std::to_string(row.employment)});
        t.write(r.out(file));
    }
    const std::pair<DistributionAxis, const char*> grids[] = {
        {DistributionAxis::Hours, "change_wage_hours.csv"},
        {DistributionAxis::Reimbursement, "change_wage_reimbursement.csv"}};
    for (const auto& [axis, file] : grids) {
        CsvTable t({"wage_bin", std::string(to_string(axis)) + "_bin", "count_a", "count_b",
                    "change"});
        for (const auto& c : change_grid(in.records, r.window, a, b, axis, pref))
            t.row({format_double(c.wage_bin), format_double(c.other_bin),
                   std::to_string(c.count_a), std::to_string(c.count_b),
                   std::to_string(c.change)});
        t.write(r.out(file));
    }
    return kExitOk;
}

// macro

int cmd_macro(const Resolved& r, std::ostream& err) {
    r.require_output_dir();
    const auto in = load_inputs(r);
    const auto users = read_users(fs::path(r.cfg.users));
    const auto panel = load_panel(r, in, err);

    CsvTable m({"month", "users", "vacancies", "hires", "tightness", "job_finding",
                "worker_finding"});
    for (const auto& s : macro_metrics(panel.totals, users, r.window))
        m.row({format_year_month(s.month), std::to_string(s.users), std::to_string(s.vacancies),
               std::to_string(s.hires), format_optional(s.tightness),
               format_optional(s.job_finding), format_optional(s.worker_finding)});
    m.write(r.out("macro.csv"));

    std::vector<TwoWayRow> rows;
    for (const auto& e : prefecture_week_earnings(in.records, r.window))
        rows.push_back({e.prefecture_id, e.week, e.earnings});
    const auto first = days_from_civil(r.window.first_day());
    const auto last = days_from_civil(
        CivilDate{r.window.month_at(r.window.length).year, r.window.month_at(r.window.length).month,
                  days_in_month(r.window.month_at(r.window.length))});
    std::vector<int> weeks;
    for (int w = 1; w <= static_cast<int>((last - first) / 7) + 1; ++w) weeks.push_back(w);
    const auto fe = fit_two_way_fe(rows, weeks);
    for (int w : fe.dropped_times) err << "macro: week " << w << " has no earnings; dropped\n";
    CsvTable wt({"week", "estimate", "se", "ci_low", "ci_high"});
    for (const auto& t : fe.time_effects)
        wt.row({std::to_string(t.time), format_double(t.estimate), format_double(t.se),
                format_double(t.ci_low), format_double(t.ci_high)});
    wt.write(r.out("week_effects.csv"));
    return kExitOk;
}

struct App {
    CLI::App app{"Minimum-wage bunching estimator for spot labor market contracts", "mwb"};
    RunConfig cfg;
    double total_contracts = 0.0, missing_frac = 0.0, excess_frac = 0.0, match_prob = 0.0;
    CLI::Option* spill = nullptr;
    CLI::Option* total_opt = nullptr;
    CLI::Option* missing_opt = nullptr;
    CLI::Option* excess_opt = nullptr;
    CLI::Option* match_opt = nullptr;

    App() {
        app.set_config("--config", "", "Read key=value settings from a file (flags win)");
        app.require_subcommand(1);
        auto& c = cfg;
        const auto g_io = "Paths";
        app.add_option("--contracts", c.contracts, "Contracts CSV")->group(g_io)->capture_default_str();
        app.add_option("--schedule", c.schedule, "Minimum-wage schedule CSV")->group(g_io)->capture_default_str();
        app.add_option("--users", c.users, "Monthly active users CSV")->group(g_io)->capture_default_str();
        app.add_option("--output-dir", c.output_dir, "Existing directory for outputs")
            ->envname("MWB_OUTPUT_DIR")->group(g_io)->capture_default_str();

        const auto g_model = "Binning and window";
        app.add_option("--bin-width", c.bin_width, "Wage bin width (JPY)")->group(g_model)->capture_default_str();
        app.add_option("--group-width", c.group_width, "Exposure group width (JPY)")->group(g_model)->capture_default_str();
        app.add_option("--max-e", c.max_e, "Highest finite exposure group")->group(g_model)->capture_default_str();
        spill = app.add_option("--spill-offset", c.spill_offset,
                               "Control group starts at new MW + offset (default group-width*(max-e+1))")
                    ->group(g_model)->capture_default_str();
        app.add_option("--window-start", c.window_start, "First study month (YYYY-MM)")->group(g_model)->capture_default_str();
        app.add_option("--window-end", c.window_end, "Last study month (YYYY-MM)")->group(g_model)->capture_default_str();
        app.add_option("--event-month", c.event_month, "Month the new MW takes effect")->group(g_model)->capture_default_str();
        app.add_option("--wage-ceiling", c.wage_ceiling, "Flag wages above this value")->group(g_model)->capture_default_str();

        const auto g_est = "Estimation";
        app.add_option("--outcome", c.outcome, "employment_share|vacancy_share|reimb_amount|reimb_provision")
            ->group(g_est)->capture_default_str();
        app.add_option("--normalizer", c.normalizer, "postings|matches|none")->group(g_est)->capture_default_str();
        app.add_option("--cluster", c.cluster, "bin|prefecture")->group(g_est)->capture_default_str();
        app.add_option("--vcov", c.vcov, "CR1|CR0")->group(g_est)->capture_default_str();
        app.add_option("--fit", c.fit, "cell_means|dummy_ols")->group(g_est)->capture_default_str();
        app.add_option("--inference", c.inference, "Elasticity SEs: bootstrap|delta")->group(g_est)->capture_default_str();
        app.add_option("--bootstrap-reps", c.bootstrap_reps, "Bootstrap replicates")->group(g_est)->capture_default_str();
        app.add_option("--seed", c.seed, "Seed for bootstrap and simulation")->group(g_est)->capture_default_str();
        app.add_option("--baseline-weighting", c.baseline_weighting, "postings|unweighted")->group(g_est)->capture_default_str();
        app.add_option("--wage-valuation", c.wage_valuation, "upper|midpoint")->group(g_est)->capture_default_str();

        const auto g_het = "Heterogeneity";
        app.add_option("--stratify", c.stratify, "prefecture|occupation|timeslot")->group(g_het)->capture_default_str();
        app.add_option("--min-records-per-cell", c.min_records_per_cell,
                       "Skip strata with a thinner (e, t) cell")->group(g_het)->capture_default_str();
        app.add_option("--kaitz-bins", c.kaitz_bins, "Binned-scatter bins")->group(g_het)->capture_default_str();
        app.add_flag("--kaitz-reciprocal", c.kaitz_reciprocal, "Report median / MW instead")->group(g_het);

        const auto g_desc = "Describe";
        app.add_option("--describe-prefecture", c.describe_prefecture, "Restrict to one prefecture (0 = all)")
            ->group(g_desc)->capture_default_str();
        app.add_option("--month-a", c.month_a, "First month of change grids (default: month before event)")->group(g_desc);
        app.add_option("--month-b", c.month_b, "Second month of change grids (default: event month)")->group(g_desc);

        const auto g_sim = "Simulation";
        app.add_option("--scenario", c.scenario, "paper|placebo|bite|occupation|amenity")->group(g_sim)->capture_default_str();
        total_opt = app.add_option("--total-contracts", total_contracts, "Expected number of postings")->group(g_sim);
        missing_opt = app.add_option("--missing-frac", missing_frac, "Override m")->group(g_sim);
        excess_opt = app.add_option("--excess-frac", excess_frac, "Override x")->group(g_sim);
        match_opt = app.add_option("--match-prob", match_prob, "Override the match probability")->group(g_sim);

        app.add_option("--jobs", c.jobs, "Worker threads")->capture_default_str();

        for (const char* name : {"simulate", "estimate", "hetero", "describe", "macro", "print-config"})
            app.add_subcommand(name)->fallthrough();
        app.get_subcommand("simulate")->description("Generate synthetic contracts with known effects");
        app.get_subcommand("estimate")->description("Event study, decomposition, elasticities, pre-trends");
        app.get_subcommand("hetero")->description("Stratified estimates, Kaitz index, binned scatter");
        app.get_subcommand("describe")->description("Distribution tables and change grids");
        app.get_subcommand("macro")->description("Tightness, finding rates, weekly earnings effects");
        app.get_subcommand("print-config")->description("Print every setting with its value");
    }

    void finish() {
        if (spill->count() == 0) cfg.spill_offset = cfg.group_width * (cfg.max_e + 1);
        if (total_opt->count()) cfg.total_contracts = total_contracts;
        if (missing_opt->count()) cfg.missing_frac = missing_frac;
        if (excess_opt->count()) cfg.excess_frac = excess_frac;
        if (match_opt->count()) cfg.match_prob = match_prob;
    }
};

int dispatch(App& a, std::ostream& out, std::ostream& err) {
    const auto* sub = a.app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "print-config") {
        out << a.app.config_to_str(true, false);
        return kExitOk;
    }
    const Resolved r(a.cfg);
    if (name == "simulate") return cmd_simulate(r, err);
    if (name == "estimate") return cmd_estimate(r, err);
    if (name == "hetero") return cmd_hetero(r, err);
    if (name == "describe") return cmd_describe(r, err);
    if (name == "macro") return cmd_macro(r, err);
    throw ConfigError("unknown subcommand " + name);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    App a;
    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        a.app.parse(reversed);
        a.finish();
    } catch (const CLI::ParseError& e) {
        const int code = a.app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }
    try {
        return dispatch(a, out, err);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const SchemaError& e) {
        err << "schema error: " << e.what();
        if (e.row) err << " (row " << e.row;
        if (!e.column.empty()) err << (e.row ? ", " : " (") << "column " << e.column;
        if (e.row || !e.column.empty()) err << ")";
        err << "\n";
        return kExitSchema;
    } catch (const EstimationError& e) {
        err << "estimation error: " << e.what() << "\n";
        return kExitEstimation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitIo;
    }
}

int run_cli(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args, std::cout, std::cerr);
}

}  // namespace mwb
