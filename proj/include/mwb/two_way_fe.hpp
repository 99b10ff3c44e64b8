#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace mwb {

struct TwoWayRow {
    int unit = 0;
    int time = 0;
    double y = 0.0;
};

struct TimeEffect {
    int time = 0;
    double estimate = 0.0;  // relative to the first observed period
    double se = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
};

struct TwoWayFeFit {
    std::vector<int> units;
    std::vector<double> unit_effects;  // relative to the first unit
    std::vector<TimeEffect> time_effects;  // includes the reference period at 0
    int reference_time = 0;
    double residual_variance = 0.0;
    std::int64_t n_obs = 0;
    /// Expected periods that had no observation at all and were dropped.
    std::vector<int> dropped_times;
};

/// OLS of y on unit and time dummies with HC1 standard errors and 95%
/// confidence intervals for the time effects.
TwoWayFeFit fit_two_way_fe(std::span<const TwoWayRow> rows,
                           std::span<const int> expected_times = {}, double level = 0.95);

}  // namespace mwb
