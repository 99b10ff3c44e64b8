#pragma once

#include <cstdint>

#include "mwb/types.hpp"

namespace mwb {

/// One (wage bin, month) row of the event-study regression.
struct Observation {
    /// Clustering unit; one id per (prefecture, wage bin).
    std::int64_t cluster = 0;
    int prefecture_id = 0;
    ExposureGroup group;
    /// Study month t in 1..T.
    int period = 0;
    double y = 0.0;
    double weight = 1.0;

    // Carried along for the affected-worker baseline of the elasticity battery.
    double wage_bill = 0.0;  // sum of matched hourly wages / N_{p,t}
    double postings = 0.0;   // N_{p,t}
};

}  // namespace mwb
