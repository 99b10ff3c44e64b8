#include "mwb/binning.hpp"

#include <string>

namespace mwb {

namespace {

int floor_div(int a, int b) {
    int q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

}  // namespace

void BinningRules::validate() const {
    if (bin_width <= 0 || group_width <= 0 || max_e < 0 || spill_offset <= 0)
        throw ConfigError("binning knobs must be positive");
    if (group_width % bin_width != 0)
        throw ConfigError("bin_width must divide group_width");
    if (spill_offset % bin_width != 0)
        throw ConfigError("bin_width must divide spill_offset");
    if (spill_offset < group_width * (max_e + 1))
        throw ConfigError("spill_offset overlaps the finite exposure groups");
}

int assign_bin(int wage, int new_mw, int bin_width) {
    if (wage < 1) throw InvalidRecord("non-positive wage " + std::to_string(wage));
    if (bin_width <= 0) throw ConfigError("bin_width must be positive");
    return new_mw + bin_width * floor_div(wage - new_mw, bin_width);
}

ExposureGroup assign_group(int bin_lower, int new_mw, const BinningRules& rules) {
    const int lo = bin_lower - new_mw;
    const int hi = lo + rules.bin_width - 1;
    if (lo >= rules.spill_offset) return ExposureGroup::infinity();
    if (hi < -rules.group_width) return ExposureGroup::excluded();

    const int e = floor_div(lo, rules.group_width);
    if (floor_div(hi, rules.group_width) != e || (hi >= rules.spill_offset))
        throw ConsistencyError("bin [" + std::to_string(bin_lower) + ", " +
                               std::to_string(bin_lower + rules.bin_width - 1) +
                               "] straddles an exposure-group boundary");
    // Bins between the last finite group and the spill threshold are a donut.
    if (e > rules.max_e) return ExposureGroup::excluded();
    return ExposureGroup::finite(e);
}

}  // namespace mwb
