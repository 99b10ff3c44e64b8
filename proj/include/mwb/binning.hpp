#pragma once

#include "mwb/types.hpp"

namespace mwb {

/// Geometry of wage bins and exposure groups around the new minimum wage.
struct BinningRules {
    int bin_width = 10;
    int group_width = 100;
    int max_e = 3;
    /// Bins at or above new_mw + spill_offset form the control group.
    int spill_offset = 400;

    /// Throws ConfigError on inconsistent geometry.
    void validate() const;
    int n_finite_groups() const { return max_e + 2; }  // e = -1..max_e
};

/// Lower edge of the MW-anchored bin that holds `wage`.
int assign_bin(int wage, int new_mw, int bin_width = 10);

/// Exposure group of a bin; throws ConsistencyError when the bin straddles a
/// group boundary.
ExposureGroup assign_group(int bin_lower, int new_mw, const BinningRules& rules = {});

inline BinKey make_bin_key(int prefecture_id, int wage, int new_mw, const BinningRules& rules) {
    const int lower = assign_bin(wage, new_mw, rules.bin_width);
    return {prefecture_id, lower, assign_group(lower, new_mw, rules)};
}

}  // namespace mwb
