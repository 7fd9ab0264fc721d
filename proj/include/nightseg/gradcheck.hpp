#pragma once

#include <string>
#include <vector>

namespace nightseg {

// Central finite-difference verification of every training loss at 64-bit
// precision, on small random instances with fresh networks per seed.

struct GradCheckResult {
    std::string name;
    double max_rel_err = 0.0;
    int checked = 0;
    bool pass = false;
};

struct GradCheckOptions {
    int seeds = 5;
    double step = 1e-5;          // central-difference h
    double tolerance = 1e-3;     // relative error bound
    int params_per_seed = 24;    // sampled parameter entries per instance
    std::string only;            // restrict to one loss name, empty = all
    bool corrupt = false;        // flip one analytic gradient (harness self-test)
};

const std::vector<std::string>& gradcheck_names();

std::vector<GradCheckResult> run_gradchecks(const GradCheckOptions& opt = {});

}  // namespace nightseg
