#pragma once

#include <string>
#include <vector>

namespace rhflow {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
};

// Acceptance criteria, runnable individually or in named suites:
//   homogeneous {1,2,3}, gauge {4}, evolution {5}, variation {6},
//   monotonicity {7}, bounds {8}, bochner {9}, reduced-volume {10},
//   persistence {11}, all {1..11}.
// `refine` is the number of grid levels used by the refinement-based checks
// (2 = compare 32^2 against 64^2). scratch_dir receives temporary artifacts
// of the persistence checks.
std::vector<CriterionResult> run_acceptance_suite(const std::string& suite, int refine,
                                                  const std::string& scratch_dir);

} // namespace rhflow
