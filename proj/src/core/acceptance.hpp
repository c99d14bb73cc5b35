#pragma once

// Acceptance suite: one entry per criterion, each printing a pass/fail line.
// Training-dependent criteria share one orchestrated pipeline run over a
// 512-clip synthetic corpus inside `workdir` (artifacts are reused when they
// already exist so reruns are cheap).

#include <string>
#include <vector>

namespace egs {

struct CriterionResult {
    int number = 0;
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

// Runs criteria 1..11. `only` restricts to a subset (empty = all).
std::vector<CriterionResult> run_acceptance(const std::string& workdir,
                                            const std::vector<int>& only = {});

bool all_passed(const std::vector<CriterionResult>& results);

}  // namespace egs
