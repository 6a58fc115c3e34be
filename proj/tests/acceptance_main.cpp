// Acceptance suite: one pass/fail line per criterion, exit 0 iff all pass.
#include <chrono>
#include <cstdio>
#include <filesystem>

#include "rhflow/verify.hpp"

int main(int argc, char** argv) {
    const std::string suite = argc > 1 ? argv[1] : "all";
    const auto scratch = std::filesystem::temp_directory_path() / "rhflow_acceptance";
    std::filesystem::create_directories(scratch);

    const auto t0 = std::chrono::steady_clock::now();
    std::vector<rhflow::CriterionResult> results;
    try {
        results = rhflow::run_acceptance_suite(suite, 2, scratch.string());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "acceptance suite aborted: %s\n", e.what());
        return 1;
    }

    bool all = true;
    for (const auto& r : results) {
        std::printf("[%s] criterion %2d: %s\n        %s\n", r.pass ? "PASS" : "FAIL", r.id,
                    r.name.c_str(), r.detail.c_str());
        all = all && r.pass;
    }
    const auto t1 = std::chrono::steady_clock::now();
    const double secs = std::chrono::duration<double>(t1 - t0).count();
    std::printf("%zu criteria, %s, %.1f s total\n", results.size(),
                all ? "all passed" : "FAILURES PRESENT", secs);
    return all ? 0 : 1;
}
