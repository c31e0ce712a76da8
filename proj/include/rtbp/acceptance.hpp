#pragma once
#include <functional>
#include <string>
#include <vector>

#include "rtbp/report.hpp"

namespace rtbp {

struct CriterionResult {
    int id = 0;
    std::string title;
    bool pass = false;
    bool skipped = false;
    bool slow = false;
    std::string detail;
    double seconds = 0;
};

constexpr int kCriteria = 11;

/// Runs one acceptance criterion; numerical exceptions become a FAIL with the message.
CriterionResult run_criterion(int id, const RunConfig& cfg = {});
bool criterion_is_slow(int id);
std::string criterion_title(int id);

/// `selected` empty means all; slow criteria are reported as skipped unless include_slow.
std::vector<CriterionResult> run_acceptance(const RunConfig& cfg, const std::vector<int>& selected, bool include_slow,
                                            const std::function<void(const CriterionResult&)>& on_result = {});

/// "[PASS] 3 melnikov critical points: ..." one line per criterion
std::string format_result(const CriterionResult& r);

}  // namespace rtbp
