#pragma once

// Catalog of worked examples.  Each case builds its operator and data from a
// flat parameter object, runs its sweeps and checks, and returns a report
// plus CSV tables named case_<id>_<table>.

#include "kbl/report.hpp"

#include <string>
#include <vector>

namespace kbl {

struct CaseCheck {
    std::string name;
    bool passed = false;
    json value;       ///< measured quantity
    json threshold;   ///< what it was compared against
    std::string detail;
};

struct CaseResult {
    std::string id;
    json params;  ///< defaults merged with overrides
    std::string expected_verdict;
    std::string verdict;
    json results = json::object();
    json residuals = json::object();
    std::vector<CaseCheck> checks;
    std::vector<Table> tables;
    double seconds = 0.0;

    bool passed() const;
    /// Schema-1 report; timings only when asked for, so reruns are byte-identical.
    json report(bool with_timings) const;
};

struct CaseInfo {
    std::string id;
    std::string summary;
    std::string expected_verdict;
    json defaults;
};

const std::vector<CaseInfo>& case_catalog();

/// Throws ConfigError for an unknown id, an unknown parameter or a value of
/// the wrong type.
CaseResult run_case(const std::string& id, const json& overrides = json::object());

} // namespace kbl
