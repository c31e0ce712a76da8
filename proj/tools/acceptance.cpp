// Prints one line per acceptance criterion; exit status 1 if any selected criterion fails.
#include <iostream>

#include "CLI11.hpp"
#include "rtbp/acceptance.hpp"

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    std::vector<int> only;
    bool slow = false;
    app.add_option("--only", only, "criterion numbers")->delimiter(',');
    app.add_flag("--slow", slow, "include the slow criteria");
    CLI11_PARSE(app, argc, argv);

    bool ok = true;
    rtbp::run_acceptance({}, only, slow, [&](const rtbp::CriterionResult& r) {
        std::cout << rtbp::format_result(r) << std::endl;
        ok = ok && (r.pass || r.skipped);
    });
    return ok ? 0 : 1;
}
