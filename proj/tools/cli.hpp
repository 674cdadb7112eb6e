#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tabgnn::cli {

enum ExitCode : int { kOk = 0, kRuntimeFailure = 1, kUsage = 2, kInvalid = 3 };

// Runs one command, e.g. {"train", "--out", "run", "--seed", "7"}. Progress
// goes to `out`; failures print one JSON line to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// 64-bit FNV-1a of the text.
std::string fingerprint(const std::string& text);

}  // namespace tabgnn::cli
