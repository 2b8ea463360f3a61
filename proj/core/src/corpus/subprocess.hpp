#pragma once

#include <string>
#include <vector>

namespace streamforge::corpus {

struct SubprocessResult {
  int exit_code = -1;
  bool timed_out = false;
  bool launch_failed = false;
  std::string out;
  std::string err;
  double elapsed_s = 0.0;
};

/// Runs argv[0] with the given arguments, capturing stdout and stderr.
/// The child is killed once `kill_after_s` seconds have passed.
SubprocessResult run_subprocess(const std::vector<std::string>& argv,
                                double kill_after_s);

}  // namespace streamforge::corpus
