// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "hennion/selftest.hpp"

int main() {
  int failed = 0;
  hennion::run_checks(hennion::acceptance_checks(), [&](const hennion::CheckResult& r) {
    std::cout << hennion::check_line(r) << std::endl;
    failed += r.pass ? 0 : 1;
  });
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
