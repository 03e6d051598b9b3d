// Acceptance gate: one pass/fail line per criterion, exit 0 iff all pass.
#include <iostream>

#include "qcm/verify.hpp"

#ifndef QCM_CLI_PATH
#define QCM_CLI_PATH ""
#endif

int main() { return qcm::cmd_verify(std::cout, QCM_CLI_PATH); }
