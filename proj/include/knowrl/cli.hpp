#ifndef KNOWRL_CLI_HPP_
#define KNOWRL_CLI_HPP_

#include <iosfwd>

namespace knowrl {

// Exit codes: 0 success, 1 validation or runtime failure (one JSON error
// line on `err`), 2 usage error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace knowrl

#endif  // KNOWRL_CLI_HPP_
