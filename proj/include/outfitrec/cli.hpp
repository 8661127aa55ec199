#pragma once

#include <iosfwd>

namespace outfitrec {

// Entry point of the `outfitrec` command. Returns 0 on success, 1 on a
// failed operation (one `error: <kind>: <message>` line on `err`) and 2 on
// a usage error (unknown subcommand, missing or malformed flag).
int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace outfitrec
