#ifndef POLARSEG_CLI_HPP
#define POLARSEG_CLI_HPP

namespace polarseg {

// Full command-line surface: subcommands phantom, preprocess,
// build-polar-dataset, segment, evaluate, sweep. Returns the process exit
// code: 0 success, 1 processing error (diagnostic on stderr), 2 usage error.
int cli_main(int argc, const char* const* argv);

}  // namespace polarseg

#endif  // POLARSEG_CLI_HPP
