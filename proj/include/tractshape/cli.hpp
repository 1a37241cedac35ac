#pragma once
// Command-line entry point. Subcommands:
//   synth      generate a synthetic cohort directory from a flat config
//   extract    per-measure feature CSVs from a cohort directory
//   train      cross-validated models for an explicit measure list
//   experiment full two-stage fusion run from an experiment config
//   compare    repeated-measures statistics across report files
//   report     render a report file as a text table
// Exit codes: 0 success, 1 data/validation error (message on stderr), 2 usage
// error (usage text printed). Logs go to stderr; artifacts go to files.

namespace tractshape {

int run_command(int argc, const char* const* argv);

}  // namespace tractshape
