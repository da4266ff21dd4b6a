// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

namespace ncg {

// Config-driven experiment pipeline. Every command is a pure function of
// (config JSON, input files): reruns write byte-identical outputs.
//
// Config sections (unknown keys are rejected everywhere):
//   output  string, destination directory
//   data    either a generator block {a, b, tau, train_samples,
//           test_samples, seed} or a CSV block {train_csv, test_csv,
//           column, truth_csv}
//   model   {"preset": name} or a full architecture object
//   train   optimizer settings (lr, epochs, batch_size, chunk_length,
//           seed, precision, grad_clip, grad_clip_norm, resume,
//           start_epoch)
//   eval    {checkpoint, correlation, transition_threshold, runlog}
//   sweep   {parameter: "theta"|"cos_theta", values, seeds}
//
// Config errors throw std::invalid_argument before any file is written;
// runtime failures throw std::runtime_error.

// Writes train.csv, test.csv, truth.csv, meta.json.
void cmd_generate(const std::string& config_json);

// Trains per config; writes checkpoint.json, runlog.csv, summary.json.
void cmd_train(const std::string& config_json);

// Evaluates a checkpoint on the test data; writes transitions.json,
// correlation.json (when truth is available), overlay.svg and, when a
// runlog is found, training_curve.svg.
void cmd_eval(const std::string& config_json);

// Runs train+eval per (value, seed) cell, in up to `threads` workers;
// writes sweep.csv plus one output subdirectory per cell. A failed cell
// records NaN metrics and does not abort the sweep.
void cmd_sweep(const std::string& config_json, std::size_t threads);

// Finite-difference report over all ops; returns the printable table and
// sets all_pass.
std::string gradcheck_report(std::uint64_t seed, std::size_t instances,
                             bool& all_pass);

// True when the NCG_DETERMINISTIC environment variable is set to 1;
// forces single-threaded execution.
bool deterministic_mode();

}  // namespace ncg
