#ifndef DESABS_H
#define DESABS_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Bumped whenever a signature or struct layout in this header changes.
 */
#define DESABS_ABI_VERSION 1

/**
 * Result of every fallible call. Codes 1 to 4 match the exit status of the
 * `desabs` command line tool.
 */
typedef enum {
  DES_STATUS_OK = 0,
  DES_STATUS_INVALID_INPUT = 1,
  DES_STATUS_NOT_OBSERVABLE = 2,
  DES_STATUS_INADMISSIBLE = 3,
  DES_STATUS_NUMERIC_FAILURE = 4,
  DES_STATUS_NULL_POINTER = 5,
  DES_STATUS_PANICKED = 6,
} DesStatus;

/**
 * Extracted or loaded DES-plant automaton.
 */
typedef struct DesAutomaton DesAutomaton;

/**
 * Plant, control alphabet, partition and sampling box.
 */
typedef struct DesSystem DesSystem;

/**
 * Numeric settings for extraction and simulation. Fill with
 * `desabs_options_default` and adjust; passing NULL instead uses the
 * system's own defaults.
 */
typedef struct {
  size_t samples_per_cell;
  double horizon;
  double dt;
  double eps_t;
  double eps_h;
  uint64_t seed;
} DesOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

uint32_t desabs_abi_version(void);

/**
 * Message of the most recent failure on this thread, or NULL when the
 * latest status-returning call succeeded. The pointer stays valid until the
 * next status-returning call on this thread.
 */
const char *desabs_last_error_message(void);

void desabs_string_free(char *s);

/**
 * Parses a system description in the JSON file format.
 */
DesStatus desabs_system_from_json(const char *json, DesSystem **out);

/**
 * The double integrator with axis hypersurfaces and controls -1, 0, 1.
 */
DesStatus desabs_system_double_integrator(DesSystem **out);

void desabs_system_free(DesSystem *system);

/**
 * Writes the system's default settings into `out`.
 */
DesStatus desabs_options_default(const DesSystem *system, DesOptions *out);

/**
 * Builds the automaton of `system`. `options` may be NULL.
 */
DesStatus desabs_extract(const DesSystem *system, const DesOptions *options, DesAutomaton **out);

DesStatus desabs_automaton_from_json(const char *json, DesAutomaton **out);

DesStatus desabs_automaton_to_json(const DesAutomaton *automaton, char **out);

void desabs_automaton_free(DesAutomaton *automaton);

/**
 * Number of states, or 0 for a NULL handle.
 */
size_t desabs_automaton_num_states(const DesAutomaton *automaton);

/**
 * Number of transitions, or 0 for a NULL handle.
 */
size_t desabs_automaton_num_transitions(const DesAutomaton *automaton);

/**
 * Sets `*observable` and the number of (state, plant-symbol) pairs with
 * more than one successor. `witnesses` may be NULL.
 */
DesStatus desabs_check_observability(const DesAutomaton *automaton,
                                     bool *observable,
                                     size_t *witnesses);

/**
 * Recovers the state sequence driven by `symbols` from `initial` and
 * returns it space-separated in `*out_states`. On an inadmissible symbol
 * `*failed_position` (if not NULL) receives its 1-based position.
 */
DesStatus desabs_reconstruct(const DesAutomaton *automaton,
                             const char *initial,
                             const char *symbols,
                             char **out_states,
                             size_t *failed_position);

/**
 * Runs the closed loop from `x0` under the comma-separated `controls` and
 * returns the trace as JSON. `options` may be NULL.
 */
DesStatus desabs_simulate(const DesSystem *system,
                          const double *x0,
                          size_t x0_len,
                          const char *controls,
                          const DesOptions *options,
                          char **out_trace_json);

/**
 * Graphviz rendering of the automaton.
 */
DesStatus desabs_export_dot(const DesAutomaton *automaton, char **out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* DESABS_H */
