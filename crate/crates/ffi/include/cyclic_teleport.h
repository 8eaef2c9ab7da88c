#ifndef CYCLIC_TELEPORT_H
#define CYCLIC_TELEPORT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CtStatus {
  CT_STATUS_OK = 0,
  CT_STATUS_NULL_POINTER = 1,
  CT_STATUS_INVALID_ARGUMENT = 2,
  CT_STATUS_TAIL_BUDGET = 3,
  CT_STATUS_IO = 4,
  CT_STATUS_INTERNAL = 5,
} CtStatus;

typedef enum CtCase {
  CT_CASE_I = 1,
  CT_CASE_II = 2,
  CT_CASE_III = 3,
  CT_CASE_IV = 4,
  CT_CASE_V = 5,
  CT_CASE_VI = 6,
  CT_CASE_VII = 7,
  CT_CASE_VIII = 8,
  CT_CASE_AMBIGUOUS = 9,
  CT_CASE_IMPOSSIBLE = 10,
} CtCase;

/**
 * Simulator for one parameter set.
 */
typedef struct CtSimulator CtSimulator;

/**
 * Enumerated outcomes in lexicographic event order.
 */
typedef struct CtTable CtTable;

/**
 * One heralded event. Fidelities are NaN when undefined (Impossible).
 */
typedef struct CtHerald {
  enum CtCase case_id;
  double probability;
  /**
   * A→B, B→C, C→A.
   */
  double fidelities[3];
  bool faithful;
} CtHerald;

typedef struct CtOutcome {
  /**
   * n7..n12.
   */
  uint32_t counts[6];
  enum CtCase case_id;
  double probability;
  double fidelities[3];
  bool faithful;
} CtOutcome;

/**
 * Result of one seeded three-party run.
 */
typedef struct CtRunSummary {
  uint64_t seed;
  uint32_t counts[6];
  enum CtCase case_id;
  /**
   * NaN for failed runs.
   */
  double fidelities[3];
  bool failed;
  uint32_t messages;
} CtRunSummary;

/**
 * Library version as a static NUL-terminated string.
 */
const char *ct_version(void);

/**
 * Message for the last failed call on this thread; empty after a success.
 * Valid until the next call into the library from this thread.
 */
const char *ct_last_error(void);

/**
 * Creates a simulator with default cutoff and tail budget.
 * `theta` points to three angles.
 */
enum CtStatus ct_simulator_new(double alpha, const double *theta, struct CtSimulator **out);

/**
 * Like [`ct_simulator_new`]; `cutoff == 0` and a NaN `tail_budget` select
 * the defaults.
 */
enum CtStatus ct_simulator_new_ex(double alpha,
                                  const double *theta,
                                  uint32_t cutoff,
                                  double tail_budget,
                                  struct CtSimulator **out);

void ct_simulator_free(struct CtSimulator *sim);

/**
 * Heralds the event `counts` (six photon numbers n7..n12).
 */
enum CtStatus ct_simulator_herald(const struct CtSimulator *sim,
                                  const uint32_t *counts,
                                  struct CtHerald *out);

/**
 * Classifies an event without a simulator. `parities` (may be null)
 * receives 0 (even) or 1 (odd) per pair, or 255 when the event is not one
 * of cases I-VIII.
 */
enum CtStatus ct_classify_event(const uint32_t *counts, enum CtCase *case_id, uint8_t *parities);

/**
 * Snapshot of every enumerated event.
 */
enum CtStatus ct_simulator_enumerate(const struct CtSimulator *sim, struct CtTable **out);

/**
 * Number of rows; 0 for a null table.
 */
size_t ct_table_len(const struct CtTable *table);

enum CtStatus ct_table_get(const struct CtTable *table, size_t index, struct CtOutcome *out);

/**
 * Total enumerated mass and the Ambiguous part of it.
 */
enum CtStatus ct_table_masses(const struct CtTable *table, double *total, double *ambiguous);

void ct_table_free(struct CtTable *table);

/**
 * One seeded protocol run. If `trace_path` is not null the JSON-lines trace
 * is written there.
 */
enum CtStatus ct_simulator_run(const struct CtSimulator *sim,
                               uint64_t seed,
                               const char *trace_path,
                               struct CtRunSummary *out);

#endif  /* CYCLIC_TELEPORT_H */
