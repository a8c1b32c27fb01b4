#ifndef HARMONIC_SWITCH_H
#define HARMONIC_SWITCH_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Outcome of one arrival.
 */
typedef enum hs_cause {
  HS_CAUSE_ACCEPTED = 0,
  HS_CAUSE_NO_THRESHOLD = 1,
  HS_CAUSE_THRESHOLD = 2,
  HS_CAUSE_CAPACITY_GUARD = 3,
  HS_CAUSE_BUDGET = 4,
  HS_CAUSE_RULE = 5,
  HS_CAUSE_OFFLINE = 6,
} hs_cause;

/*
 Result of every fallible call.
 */
typedef enum hs_status {
  HS_STATUS_OK = 0,
  HS_STATUS_NULL_POINTER = 1,
  HS_STATUS_INVALID_ARGUMENT = 2,
  HS_STATUS_INVALID_CONFIG = 3,
  HS_STATUS_INVALID_TRACE = 4,
  HS_STATUS_TOO_LARGE = 5,
  HS_STATUS_BUDGET_EXHAUSTED = 6,
  HS_STATUS_IO = 7,
  HS_STATUS_BUFFER_TOO_SMALL = 8,
  HS_STATUS_INTERNAL = 9,
  HS_STATUS_PANIC = 10,
} hs_status;

/*
 Online simulator fed one arrival at a time.
 */
typedef struct hs_engine hs_engine;

/*
 Packet trace under construction or loaded from CSV.
 */
typedef struct hs_trace hs_trace;

typedef struct hs_sim_summary {
  size_t throughput;
  size_t transmitted;
  size_t guard_triggers;
  uint64_t last_slot;
  /*
   Largest comparison + increment count of a single arrival.
   */
  uint64_t arrival_max_ops;
} hs_sim_summary;

typedef struct hs_proof_summary {
  size_t har;
  size_t opt;
  size_t a;
  size_t b;
  size_t c;
  size_t mapping_violations;
  size_t matching_violations;
  size_t g_u_arrival_mismatches;
  size_t g_u_drain_mismatches;
  /*
   1 if all three inequalities hold.
   */
  uint8_t bounds_hold;
} hs_proof_summary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version, a static NUL-terminated string.
 */
const char *hs_version(void);

/*
 Message of the last failed call on this thread; empty after a success.
 Valid until the next call on the same thread.
 */
const char *hs_last_error(void);

/*
 Empty trace for an `n`-port switch with buffer `capacity`.

 # Safety
 `out` must be a valid pointer to writable storage.
 */
enum hs_status hs_trace_new(size_t n, size_t capacity, struct hs_trace **out);

/*
 Loads a `slot,port` CSV file.

 # Safety
 `path` must be a NUL-terminated string and `out` writable.
 */
enum hs_status hs_trace_read_csv(const char *path,
                                 size_t n,
                                 size_t capacity,
                                 struct hs_trace **out);

/*
 Appends an arrival; slots must be nondecreasing and `1 <= port <= n`.

 # Safety
 `trace` must come from `hs_trace_new` or `hs_trace_read_csv`.
 */
enum hs_status hs_trace_push(struct hs_trace *trace, uint64_t slot, size_t port);

/*
 Number of packets, 0 for a null handle.

 # Safety
 `trace` must be null or a live handle.
 */
size_t hs_trace_len(const struct hs_trace *trace);

/*
 # Safety
 `trace` must be null or a live handle, not used afterwards.
 */
void hs_trace_free(struct hs_trace *trace);

/*
 Runs a policy over a whole trace.

 # Safety
 `trace` must be a live handle, `policy` a NUL-terminated string and
 `out` writable.
 */
enum hs_status hs_simulate(const struct hs_trace *trace,
                           const char *policy,
                           double alpha,
                           size_t theta,
                           struct hs_sim_summary *out);

/*
 Exact optimum. `accept` receives one 0/1 byte per packet when not null;
 `accept_len` must then be at least the trace length.

 # Safety
 `trace` must be a live handle, `opt_count` writable, and `accept`
 null or valid for `accept_len` bytes.
 */
enum hs_status hs_offline_opt(const struct hs_trace *trace,
                              size_t max_packets,
                              uint64_t node_budget,
                              size_t *opt_count,
                              uint8_t *accept,
                              size_t accept_len);

/*
 Proof check against `accept` (one 0/1 byte per packet), or against the
 oracle's optimum when `accept` is null.

 # Safety
 `trace` must be a live handle, `accept` null or valid for `accept_len`
 bytes, `out` writable.
 */
enum hs_status hs_check_proof(const struct hs_trace *trace,
                              const uint8_t *accept,
                              size_t accept_len,
                              struct hs_proof_summary *out);

/*
 Full proof ledger as JSON; release with `hs_string_free`.

 # Safety
 As for `hs_check_proof`; `json` must be writable.
 */
enum hs_status hs_check_proof_json(const struct hs_trace *trace,
                                   const uint8_t *accept,
                                   size_t accept_len,
                                   char **json);

/*
 # Safety
 `s` must be null or a string returned by this library.
 */
void hs_string_free(char *s);

/*
 Online engine for `policy` (see `hs_simulate` for `alpha` and `theta`).

 # Safety
 `policy` must be a NUL-terminated string and `out` writable.
 */
enum hs_status hs_engine_new(size_t n,
                             size_t capacity,
                             const char *policy,
                             double alpha,
                             size_t theta,
                             struct hs_engine **out);

/*
 Feeds one arrival. Transmission rounds up to `slot` run first.

 # Safety
 `engine` must be a live handle; `cause` must be writable.
 */
enum hs_status hs_engine_arrive(struct hs_engine *engine,
                                uint64_t slot,
                                size_t port,
                                enum hs_cause *cause);

/*
 Current queue length of `port`.

 # Safety
 `engine` must be a live handle; `occ` writable.
 */
enum hs_status hs_engine_occupancy(const struct hs_engine *engine, size_t port, size_t *occ);

/*
 Packets accepted so far.

 # Safety
 `engine` must be null or a live handle.
 */
size_t hs_engine_throughput(const struct hs_engine *engine);

/*
 # Safety
 `engine` must be null or a live handle, not used afterwards.
 */
void hs_engine_free(struct hs_engine *engine);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HARMONIC_SWITCH_H */
