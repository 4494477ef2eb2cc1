/* flowlatin C API: NetFlow v5 capture analysis and dataflow script execution. */

#ifndef FLOWLATIN_H
#define FLOWLATIN_H

#pragma once

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Analysis selector for `fl_capture_analyze`.
 */
typedef enum FlAnalysis {
  FlAnalysisSrcInterface = 0,
  FlAnalysisSrcIp = 1,
  FlAnalysisProtocol = 2,
  FlAnalysisNode = 3,
} FlAnalysis;

/**
 * Status codes returned by every fallible call.
 */
typedef enum FlStatus {
  FlOk = 0,
  FlNullArgument = 1,
  FlInvalidUtf8 = 2,
  FlParseError = 3,
  FlIoError = 4,
  FlExecError = 5,
  FlBadKind = 6,
  FlOutOfRange = 7,
} FlStatus;

/**
 * Opaque handle: a parsed capture plus its three section tables.
 */
typedef struct FlCapture FlCapture;

/**
 * Opaque handle: one traffic report, rows sorted by flow rate descending.
 */
typedef struct FlReport FlReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the current thread's last error message into `buf` (NUL-terminated,
 * truncated to `len` bytes). Returns the full message length in bytes,
 * excluding the NUL.
 *
 * # Safety
 * `buf` must point to `len` writable bytes, or be null (then only the
 * required length is returned).
 */
uintptr_t fl_last_error(char *buf, uintptr_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *fl_version(void);

/**
 * Parse capture text (`#capture,...` header plus record lines) into a
 * capture handle.
 *
 * # Safety
 * `text` must be a NUL-terminated string, `out` a valid pointer.
 */
enum FlStatus fl_capture_parse_text(const char *text, struct FlCapture **out);

/**
 * Read and parse a capture file.
 *
 * # Safety
 * `path` must be a NUL-terminated string, `out` a valid pointer.
 */
enum FlStatus fl_capture_open_text(const char *path, struct FlCapture **out);

/**
 * Decode a binary NetFlow v5 export datagram into a capture handle whose
 * window is `[capture_start, capture_end]` epoch seconds.
 *
 * # Safety
 * `bytes` must point to `len` readable bytes, `out` must be valid.
 */
enum FlStatus fl_capture_from_datagram(const uint8_t *bytes,
                                       uintptr_t len,
                                       uint64_t capture_start,
                                       uint64_t capture_end,
                                       struct FlCapture **out);

/**
 * Number of flow records in the capture.
 *
 * # Safety
 * `capture` must be a live handle from this library (or null, yielding 0).
 */
uint64_t fl_capture_record_count(const struct FlCapture *capture);

/**
 * Capture window length in whole seconds (floored at 1).
 *
 * # Safety
 * `capture` must be a live handle (or null, yielding 0).
 */
uint64_t fl_capture_duration_secs(const struct FlCapture *capture);

/**
 * Write the three section datasets (NetFlow-Data1/2/3) under `dir`.
 *
 * # Safety
 * `capture` must be a live handle; `dir` a NUL-terminated path.
 */
enum FlStatus fl_capture_write_sections(const struct FlCapture *capture, const char *dir);

/**
 * Release a capture handle.
 *
 * # Safety
 * `capture` must be a handle from this library, or null (a no-op).
 */
void fl_capture_free(struct FlCapture *capture);

/**
 * Run one built-in analysis over a capture.
 *
 * # Safety
 * `capture` must be a live handle, `out` a valid pointer.
 */
enum FlStatus fl_capture_analyze(const struct FlCapture *capture,
                                 enum FlAnalysis kind,
                                 struct FlReport **out);

/**
 * Number of rows in a report (0 for null).
 *
 * # Safety
 * `report` must be a live handle or null.
 */
uintptr_t fl_report_len(const struct FlReport *report);

/**
 * Report window length in seconds (0 for null).
 *
 * # Safety
 * `report` must be a live handle or null.
 */
uint64_t fl_report_duration_secs(const struct FlReport *report);

/**
 * Fetch one report row. The entity pointer stays valid until the report is
 * freed. Out-pointers may be null to skip a column.
 *
 * # Safety
 * `report` must be a live handle; non-null out-pointers must be writable.
 */
enum FlStatus fl_report_row(const struct FlReport *report,
                            uintptr_t index,
                            const char **entity,
                            double *flow_per_sec,
                            uint64_t *record_count);

/**
 * Release a report handle.
 *
 * # Safety
 * `report` must be a handle from this library, or null (a no-op).
 */
void fl_report_free(struct FlReport *report);

/**
 * Parse, compile and execute a script. Load paths in the script resolve
 * against the process working directory; intermediates live under
 * `work_dir`. `workers` 0 means one per CPU; `split_bytes` 0 means 64 KiB.
 *
 * # Safety
 * `script` and `work_dir` must be NUL-terminated strings.
 */
enum FlStatus fl_run_script(const char *script,
                            const char *work_dir,
                            uint32_t workers,
                            uint64_t split_bytes);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FLOWLATIN_H */
