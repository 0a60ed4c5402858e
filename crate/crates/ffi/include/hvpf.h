#ifndef HVPF_H
#define HVPF_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

/**
 * Result codes.
 */
typedef enum HvpfStatus {
  HVPF_STATUS_OK = 0,
  /**
   * Null pointer, zero size or bad UTF-8 in an argument.
   */
  HVPF_STATUS_INVALID_ARGUMENT = 1,
  /**
   * Input data rejected (image size, gaze outside the raster, ...).
   */
  HVPF_STATUS_INPUT = 2,
  /**
   * Configuration or profile set invalid.
   */
  HVPF_STATUS_CONFIG = 3,
  /**
   * A referenced file could not be parsed.
   */
  HVPF_STATUS_FORMAT = 4,
  HVPF_STATUS_IO = 5,
  HVPF_STATUS_INTERNAL = 6,
  /**
   * A panic was caught at the boundary.
   */
  HVPF_STATUS_PANIC = 7,
} HvpfStatus;

/**
 * Result of scheduling one image.
 */
typedef struct HvpfQualityMap HvpfQualityMap;

/**
 * A resolved run configuration (viewing conditions, CSF, variant profiles,
 * patch size).
 */
typedef struct HvpfScheduler HvpfScheduler;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *hvpf_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *hvpf_version(void);

/**
 * Loads a run configuration file; relative paths inside it resolve against
 * its directory.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum HvpfStatus hvpf_scheduler_from_file(const char *path, struct HvpfScheduler **out);

/**
 * Builds a scheduler from configuration JSON text. `base_dir` (nullable)
 * resolves relative paths; defaults to the working directory.
 *
 * # Safety
 * `json` and a non-null `base_dir` must be NUL-terminated strings; `out`
 * must be writable.
 */
enum HvpfStatus hvpf_scheduler_from_json(const char *json,
                                         const char *base_dir,
                                         struct HvpfScheduler **out);

/**
 * # Safety
 * `scheduler` must come from this library and not be used afterwards.
 */
void hvpf_scheduler_free(struct HvpfScheduler *scheduler);

/**
 * Patch side in pixels the scheduler will use.
 *
 * # Safety
 * `scheduler` must be a live handle; `out` must be writable.
 */
enum HvpfStatus hvpf_scheduler_patch_size(const struct HvpfScheduler *scheduler, size_t *out);

/**
 * Schedules an 8-bit grayscale image, decoded through the configured
 * display. `stride` is the row pitch in bytes (0 means `width`).
 * `gaze_xy` (nullable) points to two doubles in pixels. `flow_u`/`flow_v`
 * (both null or both set) hold `width*height` per-pixel motion in pixels
 * per frame.
 *
 * # Safety
 * `pixels` must hold `height` rows of `stride` bytes; the optional arrays
 * must have the documented lengths; `out` must be writable.
 */
enum HvpfStatus hvpf_schedule_gray8(const struct HvpfScheduler *scheduler,
                                    const uint8_t *pixels,
                                    size_t width,
                                    size_t height,
                                    size_t stride,
                                    const double *gaze_xy,
                                    const float *flow_u,
                                    const float *flow_v,
                                    struct HvpfQualityMap **out);

/**
 * Schedules an image given directly as luminance in cd/m², row-major.
 *
 * # Safety
 * `luminance` must hold `width*height` doubles; see
 * [`hvpf_schedule_gray8`] for the other arguments.
 */
enum HvpfStatus hvpf_schedule_luminance(const struct HvpfScheduler *scheduler,
                                        const double *luminance,
                                        size_t width,
                                        size_t height,
                                        const double *gaze_xy,
                                        const float *flow_u,
                                        const float *flow_v,
                                        struct HvpfQualityMap **out);

/**
 * # Safety
 * `map` must come from this library and not be used afterwards.
 */
void hvpf_map_free(struct HvpfQualityMap *map);

/**
 * Grid shape: patch columns, rows and patch side in pixels. Any output
 * pointer may be null.
 *
 * # Safety
 * `map` must be a live handle.
 */
enum HvpfStatus hvpf_map_dims(const struct HvpfQualityMap *map,
                              size_t *cols,
                              size_t *rows,
                              size_t *patch_size);

/**
 * Total and baseline cost in FLOPs and their ratio. Any output pointer may
 * be null.
 *
 * # Safety
 * `map` must be a live handle.
 */
enum HvpfStatus hvpf_map_costs(const struct HvpfQualityMap *map,
                               double *cost_total,
                               double *cost_baseline,
                               double *ratio);

/**
 * Copies the selected variant ids, row-major, into `ids`. `len` must be at
 * least cols*rows.
 *
 * # Safety
 * `map` must be a live handle; `ids` must hold `len` elements.
 */
enum HvpfStatus hvpf_map_grid(const struct HvpfQualityMap *map, uint32_t *ids, size_t len);

/**
 * JSON report (same content as the CLI's `*.report.json`). The pointer is
 * owned by the map and valid until [`hvpf_map_free`].
 *
 * # Safety
 * `map` must be a live handle.
 */
const char *hvpf_map_report_json(const struct HvpfQualityMap *map);

/**
 * Quality-map grid as CSV text. Release with [`hvpf_string_free`].
 *
 * # Safety
 * `map` must be a live handle; `out` must be writable.
 */
enum HvpfStatus hvpf_map_csv(const struct HvpfQualityMap *map, char **out);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void hvpf_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HVPF_H */
