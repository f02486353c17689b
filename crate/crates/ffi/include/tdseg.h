#ifndef TDSEG_H
#define TDSEG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum TdsegScaleSelection {
  TDSEG_SCALE_SELECTION_FIXED = 0,
  TDSEG_SCALE_SELECTION_DENSITY = 1,
} TdsegScaleSelection;

// Result of every fallible call.
typedef enum TdsegStatus {
  TDSEG_STATUS_OK = 0,
  TDSEG_STATUS_NULL_POINTER = 1,
  TDSEG_STATUS_INVALID_ARGUMENT = 2,
  TDSEG_STATUS_IMAGE_ERROR = 3,
  TDSEG_STATUS_KNOWLEDGE_BASE_ERROR = 4,
  TDSEG_STATUS_BUFFER_TOO_SMALL = 5,
  TDSEG_STATUS_PANIC = 6,
} TdsegStatus;

// Opaque grayscale image.
typedef struct TdsegImage TdsegImage;

// Opaque, validated knowledge base.
typedef struct TdsegKnowledgeBase TdsegKnowledgeBase;

// Opaque segmentation result, including the object registry.
typedef struct TdsegResult TdsegResult;

// Segmentation parameters. Obtain defaults from [`tdseg_config_default`].
typedef struct TdsegConfig {
  double delta;
  double tau;
  size_t max_refine_iters;
  size_t stop_threshold;
  double drop_ratio;
  enum TdsegScaleSelection scale_selection;
} TdsegConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Default segmentation parameters.
struct TdsegConfig tdseg_config_default(void);

// Message for the last failed call on this thread, or null after a
// successful one. The pointer stays valid until the next call into this
// library on the same thread; do not free it.
const char *tdseg_last_error_message(void);

// Builds an image from `width * height` row-major 8-bit samples.
//
// # Safety
// `data` must point to at least `width * height` readable bytes and `out`
// must be a valid pointer to write the handle to.
enum TdsegStatus tdseg_image_from_gray8(size_t width,
                                        size_t height,
                                        const uint8_t *data,
                                        struct TdsegImage **out);

// Reads a binary or ASCII PGM file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum TdsegStatus tdseg_image_from_pgm_file(const char *path, struct TdsegImage **out);

// # Safety
// `img` must be null or a handle from this library that was not yet freed.
void tdseg_image_free(struct TdsegImage *img);

// Entropy in bits per pixel of the image's prediction residuals.
//
// # Safety
// `img` must be a live image handle and `bits` a valid pointer.
enum TdsegStatus tdseg_image_information_density(const struct TdsegImage *img, double *bits);

// Runs the full top-down segmentation. A null `config` means defaults.
//
// # Safety
// `img` must be a live image handle, `config` null or valid, and `out` a
// valid pointer.
enum TdsegStatus tdseg_segment(const struct TdsegImage *img,
                               const struct TdsegConfig *config,
                               struct TdsegResult **out);

// # Safety
// `res` must be null or a handle from this library that was not yet freed.
void tdseg_result_free(struct TdsegResult *res);

// Index of the level segmentation started at; levels `0..=top` are available.
//
// # Safety
// `res` must be a live result handle and `top` a valid pointer.
enum TdsegStatus tdseg_result_top_level(const struct TdsegResult *res, size_t *top);

// Dimensions of the label map at `level`.
//
// # Safety
// `res` must be a live result handle; `width` and `height` valid pointers.
enum TdsegStatus tdseg_result_level_dims(const struct TdsegResult *res,
                                         size_t level,
                                         size_t *width,
                                         size_t *height);

// Copies the row-major label map of `level` into `buf`, which must hold
// `width * height` entries.
//
// # Safety
// `res` must be a live result handle and `buf` must point to `buf_len`
// writable `uint32_t`s.
enum TdsegStatus tdseg_result_copy_labels(const struct TdsegResult *res,
                                          size_t level,
                                          uint32_t *buf,
                                          size_t buf_len);

// Object registry as JSON. Free the string with [`tdseg_string_free`].
//
// # Safety
// `res` must be a live result handle and `json` a valid pointer.
enum TdsegStatus tdseg_result_registry_json(const struct TdsegResult *res, char **json);

// Parses and validates a knowledge base document.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
enum TdsegStatus tdseg_kb_from_json(const char *json, struct TdsegKnowledgeBase **out);

// # Safety
// `kb` must be null or a handle from this library that was not yet freed.
void tdseg_kb_free(struct TdsegKnowledgeBase *kb);

// Annotates the base level against `kb` and returns the annotation as JSON.
//
// # Safety
// `res` and `kb` must be live handles and `json` a valid pointer.
enum TdsegStatus tdseg_annotate_json(const struct TdsegResult *res,
                                     const struct TdsegKnowledgeBase *kb,
                                     double theta,
                                     char **json);

// # Safety
// `s` must be null or a string returned by this library that was not yet freed.
void tdseg_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TDSEG_H */
