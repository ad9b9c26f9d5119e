#ifndef AUGEVAL_H
#define AUGEVAL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum AugevalStatus {
  AUGEVAL_STATUS_OK = 0,
  AUGEVAL_STATUS_NULL_POINTER = 1,
  AUGEVAL_STATUS_INVALID_ARGUMENT = 2,
  AUGEVAL_STATUS_IO = 3,
  AUGEVAL_STATUS_IMAGE = 4,
  AUGEVAL_STATUS_DATA = 5,
  AUGEVAL_STATUS_PANIC = 6,
} AugevalStatus;

typedef enum AugevalTestMode {
  AUGEVAL_TEST_MODE_EXACT = 0,
  AUGEVAL_TEST_MODE_NORMAL_APPROX = 1,
  AUGEVAL_TEST_MODE_AUTO = 2,
} AugevalTestMode;

/**
 * Opaque symbol inventory for decoding.
 */
typedef struct AugevalAlphabet AugevalAlphabet;

/**
 * Opaque 8-bit grayscale image.
 */
typedef struct AugevalImage AugevalImage;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next call into the library on this thread.
 */
const char *augeval_last_error_message(void);

/**
 * Creates a `width` x `height` image. `data` holds `width * height` bytes in
 * row-major order, or is NULL for an all-zero image.
 *
 * # Safety
 * `data` must be NULL or point to `width * height` readable bytes; `out`
 * must be a valid pointer.
 */
enum AugevalStatus augeval_image_new(size_t width,
                                     size_t height,
                                     const uint8_t *data,
                                     struct AugevalImage **out);

/**
 * Reads an 8-bit PNG. Colour images need `luma`; `invert` flips intensities.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be a valid pointer.
 */
enum AugevalStatus augeval_image_read_png(const char *path,
                                          bool invert,
                                          bool luma,
                                          struct AugevalImage **out);

/**
 * # Safety
 * `img` must be a live handle and `path` a NUL-terminated string.
 */
enum AugevalStatus augeval_image_write_png(const struct AugevalImage *img, const char *path);

/**
 * Width in pixels, or 0 for NULL.
 *
 * # Safety
 * `img` must be NULL or a live handle.
 */
size_t augeval_image_width(const struct AugevalImage *img);

/**
 * Height in pixels, or 0 for NULL.
 *
 * # Safety
 * `img` must be NULL or a live handle.
 */
size_t augeval_image_height(const struct AugevalImage *img);

/**
 * Copies the row-major pixels into `buf`, which holds `len` bytes.
 *
 * # Safety
 * `img` must be a live handle and `buf` must point to `len` writable bytes.
 */
enum AugevalStatus augeval_image_copy_data(const struct AugevalImage *img,
                                           uint8_t *buf,
                                           size_t len);

/**
 * # Safety
 * `img` must be NULL or a handle not yet freed.
 */
void augeval_image_free(struct AugevalImage *img);

/**
 * Applies a preset (or `combined-top3`, or a config file path) with rate
 * `prob`, seeded by `seed`. `params_json` receives a JSON array of the
 * applied draws; free it with [`augeval_string_free`]. It may be NULL.
 *
 * # Safety
 * `img` must be a live handle, `preset` a NUL-terminated string, `out` a
 * valid pointer and `params_json` NULL or a valid pointer.
 */
enum AugevalStatus augeval_augment(const struct AugevalImage *img,
                                   const char *preset,
                                   uint64_t seed,
                                   double prob,
                                   struct AugevalImage **out,
                                   char **params_json);

/**
 * Height-normalises to 64 rows and pads to 1362 columns.
 *
 * # Safety
 * `img` must be a live handle and `out` a valid pointer.
 */
enum AugevalStatus augeval_preprocess_line(const struct AugevalImage *img,
                                           struct AugevalImage **out);

/**
 * The built-in 51-symbol alphabet. Never NULL.
 */
struct AugevalAlphabet *augeval_alphabet_default(void);

/**
 * Loads an alphabet file, one symbol per line.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum AugevalStatus augeval_alphabet_from_file(const char *path, struct AugevalAlphabet **out);

/**
 * Number of symbols, excluding the blank; 0 for NULL.
 *
 * # Safety
 * `alphabet` must be NULL or a live handle.
 */
size_t augeval_alphabet_len(const struct AugevalAlphabet *alphabet);

/**
 * # Safety
 * `alphabet` must be NULL or a handle not yet freed.
 */
void augeval_alphabet_free(struct AugevalAlphabet *alphabet);

/**
 * Best-path decodes a row-major `timesteps` x `classes` score matrix.
 * Class 0 is the blank. Free the result with [`augeval_string_free`].
 *
 * # Safety
 * `alphabet` must be a live handle, `logits` must point to
 * `timesteps * classes` doubles and `out` must be a valid pointer.
 */
enum AugevalStatus augeval_best_path_decode(const struct AugevalAlphabet *alphabet,
                                            const double *logits,
                                            size_t timesteps,
                                            size_t classes,
                                            char **out);

/**
 * Character error rate of `hyp` against `reference`.
 *
 * # Safety
 * `hyp` and `reference` must be NUL-terminated UTF-8; `out` a valid pointer.
 */
enum AugevalStatus augeval_cer(const char *hyp, const char *reference, double *out);

/**
 * Word error rate of `hyp` against `reference`, splitting on whitespace.
 *
 * # Safety
 * `hyp` and `reference` must be NUL-terminated UTF-8; `out` a valid pointer.
 */
enum AugevalStatus augeval_wer(const char *hyp, const char *reference, double *out);

/**
 * Two-sided signed-rank test on the pairs `(a[i], b[i])`. Fails with
 * `Data` when every difference is zero.
 *
 * # Safety
 * `a` and `b` must point to `n` doubles; the outputs must be valid pointers.
 */
enum AugevalStatus augeval_wilcoxon(const double *a,
                                    const double *b,
                                    size_t n,
                                    enum AugevalTestMode mode,
                                    double *statistic,
                                    double *p_value);

/**
 * `min(1, p * n)`.
 */
double augeval_bonferroni(double p, size_t n);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library and not yet freed.
 */
void augeval_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AUGEVAL_H */
