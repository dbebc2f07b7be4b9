#ifndef UNSELFIE_H
#define UNSELFIE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum UnsStatus {
  UNS_STATUS_OK = 0,
  UNS_STATUS_NULL_POINTER = 1,
  UNS_STATUS_INVALID_ARGUMENT = 2,
  UNS_STATUS_IO = 3,
  UNS_STATUS_FORMAT = 4,
  UNS_STATUS_DIMENSION = 5,
  UNS_STATUS_SHOULDER_NOT_FOUND = 6,
  UNS_STATUS_DEGENERATE_TRANSFORM = 7,
  UNS_STATUS_EMPTY_DATABASE = 8,
  UNS_STATUS_BUFFER_TOO_SMALL = 9,
  UNS_STATUS_CONFIG = 10,
  UNS_STATUS_PANIC = 11,
} UnsStatus;

// Loaded pose index.
typedef struct UnsDatabase UnsDatabase;

// RGB image, channels in [0, 1].
typedef struct UnsImage UnsImage;

// Body-part label map with per-pixel surface coordinates.
typedef struct UnsIuvMap UnsIuvMap;

typedef struct UnsTransform {
  double scale;
  double tx;
  double ty;
} UnsTransform;

typedef struct UnsHit {
  // Position of the entry in the database; see [`uns_db_id`].
  size_t entry;
  uint64_t d_index;
  double d_uv;
  // Torso pixels shared with the query.
  size_t overlap;
} UnsHit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. Valid until the
// next failing call on the same thread.
const char *uns_last_error_message(void);

// Library version, static string.
const char *uns_version(void);

// # Safety
// `path` must be a NUL-terminated string; `out` a writable pointer.
enum UnsStatus uns_iuv_load(const char *path, struct UnsIuvMap **out);

// Builds a map from `width*height` part labels and `2*width*height`
// interleaved (u, v) values.
//
// # Safety
// `parts` and `uv` must point to arrays of the stated lengths.
enum UnsStatus uns_iuv_from_raw(size_t width,
                                size_t height,
                                const uint8_t *parts,
                                const float *uv,
                                struct UnsIuvMap **out);

// # Safety
// `map` must be null or a handle not yet freed.
void uns_iuv_free(struct UnsIuvMap *map);

// # Safety
// `map` must be a live handle; `width`/`height` writable.
enum UnsStatus uns_iuv_dims(const struct UnsIuvMap *map, size_t *width, size_t *height);

// # Safety
// `map` must be a live handle; `path` NUL-terminated.
enum UnsStatus uns_iuv_save(const struct UnsIuvMap *map, const char *path);

// # Safety
// `path` must be NUL-terminated; `out` writable.
enum UnsStatus uns_image_load(const char *path, struct UnsImage **out);

// Builds an image from `3*width*height` interleaved RGB values.
//
// # Safety
// `rgb` must point to an array of that length.
enum UnsStatus uns_image_from_rgb(size_t width,
                                  size_t height,
                                  const float *rgb,
                                  struct UnsImage **out);

// # Safety
// `img` must be null or a handle not yet freed.
void uns_image_free(struct UnsImage *img);

// Copies interleaved RGB into `buf`, which must hold `3*width*height`
// floats; `len` is its capacity in floats.
//
// # Safety
// `img` must be a live handle; `buf` writable for `len` floats.
enum UnsStatus uns_image_read(const struct UnsImage *img,
                              size_t *width,
                              size_t *height,
                              float *buf,
                              size_t len);

// # Safety
// `img` must be a live handle; `path` NUL-terminated.
enum UnsStatus uns_image_save(const struct UnsImage *img, const char *path);

// Torso index and UV distances between two equally sized poses.
//
// # Safety
// `a`, `b` must be live handles; `d_index`, `d_uv` writable.
enum UnsStatus uns_pose_distances(const struct UnsIuvMap *a,
                                  const struct UnsIuvMap *b,
                                  uint8_t torso_part,
                                  uint64_t *d_index,
                                  double *d_uv);

// Shoulder-anchored alignment with default settings.
//
// # Safety
// `img`, `pose` must be live handles; outputs writable. `transform` may be null.
enum UnsStatus uns_align(const struct UnsImage *img,
                         const struct UnsIuvMap *pose,
                         struct UnsImage **out_img,
                         struct UnsIuvMap **out_pose,
                         struct UnsTransform *transform);

// # Safety
// `path` must be NUL-terminated; `out` writable.
enum UnsStatus uns_db_load(const char *path, struct UnsDatabase **out);

// # Safety
// `db` must be null or a handle not yet freed.
void uns_db_free(struct UnsDatabase *db);

// Number of entries, 0 for a null handle.
//
// # Safety
// `db` must be null or a live handle.
size_t uns_db_len(const struct UnsDatabase *db);

// Copies the id of entry `entry` as a NUL-terminated string. `needed`
// receives the required size including the terminator.
//
// # Safety
// `db` must be a live handle; `buf` writable for `len` bytes or null.
enum UnsStatus uns_db_id(const struct UnsDatabase *db,
                         size_t entry,
                         char *buf,
                         size_t len,
                         size_t *needed);

// Two-step search; writes up to `capacity` hits best first and their number
// to `count`.
//
// # Safety
// `db`, `query` must be live handles; `hits` writable for `capacity` items.
enum UnsStatus uns_search(const struct UnsDatabase *db,
                          const struct UnsIuvMap *query,
                          size_t k,
                          size_t k1,
                          struct UnsHit *hits,
                          size_t capacity,
                          size_t *count);

// Full selfie run with default settings; writes ranked outputs to `out_dir`.
//
// # Safety
// Handles must be live; `out_dir` NUL-terminated.
enum UnsStatus uns_unselfie(const struct UnsImage *selfie,
                            const struct UnsIuvMap *pose,
                            const struct UnsDatabase *db,
                            size_t k,
                            const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UNSELFIE_H */
