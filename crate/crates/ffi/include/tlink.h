#ifndef TLINK_H
#define TLINK_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum TlinkStatus {
  TLINK_STATUS_OK = 0,
  TLINK_STATUS_NULL_POINTER = 1,
  TLINK_STATUS_INVALID_ARGUMENT = 2,
  TLINK_STATUS_IO = 3,
  TLINK_STATUS_CHECKPOINT = 4,
  TLINK_STATUS_OUT_OF_RANGE = 5,
  TLINK_STATUS_INTERNAL = 6,
} TlinkStatus;

/**
 * Opaque trained model.
 */
typedef struct TlinkModel TlinkModel;

/**
 * Opaque cache store.
 */
typedef struct TlinkStore TlinkStore;

/**
 * Cache settings; `q = 0` selects the default hash constant.
 */
typedef struct TlinkCacheConfig {
  size_t m1;
  size_t m2;
  size_t f;
  size_t d0;
  double alpha;
  uint64_t q;
  size_t k;
  uint64_t seed;
} TlinkCacheConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *tlink_last_error(void);

/**
 * Slot of key `a` in a dictionary of capacity `m`; `q = 0` selects the
 * default hash constant. Returns 0 when `m` is 0.
 */
size_t tlink_hash_slot(uint32_t a, size_t m, uint64_t q);

/**
 * Scalars stored per node for `cfg`.
 */
size_t tlink_scalars_per_node(struct TlinkCacheConfig cfg);

/**
 * Allocates an empty store for nodes `1..=num_nodes`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum TlinkStatus tlink_store_new(struct TlinkCacheConfig cfg,
                                 size_t num_nodes,
                                 struct TlinkStore **out);

/**
 * Loads a store checkpoint.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum TlinkStatus tlink_store_load(const char *path, struct TlinkStore **out);

/**
 * Writes a store checkpoint.
 *
 * # Safety
 * `store` must come from this library; `path` must be NUL-terminated.
 */
enum TlinkStatus tlink_store_save(const struct TlinkStore *store, const char *path);

/**
 * Releases a store. Null is ignored.
 *
 * # Safety
 * `store` must come from this library and not be used afterwards.
 */
void tlink_store_free(struct TlinkStore *store);

/**
 * Applies one interaction using the model's recurrent cells. The model's
 * cache settings must match the store's.
 *
 * # Safety
 * Both handles must come from this library.
 */
enum TlinkStatus tlink_store_apply_event(struct TlinkStore *store,
                                         const struct TlinkModel *model,
                                         uint32_t src,
                                         uint32_t dst,
                                         double t);

/**
 * Looks up key `a` in `u`'s hop-`hop` dictionary. On a hit copies the
 * value (width F) into `values` and sets `*found = 1`; otherwise
 * `*found = 0` and `values` is untouched.
 *
 * # Safety
 * `values` must hold at least `capacity` doubles; `found` must be writable.
 */
enum TlinkStatus tlink_store_lookup(const struct TlinkStore *store,
                                    uint32_t u,
                                    size_t hop,
                                    uint32_t a,
                                    double *values,
                                    size_t capacity,
                                    int32_t *found);

/**
 * Loads a model checkpoint.
 *
 * # Safety
 * `path` must be NUL-terminated and `out` writable.
 */
enum TlinkStatus tlink_model_load(const char *path, struct TlinkModel **out);

/**
 * Releases a model. Null is ignored.
 *
 * # Safety
 * `model` must come from this library and not be used afterwards.
 */
void tlink_model_free(struct TlinkModel *model);

/**
 * Allocates an empty store with the model's cache settings.
 *
 * # Safety
 * `model` must come from this library and `out` be writable.
 */
enum TlinkStatus tlink_model_new_store(const struct TlinkModel *model,
                                       size_t num_nodes,
                                       struct TlinkStore **out);

/**
 * Probability that `u` and `v` interact next, given the store's history.
 *
 * # Safety
 * Both handles must come from this library; `prob` must be writable.
 */
enum TlinkStatus tlink_model_predict(const struct TlinkModel *model,
                                     const struct TlinkStore *store,
                                     uint32_t u,
                                     uint32_t v,
                                     double *prob);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TLINK_H */
