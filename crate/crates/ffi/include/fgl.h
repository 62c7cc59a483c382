#ifndef FGL_H
#define FGL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Distance used by the estimators.
 */
typedef enum FglMetric {
  FGL_METRIC_HAMMING = 0,
  FGL_METRIC_ADJACENCY_SPECTRAL = 1,
  FGL_METRIC_LAPLACIAN_SPECTRAL = 2,
} FglMetric;

/**
 * Result code of every fallible call.
 */
typedef enum FglStatus {
  FGL_STATUS_OK = 0,
  FGL_STATUS_NULL_POINTER = 1,
  FGL_STATUS_INVALID_ARGUMENT = 2,
  FGL_STATUS_SIZE_MISMATCH = 3,
  FGL_STATUS_EMPTY_SAMPLE = 4,
  FGL_STATUS_SEARCH_TOO_LARGE = 5,
  FGL_STATUS_IO = 6,
  FGL_STATUS_FORMAT = 7,
  FGL_STATUS_BUFFER_TOO_SMALL = 8,
  FGL_STATUS_PANIC = 9,
} FglStatus;

/**
 * Opaque simple undirected graph.
 */
typedef struct FglGraph FglGraph;

/**
 * Opaque trained network.
 */
typedef struct FglModel FglModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error of this thread, NUL-terminated, into `buf`.
 * Returns the message length without the terminator; when it is not
 * smaller than `len` the copy is truncated.
 */
size_t fgl_last_error_message(char *buf, size_t len);

/**
 * Creates the empty graph on `n` vertices.
 */
enum FglStatus fgl_graph_new(size_t n, struct FglGraph **out);

/**
 * Parses a strict-upper-triangle bit string of '0'/'1' characters.
 */
enum FglStatus fgl_graph_from_upper_bits(size_t n, const char *bits, struct FglGraph **out);

/**
 * Releases a graph. Null is ignored.
 */
void fgl_graph_free(struct FglGraph *g);

/**
 * Vertex count, or 0 for a null handle.
 */
size_t fgl_graph_n(const struct FglGraph *g);

/**
 * Edge count, or 0 for a null handle.
 */
size_t fgl_graph_edge_count(const struct FglGraph *g);

/**
 * Adds or removes edge `{i, j}`. Self-loops are rejected.
 */
enum FglStatus fgl_graph_set_edge(struct FglGraph *g, size_t i, size_t j, bool present);

enum FglStatus fgl_graph_has_edge(const struct FglGraph *g, size_t i, size_t j, bool *out);

/**
 * Writes the upper-triangle bit string, NUL-terminated. `required`
 * receives the buffer size needed, terminator included.
 */
enum FglStatus fgl_graph_to_upper_bits(const struct FglGraph *g,
                                       char *buf,
                                       size_t len,
                                       size_t *required);

enum FglStatus fgl_distance(enum FglMetric metric,
                            const struct FglGraph *a,
                            const struct FglGraph *b,
                            double *out);

/**
 * Writes the `n` eigenvalues of the adjacency matrix (descending) or the
 * Laplacian (ascending) into `out`, which must hold `len >= n` values.
 */
enum FglStatus fgl_spectrum(const struct FglGraph *g, bool laplacian, double *out, size_t len);

/**
 * Thresholds the sample mean adjacency matrix at 1/2.
 */
enum FglStatus fgl_naive_mean(const struct FglGraph *const *graphs,
                              size_t count,
                              struct FglGraph **out);

/**
 * Index of the sample member with the smallest Fréchet objective.
 */
enum FglStatus fgl_sample_medoid(const struct FglGraph *const *graphs,
                                 size_t count,
                                 enum FglMetric metric,
                                 size_t *index,
                                 double *objective);

/**
 * Exact Fréchet mean by enumeration (graphs with at most 6 vertices).
 */
enum FglStatus fgl_exhaustive_mean(const struct FglGraph *const *graphs,
                                   size_t count,
                                   enum FglMetric metric,
                                   struct FglGraph **out,
                                   double *objective);

/**
 * Loads a network checkpoint.
 */
enum FglStatus fgl_model_load(const char *path, struct FglModel **out);

/**
 * Releases a model. Null is ignored.
 */
void fgl_model_free(struct FglModel *m);

/**
 * Network estimate of the Fréchet mean of a sample of 28-vertex graphs.
 */
enum FglStatus fgl_model_predict(const struct FglModel *model,
                                 const struct FglGraph *const *graphs,
                                 size_t count,
                                 struct FglGraph **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FGL_H */
