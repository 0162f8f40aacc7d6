/* Generated by cbindgen from crates/ffi/src/lib.rs. */

#ifndef MHN_H
#define MHN_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum MhnStatus {
  MHN_STATUS_OK = 0,
  // A required pointer argument was NULL.
  MHN_STATUS_NULL_ARGUMENT = 1,
  // A string argument was not valid UTF-8.
  MHN_STATUS_INVALID_UTF8 = 2,
  // A file could not be read.
  MHN_STATUS_IO = 3,
  // Malformed graph, schema, metapath or checkpoint contents.
  MHN_STATUS_FORMAT = 4,
  // Checkpoint and graph do not belong together.
  MHN_STATUS_MISMATCH = 5,
  // Unknown node name or index out of range.
  MHN_STATUS_NOT_FOUND = 6,
  // Output buffer too small; the required size is reported.
  MHN_STATUS_BUFFER_TOO_SMALL = 7,
  // Non-finite values in a computation.
  MHN_STATUS_NUMERIC = 8,
  // Any other invalid argument.
  MHN_STATUS_INVALID_ARGUMENT = 9,
  // Internal panic caught at the boundary.
  MHN_STATUS_PANIC = 10,
} MhnStatus;

// Output embeddings of every node, `rows x dim`.
typedef struct MhnEmbeddings MhnEmbeddings;

// A loaded heterogeneous graph.
typedef struct MhnGraph MhnGraph;

// A trained model bound to the graph it was loaded against.
typedef struct MhnModel MhnModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version, statically allocated.
const char *mhn_version(void);

// Message of the last failed call on this thread, or NULL. Valid until the
// next failing call on the same thread.
const char *mhn_last_error(void);

// Loads `nodes.tsv` and `edges.tsv` from `dir`. `schema` may be NULL for
// `<dir>/schema.json`.
//
// # Safety
// String arguments must be NUL-terminated; `out` must be writable.
enum MhnStatus mhn_graph_load(const char *dir, const char *schema, struct MhnGraph **out);

// # Safety
// `graph` must come from [`mhn_graph_load`] and not be used afterwards.
void mhn_graph_free(struct MhnGraph *graph);

// Number of nodes; 0 for NULL.
//
// # Safety
// `graph` must be NULL or a live handle.
size_t mhn_graph_node_count(const struct MhnGraph *graph);

// Index of the node called `name`.
//
// # Safety
// `graph` must be a live handle, `name` NUL-terminated, `out` writable.
enum MhnStatus mhn_graph_node_index(const struct MhnGraph *graph, const char *name, size_t *out);

// Copies the name of node `index` into `buf` (`capacity` bytes, NUL
// included). `needed`, when not NULL, receives the size required.
//
// # Safety
// `buf` must hold `capacity` bytes; `needed` must be NULL or writable.
enum MhnStatus mhn_graph_node_name(const struct MhnGraph *graph,
                                   size_t index,
                                   char *buf,
                                   size_t capacity,
                                   size_t *needed);

// Loads a checkpoint written by `mhn train` and checks it against `graph`.
//
// # Safety
// `path` must be NUL-terminated, `graph` live, `out` writable.
enum MhnStatus mhn_model_load(const char *path,
                              const struct MhnGraph *graph,
                              struct MhnModel **out);

// # Safety
// `model` must come from [`mhn_model_load`] and not be used afterwards.
void mhn_model_free(struct MhnModel *model);

// Embedding dimension; 0 for NULL.
//
// # Safety
// `model` must be NULL or a live handle.
size_t mhn_model_dim(const struct MhnModel *model);

// Embeds every node of `graph` under the fixed inference sample.
//
// # Safety
// `model` and `graph` must be live handles; `out` writable.
enum MhnStatus mhn_model_embed(const struct MhnModel *model,
                               const struct MhnGraph *graph,
                               struct MhnEmbeddings **out);

// # Safety
// `emb` must come from [`mhn_model_embed`] and not be used afterwards.
void mhn_embeddings_free(struct MhnEmbeddings *emb);

// # Safety
// `emb` must be NULL or a live handle.
size_t mhn_embeddings_rows(const struct MhnEmbeddings *emb);

// # Safety
// `emb` must be NULL or a live handle.
size_t mhn_embeddings_dim(const struct MhnEmbeddings *emb);

// Copies all embeddings row-major into `out` (`len` doubles, at least
// rows * dim).
//
// # Safety
// `out` must hold `len` doubles.
enum MhnStatus mhn_embeddings_copy(const struct MhnEmbeddings *emb, double *out, size_t len);

// Copies row `row` into `out` (`len` doubles, at least dim).
//
// # Safety
// `out` must hold `len` doubles.
enum MhnStatus mhn_embeddings_row(const struct MhnEmbeddings *emb,
                                  size_t row,
                                  double *out,
                                  size_t len);

// Whether some metapath reached node `row`. Unreachable rows hold the
// output layer applied to the node's base embedding.
//
// # Safety
// `out` must be writable.
enum MhnStatus mhn_embeddings_reachable(const struct MhnEmbeddings *emb, size_t row, bool *out);

// `σ(z_a · z_b)`.
//
// # Safety
// `out` must be writable.
enum MhnStatus mhn_link_probability(const struct MhnEmbeddings *emb,
                                    size_t a,
                                    size_t b,
                                    double *out);

// The `k` rows nearest to `query` by Euclidean distance, nearest first,
// ties by index, never the query itself. `candidates` (may be NULL)
// restricts the pool to `n_candidates` rows. Up to `capacity` results are
// written to `out_rows` and `out_dist` (may be NULL); `out_count` receives
// how many.
//
// # Safety
// `candidates` must hold `n_candidates` entries; `out_rows` and a non-NULL
// `out_dist` must hold `capacity` entries.
enum MhnStatus mhn_embeddings_knn(const struct MhnEmbeddings *emb,
                                  size_t query,
                                  size_t k,
                                  const size_t *candidates,
                                  size_t n_candidates,
                                  size_t *out_rows,
                                  double *out_dist,
                                  size_t capacity,
                                  size_t *out_count);

// Runs the `mhn` command line with `argc` arguments (program name first)
// and returns its exit code.
//
// # Safety
// `argv` must hold `argc` NUL-terminated strings.
int mhn_run(int argc, const char *const *argv);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MHN_H */
