//! C interface to the `mhn` library.
//!
//! Objects are opaque handles created by `*_load` / `*_embed` and released
//! with the matching `*_free`. Every fallible call returns an [`MhnStatus`];
//! on failure [`mhn_last_error`] describes the cause. Strings are UTF-8 and
//! NUL-terminated. Node indices are the row order of `nodes.tsv`.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use mhn::diffgrad::{Tensor, TensorError};
use mhn::evalkit::{knn_topk, link_probability, EvalError};
use mhn::hetgraph::{load_graph, GraphError, HeteroGraph};
use mhn::mhn::{MhnModel as CoreModel, ModelError};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MhnStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// A file could not be read.
    Io = 3,
    /// Malformed graph, schema, metapath or checkpoint contents.
    Format = 4,
    /// Checkpoint and graph do not belong together.
    Mismatch = 5,
    /// Unknown node name or index out of range.
    NotFound = 6,
    /// Output buffer too small; the required size is reported.
    BufferTooSmall = 7,
    /// Non-finite values in a computation.
    Numeric = 8,
    /// Any other invalid argument.
    InvalidArgument = 9,
    /// Internal panic caught at the boundary.
    Panic = 10,
}

/// A loaded heterogeneous graph.
pub struct MhnGraph {
    inner: HeteroGraph,
}

/// A trained model bound to the graph it was loaded against.
pub struct MhnModel {
    inner: CoreModel,
}

/// Output embeddings of every node, `rows x dim`.
pub struct MhnEmbeddings {
    values: Tensor,
    reachable: Vec<bool>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(MhnStatus, String);

impl Failure {
    fn new(status: MhnStatus, message: impl Into<String>) -> Self {
        Failure(status, message.into())
    }
}

fn graph_status(e: &GraphError) -> MhnStatus {
    match e {
        GraphError::Io { .. } => MhnStatus::Io,
        GraphError::UnknownNode(_) => MhnStatus::NotFound,
        _ => MhnStatus::Format,
    }
}

impl From<GraphError> for Failure {
    fn from(e: GraphError) -> Self {
        Failure(graph_status(&e), e.to_string())
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        let status = match &e {
            ModelError::Graph(g) => graph_status(g),
            ModelError::Mismatch(_) => MhnStatus::Mismatch,
            ModelError::Tensor(TensorError::NonFinite { .. }) => MhnStatus::Numeric,
            ModelError::Unreachable(_) => MhnStatus::NotFound,
            ModelError::Config(_) | ModelError::Tensor(_) => MhnStatus::InvalidArgument,
            ModelError::Metapath(_) | ModelError::Checkpoint(_) => MhnStatus::Format,
        };
        Failure(status, e.to_string())
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        Failure(MhnStatus::InvalidArgument, e.to_string())
    }
}

/// Runs `f`, converting errors and panics into a status code.
fn guard<F>(f: F) -> MhnStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MhnStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {message}"));
            MhnStatus::Panic
        }
    }
}

unsafe fn arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure::new(MhnStatus::NullArgument, format!("{name} is NULL")))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| Failure::new(MhnStatus::NullArgument, format!("{name} is NULL")))
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(MhnStatus::NullArgument, format!("{name} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(MhnStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

fn row_index(rows: usize, i: usize) -> Result<usize, Failure> {
    if i < rows {
        Ok(i)
    } else {
        Err(Failure::new(MhnStatus::NotFound, format!("row {i} out of range for {rows} rows")))
    }
}

/// Library version, statically allocated.
#[no_mangle]
pub extern "C" fn mhn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mhn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Loads `nodes.tsv` and `edges.tsv` from `dir`. `schema` may be NULL for
/// `<dir>/schema.json`.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mhn_graph_load(dir: *const c_char, schema: *const c_char, out: *mut *mut MhnGraph) -> MhnStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = std::ptr::null_mut();
        let dir = Path::new(text(dir, "dir")?);
        let schema = if schema.is_null() {
            dir.join("schema.json")
        } else {
            PathBuf::from(text(schema, "schema")?)
        };
        let inner = load_graph(&dir.join("nodes.tsv"), &dir.join("edges.tsv"), &schema)?;
        *out = Box::into_raw(Box::new(MhnGraph { inner }));
        Ok(())
    })
}

/// # Safety
/// `graph` must come from [`mhn_graph_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mhn_graph_free(graph: *mut MhnGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Number of nodes; 0 for NULL.
///
/// # Safety
/// `graph` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mhn_graph_node_count(graph: *const MhnGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.inner.node_count())
}

/// Index of the node called `name`.
///
/// # Safety
/// `graph` must be a live handle, `name` NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mhn_graph_node_index(graph: *const MhnGraph, name: *const c_char, out: *mut usize) -> MhnStatus {
    guard(|| {
        let g = arg(graph, "graph")?;
        let out = out_arg(out, "out")?;
        *out = g.inner.node(text(name, "name")?)?.0;
        Ok(())
    })
}

/// Copies the name of node `index` into `buf` (`capacity` bytes, NUL
/// included). `needed`, when not NULL, receives the size required.
///
/// # Safety
/// `buf` must hold `capacity` bytes; `needed` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn mhn_graph_node_name(
    graph: *const MhnGraph,
    index: usize,
    buf: *mut c_char,
    capacity: usize,
    needed: *mut usize,
) -> MhnStatus {
    guard(|| {
        let g = arg(graph, "graph")?;
        let i = row_index(g.inner.node_count(), index)?;
        let name = g.inner.node_name(mhn::hetgraph::NodeId(i)).as_bytes();
        if let Some(n) = needed.as_mut() {
            *n = name.len() + 1;
        }
        if buf.is_null() || capacity < name.len() + 1 {
            return Err(Failure::new(
                MhnStatus::BufferTooSmall,
                format!("node name needs {} bytes", name.len() + 1),
            ));
        }
        std::ptr::copy_nonoverlapping(name.as_ptr(), buf.cast::<u8>(), name.len());
        *buf.add(name.len()) = 0;
        Ok(())
    })
}

/// Loads a checkpoint written by `mhn train` and checks it against `graph`.
///
/// # Safety
/// `path` must be NUL-terminated, `graph` live, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mhn_model_load(path: *const c_char, graph: *const MhnGraph, out: *mut *mut MhnModel) -> MhnStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = std::ptr::null_mut();
        let g = arg(graph, "graph")?;
        let inner = CoreModel::load(Path::new(text(path, "path")?), &g.inner)?;
        *out = Box::into_raw(Box::new(MhnModel { inner }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`mhn_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mhn_model_free(model: *mut MhnModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Embedding dimension; 0 for NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mhn_model_dim(model: *const MhnModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.dim())
}

/// Embeds every node of `graph` under the fixed inference sample.
///
/// # Safety
/// `model` and `graph` must be live handles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mhn_model_embed(
    model: *const MhnModel,
    graph: *const MhnGraph,
    out: *mut *mut MhnEmbeddings,
) -> MhnStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = std::ptr::null_mut();
        let m = arg(model, "model")?;
        let g = arg(graph, "graph")?;
        m.inner.check_graph(&g.inner)?;
        let e = m.inner.embed_all(&g.inner)?;
        *out = Box::into_raw(Box::new(MhnEmbeddings {
            values: e.values,
            reachable: e.reachable,
        }));
        Ok(())
    })
}

/// # Safety
/// `emb` must come from [`mhn_model_embed`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mhn_embeddings_free(emb: *mut MhnEmbeddings) {
    if !emb.is_null() {
        drop(Box::from_raw(emb));
    }
}

/// # Safety
/// `emb` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mhn_embeddings_rows(emb: *const MhnEmbeddings) -> usize {
    emb.as_ref().map_or(0, |e| e.values.rows())
}

/// # Safety
/// `emb` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mhn_embeddings_dim(emb: *const MhnEmbeddings) -> usize {
    emb.as_ref().map_or(0, |e| e.values.cols())
}

/// Copies all embeddings row-major into `out` (`len` doubles, at least
/// rows * dim).
///
/// # Safety
/// `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mhn_embeddings_copy(emb: *const MhnEmbeddings, out: *mut f64, len: usize) -> MhnStatus {
    guard(|| {
        let e = arg(emb, "emb")?;
        let data = e.values.data();
        if out.is_null() || len < data.len() {
            return Err(Failure::new(
                MhnStatus::BufferTooSmall,
                format!("embeddings need {} doubles", data.len()),
            ));
        }
        std::ptr::copy_nonoverlapping(data.as_ptr(), out, data.len());
        Ok(())
    })
}

/// Copies row `row` into `out` (`len` doubles, at least dim).
///
/// # Safety
/// `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mhn_embeddings_row(emb: *const MhnEmbeddings, row: usize, out: *mut f64, len: usize) -> MhnStatus {
    guard(|| {
        let e = arg(emb, "emb")?;
        let r = e.values.row(row_index(e.values.rows(), row)?);
        if out.is_null() || len < r.len() {
            return Err(Failure::new(
                MhnStatus::BufferTooSmall,
                format!("a row needs {} doubles", r.len()),
            ));
        }
        std::ptr::copy_nonoverlapping(r.as_ptr(), out, r.len());
        Ok(())
    })
}

/// Whether some metapath reached node `row`. Unreachable rows hold the
/// output layer applied to the node's base embedding.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mhn_embeddings_reachable(emb: *const MhnEmbeddings, row: usize, out: *mut bool) -> MhnStatus {
    guard(|| {
        let e = arg(emb, "emb")?;
        let out = out_arg(out, "out")?;
        *out = e.reachable[row_index(e.reachable.len(), row)?];
        Ok(())
    })
}

/// `σ(z_a · z_b)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mhn_link_probability(emb: *const MhnEmbeddings, a: usize, b: usize, out: *mut f64) -> MhnStatus {
    guard(|| {
        let e = arg(emb, "emb")?;
        let out = out_arg(out, "out")?;
        let n = e.values.rows();
        *out = link_probability(e.values.row(row_index(n, a)?), e.values.row(row_index(n, b)?))?;
        Ok(())
    })
}

/// The `k` rows nearest to `query` by Euclidean distance, nearest first,
/// ties by index, never the query itself. `candidates` (may be NULL)
/// restricts the pool to `n_candidates` rows. Up to `capacity` results are
/// written to `out_rows` and `out_dist` (may be NULL); `out_count` receives
/// how many.
///
/// # Safety
/// `candidates` must hold `n_candidates` entries; `out_rows` and a non-NULL
/// `out_dist` must hold `capacity` entries.
#[no_mangle]
pub unsafe extern "C" fn mhn_embeddings_knn(
    emb: *const MhnEmbeddings,
    query: usize,
    k: usize,
    candidates: *const usize,
    n_candidates: usize,
    out_rows: *mut usize,
    out_dist: *mut f64,
    capacity: usize,
    out_count: *mut usize,
) -> MhnStatus {
    guard(|| {
        let e = arg(emb, "emb")?;
        let count = out_arg(out_count, "out_count")?;
        *count = 0;
        if out_rows.is_null() {
            return Err(Failure::new(MhnStatus::NullArgument, "out_rows is NULL"));
        }
        let pool = if candidates.is_null() {
            None
        } else {
            Some(std::slice::from_raw_parts(candidates, n_candidates))
        };
        let found = knn_topk(&e.values, row_index(e.values.rows(), query)?, k, pool)?;
        if capacity < found.len() {
            return Err(Failure::new(
                MhnStatus::BufferTooSmall,
                format!("{} neighbors do not fit in {capacity}", found.len()),
            ));
        }
        for (i, &(row, dist)) in found.iter().enumerate() {
            *out_rows.add(i) = row;
            if !out_dist.is_null() {
                *out_dist.add(i) = dist;
            }
        }
        *count = found.len();
        Ok(())
    })
}

/// Runs the `mhn` command line with `argc` arguments (program name first)
/// and returns its exit code.
///
/// # Safety
/// `argv` must hold `argc` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn mhn_run(argc: c_int, argv: *const *const c_char) -> c_int {
    if argv.is_null() || argc < 1 {
        set_error("argv is empty".into());
        return mhn::cli::EXIT_INPUT;
    }
    let mut args = Vec::with_capacity(argc as usize);
    for i in 0..argc as usize {
        match text(*argv.add(i), "argv entry") {
            Ok(s) => args.push(s.to_string()),
            Err(Failure(_, m)) => {
                set_error(m);
                return mhn::cli::EXIT_INPUT;
            }
        }
    }
    match catch_unwind(|| mhn::cli::run(args)) {
        Ok(code) => code,
        Err(_) => {
            set_error("internal error in command".into());
            // what a panicking binary would exit with
            101
        }
    }
}
