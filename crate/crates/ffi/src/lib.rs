//! C ABI over the `fgl` library.
//!
//! Objects cross the boundary as opaque handles (`FglGraph`, `FglModel`)
//! that the caller releases with the matching `_free` function. Every
//! fallible call returns an [`FglStatus`]; on failure a description is kept
//! per thread and can be copied out with [`fgl_last_error_message`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use fgl::error::Error;
use fgl::frechet::{exhaustive_frechet_mean, naive_frechet_mean, sample_medoid};
use fgl::minicnn::{load_checkpoint, ModelParams};
use fgl::pipeline::predict_frechet;
use fgl::spectra::{adjacency_spectrum, laplacian_spectrum};
use fgl::{Graph, Metric};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FglStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    SizeMismatch = 3,
    EmptySample = 4,
    SearchTooLarge = 5,
    Io = 6,
    Format = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

/// Distance used by the estimators.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FglMetric {
    Hamming = 0,
    AdjacencySpectral = 1,
    LaplacianSpectral = 2,
}

impl From<FglMetric> for Metric {
    fn from(m: FglMetric) -> Self {
        match m {
            FglMetric::Hamming => Metric::Hamming,
            FglMetric::AdjacencySpectral => Metric::AdjacencySpectral,
            FglMetric::LaplacianSpectral => Metric::LaplacianSpectral,
        }
    }
}

/// Opaque simple undirected graph.
pub struct FglGraph(Graph);

/// Opaque trained network.
pub struct FglModel(ModelParams<f32>);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(err: &Error) -> FglStatus {
    match err {
        Error::EmptySample => FglStatus::EmptySample,
        Error::SizeMismatch { .. } | Error::Shape(_) => FglStatus::SizeMismatch,
        Error::SearchTooLarge { .. } => FglStatus::SearchTooLarge,
        Error::Io { .. } | Error::Missing { .. } => FglStatus::Io,
        Error::VersionMismatch { .. } | Error::Truncated(_) | Error::Format { .. } => FglStatus::Format,
        _ => FglStatus::InvalidArgument,
    }
}

/// Runs `f`, records any error or panic, and maps it to a status.
fn guard(f: impl FnOnce() -> Result<(), (FglStatus, String)>) -> FglStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FglStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            FglStatus::Panic
        }
    }
}

fn lib(err: Error) -> (FglStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(what: &str) -> (FglStatus, String) {
    (FglStatus::NullPointer, format!("{what} is null"))
}

unsafe fn graph_ref<'a>(g: *const FglGraph, what: &str) -> Result<&'a Graph, (FglStatus, String)> {
    g.as_ref().map(|g| &g.0).ok_or_else(|| null(what))
}

unsafe fn sample_from(graphs: *const *const FglGraph, count: usize) -> Result<Vec<Graph>, (FglStatus, String)> {
    if count == 0 {
        return Err(lib(Error::EmptySample));
    }
    if graphs.is_null() {
        return Err(null("graph array"));
    }
    std::slice::from_raw_parts(graphs, count)
        .iter()
        .map(|&g| graph_ref(g, "graph array entry").cloned())
        .collect()
}

unsafe fn put<T>(out: *mut T, value: T) -> Result<(), (FglStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

fn boxed(g: Graph) -> *mut FglGraph {
    Box::into_raw(Box::new(FglGraph(g)))
}

/// Copies the last error of this thread, NUL-terminated, into `buf`.
/// Returns the message length without the terminator; when it is not
/// smaller than `len` the copy is truncated.
#[no_mangle]
pub unsafe extern "C" fn fgl_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Creates the empty graph on `n` vertices.
#[no_mangle]
pub unsafe extern "C" fn fgl_graph_new(n: usize, out: *mut *mut FglGraph) -> FglStatus {
    guard(|| put(out, boxed(Graph::empty(n))))
}

/// Parses a strict-upper-triangle bit string of '0'/'1' characters.
#[no_mangle]
pub unsafe extern "C" fn fgl_graph_from_upper_bits(n: usize, bits: *const c_char, out: *mut *mut FglGraph) -> FglStatus {
    guard(|| {
        if bits.is_null() {
            return Err(null("bits"));
        }
        let text = CStr::from_ptr(bits)
            .to_str()
            .map_err(|_| (FglStatus::InvalidArgument, "bits are not UTF-8".to_string()))?;
        let g = Graph::from_upper_bits(n, text).map_err(lib)?;
        put(out, boxed(g))
    })
}

/// Releases a graph. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn fgl_graph_free(g: *mut FglGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Vertex count, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn fgl_graph_n(g: *const FglGraph) -> usize {
    g.as_ref().map_or(0, |g| g.0.n())
}

/// Edge count, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn fgl_graph_edge_count(g: *const FglGraph) -> usize {
    g.as_ref().map_or(0, |g| g.0.edge_count())
}

/// Adds or removes edge `{i, j}`. Self-loops are rejected.
#[no_mangle]
pub unsafe extern "C" fn fgl_graph_set_edge(g: *mut FglGraph, i: usize, j: usize, present: bool) -> FglStatus {
    guard(|| {
        let g = g.as_mut().ok_or_else(|| null("graph"))?;
        let n = g.0.n();
        if i >= n || j >= n || i == j {
            return Err((FglStatus::InvalidArgument, format!("edge ({i}, {j}) invalid for n = {n}")));
        }
        g.0.set_edge(i, j, present);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn fgl_graph_has_edge(g: *const FglGraph, i: usize, j: usize, out: *mut bool) -> FglStatus {
    guard(|| {
        let g = graph_ref(g, "graph")?;
        if i >= g.n() || j >= g.n() {
            return Err((FglStatus::InvalidArgument, format!("vertex out of range for n = {}", g.n())));
        }
        put(out, g.has_edge(i, j))
    })
}

/// Writes the upper-triangle bit string, NUL-terminated. `required`
/// receives the buffer size needed, terminator included.
#[no_mangle]
pub unsafe extern "C" fn fgl_graph_to_upper_bits(
    g: *const FglGraph,
    buf: *mut c_char,
    len: usize,
    required: *mut usize,
) -> FglStatus {
    guard(|| {
        let bits = graph_ref(g, "graph")?.to_upper_bits();
        if !required.is_null() {
            required.write(bits.len() + 1);
        }
        if buf.is_null() || len < bits.len() + 1 {
            return Err((FglStatus::BufferTooSmall, format!("need {} bytes", bits.len() + 1)));
        }
        ptr::copy_nonoverlapping(bits.as_ptr().cast::<c_char>(), buf, bits.len());
        *buf.add(bits.len()) = 0;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn fgl_distance(
    metric: FglMetric,
    a: *const FglGraph,
    b: *const FglGraph,
    out: *mut f64,
) -> FglStatus {
    guard(|| {
        let d = Metric::from(metric)
            .distance(graph_ref(a, "first graph")?, graph_ref(b, "second graph")?)
            .map_err(lib)?;
        put(out, d)
    })
}

/// Writes the `n` eigenvalues of the adjacency matrix (descending) or the
/// Laplacian (ascending) into `out`, which must hold `len >= n` values.
#[no_mangle]
pub unsafe extern "C" fn fgl_spectrum(g: *const FglGraph, laplacian: bool, out: *mut f64, len: usize) -> FglStatus {
    guard(|| {
        let g = graph_ref(g, "graph")?;
        let spectrum = if laplacian {
            laplacian_spectrum(g)
        } else {
            adjacency_spectrum(g)
        };
        let vals = spectrum.values();
        if out.is_null() || len < vals.len() {
            return Err((FglStatus::BufferTooSmall, format!("need room for {} values", vals.len())));
        }
        ptr::copy_nonoverlapping(vals.as_ptr(), out, vals.len());
        Ok(())
    })
}

/// Thresholds the sample mean adjacency matrix at 1/2.
#[no_mangle]
pub unsafe extern "C" fn fgl_naive_mean(
    graphs: *const *const FglGraph,
    count: usize,
    out: *mut *mut FglGraph,
) -> FglStatus {
    guard(|| {
        let sample = sample_from(graphs, count)?;
        let r = naive_frechet_mean(&sample, Metric::Hamming).map_err(lib)?;
        put(out, boxed(r.mean))
    })
}

/// Index of the sample member with the smallest Fréchet objective.
#[no_mangle]
pub unsafe extern "C" fn fgl_sample_medoid(
    graphs: *const *const FglGraph,
    count: usize,
    metric: FglMetric,
    index: *mut usize,
    objective: *mut f64,
) -> FglStatus {
    guard(|| {
        let sample = sample_from(graphs, count)?;
        let r = sample_medoid(&sample, metric.into()).map_err(lib)?;
        let k = sample.iter().position(|g| *g == r.mean).expect("medoid is a member");
        put(index, k)?;
        if !objective.is_null() {
            objective.write(r.objective);
        }
        Ok(())
    })
}

/// Exact Fréchet mean by enumeration (graphs with at most 6 vertices).
#[no_mangle]
pub unsafe extern "C" fn fgl_exhaustive_mean(
    graphs: *const *const FglGraph,
    count: usize,
    metric: FglMetric,
    out: *mut *mut FglGraph,
    objective: *mut f64,
) -> FglStatus {
    guard(|| {
        let sample = sample_from(graphs, count)?;
        let r = exhaustive_frechet_mean(&sample, metric.into()).map_err(lib)?;
        if !objective.is_null() {
            objective.write(r.objective);
        }
        put(out, boxed(r.mean))
    })
}

/// Loads a network checkpoint.
#[no_mangle]
pub unsafe extern "C" fn fgl_model_load(path: *const c_char, out: *mut *mut FglModel) -> FglStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| (FglStatus::InvalidArgument, "path is not UTF-8".to_string()))?;
        let (params, _) = load_checkpoint(Path::new(path)).map_err(lib)?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        out.write(Box::into_raw(Box::new(FglModel(params))));
        Ok(())
    })
}

/// Releases a model. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn fgl_model_free(m: *mut FglModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Network estimate of the Fréchet mean of a sample of 28-vertex graphs.
#[no_mangle]
pub unsafe extern "C" fn fgl_model_predict(
    model: *const FglModel,
    graphs: *const *const FglGraph,
    count: usize,
    out: *mut *mut FglGraph,
) -> FglStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let sample = sample_from(graphs, count)?;
        let g = predict_frechet(&model.0, &sample).map_err(lib)?;
        put(out, boxed(g))
    })
}
