//! C interface to the neighborhood cache and the link predictor.
//!
//! Handles are opaque pointers owned by the caller and released with the
//! matching `*_free` function. Every fallible call returns a [`TlinkStatus`];
//! on failure a message is kept per thread and can be read with
//! [`tlink_last_error`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use tlink::graph::TemporalEdge;
use tlink::ncache::{hash_slot, load_store, save_store, CacheConfig, NCacheStore, DEFAULT_Q};
use tlink::neural::{load_model, Model};
use tlink::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TlinkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Checkpoint = 4,
    OutOfRange = 5,
    Internal = 6,
}

/// Cache settings; `q = 0` selects the default hash constant.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TlinkCacheConfig {
    pub m1: usize,
    pub m2: usize,
    pub f: usize,
    pub d0: usize,
    pub alpha: f64,
    pub q: u64,
    pub k: usize,
    pub seed: u64,
}

/// Opaque cache store.
pub struct TlinkStore(NCacheStore);

/// Opaque trained model.
pub struct TlinkModel(Model);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> TlinkStatus {
    match err {
        Error::Io { .. } => TlinkStatus::Io,
        Error::Checkpoint(_) => TlinkStatus::Checkpoint,
        Error::NodeOutOfRange { .. } => TlinkStatus::OutOfRange,
        _ => TlinkStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (TlinkStatus, String)>) -> TlinkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TlinkStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            TlinkStatus::Internal
        }
    }
}

fn lib_err(e: Error) -> (TlinkStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (TlinkStatus, String) {
    (TlinkStatus::NullPointer, format!("{what} is null"))
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a str, (TlinkStatus, String)> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (TlinkStatus::InvalidArgument, "path is not UTF-8".into()))
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn tlink_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Slot of key `a` in a dictionary of capacity `m`; `q = 0` selects the
/// default hash constant. Returns 0 when `m` is 0.
#[no_mangle]
pub extern "C" fn tlink_hash_slot(a: u32, m: usize, q: u64) -> usize {
    if m == 0 {
        return 0;
    }
    hash_slot(a, m, if q == 0 { DEFAULT_Q } else { q })
}

/// Scalars stored per node for `cfg`.
#[no_mangle]
pub extern "C" fn tlink_scalars_per_node(cfg: TlinkCacheConfig) -> usize {
    to_cache(cfg).scalars_per_node()
}

fn to_cache(c: TlinkCacheConfig) -> CacheConfig {
    CacheConfig {
        m1: c.m1,
        m2: c.m2,
        f: c.f,
        d0: c.d0,
        alpha: c.alpha,
        q: if c.q == 0 { DEFAULT_Q } else { c.q },
        k: c.k,
        seed: c.seed,
    }
}

/// Allocates an empty store for nodes `1..=num_nodes`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn tlink_store_new(
    cfg: TlinkCacheConfig,
    num_nodes: usize,
    out: *mut *mut TlinkStore,
) -> TlinkStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let store = NCacheStore::new(to_cache(cfg), num_nodes).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(TlinkStore(store)));
        Ok(())
    })
}

/// Loads a store checkpoint.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tlink_store_load(path: *const c_char, out: *mut *mut TlinkStore) -> TlinkStatus {
    guard(|| {
        let path = path_arg(path)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let store = load_store(path, None).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(TlinkStore(store)));
        Ok(())
    })
}

/// Writes a store checkpoint.
///
/// # Safety
/// `store` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn tlink_store_save(store: *const TlinkStore, path: *const c_char) -> TlinkStatus {
    guard(|| {
        let store = store.as_ref().ok_or_else(|| null("store"))?;
        save_store(&store.0, path_arg(path)?).map_err(lib_err)
    })
}

/// Releases a store. Null is ignored.
///
/// # Safety
/// `store` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tlink_store_free(store: *mut TlinkStore) {
    if !store.is_null() {
        drop(Box::from_raw(store));
    }
}

/// Applies one interaction using the model's recurrent cells. The model's
/// cache settings must match the store's.
///
/// # Safety
/// Both handles must come from this library.
#[no_mangle]
pub unsafe extern "C" fn tlink_store_apply_event(
    store: *mut TlinkStore,
    model: *const TlinkModel,
    src: u32,
    dst: u32,
    t: f64,
) -> TlinkStatus {
    guard(|| {
        let store = store.as_mut().ok_or_else(|| null("store"))?;
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        if model.0.cache_config() != *store.0.config() {
            return Err((TlinkStatus::InvalidArgument, "model and store cache settings differ".into()));
        }
        store.0.apply_event(&TemporalEdge::new(src, dst, t), &model.0).map_err(lib_err)?;
        Ok(())
    })
}

/// Looks up key `a` in `u`'s hop-`hop` dictionary. On a hit copies the
/// value (width F) into `values` and sets `*found = 1`; otherwise
/// `*found = 0` and `values` is untouched.
///
/// # Safety
/// `values` must hold at least `capacity` doubles; `found` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tlink_store_lookup(
    store: *const TlinkStore,
    u: u32,
    hop: usize,
    a: u32,
    values: *mut f64,
    capacity: usize,
    found: *mut i32,
) -> TlinkStatus {
    guard(|| {
        let store = store.as_ref().ok_or_else(|| null("store"))?;
        if found.is_null() {
            return Err(null("found"));
        }
        if !(1..=2).contains(&hop) {
            return Err((TlinkStatus::InvalidArgument, format!("hop must be 1 or 2 (got {hop})")));
        }
        if u == 0 || u as usize > store.0.num_nodes() {
            return Err((TlinkStatus::OutOfRange, format!("node {u} out of range")));
        }
        match store.0.lookup(u, hop, a) {
            Some(v) => {
                if values.is_null() || capacity < v.len() {
                    return Err((TlinkStatus::InvalidArgument, format!("value buffer needs {} doubles", v.len())));
                }
                ptr::copy_nonoverlapping(v.as_ptr(), values, v.len());
                *found = 1;
            }
            None => *found = 0,
        }
        Ok(())
    })
}

/// Loads a model checkpoint.
///
/// # Safety
/// `path` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tlink_model_load(path: *const c_char, out: *mut *mut TlinkModel) -> TlinkStatus {
    guard(|| {
        let path = path_arg(path)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let model = load_model(path).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(TlinkModel(model)));
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tlink_model_free(model: *mut TlinkModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Allocates an empty store with the model's cache settings.
///
/// # Safety
/// `model` must come from this library and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn tlink_model_new_store(
    model: *const TlinkModel,
    num_nodes: usize,
    out: *mut *mut TlinkStore,
) -> TlinkStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let store = model.0.new_store(num_nodes).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(TlinkStore(store)));
        Ok(())
    })
}

/// Probability that `u` and `v` interact next, given the store's history.
///
/// # Safety
/// Both handles must come from this library; `prob` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tlink_model_predict(
    model: *const TlinkModel,
    store: *const TlinkStore,
    u: u32,
    v: u32,
    prob: *mut f64,
) -> TlinkStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let store = store.as_ref().ok_or_else(|| null("store"))?;
        if prob.is_null() {
            return Err(null("prob"));
        }
        let n = store.0.num_nodes();
        for x in [u, v] {
            if x == 0 || x as usize > n {
                return Err((TlinkStatus::OutOfRange, format!("node {x} out of range 1..={n}")));
            }
        }
        if model.0.cache_config() != *store.0.config() {
            return Err((TlinkStatus::InvalidArgument, "model and store cache settings differ".into()));
        }
        *prob = model.0.forward_link(&store.0, u, v);
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn errors_map_to_codes() {
        assert_eq!(status_of(&Error::Checkpoint("x".into())), TlinkStatus::Checkpoint);
        assert_eq!(status_of(&Error::NodeOutOfRange { node: 3, num_nodes: 2 }), TlinkStatus::OutOfRange);
        assert_eq!(status_of(&Error::NoEdges), TlinkStatus::InvalidArgument);
    }

    #[test]
    fn panics_become_internal_errors() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, TlinkStatus::Internal);
        assert!(!tlink_last_error().is_null());
    }
}
