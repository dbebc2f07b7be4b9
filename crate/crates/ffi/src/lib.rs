//! C ABI over `unselfie-core`.
//!
//! Objects are opaque handles created by `uns_*_load`/`uns_*_from_*` functions
//! and released with the matching `uns_*_free`. Every fallible call returns a
//! [`UnsStatus`]; on failure a message is available from
//! [`uns_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use unselfie_core::align::{align, SimilarityTransform};
use unselfie_core::config::PipelineConfig;
use unselfie_core::index::load_index;
use unselfie_core::io::{read_iuv, read_rgb, write_iuv, write_rgb};
use unselfie_core::iuv::IuvMap;
use unselfie_core::pipeline::{unselfie, write_unselfie};
use unselfie_core::raster::RgbImage;
use unselfie_core::search::{distances, search, PoseDatabase, PoseFeatures};
use unselfie_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Dimension = 5,
    ShoulderNotFound = 6,
    DegenerateTransform = 7,
    EmptyDatabase = 8,
    BufferTooSmall = 9,
    Config = 10,
    Panic = 11,
}

/// Body-part label map with per-pixel surface coordinates.
pub struct UnsIuvMap(IuvMap);
/// RGB image, channels in [0, 1].
pub struct UnsImage(RgbImage);
/// Loaded pose index.
pub struct UnsDatabase(PoseDatabase);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UnsTransform {
    pub scale: f64,
    pub tx: f64,
    pub ty: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UnsHit {
    /// Position of the entry in the database; see [`uns_db_id`].
    pub entry: usize,
    pub d_index: u64,
    pub d_uv: f64,
    /// Torso pixels shared with the query.
    pub overlap: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> UnsStatus {
    match e {
        Error::Io { .. } => UnsStatus::Io,
        Error::Format { .. } | Error::Image { .. } | Error::PartIndex { .. } => UnsStatus::Format,
        Error::Dimension(_) | Error::Layout(_) => UnsStatus::Dimension,
        Error::ShoulderNotFound { .. } => UnsStatus::ShoulderNotFound,
        Error::DegenerateTransform { .. } => UnsStatus::DegenerateTransform,
        Error::EmptyDatabase => UnsStatus::EmptyDatabase,
        Error::Config { .. } | Error::ConfigValue(_) => UnsStatus::Config,
        _ => UnsStatus::InvalidArgument,
    }
}

struct Fail(UnsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> UnsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => UnsStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            UnsStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(UnsStatus::NullPointer, format!("{what} is null"))
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(UnsStatus::InvalidArgument, format!("{what} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn uns_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version, static string.
#[no_mangle]
pub extern "C" fn uns_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn uns_iuv_load(path: *const c_char, out: *mut *mut UnsIuvMap) -> UnsStatus {
    guard(|| put(out, UnsIuvMap(read_iuv(&path_arg(path, "path")?)?)))
}

/// Builds a map from `width*height` part labels and `2*width*height`
/// interleaved (u, v) values.
///
/// # Safety
/// `parts` and `uv` must point to arrays of the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn uns_iuv_from_raw(
    width: usize,
    height: usize,
    parts: *const u8,
    uv: *const f32,
    out: *mut *mut UnsIuvMap,
) -> UnsStatus {
    guard(|| {
        if parts.is_null() || uv.is_null() {
            return Err(null("input array"));
        }
        let n = width
            .checked_mul(height)
            .ok_or_else(|| Fail(UnsStatus::InvalidArgument, "size overflow".into()))?;
        let parts = std::slice::from_raw_parts(parts, n).to_vec();
        let uv = std::slice::from_raw_parts(uv, 2 * n).chunks_exact(2).map(|c| [c[0], c[1]]).collect();
        put(out, UnsIuvMap(IuvMap::from_parts(width, height, parts, uv)?))
    })
}

/// # Safety
/// `map` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn uns_iuv_free(map: *mut UnsIuvMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// # Safety
/// `map` must be a live handle; `width`/`height` writable.
#[no_mangle]
pub unsafe extern "C" fn uns_iuv_dims(map: *const UnsIuvMap, width: *mut usize, height: *mut usize) -> UnsStatus {
    guard(|| {
        let m = &get(map, "map")?.0;
        if width.is_null() || height.is_null() {
            return Err(null("output"));
        }
        *width = m.width();
        *height = m.height();
        Ok(())
    })
}

/// # Safety
/// `map` must be a live handle; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn uns_iuv_save(map: *const UnsIuvMap, path: *const c_char) -> UnsStatus {
    guard(|| Ok(write_iuv(&path_arg(path, "path")?, &get(map, "map")?.0)?))
}

/// # Safety
/// `path` must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn uns_image_load(path: *const c_char, out: *mut *mut UnsImage) -> UnsStatus {
    guard(|| put(out, UnsImage(read_rgb(&path_arg(path, "path")?)?)))
}

/// Builds an image from `3*width*height` interleaved RGB values.
///
/// # Safety
/// `rgb` must point to an array of that length.
#[no_mangle]
pub unsafe extern "C" fn uns_image_from_rgb(width: usize, height: usize, rgb: *const f32, out: *mut *mut UnsImage) -> UnsStatus {
    guard(|| {
        if rgb.is_null() {
            return Err(null("rgb"));
        }
        let n = width
            .checked_mul(height)
            .ok_or_else(|| Fail(UnsStatus::InvalidArgument, "size overflow".into()))?;
        let px = std::slice::from_raw_parts(rgb, 3 * n).chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        put(out, UnsImage(RgbImage::from_vec(width, height, px)?))
    })
}

/// # Safety
/// `img` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn uns_image_free(img: *mut UnsImage) {
    if !img.is_null() {
        drop(Box::from_raw(img));
    }
}

/// Copies interleaved RGB into `buf`, which must hold `3*width*height`
/// floats; `len` is its capacity in floats.
///
/// # Safety
/// `img` must be a live handle; `buf` writable for `len` floats.
#[no_mangle]
pub unsafe extern "C" fn uns_image_read(
    img: *const UnsImage,
    width: *mut usize,
    height: *mut usize,
    buf: *mut f32,
    len: usize,
) -> UnsStatus {
    guard(|| {
        let im = &get(img, "image")?.0;
        if width.is_null() || height.is_null() {
            return Err(null("output"));
        }
        *width = im.width();
        *height = im.height();
        let need = 3 * im.width() * im.height();
        if buf.is_null() {
            return Ok(());
        }
        if len < need {
            return Err(Fail(UnsStatus::BufferTooSmall, format!("need {need} floats, got {len}")));
        }
        let dst = std::slice::from_raw_parts_mut(buf, need);
        for (d, p) in dst.chunks_exact_mut(3).zip(im.pixels()) {
            d.copy_from_slice(p);
        }
        Ok(())
    })
}

/// # Safety
/// `img` must be a live handle; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn uns_image_save(img: *const UnsImage, path: *const c_char) -> UnsStatus {
    guard(|| Ok(write_rgb(&path_arg(path, "path")?, &get(img, "image")?.0)?))
}

/// Torso index and UV distances between two equally sized poses.
///
/// # Safety
/// `a`, `b` must be live handles; `d_index`, `d_uv` writable.
#[no_mangle]
pub unsafe extern "C" fn uns_pose_distances(
    a: *const UnsIuvMap,
    b: *const UnsIuvMap,
    torso_part: u8,
    d_index: *mut u64,
    d_uv: *mut f64,
) -> UnsStatus {
    guard(|| {
        let (a, b) = (&get(a, "a")?.0, &get(b, "b")?.0);
        if d_index.is_null() || d_uv.is_null() {
            return Err(null("output"));
        }
        if (a.width(), a.height()) != (b.width(), b.height()) {
            return Err(Fail(UnsStatus::Dimension, "poses differ in size".into()));
        }
        let d = distances(&PoseFeatures::from_pose(a, torso_part), &PoseFeatures::from_pose(b, torso_part));
        *d_index = d.d_index;
        *d_uv = d.d_uv;
        Ok(())
    })
}

/// Shoulder-anchored alignment with default settings.
///
/// # Safety
/// `img`, `pose` must be live handles; outputs writable. `transform` may be null.
#[no_mangle]
pub unsafe extern "C" fn uns_align(
    img: *const UnsImage,
    pose: *const UnsIuvMap,
    out_img: *mut *mut UnsImage,
    out_pose: *mut *mut UnsIuvMap,
    transform: *mut UnsTransform,
) -> UnsStatus {
    guard(|| {
        let cfg = PipelineConfig::default();
        let s = align(&get(img, "image")?.0, &get(pose, "pose")?.0, &cfg.layout()?, &cfg.align())?;
        if out_img.is_null() || out_pose.is_null() {
            return Err(null("output handle"));
        }
        let SimilarityTransform { scale, translation } = s.transform;
        if let Some(t) = transform.as_mut() {
            *t = UnsTransform {
                scale,
                tx: translation[0],
                ty: translation[1],
            };
        }
        put(out_img, UnsImage(s.image))?;
        put(out_pose, UnsIuvMap(s.pose))
    })
}

/// # Safety
/// `path` must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn uns_db_load(path: *const c_char, out: *mut *mut UnsDatabase) -> UnsStatus {
    guard(|| put(out, UnsDatabase(load_index(&path_arg(path, "path")?)?)))
}

/// # Safety
/// `db` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn uns_db_free(db: *mut UnsDatabase) {
    if !db.is_null() {
        drop(Box::from_raw(db));
    }
}

/// Number of entries, 0 for a null handle.
///
/// # Safety
/// `db` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn uns_db_len(db: *const UnsDatabase) -> usize {
    db.as_ref().map_or(0, |d| d.0.len())
}

/// Copies the id of entry `entry` as a NUL-terminated string. `needed`
/// receives the required size including the terminator.
///
/// # Safety
/// `db` must be a live handle; `buf` writable for `len` bytes or null.
#[no_mangle]
pub unsafe extern "C" fn uns_db_id(
    db: *const UnsDatabase,
    entry: usize,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> UnsStatus {
    guard(|| {
        let db = &get(db, "db")?.0;
        let e = db
            .entries()
            .get(entry)
            .ok_or_else(|| Fail(UnsStatus::InvalidArgument, format!("entry {entry} out of range")))?;
        let bytes = e.id.as_bytes();
        if let Some(n) = needed.as_mut() {
            *n = bytes.len() + 1;
        }
        if buf.is_null() {
            return Ok(());
        }
        if len < bytes.len() + 1 {
            return Err(Fail(UnsStatus::BufferTooSmall, format!("need {} bytes", bytes.len() + 1)));
        }
        ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast(), bytes.len());
        *buf.add(bytes.len()) = 0;
        Ok(())
    })
}

/// Two-step search; writes up to `capacity` hits best first and their number
/// to `count`.
///
/// # Safety
/// `db`, `query` must be live handles; `hits` writable for `capacity` items.
#[no_mangle]
pub unsafe extern "C" fn uns_search(
    db: *const UnsDatabase,
    query: *const UnsIuvMap,
    k: usize,
    k1: usize,
    hits: *mut UnsHit,
    capacity: usize,
    count: *mut usize,
) -> UnsStatus {
    guard(|| {
        let db = &get(db, "db")?.0;
        let result = search(&get(query, "query")?.0, db, k, k1)?;
        if hits.is_null() || count.is_null() {
            return Err(null("output"));
        }
        if capacity < result.hits.len() {
            return Err(Fail(
                UnsStatus::BufferTooSmall,
                format!("need {} hits, got {capacity}", result.hits.len()),
            ));
        }
        let out = std::slice::from_raw_parts_mut(hits, result.hits.len());
        for (o, h) in out.iter_mut().zip(&result.hits) {
            *o = UnsHit {
                entry: db.entries().iter().position(|e| e.id == h.id).expect("hit from db"),
                d_index: h.d_index,
                d_uv: h.d_uv,
                overlap: h.overlap,
            };
        }
        *count = result.hits.len();
        Ok(())
    })
}

/// Full selfie run with default settings; writes ranked outputs to `out_dir`.
///
/// # Safety
/// Handles must be live; `out_dir` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn uns_unselfie(
    selfie: *const UnsImage,
    pose: *const UnsIuvMap,
    db: *const UnsDatabase,
    k: usize,
    out_dir: *const c_char,
) -> UnsStatus {
    guard(|| {
        let cfg = PipelineConfig::default();
        let dir = path_arg(out_dir, "out_dir")?;
        let out = unselfie(&get(selfie, "selfie")?.0, &get(pose, "pose")?.0, &get(db, "db")?.0, k, &cfg)?;
        Ok(write_unselfie(&dir, &out, &cfg, &[])?)
    })
}
