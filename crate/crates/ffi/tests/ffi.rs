use std::ffi::{CStr, CString};
use std::ptr;

use unselfie_core::io::write_iuv;
use unselfie_core::iuv::IuvMap;
use unselfie_core::search::{Direction, PoseDatabase};
use unselfie_ffi::*;

fn last_error() -> String {
    let p = uns_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn raw_pose(w: usize, h: usize, f: impl Fn(usize, usize) -> (u8, f32, f32)) -> (Vec<u8>, Vec<f32>) {
    let mut parts = Vec::new();
    let mut uv = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let (p, u, v) = f(x, y);
            parts.push(p);
            uv.extend([u, v]);
        }
    }
    (parts, uv)
}

fn make(w: usize, h: usize, f: impl Fn(usize, usize) -> (u8, f32, f32)) -> *mut UnsIuvMap {
    let (parts, uv) = raw_pose(w, h, f);
    let mut out = ptr::null_mut();
    let s = unsafe { uns_iuv_from_raw(w, h, parts.as_ptr(), uv.as_ptr(), &mut out) };
    assert_eq!(s, UnsStatus::Ok);
    out
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(uns_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn null_arguments_are_reported() {
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { uns_iuv_load(ptr::null(), &mut out) }, UnsStatus::NullPointer);
    assert!(last_error().contains("null"));
    assert!(out.is_null());
    assert_eq!(unsafe { uns_db_len(ptr::null()) }, 0);
    unsafe {
        uns_iuv_free(ptr::null_mut());
        uns_image_free(ptr::null_mut());
        uns_db_free(ptr::null_mut());
    }
}

#[test]
fn missing_file_is_io_error() {
    let p = CString::new("/nonexistent/pose_iuv.png").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { uns_iuv_load(p.as_ptr(), &mut out) }, UnsStatus::Io);
    assert!(last_error().contains("nonexistent"));
}

#[test]
fn bad_part_label_is_rejected() {
    let (parts, uv) = raw_pose(2, 1, |_, _| (25, 0.0, 0.0));
    let mut out = ptr::null_mut();
    let s = unsafe { uns_iuv_from_raw(2, 1, parts.as_ptr(), uv.as_ptr(), &mut out) };
    assert_eq!(s, UnsStatus::Format);
    assert!(out.is_null());
}

#[test]
fn distances_count_label_mismatches() {
    // a: torso everywhere; b: torso on the left half only
    let a = make(4, 2, |_, _| (2, 0.5, 0.5));
    let b = make(4, 2, |x, _| if x < 2 { (2, 0.5, 0.5) } else { (0, 0.0, 0.0) });
    let (mut di, mut du) = (0u64, -1.0f64);
    assert_eq!(unsafe { uns_pose_distances(a, b, 2, &mut di, &mut du) }, UnsStatus::Ok);
    assert_eq!(di, 4);
    assert_eq!(du, 0.0);
    let c = make(3, 2, |_, _| (2, 0.5, 0.5));
    assert_eq!(unsafe { uns_pose_distances(a, c, 2, &mut di, &mut du) }, UnsStatus::Dimension);
    unsafe {
        uns_iuv_free(a);
        uns_iuv_free(b);
        uns_iuv_free(c);
    }
}

#[test]
fn image_round_trips_through_buffers() {
    let rgb: Vec<f32> = (0..2 * 3 * 3).map(|i| i as f32 / 18.0).collect();
    let mut img = ptr::null_mut();
    assert_eq!(unsafe { uns_image_from_rgb(2, 3, rgb.as_ptr(), &mut img) }, UnsStatus::Ok);
    let (mut w, mut h) = (0, 0);
    let mut small = vec![0.0f32; 4];
    assert_eq!(
        unsafe { uns_image_read(img, &mut w, &mut h, small.as_mut_ptr(), small.len()) },
        UnsStatus::BufferTooSmall
    );
    assert_eq!((w, h), (2, 3));
    let mut back = vec![0.0f32; 18];
    assert_eq!(unsafe { uns_image_read(img, &mut w, &mut h, back.as_mut_ptr(), back.len()) }, UnsStatus::Ok);
    assert_eq!(back, rgb);
    unsafe { uns_image_free(img) };
}

#[test]
fn search_over_loaded_index() {
    let dir = tempfile::tempdir().unwrap();
    let n = 8;
    let mut db = PoseDatabase::new(Direction::Neutral, 2, (n, n));
    for i in 0..4usize {
        let mut m = IuvMap::new(n, n);
        for y in 0..n {
            for x in 0..=i + 2 {
                m.set(x, y, 2, [0.1 * i as f32, 0.5]).unwrap();
            }
        }
        let p = dir.path().join(format!("p{i}_iuv.png"));
        write_iuv(&p, &m).unwrap();
        db.insert(format!("p{i}"), &m, p, None).unwrap();
    }
    let idx = dir.path().join("db.idx");
    unselfie_core::index::write_index(&idx, &db).unwrap();

    let cidx = CString::new(idx.to_str().unwrap()).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { uns_db_load(cidx.as_ptr(), &mut h) }, UnsStatus::Ok);
    assert_eq!(unsafe { uns_db_len(h) }, 4);

    let q = dir.path().join("p1_iuv.png");
    let cq = CString::new(q.to_str().unwrap()).unwrap();
    let mut query = ptr::null_mut();
    assert_eq!(unsafe { uns_iuv_load(cq.as_ptr(), &mut query) }, UnsStatus::Ok);

    let mut hits = [UnsHit::default(); 4];
    let mut count = 0;
    assert_eq!(
        unsafe { uns_search(h, query, 2, 4, hits.as_mut_ptr(), 1, &mut count) },
        UnsStatus::BufferTooSmall
    );
    assert_eq!(
        unsafe { uns_search(h, query, 2, 4, hits.as_mut_ptr(), hits.len(), &mut count) },
        UnsStatus::Ok
    );
    assert_eq!(count, 2);
    assert_eq!((hits[0].d_index, hits[0].d_uv), (0, 0.0));

    let mut needed = 0;
    assert_eq!(unsafe { uns_db_id(h, hits[0].entry, ptr::null_mut(), 0, &mut needed) }, UnsStatus::Ok);
    assert_eq!(needed, 3);
    let mut buf = vec![0 as std::ffi::c_char; needed];
    assert_eq!(unsafe { uns_db_id(h, hits[0].entry, buf.as_mut_ptr(), buf.len(), &mut needed) }, UnsStatus::Ok);
    assert_eq!(unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap(), "p1");
    assert_eq!(unsafe { uns_db_id(h, 99, buf.as_mut_ptr(), buf.len(), &mut needed) }, UnsStatus::InvalidArgument);

    assert_eq!(
        unsafe { uns_search(h, query, 5, 2, hits.as_mut_ptr(), hits.len(), &mut count) },
        UnsStatus::InvalidArgument
    );
    unsafe {
        uns_iuv_free(query);
        uns_db_free(h);
    }
}

#[test]
fn align_reports_transform() {
    use unselfie_core::synthetic::Body;
    let (pose, img) = Body::with_shoulders([100.0, 140.0], [131.0, 140.0]).render(256, 256);
    let (parts, uv): (Vec<u8>, Vec<f32>) = (pose.parts().to_vec(), pose.uvs().iter().flatten().copied().collect());
    let rgb: Vec<f32> = img.pixels().iter().flatten().copied().collect();
    let (mut p, mut i) = (ptr::null_mut(), ptr::null_mut());
    unsafe {
        assert_eq!(uns_iuv_from_raw(256, 256, parts.as_ptr(), uv.as_ptr(), &mut p), UnsStatus::Ok);
        assert_eq!(uns_image_from_rgb(256, 256, rgb.as_ptr(), &mut i), UnsStatus::Ok);
    }
    let (mut ai, mut ap) = (ptr::null_mut(), ptr::null_mut());
    let mut t = UnsTransform::default();
    assert_eq!(unsafe { uns_align(i, p, &mut ai, &mut ap, &mut t) }, UnsStatus::Ok);
    assert!(t.scale > 0.9 && t.scale < 1.1, "{t:?}");
    let (mut w, mut h) = (0, 0);
    assert_eq!(unsafe { uns_iuv_dims(ap, &mut w, &mut h) }, UnsStatus::Ok);
    assert_eq!((w, h), (256, 256));

    let blank = make(8, 8, |_, _| (0, 0.0, 0.0));
    let mut bi = ptr::null_mut();
    let zeros = vec![0.0f32; 8 * 8 * 3];
    unsafe { uns_image_from_rgb(8, 8, zeros.as_ptr(), &mut bi) };
    let (mut x, mut y) = (ptr::null_mut(), ptr::null_mut());
    assert_eq!(unsafe { uns_align(bi, blank, &mut x, &mut y, ptr::null_mut()) }, UnsStatus::ShoulderNotFound);
    unsafe {
        uns_iuv_free(p);
        uns_iuv_free(ap);
        uns_iuv_free(blank);
        uns_image_free(i);
        uns_image_free(ai);
        uns_image_free(bi);
    }
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/unselfie.h");
    let src = include_str!("../src/lib.rs");
    let exports: Vec<&str> = src
        .split("extern \"C\" fn ")
        .skip(1)
        .map(|s| s.split('(').next().unwrap())
        .collect();
    assert!(exports.len() > 10);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    assert!(header.contains("UNS_STATUS_BUFFER_TOO_SMALL = 9"));
}
