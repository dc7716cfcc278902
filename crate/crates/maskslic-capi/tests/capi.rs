//! Exercises the C ABI from Rust: handle lifecycle, error codes, and the
//! segmentation round trip through raw buffers and files.

use std::ffi::CStr;
use std::ptr;

use maskslic_capi::*;

fn default_params(n: usize) -> MslParams {
    MslParams {
        n_regions: n,
        compactness: 1.0,
        max_iters: 10,
        residual_tol: 0.0,
        enforce_connectivity: true,
        backend: MslBackend::MaskSlic,
    }
}

#[test]
fn segment_round_trip_through_buffers() {
    unsafe {
        let dims = [6usize, 6];
        let spacing = [1.0f64, 1.0];
        let data = vec![0.0f64; 36];
        let mut volume: *mut MslVolume = ptr::null_mut();
        let status = msl_volume_create(
            dims.as_ptr(),
            2,
            1,
            spacing.as_ptr(),
            data.as_ptr(),
            data.len(),
            &mut volume,
        );
        assert_eq!(status, MslStatus::Ok);

        let bits = [1u8; 36];
        let mut mask: *mut MslMask = ptr::null_mut();
        let status = msl_mask_create(dims.as_ptr(), 2, bits.as_ptr(), bits.len(), &mut mask);
        assert_eq!(status, MslStatus::Ok);

        let mut labeling: *mut MslLabeling = ptr::null_mut();
        let status = msl_segment(volume, mask, default_params(4), &mut labeling);
        assert_eq!(status, MslStatus::Ok);
        assert_eq!(msl_labeling_num_regions(labeling), 4);
        assert_eq!(msl_labeling_len(labeling), 36);
        let labels = std::slice::from_raw_parts(msl_labeling_data(labeling), 36);
        assert!(labels.iter().all(|&l| (0..4).contains(&l)));

        // identical labeling scores zero inconsistency
        let offset = [0i64, 0];
        let mut c_s = f64::NAN;
        let status = msl_consistency_score(labeling, labeling, offset.as_ptr(), 2, &mut c_s);
        assert_eq!(status, MslStatus::Ok);
        assert_eq!(c_s, 0.0);

        // perfect ground truth gives lc = 1
        let truth: Vec<i32> = labels.to_vec();
        let mut lc = f64::NAN;
        let mut e = f64::NAN;
        let status =
            msl_label_consistency(labeling, truth.as_ptr(), truth.len(), mask, &mut lc, &mut e);
        assert_eq!(status, MslStatus::Ok);
        assert_eq!(lc, 1.0);
        assert_eq!(e, 0.0);

        msl_labeling_free(labeling);
        msl_mask_free(mask);
        msl_volume_free(volume);
    }
}

#[test]
fn file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let lab_path = dir.path().join("l.mslc");
    let lab_path_c = std::ffi::CString::new(lab_path.to_str().unwrap()).unwrap();
    unsafe {
        let dims = [4usize, 4];
        let spacing = [1.0f64, 1.0];
        let data: Vec<f64> = (0..16).map(|i| i as f64).collect();
        let mut volume: *mut MslVolume = ptr::null_mut();
        assert_eq!(
            msl_volume_create(
                dims.as_ptr(),
                2,
                1,
                spacing.as_ptr(),
                data.as_ptr(),
                16,
                &mut volume
            ),
            MslStatus::Ok
        );
        let bits = [1u8; 16];
        let mut mask: *mut MslMask = ptr::null_mut();
        assert_eq!(
            msl_mask_create(dims.as_ptr(), 2, bits.as_ptr(), 16, &mut mask),
            MslStatus::Ok
        );
        let mut labeling: *mut MslLabeling = ptr::null_mut();
        assert_eq!(
            msl_segment(volume, mask, default_params(2), &mut labeling),
            MslStatus::Ok
        );
        assert_eq!(
            msl_labeling_write(labeling, lab_path_c.as_ptr()),
            MslStatus::Ok
        );

        let mut back: *mut MslLabeling = ptr::null_mut();
        assert_eq!(
            msl_labeling_read(lab_path_c.as_ptr(), &mut back),
            MslStatus::Ok
        );
        let a = std::slice::from_raw_parts(msl_labeling_data(labeling), 16);
        let b = std::slice::from_raw_parts(msl_labeling_data(back), 16);
        assert_eq!(a, b);

        msl_labeling_free(back);
        msl_labeling_free(labeling);
        msl_mask_free(mask);
        msl_volume_free(volume);
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        // empty mask
        let dims = [3usize, 3];
        let bits = [0u8; 9];
        let mut mask: *mut MslMask = ptr::null_mut();
        let status = msl_mask_create(dims.as_ptr(), 2, bits.as_ptr(), 9, &mut mask);
        assert_eq!(status, MslStatus::EmptyMask);
        let msg = CStr::from_ptr(msl_last_error_message()).to_str().unwrap();
        assert!(msg.starts_with("E_EMPTY_MASK"), "{msg}");

        // null arguments
        let mut volume: *mut MslVolume = ptr::null_mut();
        let status = msl_volume_create(ptr::null(), 2, 1, ptr::null(), ptr::null(), 0, &mut volume);
        assert_eq!(status, MslStatus::NullArgument);

        // dims mismatch between volume and mask
        let spacing = [1.0f64, 1.0];
        let data = [0.0f64; 9];
        assert_eq!(
            msl_volume_create(
                dims.as_ptr(),
                2,
                1,
                spacing.as_ptr(),
                data.as_ptr(),
                9,
                &mut volume
            ),
            MslStatus::Ok
        );
        let other_dims = [2usize, 2];
        let bits = [1u8; 4];
        let mut small: *mut MslMask = ptr::null_mut();
        assert_eq!(
            msl_mask_create(other_dims.as_ptr(), 2, bits.as_ptr(), 4, &mut small),
            MslStatus::Ok
        );
        let mut labeling: *mut MslLabeling = ptr::null_mut();
        let status = msl_segment(volume, small, default_params(1), &mut labeling);
        assert_eq!(status, MslStatus::DimsMismatch);

        // too many seeds
        let bits = [1u8; 9];
        let mut full: *mut MslMask = ptr::null_mut();
        assert_eq!(
            msl_mask_create(dims.as_ptr(), 2, bits.as_ptr(), 9, &mut full),
            MslStatus::Ok
        );
        let status = msl_segment(volume, full, default_params(10), &mut labeling);
        assert_eq!(status, MslStatus::TooManySeeds);

        msl_mask_free(small);
        msl_mask_free(full);
        msl_volume_free(volume);
    }
}

#[test]
fn version_string_is_static() {
    unsafe {
        let v = CStr::from_ptr(msl_version()).to_str().unwrap();
        assert_eq!(v, env!("CARGO_PKG_VERSION"));
    }
}

#[test]
fn c_demo_compiles_and_runs() {
    // end-to-end through a real C compiler, skipped when none is installed
    let cc = ["cc", "gcc", "clang"]
        .iter()
        .find(|c| {
            std::process::Command::new(c)
                .arg("--version")
                .output()
                .is_ok()
        })
        .copied();
    let Some(cc) = cc else {
        eprintln!("no C compiler found, skipping");
        return;
    };
    let manifest = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let target_dir = manifest.join("../../target/debug");
    let lib = target_dir.join("libmaskslic_capi.a");
    if !lib.exists() {
        eprintln!("staticlib not built at {}, skipping", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("demo");
    let status = std::process::Command::new(cc)
        .arg(manifest.join("examples/demo.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = std::process::Command::new(&bin).output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "regions: 4");
}

#[test]
fn generated_header_exists_and_declares_surface() {
    let header =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/maskslic.h"))
            .expect("header generated at build time");
    for needle in [
        "MASKSLIC_H",
        "typedef struct MslVolume MslVolume;",
        "typedef struct MslMask MslMask;",
        "typedef struct MslLabeling MslLabeling;",
        "MSL_STATUS_OK",
        "msl_segment",
        "msl_last_error_message",
        "msl_consistency_score",
    ] {
        assert!(header.contains(needle), "header missing {needle:?}");
    }
}
