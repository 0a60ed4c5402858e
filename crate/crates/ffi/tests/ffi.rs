use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use hvpf_ffi::*;

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn office_config() -> CString {
    CString::new(repo().join("fixtures/office_27uhd.json").to_str().unwrap()).unwrap()
}

fn scheduler() -> *mut HvpfScheduler {
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { hvpf_scheduler_from_file(office_config().as_ptr(), &mut s) }, HvpfStatus::Ok);
    assert!(!s.is_null());
    s
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(hvpf_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn flat_image_round_trip() {
    let s = scheduler();
    let mut patch = 0usize;
    unsafe { hvpf_scheduler_patch_size(s, &mut patch) };
    assert_eq!(patch, 32);

    let (w, h) = (100usize, 70usize);
    // padded rows exercise the stride argument
    let stride = 104;
    let pixels = vec![128u8; stride * h];
    let mut m = ptr::null_mut();
    let st = unsafe { hvpf_schedule_gray8(s, pixels.as_ptr(), w, h, stride, ptr::null(), ptr::null(), ptr::null(), &mut m) };
    assert_eq!(st, HvpfStatus::Ok);

    let (mut cols, mut rows) = (0usize, 0usize);
    let (mut total, mut baseline, mut ratio) = (0.0, 0.0, 0.0);
    unsafe {
        hvpf_map_dims(m, &mut cols, &mut rows, ptr::null_mut());
        hvpf_map_costs(m, &mut total, &mut baseline, &mut ratio);
    }
    assert_eq!((cols, rows), (4, 3));
    assert_eq!(ratio, 1e9 / 16e9);
    assert_eq!(total, 12.0 * 1e9);
    assert_eq!(baseline, 12.0 * 16e9);

    let mut ids = vec![99u32; 12];
    assert_eq!(unsafe { hvpf_map_grid(m, ids.as_mut_ptr(), ids.len()) }, HvpfStatus::Ok);
    assert!(ids.iter().all(|&id| id == 0));
    assert_eq!(unsafe { hvpf_map_grid(m, ids.as_mut_ptr(), 5) }, HvpfStatus::InvalidArgument);

    let report: serde_json::Value =
        serde_json::from_str(unsafe { CStr::from_ptr(hvpf_map_report_json(m)) }.to_str().unwrap()).unwrap();
    assert_eq!(report["n_patches"], 12);
    assert_eq!(report["baseline_id"], 4);

    let mut csv = ptr::null_mut();
    assert_eq!(unsafe { hvpf_map_csv(m, &mut csv) }, HvpfStatus::Ok);
    let text = unsafe { CStr::from_ptr(csv) }.to_str().unwrap().to_owned();
    assert_eq!(text, "0,0,0,0\n0,0,0,0\n0,0,0,0\n");
    unsafe {
        hvpf_string_free(csv);
        hvpf_map_free(m);
        hvpf_scheduler_free(s);
    }
}

#[test]
fn luminance_entry_point_with_gaze_and_flow() {
    let s = scheduler();
    let (w, h) = (64usize, 64usize);
    let lum: Vec<f64> = (0..w * h).map(|i| if (i / 4 + i / (4 * w)) % 2 == 0 { 20.0 } else { 300.0 }).collect();
    let gaze = [32.0, 32.0];
    let mut still = ptr::null_mut();
    let st = unsafe { hvpf_schedule_luminance(s, lum.as_ptr(), w, h, gaze.as_ptr(), ptr::null(), ptr::null(), &mut still) };
    assert_eq!(st, HvpfStatus::Ok, "{}", last_error());

    let u = vec![12.0f32; w * h];
    let v = vec![0.0f32; w * h];
    let mut moving = ptr::null_mut();
    let st = unsafe { hvpf_schedule_luminance(s, lum.as_ptr(), w, h, gaze.as_ptr(), u.as_ptr(), v.as_ptr(), &mut moving) };
    assert_eq!(st, HvpfStatus::Ok);

    let (mut c_still, mut c_moving) = (0.0, 0.0);
    unsafe {
        hvpf_map_costs(still, &mut c_still, ptr::null_mut(), ptr::null_mut());
        hvpf_map_costs(moving, &mut c_moving, ptr::null_mut(), ptr::null_mut());
    }
    assert!(c_moving <= c_still);

    let mut bad = ptr::null_mut();
    let st = unsafe { hvpf_schedule_luminance(s, lum.as_ptr(), w, h, gaze.as_ptr(), u.as_ptr(), ptr::null(), &mut bad) };
    assert_eq!(st, HvpfStatus::InvalidArgument);
    assert!(bad.is_null());
    unsafe {
        hvpf_map_free(still);
        hvpf_map_free(moving);
        hvpf_scheduler_free(s);
    }
}

#[test]
fn error_codes_and_messages() {
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { hvpf_scheduler_from_file(ptr::null(), &mut s) }, HvpfStatus::InvalidArgument);
    assert!(last_error().contains("null"));

    let missing = CString::new("/nonexistent/config.json").unwrap();
    assert_eq!(unsafe { hvpf_scheduler_from_file(missing.as_ptr(), &mut s) }, HvpfStatus::Io);
    assert!(s.is_null());
    assert!(last_error().contains("/nonexistent/config.json"));

    let broken = CString::new("{\"viewing\": ").unwrap();
    assert_eq!(unsafe { hvpf_scheduler_from_json(broken.as_ptr(), ptr::null(), &mut s) }, HvpfStatus::Format);

    let one_variant = CString::new(
        r#"{"viewing": {"diagonal_in": 27, "res_w": 3840, "res_h": 2160, "peak_nits": 400, "distance_cm": 60},
            "variants": [{"id": 0, "name": "only", "cost_flops": 1, "atten": {"a": 0.1, "b": 0, "c": 0}}],
            "patch_size": 16}"#,
    )
    .unwrap();
    assert_eq!(unsafe { hvpf_scheduler_from_json(one_variant.as_ptr(), ptr::null(), &mut s) }, HvpfStatus::Config);

    let fixtures = CString::new(repo().join("fixtures").to_str().unwrap()).unwrap();
    let relative = CString::new(
        r#"{"viewing": {"diagonal_in": 27, "res_w": 3840, "res_h": 2160, "peak_nits": 400, "distance_cm": 60},
            "variants": "profiles_5.json", "patch_size": 16}"#,
    )
    .unwrap();
    assert_eq!(unsafe { hvpf_scheduler_from_json(relative.as_ptr(), fixtures.as_ptr(), &mut s) }, HvpfStatus::Ok);

    let px = vec![0u8; 64 * 64];
    let gaze = [64.5, 3.0];
    let mut m = ptr::null_mut();
    let st = unsafe { hvpf_schedule_gray8(s, px.as_ptr(), 64, 64, 0, gaze.as_ptr(), ptr::null(), ptr::null(), &mut m) };
    assert_eq!(st, HvpfStatus::Input);
    assert!(m.is_null());
    let st = unsafe { hvpf_schedule_gray8(s, px.as_ptr(), 0, 64, 0, ptr::null(), ptr::null(), ptr::null(), &mut m) };
    assert_eq!(st, HvpfStatus::InvalidArgument);
    let st = unsafe { hvpf_schedule_gray8(s, px.as_ptr(), 64, 64, 32, ptr::null(), ptr::null(), ptr::null(), &mut m) };
    assert_eq!(st, HvpfStatus::InvalidArgument);
    let st = unsafe { hvpf_schedule_gray8(ptr::null(), px.as_ptr(), 64, 64, 0, ptr::null(), ptr::null(), ptr::null(), &mut m) };
    assert_eq!(st, HvpfStatus::InvalidArgument);
    assert!(unsafe { hvpf_map_report_json(ptr::null()) }.is_null());
    unsafe {
        hvpf_scheduler_free(s);
        hvpf_scheduler_free(ptr::null_mut());
        hvpf_map_free(ptr::null_mut());
        hvpf_string_free(ptr::null_mut());
    }
    let version = unsafe { CStr::from_ptr(hvpf_version()) }.to_str().unwrap();
    assert_eq!(version, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_lists_every_export() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/hvpf.h")).unwrap();
    for name in [
        "hvpf_last_error",
        "hvpf_version",
        "hvpf_scheduler_from_file",
        "hvpf_scheduler_from_json",
        "hvpf_scheduler_free",
        "hvpf_scheduler_patch_size",
        "hvpf_schedule_gray8",
        "hvpf_schedule_luminance",
        "hvpf_map_free",
        "hvpf_map_dims",
        "hvpf_map_costs",
        "hvpf_map_grid",
        "hvpf_map_report_json",
        "hvpf_map_csv",
        "hvpf_string_free",
        "HVPF_STATUS_INVALID_ARGUMENT = 1",
        "typedef struct HvpfScheduler HvpfScheduler",
    ] {
        assert!(header.contains(name), "{name} missing from hvpf.h");
    }
}

/// Builds tests/c/smoke.c against the header and the static library, when a
/// C compiler and the archive are available.
#[test]
fn c_program_links_and_runs() {
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(Path::parent).unwrap();
    let archive = profile_dir.join("libhvpf_ffi.a");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if !archive.exists() || Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("skipping: no {} or no C compiler '{cc}'", archive.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let status = Command::new(&cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(manifest.join("tests/c/smoke.c"))
        .arg(&archive)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C build failed");
    let out = Command::new(&bin).arg(repo().join("fixtures/office_27uhd.json")).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    // 128x96 in 32 px patches, all cheapest, gaze outside -> HVPF_STATUS_INPUT
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "4 3 0.062500 0 2 1");
}
