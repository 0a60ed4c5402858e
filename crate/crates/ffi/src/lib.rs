//! C ABI for the hvpf scheduler.
//!
//! Objects are opaque handles created and released through this API. Every
//! function returns an [`HvpfStatus`]; on failure a message for the calling
//! thread is available from [`hvpf_last_error`]. Strings handed out by the
//! library must be released with [`hvpf_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use hvpf::cli::image_report;
use hvpf::config::RunConfig;
use hvpf::motion::FlowField;
use hvpf::raster::Raster;
use hvpf::scheduler::{schedule_image, QualityMap, ScheduleContext, ScheduleOptions};
use hvpf::viewing::{decode_luminance, LuminanceImage};
use hvpf::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HvpfStatus {
    Ok = 0,
    /// Null pointer, zero size or bad UTF-8 in an argument.
    InvalidArgument = 1,
    /// Input data rejected (image size, gaze outside the raster, ...).
    Input = 2,
    /// Configuration or profile set invalid.
    Config = 3,
    /// A referenced file could not be parsed.
    Format = 4,
    Io = 5,
    Internal = 6,
    /// A panic was caught at the boundary.
    Panic = 7,
}

/// A resolved run configuration (viewing conditions, CSF, variant profiles,
/// patch size).
pub struct HvpfScheduler {
    config: RunConfig,
}

/// Result of scheduling one image.
pub struct HvpfQualityMap {
    map: QualityMap,
    report_json: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> HvpfStatus {
    match err {
        Error::Input(_) => HvpfStatus::Input,
        Error::Config(_) => HvpfStatus::Config,
        Error::Format { .. } | Error::Json(_) | Error::Image { .. } => HvpfStatus::Format,
        Error::Io { .. } => HvpfStatus::Io,
        Error::Internal(_) => HvpfStatus::Internal,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (HvpfStatus, String)>) -> HvpfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HvpfStatus::Ok,
        Ok(Err((status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("internal panic: {msg}"));
            HvpfStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (HvpfStatus, String) {
    (status_of(&e), e.to_string())
}

fn bad_arg(msg: &str) -> (HvpfStatus, String) {
    (HvpfStatus::InvalidArgument, msg.to_string())
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (HvpfStatus, String)> {
    if p.is_null() {
        return Err(bad_arg(&format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| bad_arg(&format!("{what} is not valid UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut *mut T) -> Result<&'a mut *mut T, (HvpfStatus, String)> {
    if p.is_null() {
        return Err(bad_arg("output pointer is null"));
    }
    *p = ptr::null_mut();
    Ok(&mut *p)
}

unsafe fn sched_arg<'a>(p: *const HvpfScheduler) -> Result<&'a HvpfScheduler, (HvpfStatus, String)> {
    p.as_ref().ok_or_else(|| bad_arg("scheduler is null"))
}

unsafe fn map_arg<'a>(p: *const HvpfQualityMap) -> Result<&'a HvpfQualityMap, (HvpfStatus, String)> {
    p.as_ref().ok_or_else(|| bad_arg("quality map is null"))
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hvpf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hvpf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a run configuration file; relative paths inside it resolve against
/// its directory.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hvpf_scheduler_from_file(path: *const c_char, out: *mut *mut HvpfScheduler) -> HvpfStatus {
    guard(|| {
        let out = out_arg(out)?;
        let path = str_arg(path, "path")?;
        let config = RunConfig::load(Path::new(path)).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(HvpfScheduler { config }));
        Ok(())
    })
}

/// Builds a scheduler from configuration JSON text. `base_dir` (nullable)
/// resolves relative paths; defaults to the working directory.
///
/// # Safety
/// `json` and a non-null `base_dir` must be NUL-terminated strings; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn hvpf_scheduler_from_json(
    json: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut HvpfScheduler,
) -> HvpfStatus {
    guard(|| {
        let out = out_arg(out)?;
        let json = str_arg(json, "json")?;
        let base = if base_dir.is_null() { "." } else { str_arg(base_dir, "base_dir")? };
        let config = RunConfig::from_json(json, Path::new(base), None).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(HvpfScheduler { config }));
        Ok(())
    })
}

/// # Safety
/// `scheduler` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hvpf_scheduler_free(scheduler: *mut HvpfScheduler) {
    if !scheduler.is_null() {
        drop(Box::from_raw(scheduler));
    }
}

/// Patch side in pixels the scheduler will use.
///
/// # Safety
/// `scheduler` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hvpf_scheduler_patch_size(scheduler: *const HvpfScheduler, out: *mut usize) -> HvpfStatus {
    guard(|| {
        let s = sched_arg(scheduler)?;
        let out = out.as_mut().ok_or_else(|| bad_arg("output pointer is null"))?;
        *out = s.config.patch_size;
        Ok(())
    })
}

unsafe fn run(
    s: &HvpfScheduler,
    image: LuminanceImage,
    gaze_xy: *const f64,
    flow_u: *const f32,
    flow_v: *const f32,
    out: &mut *mut HvpfQualityMap,
) -> Result<(), (HvpfStatus, String)> {
    let (w, h) = (image.width(), image.height());
    let gaze = if gaze_xy.is_null() { None } else { Some((*gaze_xy, *gaze_xy.add(1))) };
    let flow = match (flow_u.is_null(), flow_v.is_null()) {
        (true, true) => None,
        (false, false) => {
            let u = std::slice::from_raw_parts(flow_u, w * h).to_vec();
            let v = std::slice::from_raw_parts(flow_v, w * h).to_vec();
            Some(FlowField::new(w, h, 1, u, v).map_err(lib_err)?)
        }
        _ => return Err(bad_arg("flow_u and flow_v must both be set or both be null")),
    };
    let cfg = &s.config;
    let opts = ScheduleOptions {
        levels: cfg.levels,
        ..ScheduleOptions::new(cfg.patch_size)
    };
    let ctx = ScheduleContext { gaze, flow: flow.as_ref() };
    let map = schedule_image(&image, &cfg.viewing, &cfg.csf, &cfg.profiles, &opts, &ctx).map_err(lib_err)?;
    let report = image_report(&map, cfg, gaze).map_err(lib_err)?;
    let json = serde_json::to_string(&report).map_err(|e| lib_err(e.into()))?;
    let report_json = CString::new(json).map_err(|e| (HvpfStatus::Internal, e.to_string()))?;
    *out = Box::into_raw(Box::new(HvpfQualityMap { map, report_json }));
    Ok(())
}

fn check_dims(width: usize, height: usize) -> Result<usize, (HvpfStatus, String)> {
    if width == 0 || height == 0 {
        return Err(bad_arg("image dimensions must be positive"));
    }
    width
        .checked_mul(height)
        .ok_or_else(|| bad_arg("image dimensions overflow"))
}

/// Schedules an 8-bit grayscale image, decoded through the configured
/// display. `stride` is the row pitch in bytes (0 means `width`).
/// `gaze_xy` (nullable) points to two doubles in pixels. `flow_u`/`flow_v`
/// (both null or both set) hold `width*height` per-pixel motion in pixels
/// per frame.
///
/// # Safety
/// `pixels` must hold `height` rows of `stride` bytes; the optional arrays
/// must have the documented lengths; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hvpf_schedule_gray8(
    scheduler: *const HvpfScheduler,
    pixels: *const u8,
    width: usize,
    height: usize,
    stride: usize,
    gaze_xy: *const f64,
    flow_u: *const f32,
    flow_v: *const f32,
    out: *mut *mut HvpfQualityMap,
) -> HvpfStatus {
    guard(|| {
        let out = out_arg(out)?;
        let s = sched_arg(scheduler)?;
        check_dims(width, height)?;
        if pixels.is_null() {
            return Err(bad_arg("pixels is null"));
        }
        let stride = if stride == 0 { width } else { stride };
        if stride < width {
            return Err(bad_arg("stride is smaller than width"));
        }
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            data.extend_from_slice(std::slice::from_raw_parts(pixels.add(y * stride), width));
        }
        let raster = Raster::from_gray8(width, height, &data).map_err(lib_err)?;
        let image = decode_luminance(&raster, &s.config.viewing).map_err(lib_err)?;
        run(s, image, gaze_xy, flow_u, flow_v, out)
    })
}

/// Schedules an image given directly as luminance in cd/m², row-major.
///
/// # Safety
/// `luminance` must hold `width*height` doubles; see
/// [`hvpf_schedule_gray8`] for the other arguments.
#[no_mangle]
pub unsafe extern "C" fn hvpf_schedule_luminance(
    scheduler: *const HvpfScheduler,
    luminance: *const f64,
    width: usize,
    height: usize,
    gaze_xy: *const f64,
    flow_u: *const f32,
    flow_v: *const f32,
    out: *mut *mut HvpfQualityMap,
) -> HvpfStatus {
    guard(|| {
        let out = out_arg(out)?;
        let s = sched_arg(scheduler)?;
        let n = check_dims(width, height)?;
        if luminance.is_null() {
            return Err(bad_arg("luminance is null"));
        }
        let values = std::slice::from_raw_parts(luminance, n).to_vec();
        let image = LuminanceImage::new(width, height, values).map_err(lib_err)?;
        run(s, image, gaze_xy, flow_u, flow_v, out)
    })
}

/// # Safety
/// `map` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hvpf_map_free(map: *mut HvpfQualityMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// Grid shape: patch columns, rows and patch side in pixels. Any output
/// pointer may be null.
///
/// # Safety
/// `map` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hvpf_map_dims(
    map: *const HvpfQualityMap,
    cols: *mut usize,
    rows: *mut usize,
    patch_size: *mut usize,
) -> HvpfStatus {
    guard(|| {
        let m = &map_arg(map)?.map;
        for (p, v) in [(cols, m.cols), (rows, m.rows), (patch_size, m.patch_size)] {
            if let Some(p) = p.as_mut() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Total and baseline cost in FLOPs and their ratio. Any output pointer may
/// be null.
///
/// # Safety
/// `map` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hvpf_map_costs(
    map: *const HvpfQualityMap,
    cost_total: *mut f64,
    cost_baseline: *mut f64,
    ratio: *mut f64,
) -> HvpfStatus {
    guard(|| {
        let m = &map_arg(map)?.map;
        for (p, v) in [(cost_total, m.cost_total), (cost_baseline, m.cost_baseline), (ratio, m.ratio)] {
            if let Some(p) = p.as_mut() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Copies the selected variant ids, row-major, into `ids`. `len` must be at
/// least cols*rows.
///
/// # Safety
/// `map` must be a live handle; `ids` must hold `len` elements.
#[no_mangle]
pub unsafe extern "C" fn hvpf_map_grid(map: *const HvpfQualityMap, ids: *mut u32, len: usize) -> HvpfStatus {
    guard(|| {
        let m = &map_arg(map)?.map;
        if ids.is_null() {
            return Err(bad_arg("ids is null"));
        }
        if len < m.grid.len() {
            return Err(bad_arg(&format!("ids holds {len} entries, the grid has {}", m.grid.len())));
        }
        ptr::copy_nonoverlapping(m.grid.as_ptr(), ids, m.grid.len());
        Ok(())
    })
}

/// JSON report (same content as the CLI's `*.report.json`). The pointer is
/// owned by the map and valid until [`hvpf_map_free`].
///
/// # Safety
/// `map` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hvpf_map_report_json(map: *const HvpfQualityMap) -> *const c_char {
    map.as_ref().map_or(ptr::null(), |m| m.report_json.as_ptr())
}

/// Quality-map grid as CSV text. Release with [`hvpf_string_free`].
///
/// # Safety
/// `map` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hvpf_map_csv(map: *const HvpfQualityMap, out: *mut *mut c_char) -> HvpfStatus {
    guard(|| {
        let out = out_arg(out)?;
        let m = &map_arg(map)?.map;
        let csv = CString::new(m.to_csv()).map_err(|e| (HvpfStatus::Internal, e.to_string()))?;
        *out = csv.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hvpf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
