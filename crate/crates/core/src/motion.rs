//! Screen-space motion for the temporal term: an exhaustive SAD block
//! matcher and readers/writers for externally computed flow.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::raster::write_atomic;
use crate::viewing::LuminanceImage;

pub const FLO_MAGIC: f32 = 202021.25;

/// Displacement field in pixels/frame, either per pixel (`block == 1`) or
/// one vector per `block`×`block` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub width: usize,
    pub height: usize,
    pub block: usize,
    pub u: Vec<f32>,
    pub v: Vec<f32>,
}

impl FlowField {
    pub fn new(width: usize, height: usize, block: usize, u: Vec<f32>, v: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 || block == 0 {
            return Err(Error::input("flow field has zero size"));
        }
        if u.len() != width * height || v.len() != width * height {
            return Err(Error::input("flow component lengths do not match the grid"));
        }
        if u.iter().chain(&v).any(|x| !x.is_finite()) {
            return Err(Error::input("flow components must be finite"));
        }
        Ok(Self { width, height, block, u, v })
    }

    pub fn uniform(width: usize, height: usize, u: f32, v: f32) -> Self {
        Self {
            width,
            height,
            block: 1,
            u: vec![u; width * height],
            v: vec![v; width * height],
        }
    }

    pub fn is_per_pixel(&self) -> bool {
        self.block == 1
    }

    /// Does this field cover a `w`×`h` image?
    pub fn covers(&self, w: usize, h: usize) -> bool {
        self.width == w.div_ceil(self.block) && self.height == h.div_ceil(self.block)
    }

    fn magnitude_at_pixel(&self, x: usize, y: usize) -> f64 {
        let i = (y / self.block) * self.width + x / self.block;
        (self.u[i] as f64).hypot(self.v[i] as f64)
    }
}

/// Exhaustive block matching. For each block of `prev` the displacement
/// `d` minimizing Σ|prev(p) − next(p + d)| is chosen among candidates that
/// keep the block inside the frame; ties go to the smaller |d|, then to the
/// smaller (dy, dx).
pub fn block_match(prev: &LuminanceImage, next: &LuminanceImage, block: usize, search_radius: usize) -> Result<FlowField> {
    let (w, h) = (prev.width(), prev.height());
    if (next.width(), next.height()) != (w, h) {
        return Err(Error::input(format!(
            "frames differ in size: {w}x{h} vs {}x{}",
            next.width(),
            next.height()
        )));
    }
    if block < 4 {
        return Err(Error::config(format!("block size must be at least 4, got {block}")));
    }
    if search_radius < 1 {
        return Err(Error::config("search radius must be at least 1"));
    }
    let (gw, gh) = (w.div_ceil(block), h.div_ceil(block));
    let r = search_radius as isize;
    let vectors: Vec<(f32, f32)> = (0..gw * gh)
        .into_par_iter()
        .map(|bi| {
            let (bx, by) = (bi % gw, bi / gw);
            let (x0, y0) = (bx * block, by * block);
            let (bw, bh) = (block.min(w - x0), block.min(h - y0));
            let mut best = (f64::INFINITY, 0isize, 0isize, 0isize);
            for dy in -r..=r {
                let ny = y0 as isize + dy;
                if ny < 0 || ny as usize + bh > h {
                    continue;
                }
                for dx in -r..=r {
                    let nx = x0 as isize + dx;
                    if nx < 0 || nx as usize + bw > w {
                        continue;
                    }
                    let mut sad = 0.0;
                    for y in 0..bh {
                        for x in 0..bw {
                            sad += (prev.get(x0 + x, y0 + y) - next.get(nx as usize + x, ny as usize + y)).abs();
                        }
                        if sad > best.0 {
                            break;
                        }
                    }
                    let mag = dx * dx + dy * dy;
                    let better = sad < best.0 || (sad == best.0 && (mag, dy, dx) < (best.1, best.2, best.3));
                    if better {
                        best = (sad, mag, dy, dx);
                    }
                }
            }
            (best.3 as f32, best.2 as f32)
        })
        .collect();
    let (u, v) = vectors.into_iter().unzip();
    FlowField::new(gw, gh, block, u, v)
}

/// Mean displacement magnitude over each `patch_size` tile of a
/// `width`×`height` image, tiles in row-major order.
pub fn patch_velocity(flow: &FlowField, width: usize, height: usize, patch_size: usize) -> Result<Vec<f64>> {
    if !flow.covers(width, height) {
        return Err(Error::input(format!(
            "flow grid {}x{} (block {}) does not cover a {width}x{height} image",
            flow.width, flow.height, flow.block
        )));
    }
    if patch_size == 0 {
        return Err(Error::input("patch size must be positive"));
    }
    let (cols, rows) = (width.div_ceil(patch_size), height.div_ceil(patch_size));
    let mut out = Vec::with_capacity(cols * rows);
    for py in 0..rows {
        for px in 0..cols {
            let (x0, y0) = (px * patch_size, py * patch_size);
            let (x1, y1) = ((x0 + patch_size).min(width), (y0 + patch_size).min(height));
            let mut s = 0.0;
            for y in y0..y1 {
                for x in x0..x1 {
                    s += flow.magnitude_at_pixel(x, y);
                }
            }
            out.push(s / ((x1 - x0) * (y1 - y0)) as f64);
        }
    }
    Ok(out)
}

pub fn flo_bytes(flow: &FlowField) -> Vec<u8> {
    let mut buf = Vec::with_capacity(12 + 8 * flow.u.len());
    buf.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    buf.extend_from_slice(&(flow.width as i32).to_le_bytes());
    buf.extend_from_slice(&(flow.height as i32).to_le_bytes());
    for (u, v) in flow.u.iter().zip(&flow.v) {
        buf.extend_from_slice(&u.to_le_bytes());
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

pub fn write_flo(path: &Path, flow: &FlowField) -> Result<()> {
    write_atomic(path, &flo_bytes(flow))
}

/// Parses the little-endian `.flo` layout as a per-pixel field.
pub fn parse_flo(bytes: &[u8], path: Option<&Path>) -> Result<FlowField> {
    let err = |msg: String| Error::Format {
        path: path.map(Path::to_path_buf),
        line: None,
        msg,
    };
    if bytes.len() < 12 {
        return Err(err(format!("{} bytes is too short for a .flo header", bytes.len())));
    }
    let word = |i: usize| <[u8; 4]>::try_from(&bytes[i..i + 4]).expect("4 bytes");
    let magic = f32::from_le_bytes(word(0));
    if magic != FLO_MAGIC {
        return Err(err(format!("bad magic {magic}")));
    }
    let (w, h) = (i32::from_le_bytes(word(4)), i32::from_le_bytes(word(8)));
    if w <= 0 || h <= 0 {
        return Err(err(format!("bad dimensions {w}x{h}")));
    }
    let n = (w as usize)
        .checked_mul(h as usize)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| err("dimensions overflow".into()))?;
    if bytes.len() - 12 != n {
        return Err(err(format!("payload is {} bytes, expected {n}", bytes.len() - 12)));
    }
    let count = n / 8;
    let mut u = Vec::with_capacity(count);
    let mut v = Vec::with_capacity(count);
    for k in 0..count {
        u.push(f32::from_le_bytes(word(12 + 8 * k)));
        v.push(f32::from_le_bytes(word(16 + 8 * k)));
    }
    FlowField::new(w as usize, h as usize, 1, u, v).map_err(|e| err(e.to_string()))
}

/// CSV with columns x, y, u, v; every pixel of the grid exactly once.
pub fn parse_flow_csv<R: std::io::Read>(reader: R, path: Option<&Path>) -> Result<FlowField> {
    let fmt_err = |line: usize, msg: String| Error::format_at(path.map(Path::to_path_buf), line, msg);
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| fmt_err(1, e.to_string()))?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| fmt_err(1, format!("missing column '{name}'")))
    };
    let (cx, cy, cu, cv) = (col("x")?, col("y")?, col("u")?, col("v")?);
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| fmt_err(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let int = |c: usize| {
            rec[c]
                .parse::<usize>()
                .map_err(|_| fmt_err(line, format!("'{}' is not a pixel index", &rec[c])))
        };
        let float = |c: usize| {
            rec[c]
                .parse::<f32>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| fmt_err(line, format!("'{}' is not a finite number", &rec[c])))
        };
        rows.push((int(cx)?, int(cy)?, float(cu)?, float(cv)?, line));
    }
    if rows.is_empty() {
        return Err(fmt_err(1, "flow CSV has no rows".into()));
    }
    let w = rows.iter().map(|r| r.0).max().unwrap() + 1;
    let h = rows.iter().map(|r| r.1).max().unwrap() + 1;
    let mut seen = vec![false; w * h];
    let mut u = vec![0.0; w * h];
    let mut v = vec![0.0; w * h];
    for &(x, y, fu, fv, line) in &rows {
        let i = y * w + x;
        if std::mem::replace(&mut seen[i], true) {
            return Err(fmt_err(line, format!("pixel ({x}, {y}) appears twice")));
        }
        u[i] = fu;
        v[i] = fv;
    }
    if rows.len() != w * h {
        return Err(fmt_err(rows.last().unwrap().4, format!("{} of {} pixels present", rows.len(), w * h)));
    }
    FlowField::new(w, h, 1, u, v)
}

pub fn write_flow_csv(path: &Path, flow: &FlowField) -> Result<()> {
    let mut buf = Vec::new();
    writeln!(buf, "x,y,u,v").expect("vec write");
    for y in 0..flow.height {
        for x in 0..flow.width {
            let i = y * flow.width + x;
            writeln!(buf, "{x},{y},{},{}", flow.u[i], flow.v[i]).expect("vec write");
        }
    }
    write_atomic(path, &buf)
}

/// Reads `.flo` or `.csv` (by extension) and checks it against the target
/// frame size when one is given.
pub fn load_flow(path: &Path, frame: Option<(usize, usize)>) -> Result<FlowField> {
    let is_csv = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let flow = if is_csv {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        parse_flow_csv(f, Some(path))?
    } else {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        parse_flo(&bytes, Some(path))?
    };
    if let Some((w, h)) = frame {
        if (flow.width, flow.height) != (w, h) {
            return Err(Error::input(format!(
                "{}: flow is {}x{} but the frame is {w}x{h}",
                path.display(),
                flow.width,
                flow.height
            )));
        }
    }
    Ok(flow)
}
