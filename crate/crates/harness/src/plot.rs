//! Minimal PNG rendering of iteration logs: cost and delta_k versus
//! iteration on a log10 axis. Hand-rolled rasterizer; no interactivity.

use std::path::Path;

use crate::error::{HarnessError, Result};

const WIDTH: u32 = 900;
const HEIGHT: u32 = 540;
const MARGIN: u32 = 60;

struct Canvas {
    img: image::RgbImage,
}

impl Canvas {
    fn new() -> Self {
        let mut img = image::RgbImage::new(WIDTH, HEIGHT);
        for p in img.pixels_mut() {
            *p = image::Rgb([255, 255, 255]);
        }
        Self { img }
    }

    fn put(&mut self, x: i64, y: i64, color: [u8; 3]) {
        if x >= 0 && y >= 0 && (x as u32) < WIDTH && (y as u32) < HEIGHT {
            self.img.put_pixel(x as u32, y as u32, image::Rgb(color));
        }
    }

    fn line(&mut self, x0: i64, y0: i64, x1: i64, y1: i64, color: [u8; 3]) {
        let dx = (x1 - x0).abs();
        let dy = -(y1 - y0).abs();
        let sx = if x0 < x1 { 1 } else { -1 };
        let sy = if y0 < y1 { 1 } else { -1 };
        let mut err = dx + dy;
        let (mut x, mut y) = (x0, y0);
        loop {
            self.put(x, y, color);
            if x == x1 && y == y1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x += sx;
            }
            if e2 <= dx {
                err += dx;
                y += sy;
            }
        }
    }
}

/// Plots cost (blue) and delta_k (red) against iteration, log10 vertical
/// axis. Non-positive values are skipped.
pub fn plot_log(log_path: &Path, out_path: &Path) -> Result<()> {
    let rows = crate::csvlog::read_costs(log_path)?;
    if rows.is_empty() {
        return Err(HarnessError::Numeric("log has no iterations".into()));
    }
    let series: Vec<(&str, [u8; 3], Vec<(f64, f64)>)> = vec![
        (
            "cost",
            [40, 70, 200],
            rows.iter()
                .filter(|(_, cost, _)| *cost > 0.0 && cost.is_finite())
                .map(|&(it, cost, _)| (it as f64, cost.log10()))
                .collect(),
        ),
        (
            "delta_k",
            [200, 50, 40],
            rows.iter()
                .filter(|(_, _, d)| *d > 0.0 && d.is_finite())
                .map(|&(it, _, d)| (it as f64, d.log10()))
                .collect(),
        ),
    ];

    let xs_max = rows.last().unwrap().0 as f64;
    let mut y_lo = f64::INFINITY;
    let mut y_hi = f64::NEG_INFINITY;
    for (_, _, pts) in &series {
        for &(_, y) in pts {
            y_lo = y_lo.min(y);
            y_hi = y_hi.max(y);
        }
    }
    if !y_lo.is_finite() || !y_hi.is_finite() {
        return Err(HarnessError::Numeric(
            "no positive values to plot on a log axis".into(),
        ));
    }
    if y_hi - y_lo < 1e-12 {
        y_hi += 1.0;
        y_lo -= 1.0;
    }

    let to_px = |x: f64, y: f64| -> (i64, i64) {
        let w = (WIDTH - 2 * MARGIN) as f64;
        let h = (HEIGHT - 2 * MARGIN) as f64;
        let px = MARGIN as f64 + w * (x - 1.0) / (xs_max - 1.0).max(1.0);
        let py = MARGIN as f64 + h * (1.0 - (y - y_lo) / (y_hi - y_lo));
        (px.round() as i64, py.round() as i64)
    };

    let mut canvas = Canvas::new();
    // Axes.
    let axis = [0, 0, 0];
    canvas.line(
        MARGIN as i64,
        (HEIGHT - MARGIN) as i64,
        (WIDTH - MARGIN) as i64,
        (HEIGHT - MARGIN) as i64,
        axis,
    );
    canvas.line(
        MARGIN as i64,
        MARGIN as i64,
        MARGIN as i64,
        (HEIGHT - MARGIN) as i64,
        axis,
    );
    // Decade gridlines.
    let mut decade = y_lo.ceil();
    while decade <= y_hi {
        let (_, py) = to_px(1.0, decade);
        for x in (MARGIN..WIDTH - MARGIN).step_by(5) {
            canvas.put(x as i64, py, [210, 210, 210]);
        }
        decade += 1.0;
    }
    for (_, color, pts) in &series {
        for pair in pts.windows(2) {
            let (x0, y0) = to_px(pair[0].0, pair[0].1);
            let (x1, y1) = to_px(pair[1].0, pair[1].1);
            canvas.line(x0, y0, x1, y1, *color);
        }
    }

    canvas
        .img
        .save(out_path)
        .map_err(|e| HarnessError::Numeric(format!("png write failed: {e}")))
}
