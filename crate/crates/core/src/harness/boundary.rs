//! Dense prediction lattices over a 2-D input plane, exported as CSV and SVG.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Result, SageError};
use crate::nn::{predict_labels, Batch, NetworkSpec, ParameterVector};

/// Predicted labels on a `resolution x resolution` lattice.
///
/// Point `(ix, iy)` sits at `x_min + ix * (x_max - x_min) / (resolution - 1)`
/// (likewise for y); `labels` is row-major with rows indexed by `iy`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryGrid {
    pub bounds: [f64; 4],
    pub resolution: usize,
    pub labels: Vec<usize>,
}

impl BoundaryGrid {
    pub fn x(&self, ix: usize) -> f64 {
        let [x0, x1, _, _] = self.bounds;
        x0 + ix as f64 * (x1 - x0) / (self.resolution - 1) as f64
    }

    pub fn y(&self, iy: usize) -> f64 {
        let [_, _, y0, y1] = self.bounds;
        y0 + iy as f64 * (y1 - y0) / (self.resolution - 1) as f64
    }

    pub fn label(&self, ix: usize, iy: usize) -> usize {
        self.labels[iy * self.resolution + ix]
    }

    /// Label of the lattice point nearest to `(x, y)`, clamped to the bounds.
    pub fn label_near(&self, x: f64, y: f64) -> usize {
        let [x0, x1, y0, y1] = self.bounds;
        let steps = (self.resolution - 1) as f64;
        let ix = (((x - x0) / (x1 - x0)) * steps).round().clamp(0.0, steps) as usize;
        let iy = (((y - y0) / (y1 - y0)) * steps).round().clamp(0.0, steps) as usize;
        self.label(ix, iy)
    }

    /// `x,y,label` rows in lattice order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,label\n");
        for iy in 0..self.resolution {
            for ix in 0..self.resolution {
                let _ = writeln!(out, "{},{},{}", self.x(ix), self.y(iy), self.label(ix, iy));
            }
        }
        out
    }

    /// Colored cells with `points` overlaid as outlined dots.
    pub fn to_svg(&self, points: Option<&Batch>) -> String {
        const PX: f64 = 600.0;
        const FILL: [&str; 8] = [
            "#f4b6b6", "#b6d4f4", "#bfe8bf", "#f4deb6", "#dcc4f0", "#b6ece8", "#eec3dd", "#d9d9d9",
        ];
        const DOT: [&str; 8] = [
            "#c0392b", "#2166ac", "#1b7837", "#d68910", "#7d3c98", "#148f77", "#b03a7a", "#555555",
        ];
        let [x0, x1, y0, y1] = self.bounds;
        let n = self.resolution;
        let cell = PX / n as f64;
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{PX}" height="{PX}" viewBox="0 0 {PX} {PX}" shape-rendering="crispEdges">"#
        );
        for iy in 0..n {
            // Row runs of equal labels become one rectangle.
            let top = PX - (iy + 1) as f64 * cell;
            let mut ix = 0;
            while ix < n {
                let l = self.label(ix, iy);
                let start = ix;
                while ix < n && self.label(ix, iy) == l {
                    ix += 1;
                }
                let _ = writeln!(
                    svg,
                    r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{}"/>"#,
                    start as f64 * cell,
                    top,
                    (ix - start) as f64 * cell,
                    cell,
                    FILL[l % FILL.len()]
                );
            }
        }
        if let Some(batch) = points {
            if let Some(labels) = batch.labels() {
                for (i, &l) in labels.iter().enumerate() {
                    let p = batch.input_row(i);
                    let px = (p[0] - x0) / (x1 - x0) * PX;
                    let py = PX - (p[1] - y0) / (y1 - y0) * PX;
                    if !(0.0..=PX).contains(&px) || !(0.0..=PX).contains(&py) {
                        continue;
                    }
                    let _ = writeln!(
                        svg,
                        r#"<circle cx="{px:.2}" cy="{py:.2}" r="2.2" fill="{}" stroke="white" stroke-width="0.5"/>"#,
                        DOT[l % DOT.len()]
                    );
                }
            }
        }
        svg.push_str("</svg>\n");
        svg
    }

    /// Writes `boundary.csv` and `boundary.svg`, creating `dir` if needed.
    pub fn write(&self, dir: impl AsRef<Path>, points: Option<&Batch>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| SageError::io(dir, e))?;
        let csv = dir.join("boundary.csv");
        fs::write(&csv, self.to_csv()).map_err(|e| SageError::io(&csv, e))?;
        let svg = dir.join("boundary.svg");
        fs::write(&svg, self.to_svg(points)).map_err(|e| SageError::io(&svg, e))
    }
}

/// Evaluates `predict` on every lattice point.
pub fn decision_boundary_grid(
    spec: &NetworkSpec,
    params: &ParameterVector,
    bounds: [f64; 4],
    resolution: usize,
) -> Result<BoundaryGrid> {
    if spec.input_dim() != 2 {
        return Err(SageError::config(format!(
            "decision boundaries need a 2-D input network, this one takes {}",
            spec.input_dim()
        )));
    }
    if resolution < 2 {
        return Err(SageError::config("boundary resolution must be at least 2"));
    }
    let [x0, x1, y0, y1] = bounds;
    if !(x1 > x0 && y1 > y0) {
        return Err(SageError::config(format!(
            "degenerate boundary bounds {bounds:?}"
        )));
    }
    let mut grid = BoundaryGrid {
        bounds,
        resolution,
        labels: Vec::new(),
    };
    let mut inputs = Vec::with_capacity(2 * resolution * resolution);
    for iy in 0..resolution {
        for ix in 0..resolution {
            inputs.push(grid.x(ix));
            inputs.push(grid.y(iy));
        }
    }
    grid.labels = predict_labels(spec, params, &inputs)?;
    Ok(grid)
}
