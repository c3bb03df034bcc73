//! Radial discretization of ℝ^N.
//!
//! Nodes are `r_i = i·h`, `h = R/(n − 1)`. The origin sample is not a free
//! degree of freedom: every operator rebuilds it from nodes 1–3 by the even
//! extrapolation `u(0) = 1.5·u₁ − 0.6·u₂ + 0.1·u₃` (exact for quadratics in
//! `r²`). The origin weight of the quadrature is zero, so a field is fully
//! determined by `values[1..]`; `values[0]` is kept consistent for output.
//!
//! Quadrature is the trapezoidal rule on `ω_{N−1} r^{N−1} g(r)` with Gregory
//! end corrections at `r = R`. At the origin the even symmetry of radial
//! profiles makes the uncorrected rule accurate to `O(h^N)` or better.
//!
//! The Laplacian uses fourth-order centered stencils for `u″ + (N−1)u′/r`,
//! mirrored ghosts below the origin, zero ghosts beyond `R`, and the limit
//! `Δu(0) = N·u″(0)`.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write as _};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::interp::MonotoneCubic;

pub const MIN_NODES: usize = 64;

/// Coefficients of `u(0)` in terms of `u(h), u(2h), u(3h)`.
pub const ORIGIN_EXTRAPOLATION: [f64; 3] = [1.5, -0.6, 0.1];

const GREGORY_ORDER: usize = 6;

/// Area of the unit sphere `S^{N−1}`, `2π^{N/2}/Γ(N/2)`.
pub fn unit_sphere_area(dim: usize) -> f64 {
    let pi = std::f64::consts::PI;
    // Γ(N/2) for integer N
    let gamma_half = if dim.is_multiple_of(2) {
        (1..dim / 2).map(|k| k as f64).product::<f64>()
    } else {
        let k = (dim - 1) / 2;
        let mut g = pi.sqrt();
        for j in 0..k {
            g *= j as f64 + 0.5;
        }
        g
    };
    2.0 * pi.powf(dim as f64 / 2.0) / gamma_half
}

/// Volume of the N-ball of radius `r`.
pub fn ball_volume(dim: usize, r: f64) -> f64 {
    unit_sphere_area(dim) * r.powi(dim as i32) / dim as f64
}

/// One row of the discrete Laplacian acting on the free nodes `1..n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct StencilRow {
    pub start: usize,
    pub len: usize,
    pub coefs: [f64; 5],
}

/// Uniform radial mesh with N-dimensional quadrature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    dim: usize,
    n: usize,
    r_max: f64,
    h: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    rows: Vec<StencilRow>,
}

/// Right-end corrections to the trapezoidal rule, exact for polynomials of
/// degree below `GREGORY_ORDER`: solves `Σ_j c_j j^k = B_{k+1}/(k+1)`.
fn gregory_corrections() -> [f64; GREGORY_ORDER] {
    // Bernoulli numbers B_0..B_6
    let bernoulli = [1.0, -0.5, 1.0 / 6.0, 0.0, -1.0 / 30.0, 0.0, 1.0 / 42.0];
    let m = GREGORY_ORDER;
    let mut a = [[0.0; GREGORY_ORDER + 1]; GREGORY_ORDER];
    for (k, row) in a.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().take(m).enumerate() {
            *entry = (j as f64).powi(k as i32);
        }
        row[m] = if k == 0 {
            0.0
        } else {
            bernoulli[k + 1] / (k + 1) as f64
        };
    }
    // Gaussian elimination with partial pivoting on the augmented matrix
    for col in 0..m {
        let pivot = (col..m)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        for row in col + 1..m {
            let factor = a[row][col] / a[col][col];
            let (top, bottom) = a.split_at_mut(row);
            for (x, y) in bottom[0][col..=m].iter_mut().zip(&top[col][col..=m]) {
                *x -= factor * y;
            }
        }
    }
    let mut c = [0.0; GREGORY_ORDER];
    for row in (0..m).rev() {
        let mut acc = a[row][m];
        for k in row + 1..m {
            acc -= a[row][k] * c[k];
        }
        c[row] = acc / a[row][row];
    }
    c
}

impl RadialGrid {
    pub fn new(dim: usize, n: usize, r_max: f64) -> Result<Self> {
        if dim < 5 {
            return Err(Error::InvalidArgument(format!(
                "grid dimension must be at least 5, got {dim}"
            )));
        }
        if n < MIN_NODES {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least {MIN_NODES} nodes, got {n}"
            )));
        }
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "r_max must be positive, got {r_max}"
            )));
        }
        let h = r_max / (n - 1) as f64;
        let nodes: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
        let mut trap = vec![1.0; n];
        trap[n - 1] = 0.5;
        for (j, c) in gregory_corrections().iter().enumerate() {
            trap[n - 1 - j] += c;
        }
        let omega = unit_sphere_area(dim);
        let weights: Vec<f64> = nodes
            .iter()
            .zip(&trap)
            .map(|(&r, &t)| omega * h * t * r.powi(dim as i32 - 1))
            .collect();
        let rows = (0..n).map(|i| stencil_row(dim, n, h, i)).collect();
        Ok(Self {
            dim,
            n,
            r_max,
            h,
            nodes,
            weights,
            rows,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub(crate) fn rows(&self) -> &[StencilRow] {
        &self.rows
    }

    /// Same mesh geometry.
    pub fn same_as(&self, other: &RadialGrid) -> bool {
        self.dim == other.dim && self.n == other.n && self.r_max == other.r_max
    }

    /// `∫_{B_R} g dx` from samples `g(r_i)`.
    pub fn integrate(&self, samples: &[f64]) -> Result<f64> {
        if samples.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: samples.len(),
            });
        }
        Ok(self.weights.iter().zip(samples).map(|(w, g)| w * g).sum())
    }

    /// Origin value implied by the free nodes.
    pub fn origin_value(&self, values: &[f64]) -> f64 {
        ORIGIN_EXTRAPOLATION[0] * values[1]
            + ORIGIN_EXTRAPOLATION[1] * values[2]
            + ORIGIN_EXTRAPOLATION[2] * values[3]
    }

    /// Discrete Laplacian of the profile whose free nodes are `values[1..]`.
    pub(crate) fn apply_laplacian(&self, values: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| {
                row.coefs[..row.len]
                    .iter()
                    .zip(&values[row.start..row.start + row.len])
                    .map(|(c, v)| c * v)
                    .sum()
            })
            .collect()
    }

    /// `Lᵀ y`, the transpose of [`apply_laplacian`](Self::apply_laplacian);
    /// entry 0 of the result is always zero.
    pub(crate) fn apply_laplacian_transpose(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (row, &yi) in self.rows.iter().zip(y) {
            for (k, c) in row.coefs[..row.len].iter().enumerate() {
                out[row.start + k] += c * yi;
            }
        }
        out
    }

    /// Overwrites `values[0]` with the even extrapolation.
    pub(crate) fn close_origin(&self, values: &mut [f64]) {
        values[0] = self.origin_value(values);
    }
}

fn stencil_row(dim: usize, n: usize, h: f64, i: usize) -> StencilRow {
    const SECOND: [f64; 5] = [-1.0, 16.0, -30.0, 16.0, -1.0];
    const FIRST: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];
    let nf = dim as f64;
    // columns start..start+5; ghosts below the origin mirror, beyond R vanish
    let start = if i <= 2 { 1 } else { i - 2 };
    let mut acc = [0.0; 5];
    let add = |node: i64, value: f64, acc: &mut [f64; 5]| {
        let j = node.unsigned_abs() as usize;
        if j >= n {
            return;
        }
        if j == 0 {
            for (k, e) in ORIGIN_EXTRAPOLATION.iter().enumerate() {
                acc[k + 1 - start] += e * value;
            }
        } else {
            acc[j - start] += value;
        }
    };
    for k in 0..5 {
        let node = i as i64 + k as i64 - 2;
        let value = if i == 0 {
            nf * SECOND[k] / (12.0 * h * h)
        } else {
            let r = i as f64 * h;
            SECOND[k] / (12.0 * h * h) + (nf - 1.0) / r * FIRST[k] / (12.0 * h)
        };
        add(node, value, &mut acc);
    }
    let end = (i + 2).min(n - 1).max(3);
    let len = end + 1 - start;
    let mut coefs = [0.0; 5];
    coefs[..len].copy_from_slice(&acc[..len]);
    StencilRow { start, len, coefs }
}

/// A real radial profile sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl RadialField {
    /// Wraps samples; `values[0]` is replaced by the extrapolated origin value.
    pub fn new(grid: Arc<RadialGrid>, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite sample at node {bad}"
            )));
        }
        grid.close_origin(&mut values);
        Ok(Self { grid, values })
    }

    /// Samples `profile(r)` at every node.
    pub fn from_fn<F: Fn(f64) -> f64>(grid: Arc<RadialGrid>, profile: F) -> Result<Self> {
        let values = grid.nodes().iter().map(|&r| profile(r)).collect();
        Self::new(grid, values)
    }

    pub fn zeros(grid: Arc<RadialGrid>) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![0.0; n],
        }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| t * v).collect(),
        }
    }

    /// `self + t·other`.
    pub fn axpy(&self, t: f64, other: &RadialField) -> Result<Self> {
        self.check_same_grid(other)?;
        Ok(Self {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + t * b)
                .collect(),
        })
    }

    pub fn check_same_grid(&self, other: &RadialField) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Quadrature inner product.
    pub fn inner(&self, other: &RadialField) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .grid
            .weights()
            .iter()
            .zip(self.values.iter().zip(&other.values))
            .map(|(w, (a, b))| w * a * b)
            .sum())
    }

    /// `‖u‖₂²`.
    pub fn mass(&self) -> f64 {
        self.grid
            .weights()
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v * v)
            .sum()
    }

    /// Maximum absolute difference of the samples.
    pub fn max_abs_diff(&self, other: &RadialField) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

/// Grid constructor with validation: `dim >= 5`, `n >= 64`, `r_max > 0`.
pub fn build_grid(dim: usize, n: usize, r_max: f64) -> Result<Arc<RadialGrid>> {
    RadialGrid::new(dim, n, r_max).map(Arc::new)
}

pub fn integrate(grid: &RadialGrid, samples: &[f64]) -> Result<f64> {
    grid.integrate(samples)
}

/// Discrete `Δu = u″ + (N−1)u′/r`.
pub fn laplacian(field: &RadialField) -> RadialField {
    let values = field.grid.apply_laplacian(&field.values);
    RadialField {
        grid: field.grid.clone(),
        values,
    }
}

/// Observed convergence order of `Δ_h` on `exp(−r²/2)`, from the max-norm
/// errors on `(n, R)` and `(2n−1, R)`.
pub fn laplacian_order(dim: usize, n: usize, r_max: f64) -> Result<f64> {
    let err = |n: usize| -> Result<f64> {
        let grid = build_grid(dim, n, r_max)?;
        let u = RadialField::from_fn(grid.clone(), |r| (-0.5 * r * r).exp())?;
        let lap = laplacian(&u);
        Ok(grid
            .nodes()
            .iter()
            .zip(lap.values())
            .map(|(&r, &l)| (l - (r * r - dim as f64) * (-0.5 * r * r).exp()).abs())
            .fold(0.0, f64::max))
    };
    let (coarse, fine) = (err(n)?, err(2 * n - 1)?);
    Ok((coarse / fine).log2())
}

fn require_positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{name} must be positive, got {value}"
        )))
    }
}

/// Resamples `amplitude · u(stretch · r)` by monotone cubic interpolation.
fn resample(field: &RadialField, amplitude: f64, stretch: f64) -> RadialField {
    let grid = &field.grid;
    let mut source = field.values.clone();
    grid.close_origin(&mut source);
    let interp = MonotoneCubic::new(grid.spacing(), &source);
    let mut values: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&r| amplitude * interp.eval(stretch * r))
        .collect();
    grid.close_origin(&mut values);
    RadialField {
        grid: grid.clone(),
        values,
    }
}

/// Mass-preserving fiber dilation `u_s(r) = s^{N/4} u(s^{1/2} r)`.
pub fn scale_field(field: &RadialField, s: f64) -> Result<RadialField> {
    require_positive("s", s)?;
    if s == 1.0 {
        return Ok(field.clone());
    }
    let n = field.grid.dim() as f64;
    Ok(resample(field, s.powf(n / 4.0), s.sqrt()))
}

/// Dilation `v(x) = θ^{(N−4)/8} u(θ^{1/4} x)`, `θ = c_from/c_to`, taking mass
/// `c_from` to `c_to` while keeping `‖Δu‖₂²` fixed.
pub fn mass_dilate(field: &RadialField, c_from: f64, c_to: f64) -> Result<RadialField> {
    require_positive("c_from", c_from)?;
    require_positive("c_to", c_to)?;
    let mass = field.mass();
    if (mass - c_from).abs() > 1e-6 * c_from {
        return Err(Error::MassDrift {
            mass,
            target: c_from,
        });
    }
    if c_from == c_to {
        return Ok(field.clone());
    }
    let n = field.grid.dim() as f64;
    let theta = c_from / c_to;
    Ok(resample(
        field,
        theta.powf((n - 4.0) / 8.0),
        theta.powf(0.25),
    ))
}

/// Writes `# dim=<N> n=<n> r_max=<R>`, the `r,value` header, and one row per node.
pub fn write_field_csv<W: std::io::Write>(field: &RadialField, mut out: W) -> Result<()> {
    let grid = &field.grid;
    let mut text = String::with_capacity(48 * grid.len());
    let _ = writeln!(
        text,
        "# dim={} n={} r_max={:e}",
        grid.dim(),
        grid.len(),
        grid.r_max()
    );
    text.push_str("r,value\n");
    for (r, v) in grid.nodes().iter().zip(&field.values) {
        let _ = writeln!(text, "{r:e},{v:e}");
    }
    out.write_all(text.as_bytes())?;
    Ok(())
}

pub fn save_field(field: &RadialField, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut writer = std::io::BufWriter::new(file);
    write_field_csv(field, &mut writer)?;
    writer.flush()?;
    Ok(())
}

fn parse_header(line: &str) -> Result<(usize, usize, f64)> {
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| Error::FieldFormat("missing '# dim=.. n=.. r_max=..' header".into()))?;
    let (mut dim, mut n, mut r_max) = (None, None, None);
    for token in body.split_whitespace() {
        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| Error::FieldFormat(format!("malformed header token '{token}'")))?;
        let bad = |_| Error::FieldFormat(format!("bad header value '{token}'"));
        match key {
            "dim" => dim = Some(value.parse::<usize>().map_err(|e| bad(e.to_string()))?),
            "n" => n = Some(value.parse::<usize>().map_err(|e| bad(e.to_string()))?),
            "r_max" => r_max = Some(value.parse::<f64>().map_err(|e| bad(e.to_string()))?),
            _ => {}
        }
    }
    match (dim, n, r_max) {
        (Some(d), Some(n), Some(r)) => Ok((d, n, r)),
        _ => Err(Error::FieldFormat(
            "header must carry dim, n and r_max".into(),
        )),
    }
}

/// Reads a field CSV. With `target`, the header must describe that grid;
/// otherwise a grid is built from the header.
pub fn read_field_csv<R: std::io::Read>(
    input: R,
    target: Option<&Arc<RadialGrid>>,
) -> Result<RadialField> {
    let mut lines = BufReader::new(input).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::FieldFormat("empty file".into()))??;
    let (dim, n, r_max) = parse_header(header.trim())?;
    let grid = match target {
        Some(g) => {
            if g.dim() != dim || g.len() != n || (g.r_max() - r_max).abs() > 1e-12 * r_max {
                return Err(Error::FieldFormat(format!(
                    "header (dim={dim}, n={n}, r_max={r_max}) does not match the target grid \
                     (dim={}, n={}, r_max={})",
                    g.dim(),
                    g.len(),
                    g.r_max()
                )));
            }
            g.clone()
        }
        None => build_grid(dim, n, r_max)?,
    };
    let columns = lines
        .next()
        .ok_or_else(|| Error::FieldFormat("missing column header".into()))??;
    if columns.trim() != "r,value" {
        return Err(Error::FieldFormat(format!(
            "expected column header 'r,value', got '{}'",
            columns.trim()
        )));
    }
    let mut values = Vec::with_capacity(n);
    for (k, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (r, v) = line
            .split_once(',')
            .ok_or_else(|| Error::FieldFormat(format!("row {k}: expected two columns")))?;
        let r: f64 = r
            .trim()
            .parse()
            .map_err(|_| Error::FieldFormat(format!("row {k}: bad r '{r}'")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::FieldFormat(format!("row {k}: bad value '{v}'")))?;
        if k >= n {
            return Err(Error::FieldFormat(format!("more than {n} rows")));
        }
        let expected = grid.nodes()[k];
        if (r - expected).abs() > 1e-9 * grid.r_max() {
            return Err(Error::FieldFormat(format!(
                "row {k}: r = {r} does not match node {expected}"
            )));
        }
        values.push(v);
    }
    if values.len() != n {
        return Err(Error::FieldFormat(format!(
            "expected {n} rows, found {}",
            values.len()
        )));
    }
    RadialField::new(grid, values)
}

pub fn load_field(path: &Path, target: Option<&Arc<RadialGrid>>) -> Result<RadialField> {
    let file = std::fs::File::open(path)?;
    read_field_csv(file, target)
}
