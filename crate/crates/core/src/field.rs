//! Scalar fields sampled on uniform 1D space-time lattices.

use crate::error::{Error, Result};

/// Axis-aligned space-time box `[x_min, x_max] × [t_start, t_end]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceTimeBox {
    pub x_min: f64,
    pub x_max: f64,
    pub t_start: f64,
    pub t_end: f64,
}

impl SpaceTimeBox {
    pub fn new(x_min: f64, x_max: f64, t_start: f64, t_end: f64) -> Result<Self> {
        if !(x_min < x_max && t_start < t_end) {
            return Err(Error::InvalidInput(format!(
                "degenerate box [{x_min}, {x_max}] x [{t_start}, {t_end}]"
            )));
        }
        Ok(Self {
            x_min,
            x_max,
            t_start,
            t_end,
        })
    }

    /// The cylinder `B_r(center) × (t_top − r, t_top]` in one space dimension.
    pub fn cylinder(center: f64, radius: f64, t_top: f64) -> Result<Self> {
        Self::new(center - radius, center + radius, t_top - radius, t_top)
    }

    pub fn contains(&self, x: f64, t: f64) -> bool {
        x >= self.x_min && x <= self.x_max && t >= self.t_start && t <= self.t_end
    }

    pub fn strictly_inside(&self, other: &SpaceTimeBox) -> bool {
        self.x_min > other.x_min
            && self.x_max < other.x_max
            && self.t_start > other.t_start
            && self.t_end <= other.t_end
    }
}

/// Values `u(x_i, t_k)` on the lattice `x_i = x0 + i h_x`, `t_k = t0 + k h_t`,
/// stored time-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    nx: usize,
    nt: usize,
    x0: f64,
    hx: f64,
    t0: f64,
    ht: f64,
    values: Vec<f64>,
}

impl GridField {
    /// `nx` and `nt` count nodes (not cells).
    pub fn zeros(nx: usize, nt: usize, x0: f64, hx: f64, t0: f64, ht: f64) -> Result<Self> {
        if nx < 2 || nt < 1 || !(hx > 0.0) || !(ht > 0.0) {
            return Err(Error::InvalidInput(format!(
                "grid needs nx >= 2, nt >= 1 and positive spacings (nx = {nx}, nt = {nt}, hx = {hx}, ht = {ht})"
            )));
        }
        Ok(Self {
            nx,
            nt,
            x0,
            hx,
            t0,
            ht,
            values: vec![0.0; nx * nt],
        })
    }

    /// Samples `f` on a box with `cells_x` × `cells_t` cells.
    pub fn from_fn(domain: &SpaceTimeBox, cells_x: usize, cells_t: usize, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if cells_x == 0 || cells_t == 0 {
            return Err(Error::InvalidInput("need at least one cell per axis".into()));
        }
        let hx = (domain.x_max - domain.x_min) / cells_x as f64;
        let ht = (domain.t_end - domain.t_start) / cells_t as f64;
        let mut field = Self::zeros(cells_x + 1, cells_t + 1, domain.x_min, hx, domain.t_start, ht)?;
        for k in 0..field.nt {
            let t = field.t(k);
            for i in 0..field.nx {
                let x = field.x(i);
                field.set(i, k, f(x, t));
            }
        }
        Ok(field)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn nt(&self) -> usize {
        self.nt
    }
    pub fn hx(&self) -> f64 {
        self.hx
    }
    pub fn ht(&self) -> f64 {
        self.ht
    }
    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.hx
    }
    pub fn t(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.ht
    }

    pub fn domain(&self) -> SpaceTimeBox {
        SpaceTimeBox {
            x_min: self.x0,
            x_max: self.x(self.nx - 1),
            t_start: self.t0,
            t_end: self.t(self.nt - 1),
        }
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.values[k * self.nx + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, k: usize, v: f64) {
        self.values[k * self.nx + i] = v;
    }

    /// Spatial slice at time index `k`.
    pub fn slice(&self, k: usize) -> &[f64] {
        &self.values[k * self.nx..(k + 1) * self.nx]
    }

    pub fn slice_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.values[k * self.nx..(k + 1) * self.nx]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn same_grid(&self, other: &GridField) -> bool {
        self.nx == other.nx
            && self.nt == other.nt
            && (self.x0 - other.x0).abs() <= 1e-12 * (1.0 + self.x0.abs())
            && (self.hx - other.hx).abs() <= 1e-12 * self.hx
            && (self.t0 - other.t0).abs() <= 1e-12 * (1.0 + self.t0.abs())
            && (self.ht - other.ht).abs() <= 1e-12 * self.ht
    }

    pub fn ensure_same_grid(&self, other: &GridField) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{}x{} (hx {}, ht {}) vs {}x{} (hx {}, ht {})",
                self.nx, self.nt, self.hx, self.ht, other.nx, other.nt, other.hx, other.ht
            )))
        }
    }

    /// Index of the node at `x`, if `x` lies on the lattice.
    pub fn x_index(&self, x: f64) -> Option<usize> {
        lattice_index(x, self.x0, self.hx, self.nx)
    }

    pub fn t_index(&self, t: f64) -> Option<usize> {
        lattice_index(t, self.t0, self.ht, self.nt)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn osc(&self) -> f64 {
        self.max() - self.min()
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridField {
        GridField {
            values: self.values.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_with(&self, other: &GridField, f: impl Fn(f64, f64) -> f64) -> Result<GridField> {
        self.ensure_same_grid(other)?;
        Ok(GridField {
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
            ..self.clone()
        })
    }

    /// Sub-lattice restricted to node ranges `i_lo..=i_hi`, `k_lo..=k_hi`.
    pub fn restrict(&self, i_lo: usize, i_hi: usize, k_lo: usize, k_hi: usize) -> Result<GridField> {
        if i_hi >= self.nx || k_hi >= self.nt || i_lo >= i_hi || k_lo > k_hi {
            return Err(Error::InvalidInput(format!(
                "restriction {i_lo}..={i_hi} x {k_lo}..={k_hi} outside {}x{}",
                self.nx, self.nt
            )));
        }
        let mut out = GridField::zeros(
            i_hi - i_lo + 1,
            k_hi - k_lo + 1,
            self.x(i_lo),
            self.hx,
            self.t(k_lo),
            self.ht,
        )?;
        for k in k_lo..=k_hi {
            out.slice_mut(k - k_lo).copy_from_slice(&self.slice(k)[i_lo..=i_hi]);
        }
        Ok(out)
    }

    /// Forward differences `(u_{i+1} − u_i)/h_x`, placed at the cell midpoints.
    pub fn forward_dx(&self) -> Result<GridField> {
        if self.nx < 3 {
            return Err(Error::InvalidInput("forward differences need at least 3 nodes".into()));
        }
        let mut out = GridField::zeros(self.nx - 1, self.nt, self.x0 + 0.5 * self.hx, self.hx, self.t0, self.ht)?;
        for k in 0..self.nt {
            let row = self.slice(k);
            for (o, w) in out.slice_mut(k).iter_mut().zip(row.windows(2)) {
                *o = (w[1] - w[0]) / self.hx;
            }
        }
        Ok(out)
    }

    pub(crate) fn with_values(&self, values: Vec<f64>) -> GridField {
        debug_assert_eq!(values.len(), self.values.len());
        GridField { values, ..self.clone() }
    }
}

fn lattice_index(v: f64, origin: f64, step: f64, n: usize) -> Option<usize> {
    let r = (v - origin) / step;
    let idx = r.round();
    if idx < 0.0 || idx >= n as f64 || (r - idx).abs() > 1e-6 {
        None
    } else {
        Some(idx as usize)
    }
}

/// Trapezoid weights on `n` nodes with spacing `h`.
pub(crate) fn trapezoid_weight(i: usize, n: usize, h: f64) -> f64 {
    if i == 0 || i + 1 == n {
        0.5 * h
    } else {
        h
    }
}
