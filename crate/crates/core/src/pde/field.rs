use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{HjbError, Result};

const MAGIC: &[u8; 5] = b"SHJB1";

/// Uniform time-space grid on a truncated factor box.
///
/// `n_y` counts every node including the two boundary nodes, where a
/// homogeneous Neumann condition is imposed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub y_min: f64,
    pub y_max: f64,
    pub n_y: usize,
    pub dt: f64,
    pub horizon: f64,
}

impl Grid1D {
    pub fn new(y_min: f64, y_max: f64, n_y: usize, dt: f64, horizon: f64) -> Result<Self> {
        let grid = Grid1D { y_min, y_max, n_y, dt, horizon };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.y_min.is_finite() && self.y_max.is_finite() && self.y_min < self.y_max) {
            return Err(HjbError::InvalidParameter(format!(
                "need y_min < y_max, got [{}, {}]",
                self.y_min, self.y_max
            )));
        }
        if self.n_y < 3 {
            return Err(HjbError::InvalidParameter(format!("need at least 3 space nodes, got {}", self.n_y)));
        }
        if !(self.dt > 0.0 && self.horizon > 0.0 && self.dt <= self.horizon) {
            return Err(HjbError::InvalidParameter(format!(
                "need 0 < dt <= T, got dt={} T={}",
                self.dt, self.horizon
            )));
        }
        let steps = (self.horizon / self.dt).round();
        if (steps * self.dt - self.horizon).abs() > 1e-12 * self.horizon.max(1.0) {
            return Err(HjbError::InvalidParameter(format!(
                "dt={} does not divide T={}",
                self.dt, self.horizon
            )));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn dy(&self) -> f64 {
        (self.y_max - self.y_min) / (self.n_y - 1) as f64
    }

    pub fn y(&self, j: usize) -> f64 {
        if j + 1 == self.n_y {
            self.y_max
        } else {
            self.y_min + j as f64 * self.dy()
        }
    }

    pub fn ys(&self) -> Vec<f64> {
        (0..self.n_y).map(|j| self.y(j)).collect()
    }

    /// `t_i = i T / steps`, with the last node pinned to `T`.
    pub fn time(&self, i: usize) -> f64 {
        let steps = self.steps();
        if i == steps {
            self.horizon
        } else {
            self.horizon * i as f64 / steps as f64
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps()).map(|i| self.time(i)).collect()
    }
}

/// What the field's terminal row represents.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Terminal {
    /// `u(T) = N`.
    Finite(f64),
    /// Singular limit, stored on `t <= T - delta`; `level` is the last ladder rung.
    Singular { level: f64, delta: f64 },
}

/// Samples of `u(t, y)` on a [`Grid1D`], row-major in ascending time.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueField {
    pub grid: Grid1D,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub terminal: Terminal,
}

impl ValueField {
    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.grid.n_y;
        &self.values[i * n..(i + 1) * n]
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.n_y + j]
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("value field has at least one time row")
    }

    pub fn horizon(&self) -> f64 {
        self.grid.horizon
    }

    /// Rows with `t <= t_max`.
    pub fn restricted(&self, t_max: f64) -> ValueField {
        let keep = self.times.iter().take_while(|&&t| t <= t_max + 1e-12).count().max(1);
        ValueField {
            grid: self.grid,
            times: self.times[..keep].to_vec(),
            values: self.values[..keep * self.grid.n_y].to_vec(),
            terminal: self.terminal,
        }
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max |self - other|` over a shared grid.
    pub fn sup_distance(&self, other: &ValueField) -> f64 {
        assert_eq!(self.values.len(), other.values.len(), "fields live on different grids");
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Bilinear interpolation in `(t, y)`, clamped to the `y` box.
    pub fn interpolate(&self, t: f64, y: f64) -> Result<f64> {
        let (t0, t1) = (self.t_start(), self.t_end());
        let slack = 1e-12 * self.grid.horizon.max(1.0);
        if !(t >= t0 - slack && t <= t1 + slack) {
            return Err(HjbError::OutOfRange { t, range: format!("[{t0}, {t1}]") });
        }
        let t = t.clamp(t0, t1);
        let (i0, wt) = bracket(&self.times, t);
        let dy = self.grid.dy();
        let ys = ((y.clamp(self.grid.y_min, self.grid.y_max) - self.grid.y_min) / dy).min((self.grid.n_y - 1) as f64);
        let j0 = (ys.floor() as usize).min(self.grid.n_y - 2);
        let wy = ys - j0 as f64;
        let lerp_row = |i: usize| (1.0 - wy) * self.at(i, j0) + wy * self.at(i, j0 + 1);
        if wt == 0.0 || i0 + 1 >= self.n_times() {
            return Ok(lerp_row(i0));
        }
        Ok((1.0 - wt) * lerp_row(i0) + wt * lerp_row(i0 + 1))
    }

    /// `V(t, y, x) = u(t, y) x²`.
    pub fn value_at(&self, t: f64, y: f64, x: f64) -> Result<f64> {
        Ok(self.interpolate(t, y)? * x * x)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,y,u")?;
        let ys = self.grid.ys();
        for (i, t) in self.times.iter().enumerate() {
            for (j, y) in ys.iter().enumerate() {
                writeln!(out, "{t:.12e},{y:.12e},{:.17e}", self.at(i, j))?;
            }
        }
        Ok(())
    }

    /// Binary dump: magic `SHJB1`, a kind byte, the grid descriptor, the time
    /// nodes and the row-major values, all numbers little-endian.
    pub fn write_binary<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(MAGIC)?;
        let (kind, level, delta) = match self.terminal {
            Terminal::Finite(n) => (0u8, n, 0.0),
            Terminal::Singular { level, delta } => (1u8, level, delta),
        };
        out.write_all(&[kind])?;
        for v in [self.grid.horizon, self.grid.dt, self.grid.y_min, self.grid.y_max, level, delta] {
            out.write_all(&v.to_le_bytes())?;
        }
        out.write_all(&(self.grid.n_y as u64).to_le_bytes())?;
        out.write_all(&(self.n_times() as u64).to_le_bytes())?;
        for v in self.times.iter().chain(&self.values) {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<ValueField> {
        let mut magic = [0u8; 5];
        input.read_exact(&mut magic).map_err(|_| HjbError::Format("truncated header".into()))?;
        if &magic != MAGIC {
            return Err(HjbError::Format(format!("bad magic bytes {magic:?}")));
        }
        let mut kind = [0u8; 1];
        input.read_exact(&mut kind).map_err(|_| HjbError::Format("truncated header".into()))?;
        let mut f = || -> Result<f64> {
            let mut b = [0u8; 8];
            input.read_exact(&mut b).map_err(|_| HjbError::Format("truncated payload".into()))?;
            Ok(f64::from_le_bytes(b))
        };
        let horizon = f()?;
        let dt = f()?;
        let y_min = f()?;
        let y_max = f()?;
        let level = f()?;
        let delta = f()?;
        let u = |input: &mut R| -> Result<u64> {
            let mut b = [0u8; 8];
            input.read_exact(&mut b).map_err(|_| HjbError::Format("truncated header".into()))?;
            Ok(u64::from_le_bytes(b))
        };
        let n_y = u(&mut input)? as usize;
        let n_times = u(&mut input)? as usize;
        let grid = Grid1D { y_min, y_max, n_y, dt, horizon };
        grid.validate().map_err(|e| HjbError::Format(e.to_string()))?;
        let count = n_times
            .checked_mul(n_y + 1)
            .filter(|&c| c <= (1 << 32))
            .ok_or_else(|| HjbError::Format("implausible field size".into()))?;
        let mut raw = vec![0u8; count * 8];
        input.read_exact(&mut raw).map_err(|_| HjbError::Format("truncated payload".into()))?;
        let mut numbers = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
        let times: Vec<f64> = numbers.by_ref().take(n_times).collect();
        let values: Vec<f64> = numbers.collect();
        let terminal = match kind[0] {
            0 => Terminal::Finite(level),
            1 => Terminal::Singular { level, delta },
            k => return Err(HjbError::Format(format!("unknown field kind {k}"))),
        };
        if n_times == 0 || times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(HjbError::Format("time nodes must be strictly increasing".into()));
        }
        Ok(ValueField { grid, times, values, terminal })
    }
}

/// Index `i` and weight `w` with `t = (1-w) times[i] + w times[i+1]`.
fn bracket(times: &[f64], t: f64) -> (usize, f64) {
    let n = times.len();
    if n == 1 || t <= times[0] {
        return (0, 0.0);
    }
    if t >= times[n - 1] {
        return (n - 1, 0.0);
    }
    let i = times.partition_point(|&s| s <= t) - 1;
    (i, (t - times[i]) / (times[i + 1] - times[i]))
}
