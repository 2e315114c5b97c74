//! Exact-in-law sampling of the heat field on a time × space grid from its
//! Fourier modes, each an Ornstein–Uhlenbeck process driven by its own
//! Brownian motion.

use std::f64::consts::{PI, SQRT_2};
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::covariance::mode_rate;
use crate::error::{Error, Result};
use crate::rough::PathSlice;

/// Largest number of stored values a single field may hold.
pub const MAX_FIELD_VALUES: usize = 1 << 28;
pub const MAX_GRID_LEVEL: u32 = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralConfig {
    pub n_modes: usize,
    pub time_horizon: f64,
    pub n_time: usize,
    pub grid_level: u32,
    pub dim: usize,
    pub seed: u64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig {
            n_modes: 256,
            time_horizon: 1.0,
            n_time: 128,
            grid_level: 10,
            dim: 2,
            seed: 0,
        }
    }
}

impl SpectralConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_modes == 0 {
            return Err(Error::InvalidParameter("n_modes must be at least 1".into()));
        }
        if !(self.time_horizon > 0.0 && self.time_horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "time_horizon must be positive, got {}",
                self.time_horizon
            )));
        }
        if self.n_time == 0 {
            return Err(Error::InvalidParameter("n_time must be at least 1".into()));
        }
        if self.dim == 0 {
            return Err(Error::InvalidParameter("dim must be at least 1".into()));
        }
        if self.grid_level > MAX_GRID_LEVEL {
            return Err(Error::ResourceLimit(format!(
                "grid_level {} exceeds {MAX_GRID_LEVEL}",
                self.grid_level
            )));
        }
        let total = (self.n_time as u128 + 1) * (self.nodes() as u128) * self.dim as u128;
        let modes = (2 * self.n_modes as u128 + 1) * (self.n_time as u128 + 1);
        if total > MAX_FIELD_VALUES as u128 || modes > MAX_FIELD_VALUES as u128 {
            return Err(Error::ResourceLimit(format!(
                "field with {total} values and {modes} mode values per component is too large"
            )));
        }
        Ok(())
    }

    pub fn nodes(&self) -> usize {
        (1usize << self.grid_level) + 1
    }

    pub fn time_step(&self) -> f64 {
        self.time_horizon / self.n_time as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_time)
            .map(|i| i as f64 * self.time_step())
            .collect()
    }

    /// Pointwise variance lost to truncation at the final time.
    pub fn residual_variance(&self) -> f64 {
        truncation_residual(self.n_modes, self.time_horizon)
    }
}

/// `v_0 = 1`, `v_n = √2 cos(2πnx)`, `v_{-n} = √2 sin(2πnx)`.
pub fn basis_eval(n: i64, x: f64) -> f64 {
    match n {
        0 => 1.0,
        n if n > 0 => SQRT_2 * (2.0 * PI * n as f64 * x).cos(),
        n => SQRT_2 * (2.0 * PI * (-n) as f64 * x).sin(),
    }
}

/// One exact transition of `dX = -λX dt + dB` over a step `delta`.
pub fn ou_step(lambda: f64, delta: f64, prev: f64, xi: f64) -> Result<f64> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "time step must be nonnegative, got {delta}"
        )));
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "rate must be nonnegative, got {lambda}"
        )));
    }
    let (decay, sd) = ou_coefficients(lambda, delta);
    Ok(decay * prev + sd * xi)
}

fn ou_coefficients(lambda: f64, delta: f64) -> (f64, f64) {
    if lambda == 0.0 {
        (1.0, delta.sqrt())
    } else {
        let var = -(-2.0 * lambda * delta).exp_m1() / (2.0 * lambda);
        ((-lambda * delta).exp(), var.sqrt())
    }
}

/// `Σ_{|n|>N} (1 - e^{-2λ_n t}) / (2λ_n)`.
pub fn truncation_residual(n_modes: usize, t: f64) -> f64 {
    if !(t > 0.0) {
        return 0.0;
    }
    const EXPLICIT: usize = 100_000;
    let upper = n_modes.max(EXPLICIT);
    let mut sum = 0.0;
    // Summed from the far end so the small terms accumulate first.
    for n in ((n_modes + 1)..=upper).rev() {
        let l = mode_rate(n as i64);
        sum += -(-2.0 * l * t).exp_m1() / l;
    }
    // Beyond `upper` the exponential is negligible: Σ_{n>L} 1/λ_n via
    // Euler–Maclaurin for Σ 1/n².
    let l = upper as f64;
    let tail = 1.0 / l - 1.0 / (2.0 * l * l) + 1.0 / (6.0 * l.powi(3)) - 1.0 / (30.0 * l.powi(5));
    sum + tail / (4.0 * PI * PI)
}

/// Field values on `(n_time+1) × (2^K+1) × d`, stored time-major, then
/// node, then component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub config: SpectralConfig,
    pub replica: u64,
    values: Vec<f64>,
}

impl FieldSample {
    pub fn from_values(config: SpectralConfig, replica: u64, values: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let expected = (config.n_time + 1) * config.nodes() * config.dim;
        if values.len() != expected {
            return Err(Error::GridMismatch(format!(
                "expected {expected} field values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field values".into()));
        }
        Ok(FieldSample {
            config,
            replica,
            values,
        })
    }

    pub fn zeros(config: SpectralConfig) -> Result<Self> {
        let n = (config.n_time + 1) * config.nodes() * config.dim;
        FieldSample::from_values(config, 0, vec![0.0; n])
    }

    /// A field given pointwise by `f(t, x, component)`.
    pub fn from_fn(config: SpectralConfig, f: impl Fn(f64, f64, usize) -> f64) -> Result<Self> {
        config.validate()?;
        let nodes = config.nodes();
        let mut values = Vec::with_capacity((config.n_time + 1) * nodes * config.dim);
        for t in config.times() {
            for j in 0..nodes {
                let x = j as f64 / (nodes - 1) as f64;
                for i in 0..config.dim {
                    values.push(f(t, x, i));
                }
            }
        }
        FieldSample::from_values(config, 0, values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn nodes(&self) -> usize {
        self.config.nodes()
    }

    pub fn n_times(&self) -> usize {
        self.config.n_time + 1
    }

    pub fn grid_level(&self) -> u32 {
        self.config.grid_level
    }

    pub fn times(&self) -> Vec<f64> {
        self.config.times()
    }

    pub fn value(&self, t: usize, j: usize, i: usize) -> f64 {
        self.values[(t * self.nodes() + j) * self.dim() + i]
    }

    /// The `nodes × d` block at time index `t`.
    pub fn time_slice(&self, t: usize) -> &[f64] {
        let w = self.nodes() * self.dim();
        &self.values[t * w..(t + 1) * w]
    }

    pub(crate) fn time_slice_mut(&mut self, t: usize) -> &mut [f64] {
        let w = self.nodes() * self.dim();
        &mut self.values[t * w..(t + 1) * w]
    }

    pub fn path(&self, t: usize) -> PathSlice {
        PathSlice::new(self.dim(), self.grid_level(), self.time_slice(t).to_vec())
            .expect("field slices are valid paths")
    }

    pub fn scaled(&self, eps: f64) -> FieldSample {
        FieldSample {
            config: self.config.clone(),
            replica: self.replica,
            values: self.values.iter().map(|v| eps * v).collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# schema: heatlift.field.v1")?;
        writeln!(w, "t,x,component,value")?;
        let times = self.times();
        let h = 1.0 / (self.nodes() - 1) as f64;
        for (ti, t) in times.iter().enumerate() {
            for j in 0..self.nodes() {
                for i in 0..self.dim() {
                    writeln!(w, "{t},{},{i},{:e}", j as f64 * h, self.value(ti, j, i))?;
                }
            }
        }
        Ok(())
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(b"HLFS")?;
        w.write_all(&1u32.to_le_bytes())?;
        let c = &self.config;
        w.write_all(&(c.n_modes as u64).to_le_bytes())?;
        w.write_all(&c.time_horizon.to_le_bytes())?;
        w.write_all(&(c.n_time as u64).to_le_bytes())?;
        w.write_all(&c.grid_level.to_le_bytes())?;
        w.write_all(&(c.dim as u32).to_le_bytes())?;
        w.write_all(&c.seed.to_le_bytes())?;
        w.write_all(&self.replica.to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        fn take<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
            let mut b = [0u8; N];
            r.read_exact(&mut b)
                .map_err(|e| Error::Format(format!("truncated field: {e}")))?;
            Ok(b)
        }
        if &take::<R, 4>(&mut r)? != b"HLFS" {
            return Err(Error::Format("bad magic, expected HLFS".into()));
        }
        let version = u32::from_le_bytes(take(&mut r)?);
        if version != 1 {
            return Err(Error::Format(format!(
                "unsupported field version {version}"
            )));
        }
        let config = SpectralConfig {
            n_modes: u64::from_le_bytes(take(&mut r)?) as usize,
            time_horizon: f64::from_le_bytes(take(&mut r)?),
            n_time: u64::from_le_bytes(take(&mut r)?) as usize,
            grid_level: u32::from_le_bytes(take(&mut r)?),
            dim: u32::from_le_bytes(take(&mut r)?) as usize,
            seed: u64::from_le_bytes(take(&mut r)?),
        };
        config
            .validate()
            .map_err(|e| Error::Format(format!("bad field header: {e}")))?;
        let replica = u64::from_le_bytes(take(&mut r)?);
        let n = (config.n_time + 1) * config.nodes() * config.dim;
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            values.push(f64::from_le_bytes(take(&mut r)?));
        }
        FieldSample::from_values(config, replica, values)
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for one (seed, replica, component, mode) stream.
pub(crate) fn mode_rng(seed: u64, replica: u64, component: usize, stream: u64) -> ChaCha8Rng {
    let mut state = seed;
    let a = splitmix64(&mut state);
    let mut state = replica ^ a;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(((component as u64) << 32) | stream);
    rng
}

/// Draws the mode trajectories `ψ̂_n(t_i)`, `n = -N..=N`, for one
/// component. Row `n + N` holds mode `n`.
fn sample_modes(config: &SpectralConfig, replica: u64, component: usize) -> Vec<Vec<f64>> {
    let n_modes = config.n_modes as i64;
    let dt = config.time_step();
    (-n_modes..=n_modes)
        .map(|n| {
            let mut rng = mode_rng(config.seed, replica, component, (n + n_modes) as u64);
            let (decay, sd) = ou_coefficients(mode_rate(n), dt);
            let mut traj = Vec::with_capacity(config.n_time + 1);
            let mut x = 0.0;
            traj.push(x);
            for _ in 0..config.n_time {
                let xi: f64 = rng.sample(StandardNormal);
                x = decay * x + sd * xi;
                traj.push(x);
            }
            traj
        })
        .collect()
}

/// One field replica. The random input is a pure function of
/// `(config.seed, replica, component, mode)`.
pub fn sample_field(config: &SpectralConfig, replica: u64) -> Result<FieldSample> {
    config.validate()?;
    let mut field = FieldSample::zeros(config.clone())?;
    field.replica = replica;
    let bins = 1usize << config.grid_level;
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_inverse(bins);
    let mut buf = vec![Complex64::new(0.0, 0.0); bins];
    let n_modes = config.n_modes;
    let d = config.dim;
    for component in 0..d {
        let modes = sample_modes(config, replica, component);
        for ti in 1..=config.n_time {
            buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
            buf[0].re += modes[n_modes][ti];
            for n in 1..=n_modes {
                let c = Complex64::new(modes[n_modes + n][ti], -modes[n_modes - n][ti]) * SQRT_2;
                buf[n % bins] += c;
            }
            fft.process(&mut buf);
            let slice = field.time_slice_mut(ti);
            for (j, c) in buf.iter().enumerate() {
                slice[j * d + component] = c.re;
            }
            slice[bins * d + component] = slice[component];
        }
    }
    Ok(field)
}

/// Direct evaluation of `Σ ψ̂_n(t) v_n(x_j)`; slow, used to check the FFT path.
pub fn sample_field_direct(config: &SpectralConfig, replica: u64) -> Result<FieldSample> {
    config.validate()?;
    let mut field = FieldSample::zeros(config.clone())?;
    field.replica = replica;
    let nodes = config.nodes();
    let n_modes = config.n_modes as i64;
    let d = config.dim;
    for component in 0..d {
        let modes = sample_modes(config, replica, component);
        for ti in 1..=config.n_time {
            let slice = field.time_slice_mut(ti);
            for j in 0..nodes {
                let x = j as f64 / (nodes - 1) as f64;
                slice[j * d + component] = (-n_modes..=n_modes)
                    .map(|n| modes[(n + n_modes) as usize][ti] * basis_eval(n, x))
                    .sum();
            }
        }
    }
    Ok(field)
}
