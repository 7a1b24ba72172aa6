//! Diamond-surface geometry: NV sensitivity maps, ensemble shifts of
//! masked radical-pair monolayers and Monte Carlo anchor packing.
//!
//! Coordinates put the NV at the origin with the surface plane at height
//! `d`; the NV axis is tilted from the surface normal by θ_NV in the x–z
//! plane.

use std::f64::consts::PI;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::hamiltonians::CONSTANTS;

/// Crystal face of the diamond.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    /// (001): NV axes at the magic angle to the normal.
    T001,
    /// (111): NV axis along the normal.
    T111,
}

impl Termination {
    pub fn theta_nv(self) -> f64 {
        match self {
            Termination::T001 => (1.0f64 / 3.0).sqrt().acos(),
            Termination::T111 => 0.0,
        }
    }
}

impl std::str::FromStr for Termination {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim_matches(|c| c == '(' || c == ')') {
            "001" | "100" => Ok(Termination::T001),
            "111" => Ok(Termination::T111),
            other => Err(invalid("termination", other, "001 or 111")),
        }
    }
}

/// Masked monolayer of radical pairs above an NV.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceModel {
    pub termination: Termination,
    pub theta_nv: f64,
    /// NV depth, m
    pub depth: f64,
    /// mask diameter D, m
    pub mask_diameter: f64,
    /// linker length between surface and donor, m
    pub linker: f64,
    /// donor–acceptor separation, m
    pub separation: f64,
    /// molecules per m²
    pub rho_mol: f64,
    /// +1 or −1; flips the sign of the polarization of every pair.
    pub handedness: f64,
}

impl SurfaceModel {
    pub fn new(
        termination: Termination,
        depth: f64,
        mask_diameter: f64,
        linker: f64,
        separation: f64,
        rho_mol: f64,
    ) -> Result<Self> {
        let m = Self {
            termination,
            theta_nv: termination.theta_nv(),
            depth,
            mask_diameter,
            linker,
            separation,
            rho_mol,
            handedness: 1.0,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.depth > 0.0) || !self.depth.is_finite() {
            return Err(invalid("depth", self.depth, "a positive depth in metres"));
        }
        if !(self.mask_diameter >= 0.0) {
            return Err(invalid(
                "mask_diameter",
                self.mask_diameter,
                "a non-negative diameter in metres",
            ));
        }
        if !(self.linker > 0.0) {
            return Err(invalid("linker", self.linker, "a positive length in metres"));
        }
        if !(self.separation > 0.0) {
            return Err(invalid("separation", self.separation, "a positive length in metres"));
        }
        if !(self.rho_mol >= 0.0) {
            return Err(invalid("rho_mol", self.rho_mol, "a non-negative density"));
        }
        if self.handedness != 1.0 && self.handedness != -1.0 {
            return Err(invalid("handedness", self.handedness, "+1 or -1"));
        }
        Ok(())
    }

    pub fn with_handedness(self, h: f64) -> Self {
        Self { handedness: h, ..self }
    }

    fn axis(&self) -> [f64; 3] {
        [self.theta_nv.sin(), 0.0, self.theta_nv.cos()]
    }

    /// Heights of the donor and acceptor spins above the NV.
    fn heights(&self) -> (f64, f64) {
        let h1 = self.depth + self.linker;
        (h1, h1 + self.separation)
    }

    /// Shift of one molecule at lateral position (x, y) relative to the NV:
    /// donor with ⟨Sz⟩ = +½·handedness, acceptor with the opposite sign.
    pub fn molecule_shift(&self, x: f64, y: f64) -> f64 {
        let kappa = CONSTANTS.kappa(CONSTANTS.gamma_nv(), CONSTANTS.gamma_e());
        let (h1, h2) = self.heights();
        let m = 0.5 * self.handedness;
        -kappa * m * (angular_kernel(self.axis(), x, y, h1) - angular_kernel(self.axis(), x, y, h2))
    }
}

/// (1 − 3cos²θ)/r³ for a spin at (x, y, z) and NV axis `n`.
fn angular_kernel(n: [f64; 3], x: f64, y: f64, z: f64) -> f64 {
    let r2 = x * x + y * y + z * z;
    let r = r2.sqrt();
    let ct = (n[0] * x + n[1] * y + n[2] * z) / r;
    (1.0 - 3.0 * ct * ct) / (r2 * r)
}

/// Normalized sensitivity on a grid of surface points, in units of depth.
#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityMap {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Row-major, `values[iy * xs.len() + ix]`.
    pub values: Vec<f64>,
}

impl SensitivityMap {
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.xs.len() + ix]
    }
}

/// (1 − 3cos²θ)/r³ over surface points (x/d, y/d, 1), scaled so the largest
/// magnitude on the grid is 1.
pub fn sensitivity_map(theta_nv: f64, xs: &[f64], ys: &[f64]) -> Result<SensitivityMap> {
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::Empty("sensitivity grid"));
    }
    let n = [theta_nv.sin(), 0.0, theta_nv.cos()];
    let mut values = Vec::with_capacity(xs.len() * ys.len());
    for &y in ys {
        for &x in xs {
            values.push(angular_kernel(n, x, y, 1.0));
        }
    }
    let peak = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        for v in &mut values {
            *v /= peak;
        }
    }
    Ok(SensitivityMap {
        xs: xs.to_vec(),
        ys: ys.to_vec(),
        values,
    })
}

/// Ensemble shift ΔΩ and its LG-scaled value ΔΩ/√3, rad/s.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonolayerShift {
    pub shift: f64,
    pub shift_lg: f64,
}

/// Closed form for a uniform disk of radius R = D/2 centred above the NV.
pub fn monolayer_shift_analytic(model: &SurfaceModel) -> Result<MonolayerShift> {
    model.validate()?;
    let kappa = CONSTANTS.kappa(CONSTANTS.gamma_nv(), CONSTANTS.gamma_e());
    let r = model.mask_diameter / 2.0;
    let (h1, h2) = model.heights();
    let angular = 1.0 + 3.0 * (2.0 * model.theta_nv).cos();
    let radial = (h1 * h1 + r * r).powf(-1.5) - (h2 * h2 + r * r).powf(-1.5);
    let shift = model.handedness * model.rho_mol * kappa * PI * r * r * angular / 4.0 * radial;
    Ok(MonolayerShift {
        shift,
        shift_lg: shift / 3f64.sqrt(),
    })
}

/// Resolution and stopping rule of the disk quadrature.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadrature {
    /// Starting number of radial panels (even) and azimuthal nodes.
    pub radial: usize,
    pub angular: usize,
    /// Stop once a doubling changes the result by less than this fraction.
    pub rel_tol: f64,
    pub max_doublings: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self {
            radial: 32,
            angular: 16,
            rel_tol: 1e-5,
            max_doublings: 10,
        }
    }
}

/// Composite Simpson in radius, trapezoid in azimuth, over the mask disk.
fn disk_integral(model: &SurfaceModel, nr: usize, nphi: usize) -> f64 {
    let r_max = model.mask_diameter / 2.0;
    let hr = r_max / nr as f64;
    let dphi = 2.0 * PI / nphi as f64;
    let mut sum = 0.0;
    for i in 0..=nr {
        let r = i as f64 * hr;
        let w = if i == 0 || i == nr {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let mut ring = 0.0;
        for k in 0..nphi {
            let (s, c) = (k as f64 * dphi).sin_cos();
            ring += model.molecule_shift(r * c, r * s);
        }
        sum += w * r * ring * dphi;
    }
    sum * hr / 3.0
}

/// Quadrature of per-molecule shifts over the mask, refined until stable.
pub fn monolayer_shift_numeric(model: &SurfaceModel, q: Quadrature) -> Result<f64> {
    model.validate()?;
    if model.mask_diameter == 0.0 || model.rho_mol == 0.0 {
        return Ok(0.0);
    }
    let (mut nr, mut nphi) = (q.radial.max(2) & !1, q.angular.max(4));
    let mut prev = disk_integral(model, nr, nphi);
    // magnitude of the donor term alone sets the convergence floor
    let kappa = CONSTANTS.kappa(CONSTANTS.gamma_nv(), CONSTANTS.gamma_e());
    let (h1, _) = model.heights();
    let floor = kappa * PI / h1;
    for _ in 0..q.max_doublings {
        nr *= 2;
        nphi *= 2;
        let next = disk_integral(model, nr, nphi);
        if (next - prev).abs() <= q.rel_tol * next.abs().max(1e-6 * floor) {
            return Ok(model.rho_mol * next);
        }
        prev = next;
    }
    Err(Error::NonConvergent(format!(
        "disk quadrature still changing after {} doublings",
        q.max_doublings
    )))
}

/// Sum of per-molecule shifts for explicit lateral positions (m),
/// relative to the NV.
pub fn monolayer_shift_discrete(model: &SurfaceModel, positions: &[[f64; 2]]) -> f64 {
    positions.iter().map(|p| model.molecule_shift(p[0], p[1])).sum()
}

/// Anchors that survived the exclusion step.
#[derive(Clone, Debug, PartialEq)]
pub struct AnchorField {
    pub positions: Vec<[f64; 2]>,
    /// Box side lengths, m.
    pub width: f64,
    pub height: f64,
    pub d_min: f64,
}

impl AnchorField {
    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn density(&self) -> f64 {
        self.positions.len() as f64 / self.area()
    }

    /// Smallest pairwise distance (brute force).
    pub fn min_distance(&self) -> f64 {
        let p = &self.positions;
        let mut best = f64::INFINITY;
        for i in 0..p.len() {
            for j in i + 1..p.len() {
                best = best.min((p[i][0] - p[j][0]).hypot(p[i][1] - p[j][1]));
            }
        }
        best
    }
}

/// Poisson-distributed anchors in a hard-wall box, kept greedily in random
/// order whenever no kept anchor lies closer than `d_min`.
pub fn generate_anchor_field<R: Rng>(
    rho_anchor: f64,
    d_min: f64,
    width: f64,
    height: f64,
    rng: &mut R,
) -> Result<AnchorField> {
    if !(rho_anchor >= 0.0) || !rho_anchor.is_finite() {
        return Err(invalid("rho_anchor", rho_anchor, "a non-negative density"));
    }
    if !(d_min >= 0.0) || !d_min.is_finite() {
        return Err(invalid("d_min", d_min, "a non-negative distance"));
    }
    if !(width > 0.0 && height > 0.0) {
        return Err(invalid("area", width * height, "a positive box"));
    }
    let mean = rho_anchor * width * height;
    let count = if mean > 0.0 {
        Poisson::new(mean)
            .map_err(|_| invalid("rho_anchor", rho_anchor, "a finite expected anchor count"))?
            .sample(rng) as usize
    } else {
        0
    };

    let cell = if d_min > 0.0 { d_min } else { width.max(height) };
    let nx = ((width / cell).ceil() as usize).max(1);
    let ny = ((height / cell).ceil() as usize).max(1);
    let mut grid: Vec<Vec<usize>> = vec![Vec::new(); nx * ny];
    let mut kept: Vec<[f64; 2]> = Vec::new();
    let d2 = d_min * d_min;

    for _ in 0..count {
        let p = [rng.random::<f64>() * width, rng.random::<f64>() * height];
        if d_min > 0.0 {
            let cx = ((p[0] / cell) as usize).min(nx - 1);
            let cy = ((p[1] / cell) as usize).min(ny - 1);
            let mut clash = false;
            'search: for gy in cy.saturating_sub(1)..=(cy + 1).min(ny - 1) {
                for gx in cx.saturating_sub(1)..=(cx + 1).min(nx - 1) {
                    for &k in &grid[gy * nx + gx] {
                        let q = kept[k];
                        let dx = p[0] - q[0];
                        let dy = p[1] - q[1];
                        if dx * dx + dy * dy < d2 {
                            clash = true;
                            break 'search;
                        }
                    }
                }
            }
            if clash {
                continue;
            }
            grid[cy * nx + cx].push(kept.len());
        }
        kept.push(p);
    }
    Ok(AnchorField {
        positions: kept,
        width,
        height,
        d_min,
    })
}

/// Mean and spread of the kept-molecule density over independent trials.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityEstimate {
    /// molecules per m²
    pub mean: f64,
    /// standard deviation across trials, molecules per m²
    pub spread: f64,
    pub trials: usize,
    pub seed: u64,
}

/// Trial `k` draws from ChaCha8 stream `k` of `seed`, so results do not
/// depend on scheduling.
pub fn sample_anchor_density(
    rho_anchor: f64,
    d_min: f64,
    area: f64,
    trials: usize,
    seed: u64,
) -> Result<DensityEstimate> {
    if trials == 0 {
        return Err(invalid("trials", trials, "at least one trial"));
    }
    if !(area > 0.0) || !area.is_finite() {
        return Err(invalid("area", area, "a positive area"));
    }
    if d_min > 0.0 && area < 1e3 * PI * d_min * d_min / 4.0 {
        return Err(invalid("area", area, "at least 10^3 exclusion disks of diameter d_min"));
    }
    let side = area.sqrt();
    let densities: Vec<Result<f64>> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let field = generate_anchor_field(rho_anchor, d_min, side, side, &mut rng)?;
            Ok(field.density())
        })
        .collect();
    let densities: Vec<f64> = densities.into_iter().collect::<Result<_>>()?;
    let n = densities.len() as f64;
    let mean = densities.iter().sum::<f64>() / n;
    let var = if densities.len() > 1 {
        densities.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(DensityEstimate {
        mean,
        spread: var.sqrt(),
        trials,
        seed,
    })
}

/// Anchors inside a disk of diameter `diameter` centred at `center`.
pub fn place_molecules(field: &AnchorField, center: [f64; 2], diameter: f64) -> Vec<[f64; 2]> {
    let r2 = (diameter / 2.0).powi(2);
    if diameter <= 0.0 {
        return Vec::new();
    }
    field
        .positions
        .iter()
        .filter(|p| (p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2) <= r2)
        .copied()
        .collect()
}

/// Writes `x_over_d,y_over_d,value`.
pub fn write_sensitivity_table<W: Write>(w: &mut W, map: &SensitivityMap) -> io::Result<()> {
    writeln!(w, "x_over_d,y_over_d,value")?;
    for (iy, y) in map.ys.iter().enumerate() {
        for (ix, x) in map.xs.iter().enumerate() {
            writeln!(w, "{x:.6},{y:.6},{:.10}", map.at(ix, iy))?;
        }
    }
    Ok(())
}

/// Writes `x_nm,y_nm` for an anchor field.
pub fn write_anchor_table<W: Write>(w: &mut W, field: &AnchorField) -> io::Result<()> {
    writeln!(w, "x_nm,y_nm")?;
    for p in &field.positions {
        writeln!(w, "{:.6},{:.6}", p[0] * 1e9, p[1] * 1e9)?;
    }
    Ok(())
}
