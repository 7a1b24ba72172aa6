//! Pulsed ODMR of an NV center next to a radical pair, and the stick
//! spectrum predicted from secular line shifts.
//!
//! The NV is reduced to its {|0⟩, |−1⟩} doublet in the microwave rotating
//! frame. Contrast is the |0⟩ population after a rectangular π pulse.

use std::f64::consts::PI;
use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::engine::Decoupling;
use crate::error::{invalid, Error, Result};
use crate::hamiltonians::{
    dipolar_rp, nv_target_secular, zeeman_rp, zeeman_rp_rotating, DipolarMode, GFactorPair, NvTargetCoupling,
    RadicalPairGeometry, CONSTANTS,
};
use crate::sequences::{pi_rabi, Drive, NvDrive, Schedule};
use crate::spinmath::{c, identity, kron, CMatrix, Propagator, SpinRegister, I};
use crate::states::{make_initial_state, InitialStateParams, Occupations};

/// Positions of the two radicals relative to the NV.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SensingGeometry {
    /// metres
    pub r1: f64,
    /// metres
    pub r2: f64,
    /// angle of the NV→radical-1 vector to the field, rad
    pub theta1: f64,
    pub theta2: f64,
    pub collinear: bool,
}

impl SensingGeometry {
    pub fn new(r1: f64, r2: f64, theta1: f64, theta2: f64) -> Result<Self> {
        let g = Self {
            r1,
            r2,
            theta1,
            theta2,
            collinear: false,
        };
        g.validate()?;
        Ok(g)
    }

    /// Pair stacked on the field axis above the NV, nearer radical at
    /// `depth`.
    pub fn collinear(depth: f64, s: f64) -> Result<Self> {
        if !(s > 0.0) {
            return Err(invalid("s", s, "a positive separation in metres"));
        }
        let g = Self {
            r1: depth,
            r2: depth + s,
            theta1: 0.0,
            theta2: 0.0,
            collinear: true,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r1 > 0.0) || !self.r1.is_finite() {
            return Err(invalid("r1", self.r1, "a positive distance in metres"));
        }
        if !(self.r2 > 0.0) || !self.r2.is_finite() {
            return Err(invalid("r2", self.r2, "a positive distance in metres"));
        }
        if self.collinear && !(self.r2 > self.r1) {
            return Err(invalid("r2", self.r2, "r2 > r1 for a collinear pair"));
        }
        Ok(())
    }

    pub fn couplings(&self, g: GFactorPair) -> Result<(NvTargetCoupling, NvTargetCoupling)> {
        self.validate()?;
        let (g1, g2) = g.gammas();
        Ok((
            nv_target_secular(self.r1, self.theta1, g1)?,
            nv_target_secular(self.r2, self.theta2, g2)?,
        ))
    }
}

/// Everything an ODMR run needs besides the pair state and the sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdmrSetup {
    pub sensing: SensingGeometry,
    pub pair: RadicalPairGeometry,
    pub g: GFactorPair,
    /// tesla
    pub bz: f64,
    /// FSLG amplitude on the pair, rad/s; zero switches decoupling off.
    pub omega1: f64,
    /// π-pulse length, seconds.
    pub pulse_duration: f64,
}

impl OdmrSetup {
    /// Collinear pair along the field at `depth`, 40 mT, 50 MHz FSLG and a
    /// 4 µs π pulse.
    pub fn collinear(depth: f64, s: f64) -> Result<Self> {
        Ok(Self {
            sensing: SensingGeometry::collinear(depth, s)?,
            pair: RadicalPairGeometry::along_field(s)?,
            g: GFactorPair::default(),
            bz: 0.04,
            omega1: 2.0 * PI * 50e6,
            pulse_duration: 4e-6,
        })
    }

    fn validate(&self) -> Result<()> {
        self.sensing.validate()?;
        if !(self.pulse_duration > 0.0) || !self.pulse_duration.is_finite() {
            return Err(invalid(
                "pulse_duration",
                self.pulse_duration,
                "a positive time in seconds",
            ));
        }
        if !(self.omega1 >= 0.0) || !self.omega1.is_finite() {
            return Err(invalid("omega1", self.omega1, "a non-negative amplitude in rad/s"));
        }
        if !(self.bz >= 0.0) {
            return Err(invalid("Bz", self.bz, "a non-negative field in tesla"));
        }
        Ok(())
    }

    fn schedule(&self) -> Result<Schedule> {
        let d = if self.omega1 > 0.0 {
            Decoupling::Fslg
        } else {
            Decoupling::Off
        };
        d.schedule(self.omega1, self.pulse_duration)
    }
}

/// Contrast against microwave detuning.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Spectrum {
    /// rad/s
    pub detunings: Vec<f64>,
    pub contrast: Vec<f64>,
    pub warnings: Vec<String>,
}

impl Spectrum {
    /// Global contrast minimum.
    pub fn dominant_dip(&self) -> Option<f64> {
        self.contrast
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| self.detunings[i])
    }

    /// Interior local minima as (detuning, contrast), deepest first.
    pub fn dips(&self) -> Vec<(f64, f64)> {
        let c = &self.contrast;
        let mut out: Vec<(f64, f64)> = (1..c.len().saturating_sub(1))
            .filter(|&i| c[i] < c[i - 1] && c[i] <= c[i + 1])
            .map(|i| (self.detunings[i], c[i]))
            .collect();
        out.sort_by(|a, b| a.1.total_cmp(&b.1));
        out
    }
}

/// Symmetric sweep −half_range..=half_range in steps of `step` (rad/s).
pub fn detuning_grid(half_range: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(invalid("step", step, "a positive detuning step"));
    }
    if !(half_range >= 0.0) || !half_range.is_finite() {
        return Err(invalid("half_range", half_range, "a non-negative detuning range"));
    }
    let n = (half_range / step + 1e-9).floor() as i64;
    Ok((-n..=n).map(|k| k as f64 * step).collect())
}

/// One line of the stick spectrum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StickLine {
    /// rad/s
    pub position: f64,
    pub weight: f64,
    /// ⟨Sz⟩ of the near and far radical.
    pub m: (f64, f64),
}

const ZEEMAN_M: [(f64, f64); 4] = [(0.5, 0.5), (0.5, -0.5), (-0.5, 0.5), (-0.5, -0.5)];

/// Four |0⟩→|−1⟩ lines, one per Zeeman state, weighted by `cbar`. With
/// `lg_scaled` the shifts are divided by √3.
pub fn stick_spectrum(geom: &SensingGeometry, cbar: &Occupations, lg_scaled: bool) -> Result<Vec<StickLine>> {
    let w = cbar.as_array();
    if w.iter().any(|&x| x < -1e-9) || (cbar.sum() - 1.0).abs() > 1e-6 {
        return Err(invalid("cbar", format!("{w:?}"), "non-negative weights summing to 1"));
    }
    let (a1, a2) = geom.couplings(GFactorPair::default())?;
    let scale = if lg_scaled { 1.0 / 3f64.sqrt() } else { 1.0 };
    Ok(ZEEMAN_M
        .iter()
        .zip(w)
        .map(|(&(m1, m2), weight)| StickLine {
            position: scale * (a1.line_shift(m1) + a2.line_shift(m2)),
            weight,
            m: (m1, m2),
        })
        .collect())
}

fn nv_zero_population(rho: &CMatrix) -> f64 {
    (0..4).map(|i| rho[(i, i)].re).sum::<f64>().clamp(0.0, 1.0)
}

fn initial_rho(params: InitialStateParams) -> Result<CMatrix> {
    let pair = make_initial_state(params)?;
    let mut nv = CMatrix::zeros(2, 2);
    nv[(0, 0)] = c(1.0);
    Ok(kron(&nv, pair.rho()))
}

fn sweep_warnings(setup: &OdmrSetup, sweep: &[f64]) -> Vec<String> {
    let bandwidth = 2.0 * PI / setup.pulse_duration;
    let mut sorted = sweep.to_vec();
    sorted.sort_by(f64::total_cmp);
    let min_step = sorted.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let mut out = Vec::new();
    if min_step.is_finite() && min_step < bandwidth / 100.0 {
        out.push(format!(
            "sweep step {:.3} kHz is far below the pulse bandwidth {:.1} kHz",
            min_step / (2.0 * PI) / 1e3,
            bandwidth / (2.0 * PI) / 1e3
        ));
    }
    out
}

/// NV doublet + pair couplings and the pair's static terms, without the
/// microwave.
fn coupling_terms(setup: &OdmrSetup, reg: &SpinRegister) -> Result<CMatrix> {
    let (a1, a2) = setup.sensing.couplings(setup.g)?;
    Ok(a1.on_register(reg, 0, 1)? + a2.on_register(reg, 0, 2)?)
}

/// Rotating-frame simulation: every schedule segment is static, so each
/// distinct segment is exponentiated once per detuning.
pub fn simulate_odmr(params: InitialStateParams, setup: &OdmrSetup, sweep: &[f64]) -> Result<Spectrum> {
    if sweep.is_empty() {
        return Err(Error::Empty("detuning sweep"));
    }
    setup.validate()?;
    let reg = SpinRegister::nv_doublet_radical_pair();
    let rho0 = initial_rho(params)?;
    let pair_static = zeeman_rp_rotating(setup.bz, setup.g)?
        + dipolar_rp(&setup.pair, setup.g, DipolarMode::SecularPlusPseudosecular)?;
    let base = coupling_terms(setup, &reg)? + kron(&identity(2), &pair_static);
    let schedule = setup.schedule()?;
    let rabi = pi_rabi(setup.pulse_duration);

    let contrast: Vec<Result<f64>> = sweep
        .par_iter()
        .map(|&det| {
            let sched = schedule.overlay(Drive::Nv(NvDrive { rabi, detuning: det }));
            let mut reps: Vec<(usize, Propagator)> = Vec::new();
            let mut u = identity(8);
            for (i, seg) in sched.segments().iter().enumerate() {
                let k = match reps.iter().position(|(r, _)| sched.segments()[*r].same_drives(seg)) {
                    Some(k) => k,
                    None => {
                        reps.push((i, Propagator::new(&(&base + seg.extra_terms(&reg)?))?));
                        reps.len() - 1
                    }
                };
                u = reps[k].1.at(seg.duration) * u;
            }
            Ok(nv_zero_population(&(&u * &rho0 * u.adjoint())))
        })
        .collect();

    Ok(Spectrum {
        detunings: sweep.to_vec(),
        contrast: contrast.into_iter().collect::<Result<_>>()?,
        warnings: sweep_warnings(setup, sweep),
    })
}

/// Cross-check with the pair in the laboratory frame: full dipolar
/// coupling, Larmor precession and a circularly polarized rf field whose
/// phase follows the FSLG offset program, integrated by symmetric
/// splitting with step `dt`.
pub fn simulate_odmr_lab(params: InitialStateParams, setup: &OdmrSetup, sweep: &[f64], dt: f64) -> Result<Spectrum> {
    if sweep.is_empty() {
        return Err(Error::Empty("detuning sweep"));
    }
    setup.validate()?;
    if !(dt > 0.0) || dt > setup.pulse_duration {
        return Err(invalid("dt", dt, "a positive step no longer than the pulse"));
    }
    let reg = SpinRegister::nv_doublet_radical_pair();
    let rho0 = initial_rho(params)?;
    let pair_static = zeeman_rp(setup.bz, setup.g)? + dipolar_rp(&setup.pair, setup.g, DipolarMode::Full)?;
    let base = coupling_terms(setup, &reg)? + kron(&identity(2), &pair_static);
    let schedule = setup.schedule()?;
    let rabi = pi_rabi(setup.pulse_duration);
    let omega_ref = CONSTANTS.gamma_e() * setup.bz;

    // rf phase at the midpoint of every step
    let steps = (setup.pulse_duration / dt).round().max(1.0) as usize;
    let h = setup.pulse_duration / steps as f64;
    let mut drive: Vec<Option<(f64, f64)>> = Vec::with_capacity(steps);
    {
        let segs = schedule.segments();
        let mut j = 0;
        let mut seg_start = 0.0;
        let mut frame_start = 0.0;
        for k in 0..steps {
            let t = (k as f64 + 0.5) * h;
            while j + 1 < segs.len() && t >= seg_start + segs[j].duration {
                if let Some(Drive::Radical(rf)) = segs[j].drives.first() {
                    frame_start -= rf.offset * segs[j].duration;
                }
                seg_start += segs[j].duration;
                j += 1;
            }
            drive.push(match segs[j].drives.first() {
                Some(Drive::Radical(rf)) => {
                    let phi = omega_ref * t + frame_start - rf.offset * (t - seg_start) + rf.phase;
                    Some((rf.amplitude, phi))
                }
                _ => None,
            });
        }
    }

    let contrast: Vec<Result<f64>> = sweep
        .par_iter()
        .map(|&det| {
            let nv = Drive::Nv(NvDrive { rabi, detuning: det }).hamiltonian(&reg)?;
            let prop = Propagator::new(&(&base + nv))?;
            let full = prop.at(h);
            let half = prop.at(h / 2.0);
            let mut u = half.clone();
            for (k, d) in drive.iter().enumerate() {
                if let Some((w1, phi)) = *d {
                    u = pair_rotation_step(w1 * h, phi) * u;
                }
                u = if k + 1 == steps { &half * u } else { &full * u };
            }
            Ok(nv_zero_population(&(&u * &rho0 * u.adjoint())))
        })
        .collect();

    Ok(Spectrum {
        detunings: sweep.to_vec(),
        contrast: contrast.into_iter().collect::<Result<_>>()?,
        warnings: sweep_warnings(setup, sweep),
    })
}

/// exp(−iθ(cos φ Sx + sin φ Sy)) on both radicals, identity on the NV.
fn pair_rotation_step(theta: f64, phi: f64) -> CMatrix {
    let (s, co) = (theta / 2.0).sin_cos();
    let off = |sign: f64| -I * s * Complex64::from_polar(1.0, sign * phi);
    let r = CMatrix::from_row_slice(2, 2, &[c(co), off(-1.0), off(1.0), c(co)]);
    kron(&identity(2), &kron(&r, &r))
}

/// Isolated NV under the π pulse.
pub fn simulate_bare_nv(pulse_duration: f64, sweep: &[f64]) -> Result<Spectrum> {
    if sweep.is_empty() {
        return Err(Error::Empty("detuning sweep"));
    }
    if !(pulse_duration > 0.0) {
        return Err(invalid("pulse_duration", pulse_duration, "a positive time in seconds"));
    }
    let reg = SpinRegister::new(vec![crate::spinmath::Site {
        label: crate::spinmath::NV.into(),
        spin: crate::spinmath::Spin::Half,
    }])?;
    let rabi = pi_rabi(pulse_duration);
    let contrast = sweep
        .iter()
        .map(|&det| {
            let h = Drive::Nv(NvDrive { rabi, detuning: det }).hamiltonian(&reg)?;
            let u = Propagator::new(&h)?.at(pulse_duration);
            Ok(u[(0, 0)].norm_sqr())
        })
        .collect::<Result<_>>()?;
    Ok(Spectrum {
        detunings: sweep.to_vec(),
        contrast,
        warnings: Vec::new(),
    })
}

fn check_symmetric(detunings: &[f64]) -> Result<f64> {
    let lo = detunings.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = detunings.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = lo.abs().max(hi.abs());
    if !(span > 0.0) || (lo + hi).abs() > 1e-6 * span {
        return Err(invalid(
            "detunings",
            format!("[{lo}, {hi}]"),
            "a sweep symmetric about zero",
        ));
    }
    Ok(span)
}

/// Centroid of the dip, Σδ(1−c) / (Σ(1−c)·max|δ|). Positive when the
/// absorption sits at positive detuning.
pub fn spectrum_asymmetry(spec: &Spectrum) -> Result<f64> {
    if spec.detunings.is_empty() {
        return Err(Error::Empty("spectrum"));
    }
    let span = check_symmetric(&spec.detunings)?;
    let (mut num, mut den) = (0.0, 0.0);
    for (d, c) in spec.detunings.iter().zip(&spec.contrast) {
        num += d * (1.0 - c);
        den += 1.0 - c;
    }
    Ok(if den > 0.0 { num / den / span } else { 0.0 })
}

/// Largest |a(δ) − b(−δ)| for two spectra on the same symmetric grid.
pub fn mirror_deviation(a: &Spectrum, b: &Spectrum) -> Result<f64> {
    if a.detunings.len() != b.detunings.len() {
        return Err(Error::DimensionMismatch {
            expected: a.detunings.len(),
            found: b.detunings.len(),
        });
    }
    check_symmetric(&a.detunings)?;
    let n = a.detunings.len();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let j = n - 1 - i;
        if (a.detunings[i] + b.detunings[j]).abs() > 1e-6 * a.detunings[i].abs().max(1.0) {
            return Err(invalid("detunings", "grids differ", "identical symmetric grids"));
        }
        worst = worst.max((a.contrast[i] - b.contrast[j]).abs());
    }
    Ok(worst)
}

/// Writes `detuning_kHz,contrast`.
pub fn write_spectrum_table<W: Write>(w: &mut W, spec: &Spectrum) -> io::Result<()> {
    writeln!(w, "detuning_kHz,contrast")?;
    for (d, c) in spec.detunings.iter().zip(&spec.contrast) {
        writeln!(w, "{:.4},{:.10}", d / (2.0 * PI) / 1e3, c)?;
    }
    Ok(())
}

/// Writes `position_kHz,weight,m1,m2`.
pub fn write_stick_table<W: Write>(w: &mut W, lines: &[StickLine]) -> io::Result<()> {
    writeln!(w, "position_kHz,weight,m1,m2")?;
    for l in lines {
        writeln!(
            w,
            "{:.4},{:.10},{},{}",
            l.position / (2.0 * PI) / 1e3,
            l.weight,
            l.m.0,
            l.m.1
        )?;
    }
    Ok(())
}
