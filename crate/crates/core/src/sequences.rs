//! Piecewise-constant drive programs: Lee–Goldburg parameters, frequency
//! switched LG on the radical pair and NV microwave pulses.

use std::f64::consts::PI;
use std::fmt::{self, Write as _};

use crate::error::{invalid, Error, Result};
use crate::spinmath::{c, embed, spin_operators, CMatrix, Spin, SpinRegister, NV, RADICAL_1, RADICAL_2};

/// Resonant rf field on both radical spins in their rotating frame:
/// ω1(cos φ Sx + sin φ Sy) + ω_off Sz.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RfDrive {
    /// rad/s
    pub amplitude: f64,
    /// rad/s
    pub offset: f64,
    /// rad
    pub phase: f64,
}

/// Microwave drive of the NV |0⟩↔|−1⟩ transition in its rotating frame:
/// −δ P₋₁ + (Ω/2)(|0⟩⟨−1| + h.c.).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NvDrive {
    /// Ω in rad/s
    pub rabi: f64,
    /// δ = ω_mw − ω₀ in rad/s
    pub detuning: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Drive {
    Radical(RfDrive),
    Nv(NvDrive),
}

impl RfDrive {
    /// Effective field direction in the rotating frame.
    pub fn axis(&self) -> [f64; 3] {
        let n = self.amplitude.hypot(self.offset);
        [
            self.amplitude * self.phase.cos() / n,
            self.amplitude * self.phase.sin() / n,
            self.offset / n,
        ]
    }

    fn single_spin(&self) -> CMatrix {
        let o = spin_operators(Spin::Half);
        let (s, co) = self.phase.sin_cos();
        o.sx.map(|z| z * (self.amplitude * co)) + o.sy.map(|z| z * (self.amplitude * s)) + o.sz.map(|z| z * self.offset)
    }
}

impl Drive {
    /// The drive placed on a register. Radical drives act on every radical
    /// site present; NV drives act on the NV site (spin-1 or doublet).
    pub fn hamiltonian(&self, reg: &SpinRegister) -> Result<CMatrix> {
        let n = reg.dim();
        match self {
            Drive::Radical(rf) => {
                let h1 = rf.single_spin();
                let mut h = CMatrix::zeros(n, n);
                let mut found = false;
                for label in [RADICAL_1, RADICAL_2] {
                    if let Some(i) = reg.index_of(label) {
                        h += embed(&h1, i, reg)?;
                        found = true;
                    }
                }
                if !found {
                    return Err(invalid("register", "no radical sites", "a register holding rp1 or rp2"));
                }
                Ok(h)
            }
            Drive::Nv(d) => {
                let i = reg
                    .index_of(NV)
                    .ok_or_else(|| invalid("register", "no NV site", "a register holding the NV"))?;
                // level indices of |0⟩ and |−1⟩ on the site
                let (dim, zero, minus) = match reg.sites()[i].spin {
                    Spin::One => (3, 1, 2),
                    Spin::Half => (2, 0, 1),
                };
                let mut h = CMatrix::zeros(dim, dim);
                h[(minus, minus)] = c(-d.detuning);
                h[(zero, minus)] = c(d.rabi / 2.0);
                h[(minus, zero)] = c(d.rabi / 2.0);
                embed(&h, i, reg)
            }
        }
    }
}

/// Time interval with constant drives.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub label: String,
    pub duration: f64,
    pub drives: Vec<Drive>,
    /// Set on a truncated trailing segment.
    pub partial: bool,
}

impl Segment {
    pub fn new(label: impl Into<String>, duration: f64, drives: Vec<Drive>) -> Result<Self> {
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(invalid("duration", duration, "a positive time in seconds"));
        }
        Ok(Self {
            label: label.into(),
            duration,
            drives,
            partial: false,
        })
    }

    /// Sum of the drive terms on `reg`.
    pub fn extra_terms(&self, reg: &SpinRegister) -> Result<CMatrix> {
        let n = reg.dim();
        self.drives
            .iter()
            .try_fold(CMatrix::zeros(n, n), |acc, d| Ok(acc + d.hamiltonian(reg)?))
    }

    /// Whether two segments carry identical drives.
    pub fn same_drives(&self, other: &Segment) -> bool {
        self.drives == other.drives
    }

    /// Direction of the radical-pair effective field, if driven.
    pub fn effective_axis(&self) -> Option<[f64; 3]> {
        self.drives.iter().find_map(|d| match d {
            Drive::Radical(rf) => Some(rf.axis()),
            Drive::Nv(_) => None,
        })
    }
}

/// Ordered segments plus the period to which averaging windows snap.
#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    segments: Vec<Segment>,
    period: Option<f64>,
    warnings: Vec<String>,
}

impl Schedule {
    pub fn new(segments: Vec<Segment>, period: Option<f64>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::Empty("schedule segments"));
        }
        if let Some(p) = period {
            if !(p > 0.0) {
                return Err(invalid("period", p, "a positive time in seconds"));
            }
        }
        Ok(Self {
            segments,
            period,
            warnings: Vec::new(),
        })
    }

    /// Undriven evolution.
    pub fn free(total: f64) -> Result<Self> {
        Self::new(vec![Segment::new("free", total, Vec::new())?], None)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    pub fn period(&self) -> Option<f64> {
        self.period
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Longest stretch that is a whole number of periods, or the full
    /// duration when there is no period.
    pub fn averaging_window(&self) -> f64 {
        let total = self.total_duration();
        match self.period {
            Some(p) => {
                let n = (total / p + 1e-9).floor();
                if n >= 1.0 {
                    n * p
                } else {
                    total
                }
            }
            None => total,
        }
    }

    /// Adds `drive` to every segment.
    pub fn overlay(&self, drive: Drive) -> Schedule {
        let mut out = self.clone();
        for s in &mut out.segments {
            s.drives.push(drive);
        }
        out
    }

    /// Human-readable segment list.
    pub fn describe(&self) -> String {
        let mut out = String::from("# label\tduration_ns\tdrive\tamplitude_MHz\toffset_MHz\tphase_rad\n");
        let mhz = |w: f64| w / (2.0 * PI) / 1e6;
        for s in &self.segments {
            let tag = if s.partial { "*" } else { "" };
            if s.drives.is_empty() {
                let _ = writeln!(out, "{}{}\t{:.6}\tnone\t0\t0\t0", s.label, tag, s.duration * 1e9);
            }
            for d in &s.drives {
                let _ = match d {
                    Drive::Radical(rf) => writeln!(
                        out,
                        "{}{}\t{:.6}\trf\t{:.6}\t{:.6}\t{:.6}",
                        s.label,
                        tag,
                        s.duration * 1e9,
                        mhz(rf.amplitude),
                        mhz(rf.offset),
                        rf.phase
                    ),
                    Drive::Nv(nv) => writeln!(
                        out,
                        "{}{}\t{:.6}\tmw\t{:.6}\t{:.6}\t0",
                        s.label,
                        tag,
                        s.duration * 1e9,
                        mhz(nv.rabi),
                        mhz(-nv.detuning)
                    ),
                };
            }
        }
        out
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

/// Lee–Goldburg condition for a given rf amplitude.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LgParams {
    pub omega1: f64,
    pub omega_off: f64,
    pub omega_eff: f64,
    /// Effective field direction of the first (phase 0) segment.
    pub a_lg: [f64; 3],
}

impl LgParams {
    /// One full rotation about the effective field, 2π/ω_eff.
    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega_eff
    }

    pub fn theta(&self) -> f64 {
        self.omega1.atan2(self.omega_off)
    }
}

/// ω_off = ω1/√2, so the effective field sits at the magic angle.
pub fn lg_params(omega1: f64) -> Result<LgParams> {
    if !(omega1 > 0.0) || !omega1.is_finite() {
        return Err(invalid("omega1", omega1, "a positive amplitude in rad/s"));
    }
    let omega_off = omega1 / 2f64.sqrt();
    let omega_eff = omega1.hypot(omega_off);
    Ok(LgParams {
        omega1,
        omega_off,
        omega_eff,
        a_lg: [omega1 / omega_eff, 0.0, omega_off / omega_eff],
    })
}

/// Alternating LG segments of one period each; the second of every pair
/// has the offset reversed and the phase shifted by π. A zero amplitude
/// gives free evolution.
pub fn fslg_schedule(omega1: f64, total: f64) -> Result<Schedule> {
    lg_program(omega1, total, true)
}

/// Continuous LG irradiation about a fixed axis.
pub fn lg_schedule(omega1: f64, total: f64) -> Result<Schedule> {
    lg_program(omega1, total, false)
}

fn lg_program(omega1: f64, total: f64, switched: bool) -> Result<Schedule> {
    if !(total > 0.0) || !total.is_finite() {
        return Err(invalid("total", total, "a positive time in seconds"));
    }
    if omega1 == 0.0 {
        return Schedule::free(total);
    }
    let lg = lg_params(omega1)?;
    let tau = lg.period();
    let plus = Drive::Radical(RfDrive {
        amplitude: lg.omega1,
        offset: lg.omega_off,
        phase: 0.0,
    });
    let minus = Drive::Radical(RfDrive {
        amplitude: lg.omega1,
        offset: -lg.omega_off,
        phase: PI,
    });

    if !switched {
        let mut s = Schedule::new(vec![Segment::new("lg", total, vec![plus])?], Some(tau))?;
        if total < tau {
            s.warnings.push("duration shorter than one LG period".into());
        }
        return Ok(s);
    }

    let full = (total / tau + 1e-9).floor() as usize;
    let mut segments = Vec::with_capacity(full + 1);
    for k in 0..full {
        let (label, drive) = if k % 2 == 0 { ("lg+", plus) } else { ("lg-", minus) };
        segments.push(Segment::new(label, tau, vec![drive])?);
    }
    let rest = total - full as f64 * tau;
    let mut warnings = Vec::new();
    if rest > 1e-9 * tau {
        let (label, drive) = if full.is_multiple_of(2) {
            ("lg+", plus)
        } else {
            ("lg-", minus)
        };
        let mut seg = Segment::new(label, rest, vec![drive])?;
        seg.partial = true;
        segments.push(seg);
        if full == 0 {
            warnings.push("duration shorter than one LG period; single partial segment".into());
        }
    }
    let mut s = Schedule::new(segments, Some(tau))?;
    s.warnings = warnings;
    Ok(s)
}

/// Rabi frequency for a π rotation in `duration`.
pub fn pi_rabi(duration: f64) -> f64 {
    PI / duration
}

/// Single rectangular π pulse on the NV at the given detuning.
pub fn pi_pulse(duration: f64, detuning: f64) -> Result<Schedule> {
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(invalid("duration", duration, "a positive time in seconds"));
    }
    let drive = Drive::Nv(NvDrive {
        rabi: pi_rabi(duration),
        detuning,
    });
    Schedule::new(vec![Segment::new("pi", duration, vec![drive])?], None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spinmath::{expm_hermitian, field_vector, max_abs_diff, unitarity_error, Site};
    use crate::states::{make_initial_state, InitialStateParams};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const MHZ: f64 = 2.0 * PI * 1e6;

    #[test]
    fn lg_examples() {
        let lg = lg_params(50.0 * MHZ).unwrap();
        assert_abs_diff_eq!(lg.omega_off / MHZ, 35.355, epsilon = 1e-3);
        assert_abs_diff_eq!(lg.omega_eff / MHZ, 61.237, epsilon = 1e-3);
        assert_abs_diff_eq!(lg.a_lg[2], 1.0 / 3f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(lg.theta().to_degrees(), 54.7356, epsilon = 1e-4);
        assert!(lg_params(0.0).is_err());
        assert!(lg_params(-1.0).is_err());
    }

    #[test]
    fn fslg_examples() {
        let s = fslg_schedule(50.0 * MHZ, 1e-6).unwrap();
        let tau = s.segments()[0].duration;
        assert_abs_diff_eq!(tau * 1e9, 16.330, epsilon = 1e-3);
        let full = s.segments().iter().filter(|g| !g.partial).count();
        assert_eq!(full, 61);
        assert!(s.segments().last().unwrap().partial);
        assert_abs_diff_eq!(s.total_duration(), 1e-6, epsilon = 1e-18);
        assert_abs_diff_eq!(s.averaging_window(), 61.0 * tau, epsilon = 1e-18);

        let free = fslg_schedule(0.0, 1e-6).unwrap();
        assert_eq!(free.segments().len(), 1);
        assert!(free.segments()[0].drives.is_empty());
        assert!(fslg_schedule(50.0 * MHZ, 0.0).is_err());

        let short = fslg_schedule(50.0 * MHZ, 5e-9).unwrap();
        assert!(!short.warnings().is_empty());
    }

    #[test]
    fn fslg_alternates_offset_and_phase() {
        let s = fslg_schedule(50.0 * MHZ, 100e-9).unwrap();
        for (k, seg) in s.segments().iter().enumerate() {
            let Drive::Radical(rf) = seg.drives[0] else { panic!() };
            if k % 2 == 0 {
                assert!(rf.offset > 0.0 && rf.phase == 0.0);
            } else {
                assert!(rf.offset < 0.0 && rf.phase == PI);
            }
        }
    }

    #[test]
    fn effective_axis_from_matrix() {
        let lg = lg_params(50.0 * MHZ).unwrap();
        let reg = SpinRegister::new(vec![Site {
            label: RADICAL_1.into(),
            spin: Spin::Half,
        }])
        .unwrap();
        let s = fslg_schedule(lg.omega1, 40e-9).unwrap();
        for (k, seg) in s.segments().iter().take(2).enumerate() {
            let v = field_vector(&seg.extra_terms(&reg).unwrap()).unwrap();
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            let sign = if k == 0 { 1.0 } else { -1.0 };
            for (vi, ai) in v.iter().zip(lg.a_lg) {
                assert_abs_diff_eq!(vi / n, sign * ai, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn fslg_pair_leaves_singlet_invariant() {
        let reg = SpinRegister::radical_pair();
        let s = fslg_schedule(50.0 * MHZ, 40e-9).unwrap();
        let seg = &s.segments()[..2];
        let u0 = expm_hermitian(&seg[0].extra_terms(&reg).unwrap(), seg[0].duration).unwrap();
        let u1 = expm_hermitian(&seg[1].extra_terms(&reg).unwrap(), seg[1].duration).unwrap();
        let u = u1 * u0;
        assert!(unitarity_error(&u) < 1e-12);
        let rho = make_initial_state(InitialStateParams::singlet()).unwrap();
        let out = &u * rho.rho() * u.adjoint();
        assert!(max_abs_diff(&out, rho.rho()) < 1e-6);
    }

    #[test]
    fn pi_pulse_examples() {
        let s = pi_pulse(4e-6, 0.0).unwrap();
        let Drive::Nv(d) = s.segments()[0].drives[0] else {
            panic!()
        };
        assert_abs_diff_eq!(d.rabi / (2.0 * PI) / 1e3, 125.0, epsilon = 1e-9);

        let reg = SpinRegister::new(vec![Site {
            label: NV.into(),
            spin: Spin::Half,
        }])
        .unwrap();
        let pop = |det: f64| {
            let s = pi_pulse(4e-6, det).unwrap();
            let u = expm_hermitian(&s.segments()[0].extra_terms(&reg).unwrap(), 4e-6).unwrap();
            u[(1, 0)].norm_sqr()
        };
        assert!(1.0 - pop(0.0) < 1e-6);
        assert!(pop(20.0 * MHZ) < 1e-3);
    }

    #[test]
    fn pi_pulse_on_spin_one_nv() {
        let reg = SpinRegister::new(vec![Site {
            label: NV.into(),
            spin: Spin::One,
        }])
        .unwrap();
        let s = pi_pulse(4e-6, 0.0).unwrap();
        let u = expm_hermitian(&s.segments()[0].extra_terms(&reg).unwrap(), 4e-6).unwrap();
        assert!(1.0 - u[(2, 1)].norm_sqr() < 1e-6);
        assert!(u[(0, 1)].norm() < 1e-12);
    }

    #[test]
    fn describe_lists_segments() {
        let text = fslg_schedule(50.0 * MHZ, 40e-9).unwrap().describe();
        assert_eq!(text.lines().count(), 1 + 3);
        assert!(text.contains("lg+*") || text.contains("lg-*"));
        assert!(text.contains("\t3.14159"));
    }

    proptest! {
        #[test]
        fn lg_axis_at_magic_angle(w in 1e3f64..1e10) {
            let lg = lg_params(w).unwrap();
            prop_assert!((lg.a_lg[2] - 1.0 / 3f64.sqrt()).abs() < 1e-12);
            prop_assert!((lg.omega_eff - w * 1.5f64.sqrt()).abs() < 1e-12 * w);
        }

        #[test]
        fn schedule_durations_sum(w_mhz in 1.0f64..200.0, total_ns in 1.0f64..3000.0) {
            let s = fslg_schedule(w_mhz * MHZ, total_ns * 1e-9).unwrap();
            prop_assert!((s.total_duration() - total_ns * 1e-9).abs() < 1e-9 * total_ns * 1e-9);
            prop_assert!(s.averaging_window() <= s.total_duration() * (1.0 + 1e-12));
        }
    }
}
