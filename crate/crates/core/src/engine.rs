//! Density-matrix propagation under piecewise-constant schedules,
//! time-averaged observables and decoupling sweeps.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::hamiltonians::{dipolar_rp, zeeman_rp_rotating, DipolarMode, GFactorPair, RadicalPairGeometry};
use crate::sequences::{fslg_schedule, lg_params, lg_schedule, LgParams, Schedule};
use crate::spinmath::{identity, unitarity_error, CMatrix, Propagator};
use crate::states::{Basis, Occupations, SpinState, StateDefects};

/// Tolerance on trace, Hermiticity, positivity and unitarity along a run.
pub const PHYSICAL_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug)]
pub struct PropagateOptions {
    /// Sampling step, seconds.
    pub dt: f64,
    /// Keep every n-th density matrix; `None` keeps only the final state.
    pub store_stride: Option<usize>,
    /// Run the eigenvalue-based physicality check every n-th sample.
    pub check_stride: usize,
}

impl PropagateOptions {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            store_stride: Some(1),
            check_stride: 50,
        }
    }

    pub fn observables_only(dt: f64) -> Self {
        Self {
            store_stride: None,
            ..Self::new(dt)
        }
    }
}

/// Worst deviations met along a trajectory.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Diagnostics {
    pub state: StateDefects,
    pub unitarity: f64,
}

/// Pair observables at every sample plus stored density matrices.
#[derive(Clone, Debug)]
pub struct Trajectory {
    times: Vec<f64>,
    occupations: Vec<Occupations>,
    state_times: Vec<f64>,
    states: Vec<SpinState>,
    final_state: SpinState,
    dt: f64,
    window: f64,
    diagnostics: Diagnostics,
}

impl Trajectory {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn occupations(&self) -> &[Occupations] {
        &self.occupations
    }

    pub fn polarization(&self) -> Vec<f64> {
        self.occupations.iter().map(Occupations::polarization).collect()
    }

    /// Stored states and their times.
    pub fn states(&self) -> impl Iterator<Item = (f64, &SpinState)> {
        self.state_times.iter().copied().zip(self.states.iter())
    }

    pub fn final_state(&self) -> &SpinState {
        &self.final_state
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Averaging window, snapped to whole periods of the schedule.
    pub fn window(&self) -> f64 {
        self.window
    }

    pub fn diagnostics(&self) -> Diagnostics {
        self.diagnostics
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Samples at times before the end of the averaging window.
    fn window_samples(&self) -> Result<&[Occupations]> {
        if self.occupations.is_empty() {
            return Err(Error::Empty("trajectory"));
        }
        let tol = 1e-9 * self.dt;
        let count = self.times.iter().take_while(|&&t| t < self.window - tol).count().max(1);
        Ok(&self.occupations[..count])
    }
}

pub fn propagate(rho0: &SpinState, static_terms: &[CMatrix], schedule: &Schedule, dt: f64) -> Result<Trajectory> {
    propagate_with(rho0, static_terms, schedule, PropagateOptions::new(dt))
}

struct Kind {
    propagator: Propagator,
    step: Option<CMatrix>,
}

/// Samples ρ(t) every `dt`; a step crossing a segment boundary is split
/// into exact sub-propagators, and full steps inside a segment reuse one
/// cached propagator per distinct segment.
pub fn propagate_with(
    rho0: &SpinState,
    static_terms: &[CMatrix],
    schedule: &Schedule,
    opts: PropagateOptions,
) -> Result<Trajectory> {
    let dt = opts.dt;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(invalid("dt", dt, "a positive time step in seconds"));
    }
    let reg = rho0.register().clone();
    let n = reg.dim();
    let start = rho0.defects();
    if !start.within(PHYSICAL_TOL) {
        return Err(Error::NonPhysical(format!("initial state: {start:?}")));
    }
    let rho0 = rho0.to_basis(Basis::Zeeman)?;

    let mut h_static = CMatrix::zeros(n, n);
    for h in static_terms {
        if h.shape() != (n, n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: h.nrows(),
            });
        }
        h_static += h;
    }

    let segments = schedule.segments();
    if let Some(short) = segments
        .iter()
        .filter(|s| !s.partial)
        .find(|s| dt > s.duration * (1.0 + 1e-9))
    {
        return Err(Error::StepTooLarge {
            dt,
            label: short.label.clone(),
            duration: short.duration,
        });
    }

    let mut kinds: Vec<Kind> = Vec::new();
    let mut kind_of = Vec::with_capacity(segments.len());
    let mut representative: Vec<usize> = Vec::new();
    for (i, seg) in segments.iter().enumerate() {
        if let Some(k) = representative.iter().position(|&r| segments[r].same_drives(seg)) {
            kind_of.push(k);
        } else {
            let h = &h_static + seg.extra_terms(&reg)?;
            kinds.push(Kind {
                propagator: Propagator::new(&h)?,
                step: None,
            });
            representative.push(i);
            kind_of.push(kinds.len() - 1);
        }
    }

    let mut bounds = Vec::with_capacity(segments.len());
    let mut acc = 0.0;
    for s in segments {
        acc += s.duration;
        bounds.push(acc);
    }
    let total = acc;
    let steps = ((total / dt) - 1e-9).ceil().max(1.0) as usize;
    let eps = 1e-9 * dt;

    let pair_direct = n == 4 && reg.len() == 2;
    let observe = |rho: &CMatrix| -> Result<Occupations> {
        if pair_direct {
            Ok(Occupations::from_pair_rho(rho))
        } else {
            let s = SpinState::new_unchecked(rho.clone(), Basis::Zeeman, reg.clone())?;
            Ok(Occupations::from_pair_rho(s.pair_state()?.rho()))
        }
    };

    let mut diag = Diagnostics {
        state: start,
        unitarity: 0.0,
    };
    let mut rho = rho0.rho().clone();
    let mut times = Vec::with_capacity(steps + 1);
    let mut occ = Vec::with_capacity(steps + 1);
    let mut state_times = Vec::new();
    let mut states = Vec::new();

    let mut record = |k: usize, t: f64, rho: &CMatrix, diag: &mut Diagnostics| -> Result<()> {
        times.push(t);
        occ.push(observe(rho)?);
        if k.is_multiple_of(opts.check_stride.max(1)) || k == steps {
            let d = StateDefects::of(rho);
            diag.state = diag.state.merge(&d);
            if !d.within(PHYSICAL_TOL) {
                return Err(Error::NonPhysical(format!("at t = {t:e} s: {d:?}")));
            }
        }
        if let Some(stride) = opts.store_stride {
            if k.is_multiple_of(stride.max(1)) {
                state_times.push(t);
                states.push(SpinState::new_unchecked(rho.clone(), Basis::Zeeman, reg.clone())?);
            }
        }
        Ok(())
    };

    record(0, 0.0, &rho, &mut diag)?;
    let mut j = 0;
    for k in 0..steps {
        let t0 = k as f64 * dt;
        let t1 = ((k + 1) as f64 * dt).min(total);
        let mut u: Option<CMatrix> = None;
        let mut t = t0;
        while t1 - t > eps && j < segments.len() {
            if bounds[j] <= t + eps {
                j += 1;
                continue;
            }
            let stop = bounds[j].min(t1);
            let h = stop - t;
            let kind = &mut kinds[kind_of[j]];
            let piece = if (h - dt).abs() <= eps {
                if kind.step.is_none() {
                    let p = kind.propagator.at(dt);
                    diag.unitarity = diag.unitarity.max(unitarity_error(&p));
                    kind.step = Some(p);
                }
                kind.step.clone().expect("cached step")
            } else {
                let p = kind.propagator.at(h);
                diag.unitarity = diag.unitarity.max(unitarity_error(&p));
                p
            };
            u = Some(match u {
                Some(prev) => piece * prev,
                None => piece,
            });
            t = stop;
        }
        let u = u.unwrap_or_else(|| identity(n));
        rho = &u * &rho * u.adjoint();
        record(k + 1, t1, &rho, &mut diag)?;
    }
    if diag.unitarity > PHYSICAL_TOL {
        return Err(Error::NonPhysical(format!(
            "propagator unitarity error {:e}",
            diag.unitarity
        )));
    }

    let final_state = SpinState::new_unchecked(rho, Basis::Zeeman, reg.clone())?;
    Ok(Trajectory {
        times,
        occupations: occ,
        state_times,
        states,
        final_state,
        dt,
        window: schedule.averaging_window(),
        diagnostics: diag,
    })
}

/// Mean polarization over the averaging window.
pub fn time_averaged_polarization(traj: &Trajectory) -> Result<f64> {
    let s = traj.window_samples()?;
    Ok(s.iter().map(Occupations::polarization).sum::<f64>() / s.len() as f64)
}

/// Mean Zeeman occupations over the averaging window.
pub fn time_averaged_occupations(traj: &Trajectory) -> Result<Occupations> {
    let s = traj.window_samples()?;
    let mut acc = [0.0; 4];
    for o in s {
        for (a, v) in acc.iter_mut().zip(o.as_array()) {
            *a += v;
        }
    }
    Ok(Occupations::from_array(acc.map(|a| a / s.len() as f64)))
}

/// (1/√3)(a_RP·a_LG)·p_CISS, the polarization surviving LG averaging.
pub fn analytic_pbar(a_rp: [f64; 3], lg: &LgParams, p_ciss: f64) -> f64 {
    let dot: f64 = a_rp.iter().zip(lg.a_lg.iter()).map(|(a, b)| a * b).sum();
    lg.a_lg[2] * dot * p_ciss
}

/// The radical pair in its rotating frame: g-factor offsets plus dipolar
/// coupling.
#[derive(Clone, Copy, Debug)]
pub struct PairSystem {
    pub geometry: RadicalPairGeometry,
    pub g: GFactorPair,
    /// tesla
    pub bz: f64,
    pub mode: DipolarMode,
}

impl PairSystem {
    pub fn new(geometry: RadicalPairGeometry) -> Self {
        Self {
            geometry,
            g: GFactorPair::default(),
            bz: 0.04,
            mode: DipolarMode::SecularPlusPseudosecular,
        }
    }

    pub fn static_terms(&self) -> Result<Vec<CMatrix>> {
        Ok(vec![
            zeeman_rp_rotating(self.bz, self.g)?,
            dipolar_rp(&self.geometry, self.g, self.mode)?,
        ])
    }
}

/// Decoupling program applied to the pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decoupling {
    /// Frequency-switched LG.
    Fslg,
    /// LG about a fixed axis.
    Lg,
    Off,
}

impl Decoupling {
    pub fn schedule(self, omega1: f64, total: f64) -> Result<Schedule> {
        match self {
            Decoupling::Fslg => fslg_schedule(omega1, total),
            Decoupling::Lg => lg_schedule(omega1, total),
            Decoupling::Off => Schedule::free(total),
        }
    }
}

/// Time-averaged observables per drive amplitude.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepResult {
    /// ω1 in rad/s.
    pub parameters: Vec<f64>,
    pub pbar: Vec<f64>,
    pub cbar: Vec<Occupations>,
}

impl SweepResult {
    pub fn len(&self) -> usize {
        self.parameters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parameters.is_empty()
    }
}

/// Evolves `rho0` for every amplitude in `omega1_list` (concurrently) and
/// collects p̄ and c̄ in input order.
pub fn decoupling_sweep(
    rho0: &SpinState,
    system: &PairSystem,
    decoupling: Decoupling,
    omega1_list: &[f64],
    total: f64,
    dt: f64,
) -> Result<SweepResult> {
    if omega1_list.is_empty() {
        return Err(Error::Empty("omega1 list"));
    }
    for &w in omega1_list {
        if w != 0.0 {
            lg_params(w)?;
        }
    }
    let terms = system.static_terms()?;
    let rows: Vec<Result<(f64, Occupations)>> = omega1_list
        .par_iter()
        .map(|&w| {
            let schedule = decoupling.schedule(w, total)?;
            let traj = propagate_with(rho0, &terms, &schedule, PropagateOptions::observables_only(dt))?;
            Ok((time_averaged_polarization(&traj)?, time_averaged_occupations(&traj)?))
        })
        .collect();
    let mut out = SweepResult::default();
    for (w, row) in omega1_list.iter().zip(rows) {
        let (p, c) = row?;
        out.parameters.push(*w);
        out.pbar.push(p);
        out.cbar.push(c);
    }
    Ok(out)
}

/// Writes `time_ns,c_Tp,c_PR,c_PS,c_Tm,p`, keeping every `stride`-th sample.
pub fn write_trajectory_table<W: Write>(w: &mut W, traj: &Trajectory, stride: usize) -> io::Result<()> {
    writeln!(w, "time_ns,c_Tp,c_PR,c_PS,c_Tm,p")?;
    let last = traj.len().saturating_sub(1);
    for (i, (t, o)) in traj.times().iter().zip(traj.occupations()).enumerate() {
        if i % stride.max(1) == 0 || i == last {
            write_row(w, &format!("{:.4}", t * 1e9), o)?;
        }
    }
    Ok(())
}

/// Writes `omega1_MHz,c_Tp,c_PR,c_PS,c_Tm,p` with time-averaged values.
pub fn write_sweep_table<W: Write>(w: &mut W, sweep: &SweepResult) -> io::Result<()> {
    writeln!(w, "omega1_MHz,c_Tp,c_PR,c_PS,c_Tm,p")?;
    for (p, c) in sweep.parameters.iter().zip(&sweep.cbar) {
        write_row(w, &format!("{:.6}", p / (2.0 * std::f64::consts::PI) / 1e6), c)?;
    }
    Ok(())
}

fn write_row<W: Write>(w: &mut W, lead: &str, o: &Occupations) -> io::Result<()> {
    writeln!(
        w,
        "{lead},{:.10},{:.10},{:.10},{:.10},{:.10}",
        o.t_plus,
        o.p_r,
        o.p_s,
        o.t_minus,
        o.polarization()
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::dipolar_constant;
    use crate::spinmath::max_abs_diff;
    use crate::states::{make_initial_state, InitialStateParams};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    const NM: f64 = 1e-9;
    const MHZ: f64 = 2.0 * PI * 1e6;

    fn pair(mode: DipolarMode) -> PairSystem {
        PairSystem {
            mode,
            ..PairSystem::new(RadicalPairGeometry::along_field(2.0 * NM).unwrap())
        }
    }

    fn p_r() -> SpinState {
        make_initial_state(InitialStateParams::p_r()).unwrap()
    }

    #[test]
    fn zero_hamiltonian_keeps_state() {
        let rho = make_initial_state(InitialStateParams::new(0.3, 0.4, 0.7).unwrap()).unwrap();
        let sched = Schedule::free(10e-9).unwrap();
        let traj = propagate(&rho, &[], &sched, 1e-9).unwrap();
        assert_eq!(traj.len(), 11);
        for (_, s) in traj.states() {
            assert!(max_abs_diff(s.rho(), rho.rho()) < 1e-15);
        }
    }

    #[test]
    fn secular_coupling_keeps_p_r() {
        let sys = pair(DipolarMode::SecularOnly);
        let sched = Schedule::free(200e-9).unwrap();
        let traj = propagate(&p_r(), &sys.static_terms().unwrap(), &sched, 0.5e-9).unwrap();
        for o in traj.occupations() {
            assert_abs_diff_eq!(o.p_r, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn flip_flop_frequency_matches_gap() {
        let sys = pair(DipolarMode::SecularPlusPseudosecular);
        let d = dipolar_constant(&sys.geometry, sys.g);
        let dt = 0.5e-9;
        let traj = propagate(&p_r(), &sys.static_terms().unwrap(), &Schedule::free(2e-6).unwrap(), dt).unwrap();
        let c: Vec<f64> = traj.occupations().iter().map(|o| o.p_r).collect();
        let min = c.iter().copied().fold(1.0, f64::min);
        assert!(min < 1e-6, "full conversion to P_S, min c_PR = {min}");
        // dominant frequency via a direct DFT scan over the fluctuation
        let mean = c.iter().sum::<f64>() / c.len() as f64;
        let power = |f: f64| {
            let (mut re, mut im) = (0.0, 0.0);
            for (k, v) in c.iter().enumerate() {
                let ph = 2.0 * PI * f * k as f64 * dt;
                re += (v - mean) * ph.cos();
                im += (v - mean) * ph.sin();
            }
            re * re + im * im
        };
        let freqs: Vec<f64> = (1..2000).map(|i| i as f64 * 10e3).collect();
        let best = freqs
            .iter()
            .copied()
            .max_by(|a, b| power(*a).total_cmp(&power(*b)))
            .unwrap();
        let gap = d.abs() / 2.0 / (2.0 * PI);
        assert!((best - gap).abs() <= 10e3, "peak {best} vs gap {gap}");
    }

    #[test]
    fn step_longer_than_segment_rejected() {
        let sched = fslg_schedule(50.0 * MHZ, 100e-9).unwrap();
        let err = propagate(&p_r(), &[], &sched, 20e-9).unwrap_err();
        assert!(matches!(err, Error::StepTooLarge { .. }));
        assert!(propagate(&p_r(), &[], &sched, 0.0).is_err());
    }

    #[test]
    fn non_physical_start_rejected() {
        let mut rho = p_r().into_rho();
        rho[(1, 1)] = crate::spinmath::c(2.0);
        let bad = SpinState::new_unchecked(rho, Basis::Zeeman, crate::spinmath::SpinRegister::radical_pair()).unwrap();
        assert!(matches!(
            propagate(&bad, &[], &Schedule::free(1e-9).unwrap(), 1e-10),
            Err(Error::NonPhysical(_))
        ));
    }

    #[test]
    fn pbar_examples() {
        let sys = pair(DipolarMode::SecularPlusPseudosecular);
        let terms = sys.static_terms().unwrap();
        let free = propagate_with(
            &p_r(),
            &terms,
            &Schedule::free(1e-6).unwrap(),
            PropagateOptions::observables_only(0.05e-9),
        )
        .unwrap();
        assert!(time_averaged_polarization(&free).unwrap().abs() < 0.02);

        let fslg = fslg_schedule(50.0 * MHZ, 1e-6).unwrap();
        let tr = propagate_with(&p_r(), &terms, &fslg, PropagateOptions::observables_only(0.05e-9)).unwrap();
        let p = time_averaged_polarization(&tr).unwrap();
        assert!((p - 1.0 / 3.0).abs() < 0.02, "p = {p}");

        let singlet = make_initial_state(InitialStateParams::singlet()).unwrap();
        let tr = propagate_with(&singlet, &terms, &fslg, PropagateOptions::observables_only(0.05e-9)).unwrap();
        assert!(time_averaged_polarization(&tr).unwrap().abs() < 1e-9);
    }

    #[test]
    fn analytic_pbar_examples() {
        let lg = lg_params(50.0 * MHZ).unwrap();
        assert_abs_diff_eq!(analytic_pbar([0.0, 0.0, 1.0], &lg, 1.0), 1.0 / 3.0, epsilon = 1e-15);
        let perp = [-lg.a_lg[2], 0.0, lg.a_lg[0]];
        assert_abs_diff_eq!(analytic_pbar(perp, &lg, 1.0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(analytic_pbar([0.0, 0.0, 1.0], &lg, 0.0), 0.0);
    }

    #[test]
    fn sweep_preserves_order_and_symmetrizes_dq() {
        let sys = pair(DipolarMode::SecularPlusPseudosecular);
        let list = [50.0 * MHZ, 0.0, 45.0 * MHZ];
        let res = decoupling_sweep(&p_r(), &sys, Decoupling::Fslg, &list, 1e-6, 0.05e-9).unwrap();
        assert_eq!(res.parameters, list.to_vec());
        assert!(res.pbar[1].abs() < 0.02);
        assert!((res.pbar[0] - 1.0 / 3.0).abs() < 0.02);
        assert!((res.cbar[0].t_plus - res.cbar[0].t_minus).abs() < 0.01);
        assert!(decoupling_sweep(&p_r(), &sys, Decoupling::Fslg, &[], 1e-6, 1e-9).is_err());
    }

    #[test]
    fn tables_have_headers() {
        let sys = pair(DipolarMode::SecularPlusPseudosecular);
        let traj = propagate(
            &p_r(),
            &sys.static_terms().unwrap(),
            &Schedule::free(2e-9).unwrap(),
            1e-9,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_trajectory_table(&mut buf, &traj, 1).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("time_ns,c_Tp,c_PR,c_PS,c_Tm,p\n0.0000,"));
        assert_eq!(text.lines().count(), 4);
    }
}
