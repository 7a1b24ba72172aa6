//! Command-line front end: argument parsing, config resolution and the
//! experiment runners that write `#`-headed CSV tables.

pub mod config;

use std::f64::consts::PI;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Arg, ArgMatches, Command};

pub use config::{parse_config_text, CliError, CliResult, Experiment, Param, RunConfig};

use crate::engine::{
    decoupling_sweep, propagate_with, write_sweep_table, write_trajectory_table, Decoupling, PairSystem,
    PropagateOptions,
};
use crate::hamiltonians::{GFactorPair, RadicalPairGeometry};
use crate::odmr::{detuning_grid, simulate_odmr, simulate_odmr_lab, write_spectrum_table, OdmrSetup};
use crate::states::{make_initial_state, oriented_initial_state, InitialStateParams};
use crate::surface::{
    monolayer_shift_analytic, monolayer_shift_numeric, sample_anchor_density, sensitivity_map, write_sensitivity_table,
    Quadrature, SurfaceModel, Termination,
};

const NM: f64 = 1e-9;
const MHZ: f64 = 2.0 * PI * 1e6;
const KHZ: f64 = 2.0 * PI * 1e3;

/// The full clap command tree, one subcommand per experiment.
pub fn command() -> Command {
    let mut cmd = Command::new("ciss-nv")
        .about("Radical-pair spin dynamics and NV detection simulator")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true);
    for exp in Experiment::ALL {
        let mut sub = Command::new(exp.name())
            .about(exp.about())
            .arg(
                Arg::new("config")
                    .long("config")
                    .value_name("FILE")
                    .help("flat `key = value` file; flags take precedence"),
            )
            .arg(
                Arg::new("out")
                    .long("out")
                    .value_name("FILE")
                    .help("output table (stdout if absent)"),
            );
        for p in exp.params() {
            sub = sub.arg(
                Arg::new(p.key)
                    .long(p.key)
                    .value_name("VALUE")
                    .allow_negative_numbers(true)
                    .help(format!("{} [default: {}]", p.help, p.default)),
            );
        }
        cmd = cmd.subcommand(sub);
    }
    cmd
}

/// Resolves defaults, the optional config file and explicit flags.
pub fn config_from_matches(m: &ArgMatches) -> CliResult<RunConfig> {
    let (name, sub) = m
        .subcommand()
        .ok_or_else(|| CliError::validation("command", "", "a subcommand"))?;
    let experiment =
        Experiment::from_name(name).ok_or_else(|| CliError::validation("command", name, "a known experiment"))?;
    let file = match sub.get_one::<String>("config") {
        Some(path) => parse_config_text(&fs::read_to_string(path)?)?,
        None => Vec::new(),
    };
    let flags: Vec<(String, String)> = experiment
        .params()
        .iter()
        .filter_map(|p| sub.get_one::<String>(p.key).map(|v| (p.key.to_string(), v.clone())))
        .collect();
    let out = sub.get_one::<String>("out").map(PathBuf::from);
    RunConfig::resolve(experiment, &file, &flags, out)
}

/// Runs the experiment, writing the header and table to `w`.
pub fn run<W: Write>(cfg: &RunConfig, w: &mut W) -> CliResult<()> {
    let mut body = Vec::new();
    let warnings = match cfg.experiment {
        Experiment::DecoupleSweep => run_decouple_sweep(cfg, &mut body)?,
        Experiment::Evolve => run_evolve(cfg, &mut body)?,
        Experiment::Odmr => run_odmr(cfg, &mut body)?,
        Experiment::Monolayer => run_monolayer(cfg, &mut body)?,
        Experiment::McDensity => run_mc_density(cfg, &mut body)?,
        Experiment::SensitivityMap => run_sensitivity_map(cfg, &mut body)?,
    };
    w.write_all(cfg.header().as_bytes())?;
    for warning in warnings {
        writeln!(w, "# warning: {warning}")?;
    }
    w.write_all(&body)?;
    w.flush()?;
    Ok(())
}

/// Runs to `cfg.out`, or stdout when unset.
pub fn run_to_destination(cfg: &RunConfig) -> CliResult<()> {
    match &cfg.out {
        Some(path) => {
            let mut buf = Vec::new();
            run(cfg, &mut buf)?;
            fs::write(path, buf)?;
            Ok(())
        }
        None => run(cfg, &mut io::stdout().lock()),
    }
}

fn initial_params(cfg: &RunConfig) -> CliResult<InitialStateParams> {
    let alpha = cfg.f64_in("alpha-deg", -360.0, 360.0)?.to_radians();
    let beta = cfg.f64_in("beta-deg", -360.0, 360.0)?.to_radians();
    let lambda = cfg.f64_in("lambda", 0.0, 1.0)?;
    Ok(InitialStateParams::new(alpha, beta, lambda)?)
}

fn g_factors(cfg: &RunConfig) -> CliResult<GFactorPair> {
    Ok(GFactorPair::from_delta_ppm(cfg.f64_in("delta-g-ppm", -1e5, 1e5)?))
}

fn pair_system(cfg: &RunConfig) -> CliResult<PairSystem> {
    let s = cfg.f64_pos("s-nm", 1e3)? * NM;
    let theta = cfg.f64_in("theta-rp-deg", -180.0, 180.0)?.to_radians();
    let mut sys = PairSystem::new(RadicalPairGeometry::tilted(s, theta)?);
    sys.g = g_factors(cfg)?;
    sys.bz = cfg.f64_in("bz-mt", 0.0, 1e4)? * 1e-3;
    Ok(sys)
}

fn decoupling(cfg: &RunConfig) -> CliResult<Decoupling> {
    Ok(match cfg.choice("sequence", &["fslg", "lg", "off"])? {
        "fslg" => Decoupling::Fslg,
        "lg" => Decoupling::Lg,
        _ => Decoupling::Off,
    })
}

fn pair_state(cfg: &RunConfig, sys: &PairSystem) -> CliResult<crate::states::SpinState> {
    let params = initial_params(cfg)?;
    let state = if sys.geometry.theta_rp() == 0.0 {
        make_initial_state(params)?
    } else {
        oriented_initial_state(params, sys.geometry.a_rp())?
    };
    Ok(state)
}

fn timing(cfg: &RunConfig) -> CliResult<(f64, f64)> {
    let dt = cfg.f64_pos("dt-ns", 1e3)? * 1e-9;
    let total = cfg.f64_pos("duration-us", 1e3)? * 1e-6;
    if dt > total {
        return Err(CliError::validation(
            "dt-ns",
            dt * 1e9,
            "a step no longer than duration-us",
        ));
    }
    Ok((dt, total))
}

fn run_decouple_sweep(cfg: &RunConfig, w: &mut Vec<u8>) -> CliResult<Vec<String>> {
    let sys = pair_system(cfg)?;
    let rho0 = pair_state(cfg, &sys)?;
    let mode = decoupling(cfg)?;
    let (dt, total) = timing(cfg)?;
    let start = cfg.f64_in("omega1-start-mhz", 0.0, 1e4)?;
    let stop = cfg.f64_in("omega1-stop-mhz", start, 1e4)?;
    let step = cfg.f64_pos("omega1-step-mhz", 1e4)?;
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    if n > 100_000 {
        return Err(CliError::validation(
            "omega1-step-mhz",
            step,
            "at most 100000 grid points",
        ));
    }
    let list: Vec<f64> = (0..n).map(|i| (start + i as f64 * step) * MHZ).collect();
    let sweep = decoupling_sweep(&rho0, &sys, mode, &list, total, dt)?;
    write_sweep_table(w, &sweep)?;
    Ok(Vec::new())
}

fn run_evolve(cfg: &RunConfig, w: &mut Vec<u8>) -> CliResult<Vec<String>> {
    let sys = pair_system(cfg)?;
    let rho0 = pair_state(cfg, &sys)?;
    let mode = decoupling(cfg)?;
    let (dt, total) = timing(cfg)?;
    let omega1 = cfg.f64_in("omega1-mhz", 0.0, 1e4)? * MHZ;
    let stride = cfg.usize_in("stride", 1, usize::MAX)?;
    let mode = if omega1 == 0.0 { Decoupling::Off } else { mode };
    let schedule = mode.schedule(omega1, total)?;
    let traj = propagate_with(
        &rho0,
        &sys.static_terms()?,
        &schedule,
        PropagateOptions::observables_only(dt),
    )?;
    write_trajectory_table(w, &traj, stride)?;
    Ok(schedule.warnings().to_vec())
}

fn run_odmr(cfg: &RunConfig, w: &mut Vec<u8>) -> CliResult<Vec<String>> {
    let params = initial_params(cfg)?;
    let depth = cfg.f64_pos("depth-nm", 1e3)? * NM;
    let s = cfg.f64_pos("s-nm", 1e3)? * NM;
    let mut setup = OdmrSetup::collinear(depth, s)?;
    setup.g = g_factors(cfg)?;
    setup.bz = cfg.f64_in("bz-mt", 0.0, 1e4)? * 1e-3;
    setup.omega1 = cfg.f64_in("omega1-mhz", 0.0, 1e4)? * MHZ;
    setup.pulse_duration = cfg.f64_pos("duration-us", 1e3)? * 1e-6;
    let half = cfg.f64_pos("sweep-range-khz", 1e6)? * KHZ;
    let step = cfg.f64_pos("sweep-step-khz", 1e6)? * KHZ;
    if half / step > 1e5 {
        return Err(CliError::validation(
            "sweep-step-khz",
            step / KHZ,
            "at most 200001 sweep points",
        ));
    }
    let sweep = detuning_grid(half, step)?;
    let spectrum = match cfg.choice("path", &["fast", "lab"])? {
        "fast" => simulate_odmr(params, &setup, &sweep)?,
        _ => {
            let dt = cfg.f64_pos("dt-ns", 1e3)? * 1e-9;
            simulate_odmr_lab(params, &setup, &sweep, dt)?
        }
    };
    write_spectrum_table(w, &spectrum)?;
    Ok(spectrum.warnings)
}

fn termination(cfg: &RunConfig) -> CliResult<Termination> {
    Ok(cfg.raw("termination").parse()?)
}

fn run_monolayer(cfg: &RunConfig, w: &mut Vec<u8>) -> CliResult<Vec<String>> {
    let term = termination(cfg)?;
    let d_min = cfg.f64_pos("depth-min-nm", 1e3)?;
    let d_max = cfg.f64_in("depth-max-nm", d_min, 1e3)?;
    let d_step = cfg.f64_pos("depth-step-nm", 1e3)?;
    let masks = cfg.f64_list("mask-nm", 0.0, 1e6, false)?;
    let linker = cfg.f64_in("linker-nm", 0.0, 1e3)?;
    let s = cfg.f64_pos("s-nm", 1e3)?;
    let rho = cfg.f64_in("rho-mol-nm2", 0.0, 1e3)?;
    let handedness = cfg.f64("handedness")?;
    if handedness != 1.0 && handedness != -1.0 {
        return Err(CliError::validation("handedness", handedness, "+1 or -1"));
    }
    let numeric = cfg.bool("numeric")?;
    let n = ((d_max - d_min) / d_step + 1e-9).floor() as usize + 1;
    if n > 100_000 {
        return Err(CliError::validation("depth-step-nm", d_step, "at most 100000 depths"));
    }
    if numeric {
        writeln!(w, "depth_nm,mask_nm,shift_kHz,shift_lg_kHz,shift_numeric_kHz")?;
    } else {
        writeln!(w, "depth_nm,mask_nm,shift_kHz,shift_lg_kHz")?;
    }
    for &mask in &masks {
        for i in 0..n {
            let d = d_min + i as f64 * d_step;
            let model = SurfaceModel::new(term, d * NM, mask * NM, linker * NM, s * NM, rho / (NM * NM))?
                .with_handedness(handedness);
            let shift = monolayer_shift_analytic(&model)?;
            write!(
                w,
                "{d:.6},{mask:.6},{:.6},{:.6}",
                shift.shift / KHZ,
                shift.shift_lg / KHZ
            )?;
            if numeric {
                write!(
                    w,
                    ",{:.6}",
                    monolayer_shift_numeric(&model, Quadrature::default())? / KHZ
                )?;
            }
            writeln!(w)?;
        }
    }
    Ok(Vec::new())
}

fn run_mc_density(cfg: &RunConfig, w: &mut Vec<u8>) -> CliResult<Vec<String>> {
    let rhos = cfg.f64_list("rho-anchor-nm2", 0.0, 1e3, true)?;
    let dmins = cfg.f64_list("d-min-nm", 0.0, 1e3, true)?;
    let trials = cfg.usize_in("trials", 1, 10_000_000)?;
    let area = cfg.f64_pos("area-nm2", 1e9)? * NM * NM;
    let seed = cfg.u64("seed")?;
    writeln!(w, "rho_anchor_per_nm2,d_min_nm,rho_mol_per_nm2,rho_mol_std_per_nm2")?;
    for &dmin in &dmins {
        for &rho in &rhos {
            let est = sample_anchor_density(rho / (NM * NM), dmin * NM, area, trials, seed)?;
            writeln!(
                w,
                "{rho:.6},{dmin:.6},{:.8},{:.8}",
                est.mean * NM * NM,
                est.spread * NM * NM
            )?;
        }
    }
    Ok(Vec::new())
}

fn run_sensitivity_map(cfg: &RunConfig, w: &mut Vec<u8>) -> CliResult<Vec<String>> {
    let term = termination(cfg)?;
    let extent = cfg.f64_pos("extent", 1e3)?;
    let points = cfg.usize_in("points", 2, 10_001)?;
    let axis: Vec<f64> = (0..points)
        .map(|i| -extent + 2.0 * extent * i as f64 / (points - 1) as f64)
        .collect();
    let map = sensitivity_map(term.theta_nv(), &axis, &axis)?;
    write_sensitivity_table(w, &map)?;
    Ok(Vec::new())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn output(cfg: &RunConfig) -> String {
        let mut buf = Vec::new();
        run(cfg, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn command_tree_is_consistent() {
        command().debug_assert();
    }

    #[test]
    fn flags_override_defaults() {
        let m = command()
            .try_get_matches_from(["ciss-nv", "evolve", "--s-nm", "3", "--beta-deg", "-90"])
            .unwrap();
        let cfg = config_from_matches(&m).unwrap();
        assert_eq!(cfg.raw("s-nm"), "3");
        assert_eq!(cfg.raw("beta-deg"), "-90");
    }

    #[test]
    fn sensitivity_map_runs() {
        let mut cfg = RunConfig::defaults(Experiment::SensitivityMap);
        cfg.set("points", 5).unwrap();
        let text = output(&cfg);
        assert!(text.starts_with("# ciss-nv sensitivity-map\n"));
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 26);
    }

    #[test]
    fn monolayer_rejects_bad_handedness() {
        let mut cfg = RunConfig::defaults(Experiment::Monolayer);
        cfg.set("handedness", 2).unwrap();
        let err = run(&cfg, &mut Vec::new()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn library_validation_maps_to_exit_two() {
        let mut cfg = RunConfig::defaults(Experiment::SensitivityMap);
        cfg.set("termination", "110").unwrap();
        assert_eq!(run(&cfg, &mut Vec::new()).unwrap_err().exit_code(), 2);
    }
}
