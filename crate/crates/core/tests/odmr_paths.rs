use std::f64::consts::PI;

use ciss_nv::odmr::{detuning_grid, simulate_odmr, simulate_odmr_lab, OdmrSetup};
use ciss_nv::states::InitialStateParams;

const KHZ: f64 = 2.0 * PI * 1e3;

#[test]
fn lab_and_rotating_frame_paths_agree() {
    let setup = OdmrSetup::collinear(5e-9, 2e-9).unwrap();
    let step = 20.0 * KHZ;
    let sweep = detuning_grid(300.0 * KHZ, step).unwrap();
    for params in [InitialStateParams::p_r(), InitialStateParams::p_s()] {
        let fast = simulate_odmr(params, &setup, &sweep).unwrap();
        let lab = simulate_odmr_lab(params, &setup, &sweep, 0.05e-9).unwrap();
        let (a, b) = (fast.dominant_dip().unwrap(), lab.dominant_dip().unwrap());
        assert!((a - b).abs() <= step / 2.0, "{} vs {} kHz", a / KHZ, b / KHZ);
        let worst = fast
            .contrast
            .iter()
            .zip(&lab.contrast)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(worst < 0.02, "max contrast difference {worst}");
    }
}
