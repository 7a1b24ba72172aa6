//! Hamiltonian builders: pair Zeeman and dipolar terms, the NV ground
//! state and NV–target secular couplings. All terms are in rad/s.

use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::spinmath::{c, embed, kron, spin_operators, CMatrix, Spin, SpinRegister};

/// Physical constants (CODATA 2018).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicalConstants {
    /// T·m/A
    pub mu0: f64,
    /// J·s
    pub hbar: f64,
    /// J/T
    pub mu_b: f64,
    /// free-electron g-factor
    pub g_e: f64,
    /// NV zero-field splitting, rad/s
    pub d_zfs: f64,
}

pub const CONSTANTS: PhysicalConstants = PhysicalConstants {
    mu0: 1.256_637_062_12e-6,
    hbar: 1.054_571_817e-34,
    mu_b: 9.274_010_078_3e-24,
    g_e: 2.002_319_304_362_56,
    d_zfs: 2.0 * PI * 2.87e9,
};

impl PhysicalConstants {
    /// Gyromagnetic ratio (μB/ħ)·g in rad/s/T.
    pub fn gamma(&self, g: f64) -> f64 {
        self.mu_b / self.hbar * g
    }

    pub fn gamma_e(&self) -> f64 {
        self.gamma(self.g_e)
    }

    /// NV gyromagnetic ratio, taken equal to the free electron's.
    pub fn gamma_nv(&self) -> f64 {
        self.gamma_e()
    }

    /// Dipolar prefactor μ0ħγaγb/4π in rad/s·m³.
    pub fn kappa(&self, gamma_a: f64, gamma_b: f64) -> f64 {
        self.mu0 * self.hbar * gamma_a * gamma_b / (4.0 * PI)
    }
}

pub type HamiltonianTerm = CMatrix;

/// g-factors of the two radicals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GFactorPair {
    pub g1: f64,
    pub g2: f64,
}

impl GFactorPair {
    pub fn free_electrons() -> Self {
        Self {
            g1: CONSTANTS.g_e,
            g2: CONSTANTS.g_e,
        }
    }

    /// g1,2 = g_e ∓ Δg/2 with Δg given in ppm of g_e.
    pub fn from_delta_ppm(ppm: f64) -> Self {
        let dg = CONSTANTS.g_e * ppm * 1e-6;
        Self {
            g1: CONSTANTS.g_e - dg / 2.0,
            g2: CONSTANTS.g_e + dg / 2.0,
        }
    }

    pub fn delta_g(&self) -> f64 {
        self.g2 - self.g1
    }

    pub fn gammas(&self) -> (f64, f64) {
        (CONSTANTS.gamma(self.g1), CONSTANTS.gamma(self.g2))
    }
}

impl Default for GFactorPair {
    fn default() -> Self {
        Self::free_electrons()
    }
}

/// Separation and orientation of the pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadicalPairGeometry {
    s: f64,
    a_rp: [f64; 3],
}

impl RadicalPairGeometry {
    pub fn new(s: f64, a_rp: [f64; 3]) -> Result<Self> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(invalid("s", s, "a positive separation in metres"));
        }
        let n = (a_rp[0].powi(2) + a_rp[1].powi(2) + a_rp[2].powi(2)).sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(invalid("a_rp", format!("{a_rp:?}"), "a nonzero axis"));
        }
        Ok(Self {
            s,
            a_rp: [a_rp[0] / n, a_rp[1] / n, a_rp[2] / n],
        })
    }

    /// Pair axis tilted by `theta_rp` from the field in the x–z plane.
    pub fn tilted(s: f64, theta_rp: f64) -> Result<Self> {
        Self::new(s, [theta_rp.sin(), 0.0, theta_rp.cos()])
    }

    pub fn along_field(s: f64) -> Result<Self> {
        Self::new(s, [0.0, 0.0, 1.0])
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn a_rp(&self) -> [f64; 3] {
        self.a_rp
    }

    pub fn theta_rp(&self) -> f64 {
        self.a_rp[2].clamp(-1.0, 1.0).acos()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DipolarMode {
    /// Full vector coupling, any orientation.
    Full,
    /// d·Sz1·Sz2 only.
    SecularOnly,
    /// d·Sz1·Sz2 − (d/4)(S+S− + S−S+).
    SecularPlusPseudosecular,
}

struct PairOps {
    x1: CMatrix,
    y1: CMatrix,
    z1: CMatrix,
    p1: CMatrix,
    m1: CMatrix,
    x2: CMatrix,
    y2: CMatrix,
    z2: CMatrix,
    p2: CMatrix,
    m2: CMatrix,
}

fn pair_ops() -> PairOps {
    let o = spin_operators(Spin::Half);
    let one = CMatrix::identity(2, 2);
    PairOps {
        x1: kron(&o.sx, &one),
        y1: kron(&o.sy, &one),
        z1: kron(&o.sz, &one),
        p1: kron(&o.sp, &one),
        m1: kron(&o.sm, &one),
        x2: kron(&one, &o.sx),
        y2: kron(&one, &o.sy),
        z2: kron(&one, &o.sz),
        p2: kron(&one, &o.sp),
        m2: kron(&one, &o.sm),
    }
}

fn scaled(m: &CMatrix, k: f64) -> CMatrix {
    m.map(|z| z * k)
}

/// Lab-frame pair Zeeman term Bz(γ1 Sz1 + γ2 Sz2).
pub fn zeeman_rp(bz: f64, g: GFactorPair) -> Result<HamiltonianTerm> {
    if !(bz >= 0.0) {
        return Err(invalid("Bz", bz, "a non-negative field in tesla"));
    }
    let (g1, g2) = g.gammas();
    let o = pair_ops();
    Ok(scaled(&o.z1, g1 * bz) + scaled(&o.z2, g2 * bz))
}

/// Zeeman term left over in a frame rotating at γ_e·Bz for both spins.
pub fn zeeman_rp_rotating(bz: f64, g: GFactorPair) -> Result<HamiltonianTerm> {
    if !(bz >= 0.0) {
        return Err(invalid("Bz", bz, "a non-negative field in tesla"));
    }
    let (g1, g2) = g.gammas();
    let ge = CONSTANTS.gamma_e();
    let o = pair_ops();
    Ok(scaled(&o.z1, (g1 - ge) * bz) + scaled(&o.z2, (g2 - ge) * bz))
}

/// Dipolar constant d = κ(1 − 3cos²θ_RP)/s³ in rad/s.
pub fn dipolar_constant(geom: &RadicalPairGeometry, g: GFactorPair) -> f64 {
    let (g1, g2) = g.gammas();
    let ct = geom.a_rp[2];
    CONSTANTS.kappa(g1, g2) * (1.0 - 3.0 * ct * ct) / geom.s.powi(3)
}

pub fn dipolar_rp(geom: &RadicalPairGeometry, g: GFactorPair, mode: DipolarMode) -> Result<HamiltonianTerm> {
    if !(geom.s > 0.0) {
        return Err(invalid("s", geom.s, "a positive separation in metres"));
    }
    let o = pair_ops();
    let h = match mode {
        DipolarMode::Full => {
            let (g1, g2) = g.gammas();
            let k = CONSTANTS.kappa(g1, g2) / geom.s.powi(3);
            let [nx, ny, nz] = geom.a_rp;
            let s_dot = &o.x1 * &o.x2 + &o.y1 * &o.y2 + &o.z1 * &o.z2;
            let n1 = scaled(&o.x1, nx) + scaled(&o.y1, ny) + scaled(&o.z1, nz);
            let n2 = scaled(&o.x2, nx) + scaled(&o.y2, ny) + scaled(&o.z2, nz);
            scaled(&(s_dot - scaled(&(n1 * n2), 3.0)), k)
        }
        DipolarMode::SecularOnly => {
            let d = dipolar_constant(geom, g);
            scaled(&(&o.z1 * &o.z2), d)
        }
        DipolarMode::SecularPlusPseudosecular => {
            let d = dipolar_constant(geom, g);
            let flip = &o.p1 * &o.m2 + &o.m1 * &o.p2;
            scaled(&(&o.z1 * &o.z2), d) - scaled(&flip, d / 4.0)
        }
    };
    Ok(h)
}

/// NV ground state D·Tz² + γ_NV·Bz·Tz on a spin-1, basis {+1, 0, −1}.
pub fn nv_ground(bz: f64) -> Result<HamiltonianTerm> {
    if !(bz >= 0.0) {
        return Err(invalid("Bz", bz, "a non-negative field in tesla"));
    }
    let t = spin_operators(Spin::One);
    Ok(scaled(&(&t.sz * &t.sz), CONSTANTS.d_zfs) + scaled(&t.sz, CONSTANTS.gamma_nv() * bz))
}

/// Secular NV–target coupling A·Tz·Sz with A = κ(1 − 3cos²θ)/r³.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NvTargetCoupling {
    /// A in rad/s.
    pub amplitude: f64,
}

pub fn nv_target_secular(r: f64, theta: f64, gamma_target: f64) -> Result<NvTargetCoupling> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(invalid("r", r, "a positive distance in metres"));
    }
    let ct = theta.cos();
    Ok(NvTargetCoupling {
        amplitude: CONSTANTS.kappa(CONSTANTS.gamma_nv(), gamma_target) * (1.0 - 3.0 * ct * ct) / r.powi(3),
    })
}

impl NvTargetCoupling {
    /// Shift of the |0⟩→|−1⟩ line for a target with ⟨Sz⟩ = m.
    pub fn line_shift(&self, m: f64) -> f64 {
        -self.amplitude * m
    }

    /// A·Tz⊗Sz for a spin-1 NV and a spin-1/2 target (6×6).
    pub fn term(&self) -> HamiltonianTerm {
        let t = spin_operators(Spin::One);
        let s = spin_operators(Spin::Half);
        scaled(&kron(&t.sz, &s.sz), self.amplitude)
    }

    /// The coupling placed on a register between the NV and `target`.
    /// A spin-1/2 NV site stands for the {|0⟩, |−1⟩} doublet, where Tz
    /// restricts to diag(0, −1).
    pub fn on_register(&self, reg: &SpinRegister, nv: usize, target: usize) -> Result<HamiltonianTerm> {
        let tz = nv_tz(reg, nv)?;
        let sz = spin_operators(Spin::Half).sz;
        let a = embed(&tz, nv, reg)?;
        let b = embed(&sz, target, reg)?;
        Ok(scaled(&(a * b), self.amplitude))
    }
}

/// Tz of the NV site; diag(0, −1) on a doublet site.
pub fn nv_tz(reg: &SpinRegister, nv: usize) -> Result<CMatrix> {
    let spin = reg
        .sites()
        .get(nv)
        .ok_or_else(|| invalid("nv site", nv, "an index inside the register"))?
        .spin;
    Ok(match spin {
        Spin::One => spin_operators(Spin::One).sz,
        Spin::Half => {
            let mut m = CMatrix::zeros(2, 2);
            m[(1, 1)] = c(-1.0);
            m
        }
    })
}
