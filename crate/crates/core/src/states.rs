//! Radical-pair initial states and the observables read from them.
//!
//! Zeeman basis ordering is {T+, P_R, P_S, T−} = {↑↑, ↑↓, ↓↑, ↓↓}, with the
//! first arrow belonging to the radical nearer the NV. The singlet is
//! (|↑↓⟩ − |↓↑⟩)/√2.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::spinmath::{
    c, expm_hermitian, hermitian_eigenvalues, hermiticity_error, kron, partial_trace, spin_operators, trace, CMatrix,
    Spin, SpinRegister, RADICAL_1, RADICAL_2,
};

/// Parameters of the initial pair state: mixing angle α, relative phase β
/// and coherence damping Λ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitialStateParams {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
}

impl InitialStateParams {
    pub fn new(alpha: f64, beta: f64, lambda: f64) -> Result<Self> {
        let p = Self { alpha, beta, lambda };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        const EPS: f64 = 1e-12;
        if !(self.alpha.abs() <= FRAC_PI_2 + EPS) {
            return Err(invalid("alpha", self.alpha, "radians in [-pi/2, pi/2]"));
        }
        if !(self.beta.abs() <= PI + EPS) {
            return Err(invalid("beta", self.beta, "radians in [-pi, pi]"));
        }
        if !(-EPS..=1.0 + EPS).contains(&self.lambda) {
            return Err(invalid("lambda", self.lambda, "a value in [0, 1]"));
        }
        Ok(())
    }

    /// Fully polarized |P_R⟩.
    pub fn p_r() -> Self {
        Self {
            alpha: PI / 4.0,
            beta: 0.0,
            lambda: 1.0,
        }
    }

    /// Fully polarized |P_S⟩.
    pub fn p_s() -> Self {
        Self {
            alpha: -PI / 4.0,
            beta: 0.0,
            lambda: 1.0,
        }
    }

    pub fn singlet() -> Self {
        Self {
            alpha: 0.0,
            beta: 0.0,
            lambda: 1.0,
        }
    }

    /// sin 2α cos β.
    pub fn p_ciss(&self) -> f64 {
        (2.0 * self.alpha).sin() * self.beta.cos()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Basis {
    /// {T+, P_R, P_S, T−}
    Zeeman,
    /// {T+, S, T0, T−}
    SingletTriplet,
}

/// Density matrix of a spin register.
#[derive(Clone, Debug)]
pub struct SpinState {
    rho: CMatrix,
    basis: Basis,
    register: SpinRegister,
}

/// Default tolerance for the physicality checks.
pub const STATE_TOL: f64 = 1e-10;

/// Deviations of a density matrix from physicality.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StateDefects {
    pub hermiticity: f64,
    pub trace: f64,
    pub min_eigenvalue: f64,
}

impl StateDefects {
    pub fn of(rho: &CMatrix) -> Self {
        let herm = hermiticity_error(rho);
        let sym = (rho + rho.adjoint()).map(|z| z * 0.5);
        let min_eigenvalue = hermitian_eigenvalues(&sym).first().copied().unwrap_or(0.0);
        Self {
            hermiticity: herm,
            trace: (trace(rho) - c(1.0)).norm(),
            min_eigenvalue,
        }
    }

    pub fn within(&self, tol: f64) -> bool {
        self.hermiticity <= tol && self.trace <= tol && self.min_eigenvalue >= -tol
    }

    pub fn merge(&self, other: &Self) -> Self {
        Self {
            hermiticity: self.hermiticity.max(other.hermiticity),
            trace: self.trace.max(other.trace),
            min_eigenvalue: self.min_eigenvalue.min(other.min_eigenvalue),
        }
    }
}

impl SpinState {
    /// Builds a state, rejecting non-physical matrices at [`STATE_TOL`].
    pub fn new(rho: CMatrix, basis: Basis, register: SpinRegister) -> Result<Self> {
        let state = Self::new_unchecked(rho, basis, register)?;
        let defects = StateDefects::of(&state.rho);
        if !defects.within(STATE_TOL) {
            return Err(Error::NonPhysical(format!("{defects:?}")));
        }
        Ok(state)
    }

    /// Builds a state checking only its dimension.
    pub fn new_unchecked(rho: CMatrix, basis: Basis, register: SpinRegister) -> Result<Self> {
        if rho.nrows() != register.dim() || rho.ncols() != register.dim() {
            return Err(Error::DimensionMismatch {
                expected: register.dim(),
                found: rho.nrows(),
            });
        }
        if basis == Basis::SingletTriplet && register.dim() != 4 {
            return Err(invalid("basis", "singlet-triplet", "a two-spin register"));
        }
        Ok(Self { rho, basis, register })
    }

    pub fn maximally_mixed(register: SpinRegister) -> Self {
        let n = register.dim();
        let rho = CMatrix::identity(n, n) / c(n as f64);
        Self {
            rho,
            basis: Basis::Zeeman,
            register,
        }
    }

    /// Projector onto a state vector given in the product basis.
    pub fn pure(psi: &[Complex64], register: SpinRegister) -> Result<Self> {
        let v = DVector::from_column_slice(psi);
        let norm = v.norm();
        if norm == 0.0 {
            return Err(invalid("psi", "zero vector", "a nonzero state vector"));
        }
        let v = v / c(norm);
        Self::new(&v * v.adjoint(), Basis::Zeeman, register)
    }

    pub fn rho(&self) -> &CMatrix {
        &self.rho
    }

    pub fn into_rho(self) -> CMatrix {
        self.rho
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn register(&self) -> &SpinRegister {
        &self.register
    }

    pub fn defects(&self) -> StateDefects {
        StateDefects::of(&self.rho)
    }

    pub fn purity(&self) -> f64 {
        trace(&(&self.rho * &self.rho)).re
    }

    /// Same state expressed in another basis of the pair.
    pub fn to_basis(&self, basis: Basis) -> Result<Self> {
        if basis == self.basis {
            return Ok(self.clone());
        }
        if self.register.dim() != 4 {
            return Err(invalid("basis", "singlet-triplet", "a two-spin register"));
        }
        let m = singlet_triplet_transform();
        let rho = match basis {
            Basis::SingletTriplet => m.adjoint() * &self.rho * &m,
            Basis::Zeeman => &m * &self.rho * m.adjoint(),
        };
        Ok(Self {
            rho,
            basis,
            register: self.register.clone(),
        })
    }

    /// Radical-pair state in the Zeeman basis; traces out any other sites.
    pub fn pair_state(&self) -> Result<SpinState> {
        if self.register.dim() == 4 && self.register.len() == 2 {
            return self.to_basis(Basis::Zeeman);
        }
        let (Some(a), Some(b)) = (self.register.index_of(RADICAL_1), self.register.index_of(RADICAL_2)) else {
            return Err(Error::DimensionMismatch {
                expected: 4,
                found: self.register.dim(),
            });
        };
        let rho = partial_trace(&self.rho, &self.register, &[a, b])?;
        Ok(SpinState {
            rho,
            basis: Basis::Zeeman,
            register: SpinRegister::radical_pair(),
        })
    }
}

/// Columns are {T+, S, T0, T−} expressed in the Zeeman basis.
#[rustfmt::skip]
fn singlet_triplet_transform() -> CMatrix {
    let h = FRAC_1_SQRT_2;
    CMatrix::from_row_slice(
        4,
        4,
        &[
            c(1.0), c(0.0), c(0.0), c(0.0),
            c(0.0), c(h), c(h), c(0.0),
            c(0.0), c(-h), c(h), c(0.0),
            c(0.0), c(0.0), c(0.0), c(1.0),
        ],
    )
}

/// Amplitudes of |P_R⟩ and |P_S⟩ in cos α |S⟩ + e^{iβ} sin α |T0⟩.
pub fn zq_amplitudes(alpha: f64, beta: f64) -> (Complex64, Complex64) {
    let e = Complex64::from_polar(1.0, beta);
    let (sa, ca) = alpha.sin_cos();
    ((c(ca) + e * sa) * FRAC_1_SQRT_2, (c(-ca) + e * sa) * FRAC_1_SQRT_2)
}

/// ρ0(α, β, Λ): the zero-quantum pure state with its P_R/P_S coherence
/// scaled by Λ.
pub fn make_initial_state(p: InitialStateParams) -> Result<SpinState> {
    p.validate()?;
    let (cr, cs) = zq_amplitudes(p.alpha, p.beta);
    let mut rho = CMatrix::zeros(4, 4);
    rho[(1, 1)] = c(cr.norm_sqr());
    rho[(2, 2)] = c(cs.norm_sqr());
    rho[(1, 2)] = cr * cs.conj() * p.lambda;
    rho[(2, 1)] = rho[(1, 2)].conj();
    SpinState::new(rho, Basis::Zeeman, SpinRegister::radical_pair())
}

/// Collective rotation of both pair spins taking ẑ to `axis`.
pub fn pair_rotation(axis: [f64; 3]) -> Result<CMatrix> {
    let n = (axis[0].powi(2) + axis[1].powi(2) + axis[2].powi(2)).sqrt();
    if !(n > 0.0) || !n.is_finite() {
        return Err(invalid("axis", format!("{axis:?}"), "a nonzero finite vector"));
    }
    let theta = (axis[2] / n).clamp(-1.0, 1.0).acos();
    let phi = axis[1].atan2(axis[0]);
    let o = spin_operators(Spin::Half);
    let one = CMatrix::identity(2, 2);
    let sy = kron(&o.sy, &one) + kron(&one, &o.sy);
    let sz = kron(&o.sz, &one) + kron(&one, &o.sz);
    Ok(expm_hermitian(&sz, phi)? * expm_hermitian(&sy, theta)?)
}

/// ρ0 prepared along a molecular axis `a_rp` instead of the field axis.
pub fn oriented_initial_state(p: InitialStateParams, a_rp: [f64; 3]) -> Result<SpinState> {
    let rho0 = make_initial_state(p)?;
    let u = pair_rotation(a_rp)?;
    SpinState::new(
        &u * rho0.rho() * u.adjoint(),
        Basis::Zeeman,
        SpinRegister::radical_pair(),
    )
}

/// Zeeman-basis populations of the pair.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Occupations {
    pub t_plus: f64,
    pub p_r: f64,
    pub p_s: f64,
    pub t_minus: f64,
}

impl Occupations {
    pub fn from_array(a: [f64; 4]) -> Self {
        Self {
            t_plus: a[0],
            p_r: a[1],
            p_s: a[2],
            t_minus: a[3],
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.t_plus, self.p_r, self.p_s, self.t_minus]
    }

    pub fn sum(&self) -> f64 {
        self.as_array().iter().sum()
    }

    /// c_PR − c_PS.
    pub fn polarization(&self) -> f64 {
        self.p_r - self.p_s
    }

    pub(crate) fn from_pair_rho(rho: &CMatrix) -> Self {
        Self::from_array([rho[(0, 0)].re, rho[(1, 1)].re, rho[(2, 2)].re, rho[(3, 3)].re])
    }
}

pub fn occupations(s: &SpinState) -> Result<Occupations> {
    let pair = s.pair_state()?;
    Ok(Occupations::from_pair_rho(pair.rho()))
}

/// p = c_PR − c_PS = ⟨Sz1 − Sz2⟩; equals sin 2α cos β on ρ0.
pub fn polarization(s: &SpinState) -> Result<f64> {
    Ok(occupations(s)?.polarization())
}

/// Projection of the molecular-frame polarization on the field axis.
pub fn apparent_polarization(p_ciss: f64, theta_rp: f64) -> f64 {
    p_ciss * theta_rp.cos()
}
