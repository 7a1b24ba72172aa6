//! Dense complex matrices and spin operators for small registers of
//! spin-1/2 and spin-1 particles.
//!
//! All operators are in units with ħ = 1, so Hamiltonians are angular
//! frequencies in rad/s.

use std::collections::HashSet;
use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

pub type CMatrix = DMatrix<Complex64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Spin quantum number of a register site.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Spin {
    Half,
    One,
}

impl Spin {
    pub fn value(self) -> f64 {
        match self {
            Spin::Half => 0.5,
            Spin::One => 1.0,
        }
    }

    /// Number of levels, 2S + 1.
    pub fn multiplicity(self) -> usize {
        match self {
            Spin::Half => 2,
            Spin::One => 3,
        }
    }
}

impl TryFrom<f64> for Spin {
    type Error = Error;

    fn try_from(s: f64) -> Result<Self> {
        if (s - 0.5).abs() < 1e-12 {
            Ok(Spin::Half)
        } else if (s - 1.0).abs() < 1e-12 {
            Ok(Spin::One)
        } else {
            Err(Error::UnsupportedSpin(s))
        }
    }
}

impl fmt::Display for Spin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Spin::Half => write!(f, "1/2"),
            Spin::One => write!(f, "1"),
        }
    }
}

/// Cartesian and ladder operators of a single spin, basis ordered from
/// m = +S down to m = −S.
#[derive(Clone, Debug)]
pub struct SpinOperators {
    pub sx: CMatrix,
    pub sy: CMatrix,
    pub sz: CMatrix,
    pub sp: CMatrix,
    pub sm: CMatrix,
}

pub fn spin_operators(spin: Spin) -> SpinOperators {
    let s = spin.value();
    let n = spin.multiplicity();
    let m = |k: usize| s - k as f64;

    let sz = CMatrix::from_fn(n, n, |i, j| if i == j { c(m(i)) } else { c(0.0) });
    // <m+1| S+ |m> = sqrt(s(s+1) - m(m+1))
    let sp = CMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j {
            let mj = m(j);
            c((s * (s + 1.0) - mj * (mj + 1.0)).sqrt())
        } else {
            c(0.0)
        }
    });
    let sm = sp.adjoint();
    let sx = (&sp + &sm).map(|z| z * 0.5);
    let sy = (&sp - &sm).map(|z| z / (2.0 * I));

    SpinOperators { sx, sy, sz, sp, sm }
}

/// One site of a spin register.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Site {
    pub label: String,
    pub spin: Spin,
}

/// Ordered collection of spins; the joint Hilbert space is the Kronecker
/// product of the sites in order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpinRegister {
    sites: Vec<Site>,
}

pub const NV: &str = "nv";
pub const RADICAL_1: &str = "rp1";
pub const RADICAL_2: &str = "rp2";

impl SpinRegister {
    pub fn new(sites: Vec<Site>) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::Empty("register sites"));
        }
        let mut seen = HashSet::new();
        for site in &sites {
            if !seen.insert(site.label.as_str()) {
                return Err(invalid("site label", &site.label, "unique labels"));
            }
        }
        Ok(Self { sites })
    }

    fn from_pairs(pairs: &[(&str, Spin)]) -> Self {
        Self {
            sites: pairs
                .iter()
                .map(|(label, spin)| Site {
                    label: (*label).to_string(),
                    spin: *spin,
                })
                .collect(),
        }
    }

    /// The two radical electrons, nearer spin first.
    pub fn radical_pair() -> Self {
        Self::from_pairs(&[(RADICAL_1, Spin::Half), (RADICAL_2, Spin::Half)])
    }

    /// NV spin-1 followed by the radical pair.
    pub fn nv_radical_pair() -> Self {
        Self::from_pairs(&[(NV, Spin::One), (RADICAL_1, Spin::Half), (RADICAL_2, Spin::Half)])
    }

    /// NV reduced to its {|0⟩, |−1⟩} doublet followed by the radical pair.
    /// The NV site is stored as a two-level site; level 0 is |0⟩ and
    /// level 1 is |−1⟩.
    pub fn nv_doublet_radical_pair() -> Self {
        Self::from_pairs(&[(NV, Spin::Half), (RADICAL_1, Spin::Half), (RADICAL_2, Spin::Half)])
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.sites.iter().map(|s| s.spin.multiplicity()).product()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.sites.iter().position(|s| s.label == label)
    }

    pub fn dims(&self) -> Vec<usize> {
        self.sites.iter().map(|s| s.spin.multiplicity()).collect()
    }
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Places a single-site operator into the full register space.
pub fn embed(op: &CMatrix, site: usize, reg: &SpinRegister) -> Result<CMatrix> {
    let dims = reg.dims();
    let Some(&d) = dims.get(site) else {
        return Err(invalid("site", site, "an index inside the register"));
    };
    if op.nrows() != d || op.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: op.nrows(),
        });
    }
    let left: usize = dims[..site].iter().product();
    let right: usize = dims[site + 1..].iter().product();
    Ok(kron(&kron(&identity(left), op), &identity(right)))
}

/// Spin operators of one site of a register, already embedded.
pub fn site_operators(reg: &SpinRegister, site: usize) -> Result<SpinOperators> {
    let spin = reg
        .sites()
        .get(site)
        .ok_or_else(|| invalid("site", site, "an index inside the register"))?
        .spin;
    let ops = spin_operators(spin);
    Ok(SpinOperators {
        sx: embed(&ops.sx, site, reg)?,
        sy: embed(&ops.sy, site, reg)?,
        sz: embed(&ops.sz, site, reg)?,
        sp: embed(&ops.sp, site, reg)?,
        sm: embed(&ops.sm, site, reg)?,
    })
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn trace(a: &CMatrix) -> Complex64 {
    a.diagonal().iter().sum()
}

pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch");
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Largest entrywise deviation from Hermiticity.
pub fn hermiticity_error(a: &CMatrix) -> f64 {
    if !a.is_square() {
        return f64::INFINITY;
    }
    max_abs_diff(a, &a.adjoint())
}

/// Largest entrywise deviation of U†U from the identity.
pub fn unitarity_error(u: &CMatrix) -> f64 {
    max_abs_diff(&(u.adjoint() * u), &identity(u.nrows()))
}

/// Largest singular value.
pub fn spectral_norm(a: &CMatrix) -> f64 {
    a.clone().singular_values().iter().copied().fold(0.0, f64::max)
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(a: &CMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(a.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

fn check_hermitian(h: &CMatrix) -> Result<()> {
    if !h.is_square() {
        return Err(Error::DimensionMismatch {
            expected: h.nrows(),
            found: h.ncols(),
        });
    }
    let dev = hermiticity_error(h);
    if dev > 1e-10 * max_abs(h).max(1.0) {
        return Err(Error::NotHermitian(dev));
    }
    Ok(())
}

/// Eigendecomposition of a time-independent Hamiltonian, reusable for
/// propagators of any duration.
#[derive(Clone, Debug)]
pub struct Propagator {
    vectors: CMatrix,
    energies: Vec<f64>,
}

impl Propagator {
    pub fn new(h: &CMatrix) -> Result<Self> {
        check_hermitian(h)?;
        let herm = (h + h.adjoint()).map(|z| z * 0.5);
        let eig = SymmetricEigen::new(herm);
        Ok(Self {
            vectors: eig.eigenvectors,
            energies: eig.eigenvalues.iter().copied().collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// U(t) = exp(−iHt).
    pub fn at(&self, t: f64) -> CMatrix {
        let mut scaled = self.vectors.clone();
        for (j, &e) in self.energies.iter().enumerate() {
            let phase = Complex64::from_polar(1.0, -e * t);
            for z in scaled.column_mut(j).iter_mut() {
                *z *= phase;
            }
        }
        scaled * self.vectors.adjoint()
    }
}

/// exp(−iHt) for Hermitian H.
pub fn expm_hermitian(h: &CMatrix, t: f64) -> Result<CMatrix> {
    Ok(Propagator::new(h)?.at(t))
}

/// Reduced density matrix on the kept sites (in register order).
pub fn partial_trace(rho: &CMatrix, reg: &SpinRegister, keep: &[usize]) -> Result<CMatrix> {
    let dims = reg.dims();
    if rho.nrows() != reg.dim() || rho.ncols() != reg.dim() {
        return Err(Error::DimensionMismatch {
            expected: reg.dim(),
            found: rho.nrows(),
        });
    }
    let mut keep: Vec<usize> = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    if keep.iter().any(|&k| k >= dims.len()) {
        return Err(invalid("keep", format!("{keep:?}"), "site indices inside the register"));
    }
    let n = reg.dim();
    let kept_dim: usize = keep.iter().map(|&k| dims[k]).product();

    // split each full index into (kept index, traced index)
    let split: Vec<(usize, usize)> = (0..n)
        .map(|mut idx| {
            let mut digits = vec![0; dims.len()];
            for s in (0..dims.len()).rev() {
                digits[s] = idx % dims[s];
                idx /= dims[s];
            }
            let (mut k, mut t) = (0, 0);
            for (s, &dig) in digits.iter().enumerate() {
                if keep.contains(&s) {
                    k = k * dims[s] + dig;
                } else {
                    t = t * dims[s] + dig;
                }
            }
            (k, t)
        })
        .collect();

    let mut out = CMatrix::zeros(kept_dim, kept_dim);
    for i in 0..n {
        for j in 0..n {
            if split[i].1 == split[j].1 {
                out[(split[i].0, split[j].0)] += rho[(i, j)];
            }
        }
    }
    Ok(out)
}

/// Field vector (ax, ay, az) of a single spin-1/2 Hamiltonian a·S,
/// ignoring any multiple of the identity.
pub fn field_vector(h: &CMatrix) -> Result<[f64; 3]> {
    if h.shape() != (2, 2) {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: h.nrows(),
        });
    }
    let off = h[(0, 1)];
    Ok([2.0 * off.re, -2.0 * off.im, (h[(0, 0)] - h[(1, 1)]).re])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn random_hermitian(n: usize, vals: &[f64]) -> CMatrix {
        let mut h = CMatrix::zeros(n, n);
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                let re = vals[k % vals.len()];
                let im = if i == j { 0.0 } else { vals[(k + 7) % vals.len()] };
                h[(i, j)] = Complex64::new(re, im);
                h[(j, i)] = Complex64::new(re, -im);
                k += 1;
            }
        }
        h
    }

    fn taylor_expm(h: &CMatrix, t: f64) -> CMatrix {
        // scaling and squaring with a long Taylor series
        let n = h.nrows();
        let a = h.map(|z| z * (-I * t));
        let norm = max_abs(&a) * n as f64;
        let squarings = norm.log2().ceil().max(0.0) as u32 + 4;
        let a = a.map(|z| z / 2f64.powi(squarings as i32));
        let mut term = identity(n);
        let mut sum = identity(n);
        for k in 1..30 {
            term = &term * &a / c(k as f64);
            sum += &term;
        }
        for _ in 0..squarings {
            sum = &sum * &sum;
        }
        sum
    }

    #[test]
    fn spin_half_matrices() {
        let ops = spin_operators(Spin::Half);
        assert_abs_diff_eq!(ops.sz[(0, 0)].re, 0.5);
        assert_abs_diff_eq!(ops.sz[(1, 1)].re, -0.5);
        // S+ |down> = |up>
        assert_abs_diff_eq!(ops.sp[(0, 1)].re, 1.0);
        assert_abs_diff_eq!(ops.sp[(1, 0)].norm(), 0.0);
    }

    #[test]
    fn spin_one_sz() {
        let ops = spin_operators(Spin::One);
        let d: Vec<f64> = ops.sz.diagonal().iter().map(|z| z.re).collect();
        assert_eq!(d, vec![1.0, 0.0, -1.0]);
        assert_abs_diff_eq!(ops.sp[(0, 1)].re, 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn unsupported_spin_rejected() {
        assert!(matches!(Spin::try_from(1.5), Err(Error::UnsupportedSpin(_))));
        assert_eq!(Spin::try_from(0.5).unwrap(), Spin::Half);
    }

    #[test]
    fn commutation_relations() {
        for spin in [Spin::Half, Spin::One] {
            let o = spin_operators(spin);
            let ci = |m: &CMatrix| m.map(|z| z * I);
            assert!(max_abs_diff(&commutator(&o.sx, &o.sy), &ci(&o.sz)) < 1e-12);
            assert!(max_abs_diff(&commutator(&o.sy, &o.sz), &ci(&o.sx)) < 1e-12);
            assert!(max_abs_diff(&commutator(&o.sz, &o.sx), &ci(&o.sy)) < 1e-12);
        }
    }

    #[test]
    fn embed_examples() {
        let reg = SpinRegister::radical_pair();
        let sz = spin_operators(Spin::Half).sz;
        let e0 = embed(&sz, 0, &reg).unwrap();
        let d: Vec<f64> = e0.diagonal().iter().map(|z| z.re).collect();
        assert_eq!(d, vec![0.5, 0.5, -0.5, -0.5]);
        let e1 = embed(&sz, 1, &reg).unwrap();
        assert_abs_diff_eq!(trace(&e1).norm(), 0.0);
        let id = embed(&identity(2), 1, &reg).unwrap();
        assert!(max_abs_diff(&id, &identity(4)) < 1e-15);
    }

    #[test]
    fn embed_rejects_wrong_dimension() {
        let reg = SpinRegister::nv_radical_pair();
        let sz = spin_operators(Spin::Half).sz;
        assert!(matches!(embed(&sz, 0, &reg), Err(Error::DimensionMismatch { .. })));
        assert!(embed(&sz, 5, &reg).is_err());
    }

    #[test]
    fn register_labels_unique() {
        let site = Site {
            label: "a".into(),
            spin: Spin::Half,
        };
        assert!(SpinRegister::new(vec![site.clone(), site]).is_err());
        assert_eq!(SpinRegister::nv_radical_pair().dim(), 12);
    }

    #[test]
    fn expm_examples() {
        let z = CMatrix::zeros(3, 3);
        assert!(max_abs_diff(&expm_hermitian(&z, 1.3).unwrap(), &identity(3)) < 1e-15);
        let sz = spin_operators(Spin::Half).sz;
        let u = expm_hermitian(&sz, 2.0 * std::f64::consts::PI).unwrap();
        assert!(max_abs_diff(&u, &(-identity(2))) < 1e-12);
    }

    #[test]
    fn expm_rejects_non_hermitian() {
        let mut h = CMatrix::zeros(2, 2);
        h[(0, 1)] = c(1.0);
        assert!(matches!(expm_hermitian(&h, 1.0), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn expm_matches_taylor_oracle() {
        let h = random_hermitian(4, &[0.3, -1.2, 0.7, 2.1, -0.4, 0.9, 1.5, -0.8]);
        let u = expm_hermitian(&h, 0.9).unwrap();
        assert!(max_abs_diff(&u, &taylor_expm(&h, 0.9)) < 1e-10);
    }

    #[test]
    fn partial_trace_of_product() {
        let reg = SpinRegister::nv_doublet_radical_pair();
        let a = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(0.25), c(0.75)]));
        let mut b = CMatrix::zeros(4, 4);
        b[(1, 1)] = c(0.5);
        b[(2, 2)] = c(0.5);
        b[(1, 2)] = c(-0.5);
        b[(2, 1)] = c(-0.5);
        let rho = kron(&a, &b);
        let red = partial_trace(&rho, &reg, &[1, 2]).unwrap();
        assert!(max_abs_diff(&red, &b) < 1e-15);
        let nv = partial_trace(&rho, &reg, &[0]).unwrap();
        assert!(max_abs_diff(&nv, &a) < 1e-15);
    }

    #[test]
    fn field_vector_of_lg_like_term() {
        let o = spin_operators(Spin::Half);
        let h = o.sx.map(|z| z * 2.0) + o.sy.map(|z| z * -0.5) + o.sz.map(|z| z * 3.0);
        let v = field_vector(&h).unwrap();
        assert_abs_diff_eq!(v[0], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(v[1], -0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(v[2], 3.0, epsilon = 1e-14);
    }

    proptest! {
        #[test]
        fn expm_unitary_and_additive(vals in prop::collection::vec(-5.0f64..5.0, 16),
                                      t1 in -2.0f64..2.0, t2 in -2.0f64..2.0) {
            let h = random_hermitian(4, &vals);
            let u1 = expm_hermitian(&h, t1).unwrap();
            let u2 = expm_hermitian(&h, t2).unwrap();
            let u12 = expm_hermitian(&h, t1 + t2).unwrap();
            prop_assert!(unitarity_error(&u1) < 1e-10);
            prop_assert!(max_abs_diff(&(&u1 * &u2), &u12) < 1e-9);
        }

        #[test]
        fn embed_preserves_hermiticity_and_norm(vals in prop::collection::vec(-3.0f64..3.0, 9),
                                                site in 0usize..3) {
            let reg = SpinRegister::nv_radical_pair();
            let d = reg.dims()[site];
            let op = random_hermitian(d, &vals);
            let e = embed(&op, site, &reg).unwrap();
            prop_assert!(hermiticity_error(&e) < 1e-14);
            let n0 = spectral_norm(&op);
            prop_assert!((spectral_norm(&e) - n0).abs() < 1e-10 * n0.max(1.0));
        }
    }
}
