//! Collective-spin basis, parity sectors and the anharmonic LMG Hamiltonian.
//!
//! All work happens in the maximal irrep `S = N/2` using the `|S, M_z⟩`
//! basis, indexed by `k = S + M_z = 0..=N`. The Hamiltonian
//!
//! ```text
//! H = (1-ξ)(S + Sz) + (2ξ/S)(S² - Sx²) + (α/2S)(S + Sz)(S + Sz + 1)
//! ```
//!
//! only couples `M_z` to `M_z ± 2`, so it splits into two parity sectors
//! `(-1)^(S+M_z)`. Ordering each sector by ascending `k` (step 2) makes every
//! block a symmetric tridiagonal matrix.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    n: usize,
    xi: f64,
    alpha: f64,
}

impl ModelParams {
    /// `n` is the number of sites (even, at least 2), `xi ∈ [0, 1]` the
    /// control parameter and `alpha` the anharmonicity. Two excited-state
    /// transitions only appear for `alpha < 0`, but any finite value is
    /// accepted.
    pub fn new(n: usize, xi: f64, alpha: f64) -> Result<Self> {
        if n < 2 || !n.is_multiple_of(2) {
            return Err(Error::invalid(format!("N must be even and >= 2, got {n}")));
        }
        if !(0.0..=1.0).contains(&xi) {
            return Err(Error::invalid(format!("xi must lie in [0, 1], got {xi}")));
        }
        if !alpha.is_finite() {
            return Err(Error::invalid(format!("alpha must be finite, got {alpha}")));
        }
        Ok(ModelParams { n, xi, alpha })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Total spin `S = N/2`.
    pub fn spin(&self) -> f64 {
        self.n as f64 / 2.0
    }

    /// Full Hilbert-space dimension `N + 1`.
    pub fn dim(&self) -> usize {
        self.n + 1
    }

    pub fn with_xi(&self, xi: f64) -> Result<Self> {
        ModelParams::new(self.n, xi, self.alpha)
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        ModelParams::new(self.n, self.xi, alpha)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn sign(self) -> i32 {
        match self {
            Parity::Even => 1,
            Parity::Odd => -1,
        }
    }

    pub fn from_sign(sign: i32) -> Result<Self> {
        match sign {
            1 => Ok(Parity::Even),
            -1 => Ok(Parity::Odd),
            s => Err(Error::invalid(format!("parity sign must be +1 or -1, got {s}"))),
        }
    }

    /// Parity of the basis state with occupation `k = S + M_z`.
    pub fn of_index(k: usize) -> Self {
        if k.is_multiple_of(2) {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }

    pub fn offset(self) -> usize {
        match self {
            Parity::Even => 0,
            Parity::Odd => 1,
        }
    }
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
        })
    }
}

impl FromStr for Parity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "even" | "+" | "+1" | "1" => Ok(Parity::Even),
            "odd" | "-" | "-1" => Ok(Parity::Odd),
            other => Err(Error::invalid(format!("unknown parity `{other}` (expected even|odd)"))),
        }
    }
}

/// `(-1)^(N/2 + mz)` as a [`Parity`].
pub fn parity_of_state(mz: i64, n: usize) -> Result<Parity> {
    if !n.is_multiple_of(2) {
        return Err(Error::invalid(format!("N must be even, got {n}")));
    }
    let s = (n / 2) as i64;
    if mz.abs() > s {
        return Err(Error::invalid(format!("M_z = {mz} is outside [-{s}, {s}]")));
    }
    Ok(Parity::of_index((s + mz) as usize))
}

/// The `u(1)` basis `|S, M_z⟩`, `M_z = -S..=S`.
#[derive(Clone, Debug)]
pub struct BasisU1 {
    n: usize,
}

impl BasisU1 {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 || !n.is_multiple_of(2) {
            return Err(Error::invalid(format!("N must be even and >= 2, got {n}")));
        }
        Ok(BasisU1 { n })
    }

    pub fn dim(&self) -> usize {
        self.n + 1
    }

    pub fn mz_values(&self) -> Vec<i64> {
        let s = (self.n / 2) as i64;
        (-s..=s).collect()
    }

    pub fn mz_of(&self, k: usize) -> i64 {
        k as i64 - (self.n / 2) as i64
    }

    /// Full-basis indices belonging to `parity`, ascending in `M_z`.
    pub fn sector(&self, parity: Parity) -> Vec<usize> {
        (parity.offset()..=self.n).step_by(2).collect()
    }

    pub fn sector_dim(&self, parity: Parity) -> usize {
        match parity {
            Parity::Even => self.n / 2 + 1,
            Parity::Odd => self.n / 2,
        }
    }
}

/// One parity sector of the Hamiltonian as a symmetric tridiagonal matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ParityBlock {
    pub parity: Parity,
    pub diag: Vec<f64>,
    pub offdiag: Vec<f64>,
}

impl ParityBlock {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Add this block into a full `(N+1) x (N+1)` matrix.
    pub fn embed_into(&self, full: &mut Array2<f64>) {
        let off = self.parity.offset();
        for (i, &d) in self.diag.iter().enumerate() {
            full[[off + 2 * i, off + 2 * i]] += d;
        }
        for (i, &e) in self.offdiag.iter().enumerate() {
            let (a, b) = (off + 2 * i, off + 2 * i + 2);
            full[[a, b]] += e;
            full[[b, a]] += e;
        }
    }
}

/// `⟨M_z+2| S₊² |M_z⟩`
fn raise2(s: f64, m: f64) -> f64 {
    let c = s * (s + 1.0);
    ((c - m * (m + 1.0)) * (c - (m + 1.0) * (m + 2.0))).max(0.0).sqrt()
}

fn ladder_up(s: f64, m: f64) -> f64 {
    (s * (s + 1.0) - m * (m + 1.0)).max(0.0).sqrt()
}

fn hamiltonian_diag(params: &ModelParams, k: usize) -> f64 {
    let s = params.spin();
    let nf = params.n as f64;
    let kf = k as f64;
    let m = kf - s;
    let sx2 = 0.25 * (nf * (nf / 2.0 + 1.0) - 2.0 * m * m);
    (1.0 - params.xi) * kf + (2.0 * params.xi / s) * (s * s - sx2) + (params.alpha / (2.0 * s)) * kf * (kf + 1.0)
}

pub fn build_block_hamiltonian(params: &ModelParams, parity: Parity) -> Result<ParityBlock> {
    let basis = BasisU1::new(params.n)?;
    let idx = basis.sector(parity);
    if idx.is_empty() {
        return Err(Error::Internal(format!("{parity} sector is empty for N = {}", params.n)));
    }
    let s = params.spin();
    let diag = idx.iter().map(|&k| hamiltonian_diag(params, k)).collect();
    let offdiag =
        idx.iter().take(idx.len() - 1).map(|&k| -(2.0 * params.xi / s) * 0.25 * raise2(s, k as f64 - s)).collect();
    Ok(ParityBlock { parity, diag, offdiag })
}

/// Dense Hamiltonian assembled from the two parity blocks.
pub fn dense_hamiltonian(params: &ModelParams) -> Result<Array2<f64>> {
    let d = params.dim();
    let mut h = Array2::zeros((d, d));
    for parity in [Parity::Even, Parity::Odd] {
        build_block_hamiltonian(params, parity)?.embed_into(&mut h);
    }
    Ok(h)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpinOperatorKind {
    Sz,
    /// `S₊`
    Sp,
    /// `S₋`
    Sm,
    Sx,
    Sy,
    Sx2,
    /// `S + Sz`
    Nop,
    /// `(S + Sz)(S + Sz + 1)`
    NopSq,
    /// `diag((-1)^(S+M_z))`, unitary and Hermitian.
    Parity,
}

impl SpinOperatorKind {
    pub fn is_parity_odd(self) -> bool {
        matches!(self, Self::Sp | Self::Sm | Self::Sx | Self::Sy)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Sz => "sz",
            Self::Sp => "sp",
            Self::Sm => "sm",
            Self::Sx => "sx",
            Self::Sy => "sy",
            Self::Sx2 => "sx2",
            Self::Nop => "n",
            Self::NopSq => "nsq",
            Self::Parity => "parity",
        }
    }
}

impl fmt::Display for SpinOperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SpinOperatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "sz" => Self::Sz,
            "sp" | "s+" | "splus" => Self::Sp,
            "sm" | "s-" | "sminus" => Self::Sm,
            "sx" => Self::Sx,
            "sy" => Self::Sy,
            "sx2" => Self::Sx2,
            "n" | "nop" => Self::Nop,
            "nsq" | "nopsq" => Self::NopSq,
            "parity" | "pi" => Self::Parity,
            other => {
                return Err(Error::invalid(format!(
                    "unknown operator `{other}` (expected sz|sp|sm|sx|sy|sx2|n|nsq|parity)"
                )))
            }
        })
    }
}

/// A spin operator in the full `u(1)` basis, stored as `phase · matrix` with
/// a real `matrix` and `phase ∈ {1, i}` (`imaginary == true` for `Sy`).
#[derive(Clone, Debug)]
pub struct SpinOperator {
    pub kind: SpinOperatorKind,
    pub normalized: bool,
    pub matrix: Array2<f64>,
    pub imaginary: bool,
}

/// Matrix of `kind` in the ascending-`M_z` basis; every entry is divided by
/// `S` when `normalized`.
pub fn build_full_operator(kind: SpinOperatorKind, n: usize, normalized: bool) -> Result<SpinOperator> {
    let basis = BasisU1::new(n)?;
    let d = basis.dim();
    let s = n as f64 / 2.0;
    let mut m = Array2::<f64>::zeros((d, d));
    let mut imaginary = false;
    let mz = |k: usize| k as f64 - s;
    match kind {
        SpinOperatorKind::Sz => (0..d).for_each(|k| m[[k, k]] = mz(k)),
        SpinOperatorKind::Sp => (0..d - 1).for_each(|k| m[[k + 1, k]] = ladder_up(s, mz(k))),
        SpinOperatorKind::Sm => (0..d - 1).for_each(|k| m[[k, k + 1]] = ladder_up(s, mz(k))),
        SpinOperatorKind::Sx => (0..d - 1).for_each(|k| {
            let c = 0.5 * ladder_up(s, mz(k));
            m[[k + 1, k]] = c;
            m[[k, k + 1]] = c;
        }),
        SpinOperatorKind::Sy => {
            // Sy = i (S₋ - S₊) / 2
            imaginary = true;
            (0..d - 1).for_each(|k| {
                let c = 0.5 * ladder_up(s, mz(k));
                m[[k + 1, k]] = -c;
                m[[k, k + 1]] = c;
            });
        }
        SpinOperatorKind::Sx2 => {
            let nf = n as f64;
            for k in 0..d {
                m[[k, k]] = 0.25 * (nf * (nf / 2.0 + 1.0) - 2.0 * mz(k) * mz(k));
                if k + 2 < d {
                    let c = 0.25 * raise2(s, mz(k));
                    m[[k + 2, k]] = c;
                    m[[k, k + 2]] = c;
                }
            }
        }
        SpinOperatorKind::Nop => (0..d).for_each(|k| m[[k, k]] = k as f64),
        SpinOperatorKind::NopSq => (0..d).for_each(|k| m[[k, k]] = (k * (k + 1)) as f64),
        SpinOperatorKind::Parity => (0..d).for_each(|k| m[[k, k]] = Parity::of_index(k).sign() as f64),
    }
    if normalized {
        m.mapv_inplace(|x| x / s);
    }
    Ok(SpinOperator { kind, normalized, matrix: m, imaginary })
}

/// `dH/dξ = (2/S)(S² - Sx²) - (S + Sz)`, independent of `ξ` and `α`.
pub fn xi_derivative_operator(n: usize) -> Result<Array2<f64>> {
    let s = n as f64 / 2.0;
    let sx2 = build_full_operator(SpinOperatorKind::Sx2, n, false)?.matrix;
    let nop = build_full_operator(SpinOperatorKind::Nop, n, false)?.matrix;
    let mut out = sx2.mapv(|x| -2.0 / s * x) - nop;
    for k in 0..=n {
        out[[k, k]] += 2.0 * s;
    }
    Ok(out)
}

/// Energies per site `E/N` of the two excited-state critical lines.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CriticalEnergies {
    /// Separatrix inherited from the standard LMG model, `ε_c1 = ξ`.
    pub standard: f64,
    /// Anharmonicity-induced separatrix, `ε_c2 = 1 + α`.
    pub anharmonic: f64,
}

impl CriticalEnergies {
    pub fn mean_field(params: &ModelParams) -> Self {
        CriticalEnergies { standard: params.xi, anharmonic: 1.0 + params.alpha }
    }

    /// Energies of the two stationary points of the coherent-state energy
    /// surface at finite `N`, i.e. `⟨S,∓S|H|S,∓S⟩/N`. These approach the
    /// mean-field values as `ξ(1 - 1/N)` and `1 + α + (α - ξ)/N`.
    pub fn finite_size(params: &ModelParams) -> Self {
        let nf = params.n as f64;
        CriticalEnergies {
            standard: hamiltonian_diag(params, 0) / nf,
            anharmonic: hamiltonian_diag(params, params.n) / nf,
        }
    }

    /// `(lower, upper)`.
    pub fn ordered(&self) -> (f64, f64) {
        (self.standard.min(self.anharmonic), self.standard.max(self.anharmonic))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_params() {
        assert!(ModelParams::new(3, 0.5, 0.0).is_err());
        assert!(ModelParams::new(0, 0.5, 0.0).is_err());
        assert!(ModelParams::new(4, 1.5, 0.0).is_err());
        assert!(ModelParams::new(4, -0.1, 0.0).is_err());
        assert!(ModelParams::new(4, 0.5, f64::NAN).is_err());
        assert!(ModelParams::new(4, 0.5, 3.0).is_ok());
    }

    #[test]
    fn parity_examples() {
        assert_eq!(parity_of_state(-150, 300).unwrap(), Parity::Even);
        assert_eq!(parity_of_state(-149, 300).unwrap(), Parity::Odd);
        assert_eq!(parity_of_state(150, 300).unwrap(), Parity::Even);
        assert!(parity_of_state(151, 300).is_err());
        assert!(parity_of_state(0, 301).is_err());
    }

    #[test]
    fn sector_dimensions() {
        let b = BasisU1::new(300).unwrap();
        assert_eq!(b.dim(), 301);
        assert_eq!(b.sector(Parity::Even).len(), 151);
        assert_eq!(b.sector(Parity::Odd).len(), 150);
        assert_eq!(b.sector_dim(Parity::Even), 151);
        for p in [Parity::Even, Parity::Odd] {
            let mz: Vec<i64> = b.sector(p).iter().map(|&k| b.mz_of(k)).collect();
            assert!(mz.windows(2).all(|w| w[1] - w[0] == 2));
            assert!(mz.iter().all(|&m| parity_of_state(m, 300).unwrap() == p));
        }
    }

    #[test]
    fn xi_zero_block_is_number_operator() {
        let p = ModelParams::new(2, 0.0, 0.0).unwrap();
        let b = build_block_hamiltonian(&p, Parity::Even).unwrap();
        assert_eq!(b.diag, vec![0.0, 2.0]);
        assert_eq!(b.offdiag, vec![0.0]);
        let b = build_block_hamiltonian(&p, Parity::Odd).unwrap();
        assert_eq!(b.diag, vec![1.0]);
        assert!(b.offdiag.is_empty());
    }

    #[test]
    fn small_operators() {
        let sz = build_full_operator(SpinOperatorKind::Sz, 2, false).unwrap();
        assert_eq!(sz.matrix.diag().to_vec(), vec![-1.0, 0.0, 1.0]);
        let sp = build_full_operator(SpinOperatorKind::Sp, 2, false).unwrap();
        assert!((sp.matrix[[1, 0]] - 2f64.sqrt()).abs() < 1e-15);
        assert!((sp.matrix[[2, 1]] - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(sp.matrix.iter().filter(|x| **x != 0.0).count(), 2);
        let sy = build_full_operator(SpinOperatorKind::Sy, 2, true).unwrap();
        assert!(sy.imaginary);
        assert!((&sy.matrix + &sy.matrix.t()).iter().all(|x| *x == 0.0));
        assert!("bogus".parse::<SpinOperatorKind>().is_err());
    }

    #[test]
    fn critical_energies_converge_to_mean_field() {
        let p = ModelParams::new(300, 0.3, -0.6).unwrap();
        let mf = CriticalEnergies::mean_field(&p);
        let fs = CriticalEnergies::finite_size(&p);
        assert!((fs.standard - 0.3 * (1.0 - 1.0 / 300.0)).abs() < 1e-14);
        assert!((fs.anharmonic - (0.4 + (-0.6 - 0.3) / 300.0)).abs() < 1e-14);
        assert_eq!(mf.ordered(), (0.3, 0.4));
    }
}
