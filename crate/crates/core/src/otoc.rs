//! Microcanonical out-of-time-order correlators in Hamiltonian eigenstates.
//!
//! For an eigenstate `|n⟩` and operators `W`, `V`:
//!
//! ```text
//! F_n(t) = Re ⟨n| W†(t) V† W(t) V |n⟩,     W(t) = e^{iHt} W e^{-iHt}
//! C_n(t) = ⟨n| [W(t),V]† [W(t),V] |n⟩ = A_n(t) - 2 F_n(t)
//! A_n(t) = ⟨n| W†(t) V† V W(t) |n⟩ + ⟨n| V† W†(t) W(t) V |n⟩
//! ```
//!
//! Both operators are rotated into the eigenbasis once. In that basis
//! `W(t)_ab = e^{i(E_a - E_b)t} W_ab`, so each time point costs two
//! matrix-vector products.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{build_full_operator, ModelParams, Parity, SpinOperator, SpinOperatorKind};
use crate::spectra::{diagonalize, SpectralData};

/// Terms whose total frequency `E_n - E_a + E_b - E_c` is below this
/// fraction of `max |E|` count as stationary in the exact steady state.
pub const ZERO_FREQUENCY_TOL: f64 = 1e-9;

/// Operator in the eigenbasis, `phase · matrix` with `phase ∈ {1, i}`.
#[derive(Clone, Debug)]
pub struct EigenOperator {
    pub matrix: Array2<f64>,
    pub imaginary: bool,
}

impl EigenOperator {
    pub fn new(spec: &SpectralData, op: &SpinOperator) -> Self {
        EigenOperator { matrix: spec.to_eigenbasis(&op.matrix), imaginary: op.imaginary }
    }

    fn phase(&self) -> Complex64 {
        if self.imaginary {
            Complex64::i()
        } else {
            Complex64::new(1.0, 0.0)
        }
    }

    /// `phase · M · y` for a complex vector split into real and imaginary parts.
    fn apply(&self, re: &Array1<f64>, im: &Array1<f64>) -> (Array1<f64>, Array1<f64>) {
        let (r, i) = (self.matrix.dot(re), self.matrix.dot(im));
        if self.imaginary {
            (-i, r)
        } else {
            (r, i)
        }
    }

    fn column(&self, n: usize) -> Vec<Complex64> {
        let ph = self.phase();
        self.matrix.column(n).iter().map(|&x| ph * x).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Correlators {
    pub f: f64,
    pub a: f64,
    pub c: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OtocSeries {
    pub times: Vec<f64>,
    pub f_values: Vec<f64>,
    pub c_values: Option<Vec<f64>>,
    pub a_values: Option<Vec<f64>>,
    pub steady: Option<f64>,
}

/// A decomposition plus the two rotated operators, shared by every state
/// and time point.
#[derive(Clone, Debug)]
pub struct OtocSystem {
    pub spectrum: SpectralData,
    pub w: EigenOperator,
    pub v: EigenOperator,
    shifted: Vec<f64>,
}

impl OtocSystem {
    pub fn new(spectrum: SpectralData, w: &SpinOperator, v: &SpinOperator) -> Result<Self> {
        let d = spectrum.dim();
        if w.matrix.dim() != (d, d) || v.matrix.dim() != (d, d) {
            return Err(Error::invalid("operator dimension does not match the spectrum"));
        }
        let (ew, ev) = rayon::join(|| EigenOperator::new(&spectrum, w), || EigenOperator::new(&spectrum, v));
        let mid = 0.5 * (spectrum.energies[0] + spectrum.energies[d - 1]);
        let shifted = spectrum.energies.iter().map(|e| e - mid).collect();
        Ok(OtocSystem { spectrum, w: ew, v: ev, shifted })
    }

    pub fn from_kinds(
        spectrum: SpectralData,
        w: SpinOperatorKind,
        v: SpinOperatorKind,
        normalized: bool,
    ) -> Result<Self> {
        let n = spectrum.n();
        let wo = build_full_operator(w, n, normalized)?;
        let vo = build_full_operator(v, n, normalized)?;
        OtocSystem::new(spectrum, &wo, &vo)
    }

    fn check_state(&self, n: usize) -> Result<()> {
        if n >= self.spectrum.dim() {
            return Err(Error::invalid(format!("state {n} out of range (dimension {})", self.spectrum.dim())));
        }
        Ok(())
    }

    /// `W(t) y` with `y` given as real/imaginary parts.
    fn evolve_w(&self, t: f64, re: &[f64], im: &[f64]) -> Vec<Complex64> {
        let d = re.len();
        let mut yr = Array1::zeros(d);
        let mut yi = Array1::zeros(d);
        for b in 0..d {
            let z = Complex64::new(re[b], im[b]) * Complex64::from_polar(1.0, -self.shifted[b] * t);
            yr[b] = z.re;
            yi[b] = z.im;
        }
        let (r, i) = self.w.apply(&yr, &yi);
        (0..d).map(|a| Complex64::new(r[a], i[a]) * Complex64::from_polar(1.0, self.shifted[a] * t)).collect()
    }

    fn apply_v(&self, y: &[Complex64]) -> Vec<Complex64> {
        let re = Array1::from_iter(y.iter().map(|z| z.re));
        let im = Array1::from_iter(y.iter().map(|z| z.im));
        let (r, i) = self.v.apply(&re, &im);
        r.iter().zip(i.iter()).map(|(&a, &b)| Complex64::new(a, b)).collect()
    }

    /// `F`, `A` and `C` for global eigenstate index `n` at time `t`.
    pub fn correlators(&self, n: usize, t: f64) -> Result<Correlators> {
        self.check_state(n)?;
        let x = self.v.column(n); // V|n⟩
        let xr: Vec<f64> = x.iter().map(|z| z.re).collect();
        let xi: Vec<f64> = x.iter().map(|z| z.im).collect();
        let p = self.evolve_w(t, &xr, &xi); // W(t) V |n⟩
        let d = self.spectrum.dim();
        let mut er = vec![0.0; d];
        er[n] = 1.0;
        let w_n = self.evolve_w(t, &er, &vec![0.0; d]); // W(t) |n⟩
        let q = self.apply_v(&w_n); // V W(t) |n⟩
        let overlap: Complex64 = q.iter().zip(&p).map(|(a, b)| a.conj() * b).sum();
        let pp: f64 = p.iter().map(|z| z.norm_sqr()).sum();
        let qq: f64 = q.iter().map(|z| z.norm_sqr()).sum();
        let c: f64 = p.iter().zip(&q).map(|(a, b)| (a - b).norm_sqr()).sum();
        Ok(Correlators { f: overlap.re, a: pp + qq, c })
    }

    pub fn series(&self, n: usize, times: &[f64], with_commutator: bool) -> Result<OtocSeries> {
        self.check_state(n)?;
        if times.is_empty() {
            return Err(Error::invalid("time grid is empty"));
        }
        let vals = times.par_iter().map(|&t| self.correlators(n, t)).collect::<Result<Vec<_>>>()?;
        if let Some(bad) = vals.iter().find(|c| !(c.f.is_finite() && c.a.is_finite() && c.c.is_finite())) {
            return Err(Error::Internal(format!("non-finite OTOC value {bad:?}")));
        }
        Ok(OtocSeries {
            times: times.to_vec(),
            f_values: vals.iter().map(|c| c.f).collect(),
            c_values: with_commutator.then(|| vals.iter().map(|c| c.c).collect()),
            a_values: with_commutator.then(|| vals.iter().map(|c| c.a).collect()),
            steady: None,
        })
    }

    /// `(1/T) ∫₀ᵀ F_n(t) dt` by the midpoint rule on `samples` points.
    pub fn steady_numeric(&self, n: usize, horizon: f64, samples: usize) -> Result<f64> {
        self.check_state(n)?;
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid(format!("horizon must be positive, got {horizon}")));
        }
        if samples == 0 {
            return Err(Error::invalid("at least one sample is required"));
        }
        let dt = horizon / samples as f64;
        let sum = (0..samples)
            .into_par_iter()
            .map(|k| self.correlators(n, (k as f64 + 0.5) * dt).map(|c| c.f))
            .collect::<Result<Vec<_>>>()?
            .iter()
            .sum::<f64>();
        Ok(sum / samples as f64)
    }

    /// Infinite-time average of `F_n(t)`: the sum over all index triples
    /// `(a, b, c)` whose frequency `E_n - E_a + E_b - E_c` vanishes within
    /// `ZERO_FREQUENCY_TOL · max|E|`.
    pub fn steady_exact(&self, n: usize) -> Result<f64> {
        self.check_state(n)?;
        let e = &self.spectrum.energies;
        let d = e.len();
        let tol = ZERO_FREQUENCY_TOL * e.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let wm = &self.w.matrix;
        let vm = &self.v.matrix;
        // the phase factors of W and V cancel in W† V† W V
        let mut total = 0.0;
        for a in 0..d {
            let wan = wm[[a, n]];
            if wan == 0.0 {
                continue;
            }
            let shift = e[a] - e[n];
            let mut lo = 0;
            let mut hi = 0;
            let mut inner = 0.0;
            for b in 0..d {
                let vba = vm[[b, a]];
                let target = e[b] - shift;
                while lo < d && e[lo] < target - tol {
                    lo += 1;
                }
                if hi < lo {
                    hi = lo;
                }
                while hi < d && e[hi] <= target + tol {
                    hi += 1;
                }
                if vba == 0.0 {
                    continue;
                }
                let s: f64 = (lo..hi).map(|c| wm[[b, c]] * vm[[c, n]]).sum();
                inner += vba * s;
            }
            total += wan * inner;
        }
        Ok(total)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OtocRequest {
    pub params: ModelParams,
    pub parity: Parity,
    pub j: usize,
    pub w: SpinOperatorKind,
    pub v: SpinOperatorKind,
    /// Divide both operators by `S`.
    pub normalized: bool,
    pub times: Vec<f64>,
}

impl OtocRequest {
    /// Default pair `W = S₊/S`, `V = S₋/S`.
    pub fn new(params: ModelParams, parity: Parity, j: usize, times: Vec<f64>) -> Self {
        OtocRequest { params, parity, j, w: SpinOperatorKind::Sp, v: SpinOperatorKind::Sm, normalized: true, times }
    }

    fn system(&self) -> Result<(OtocSystem, usize)> {
        let spec = diagonalize(&self.params)?;
        let n = spec.global_index(self.parity, self.j)?;
        Ok((OtocSystem::from_kinds(spec, self.w, self.v, self.normalized)?, n))
    }
}

pub fn microcanonical_otoc(req: &OtocRequest) -> Result<OtocSeries> {
    let (sys, n) = req.system()?;
    sys.series(n, &req.times, false)
}

pub fn squared_commutator(req: &OtocRequest) -> Result<OtocSeries> {
    let (sys, n) = req.system()?;
    sys.series(n, &req.times, true)
}

pub fn steady_state_otoc(req: &OtocRequest, horizon: f64, samples: usize) -> Result<f64> {
    let (sys, n) = req.system()?;
    sys.steady_numeric(n, horizon, samples)
}

pub fn steady_state_otoc_exact(req: &OtocRequest) -> Result<f64> {
    let (sys, n) = req.system()?;
    sys.steady_exact(n)
}

/// Steady-state OTOC of every state of `parity`, as `(sector position, F̄)`.
pub fn steady_state_profile(sys: &OtocSystem, parity: Parity) -> Result<Vec<(usize, f64)>> {
    sys.spectrum.sector(parity).par_iter().enumerate().map(|(j, &n)| sys.steady_exact(n).map(|f| (j, f))).collect()
}
