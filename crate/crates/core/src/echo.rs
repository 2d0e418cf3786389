//! Loschmidt echoes of eigenstates of `Ĥ(ξ, α)` under the perturbed
//! Hamiltonian `Ĥ(ξ + δξ, α + δα)`.

use ndarray::Array1;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, Parity};
use crate::quench::TimeSeries;
use crate::spectra::{diagonalize, SpectralData};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EchoSpec {
    pub params: ModelParams,
    pub delta: f64,
    /// Perturbation of `α`; zero unless explicitly requested.
    #[serde(default)]
    pub delta_alpha: f64,
    pub parity: Parity,
    pub j: usize,
}

impl EchoSpec {
    pub fn new(params: ModelParams, delta: f64, parity: Parity, j: usize) -> Self {
        EchoSpec { params, delta, delta_alpha: 0.0, parity, j }
    }

    pub fn perturbed_params(&self) -> Result<ModelParams> {
        perturb(&self.params, self.delta, self.delta_alpha)
    }
}

fn perturb(params: &ModelParams, delta: f64, delta_alpha: f64) -> Result<ModelParams> {
    let xi = params.xi() + delta;
    if !(0.0..=1.0).contains(&xi) {
        return Err(Error::invalid(format!("perturbed ξ + δ = {xi} is outside [0, 1]")));
    }
    ModelParams::new(params.n(), xi, params.alpha() + delta_alpha)
}

/// Relative gap below which two perturbed levels of the same parity count as
/// degenerate.
pub const DEGENERACY_TOL: f64 = 1e-9;

/// Unperturbed and perturbed decompositions, shared by every echo of one
/// configuration.
#[derive(Clone, Debug)]
pub struct EchoSystem {
    pub unperturbed: SpectralData,
    pub perturbed: SpectralData,
    degenerate: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EchoAverage {
    pub parity: Parity,
    pub j: usize,
    pub energy: f64,
    pub eps: f64,
    pub m_bar: f64,
    /// The perturbed sector contains exactly degenerate levels, which makes
    /// `m_bar` depend on the eigensolver's choice of basis.
    pub degenerate: bool,
}

impl EchoSystem {
    pub fn new(params: &ModelParams, delta: f64, delta_alpha: f64) -> Result<Self> {
        let perturbed_params = perturb(params, delta, delta_alpha)?;
        let (a, b) = rayon::join(|| diagonalize(params), || diagonalize(&perturbed_params));
        let perturbed = b?;
        let scale = perturbed.energies.iter().fold(0.0f64, |m, e| m.max(e.abs())).max(1.0);
        let mut degenerate = vec![false; perturbed.dim()];
        for parity in [Parity::Even, Parity::Odd] {
            for w in perturbed.sector(parity).windows(2) {
                if perturbed.energies[w[1]] - perturbed.energies[w[0]] < DEGENERACY_TOL * scale {
                    degenerate[w[0]] = true;
                    degenerate[w[1]] = true;
                }
            }
        }
        Ok(EchoSystem { unperturbed: a?, perturbed, degenerate })
    }

    pub fn from_spec(spec: &EchoSpec) -> Result<Self> {
        EchoSystem::new(&spec.params, spec.delta, spec.delta_alpha)
    }

    pub fn sector_has_degeneracy(&self, parity: Parity) -> bool {
        self.perturbed.sector(parity).iter().any(|&i| self.degenerate[i])
    }

    /// `d_k = ⟨φ_k(ξ+δ)|ψ_j(ξ)⟩` over the perturbed states `k` of the same parity.
    fn unperturbed_in_perturbed(&self, parity: Parity, j: usize) -> Result<(Vec<usize>, Array1<f64>)> {
        let i = self.unperturbed.global_index(parity, j)?;
        let ks = self.perturbed.sector(parity).to_vec();
        let psi = self.unperturbed.state(i);
        let d = ks.iter().map(|&k| self.perturbed.state(k).dot(&psi)).collect();
        Ok((ks, d))
    }

    /// `M_j(t) = |⟨ψ_j| e^{iĤ(ξ+δ)t} |ψ_j⟩|²`.
    pub fn echo(&self, parity: Parity, j: usize, times: &[f64]) -> Result<TimeSeries> {
        if times.is_empty() {
            return Err(Error::invalid("time grid is empty"));
        }
        let (ks, d) = self.unperturbed_in_perturbed(parity, j)?;
        let terms: Vec<(f64, f64)> =
            ks.iter().zip(d.iter()).map(|(&k, c)| (self.perturbed.energies[k], c * c)).collect();
        let e_ref = terms.iter().map(|(e, w)| e * w).sum::<f64>();
        let values = times
            .par_iter()
            .map(|&t| {
                if t == 0.0 {
                    return 1.0;
                }
                let a: Complex64 = terms.iter().map(|&(e, w)| Complex64::from_polar(w, (e - e_ref) * t)).sum();
                a.norm_sqr().min(1.0)
            })
            .collect();
        TimeSeries::new(times.to_vec(), values)
    }

    /// `lim_{T→∞} (1/T) ∫ M_j(t) dt = Σ_k |⟨φ_k(ξ+δ)|ψ_j(ξ)⟩|⁴`, the inverse
    /// participation ratio of the unperturbed state in the perturbed basis.
    pub fn time_average(&self, parity: Parity, j: usize) -> Result<f64> {
        let (_, d) = self.unperturbed_in_perturbed(parity, j)?;
        Ok(d.iter().map(|c| c.powi(4)).sum())
    }

    /// `Σ_k |⟨ψ_k(ξ)|φ_j(ξ+δ)⟩|⁴`: the `j`-th perturbed eigenstate expanded
    /// in the unperturbed basis. Differs from [`Self::time_average`] at
    /// finite `δ` because the overlap matrix is not symmetric.
    pub fn perturbed_state_ipr(&self, parity: Parity, j: usize) -> Result<f64> {
        let i = self.perturbed.global_index(parity, j)?;
        let phi = self.perturbed.state(i);
        Ok(self.unperturbed.sector(parity).iter().map(|&k| self.unperturbed.state(k).dot(&phi).powi(4)).sum())
    }

    /// Time-averaged echo for every unperturbed eigenstate of `parity`.
    pub fn averages(&self, parity: Parity) -> Result<Vec<EchoAverage>> {
        let flagged = self.sector_has_degeneracy(parity);
        self.unperturbed
            .sector(parity)
            .par_iter()
            .enumerate()
            .map(|(j, &i)| {
                Ok(EchoAverage {
                    parity,
                    j,
                    energy: self.unperturbed.energies[i],
                    eps: self.unperturbed.eps[i],
                    m_bar: self.time_average(parity, j)?,
                    degenerate: flagged,
                })
            })
            .collect()
    }
}

pub fn loschmidt_echo(spec: &EchoSpec, times: &[f64]) -> Result<TimeSeries> {
    EchoSystem::from_spec(spec)?.echo(spec.parity, spec.j, times)
}

pub fn time_averaged_echo(spec: &EchoSpec) -> Result<f64> {
    EchoSystem::from_spec(spec)?.time_average(spec.parity, spec.j)
}
