//! Block-wise exact diagonalization and eigenstate selection.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{build_block_hamiltonian, xi_derivative_operator, BasisU1, ModelParams, Parity};
use crate::tridiag::symmetric_tridiagonal_eigen;

/// Merged eigen-decomposition of both parity sectors.
///
/// Eigenvectors are the columns of `vectors`, expressed in the full
/// ascending-`M_z` basis and supported only on their own parity sector. Each
/// is sign-fixed so that its first nonzero component is positive.
#[derive(Clone, Debug)]
pub struct SpectralData {
    pub params: ModelParams,
    pub energies: Vec<f64>,
    pub parities: Vec<Parity>,
    /// Position of each state inside its own parity sector (ascending energy).
    pub sector_index: Vec<usize>,
    pub vectors: Array2<f64>,
    pub gs_energy: f64,
    /// `ε_n = (E_n - E_gs) / N`
    pub eps: Vec<f64>,
    even: Vec<usize>,
    odd: Vec<usize>,
}

struct BlockSolution {
    parity: Parity,
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
}

fn solve_block(params: &ModelParams, parity: Parity) -> Result<BlockSolution> {
    let block = build_block_hamiltonian(params, parity)?;
    let eig = symmetric_tridiagonal_eigen(&block.diag, &block.offdiag).map_err(|iterations| Error::NoConvergence {
        parity,
        n: params.n(),
        iterations,
    })?;
    let mut vectors = eig.vectors;
    for v in vectors.iter_mut() {
        if let Some(first) = v.iter().copied().find(|x| *x != 0.0) {
            if first < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
        }
    }
    Ok(BlockSolution { parity, values: eig.values, vectors })
}

pub fn diagonalize(params: &ModelParams) -> Result<SpectralData> {
    let (even, odd) = rayon::join(|| solve_block(params, Parity::Even), || solve_block(params, Parity::Odd));
    SpectralData::assemble(*params, [even?, odd?])
}

impl SpectralData {
    fn assemble(params: ModelParams, blocks: [BlockSolution; 2]) -> Result<Self> {
        let d = params.dim();
        let mut entries: Vec<(f64, Parity, usize)> =
            blocks.iter().flat_map(|b| b.values.iter().enumerate().map(move |(j, &e)| (e, b.parity, j))).collect();
        if entries.len() != d {
            return Err(Error::Internal(format!("expected {d} eigenpairs, got {}", entries.len())));
        }
        // stable: exact ties keep even parity first
        entries.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

        let mut vectors = Array2::<f64>::zeros((d, d));
        for (col, &(_, parity, j)) in entries.iter().enumerate() {
            let block = &blocks[parity.offset()];
            for (i, &x) in block.vectors[j].iter().enumerate() {
                vectors[[parity.offset() + 2 * i, col]] = x;
            }
        }
        let energies: Vec<f64> = entries.iter().map(|e| e.0).collect();
        let parities: Vec<Parity> = entries.iter().map(|e| e.1).collect();
        let sector_index = entries.iter().map(|e| e.2).collect();
        Self::from_parts(params, energies, parities, sector_index, vectors)
    }

    pub(crate) fn from_parts(
        params: ModelParams,
        energies: Vec<f64>,
        parities: Vec<Parity>,
        sector_index: Vec<usize>,
        vectors: Array2<f64>,
    ) -> Result<Self> {
        let gs_energy = *energies.first().ok_or_else(|| Error::Internal("empty spectrum".into()))?;
        let nf = params.n() as f64;
        let eps = energies.iter().map(|e| (e - gs_energy) / nf).collect();
        let mut even = Vec::new();
        let mut odd = Vec::new();
        for (i, p) in parities.iter().enumerate() {
            match p {
                Parity::Even => even.push(i),
                Parity::Odd => odd.push(i),
            }
        }
        let basis = BasisU1::new(params.n())?;
        if even.len() != basis.sector_dim(Parity::Even) || odd.len() != basis.sector_dim(Parity::Odd) {
            return Err(Error::Internal("parity sector sizes do not match the basis".into()));
        }
        Ok(SpectralData { params, energies, parities, sector_index, vectors, gs_energy, eps, even, odd })
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn n(&self) -> usize {
        self.params.n()
    }

    /// `E_i / N`, the energy scale on which the critical lines `ξ` and
    /// `1 + α` are expressed.
    pub fn energy_per_site(&self, i: usize) -> f64 {
        self.energies[i] / self.params.n() as f64
    }

    /// Global indices of the states of one parity, ascending in energy.
    pub fn sector(&self, parity: Parity) -> &[usize] {
        match parity {
            Parity::Even => &self.even,
            Parity::Odd => &self.odd,
        }
    }

    pub fn global_index(&self, parity: Parity, j: usize) -> Result<usize> {
        let sector = self.sector(parity);
        sector.get(j).copied().ok_or_else(|| {
            Error::invalid(format!("{parity} state index {j} out of range (sector dimension {})", sector.len()))
        })
    }

    pub fn state(&self, i: usize) -> ArrayView1<'_, f64> {
        self.vectors.column(i)
    }

    /// Components `⟨ψ_i|φ⟩` of `phi` (full basis) in this eigenbasis.
    pub fn overlaps(&self, phi: ArrayView1<'_, f64>) -> Array1<f64> {
        self.vectors.t().dot(&phi)
    }

    /// `Vᵀ A V` for an operator given in the full `u(1)` basis.
    pub fn to_eigenbasis(&self, op: &Array2<f64>) -> Array2<f64> {
        self.vectors.t().dot(&op.dot(&self.vectors))
    }

    pub fn expectation(&self, op: &Array2<f64>, i: usize) -> f64 {
        let v = self.state(i);
        v.dot(&op.dot(&v))
    }

    /// Global index chosen by `sel`.
    pub fn select_index(&self, sel: &StateSelector) -> Result<usize> {
        match *sel {
            StateSelector::Ground => Ok(self.even[0]),
            StateSelector::HighestEven => Ok(*self.even.last().expect("even sector is never empty")),
            StateSelector::Highest => Ok(self.dim() - 1),
            StateSelector::Index { parity, j } => self.global_index(parity, j),
            StateSelector::NearestEps { parity, eps } => self.nearest_in_sector(parity, eps, |i| self.eps[i]),
            StateSelector::NearestEnergyPerSite { parity, energy } => {
                self.nearest_in_sector(parity, energy, |i| self.energy_per_site(i))
            }
        }
    }

    fn nearest_in_sector(&self, parity: Parity, target: f64, key: impl Fn(usize) -> f64) -> Result<usize> {
        if !target.is_finite() {
            return Err(Error::invalid(format!("target energy must be finite, got {target}")));
        }
        self.sector(parity)
            .iter()
            .copied()
            .min_by(|&a, &b| (key(a) - target).abs().total_cmp(&(key(b) - target).abs()))
            .ok_or_else(|| Error::Internal(format!("{parity} sector is empty")))
    }

    /// Position inside the sector whose energy per site is nearest `energy`.
    pub fn nearest_sector_position(&self, parity: Parity, energy: f64) -> Result<usize> {
        let i = self.select_index(&StateSelector::NearestEnergyPerSite { parity, energy })?;
        Ok(self.sector_index[i])
    }
}

/// Which eigenstate to use as an initial or reference state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum StateSelector {
    /// Lowest even-parity state. The exact ground state lies in the even
    /// sector; in the degenerate broken phase its odd partner can land below
    /// it by rounding, so the even sector is used explicitly.
    Ground,
    /// Most excited even-parity state.
    HighestEven,
    /// Most excited state of either parity.
    Highest,
    /// `j`-th state (ascending energy) of the given parity.
    Index { parity: Parity, j: usize },
    /// State of the given parity whose `ε = (E - E_gs)/N` is nearest `eps`.
    NearestEps { parity: Parity, eps: f64 },
    /// State of the given parity whose `E/N` is nearest `energy`.
    NearestEnergyPerSite { parity: Parity, energy: f64 },
}

impl std::fmt::Display for StateSelector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StateSelector::Ground => write!(f, "ground"),
            StateSelector::HighestEven => write!(f, "highest-even"),
            StateSelector::Highest => write!(f, "highest"),
            StateSelector::Index { parity, j } => write!(f, "{parity}:{j}"),
            StateSelector::NearestEps { parity, eps } => write!(f, "{parity}:near-eps:{eps}"),
            StateSelector::NearestEnergyPerSite { parity, energy } => {
                write!(f, "{parity}:near-energy:{energy}")
            }
        }
    }
}

/// `(vector, energy)` of the selected state.
pub fn select_state(spec: &SpectralData, sel: &StateSelector) -> Result<(Array1<f64>, f64)> {
    let i = spec.select_index(sel)?;
    Ok((spec.state(i).to_owned(), spec.energies[i]))
}

/// Squared magnitude, so the participation ratio accepts real and complex
/// amplitudes alike.
pub trait Amplitude {
    fn prob(&self) -> f64;
}

impl Amplitude for f64 {
    fn prob(&self) -> f64 {
        self * self
    }
}

impl Amplitude for Complex64 {
    fn prob(&self) -> f64 {
        self.norm_sqr()
    }
}

/// `P(ψ) = 1 / Σ_m |a_m|⁴` for a normalized vector of components.
pub fn participation_ratio<T: Amplitude>(components: &[T]) -> Result<f64> {
    let norm: f64 = components.iter().map(Amplitude::prob).sum();
    if components.is_empty() || (norm - 1.0).abs() > 1e-10 {
        return Err(Error::invalid(format!("participation ratio needs a normalized vector (squared norm {norm})")));
    }
    let ipr: f64 = components.iter().map(|a| a.prob() * a.prob()).sum();
    Ok(1.0 / ipr)
}

/// Hellmann–Feynman slope `⟨ψ| dH/dξ |ψ⟩ / N` of the selected state.
pub fn hf_slope(params: &ModelParams, sel: &StateSelector) -> Result<f64> {
    let spec = diagonalize(params)?;
    hf_slope_in(&spec, sel)
}

/// Same as [`hf_slope`] for an existing decomposition.
pub fn hf_slope_in(spec: &SpectralData, sel: &StateSelector) -> Result<f64> {
    let i = spec.select_index(sel)?;
    let dh = xi_derivative_operator(spec.n())?;
    Ok(spec.expectation(&dh, i) / spec.n() as f64)
}

/// Max over columns of `|‖v‖ - 1|`.
pub fn max_norm_deviation(spec: &SpectralData) -> f64 {
    spec.vectors.axis_iter(Axis(1)).map(|v| (v.dot(&v).sqrt() - 1.0).abs()).fold(0.0, f64::max)
}
