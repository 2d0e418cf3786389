//! Acceptance checks, one verdict line per criterion.
//!
//! Runs as a plain binary so every criterion is evaluated and reported even
//! when an earlier one fails. The process exits non-zero on a failed
//! criterion only when `ALMG_ACCEPTANCE_STRICT=1` is set.

use std::time::Instant;

use almg_core::echo::EchoSystem;
use almg_core::model::{build_full_operator, CriticalEnergies, SpinOperatorKind as K};
use almg_core::quench::{
    critical_xi_from_ground, critical_xi_from_highest, linspace, quench_coefficients_in, CriticalQuench,
};
use almg_core::spectra::hf_slope_in;
use almg_core::{
    dense_hamiltonian, diagonalize, survival_probability, ModelParams, OtocSystem, Parity, SpectralData, StateSelector,
};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

// ---------------------------------------------------------------- helpers

fn spectrum(n: usize, xi: f64, alpha: f64) -> SpectralData {
    diagonalize(&ModelParams::new(n, xi, alpha).unwrap()).unwrap()
}

/// Even-sector profile of a weight vector indexed by global state.
fn even_profile(spec: &SpectralData, values: &[f64]) -> Vec<f64> {
    spec.sector(Parity::Even).iter().map(|&i| values[i]).collect()
}

fn is_local_max(w: &[f64], j: usize) -> bool {
    j > 0 && j + 1 < w.len() && w[j] > w[j - 1] && w[j] > w[j + 1]
}

fn local_maxima(w: &[f64]) -> Vec<usize> {
    (1..w.len().saturating_sub(1)).filter(|&j| is_local_max(w, j)).collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    assert!(!v.is_empty());
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn complex_vec(v: ndarray::ArrayView1<'_, f64>) -> DVector<Complex64> {
    DVector::from_iterator(v.len(), v.iter().map(|x| Complex64::new(*x, 0.0)))
}

fn dense_h(params: &ModelParams) -> DMatrix<f64> {
    let h = dense_hamiltonian(params).unwrap();
    DMatrix::from_fn(h.nrows(), h.ncols(), |i, j| h[[i, j]])
}

/// The three critical quenches of the survival-probability study at N = 300:
/// (label, α, ξ₁, initial state, tangent result).
fn critical_quenches(n: usize) -> Vec<(&'static str, f64, f64, StateSelector, CriticalQuench)> {
    vec![
        ("α=0 ground ξ₁=0.6", 0.0, 0.6, StateSelector::Ground, critical_xi_from_ground(0.0, 0.6, n).unwrap()),
        ("α=-0.6 ground ξ₁=0.6", -0.6, 0.6, StateSelector::Ground, critical_xi_from_ground(-0.6, 0.6, n).unwrap()),
        (
            "α=-0.6 highest ξ₁=0.7",
            -0.6,
            0.7,
            StateSelector::HighestEven,
            critical_xi_from_highest(-0.6, 0.7, n, None).unwrap(),
        ),
    ]
}

// ---------------------------------------------------------------- criteria

fn c1_analytic_spectrum() -> Verdict {
    let mut worst = 0.0f64;
    for &n in &[2usize, 50, 300] {
        for &alpha in &[0.0, -0.6, 0.5, -1.3] {
            let s = spectrum(n, 0.0, alpha);
            let mut want: Vec<f64> = (0..=n).map(|k| k as f64 + alpha / n as f64 * (k * (k + 1)) as f64).collect();
            want.sort_by(f64::total_cmp);
            for (a, b) in s.energies.iter().zip(&want) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    let start = Instant::now();
    spectrum(300, 0.0, -0.6);
    let secs = start.elapsed().as_secs_f64();
    verdict(worst <= 1e-12 && secs < 1.0, format!("max |ΔE| = {worst:.2e} (≤ 1e-12), N=300 in {secs:.3} s (< 1 s)"))
}

fn c2_critical_from_ground() -> Verdict {
    let c = critical_xi_from_ground(0.0, 0.6, 300).unwrap();
    verdict((c.xi_c - 0.30).abs() <= 0.01, format!("ξ_c = {:.5} (0.30 ± 0.01)", c.xi_c))
}

fn c3_critical_from_highest() -> Verdict {
    let c = critical_xi_from_highest(-0.6, 0.7, 300, Some(0.4)).unwrap();
    verdict((c.xi_c - 0.255).abs() <= 0.005, format!("ξ_c = {:.5} (0.255 ± 0.005)", c.xi_c))
}

fn c4_survival_collapse() -> Verdict {
    let n = 300;
    let times = linspace(0.0, 200.0, 4001);
    let mean_f = |alpha: f64, xi1: f64, sel: &StateSelector, xi2: f64| {
        let pre = spectrum(n, xi1, alpha);
        let post = spectrum(n, xi2, alpha);
        let ldos = quench_coefficients_in(&pre, &post, sel).unwrap();
        survival_probability(&ldos, &times).unwrap().mean_over(20.0, 200.0).unwrap()
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for (label, alpha, xi1, sel, c) in critical_quenches(n) {
        let at = mean_f(alpha, xi1, &sel, c.xi_c);
        let below = mean_f(alpha, xi1, &sel, c.xi_c - 0.1);
        let above = mean_f(alpha, xi1, &sel, c.xi_c + 0.1);
        let ok = at <= 0.05 && 5.0 * at <= below.min(above);
        pass &= ok;
        parts.push(format!(
            "{label}: ⟨F⟩(ξ_c={:.4}) = {at:.4}, ⟨F⟩(ξ_c-0.1) = {below:.4}, ⟨F⟩(ξ_c+0.1) = {above:.4} [{}]",
            c.xi_c,
            if ok { "ok" } else { "fails" }
        ));
    }
    verdict(pass, parts.join("; "))
}

/// Weight at `j` is a nonzero local minimum lying below both flanking local maxima.
fn ldos_dip(w: &[f64], j: usize) -> (bool, String) {
    let maxima = local_maxima(w);
    let left = maxima.iter().rev().find(|&&m| m < j).copied();
    let right = maxima.iter().find(|&&m| m > j).copied();
    let is_min = j > 0 && j + 1 < w.len() && w[j] <= w[j - 1] && w[j] <= w[j + 1];
    let below = matches!((left, right), (Some(l), Some(r)) if w[j] < w[l] && w[j] < w[r]);
    let ok = w[j] > 0.0 && is_min && below;
    let lowest = (j.saturating_sub(5)..(j + 6).min(w.len())).min_by(|&a, &b| w[a].total_cmp(&w[b])).unwrap();
    (
        ok,
        format!(
            "j*={j} w={:.3e} local-min={is_min} flanks={left:?}/{right:?} below-flanks={below} (lowest within ±5: {lowest})",
            w[j]
        ),
    )
}

fn c5_ldos_structure() -> Verdict {
    let n = 300;
    let mut pass = true;
    let mut parts = Vec::new();
    let mut diag = Vec::new();
    for (label, alpha, xi1, sel, c) in critical_quenches(n) {
        let pre = spectrum(n, xi1, alpha);
        let post = spectrum(n, c.xi_c, alpha);
        let ldos = quench_coefficients_in(&pre, &post, &sel).unwrap();
        let w = even_profile(&post, &ldos.weights);
        let j = post.nearest_sector_position(Parity::Even, c.line_energy).unwrap();
        let (ok, text) = ldos_dip(&w, j);
        pass &= ok;
        parts.push(format!("{label}: {text} [{}]", if ok { "ok" } else { "fails" }));
        let fs = CriticalEnergies::finite_size(&post.params);
        let target = if matches!(sel, StateSelector::Ground) { fs.standard } else { fs.anharmonic };
        let jf = post.nearest_sector_position(Parity::Even, target).unwrap();
        diag.push(format!("j={jf} {}", if ldos_dip(&w, jf).0 { "ok" } else { "fails" }));
    }
    verdict(pass, format!("{}; finite-size critical energies: {}", parts.join("; "), diag.join(", ")))
}

fn c6_fourier_identity() -> Verdict {
    let mut worst = 0.0f64;
    for &(n, alpha, xi1, xi2, sel) in &[
        (100usize, 0.0, 0.6, 0.3, StateSelector::Ground),
        (100, -0.6, 0.7, 0.255, StateSelector::HighestEven),
        (60, -0.6, 0.6, 0.24, StateSelector::Ground),
    ] {
        let pre = spectrum(n, xi1, alpha);
        let post_params = ModelParams::new(n, xi2, alpha).unwrap();
        let post = diagonalize(&post_params).unwrap();
        let ldos = quench_coefficients_in(&pre, &post, &sel).unwrap();
        let times = linspace(0.0, 30.0, 200);
        let f = survival_probability(&ldos, &times).unwrap();

        // direct propagation: Taylor steps of e^{-i(H - c)τ}
        let h = dense_h(&post_params);
        let c = 0.5 * (h.diagonal().min() + h.diagonal().max());
        let hc = (h - DMatrix::identity(n + 1, n + 1) * c).map(|x| Complex64::new(x, 0.0));
        let norm = (0..=n).map(|i| hc.row(i).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max);
        let psi0 = complex_vec(pre.state(pre.select_index(&sel).unwrap()));
        let mut psi = psi0.clone();
        let mut t_prev = 0.0;
        for (k, &t) in times.iter().enumerate() {
            let steps = ((t - t_prev) * norm / 0.5).ceil().max(1.0) as usize;
            let tau = (t - t_prev) / steps as f64;
            for _ in 0..steps {
                let mut term = psi.clone();
                for m in 1..40 {
                    term = (&hc * &term) * Complex64::new(0.0, -tau / m as f64);
                    psi += &term;
                    if term.norm() < 1e-18 {
                        break;
                    }
                }
            }
            t_prev = t;
            worst = worst.max((psi0.dotc(&psi).norm_sqr() - f.values[k]).abs());
        }
    }
    verdict(worst <= 1e-10, format!("max |F_phase - F_direct| = {worst:.2e} (≤ 1e-10)"))
}

fn c7_hellmann_feynman() -> Verdict {
    let n = 300;
    let h = 1e-4;
    let mut worst = 0.0f64;
    let mut worst_fine = 0.0f64;
    let mut at = String::new();
    for alpha in [0.0, -0.6] {
        for k in 1..=9 {
            let xi = k as f64 / 10.0;
            let centre = spectrum(n, xi, alpha);
            let shifted = |d: f64| (spectrum(n, xi + d, alpha), spectrum(n, xi - d, alpha));
            let (plus, minus) = shifted(h);
            let (plus_f, minus_f) = shifted(h / 10.0);
            for sel in [StateSelector::Ground, StateSelector::HighestEven] {
                let e = |s: &SpectralData| s.energy_per_site(s.select_index(&sel).unwrap());
                let fd = (e(&plus) - e(&minus)) / (2.0 * h);
                let hf = hf_slope_in(&centre, &sel).unwrap();
                if (fd - hf).abs() > worst {
                    worst = (fd - hf).abs();
                    at = format!("ξ={xi} α={alpha} {sel}");
                }
                let fd_fine = (e(&plus_f) - e(&minus_f)) / (0.2 * h);
                worst_fine = worst_fine.max((fd_fine - hf).abs());
            }
        }
    }
    // the step-1e-4 difference carries an O(h²) truncation error; the finer
    // step shows whether the slope itself or the difference is off
    verdict(worst <= 1e-6, format!("max |HF - FD| = {worst:.2e} at {at} (≤ 1e-6); with step 1e-5: {worst_fine:.2e}"))
}

fn c8_echo_identity() -> Verdict {
    let params = ModelParams::new(300, 0.3, -0.6).unwrap();
    let sys = EchoSystem::new(&params, 0.01, 0.0).unwrap();
    let horizon = 1e4;
    let samples = 100_000;
    let dt = horizon / samples as f64;
    let times: Vec<f64> = (0..samples).map(|k| (k as f64 + 0.5) * dt).collect();
    let mut rng = rand::rngs::StdRng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    let mut picked = Vec::new();
    for _ in 0..10 {
        let parity = if rng.gen_bool(0.5) { Parity::Even } else { Parity::Odd };
        let j = rng.gen_range(0..sys.unperturbed.sector(parity).len());
        picked.push(format!("{parity}:{j}"));
        let m = sys.echo(parity, j, &times).unwrap();
        let numeric = m.values.iter().sum::<f64>() / samples as f64;
        worst = worst.max((numeric - sys.time_average(parity, j).unwrap()).abs());
    }
    verdict(worst <= 2e-3, format!("max |M̄_numeric - Σ|c|⁴| = {worst:.2e} (≤ 2e-3) over {}", picked.join(",")))
}

fn c9_echo_marker() -> Verdict {
    let params = ModelParams::new(300, 0.3, -0.6).unwrap();
    let sys = EchoSystem::new(&params, 0.01, 0.0).unwrap();
    let m: Vec<f64> = sys.averages(Parity::Even).unwrap().iter().map(|a| a.m_bar).collect();
    let maxima = local_maxima(&m);
    let spec = &sys.unperturbed;
    let near = |target: f64| spec.nearest_sector_position(Parity::Even, target).unwrap();
    let check = |j: usize| maxima.iter().copied().filter(|&x| x.abs_diff(j) <= 2).collect::<Vec<_>>();
    let mf = CriticalEnergies::mean_field(&params);
    let (j1, j2) = (near(mf.standard), near(mf.anharmonic));
    let (m1, m2) = (check(j1), check(j2));
    let named = 48usize.abs_diff(j1) <= 2 && 103usize.abs_diff(j2) <= 2;
    let pass = !m1.is_empty() && !m2.is_empty() && named;
    let fs = CriticalEnergies::finite_size(&params);
    let (f1, f2) = (near(fs.standard), near(fs.anharmonic));
    let nearby: Vec<usize> = maxima.iter().copied().filter(|&x| x.abs_diff(j1) <= 6 || x.abs_diff(j2) <= 6).collect();
    verdict(
        pass,
        format!(
            "nearest to ε_c1: j={j1}, maxima within ±2: {m1:?}; nearest to ε_c2: j={j2}, maxima within ±2: {m2:?}; \
             j=48/103 inside: {named}; local maxima nearby: {nearby:?}; finite-size critical energies: j={f1} ({}), j={f2} ({})",
            if check(f1).is_empty() { "no max" } else { "max" },
            if check(f2).is_empty() { "no max" } else { "max" },
        ),
    )
}

fn c10_otoc_correctness() -> Verdict {
    let mut rng = rand::rngs::StdRng::seed_from_u64(99);
    let mut worst_c = 0.0f64;
    let mut worst_f = 0.0f64;
    for &(n, xi, alpha, w, v) in
        &[(100usize, 0.5, -0.6, K::Sp, K::Sm), (100, 0.3, -0.6, K::Sx, K::Sx), (60, 0.5, 0.0, K::Sy, K::Sx)]
    {
        let params = ModelParams::new(n, xi, alpha).unwrap();
        let sys = OtocSystem::from_kinds(diagonalize(&params).unwrap(), w, v, true).unwrap();
        let eig = SymmetricEigen::new(dense_h(&params));
        let q = eig.eigenvectors.map(|x| Complex64::new(x, 0.0));
        let op = |k| {
            let o = build_full_operator(k, n, true).unwrap();
            let ph = if o.imaginary { Complex64::i() } else { Complex64::new(1.0, 0.0) };
            DMatrix::from_fn(n + 1, n + 1, |i, j| ph * o.matrix[[i, j]])
        };
        let (wm, vm) = (op(w), op(v));
        for _ in 0..10 {
            let t = rng.gen_range(0.0..100.0);
            let i = rng.gen_range(0..=n);
            let d = DVector::from_fn(n + 1, |k, _| Complex64::from_polar(1.0, -eig.eigenvalues[k] * t));
            let u = &q * DMatrix::from_diagonal(&d) * q.adjoint();
            let wt = u.adjoint() * &wm * &u;
            let psi = complex_vec(sys.spectrum.state(i));
            let f = psi.dotc(&(wt.adjoint() * vm.adjoint() * &wt * &vm * &psi)).re;
            let a = (&wt * &vm * &psi).norm_squared() + (&vm * &wt * &psi).norm_squared();
            let c = (&wt * &vm * &psi - &vm * &wt * &psi).norm_squared();
            let ours = sys.correlators(i, t).unwrap();
            worst_f = worst_f.max((ours.f - f).abs());
            worst_c = worst_c.max((ours.c - (ours.a - 2.0 * ours.f)).abs()).max((c - (a - 2.0 * f)).abs());
        }
    }
    verdict(
        worst_c <= 1e-10 && worst_f <= 1e-9,
        format!("max |C - (A - 2F)| = {worst_c:.2e} (≤ 1e-10), max |F_phase - F_dense| = {worst_f:.2e} (≤ 1e-9)"),
    )
}

struct OtocProfile {
    energy: Vec<f64>,
    eps: Vec<f64>,
    fbar: Vec<f64>,
}

fn otoc_profile(spec: SpectralData, w: K, v: K) -> OtocProfile {
    let sys = OtocSystem::from_kinds(spec, w, v, true).unwrap();
    let prof = almg_core::otoc::steady_state_profile(&sys, Parity::Even).unwrap();
    let even = sys.spectrum.sector(Parity::Even);
    OtocProfile {
        energy: even.iter().map(|&i| sys.spectrum.energy_per_site(i)).collect(),
        eps: even.iter().map(|&i| sys.spectrum.eps[i]).collect(),
        fbar: prof.iter().map(|(_, f)| *f).collect(),
    }
}

fn window_median(p: &OtocProfile, key: &[f64], lo: f64, hi: f64) -> f64 {
    median(key.iter().zip(&p.fbar).filter(|(e, _)| **e > lo && **e < hi).map(|(_, f)| f.abs()).collect())
}

fn c11_and_c12() -> (Verdict, Verdict) {
    let params = ModelParams::new(400, 0.5, -0.6).unwrap();
    let spec = diagonalize(&params).unwrap();
    let cross = otoc_profile(spec.clone(), K::Sp, K::Sm);
    let mid = window_median(&cross, &cross.energy, 0.41, 0.49);
    let low = window_median(&cross, &cross.energy, f64::NEG_INFINITY, 0.35);
    let high = window_median(&cross, &cross.energy, 0.55, f64::INFINITY);
    let pass11 = 10.0 * mid <= low && 10.0 * mid <= high && high > 0.0;
    let eps_mid = window_median(&cross, &cross.eps, 0.41, 0.49);
    let eps_low = window_median(&cross, &cross.eps, f64::NEG_INFINITY, 0.35);
    let v11 = verdict(
        pass11,
        format!(
            "median |F̄| for E/N in (0.41,0.49) = {mid:.3e}, E/N < 0.35 = {low:.3e}, E/N > 0.55 = {high:.3e}; \
             same windows on (E-E_gs)/N: {eps_mid:.3e} vs {eps_low:.3e}"
        ),
    );

    // numerical floor for "compatible with zero": the cross-pair median is exactly zero
    let floor = 1e-10;
    let same = otoc_profile(spec, K::Sx, K::Sx);
    let first = CriticalEnergies::mean_field(&params).ordered().0;
    let above: Vec<f64> =
        same.energy.iter().zip(&same.fbar).filter(|(e, _)| **e > first).map(|(_, f)| f.abs()).collect();
    let worst = above.iter().copied().fold(0.0, f64::max);
    let below_nonzero =
        same.energy.iter().zip(&same.fbar).filter(|(e, f)| **e < first - 0.05 && f.abs() > floor).count();
    let v12 = verdict(
        worst <= mid + floor,
        format!(
            "Sx/Sx: max |F̄| over {} even states with E/N > {first} is {worst:.2e} (≤ cross-pair zero-region median {mid:.2e} + {floor:.0e}); \
             {below_nonzero} nonzero values below the line",
            above.len()
        ),
    );
    (v11, v12)
}

fn main() {
    let start = Instant::now();
    let mut results: Vec<(u32, &str, Verdict)> = vec![
        (1, "analytic spectrum at ξ=0", c1_analytic_spectrum()),
        (2, "critical quench from the ground state", c2_critical_from_ground()),
        (3, "critical quench from the highest even state", c3_critical_from_highest()),
        (4, "survival-probability collapse at the critical quenches", c4_survival_collapse()),
        (5, "LDOS local minimum at the critical energy", c5_ldos_structure()),
        (6, "survival probability: phase sum vs direct propagation", c6_fourier_identity()),
        (7, "Hellmann-Feynman slope vs finite difference", c7_hellmann_feynman()),
        (8, "echo: analytic vs numeric long-time average", c8_echo_identity()),
        (9, "echo time-average maxima at the critical energies", c9_echo_marker()),
        (10, "OTOC decomposition and dense-conjugation oracle", c10_otoc_correctness()),
    ];
    let (v11, v12) = c11_and_c12();
    results.push((11, "steady-state OTOC order parameter (S+/S, S-/S)", v11));
    results.push((12, "negative control (Sx/S, Sx/S)", v12));

    for (k, name, v) in &results {
        println!("[{}] criterion {k:>2}: {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    let failed = results.iter().filter(|(_, _, v)| !v.pass).count();
    println!("acceptance: {} passed, {failed} failed ({:.1} s)", results.len() - failed, start.elapsed().as_secs_f64());
    if failed > 0 && std::env::var("ALMG_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
