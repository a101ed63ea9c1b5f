//! ETH statistics of local observables in the environment eigenbasis.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::ShellSpec;
use crate::eigensolver::EigenDecomposition;
use crate::sparse::{SparseError, SparseHamiltonian};

/// `|h0|` below this makes the condition ratio meaningless.
pub const H0_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum EthError {
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error("window width must be positive, got {0}")]
    InvalidWidth(f64),
    #[error("h(e0) = {0:e} vanishes; the condition ratio is inapplicable")]
    ConditionInapplicable(f64),
    #[error("shell holds {found} levels, at least {required} needed")]
    TooFewLevels { found: usize, required: usize },
    #[error("energy region [{lo}, {hi}] lies outside the spectrum [{min}, {max}]")]
    OutsideSpectrum { lo: f64, hi: f64, min: f64, max: f64 },
    #[error("empty h(e) curve")]
    EmptyCurve,
}

/// Which off-diagonal pairs `(i, j)` are kept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairRule {
    /// Both `e_i` and `e_j` in the shell.
    BothInShell,
    /// `(e_i + e_j)/2` in the shell and `|e_j - e_i| ≤ omega_max`.
    MeanInShell { omega_max: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffDiagonal {
    pub i: usize,
    pub j: usize,
    pub e_i: f64,
    pub e_j: f64,
    pub value: f64,
}

impl OffDiagonal {
    /// `ω = e_j - e_i ≥ 0`.
    pub fn omega(&self) -> f64 {
        self.e_j - self.e_i
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixElements {
    pub energies: Vec<f64>,
    /// `O_ii` for every eigenstate.
    pub diag: Vec<f64>,
    /// Unordered pairs `i < j` selected by `rule`.
    pub offdiag: Vec<OffDiagonal>,
    pub shell: ShellSpec,
    pub rule: PairRule,
}

/// `O_ij = <i|O|j>` in the eigenbasis. All diagonal elements are kept;
/// off-diagonal ones only for the pairs selected by `rule`.
pub fn observable_in_eigenbasis(
    eig: &EigenDecomposition,
    op: &SparseHamiltonian,
    shell: &ShellSpec,
    rule: PairRule,
) -> Result<MatrixElements, EthError> {
    let dim = eig.dim();
    if op.dim() != dim {
        return Err(SparseError::DimensionMismatch { expected: dim, found: op.dim() }.into());
    }
    let energies = eig.energies().to_vec();
    let mut buf = vec![0.0; dim];
    let mut diag = Vec::with_capacity(dim);
    for k in 0..dim {
        op.matvec_real_into(eig.vector(k), &mut buf)?;
        diag.push(dot(eig.vector(k), &buf));
    }

    let (rows, omega_max) = match rule {
        PairRule::BothInShell => (shell.indices(&energies), 0.0),
        PairRule::MeanInShell { omega_max } => {
            let reach = 0.5 * omega_max;
            let rows = (0..dim)
                .filter(|&k| energies[k] >= shell.lo() - reach && energies[k] <= shell.hi() + reach)
                .collect();
            (rows, omega_max)
        }
    };
    let keep = |i: usize, j: usize| match rule {
        PairRule::BothInShell => true,
        PairRule::MeanInShell { .. } => {
            shell.contains(0.5 * (energies[i] + energies[j])) && energies[j] - energies[i] <= omega_max
        }
    };
    // O v_j for every candidate column, then dot products with v_i.
    let applied: Vec<Vec<f64>> = rows
        .iter()
        .map(|&j| op.matvec_real(eig.vector(j)))
        .collect::<Result<_, _>>()?;
    let mut offdiag = Vec::new();
    for (a, &i) in rows.iter().enumerate() {
        for (b, &j) in rows.iter().enumerate().skip(a + 1) {
            if keep(i, j) {
                offdiag.push(OffDiagonal { i, j, e_i: energies[i], e_j: energies[j], value: dot(eig.vector(i), &applied[b]) });
            }
        }
    }
    Ok(MatrixElements { energies, diag, offdiag, shell: *shell, rule })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HPoint {
    /// Mean energy of the levels in the window.
    pub e_center: f64,
    pub h: f64,
    pub count: usize,
}

/// Windowed average of the diagonal elements. Windows of width
/// `window_width` in per-site energy `e/N` are laid on a grid with step
/// `window_width / 2`; empty windows are skipped.
pub fn smoothed_h(elements: &MatrixElements, n_sites: usize, window_width: f64) -> Result<Vec<HPoint>, EthError> {
    if !(window_width > 0.0 && window_width.is_finite()) {
        return Err(EthError::InvalidWidth(window_width));
    }
    let mut pairs: Vec<(f64, f64)> = elements.energies.iter().copied().zip(elements.diag.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let Some(&(first, _)) = pairs.first() else {
        return Err(EthError::EmptyCurve);
    };
    let last = pairs[pairs.len() - 1].0;
    let n = n_sites as f64;
    let step = 0.5 * window_width;
    let (lo, hi) = (first / n, last / n);
    let steps = ((hi - lo) / step).ceil() as usize;
    let mut curve = Vec::with_capacity(steps + 1);
    let mut start = 0;
    for s in 0..=steps {
        let center = lo + s as f64 * step;
        let (a, b) = ((center - step) * n, (center + step) * n);
        while start < pairs.len() && pairs[start].0 < a {
            start += 1;
        }
        let mut count = 0;
        let (mut se, mut sh) = (0.0, 0.0);
        for &(e, d) in pairs[start..].iter().take_while(|p| p.0 < b) {
            count += 1;
            se += e;
            sh += d;
        }
        if count > 0 {
            curve.push(HPoint { e_center: se / count as f64, h: sh / count as f64, count });
        }
    }
    curve.dedup_by(|b, a| a.e_center == b.e_center && a.count == b.count);
    Ok(curve)
}

/// Piecewise-linear interpolation of the curve, clamped at both ends.
pub fn interpolate_h(curve: &[HPoint], e: f64) -> Result<f64, EthError> {
    let (first, last) = match (curve.first(), curve.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(EthError::EmptyCurve),
    };
    if e <= first.e_center {
        return Ok(first.h);
    }
    if e >= last.e_center {
        return Ok(last.h);
    }
    let k = curve.partition_point(|p| p.e_center <= e);
    let (a, b) = (&curve[k - 1], &curve[k]);
    if b.e_center == a.e_center {
        return Ok(a.h);
    }
    let t = (e - a.e_center) / (b.e_center - a.e_center);
    Ok(a.h + t * (b.h - a.h))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionRatio {
    pub h0: f64,
    /// `max |h(e_i) - h0|` over levels in `[e0 - δe/2, e0 + δe/2]`.
    pub delta_h: f64,
    /// `|delta_h / h0|`.
    pub ratio: f64,
    /// Same maximum taken over raw diagonal elements instead of `h(e_i)`.
    pub raw_delta_h: f64,
    pub n_levels: usize,
}

/// `h0 = h(e0)`, `Δh` and `|Δh/h0|` over the region of width `delta_e`.
pub fn delta_h_ratio(curve: &[HPoint], elements: &MatrixElements, e0: f64, delta_e: f64) -> Result<ConditionRatio, EthError> {
    if !(delta_e >= 0.0 && delta_e.is_finite()) {
        return Err(EthError::InvalidWidth(delta_e));
    }
    let (lo, hi) = (e0 - 0.5 * delta_e, e0 + 0.5 * delta_e);
    let min = elements.energies.iter().copied().fold(f64::INFINITY, f64::min);
    let max = elements.energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if e0 < min || e0 > max {
        return Err(EthError::OutsideSpectrum { lo, hi, min, max });
    }
    let h0 = interpolate_h(curve, e0)?;
    if h0.abs() < H0_TOL {
        return Err(EthError::ConditionInapplicable(h0));
    }
    let mut delta_h = 0.0_f64;
    let mut raw_delta_h = 0.0_f64;
    let mut n_levels = 0;
    for (&e, &d) in elements.energies.iter().zip(&elements.diag) {
        if e >= lo && e <= hi {
            delta_h = delta_h.max((interpolate_h(curve, e)? - h0).abs());
            raw_delta_h = raw_delta_h.max((d - h0).abs());
            n_levels += 1;
        }
    }
    Ok(ConditionRatio { h0, delta_h, ratio: (delta_h / h0).abs(), raw_delta_h, n_levels })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluctuationStats {
    pub mu: f64,
    pub sigma_d: f64,
    pub sigma_nd: f64,
    pub gauss_stat_d: f64,
    pub gauss_stat_nd: f64,
    pub n_levels: usize,
    pub n_pairs: usize,
}

const ROUNDOFF_SPREAD: f64 = 1e-12;

/// Default minimum number of in-shell levels for [`fluctuation_stats`].
pub const MIN_SHELL_LEVELS: usize = 50;

/// `μ`, `σ_d` of in-shell diagonal elements and `σ_nd` of in-shell
/// off-diagonal ones, plus the distance of both rescaled samples to the unit
/// normal (see [`gaussian_distance`]).
pub fn fluctuation_stats(elements: &MatrixElements, shell: &ShellSpec, min_levels: usize) -> Result<FluctuationStats, EthError> {
    let diag: Vec<f64> = elements
        .energies
        .iter()
        .zip(&elements.diag)
        .filter(|(&e, _)| shell.contains(e))
        .map(|(_, &d)| d)
        .collect();
    let n = diag.len();
    if n < min_levels.max(2) {
        return Err(EthError::TooFewLevels { found: n, required: min_levels.max(2) });
    }
    let mu = diag.iter().sum::<f64>() / n as f64;
    let sigma_d = (diag.iter().map(|d| (d - mu).powi(2)).sum::<f64>() / n as f64).sqrt();
    let off: Vec<f64> = elements
        .offdiag
        .iter()
        .filter(|p| shell.contains(p.e_i) && shell.contains(p.e_j))
        .map(|p| p.value)
        .collect();
    // Each unordered pair stands for both (i, j) and (j, i).
    let sigma_nd = (2.0 * off.iter().map(|v| v * v).sum::<f64>() / (n * (n - 1)) as f64).sqrt();
    // Spreads at round-off level relative to the elements count as zero.
    let floor = ROUNDOFF_SPREAD * diag.iter().chain(&off).fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    let (sigma_d, sigma_nd) = (if sigma_d > floor { sigma_d } else { 0.0 }, if sigma_nd > floor { sigma_nd } else { 0.0 });
    let rescale = |xs: &[f64], shift: f64, s: f64| -> Vec<f64> {
        if s > 0.0 {
            xs.iter().map(|x| (x - shift) / s).collect()
        } else {
            Vec::new()
        }
    };
    Ok(FluctuationStats {
        mu,
        sigma_d,
        sigma_nd,
        gauss_stat_d: gaussian_distance(&rescale(&diag, mu, sigma_d)),
        gauss_stat_nd: gaussian_distance(&rescale(&off, 0.0, sigma_nd)),
        n_levels: n,
        n_pairs: off.len(),
    })
}

pub const GAUSS_BINS: usize = 40;
pub const GAUSS_RANGE: f64 = 4.0;

/// `Σ_b |F̂(x_b) - Φ(x_b)| Δx` over the `GAUSS_BINS + 1` edges of a uniform
/// grid on `[-4, 4]`, where `F̂` is the empirical distribution function of the
/// (already rescaled) sample. Zero for an empty sample.
pub fn gaussian_distance(sample: &[f64]) -> f64 {
    if sample.is_empty() {
        return 0.0;
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let dx = 2.0 * GAUSS_RANGE / GAUSS_BINS as f64;
    (1..GAUSS_BINS)
        .map(|b| {
            let x = -GAUSS_RANGE + b as f64 * dx;
            let empirical = sorted.partition_point(|&v| v <= x) as f64 / sorted.len() as f64;
            (empirical - normal_cdf(x)).abs() * dx
        })
        .sum()
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GPoint {
    pub omega_center: f64,
    pub mean_sq: f64,
    pub count: usize,
}

/// Mean `|O_ij|²` in bins of `ω = e_j - e_i` of width `omega_bin`, from the
/// sampled pairs whose selection rule places them in `shell`.
pub fn g_profile(elements: &MatrixElements, shell: &ShellSpec, omega_bin: f64) -> Result<Vec<GPoint>, EthError> {
    if !(omega_bin > 0.0 && omega_bin.is_finite()) {
        return Err(EthError::InvalidWidth(omega_bin));
    }
    let mut bins: Vec<(f64, usize)> = Vec::new();
    for p in &elements.offdiag {
        let inside = match elements.rule {
            PairRule::BothInShell => shell.contains(p.e_i) && shell.contains(p.e_j),
            PairRule::MeanInShell { .. } => shell.contains(0.5 * (p.e_i + p.e_j)),
        };
        if !inside {
            continue;
        }
        let b = (p.omega() / omega_bin) as usize;
        if bins.len() <= b {
            bins.resize(b + 1, (0.0, 0));
        }
        bins[b].0 += p.value * p.value;
        bins[b].1 += 1;
    }
    Ok(bins
        .iter()
        .enumerate()
        .filter(|(_, (_, c))| *c > 0)
        .map(|(b, &(s, c))| GPoint { omega_center: (b as f64 + 0.5) * omega_bin, mean_sq: s / c as f64, count: c })
        .collect())
}

/// Least-squares slope of `ln(mean_sq)` against `ω` over `[lo, hi]`.
pub fn log_slope(profile: &[GPoint], lo: f64, hi: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = profile
        .iter()
        .filter(|p| p.omega_center >= lo && p.omega_center <= hi && p.mean_sq > 0.0)
        .map(|p| (p.omega_center, p.mean_sq.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Largest bin mean of the profile, standing in for `max |g|² e^{-S}` in the
/// shell.
pub fn g2_max(profile: &[GPoint], min_count: usize) -> Option<f64> {
    profile.iter().filter(|p| p.count >= min_count).map(|p| p.mean_sq).reduce(f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EthStats {
    pub h_curve: Vec<HPoint>,
    pub condition: Option<ConditionRatio>,
    pub fluctuations: FluctuationStats,
    pub g2_profile: Vec<GPoint>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigensolver::eigh_sparse;
    use crate::lattice::{build_env_hamiltonian, local_observable, Axis, ChainConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn env(n: usize) -> (SparseHamiltonian, EigenDecomposition) {
        let mut chain = ChainConfig::defect_ising(n);
        chain.defects.retain(|d| d.site <= n);
        let h = build_env_hamiltonian(&chain).unwrap();
        let eig = eigh_sparse(&h).unwrap();
        (h, eig)
    }

    fn synthetic(energies: Vec<f64>, diag: Vec<f64>) -> MatrixElements {
        MatrixElements { energies, diag, offdiag: vec![], shell: ShellSpec { e0: 0.0, delta_e0: 1.0 }, rule: PairRule::BothInShell }
    }

    #[test]
    fn identity_and_hamiltonian_in_eigenbasis() {
        let (h, eig) = env(6);
        let shell = ShellSpec::new(-1.0, 1.0).unwrap();
        let id = observable_in_eigenbasis(&eig, &SparseHamiltonian::identity(64), &shell, PairRule::BothInShell).unwrap();
        assert!(id.diag.iter().all(|d| (d - 1.0).abs() < 1e-12));
        assert!(!id.offdiag.is_empty());
        assert!(id.offdiag.iter().all(|p| p.value.abs() < 1e-12));
        let own = observable_in_eigenbasis(&eig, &h, &shell, PairRule::BothInShell).unwrap();
        for (d, e) in own.diag.iter().zip(eig.energies()) {
            assert!((d - e).abs() < 1e-12);
        }
        assert!(own.offdiag.iter().all(|p| p.value.abs() < 1e-12 && p.omega() >= 0.0));
        let wrong = SparseHamiltonian::identity(8);
        assert!(observable_in_eigenbasis(&eig, &wrong, &shell, PairRule::BothInShell).is_err());
    }

    #[test]
    fn matches_dense_conjugation() {
        let (_, eig) = env(8);
        let op = local_observable(7, Axis::Z, 8).unwrap();
        let shell = ShellSpec::new(-1.2, 0.6).unwrap();
        let els = observable_in_eigenbasis(&eig, &op, &shell, PairRule::BothInShell).unwrap();
        let dense = op.to_dense();
        let elem = |i: usize, j: usize| -> f64 {
            let (vi, vj) = (eig.vector(i), eig.vector(j));
            (0..256).map(|r| vi[r] * (0..256).map(|c| dense[r * 256 + c] * vj[c]).sum::<f64>()).sum()
        };
        for k in (0..256).step_by(17) {
            assert!((els.diag[k] - elem(k, k)).abs() < 1e-10);
        }
        for p in els.offdiag.iter().step_by(7) {
            assert!((p.value - elem(p.i, p.j)).abs() < 1e-10);
            assert!(shell.contains(p.e_i) && shell.contains(p.e_j));
        }
        let n = shell.indices(eig.energies()).len();
        assert_eq!(els.offdiag.len(), n * (n - 1) / 2);
    }

    #[test]
    fn mean_in_shell_pairs() {
        let (_, eig) = env(7);
        let op = local_observable(3, Axis::X, 7).unwrap();
        let shell = ShellSpec::new(-1.2, 0.2).unwrap();
        let els = observable_in_eigenbasis(&eig, &op, &shell, PairRule::MeanInShell { omega_max: 2.0 }).unwrap();
        assert!(els.offdiag.iter().all(|p| shell.contains(0.5 * (p.e_i + p.e_j)) && p.omega() <= 2.0));
        assert!(els.offdiag.iter().any(|p| p.omega() > 1.0));
    }

    #[test]
    fn constant_and_linear_h() {
        let energies: Vec<f64> = (0..400).map(|k| -4.0 + 0.02 * k as f64).collect();
        let c = synthetic(energies.clone(), vec![0.3; 400]);
        let curve = smoothed_h(&c, 4, 0.01).unwrap();
        assert!(curve.iter().all(|p| (p.h - 0.3).abs() < 1e-15));
        let ratio = delta_h_ratio(&curve, &c, -1.0, 0.5).unwrap();
        assert_eq!(ratio.ratio, 0.0);

        let line = synthetic(energies.clone(), energies.iter().map(|e| 0.5 - 0.2 * e).collect());
        let curve = smoothed_h(&line, 4, 0.05).unwrap();
        assert!(curve.windows(2).all(|w| w[0].e_center < w[1].e_center));
        for p in &curve {
            assert!((p.h - (0.5 - 0.2 * p.e_center)).abs() < 1e-12);
        }
        for e in [-3.3, -1.0, 0.123, 3.9] {
            assert!((interpolate_h(&curve, e).unwrap() - (0.5 - 0.2 * e)).abs() < 1e-12);
        }
        let r = delta_h_ratio(&curve, &line, -1.0, 0.4).unwrap();
        assert!((r.h0 - 0.7).abs() < 1e-12);
        assert!((r.delta_h - 0.04).abs() < 1e-12);
        assert!((r.ratio - 0.04 / 0.7).abs() < 1e-12);
        assert!(smoothed_h(&line, 4, 0.0).is_err());
    }

    #[test]
    fn ratio_rejects_vanishing_h0() {
        let energies: Vec<f64> = (0..100).map(|k| k as f64 * 0.1).collect();
        let zero = synthetic(energies, vec![0.0; 100]);
        let curve = smoothed_h(&zero, 2, 0.1).unwrap();
        assert!(matches!(delta_h_ratio(&curve, &zero, 5.0, 0.2), Err(EthError::ConditionInapplicable(_))));
        assert!(matches!(delta_h_ratio(&curve, &zero, 50.0, 0.2), Err(EthError::OutsideSpectrum { .. })));
    }

    #[test]
    fn normal_sample_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let dist = Normal::new(0.2, 0.05).unwrap();
        let n = 10_000;
        let energies: Vec<f64> = (0..n).map(|k| k as f64 * 1e-4).collect();
        let diag: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng)).collect();
        let els = synthetic(energies, diag);
        let shell = ShellSpec::new(0.5, 1.0).unwrap();
        let s = fluctuation_stats(&els, &shell, 50).unwrap();
        assert!((s.sigma_d / 0.05 - 1.0).abs() < 0.03);
        assert!((s.mu - 0.2).abs() < 0.002);
        assert!(s.gauss_stat_d < 0.05);
        assert_eq!(s.sigma_nd, 0.0);
    }

    #[test]
    fn identical_elements_have_no_spread() {
        let energies: Vec<f64> = (0..60).map(|k| k as f64 * 0.01).collect();
        let els = synthetic(energies, vec![1.0; 60]);
        let s = fluctuation_stats(&els, &ShellSpec::new(0.3, 1.0).unwrap(), 50).unwrap();
        assert_eq!((s.sigma_d, s.sigma_nd, s.gauss_stat_d, s.gauss_stat_nd), (0.0, 0.0, 0.0, 0.0));
        assert!(matches!(
            fluctuation_stats(&els, &ShellSpec::new(0.3, 0.1).unwrap(), 50),
            Err(EthError::TooFewLevels { .. })
        ));
    }

    #[test]
    fn sigma_nd_is_rms_of_samples() {
        let (_, eig) = env(8);
        let op = local_observable(7, Axis::X, 8).unwrap();
        let shell = ShellSpec::new(-1.2, 1.0).unwrap();
        let els = observable_in_eigenbasis(&eig, &op, &shell, PairRule::BothInShell).unwrap();
        let s = fluctuation_stats(&els, &shell, 10).unwrap();
        let rms = (els.offdiag.iter().map(|p| p.value * p.value).sum::<f64>() / els.offdiag.len() as f64).sqrt();
        assert!((s.sigma_nd - rms).abs() < 1e-12);
    }

    #[test]
    fn gaussian_distance_bounds() {
        let uniform: Vec<f64> = (0..2000).map(|k| -1.0 + 2.0 * k as f64 / 1999.0).collect();
        assert!(gaussian_distance(&uniform) > 0.1);
        let quantiles: Vec<f64> = (1..2000)
            .map(|k| {
                let p = k as f64 / 2000.0;
                // bisection for Φ^{-1}(p)
                let (mut a, mut b) = (-10.0, 10.0);
                for _ in 0..100 {
                    let m = 0.5 * (a + b);
                    if normal_cdf(m) < p { a = m } else { b = m }
                }
                0.5 * (a + b)
            })
            .collect();
        assert!(gaussian_distance(&quantiles) < 0.005);
        assert_eq!(gaussian_distance(&[]), 0.0);
    }

    #[test]
    fn profile_of_identity_vanishes() {
        let (_, eig) = env(6);
        let shell = ShellSpec::new(-1.0, 0.8).unwrap();
        let els = observable_in_eigenbasis(&eig, &SparseHamiltonian::identity(64), &shell, PairRule::MeanInShell { omega_max: 3.0 }).unwrap();
        let profile = g_profile(&els, &shell, 0.1).unwrap();
        assert!(!profile.is_empty());
        assert!(profile.iter().all(|p| p.mean_sq < 1e-24));
    }

    #[test]
    fn log_slope_of_exponential() {
        let profile: Vec<GPoint> = (0..30)
            .map(|k| {
                let w = 0.1 * k as f64 + 0.05;
                GPoint { omega_center: w, mean_sq: (-1.5 * w).exp(), count: 10 }
            })
            .collect();
        assert!((log_slope(&profile, 1.0, 3.0).unwrap() + 1.5).abs() < 1e-12);
        assert_eq!(g2_max(&profile, 5), Some((-1.5f64 * 0.05).exp()));
        assert_eq!(g2_max(&profile, 50), None);
    }
}
