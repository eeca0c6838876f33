//! Readout with state-preparation-and-measurement errors, three-basis
//! single-qubit tomography, physicality projection, and fidelity intervals.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmath::{apply, density_from_bloch, fidelity_pure, rotation_gate, rx, ry, BlochVector, DensityMatrix, PureState, Unitary2};
use crate::rng::{streams, substream};
use crate::sequencer::{build_gate_schedule, evolve, DriftModel, Gate, Setup};

/// `f0`: combined preparation and dark-state readout fidelity.
/// `f1`: bright-state readout fidelity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpamModel {
    pub f0: f64,
    pub f1: f64,
}

impl SpamModel {
    pub fn new(f0: f64, f1: f64) -> Result<Self> {
        for (name, f) in [("f0", f0), ("f1", f1)] {
            if !(f > 0.5 && f <= 1.0) {
                return Err(Error::param(name, format!("{f} outside (0.5, 1]")));
            }
        }
        Ok(Self { f0, f1 })
    }

    pub fn ideal() -> Self {
        Self { f0: 1.0, f1: 1.0 }
    }

    /// Probability of a bright outcome given the ideal bright population.
    pub fn bright_probability(&self, p: f64) -> f64 {
        p * self.f1 + (1.0 - p) * (1.0 - self.f0)
    }
}

/// One fluorescence detection. `p` is clamped to `[0, 1]`.
pub fn detect<R: Rng + ?Sized>(p: f64, spam: &SpamModel, rng: &mut R) -> bool {
    rng.random::<f64>() < spam.bright_probability(p.clamp(0.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Basis {
    Z,
    X,
    Y,
}

impl Basis {
    pub const ALL: [Basis; 3] = [Basis::Z, Basis::Y, Basis::X];

    pub fn label(self) -> char {
        match self {
            Basis::Z => 'Z',
            Basis::X => 'X',
            Basis::Y => 'Y',
        }
    }

    /// Pre-rotation as `(phase, angle)` of a resonant pulse.
    pub fn prerotation_pulse(self) -> (f64, f64) {
        match self {
            Basis::Z => (0.0, 0.0),
            Basis::Y => (0.0, FRAC_PI_2),
            Basis::X => (FRAC_PI_2, FRAC_PI_2),
        }
    }
}

/// `[(Z, I), (Y, R_x(pi/2)), (X, R_y(pi/2))]`.
pub fn measurement_prerotations() -> Vec<(Basis, Unitary2<f64>)> {
    vec![
        (Basis::Z, Unitary2::identity()),
        (Basis::Y, rx(FRAC_PI_2)),
        (Basis::X, ry(FRAC_PI_2)),
    ]
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisCounts {
    pub shots: u64,
    pub bright: u64,
}

impl BasisCounts {
    pub fn new(shots: u64, bright: u64) -> Result<Self> {
        if bright > shots {
            return Err(Error::param("bright", format!("{bright} counts exceed {shots} shots")));
        }
        Ok(Self { shots, bright })
    }

    pub fn fraction(&self) -> f64 {
        self.bright as f64 / self.shots as f64
    }
}

/// Bright counts of one ion in each measurement basis.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CountsTable {
    pub bases: BTreeMap<Basis, BasisCounts>,
}

impl CountsTable {
    pub fn new(z: BasisCounts, y: BasisCounts, x: BasisCounts) -> Self {
        Self {
            bases: BTreeMap::from([(Basis::Z, z), (Basis::Y, y), (Basis::X, x)]),
        }
    }

    fn get(&self, b: Basis) -> Result<BasisCounts> {
        match self.bases.get(&b) {
            Some(c) if c.shots > 0 => Ok(*c),
            _ => Err(Error::MissingBasis(b.label())),
        }
    }

    pub fn probabilities(&self) -> Result<BasisProbabilities> {
        Ok(BasisProbabilities {
            z: self.get(Basis::Z)?.fraction(),
            y: self.get(Basis::Y)?.fraction(),
            x: self.get(Basis::X)?.fraction(),
        })
    }
}

/// Bright probabilities per basis; the infinite-shot limit of a [`CountsTable`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisProbabilities {
    pub z: f64,
    pub y: f64,
    pub x: f64,
}

impl BasisProbabilities {
    /// Exact detection probabilities of `rho` under `spam`.
    pub fn of_state(rho: &DensityMatrix<f64>, spam: &SpamModel) -> Self {
        let mut p = [0.0; 3];
        for (i, (_, g)) in measurement_prerotations().iter().enumerate() {
            p[i] = spam.bright_probability(apply(g, rho).prob_one());
        }
        Self { z: p[0], y: p[1], x: p[2] }
    }

    /// Linear inversion.
    pub fn bloch(&self) -> BlochVector<f64> {
        BlochVector::new(2.0 * self.x - 1.0, 1.0 - 2.0 * self.y, 1.0 - 2.0 * self.z)
    }
}

/// Raw (possibly unphysical) Bloch vector from counts.
pub fn bloch_from_counts(counts: &CountsTable) -> Result<BlochVector<f64>> {
    Ok(counts.probabilities()?.bloch())
}

/// Closest density matrix in Frobenius norm: radial rescale onto the
/// sphere when `|r| > 1`, identity otherwise.
pub fn project_physical(raw: &BlochVector<f64>) -> DensityMatrix<f64> {
    let n = raw.norm();
    let r = if n > 1.0 { raw.scale(1.0 / n) } else { *raw };
    density_from_bloch(&r)
}

/// [`project_physical`] for a Hermitian unit-trace matrix.
pub fn project_physical_matrix(m: [[Complex64; 2]; 2]) -> Result<DensityMatrix<f64>> {
    Ok(project_physical(&DensityMatrix::from_entries(m)?.bloch()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityEstimate {
    pub fidelity: f64,
    /// 16th percentile of the bootstrap distribution (never above `fidelity`).
    pub ci_low: f64,
    /// 84th percentile of the bootstrap distribution (never below `fidelity`).
    pub ci_high: f64,
    /// Linear error propagation of the binomial count noise.
    pub analytic_se: f64,
}

impl FidelityEstimate {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci_high - self.ci_low)
    }
}

fn fidelity_of(p: &BasisProbabilities, ideal: &PureState<f64>) -> Result<f64> {
    fidelity_pure(&project_physical(&p.bloch()), ideal)
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Point fidelity with a parametric bootstrap over per-basis binomial
/// counts (16th-84th percentile) and the analytic standard error.
pub fn fidelity_with_ci(
    counts: &CountsTable,
    ideal: &PureState<f64>,
    resamples: usize,
    seed: u64,
) -> Result<FidelityEstimate> {
    if resamples < 100 {
        return Err(Error::param("resamples", "need at least 100"));
    }
    let probs = counts.probabilities()?;
    let fidelity = fidelity_of(&probs, ideal)?;
    let target = ideal.bloch();
    let n = [
        counts.get(Basis::Z)?.shots,
        counts.get(Basis::Y)?.shots,
        counts.get(Basis::X)?.shots,
    ];
    let p = [probs.z, probs.y, probs.x];
    let weights = [target.z, target.y, target.x];
    let analytic_se = (0..3)
        .map(|i| weights[i].powi(2) * p[i] * (1.0 - p[i]) / n[i] as f64)
        .sum::<f64>()
        .sqrt();

    let dists = (0..3)
        .map(|i| Binomial::new(n[i], p[i]).map_err(|e| Error::param("counts", e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let mut samples = (0..resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, streams::BOOTSTRAP, r as u64);
            let mut q = [0.0; 3];
            for i in 0..3 {
                q[i] = dists[i].sample(&mut rng) as f64 / n[i] as f64;
            }
            fidelity_of(&BasisProbabilities { z: q[0], y: q[1], x: q[2] }, ideal)
        })
        .collect::<Result<Vec<_>>>()?;
    samples.sort_by(f64::total_cmp);
    Ok(FidelityEstimate {
        fidelity,
        ci_low: percentile(&samples, 0.16).min(fidelity),
        ci_high: percentile(&samples, 0.84).max(fidelity),
        analytic_se,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TomographyResult {
    pub counts: CountsTable,
    pub raw: BlochVector<f64>,
    pub state: DensityMatrix<f64>,
    pub ideal: PureState<f64>,
    pub estimate: FidelityEstimate,
}

impl TomographyResult {
    pub fn fidelity(&self) -> f64 {
        self.estimate.fidelity
    }
}

/// A single-qubit gate as `(phase, angle)`: `exp(-i angle/2 (cos phase X + sin phase Y))`.
pub type GateSpec = (f64, f64);

/// Shared settings of a tomography run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TomographySettings {
    pub spam: SpamModel,
    pub shots_per_basis: usize,
    pub resamples: usize,
    pub drift: DriftModel,
}

/// Gate on ion A (site 0), gate on ion B (site 1), then per basis the
/// pre-rotations on A and B, parallel detection, and reconstruction of each
/// ion against its ideal post-gate state.
pub fn run_tomography_experiment(
    setup: &Setup,
    gate_a: GateSpec,
    gate_b: GateSpec,
    settings: &TomographySettings,
    seed: u64,
) -> Result<Vec<TomographyResult>> {
    if setup.chain.len() != 2 || setup.sites.len() < 2 {
        return Err(Error::param("setup", "tomography runs on a two-ion chain"));
    }
    let shots = settings.shots_per_basis;
    if shots == 0 {
        return Err(Error::param("shots_per_basis", "must be positive"));
    }
    let gates = [gate_a, gate_b];
    let ideal: Vec<PureState<f64>> = gates
        .iter()
        .map(|&(phi, theta)| PureState::zero().evolve(&rotation_gate(phi, theta)))
        .collect();

    let path = settings.drift.path(seed, Basis::ALL.len() * shots);
    let mut tables = vec![CountsTable::default(); 2];
    for (bi, basis) in Basis::ALL.into_iter().enumerate() {
        let (pp, pa) = basis.prerotation_pulse();
        let list = [
            Gate::new(0, gate_a.0, gate_a.1),
            Gate::new(1, gate_b.0, gate_b.1),
            Gate::new(0, pp, pa),
            Gate::new(1, pp, pa),
        ];
        let schedule = build_gate_schedule(&list, setup)?;
        let bits = (0..shots)
            .into_par_iter()
            .map(|s| {
                let idx = bi * shots + s;
                let shot = evolve(setup, &schedule, path[idx])?;
                let mut rng = substream(seed, streams::TOMO_DETECT, idx as u64);
                Ok([
                    detect(shot.states[0].prob_one(), &settings.spam, &mut rng),
                    detect(shot.states[1].prob_one(), &settings.spam, &mut rng),
                ])
            })
            .collect::<Result<Vec<_>>>()?;
        for (ion, table) in tables.iter_mut().enumerate() {
            let bright = bits.iter().filter(|b| b[ion]).count() as u64;
            table.bases.insert(basis, BasisCounts::new(shots as u64, bright)?);
        }
    }

    tables
        .into_iter()
        .zip(ideal)
        .enumerate()
        .map(|(ion, (counts, ideal))| {
            let raw = bloch_from_counts(&counts)?;
            let state = project_physical(&raw);
            let estimate = fidelity_with_ci(
                &counts,
                &ideal,
                settings.resamples,
                crate::rng::substream_seed(seed, streams::BOOTSTRAP, ion as u64),
            )?;
            Ok(TomographyResult {
                counts,
                raw,
                state,
                ideal,
                estimate,
            })
        })
        .collect()
}

/// Gate pair labels and specs of the seven sequential-gate rows.
pub fn table1_rows() -> Vec<(&'static str, &'static str, GateSpec, GateSpec)> {
    let x90 = (0.0, FRAC_PI_2);
    let y90 = (FRAC_PI_2, FRAC_PI_2);
    let x180 = (0.0, PI);
    let id = (0.0, 0.0);
    vec![
        ("Rx(pi/2)", "I", x90, id),
        ("I", "Rx(pi/2)", id, x90),
        ("Rx(pi)", "Ry(pi/2)", x180, y90),
        ("Rx(pi/2)", "Rx(pi)", x90, x180),
        ("Rx(pi/2)", "Rx(pi/2)", x90, x90),
        ("Rx(pi/2)", "Ry(pi/2)", x90, y90),
        ("Ry(pi/2)", "Rx(pi/2)", y90, x90),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mems::SwitchTiming;
    use crate::optics::{AddressingBeam, IonChain, Point2};
    use crate::rng::substream;
    use std::f64::consts::FRAC_1_SQRT_2;

    const LAB_SPAM: SpamModel = SpamModel { f0: 0.998, f1: 0.991 };

    fn bright_fraction(p: f64, spam: &SpamModel, n: usize, seed: u64) -> f64 {
        let mut rng = substream(seed, 0, 0);
        (0..n).filter(|_| detect(p, spam, &mut rng)).count() as f64 / n as f64
    }

    #[test]
    fn spam_validation() {
        assert!(SpamModel::new(0.5, 0.9).is_err());
        assert!(SpamModel::new(0.9, 1.01).is_err());
        assert!(SpamModel::new(1.0, 1.0).is_ok());
    }

    #[test]
    fn detect_examples() {
        assert!((bright_fraction(1.0, &LAB_SPAM, 100_000, 1) - 0.991).abs() < 0.002);
        assert!((bright_fraction(0.0, &LAB_SPAM, 100_000, 2) - 0.002).abs() < 0.001);
        assert!((bright_fraction(0.5, &SpamModel::ideal(), 100_000, 3) - 0.5).abs() < 0.005);
    }

    #[test]
    fn prerotation_examples() {
        let rots = measurement_prerotations();
        assert_eq!(rots.iter().map(|r| r.0).collect::<Vec<_>>(), vec![Basis::Z, Basis::Y, Basis::X]);
        let zero = PureState::<f64>::zero();
        assert!(zero.evolve(&rots[0].1).prob_one().abs() < 1e-12);
        let plus = PureState::new(Complex64::new(FRAC_1_SQRT_2, 0.0), Complex64::new(FRAC_1_SQRT_2, 0.0)).unwrap();
        assert!((plus.evolve(&rots[2].1).prob_one() - 1.0).abs() < 1e-12);
        let plus_i = PureState::new(Complex64::new(FRAC_1_SQRT_2, 0.0), Complex64::new(0.0, FRAC_1_SQRT_2)).unwrap();
        assert!(plus_i.evolve(&rots[1].1).prob_one().abs() < 1e-12);
    }

    #[test]
    fn prerotation_pulses_match_unitaries() {
        for (b, u) in measurement_prerotations() {
            let (phi, theta) = b.prerotation_pulse();
            assert!(rotation_gate(phi, theta).max_abs_diff(&u) < 1e-12);
        }
    }

    #[test]
    fn bloch_from_counts_examples() {
        let c = |k| BasisCounts::new(1000, k).unwrap();
        let r = bloch_from_counts(&CountsTable::new(c(0), c(500), c(500))).unwrap();
        assert_eq!((r.x, r.y, r.z), (0.0, 0.0, 1.0));

        let p = BasisProbabilities { z: 0.5, y: 0.991, x: 0.4965 };
        let r = p.bloch();
        assert!((r.x + 0.007).abs() < 1e-12 && (r.y + 0.982).abs() < 1e-12 && (r.z - 0.0).abs() < 1e-12);

        let r = bloch_from_counts(&CountsTable::new(c(1000), c(1000), c(1000))).unwrap();
        assert_eq!((r.x, r.y, r.z), (1.0, -1.0, -1.0));
        assert!(r.norm() > 1.0);
    }

    #[test]
    fn missing_basis() {
        let mut t = CountsTable::new(BasisCounts::new(10, 1).unwrap(), BasisCounts::default(), BasisCounts::default());
        t.bases.remove(&Basis::X);
        assert!(matches!(bloch_from_counts(&t), Err(Error::MissingBasis('Y'))));
        assert!(BasisCounts::new(5, 6).is_err());
    }

    #[test]
    fn projection_examples() {
        let r = BlochVector::new(0.3, -0.2, 0.1);
        assert!(project_physical(&r).bloch().dot(&r) - r.dot(&r) < 1e-15);
        let p = project_physical(&BlochVector::new(1.2, 0.0, 0.0)).bloch();
        assert!((p.x - 1.0).abs() < 1e-15 && p.y == 0.0 && p.z == 0.0);
        let mixed = project_physical(&BlochVector::new(0.0, 0.0, 0.0));
        assert!(mixed.frobenius_distance(&DensityMatrix::maximally_mixed()) < 1e-15);
    }

    #[test]
    fn spam_limited_fidelities() {
        // R_x(pi/2)|0> sits at r = (0, -1, 0); SPAM maps P_Y = 0 to 1 - F0
        // and P_Z = P_X = 1/2 to (1 + F1 - F0) / 2.
        let psi = PureState::zero().evolve(&rx(FRAC_PI_2));
        let p = BasisProbabilities::of_state(&psi.density(), &LAB_SPAM);
        let f = fidelity_of(&p, &psi).unwrap();
        assert!((f - 0.991).abs() < 1e-12, "{f}");
        let zero = PureState::zero();
        let f = fidelity_of(&BasisProbabilities::of_state(&zero.density(), &LAB_SPAM), &zero).unwrap();
        assert!((f - 0.998).abs() < 1e-12, "{f}");
    }

    #[test]
    fn bootstrap_properties() {
        let psi = PureState::zero().evolve(&rx(FRAC_PI_2));
        let exact = BasisCounts::new(1_000_000, 500_000).unwrap();
        let table = CountsTable::new(exact, BasisCounts::new(1_000_000, 1_000_000).unwrap(), exact);
        let e = fidelity_with_ci(&table, &psi, 200, 1).unwrap();
        assert!((e.fidelity - 1.0).abs() < 1e-12);
        assert!(e.ci_high - e.ci_low < 1e-3);

        let near = CountsTable::new(
            BasisCounts::new(2000, 1000).unwrap(),
            BasisCounts::new(2000, 1982).unwrap(),
            BasisCounts::new(2000, 993).unwrap(),
        );
        let a = fidelity_with_ci(&near, &psi, 1000, 9).unwrap();
        let b = fidelity_with_ci(&near, &psi, 1000, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.ci_low <= a.fidelity && a.fidelity <= a.ci_high);
        // analytic: sqrt(p (1 - p) / n) on the Y axis only
        let se = (0.009f64 * 0.991 / 2000.0).sqrt();
        assert!((a.analytic_se - se).abs() < 1e-12);
        assert!(a.half_width() > 0.5 * se && a.half_width() < 2.0 * se, "{a:?}");
        assert!(fidelity_with_ci(&near, &psi, 50, 9).is_err());
    }

    fn pair_setup() -> Setup {
        let chain = IonChain::linear(2, 7.4).unwrap();
        let beam = AddressingBeam::new(Point2::origin(), 3.3, 13.0, 0.0).unwrap();
        Setup::simple(chain, beam, SwitchTiming::new(0.9, 2.0).unwrap()).unwrap()
    }

    #[test]
    fn ideal_tomography_is_faithful() {
        let settings = TomographySettings {
            spam: SpamModel::ideal(),
            shots_per_basis: 20_000,
            resamples: 200,
            drift: DriftModel::none(),
        };
        let res = run_tomography_experiment(&pair_setup(), (0.0, FRAC_PI_2), (0.0, 0.0), &settings, 3).unwrap();
        for r in &res {
            assert!(r.fidelity() > 0.995, "{r:?}");
            assert!(r.state.is_physical());
            assert!(r.estimate.ci_low <= r.fidelity() && r.fidelity() <= r.estimate.ci_high);
        }
    }

    #[test]
    fn tomography_is_deterministic() {
        let settings = TomographySettings {
            spam: LAB_SPAM,
            shots_per_basis: 300,
            resamples: 100,
            drift: DriftModel::new(0.01, 1e6, 1e4).unwrap(),
        };
        let s = pair_setup();
        let a = run_tomography_experiment(&s, (0.0, PI), (FRAC_PI_2, FRAC_PI_2), &settings, 11).unwrap();
        let b = run_tomography_experiment(&s, (0.0, PI), (FRAC_PI_2, FRAC_PI_2), &settings, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn table_rows() {
        let rows = table1_rows();
        assert_eq!(rows.len(), 7);
        assert_eq!(rows[0].2, (0.0, FRAC_PI_2));
        assert_eq!(rows[0].3, (0.0, 0.0));
    }
}
