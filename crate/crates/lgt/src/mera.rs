//! Analytic ascending-channel evaluation of plaquette observables in the
//! iterated fine-graining ansatz at lambda = 1, together with a classical
//! pushforward oracle (quadrature and seeded Monte Carlo) that validates the
//! closed forms.
//!
//! At lambda = 1 the ancilla wave function concentrates on the identity, so
//! the quantum fine-graining acts classically on position-diagonal
//! observables: a level-m plaquette flux descends from its level-0 ancestor's
//! flux as phi / 4^m, and the ascending channel is the adjoint statement
//! A(Phi) = (1/4) Phi' with floor-halved coordinates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LgtError, Result};
use crate::group::{haar_sample, su2_class_rule, GroupElement, GroupVariant};
use crate::interp::{subdivide_2d, LatticeConfig2d};

/// Exact rational prefactor accumulated by the ascending channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub const ONE: Ratio = Ratio { num: 1, den: 1 };

    pub fn times(self, other: Ratio) -> Ratio {
        Ratio {
            num: self.num * other.num,
            den: self.den * other.den,
        }
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

/// Observable payload on level-m plaquettes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableKind {
    /// The gauge-invariant flux Phi = arccos(tr M / 2) of one plaquette.
    Flux,
    /// A product of fluxes over the coordinate list.
    FluxProduct,
    /// A polynomial f(tr M) with the given coefficients (constant term
    /// first) on one plaquette.
    TracePolynomial { coeffs: Vec<f64> },
}

/// A plaquette observable on the level-m lattice obtained by subdividing a
/// periodic base lattice of `base_cells` plaquettes m times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaquetteObservable {
    pub kind: ObservableKind,
    /// Refinement level m >= 0.
    pub level: u32,
    /// One coordinate per flux factor (exactly one for Flux and
    /// TracePolynomial), on the level-m lattice.
    pub coords: Vec<(u64, u64)>,
    /// Plaquette counts of the level-0 base lattice.
    pub base_cells: (u64, u64),
    /// Internal bookkeeping for ascended trace functions: the polynomial is
    /// applied to tr(M^{1/4^r}).  Fresh observables use 0.
    pub root_quarters: u32,
}

impl PlaquetteObservable {
    pub fn flux(level: u32, coord: (u64, u64), base_cells: (u64, u64)) -> Self {
        PlaquetteObservable {
            kind: ObservableKind::Flux,
            level,
            coords: vec![coord],
            base_cells,
            root_quarters: 0,
        }
    }

    pub fn flux_product(level: u32, coords: Vec<(u64, u64)>, base_cells: (u64, u64)) -> Self {
        PlaquetteObservable {
            kind: ObservableKind::FluxProduct,
            level,
            coords,
            base_cells,
            root_quarters: 0,
        }
    }

    pub fn trace_polynomial(
        coeffs: Vec<f64>,
        level: u32,
        coord: (u64, u64),
        base_cells: (u64, u64),
    ) -> Self {
        PlaquetteObservable {
            kind: ObservableKind::TracePolynomial { coeffs },
            level,
            coords: vec![coord],
            base_cells,
            root_quarters: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_cells.0 < 2 || self.base_cells.1 < 2 {
            return Err(LgtError::InvalidArgument(
                "base lattice needs at least 2 x 2 plaquettes".into(),
            ));
        }
        let single = !matches!(self.kind, ObservableKind::FluxProduct);
        if single && self.coords.len() != 1 {
            return Err(LgtError::InvalidArgument(
                "single-plaquette observable needs exactly one coordinate".into(),
            ));
        }
        if self.coords.is_empty() {
            return Err(LgtError::InvalidArgument("empty coordinate list".into()));
        }
        let (cx, cy) = (self.base_cells.0 << self.level, self.base_cells.1 << self.level);
        for (x, y) in &self.coords {
            if *x >= cx || *y >= cy {
                return Err(LgtError::InvalidArgument(format!(
                    "coordinate ({x}, {y}) outside the level-{} lattice",
                    self.level
                )));
            }
        }
        Ok(())
    }
}

/// Result of one application of the ascending channel.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AscendResult {
    pub coarse: PlaquetteObservable,
    pub prefactor: Ratio,
}

/// One step of the ascending channel at lambda = 1: fluxes pick up exactly
/// 1/4 each and move to the floor-halved coordinate; smooth trace functions
/// move inside a fourth root with prefactor 1.
pub fn ascend(obs: &PlaquetteObservable) -> Result<AscendResult> {
    obs.validate()?;
    if obs.level == 0 {
        return Err(LgtError::InvalidArgument(
            "level-0 observables cannot be ascended".into(),
        ));
    }
    let coords: Vec<(u64, u64)> = obs.coords.iter().map(|(x, y)| (x / 2, y / 2)).collect();
    let (kind, prefactor, root) = match &obs.kind {
        ObservableKind::Flux => (ObservableKind::Flux, Ratio { num: 1, den: 4 }, 0),
        ObservableKind::FluxProduct => {
            let l = obs.coords.len() as u32;
            (
                ObservableKind::FluxProduct,
                Ratio {
                    num: 1,
                    den: 4u64.pow(l),
                },
                0,
            )
        }
        ObservableKind::TracePolynomial { coeffs } => (
            ObservableKind::TracePolynomial {
                coeffs: coeffs.clone(),
            },
            Ratio::ONE,
            obs.root_quarters + 1,
        ),
    };
    Ok(AscendResult {
        coarse: PlaquetteObservable {
            kind,
            level: obs.level - 1,
            coords,
            base_cells: obs.base_cells,
            root_quarters: root,
        },
        prefactor,
    })
}

fn require_lambda_one(lambda: f64) -> Result<()> {
    if (lambda - 1.0).abs() > 1e-12 {
        return Err(LgtError::InvalidArgument(
            "only the lambda = 1 ascending channel is supported analytically".into(),
        ));
    }
    Ok(())
}

/// k-th Haar moment of the SU(2) flux, E[Phi^k], by class-function
/// quadrature.
pub fn haar_flux_moment(k: u32) -> f64 {
    su2_class_rule(64)
        .iter()
        .map(|(phi, w)| w * phi.powi(k as i32))
        .sum()
}

/// Expectation of `obs` in the lambda = 1 ansatz |Psi_m>: ascend to level 0,
/// then evaluate the Haar expectation of the coarse observable by
/// quadrature.  Distinct level-0 plaquettes carry independent Haar fluxes.
pub fn expect_in_ansatz(obs: &PlaquetteObservable, lambda: f64) -> Result<f64> {
    require_lambda_one(lambda)?;
    obs.validate()?;
    let mut cur = obs.clone();
    let mut pref = Ratio::ONE;
    while cur.level > 0 {
        let step = ascend(&cur)?;
        pref = pref.times(step.prefactor);
        cur = step.coarse;
    }
    match &cur.kind {
        ObservableKind::Flux | ObservableKind::FluxProduct => {
            let mut groups: std::collections::HashMap<(u64, u64), u32> =
                std::collections::HashMap::new();
            for c in &cur.coords {
                *groups.entry(*c).or_insert(0) += 1;
            }
            let mut value = pref.as_f64();
            for mult in groups.values() {
                value *= haar_flux_moment(*mult);
            }
            Ok(value)
        }
        ObservableKind::TracePolynomial { coeffs } => {
            let shrink = 4f64.powi(cur.root_quarters as i32);
            let value: f64 = su2_class_rule(64)
                .iter()
                .map(|(phi, w)| {
                    let tr = 2.0 * (phi / shrink).cos();
                    let mut f = 0.0;
                    for (i, c) in coeffs.iter().enumerate() {
                        f += c * tr.powi(i as i32);
                    }
                    w * f
                })
                .sum();
            Ok(pref.as_f64() * value)
        }
    }
}

/// Sampling strategy for the classical pushforward oracle.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    Quadrature,
    MonteCarlo { seed: u64, samples: u64 },
}

/// Oracle output: value with a standard error (zero for quadrature).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct OracleEstimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: u64,
    pub seed: u64,
}

/// Embed four traversal-directed plaquette sides into a 2x2 periodic
/// lattice so cell (0, 0) carries exactly those sides.
fn embed_cell(sides: &[GroupElement; 4]) -> Result<LatticeConfig2d> {
    let mut lat = LatticeConfig2d::flat(GroupVariant::Su2, 2, 2, true)?;
    lat.set_vy(0, 0, sides[0].clone());
    lat.set_hx(0, 1, sides[1].clone());
    lat.set_vy(1, 0, sides[2].inverse());
    lat.set_hx(0, 0, sides[3].inverse());
    Ok(lat)
}

/// Classically descend one plaquette through `bits` quadrant choices (most
/// significant level first); returns the fine plaquette's flux.
fn descend_flux(sides: &[GroupElement; 4], bits: &[(u64, u64)]) -> Result<f64> {
    let mut cur = sides.clone();
    for (qx, qy) in bits {
        let fine = subdivide_2d(&embed_cell(&cur)?)?;
        cur = fine.plaquette_sides(*qx as usize, *qy as usize)?;
    }
    let lat = embed_cell(&cur)?;
    lat.cell_flux(0, 0)
}

fn quadrant_bits(level: u32, coord: (u64, u64)) -> Vec<(u64, u64)> {
    (1..=level)
        .map(|k| ((coord.0 >> (level - k)) & 1, (coord.1 >> (level - k)) & 1))
        .collect()
}

fn eval_factor(kind: &ObservableKind, fine_flux: f64) -> f64 {
    match kind {
        ObservableKind::Flux | ObservableKind::FluxProduct => fine_flux,
        ObservableKind::TracePolynomial { coeffs } => {
            let tr = 2.0 * fine_flux.cos();
            coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| c * tr.powi(i as i32))
                .sum()
        }
    }
}

/// Classical pushforward of a position-diagonal observable through m levels
/// of lambda = 1 fine-graining: sample (or integrate) Haar level-0
/// configurations, subdivide classically, evaluate on the fine lattice.
pub fn pushforward_oracle(
    obs: &PlaquetteObservable,
    sampler: Sampler,
    lambda: f64,
) -> Result<OracleEstimate> {
    require_lambda_one(lambda)?;
    obs.validate()?;
    let m = obs.level;
    match sampler {
        Sampler::Quadrature => {
            // Group fine plaquettes by their level-0 ancestor; distinct
            // ancestors are Haar independent, so the expectation factorizes
            // into one class-angle integral per ancestor.
            let mut groups: std::collections::HashMap<(u64, u64), Vec<(u64, u64)>> =
                std::collections::HashMap::new();
            for c in &obs.coords {
                groups
                    .entry((c.0 >> m, c.1 >> m))
                    .or_default()
                    .push(*c);
            }
            let rule = su2_class_rule(64);
            let mut value = 1.0;
            for members in groups.values() {
                let mut integral = 0.0;
                for (phi, w) in &rule {
                    let sides = [
                        GroupElement::su2_diagonal(*phi),
                        GroupElement::identity(GroupVariant::Su2),
                        GroupElement::identity(GroupVariant::Su2),
                        GroupElement::identity(GroupVariant::Su2),
                    ];
                    let mut prod = 1.0;
                    for c in members {
                        let flux = descend_flux(&sides, &quadrant_bits(m, *c))?;
                        prod *= eval_factor(&obs.kind, flux);
                    }
                    integral += w * prod;
                }
                value *= integral;
            }
            Ok(OracleEstimate {
                value,
                stderr: 0.0,
                samples: 0,
                seed: 0,
            })
        }
        Sampler::MonteCarlo { seed, samples } => {
            if samples == 0 {
                return Err(LgtError::InvalidArgument("need at least one sample".into()));
            }
            let (nx, ny) = (obs.base_cells.0 as usize, obs.base_cells.1 as usize);
            let ancestors: Vec<((u64, u64), Vec<(u64, u64)>)> = {
                let mut groups: std::collections::HashMap<(u64, u64), Vec<(u64, u64)>> =
                    std::collections::HashMap::new();
                for c in &obs.coords {
                    groups.entry((c.0 >> m, c.1 >> m)).or_default().push(*c);
                }
                let mut v: Vec<_> = groups.into_iter().collect();
                v.sort();
                v
            };
            // Fixed-size sample blocks with per-block derived seeds; the
            // reduction order is deterministic regardless of scheduling.
            const BLOCK: u64 = 4096;
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            let mut done = 0u64;
            let mut block_id = 0u64;
            while done < samples {
                let count = BLOCK.min(samples - done);
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ block_id.wrapping_mul(0x9E37_79B9_7F4A_7C15));
                for _ in 0..count {
                    let mut lat = LatticeConfig2d::flat(GroupVariant::Su2, nx, ny, true)?;
                    for i in 0..nx {
                        for j in 0..ny {
                            lat.set_hx(i, j, haar_sample(GroupVariant::Su2, &mut rng));
                            lat.set_vy(i, j, haar_sample(GroupVariant::Su2, &mut rng));
                        }
                    }
                    let mut prod = 1.0;
                    for ((ax, ay), members) in &ancestors {
                        let sides = lat.plaquette_sides(*ax as usize, *ay as usize)?;
                        for c in members {
                            let flux = descend_flux(&sides, &quadrant_bits(m, *c))?;
                            prod *= eval_factor(&obs.kind, flux);
                        }
                    }
                    sum += prod;
                    sumsq += prod * prod;
                }
                done += count;
                block_id += 1;
            }
            let n = samples as f64;
            let mean = sum / n;
            let var = ((sumsq / n) - mean * mean).max(0.0);
            let stderr = (var / n).sqrt();
            Ok(OracleEstimate {
                value: mean,
                stderr,
                samples,
                seed,
            })
        }
    }
}

/// Loop geometry for `wilson_loop_in_ansatz`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopSpec {
    /// The empty loop: transporter is the identity, trace 2.
    Trivial,
    /// The boundary of one elementary plaquette on the level-m lattice.
    ElementaryPlaquette { coord: (u64, u64) },
    /// Any other nontrivial closed loop.
    General,
}

/// Ancilla choice of the ansatz layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AncillaKind {
    /// Haar-state ancillas (the basic ansatz): every nontrivial Wilson loop
    /// has exactly zero expectation.
    Omega0,
    /// Position-concentrated ancillas (lambda = 1): evaluated classically.
    LambdaOne,
}

/// Wilson-loop expectation in the ansatz.
pub fn wilson_loop_in_ansatz(
    spec: &LoopSpec,
    m: u32,
    ancilla: AncillaKind,
    sampler: Sampler,
    base_cells: (u64, u64),
) -> Result<OracleEstimate> {
    match (ancilla, spec) {
        (_, LoopSpec::Trivial) => Ok(OracleEstimate {
            value: 2.0,
            stderr: 0.0,
            samples: 0,
            seed: 0,
        }),
        (AncillaKind::Omega0, _) => Ok(OracleEstimate {
            value: 0.0,
            stderr: 0.0,
            samples: 0,
            seed: 0,
        }),
        (AncillaKind::LambdaOne, LoopSpec::ElementaryPlaquette { coord }) => {
            // tr M = 2 cos(Phi): a degree-1 trace polynomial.
            let obs = PlaquetteObservable::trace_polynomial(vec![0.0, 1.0], m, *coord, base_cells);
            pushforward_oracle(&obs, sampler, 1.0)
        }
        (AncillaKind::LambdaOne, LoopSpec::General) => Err(LgtError::InvalidArgument(
            "general loops at lambda = 1 are not supported".into(),
        )),
    }
}

/// Serializable result record.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeraRecord {
    pub observable: String,
    pub m: u32,
    pub method: String,
    pub value: f64,
    pub stderr: f64,
    pub samples: u64,
    pub seed: u64,
}

impl MeraRecord {
    pub fn new(observable: &PlaquetteObservable, method: &str, est: &OracleEstimate) -> Self {
        let name = match &observable.kind {
            ObservableKind::Flux => "flux".to_string(),
            ObservableKind::FluxProduct => format!("flux_product[{}]", observable.coords.len()),
            ObservableKind::TracePolynomial { coeffs } => {
                format!("trace_polynomial[deg {}]", coeffs.len().saturating_sub(1))
            }
        };
        MeraRecord {
            observable: name,
            m: observable.level,
            method: method.to_string(),
            value: est.value,
            stderr: est.stderr,
            samples: est.samples,
            seed: est.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const BASE: (u64, u64) = (2, 2);

    #[test]
    fn ascend_prefactors_exact() {
        let f = PlaquetteObservable::flux(3, (5, 2), BASE);
        let a = ascend(&f).unwrap();
        assert_eq!(a.prefactor, Ratio { num: 1, den: 4 });
        assert_eq!(a.coarse.coords, vec![(2, 1)]);
        assert_eq!(a.coarse.level, 2);
        let p = PlaquetteObservable::flux_product(1, vec![(0, 0), (1, 1)], BASE);
        assert_eq!(ascend(&p).unwrap().prefactor, Ratio { num: 1, den: 16 });
        let t = PlaquetteObservable::trace_polynomial(vec![0.0, 1.0], 1, (0, 0), BASE);
        let at = ascend(&t).unwrap();
        assert_eq!(at.prefactor, Ratio::ONE);
        assert_eq!(at.coarse.root_quarters, 1);
        assert!(ascend(&PlaquetteObservable::flux(0, (0, 0), BASE)).is_err());
    }

    #[test]
    fn flux_expectation_recursion() {
        for m in 0..=4u32 {
            let obs = PlaquetteObservable::flux(m, (0, 0), BASE);
            let v = expect_in_ansatz(&obs, 1.0).unwrap();
            let want = PI / (2.0 * 4f64.powi(m as i32));
            assert!((v - want).abs() < 1e-9, "m={m}: {v} vs {want}");
        }
        assert!(expect_in_ansatz(&PlaquetteObservable::flux(0, (0, 0), BASE), 0.7).is_err());
    }

    #[test]
    fn two_point_closed_forms() {
        let same = PlaquetteObservable::flux_product(1, vec![(0, 0), (1, 1)], BASE);
        let v_same = expect_in_ansatz(&same, 1.0).unwrap();
        let want_same = (PI * PI / 3.0 - 0.5) / 16.0;
        assert!((v_same - want_same).abs() < 1e-9, "{v_same} vs {want_same}");
        let far = PlaquetteObservable::flux_product(1, vec![(0, 0), (2, 2)], BASE);
        let v_far = expect_in_ansatz(&far, 1.0).unwrap();
        let want_far = (PI * PI / 4.0) / 16.0;
        assert!((v_far - want_far).abs() < 1e-9, "{v_far} vs {want_far}");
    }

    #[test]
    fn quadrature_pushforward_matches_closed_forms() {
        for (obs, want) in [
            (PlaquetteObservable::flux(0, (0, 0), BASE), PI / 2.0),
            (PlaquetteObservable::flux(1, (1, 0), BASE), PI / 8.0),
            (
                PlaquetteObservable::flux_product(1, vec![(0, 0), (1, 1)], BASE),
                (PI * PI / 3.0 - 0.5) / 16.0,
            ),
            (
                PlaquetteObservable::flux_product(1, vec![(0, 0), (2, 2)], BASE),
                (PI * PI / 4.0) / 16.0,
            ),
        ] {
            let est = pushforward_oracle(&obs, Sampler::Quadrature, 1.0).unwrap();
            assert!(
                (est.value - want).abs() < 1e-6,
                "{obs:?}: {} vs {want}",
                est.value
            );
        }
    }

    #[test]
    fn descent_matches_full_lattice_subdivision() {
        // The single-cell descent must reproduce subdivide_2d on a full
        // random lattice, two levels deep.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut lat = LatticeConfig2d::flat(GroupVariant::Su2, 2, 2, true).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                lat.set_hx(i, j, haar_sample(GroupVariant::Su2, &mut rng));
                lat.set_vy(i, j, haar_sample(GroupVariant::Su2, &mut rng));
            }
        }
        let fine1 = subdivide_2d(&lat).unwrap();
        let fine2 = subdivide_2d(&fine1).unwrap();
        for coord in [(0u64, 0u64), (1, 2), (3, 3), (2, 1)] {
            let anc = ((coord.0 >> 2) as usize, (coord.1 >> 2) as usize);
            let sides = lat.plaquette_sides(anc.0, anc.1).unwrap();
            let got = descend_flux(&sides, &quadrant_bits(2, coord)).unwrap();
            let want = fine2.cell_flux(coord.0 as usize, coord.1 as usize).unwrap();
            assert!((got - want).abs() < 1e-9, "coord {coord:?}: {got} vs {want}");
        }
    }

    #[test]
    fn monte_carlo_agrees_within_error_bars() {
        let obs = PlaquetteObservable::flux(1, (0, 0), BASE);
        let est = pushforward_oracle(
            &obs,
            Sampler::MonteCarlo {
                seed: 99,
                samples: 20_000,
            },
            1.0,
        )
        .unwrap();
        let want = PI / 8.0;
        assert!(
            (est.value - want).abs() < 3.0 * est.stderr.max(1e-12),
            "{} +- {} vs {want}",
            est.value,
            est.stderr
        );
        // Determinism for a fixed seed.
        let again = pushforward_oracle(
            &obs,
            Sampler::MonteCarlo {
                seed: 99,
                samples: 20_000,
            },
            1.0,
        )
        .unwrap();
        assert_eq!(est.value.to_bits(), again.value.to_bits());
    }

    #[test]
    fn wilson_loops() {
        let triv = wilson_loop_in_ansatz(
            &LoopSpec::Trivial,
            1,
            AncillaKind::Omega0,
            Sampler::Quadrature,
            BASE,
        )
        .unwrap();
        assert_eq!(triv.value, 2.0);
        let zero = wilson_loop_in_ansatz(
            &LoopSpec::General,
            2,
            AncillaKind::Omega0,
            Sampler::Quadrature,
            BASE,
        )
        .unwrap();
        assert_eq!(zero.value, 0.0);
        // lambda = 1 elementary fine plaquette: E[2 cos(phi / 4^m)] by two
        // independent evaluations.
        let quad = wilson_loop_in_ansatz(
            &LoopSpec::ElementaryPlaquette { coord: (1, 1) },
            1,
            AncillaKind::LambdaOne,
            Sampler::Quadrature,
            BASE,
        )
        .unwrap();
        let closed: f64 = su2_class_rule(64)
            .iter()
            .map(|(phi, w)| w * 2.0 * (phi / 4.0).cos())
            .sum();
        assert!((quad.value - closed).abs() < 1e-9);
        let mc = wilson_loop_in_ansatz(
            &LoopSpec::ElementaryPlaquette { coord: (1, 1) },
            1,
            AncillaKind::LambdaOne,
            Sampler::MonteCarlo {
                seed: 4,
                samples: 20_000,
            },
            BASE,
        )
        .unwrap();
        assert!((mc.value - closed).abs() < 3.0 * mc.stderr.max(1e-12));
    }

    #[test]
    fn record_serialization_round_trip() {
        let obs = PlaquetteObservable::flux(1, (0, 0), BASE);
        let est = pushforward_oracle(&obs, Sampler::Quadrature, 1.0).unwrap();
        let rec = MeraRecord::new(&obs, "quadrature", &est);
        let j = serde_json::to_string(&rec).unwrap();
        let back: MeraRecord = serde_json::from_str(&j).unwrap();
        assert_eq!(back.observable, "flux");
        assert_eq!(back.m, 1);
        assert!((back.value - est.value).abs() < 1e-15);
    }
}
