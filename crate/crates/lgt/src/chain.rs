//! The (1+1)D principal chiral chain: Hamiltonian assembly, ground-state
//! solvers, the fine-graining isometry, and the fidelity-per-site experiment.
//!
//! The Hamiltonian on N group-valued links is
//!   H(g) = (g^2/2) sum_e (-Delta_e) + (1/g^2) sum_bonds (2 - Re tr(u_e u_{e+1}^dag))
//! with -Delta the (positive) Casimir and the trace coupling assembled from
//! position-operator tensor pairs.  The per-bond constant 2 makes every bond
//! term positive semidefinite and the strong-coupling ground state exactly
//! the product of Haar states.
//!
//! Fine-graining inserts an ancilla loop |psi(lambda)> between every adjacent
//! pair of links and applies the controlled-interpolation gate CI, a
//! right-rotation by A(U_e, U_{e+1}) = U_e sqrt(U_e^dag U_{e+1}) on the new
//! link, controlled on the positions of both neighbours.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LgtError, Result};
use crate::graph::apply_klocal_dense;
use crate::group::GroupVariant;
use crate::linkspace::{
    laplacian, position_op, rotation_op, sample_position_projector, state_psi_lambda, Side,
    TruncatedLinkBasis,
};

/// Largest dense state-vector length the chain solvers will allocate.
pub const CHAIN_DENSE_GUARD: usize = 1 << 24;

/// Chain boundary condition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    Open,
}

/// Ground-state solver selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Ed,
    Dmrg,
}

/// Parameters of one chain problem.
#[derive(Clone)]
pub struct ChainParams {
    /// Number of links N (>= 2).
    pub n_links: usize,
    /// Coupling g^2 (> 0); lattice spacing is fixed to 1.
    pub g2: f64,
    /// Shared link basis.
    pub basis: Arc<TruncatedLinkBasis>,
    /// Boundary condition.
    pub boundary: Boundary,
    /// Which solver `ground_state` uses.
    pub solver: SolverKind,
    /// DMRG bond dimension (>= 1; ignored by ED).
    pub bond_dim: usize,
    /// Seed for solver initialisation.
    pub seed: u64,
}

impl ChainParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_links < 2 {
            return Err(LgtError::InvalidArgument("need at least 2 links".into()));
        }
        if !(self.g2 > 0.0) || !self.g2.is_finite() {
            return Err(LgtError::InvalidArgument("g^2 must be positive".into()));
        }
        if self.bond_dim < 1 {
            return Err(LgtError::InvalidArgument("bond dimension must be >= 1".into()));
        }
        Ok(())
    }

    /// The ordered list of coupled bonds (e, e+1 mod N).
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        let n = self.n_links;
        match self.boundary {
            Boundary::Periodic => (0..n).map(|e| (e, (e + 1) % n)).collect(),
            Boundary::Open => (0..n - 1).map(|e| (e, e + 1)).collect(),
        }
    }
}

/// Re tr(u_e u_{e+1}^dag) as a two-site operator on (left, right) slots,
/// little-endian, built from position-operator tensor pairs.
pub fn re_trace_coupling(basis: &Arc<TruncatedLinkBasis>) -> Result<DMatrix<Complex64>> {
    let d = basis.dim();
    let pairs: Vec<(i64, i64)> = match basis.variant {
        GroupVariant::U1 => vec![(0, 0)],
        GroupVariant::Su2 => vec![(-1, -1), (-1, 1), (1, -1), (1, 1)],
    };
    let mut out = DMatrix::<Complex64>::zeros(d * d, d * d);
    for (two_a, two_b) in pairs {
        let p = position_op(basis, two_a, two_b)?;
        let pd = p.mat.adjoint();
        // (1/2)(P (x) P^dag + P^dag (x) P), slot order (left, right).
        for lr in 0..d {
            for lc in 0..d {
                let a = p.mat[(lr, lc)];
                let ad = pd[(lr, lc)];
                if a.norm_sqr() == 0.0 && ad.norm_sqr() == 0.0 {
                    continue;
                }
                for rr in 0..d {
                    for rc in 0..d {
                        let b = pd[(rr, rc)];
                        let bd = p.mat[(rr, rc)];
                        let v = (a * b + ad * bd) * 0.5;
                        if v.norm_sqr() > 0.0 {
                            out[(lr + d * rr, lc + d * rc)] += v;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Assembled chain Hamiltonian: a diagonal kinetic term per link plus one
/// dense two-site bond term per coupled pair.
pub struct ChainHamiltonian {
    pub params: ChainParams,
    /// Kinetic diagonal (g^2/2) * casimir, one entry per link-basis state.
    pub kinetic_diag: Vec<f64>,
    /// Bond operator (1/g^2) (2 - Re tr(u_e u_{e+1}^dag)) on (e, e+1).
    pub bond_op: DMatrix<Complex64>,
    /// Coupled bonds.
    pub bonds: Vec<(usize, usize)>,
}

/// Build the chain Hamiltonian terms.
pub fn build_hamiltonian(params: &ChainParams) -> Result<ChainHamiltonian> {
    params.validate()?;
    let basis = &params.basis;
    let d = basis.dim();
    let lap = laplacian(basis);
    let kinetic_diag: Vec<f64> = (0..d).map(|i| 0.5 * params.g2 * lap.mat[(i, i)].re).collect();
    let retr = re_trace_coupling(basis)?;
    let mut bond_op = -retr;
    for i in 0..d * d {
        bond_op[(i, i)] += Complex64::new(2.0, 0.0);
    }
    bond_op *= Complex64::new(1.0 / params.g2, 0.0);
    Ok(ChainHamiltonian {
        params: params.clone(),
        kinetic_diag,
        bond_op,
        bonds: params.bonds(),
    })
}

impl ChainHamiltonian {
    pub fn local_dim(&self) -> usize {
        self.params.basis.dim()
    }

    /// Total dense dimension d^N, or an error beyond the guard.
    pub fn dim(&self) -> Result<usize> {
        let d = self.local_dim();
        let mut dim = 1usize;
        for _ in 0..self.params.n_links {
            dim = dim
                .checked_mul(d)
                .filter(|v| *v <= CHAIN_DENSE_GUARD)
                .ok_or_else(|| LgtError::ResourceGuard("chain dimension exceeds guard".into()))?;
        }
        Ok(dim)
    }

    /// y = H x on dense amplitude vectors.
    pub fn matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        let d = self.local_dim();
        let n = self.params.n_links;
        for (idx, yi) in y.iter_mut().enumerate() {
            let mut diag = 0.0;
            let mut rem = idx;
            for _ in 0..n {
                diag += self.kinetic_diag[rem % d];
                rem /= d;
            }
            *yi = x[idx] * diag;
        }
        let mut scratch = vec![Complex64::new(0.0, 0.0); x.len()];
        for (a, b) in &self.bonds {
            scratch.copy_from_slice(x);
            apply_klocal_dense(&mut scratch, d, &[*a, *b], &self.bond_op)
                .expect("bond dims always match");
            for (yi, s) in y.iter_mut().zip(scratch.iter()) {
                *yi += *s;
            }
        }
    }

    /// <x|H|x> / <x|x> for a dense vector.
    pub fn expectation(&self, x: &[Complex64]) -> f64 {
        let mut y = vec![Complex64::new(0.0, 0.0); x.len()];
        self.matvec(x, &mut y);
        let num: Complex64 = x.iter().zip(y.iter()).map(|(a, b)| a.conj() * b).sum();
        let den: f64 = x.iter().map(|a| a.norm_sqr()).sum();
        num.re / den
    }

    /// Full dense matrix (guarded; intended for small cross-checks).
    pub fn to_dense(&self) -> Result<DMatrix<Complex64>> {
        let dim = self.dim()?;
        if dim > 4096 {
            return Err(LgtError::ResourceGuard(
                "dense Hamiltonian matrix limited to dimension 4096".into(),
            ));
        }
        let mut h = DMatrix::<Complex64>::zeros(dim, dim);
        let mut x = vec![Complex64::new(0.0, 0.0); dim];
        let mut y = vec![Complex64::new(0.0, 0.0); dim];
        for c in 0..dim {
            x[c] = Complex64::new(1.0, 0.0);
            self.matvec(&x, &mut y);
            for r in 0..dim {
                h[(r, c)] = y[r];
            }
            x[c] = Complex64::new(0.0, 0.0);
        }
        Ok(h)
    }
}

/// Dense chain state: one amplitude per product-basis index, little-endian
/// in the link slots.
#[derive(Clone)]
pub struct DenseChain {
    pub basis: Arc<TruncatedLinkBasis>,
    pub n_links: usize,
    pub amp: Vec<Complex64>,
}

impl DenseChain {
    pub fn norm(&self) -> f64 {
        self.amp.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm();
        if n < 1e-300 {
            return Err(LgtError::InvalidArgument("cannot normalize zero state".into()));
        }
        let s = Complex64::new(1.0 / n, 0.0);
        for a in &mut self.amp {
            *a *= s;
        }
        Ok(())
    }

    pub fn overlap(&self, other: &DenseChain) -> Result<Complex64> {
        if !Arc::ptr_eq(&self.basis, &other.basis)
            && (self.basis.variant != other.basis.variant
                || self.basis.two_l_max != other.basis.two_l_max)
        {
            return Err(LgtError::Incompatible("link bases differ".into()));
        }
        if self.n_links != other.n_links {
            return Err(LgtError::Incompatible("link counts differ".into()));
        }
        Ok(self
            .amp
            .iter()
            .zip(other.amp.iter())
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Product state from per-link vectors.
    pub fn product(basis: &Arc<TruncatedLinkBasis>, links: &[crate::linkspace::LinkVector]) -> Self {
        let d = basis.dim();
        let n = links.len();
        let dim = d.pow(n as u32);
        let mut amp = vec![Complex64::new(1.0, 0.0); dim];
        for (idx, a) in amp.iter_mut().enumerate() {
            let mut rem = idx;
            for link in links {
                *a *= link.coeffs[rem % d];
                rem /= d;
            }
        }
        DenseChain {
            basis: basis.clone(),
            n_links: n,
            amp,
        }
    }
}

/// Ground-state payload: dense vector or matrix product state.
pub enum ChainState {
    Dense(DenseChain),
    Mps(crate::dmrg::Mps),
}

impl ChainState {
    /// Dense form (guarded for MPS contraction).
    pub fn to_dense(&self) -> Result<DenseChain> {
        match self {
            ChainState::Dense(d) => Ok(d.clone()),
            ChainState::Mps(m) => m.to_dense(),
        }
    }
}

/// Result of a ground-state solve.
pub struct GroundStateResult {
    pub state: ChainState,
    pub energy: f64,
    pub energy_density: f64,
    /// ED: residual norm ||Hx - Ex||; DMRG: last per-sweep energy change.
    pub residual: f64,
    /// Matvec count (ED) or sweep count (DMRG).
    pub iterations: usize,
}

/// Lanczos iteration with full reorthogonalisation and thick restarts on the
/// lowest Ritz vector.  Returns (energy, eigenvector, residual, matvecs).
pub fn lanczos_lowest<F>(
    dim: usize,
    mut apply: F,
    init: Option<&[Complex64]>,
    seed: u64,
    tol: f64,
    krylov_dim: usize,
    max_restarts: usize,
) -> Result<(f64, Vec<Complex64>, f64, usize)>
where
    F: FnMut(&[Complex64], &mut [Complex64]),
{
    let mut v: Vec<Complex64> = match init {
        Some(x) => x.to_vec(),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..dim)
                .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                .collect()
        }
    };
    let nrm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if nrm < 1e-300 {
        return Err(LgtError::InvalidArgument("zero start vector".into()));
    }
    for a in &mut v {
        *a /= nrm;
    }
    let mut matvecs = 0usize;
    let mut w = vec![Complex64::new(0.0, 0.0); dim];
    for _restart in 0..max_restarts {
        let mut basis_vecs: Vec<Vec<Complex64>> = vec![v.clone()];
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        for j in 0..krylov_dim {
            apply(&basis_vecs[j], &mut w);
            matvecs += 1;
            let alpha: f64 = basis_vecs[j]
                .iter()
                .zip(w.iter())
                .map(|(a, b)| (a.conj() * b).re)
                .sum();
            alphas.push(alpha);
            // Full reorthogonalisation, two passes.
            for _ in 0..2 {
                for q in &basis_vecs {
                    let ov: Complex64 = q.iter().zip(w.iter()).map(|(a, b)| a.conj() * b).sum();
                    for (wi, qi) in w.iter_mut().zip(q.iter()) {
                        *wi -= ov * qi;
                    }
                }
            }
            let beta = w.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            if !beta.is_finite() {
                return Err(LgtError::Convergence("Lanczos produced non-finite beta".into()));
            }
            if beta < 1e-13 {
                // Invariant subspace reached; restart cleans any residual
                // contamination in the Ritz vector.
                break;
            }
            betas.push(beta);
            let next: Vec<Complex64> = w.iter().map(|a| a / beta).collect();
            basis_vecs.push(next);
        }
        // Tridiagonal eigenproblem.
        let m = alphas.len();
        let mut t = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alphas[i];
            if i + 1 < m {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let eig = t.symmetric_eigen();
        let mut best = 0usize;
        for i in 1..m {
            if eig.eigenvalues[i] < eig.eigenvalues[best] {
                best = i;
            }
        }
        let energy = eig.eigenvalues[best];
        let mut ritz = vec![Complex64::new(0.0, 0.0); dim];
        for (i, q) in basis_vecs.iter().take(m).enumerate() {
            let c = eig.eigenvectors[(i, best)];
            for (r, qi) in ritz.iter_mut().zip(q.iter()) {
                *r += qi * c;
            }
        }
        let rn = ritz.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        for a in &mut ritz {
            *a /= rn;
        }
        apply(&ritz, &mut w);
        matvecs += 1;
        let residual = w
            .iter()
            .zip(ritz.iter())
            .map(|(hx, x)| (hx - x * energy).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if residual <= tol {
            return Ok((energy, ritz, residual, matvecs));
        }
        v = ritz;
    }
    Err(LgtError::Convergence(format!(
        "Lanczos did not reach residual {tol:.1e} after {max_restarts} restarts"
    )))
}

/// Rotate a dense vector so its largest-magnitude coefficient is real
/// positive.
pub fn fix_phase(amp: &mut [Complex64]) {
    let mut best = 0usize;
    for (i, a) in amp.iter().enumerate() {
        if a.norm_sqr() > amp[best].norm_sqr() {
            best = i;
        }
    }
    let mag = amp[best].norm();
    if mag > 1e-300 {
        let phase = amp[best] / mag;
        let conj = phase.conj();
        for a in amp.iter_mut() {
            *a *= conj;
        }
    }
}

/// Ground state by the solver selected in `params`.
pub fn ground_state(params: &ChainParams) -> Result<GroundStateResult> {
    let h = build_hamiltonian(params)?;
    match params.solver {
        SolverKind::Ed => ground_state_ed(&h, None),
        SolverKind::Dmrg => crate::dmrg::dmrg_ground(&h),
    }
}

/// Exact-diagonalisation ground state (Lanczos with residual <= 1e-8,
/// optional warm start).
pub fn ground_state_ed(
    h: &ChainHamiltonian,
    init: Option<&[Complex64]>,
) -> Result<GroundStateResult> {
    let dim = h.dim()?;
    let (energy, mut vec, residual, iters) = lanczos_lowest(
        dim,
        |x, y| h.matvec(x, y),
        init,
        h.params.seed,
        1e-9,
        80,
        60,
    )?;
    if residual > 1e-8 {
        return Err(LgtError::Convergence(format!(
            "ED residual {residual:.3e} above 1e-8"
        )));
    }
    fix_phase(&mut vec);
    Ok(GroundStateResult {
        energy,
        energy_density: energy / h.params.n_links as f64,
        state: ChainState::Dense(DenseChain {
            basis: h.params.basis.clone(),
            n_links: h.params.n_links,
            amp: vec,
        }),
        residual,
        iterations: iters,
    })
}

/// Fidelity per site |<a|b>|^{1/N'} between normalized states on the same
/// chain.
pub fn fidelity_per_site(a: &ChainState, b: &ChainState) -> Result<f64> {
    let da = a.to_dense()?;
    let db = b.to_dense()?;
    let ov = da.overlap(&db)?.norm() / (da.norm() * db.norm());
    Ok(ov.powf(1.0 / da.n_links as f64))
}

/// How the controlled-interpolation gate is assembled.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiAssembly {
    /// Closed-form Fourier matrix elements (U(1) only, exact at the cutoff).
    ExactFourier,
    /// Haar-quadrature assembly at the given exactness degree.
    Quadrature(usize),
}

/// The controlled-interpolation gate CI on (left link, new link, right link),
/// little-endian: a right-rotation R^dag by A(U_l, U_r) = U_l sqrt(U_l^dag U_r)
/// on the new link, controlled on the neighbouring link positions.
pub fn ci_gate(
    basis: &Arc<TruncatedLinkBasis>,
    assembly: CiAssembly,
) -> Result<DMatrix<Complex64>> {
    let d = basis.dim();
    match assembly {
        CiAssembly::ExactFourier => {
            if basis.variant != GroupVariant::U1 {
                return Err(LgtError::InvalidArgument(
                    "closed-form CI assembly is available for U(1) only".into(),
                ));
            }
            // In charge basis the gate is block diagonal in the new link's
            // charge m; on the controls it multiplies by e^{-i m A(t, t')}
            // with A = t + principal(t' - t)/2.  Fourier coefficients:
            // nonzero only when n_l - n_l' + n_r - n_r' - m = 0, with value
            // sinc(S), S = n_r - n_r' - m/2.
            let charges: Vec<i64> = basis.states.iter().map(|s| s.0).collect();
            let mut gate = DMatrix::<Complex64>::zeros(d * d * d, d * d * d);
            for (im, two_m) in charges.iter().enumerate() {
                for (il_r, tl_r) in charges.iter().enumerate() {
                    for (il_c, tl_c) in charges.iter().enumerate() {
                        for (ir_r, tr_r) in charges.iter().enumerate() {
                            for (ir_c, tr_c) in charges.iter().enumerate() {
                                let p2 = (tl_c - tl_r) + (tr_c - tr_r) - two_m;
                                if p2 != 0 {
                                    continue;
                                }
                                // S in quarter units: 4S = 2(n_r - n_r')*2 - 2m
                                let s4 = 2 * (tr_c - tr_r) - two_m;
                                let val = if s4 == 0 {
                                    1.0
                                } else {
                                    let s = s4 as f64 / 4.0;
                                    (std::f64::consts::PI * s).sin() / (std::f64::consts::PI * s)
                                };
                                let row = il_r + d * im + d * d * ir_r;
                                let col = il_c + d * im + d * d * ir_c;
                                gate[(row, col)] = Complex64::new(val, 0.0);
                            }
                        }
                    }
                }
            }
            Ok(gate)
        }
        CiAssembly::Quadrature(degree) => {
            let rule = crate::group::haar_quadrature(basis.variant, degree)?;
            let kets: Vec<_> = rule
                .nodes
                .iter()
                .map(|u| sample_position_projector(basis, u))
                .collect::<Result<Vec<_>>>()?;
            let mut gate = DMatrix::<Complex64>::zeros(d * d * d, d * d * d);
            for (q, wq) in rule.weights.iter().enumerate() {
                let uq = &rule.nodes[q];
                for (r, wr) in rule.weights.iter().enumerate() {
                    let ur = &rule.nodes[r];
                    let a = uq.multiply(&uq.inverse().multiply(ur)?.principal_root(2)?)?;
                    let rot = rotation_op(basis, Side::Right, &a)?.mat.adjoint();
                    let w = wq * wr;
                    for il_r in 0..d {
                        let kl_r = kets[q].coeffs[il_r];
                        if kl_r.norm_sqr() < 1e-300 {
                            continue;
                        }
                        for il_c in 0..d {
                            let pl = kl_r * kets[q].coeffs[il_c].conj() * w;
                            for ir_r in 0..d {
                                let kr_r = kets[r].coeffs[ir_r];
                                if kr_r.norm_sqr() < 1e-300 {
                                    continue;
                                }
                                for ir_c in 0..d {
                                    let p = pl * kr_r * kets[r].coeffs[ir_c].conj();
                                    for im_r in 0..d {
                                        for im_c in 0..d {
                                            let g = rot[(im_r, im_c)];
                                            if g.norm_sqr() > 0.0 {
                                                let row = il_r + d * im_r + d * d * ir_r;
                                                let col = il_c + d * im_c + d * d * ir_c;
                                                gate[(row, col)] += p * g;
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
            Ok(gate)
        }
    }
}

/// Output of one fine-graining application.
pub struct FineGrainOutput {
    /// Normalized fine state on 2N (periodic) or 2N-1 (open) links; original
    /// link e sits at fine slot 2e, the ancilla of bond e at slot 2e+1.
    pub state: DenseChain,
    /// Norm deficit |1 - ||V psi|| | accumulated by cutoff truncation.
    pub isometry_defect: f64,
}

/// Apply the fine-graining isometry V(lambda): insert |psi(lambda)> ancillas
/// between adjacent links and apply the CI gate on every bond.
pub fn fine_grain(
    state: &DenseChain,
    boundary: Boundary,
    lambda: f64,
    assembly: CiAssembly,
) -> Result<FineGrainOutput> {
    let basis = &state.basis;
    let d = basis.dim();
    let n = state.n_links;
    if n < 2 {
        return Err(LgtError::InvalidArgument("need at least 2 links".into()));
    }
    let n_fine = match boundary {
        Boundary::Periodic => 2 * n,
        Boundary::Open => 2 * n - 1,
    };
    let mut dim_fine = 1usize;
    for _ in 0..n_fine {
        dim_fine = dim_fine
            .checked_mul(d)
            .filter(|v| *v <= CHAIN_DENSE_GUARD)
            .ok_or_else(|| LgtError::ResourceGuard("fine chain dimension exceeds guard".into()))?;
    }
    let psi = state_psi_lambda(basis, lambda)?;
    let mut amp = vec![Complex64::new(0.0, 0.0); dim_fine];
    for (idx, a) in amp.iter_mut().enumerate() {
        let mut rem = idx;
        let mut coarse = 0usize;
        let mut stride = 1usize;
        let mut anc = Complex64::new(1.0, 0.0);
        for slot in 0..n_fine {
            let digit = rem % d;
            rem /= d;
            if slot % 2 == 0 {
                coarse += digit * stride;
                stride *= d;
            } else {
                anc *= psi.coeffs[digit];
            }
        }
        *a = state.amp[coarse] * anc;
    }
    let gate = ci_gate(basis, assembly)?;
    let n_bonds = match boundary {
        Boundary::Periodic => n,
        Boundary::Open => n - 1,
    };
    for e in 0..n_bonds {
        let slots = [2 * e, 2 * e + 1, (2 * e + 2) % n_fine];
        apply_klocal_dense(&mut amp, d, &slots, &gate)?;
    }
    let mut out = DenseChain {
        basis: basis.clone(),
        n_links: n_fine,
        amp,
    };
    let in_norm = state.norm();
    let defect = (out.norm() / in_norm - 1.0).abs();
    out.normalize()?;
    Ok(FineGrainOutput {
        state: out,
        isometry_defect: defect,
    })
}

/// Parameters of the fidelity-per-site sweep.
#[derive(Clone)]
pub struct SweepParams {
    pub n_links: usize,
    pub basis: Arc<TruncatedLinkBasis>,
    pub g0_inv2: f64,
    pub g_inv2_grid: Vec<f64>,
    pub lambda_grid: Vec<f64>,
    pub boundary: Boundary,
    pub assembly: CiAssembly,
    pub solver: SolverKind,
    pub bond_dim: usize,
    pub seed: u64,
}

/// One sweep cell; failed cells carry NaN fidelities and a message.
#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub g0_inv2: f64,
    pub g_inv2: f64,
    pub lambda: f64,
    pub f_finegrained: f64,
    pub f_baseline: f64,
    pub energy_density: f64,
    pub isometry_defect: f64,
    pub solver: String,
    pub n: usize,
    pub d: usize,
    pub l_max: f64,
    pub error: Option<String>,
}

/// CSV serialisation of sweep rows (full-precision decimals, stable column
/// order).
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "g0_inv2,g_inv2,lambda,f_finegrained,f_baseline,energy_density,isometry_defect,solver,N,D,l_max\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{},{:.16e}\n",
            r.g0_inv2,
            r.g_inv2,
            r.lambda,
            r.f_finegrained,
            r.f_baseline,
            r.energy_density,
            r.isometry_defect,
            r.solver,
            r.n,
            r.d,
            r.l_max
        ));
    }
    out
}

/// Run the fidelity-per-site experiment: fine-grain the coarse ground state
/// at g_0 with each lambda and compare against fine-chain ground states over
/// the g^{-2} grid; the baseline column is the fine-chain fidelity between
/// the ground states at g_0 and g without fine-graining.
pub fn fidelity_sweep(p: &SweepParams) -> Result<Vec<SweepRow>> {
    if p.g0_inv2 <= 0.0 || p.g_inv2_grid.iter().any(|g| *g <= 0.0) {
        return Err(LgtError::InvalidArgument("g^{-2} values must be positive".into()));
    }
    let solver_name = match p.solver {
        SolverKind::Ed => "ed",
        SolverKind::Dmrg => "dmrg",
    }
    .to_string();
    let l_max = p.basis.two_l_max as f64 / 2.0;
    let mk_params = |n: usize, g2: f64| ChainParams {
        n_links: n,
        g2,
        basis: p.basis.clone(),
        boundary: p.boundary,
        solver: p.solver,
        bond_dim: p.bond_dim,
        seed: p.seed,
    };
    let n_fine = match p.boundary {
        Boundary::Periodic => 2 * p.n_links,
        Boundary::Open => 2 * p.n_links - 1,
    };
    // Coarse ground state at g_0 and its fine-grainings, one per lambda.
    let coarse0 = ground_state(&mk_params(p.n_links, 1.0 / p.g0_inv2))?;
    let coarse0_dense = coarse0.state.to_dense()?;
    let mut fine_grained: Vec<(f64, Result<FineGrainOutput>)> = Vec::new();
    for &lambda in &p.lambda_grid {
        fine_grained.push((lambda, fine_grain(&coarse0_dense, p.boundary, lambda, p.assembly)));
    }
    // Baseline reference: fine-chain ground state at g_0.
    let fine0 = ground_state(&mk_params(n_fine, 1.0 / p.g0_inv2))?;
    let fine0_dense = fine0.state.to_dense()?;

    let mut rows = Vec::new();
    let mut warm: Option<Vec<Complex64>> = None;
    for &g_inv2 in &p.g_inv2_grid {
        let params_g = mk_params(n_fine, 1.0 / g_inv2);
        let solved = match p.solver {
            SolverKind::Ed => {
                let h = build_hamiltonian(&params_g)?;
                ground_state_ed(&h, warm.as_deref())
            }
            SolverKind::Dmrg => ground_state(&params_g),
        };
        match solved {
            Ok(res) => {
                let fine_g = res.state.to_dense()?;
                warm = Some(fine_g.amp.clone());
                let baseline = fidelity_per_site(
                    &ChainState::Dense(fine0_dense.clone()),
                    &ChainState::Dense(fine_g.clone()),
                )?;
                for (lambda, fg) in &fine_grained {
                    match fg {
                        Ok(out) => {
                            let f = fidelity_per_site(
                                &ChainState::Dense(out.state.clone()),
                                &ChainState::Dense(fine_g.clone()),
                            )?;
                            rows.push(SweepRow {
                                g0_inv2: p.g0_inv2,
                                g_inv2,
                                lambda: *lambda,
                                f_finegrained: f,
                                f_baseline: baseline,
                                energy_density: res.energy_density,
                                isometry_defect: out.isometry_defect,
                                solver: solver_name.clone(),
                                n: p.n_links,
                                d: p.bond_dim,
                                l_max,
                                error: None,
                            });
                        }
                        Err(e) => rows.push(SweepRow {
                            g0_inv2: p.g0_inv2,
                            g_inv2,
                            lambda: *lambda,
                            f_finegrained: f64::NAN,
                            f_baseline: baseline,
                            energy_density: res.energy_density,
                            isometry_defect: f64::NAN,
                            solver: solver_name.clone(),
                            n: p.n_links,
                            d: p.bond_dim,
                            l_max,
                            error: Some(e.to_string()),
                        }),
                    }
                }
            }
            Err(e) => {
                for (lambda, _) in &fine_grained {
                    rows.push(SweepRow {
                        g0_inv2: p.g0_inv2,
                        g_inv2,
                        lambda: *lambda,
                        f_finegrained: f64::NAN,
                        f_baseline: f64::NAN,
                        energy_density: f64::NAN,
                        isometry_defect: f64::NAN,
                        solver: solver_name.clone(),
                        n: p.n_links,
                        d: p.bond_dim,
                        l_max,
                        error: Some(e.to_string()),
                    });
                }
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::GroupElement;
    use crate::linkspace::state_omega0;

    fn u1_basis(n_max: i64) -> Arc<TruncatedLinkBasis> {
        TruncatedLinkBasis::new(GroupVariant::U1, 2 * n_max).unwrap()
    }

    fn su2_basis(two_l_max: i64) -> Arc<TruncatedLinkBasis> {
        TruncatedLinkBasis::new(GroupVariant::Su2, two_l_max).unwrap()
    }

    fn params(basis: &Arc<TruncatedLinkBasis>, n: usize, g2: f64) -> ChainParams {
        ChainParams {
            n_links: n,
            g2,
            basis: basis.clone(),
            boundary: Boundary::Periodic,
            solver: SolverKind::Ed,
            bond_dim: 8,
            seed: 7,
        }
    }

    #[test]
    fn hamiltonian_shape_and_hermiticity() {
        let basis = su2_basis(1);
        let h = build_hamiltonian(&params(&basis, 2, 1.3)).unwrap();
        let m = h.to_dense().unwrap();
        assert_eq!(m.nrows(), 25);
        let dev = (&m - m.adjoint()).norm();
        assert!(dev < 1e-10, "hermiticity deviation {dev}");
    }

    #[test]
    fn strong_coupling_ground_is_product_of_haar_states() {
        let basis = u1_basis(1);
        let pr = params(&basis, 3, 50.0);
        let res = ground_state(&pr).unwrap();
        let omega = DenseChain::product(&basis, &vec![state_omega0(&basis); 3]);
        let f = res
            .state
            .to_dense()
            .unwrap()
            .overlap(&omega)
            .unwrap()
            .norm();
        assert!(f > 0.99, "fidelity with product Haar state {f}");
        assert!(res.residual <= 1e-8);
    }

    #[test]
    fn global_rotation_symmetry() {
        let basis = su2_basis(1);
        let h = build_hamiltonian(&params(&basis, 2, 0.9)).unwrap();
        let hm = h.to_dense().unwrap();
        let x = GroupElement::from_quaternion([0.3, -0.5, 0.7, 0.4]);
        for side in [Side::Left, Side::Right] {
            let r = rotation_op(&basis, side, &x).unwrap();
            let rr = r.mat.kronecker(&r.mat);
            let dev = (&hm * &rr - &rr * &hm).norm();
            assert!(dev < 1e-9, "commutator norm {dev}");
        }
    }

    #[test]
    fn lanczos_matches_dense_eigensolver() {
        let basis = u1_basis(2);
        let pr = params(&basis, 3, 1.0 / 0.7);
        let h = build_hamiltonian(&pr).unwrap();
        let dense = h.to_dense().unwrap();
        let eig = dense.symmetric_eigen();
        let e_min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        let res = ground_state_ed(&h, None).unwrap();
        assert!(
            (res.energy - e_min).abs() < 1e-9,
            "lanczos {} dense {}",
            res.energy,
            e_min
        );
    }

    #[test]
    fn ground_state_is_rotation_symmetric() {
        let basis = u1_basis(2);
        let res = ground_state(&params(&basis, 3, 2.0)).unwrap();
        let g = res.state.to_dense().unwrap();
        let x = GroupElement::from_angle(0.83);
        let l = rotation_op(&basis, Side::Left, &x).unwrap();
        let r = rotation_op(&basis, Side::Right, &x).unwrap();
        let d = basis.dim();
        let mut rotated = g.clone();
        let gate = (&l.mat * &r.mat).clone();
        for slot in 0..3 {
            apply_klocal_dense(&mut rotated.amp, d, &[slot], &gate).unwrap();
        }
        let ov = g.overlap(&rotated).unwrap().norm();
        assert!(ov > 1.0 - 1e-8, "overlap after global rotation {ov}");
    }

    #[test]
    fn energy_decreases_with_cutoff() {
        let mut prev = f64::INFINITY;
        for n_max in [1, 2, 3] {
            let basis = u1_basis(n_max);
            let res = ground_state(&params(&basis, 2, 1.0)).unwrap();
            assert!(res.energy < prev + 1e-12, "cutoff {n_max}: {} !< {prev}", res.energy);
            prev = res.energy;
        }
    }

    #[test]
    fn ci_gate_exact_fourier_matches_quadrature_limit() {
        // The m = 0 block must be the identity on the controls in both
        // assemblies, and the exact assembly must be charge conserving.
        let basis = u1_basis(1);
        let d = basis.dim();
        let exact = ci_gate(&basis, CiAssembly::ExactFourier).unwrap();
        let im0 = basis.index_of(0, 0, 0).unwrap();
        for il in 0..d {
            for ir in 0..d {
                for jl in 0..d {
                    for jr in 0..d {
                        let row = il + d * im0 + d * d * ir;
                        let col = jl + d * im0 + d * d * jr;
                        let want = if il == jl && ir == jr { 1.0 } else { 0.0 };
                        assert!((exact[(row, col)].re - want).abs() < 1e-12);
                    }
                }
            }
        }
        // Quadrature assembly converges (slowly) to the closed form; check
        // the deviation shrinks with degree.
        let lo = ci_gate(&basis, CiAssembly::Quadrature(8)).unwrap();
        let hi = ci_gate(&basis, CiAssembly::Quadrature(64)).unwrap();
        let dev_lo = (&lo - &exact).norm();
        let dev_hi = (&hi - &exact).norm();
        assert!(dev_hi < dev_lo, "quadrature CI not improving: {dev_lo} -> {dev_hi}");
        assert!(dev_hi < 0.05, "quadrature CI deviation {dev_hi}");
    }

    #[test]
    fn fine_grain_fixed_point_at_infinite_lambda() {
        let basis = u1_basis(1);
        let coarse = DenseChain::product(&basis, &vec![state_omega0(&basis); 3]);
        let out = fine_grain(&coarse, Boundary::Periodic, f64::INFINITY, CiAssembly::ExactFourier)
            .unwrap();
        assert_eq!(out.state.n_links, 6);
        let target = DenseChain::product(&basis, &vec![state_omega0(&basis); 6]);
        let f = out.state.overlap(&target).unwrap().norm();
        assert!(f > 1.0 - 1e-12, "fixed-point fidelity {f}");
        assert!(out.isometry_defect < 1e-12);
    }

    #[test]
    fn fine_grain_concentrates_on_interpolant() {
        // Position-like inputs on the controls with a sharp ancilla: the new
        // link's position density should peak near A(U_1, U_2), the SLERP
        // midpoint of the neighbouring angles.
        let basis = u1_basis(6);
        let t1 = 0.4_f64;
        let t2 = 1.6_f64;
        let chi = |t: f64| {
            let v = sample_position_projector(&basis, &GroupElement::from_angle(t)).unwrap();
            v.normalized()
        };
        let coarse = DenseChain::product(&basis, &[chi(t1), chi(t2)]);
        let out = fine_grain(&coarse, Boundary::Open, 0.05, CiAssembly::ExactFourier).unwrap();
        // Marginal position density of the middle (new) link.
        let d = basis.dim();
        let mut best = (0.0_f64, f64::MIN);
        let mut probe = 0.0;
        while probe < std::f64::consts::TAU {
            let k = sample_position_projector(&basis, &GroupElement::from_angle(probe)).unwrap();
            let mut rho = 0.0;
            for i0 in 0..d {
                for i2 in 0..d {
                    let mut a = Complex64::new(0.0, 0.0);
                    for i1 in 0..d {
                        a += k.coeffs[i1].conj() * out.state.amp[i0 + d * i1 + d * d * i2];
                    }
                    rho += a.norm_sqr();
                }
            }
            if rho > best.1 {
                best = (probe, rho);
            }
            probe += 0.02;
        }
        let a_expected = t1 + 0.5 * (t2 - t1);
        assert!(
            (best.0 - a_expected).abs() < 0.15,
            "peak at {} expected {a_expected}",
            best.0
        );
    }

    #[test]
    fn fidelity_per_site_basic_properties() {
        let basis = u1_basis(1);
        let a = DenseChain::product(&basis, &vec![state_omega0(&basis); 2]);
        let s = ChainState::Dense(a.clone());
        assert!((fidelity_per_site(&s, &s).unwrap() - 1.0).abs() < 1e-12);
        let mut shifted = crate::linkspace::LinkVector::zeros(&basis);
        shifted.coeffs[basis.index_of(2, 0, 0).unwrap()] = Complex64::new(1.0, 0.0);
        let b = DenseChain::product(&basis, &vec![shifted; 2]);
        assert!(fidelity_per_site(&s, &ChainState::Dense(b)).unwrap() < 1e-12);
    }

    #[test]
    fn sweep_produces_peak_structure_smoke() {
        // Tiny smoke test of the sweep plumbing (full criterion lives in the
        // acceptance suite): diagonal baseline cell is 1.
        let basis = u1_basis(1);
        let p = SweepParams {
            n_links: 2,
            basis,
            g0_inv2: 0.3,
            g_inv2_grid: vec![0.3, 0.5],
            lambda_grid: vec![1.0],
            boundary: Boundary::Periodic,
            assembly: CiAssembly::ExactFourier,
            solver: SolverKind::Ed,
            bond_dim: 4,
            seed: 11,
        };
        let rows = fidelity_sweep(&p).unwrap();
        assert_eq!(rows.len(), 2);
        assert!((rows[0].f_baseline - 1.0).abs() < 1e-9);
        assert!(rows.iter().all(|r| r.error.is_none()));
        let csv = sweep_csv(&rows);
        assert!(csv.lines().count() == 3);
        assert!(csv.starts_with("g0_inv2,g_inv2,lambda"));
    }
}
