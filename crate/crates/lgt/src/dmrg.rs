//! Two-site DMRG ground-state solver for the open-boundary chain: MPO
//! construction from the chain Hamiltonian, environment contractions, Lanczos
//! solution of the two-site effective problem, and singular-value truncation
//! at a fixed bond dimension.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chain::{
    lanczos_lowest, Boundary, ChainHamiltonian, ChainState, DenseChain, GroundStateResult,
    CHAIN_DENSE_GUARD,
};
use crate::error::{LgtError, Result};
use crate::group::GroupVariant;
use crate::linkspace::{position_op, TruncatedLinkBasis};

/// One MPO site: a (w_left x w_right) grid of optional local operators.
pub type MpoSite = Vec<Vec<Option<DMatrix<Complex64>>>>;

/// Matrix product state with per-site tensors indexed by the physical digit;
/// each entry is a (D_left x D_right) matrix.
#[derive(Clone)]
pub struct Mps {
    pub basis: Arc<TruncatedLinkBasis>,
    pub tensors: Vec<Vec<DMatrix<Complex64>>>,
}

impl Mps {
    pub fn n_links(&self) -> usize {
        self.tensors.len()
    }

    /// Contract to a dense chain state (guarded).
    pub fn to_dense(&self) -> Result<DenseChain> {
        let d = self.basis.dim();
        let mut dim = 1usize;
        for _ in 0..self.tensors.len() {
            dim = dim
                .checked_mul(d)
                .filter(|v| *v <= CHAIN_DENSE_GUARD)
                .ok_or_else(|| {
                    LgtError::ResourceGuard("MPS contraction exceeds dense guard".into())
                })?;
        }
        // Row vectors indexed by the product-basis prefix.
        let mut rows: Vec<DMatrix<Complex64>> = vec![DMatrix::identity(1, 1)];
        for site in &self.tensors {
            let mut next = Vec::with_capacity(rows.len() * d);
            for s in 0..d {
                for r in rows.iter() {
                    next.push(r * &site[s]);
                }
            }
            rows = next;
        }
        let amp: Vec<Complex64> = rows.iter().map(|r| r[(0, 0)]).collect();
        Ok(DenseChain {
            basis: self.basis.clone(),
            n_links: self.tensors.len(),
            amp,
        })
    }
}

/// Nearest-neighbour MPO for the open chain Hamiltonian.  Bulk bond
/// dimension is 2 + (number of coupling pairs).
pub fn build_mpo(h: &ChainHamiltonian) -> Result<Vec<MpoSite>> {
    if h.params.boundary != Boundary::Open {
        return Err(LgtError::InvalidArgument(
            "the MPO/DMRG path supports open boundaries only".into(),
        ));
    }
    let basis = &h.params.basis;
    let d = basis.dim();
    let n = h.params.n_links;
    let g2 = h.params.g2;
    let pairs: Vec<(i64, i64)> = match basis.variant {
        GroupVariant::U1 => vec![(0, 0)],
        GroupVariant::Su2 => vec![(-1, -1), (-1, 1), (1, -1), (1, 1)],
    };
    // Coupling ops: for each (a, b) both (P, P^dag) and (P^dag, P), each with
    // coefficient -1/(2 g^2).
    let mut left_ops: Vec<DMatrix<Complex64>> = Vec::new();
    let mut right_ops: Vec<DMatrix<Complex64>> = Vec::new();
    let c = Complex64::new(-0.5 / g2, 0.0);
    for (two_a, two_b) in &pairs {
        let p = position_op(basis, *two_a, *two_b)?.mat.clone();
        let pd = p.adjoint();
        left_ops.push(&p * c);
        right_ops.push(pd.clone());
        left_ops.push(&pd * c);
        right_ops.push(p);
    }
    let k = left_ops.len();
    let w = k + 2;
    let ident = DMatrix::<Complex64>::identity(d, d);
    let mut sites = Vec::with_capacity(n);
    for i in 0..n {
        // Site term: kinetic diagonal plus the bond constant 2/g^2 assigned
        // to the left site of each bond.
        let mut site_term = DMatrix::<Complex64>::zeros(d, d);
        for s in 0..d {
            site_term[(s, s)] = Complex64::new(h.kinetic_diag[s], 0.0);
        }
        if i + 1 < n {
            for s in 0..d {
                site_term[(s, s)] += Complex64::new(2.0 / g2, 0.0);
            }
        }
        let mut grid: MpoSite = vec![vec![None; w]; w];
        grid[0][0] = Some(ident.clone());
        grid[w - 1][w - 1] = Some(ident.clone());
        grid[0][w - 1] = Some(site_term);
        for (j, (a, b)) in left_ops.iter().zip(right_ops.iter()).enumerate() {
            if i + 1 < n {
                grid[0][1 + j] = Some(a.clone());
            }
            if i > 0 {
                grid[1 + j][w - 1] = Some(b.clone());
            }
        }
        sites.push(grid);
    }
    Ok(sites)
}

type Env = Vec<Option<DMatrix<Complex64>>>;

fn env_left_step(l: &Env, site: &[DMatrix<Complex64>], mpo: &MpoSite, w: usize) -> Env {
    let dr = site[0].ncols();
    let mut out: Env = vec![None; w];
    for (a, la) in l.iter().enumerate() {
        let Some(la) = la else { continue };
        for (b, op) in mpo[a].iter().enumerate() {
            let Some(op) = op else { continue };
            let mut acc = DMatrix::<Complex64>::zeros(dr, dr);
            for sp in 0..site.len() {
                for s in 0..site.len() {
                    let c = op[(sp, s)];
                    if c.norm_sqr() == 0.0 {
                        continue;
                    }
                    acc += (site[sp].adjoint() * la * &site[s]) * c;
                }
            }
            match &mut out[b] {
                Some(m) => *m += acc,
                slot => *slot = Some(acc),
            }
        }
    }
    out
}

fn env_right_step(r: &Env, site: &[DMatrix<Complex64>], mpo: &MpoSite, w: usize) -> Env {
    let dl = site[0].nrows();
    let mut out: Env = vec![None; w];
    for (a, row) in mpo.iter().enumerate() {
        let mut acc: Option<DMatrix<Complex64>> = None;
        for (b, op) in row.iter().enumerate() {
            let (Some(op), Some(rb)) = (op, &r[b]) else { continue };
            let mut part = DMatrix::<Complex64>::zeros(dl, dl);
            for sp in 0..site.len() {
                for s in 0..site.len() {
                    let c = op[(sp, s)];
                    if c.norm_sqr() == 0.0 {
                        continue;
                    }
                    part += (site[sp].conjugate() * rb * site[s].transpose()) * c;
                }
            }
            match &mut acc {
                Some(m) => *m += part,
                slot => *slot = Some(part),
            }
        }
        out[a] = acc;
    }
    out
}

/// y = H_eff x on the flattened two-site tensor (alpha, s1, s2, beta),
/// little-endian.
#[allow(clippy::too_many_arguments)]
fn apply_heff(
    x: &[Complex64],
    y: &mut [Complex64],
    l: &Env,
    r: &Env,
    mpo1: &MpoSite,
    mpo2: &MpoSite,
    dl: usize,
    d: usize,
    dr: usize,
    w: usize,
) {
    for v in y.iter_mut() {
        *v = Complex64::new(0.0, 0.0);
    }
    let idx = |a: usize, s1: usize, s2: usize, b: usize| a + dl * (s1 + d * (s2 + d * b));
    // T1[a] = L[a] applied along alpha.
    let mut t1: Vec<Option<Vec<Complex64>>> = vec![None; w];
    for (a, la) in l.iter().enumerate() {
        let Some(la) = la else { continue };
        let mut t = vec![Complex64::new(0.0, 0.0); x.len()];
        for b in 0..dr {
            for s2 in 0..d {
                for s1 in 0..d {
                    for ap in 0..dl {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for al in 0..dl {
                            acc += la[(ap, al)] * x[idx(al, s1, s2, b)];
                        }
                        t[idx(ap, s1, s2, b)] = acc;
                    }
                }
            }
        }
        t1[a] = Some(t);
    }
    // T2[b] = sum_a W1[a][b] T1[a] along s1.
    let mut t2: Vec<Option<Vec<Complex64>>> = vec![None; w];
    for (a, ta) in t1.iter().enumerate() {
        let Some(ta) = ta else { continue };
        for (b, op) in mpo1[a].iter().enumerate() {
            let Some(op) = op else { continue };
            let t = t2[b].get_or_insert_with(|| vec![Complex64::new(0.0, 0.0); x.len()]);
            for bb in 0..dr {
                for s2 in 0..d {
                    for s1p in 0..d {
                        for s1 in 0..d {
                            let c = op[(s1p, s1)];
                            if c.norm_sqr() == 0.0 {
                                continue;
                            }
                            for ap in 0..dl {
                                t[idx(ap, s1p, s2, bb)] += c * ta[idx(ap, s1, s2, bb)];
                            }
                        }
                    }
                }
            }
        }
    }
    // T3[c] = sum_b W2[b][c] T2[b] along s2, then close with R[c] along beta.
    for (b, tb) in t2.iter().enumerate() {
        let Some(tb) = tb else { continue };
        for (c, op) in mpo2[b].iter().enumerate() {
            let (Some(op), Some(rc)) = (op, &r[c]) else { continue };
            for s2p in 0..d {
                for s2 in 0..d {
                    let cw = op[(s2p, s2)];
                    if cw.norm_sqr() == 0.0 {
                        continue;
                    }
                    for bp in 0..dr {
                        for bb in 0..dr {
                            let f = cw * rc[(bp, bb)];
                            if f.norm_sqr() == 0.0 {
                                continue;
                            }
                            for s1 in 0..d {
                                for ap in 0..dl {
                                    y[idx(ap, s1, s2p, bp)] += f * tb[idx(ap, s1, s2, bb)];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Ground state by two-site DMRG with singular-value truncation at the bond
/// dimension in `h.params`.  Converges when the energy change per full sweep
/// drops to 1e-9; open boundaries only.
pub fn dmrg_ground(h: &ChainHamiltonian) -> Result<GroundStateResult> {
    let mpo = build_mpo(h)?;
    let basis = &h.params.basis;
    let d = basis.dim();
    let n = h.params.n_links;
    let dmax = h.params.bond_dim.max(1);
    let w = mpo[0].len();
    // Seeded random right-canonical start.
    let mut rng = ChaCha8Rng::seed_from_u64(h.params.seed);
    let mut dims = vec![1usize; n + 1];
    for i in 1..n {
        dims[i] = (dims[i - 1] * d).min(dmax);
    }
    for i in (1..n).rev() {
        dims[i] = dims[i].min(dims[i + 1] * d);
    }
    let mut tensors: Vec<Vec<DMatrix<Complex64>>> = (0..n)
        .map(|i| {
            (0..d)
                .map(|_| {
                    DMatrix::from_fn(dims[i], dims[i + 1], |_, _| {
                        Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
                    })
                })
                .collect()
        })
        .collect();
    // Right-canonicalize by sweeping SVDs right-to-left (also normalizes).
    for i in (1..n).rev() {
        let (dl, dr) = (tensors[i][0].nrows(), tensors[i][0].ncols());
        let mut m = DMatrix::<Complex64>::zeros(dl, d * dr);
        for s in 0..d {
            for a in 0..dl {
                for b in 0..dr {
                    m[(a, s * dr + b)] = tensors[i][s][(a, b)];
                }
            }
        }
        let svd = m.svd(true, true);
        let (u, sv, vt) = (svd.u.unwrap(), svd.singular_values, svd.v_t.unwrap());
        let keep = sv.len();
        for s in 0..d {
            let mut b_new = DMatrix::<Complex64>::zeros(keep, dr);
            for a in 0..keep {
                for bcol in 0..dr {
                    b_new[(a, bcol)] = vt[(a, s * dr + bcol)];
                }
            }
            tensors[i][s] = b_new;
        }
        let us = {
            let mut us = u.clone();
            for c in 0..keep {
                let f = Complex64::new(sv[c], 0.0);
                for rr in 0..us.nrows() {
                    us[(rr, c)] *= f;
                }
            }
            us
        };
        for s in 0..d {
            tensors[i - 1][s] = &tensors[i - 1][s] * &us;
        }
    }
    {
        let norm: f64 = tensors[0].iter().map(|m| m.map(|z| z.norm_sqr()).sum()).sum::<f64>().sqrt();
        for s in 0..d {
            tensors[0][s] /= Complex64::new(norm, 0.0);
        }
    }
    // Environments.
    let mut lenv: Vec<Env> = vec![vec![None; w]; n + 1];
    let mut renv: Vec<Env> = vec![vec![None; w]; n + 1];
    lenv[0][0] = Some(DMatrix::identity(1, 1));
    renv[n][w - 1] = Some(DMatrix::identity(1, 1));
    for i in (1..n).rev() {
        renv[i] = env_right_step(&renv[i + 1], &tensors[i], &mpo[i], w);
    }
    let mut energy = f64::INFINITY;
    let mut last_delta = f64::INFINITY;
    let max_sweeps = 60;
    for sweep in 0..max_sweeps {
        let mut sweep_energy = energy;
        let mut bond_list: Vec<(usize, bool)> = (0..n - 1).map(|i| (i, true)).collect();
        bond_list.extend((0..n - 1).rev().map(|i| (i, false)));
        for (i, ltr) in bond_list {
            let dl = tensors[i][0].nrows();
            let dr = tensors[i + 1][0].ncols();
            let dim = dl * d * d * dr;
            let mut theta = vec![Complex64::new(0.0, 0.0); dim];
            for s1 in 0..d {
                for s2 in 0..d {
                    let prod = &tensors[i][s1] * &tensors[i + 1][s2];
                    for a in 0..dl {
                        for b in 0..dr {
                            theta[a + dl * (s1 + d * (s2 + d * b))] = prod[(a, b)];
                        }
                    }
                }
            }
            let (e, vec, _res, _it) = lanczos_lowest(
                dim,
                |x, y| apply_heff(x, y, &lenv[i], &renv[i + 2], &mpo[i], &mpo[i + 1], dl, d, dr, w),
                Some(&theta),
                h.params.seed ^ (i as u64),
                1e-10,
                60,
                40,
            )?;
            sweep_energy = e;
            // SVD split: rows (alpha, s1), cols (s2, beta).
            let mut m = DMatrix::<Complex64>::zeros(dl * d, d * dr);
            for a in 0..dl {
                for s1 in 0..d {
                    for s2 in 0..d {
                        for b in 0..dr {
                            m[(a + dl * s1, s2 + d * b)] = vec[a + dl * (s1 + d * (s2 + d * b))];
                        }
                    }
                }
            }
            let svd = m.svd(true, true);
            let (u, sv, vt) = (svd.u.unwrap(), svd.singular_values, svd.v_t.unwrap());
            let mut keep = 0usize;
            for (kk, s) in sv.iter().enumerate() {
                if kk < dmax && *s > 1e-14 {
                    keep = kk + 1;
                }
            }
            let keep = keep.max(1);
            let snorm: f64 = sv.iter().take(keep).map(|s| s * s).sum::<f64>().sqrt();
            for s1 in 0..d {
                let mut a_new = DMatrix::<Complex64>::zeros(dl, keep);
                for a in 0..dl {
                    for c in 0..keep {
                        a_new[(a, c)] = u[(a + dl * s1, c)];
                    }
                }
                tensors[i][s1] = a_new;
            }
            for s2 in 0..d {
                let mut b_new = DMatrix::<Complex64>::zeros(keep, dr);
                for c in 0..keep {
                    for b in 0..dr {
                        b_new[(c, b)] = vt[(c, s2 + d * b)];
                    }
                }
                tensors[i + 1][s2] = b_new;
            }
            if ltr {
                // Absorb singular values to the right; site i stays isometric.
                for s2 in 0..d {
                    for c in 0..keep {
                        let f = Complex64::new(sv[c] / snorm, 0.0);
                        for b in 0..dr {
                            tensors[i + 1][s2][(c, b)] *= f;
                        }
                    }
                }
                lenv[i + 1] = env_left_step(&lenv[i], &tensors[i], &mpo[i], w);
            } else {
                for s1 in 0..d {
                    for a in 0..dl {
                        for c in 0..keep {
                            tensors[i][s1][(a, c)] *= Complex64::new(sv[c] / snorm, 0.0);
                        }
                    }
                }
                renv[i + 1] = env_right_step(&renv[i + 2], &tensors[i + 1], &mpo[i + 1], w);
            }
        }
        last_delta = (energy - sweep_energy).abs();
        energy = sweep_energy;
        if sweep > 0 && last_delta <= 1e-9 {
            let mps = Mps {
                basis: basis.clone(),
                tensors,
            };
            return Ok(GroundStateResult {
                energy,
                energy_density: energy / n as f64,
                state: ChainState::Mps(mps),
                residual: last_delta,
                iterations: sweep + 1,
            });
        }
    }
    Err(LgtError::Convergence(format!(
        "DMRG energy change {last_delta:.3e} after {max_sweeps} sweeps"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{build_hamiltonian, ground_state_ed, fidelity_per_site, ChainParams, SolverKind};

    fn open_params(
        variant: GroupVariant,
        two_l_max: i64,
        n: usize,
        g2: f64,
        bond_dim: usize,
    ) -> ChainParams {
        ChainParams {
            n_links: n,
            g2,
            basis: TruncatedLinkBasis::new(variant, two_l_max).unwrap(),
            boundary: Boundary::Open,
            solver: SolverKind::Dmrg,
            bond_dim,
            seed: 5,
        }
    }

    #[test]
    fn dmrg_matches_ed_u1() {
        let p = open_params(GroupVariant::U1, 4, 4, 1.0 / 0.7, 24);
        let h = build_hamiltonian(&p).unwrap();
        let ed = ground_state_ed(&h, None).unwrap();
        let dm = dmrg_ground(&h).unwrap();
        assert!(
            (ed.energy - dm.energy).abs() < 1e-7,
            "ED {} vs DMRG {}",
            ed.energy,
            dm.energy
        );
        let f = fidelity_per_site(&ed.state, &dm.state).unwrap();
        assert!(f > 1.0 - 1e-7, "state fidelity per site {f}");
    }

    #[test]
    fn dmrg_matches_ed_su2() {
        let p = open_params(GroupVariant::Su2, 1, 3, 0.8, 16);
        let h = build_hamiltonian(&p).unwrap();
        let ed = ground_state_ed(&h, None).unwrap();
        let dm = dmrg_ground(&h).unwrap();
        assert!(
            (ed.energy - dm.energy).abs() < 1e-7,
            "ED {} vs DMRG {}",
            ed.energy,
            dm.energy
        );
    }

    #[test]
    fn mpo_reproduces_dense_hamiltonian() {
        let p = open_params(GroupVariant::U1, 2, 3, 1.4, 8);
        let h = build_hamiltonian(&p).unwrap();
        let dense = h.to_dense().unwrap();
        let mpo = build_mpo(&h).unwrap();
        let d = p.basis.dim();
        let n = p.n_links;
        let dim = d.pow(n as u32);
        let w = mpo[0].len();
        let mut full = DMatrix::<Complex64>::zeros(dim, dim);
        for row in 0..dim {
            for col in 0..dim {
                // Contract the MPO along the chain for this matrix element.
                let mut vecw = vec![Complex64::new(0.0, 0.0); w];
                vecw[0] = Complex64::new(1.0, 0.0);
                let (mut rr, mut cc) = (row, col);
                for site in mpo.iter().take(n) {
                    let (sr, sc) = (rr % d, cc % d);
                    rr /= d;
                    cc /= d;
                    let mut next = vec![Complex64::new(0.0, 0.0); w];
                    for a in 0..w {
                        if vecw[a].norm_sqr() == 0.0 {
                            continue;
                        }
                        for (b, op) in site[a].iter().enumerate() {
                            if let Some(op) = op {
                                next[b] += vecw[a] * op[(sr, sc)];
                            }
                        }
                    }
                    vecw = next;
                }
                full[(row, col)] = vecw[w - 1];
            }
        }
        let dev = (&full - &dense).norm();
        assert!(dev < 1e-10, "MPO vs dense deviation {dev}");
    }

    #[test]
    fn dmrg_rejects_periodic() {
        let mut p = open_params(GroupVariant::U1, 2, 3, 1.0, 8);
        p.boundary = Boundary::Periodic;
        let h = build_hamiltonian(&p).unwrap();
        assert!(dmrg_ground(&h).is_err());
    }
}
