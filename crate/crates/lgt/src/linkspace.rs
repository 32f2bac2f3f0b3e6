//! The truncated single-link Hilbert space L^2(G) in the Peter-Weyl (Fourier)
//! basis, with single-link operators and distinguished states.
//!
//! Basis states |j k>_l are enumerated with l ascending, then j ascending,
//! then k ascending; all half-integer labels are stored doubled (U(1) charges
//! n are likewise stored as 2n so the serialization schema is uniform).

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{LgtError, Result};
use crate::group::{
    clebsch_gordan, wigner, GroupElement, GroupVariant, IrrepLabel,
};

/// Which tensor slot a rotation acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// Left rotation L_U |V> = |U V>, acting on the j slot.
    Left,
    /// Right rotation R_U |V> = |V U^dag>, acting on the k slot.
    Right,
}

/// The Fourier basis of L^2(G) truncated at irrep cutoff l_max.
#[derive(Debug)]
pub struct TruncatedLinkBasis {
    /// Group variant.
    pub variant: GroupVariant,
    /// Doubled cutoff: 2 l_max for SU(2), 2 n_max for U(1).
    pub two_l_max: i64,
    /// Basis labels (2l, 2j, 2k) in enumeration order.
    pub states: Vec<(i64, i64, i64)>,
    index: HashMap<(i64, i64, i64), usize>,
}

impl TruncatedLinkBasis {
    /// Build the basis for the given variant and cutoff (l_max for SU(2) as a
    /// doubled integer, n_max >= 0 for U(1) also doubled).
    pub fn new(variant: GroupVariant, two_l_max: i64) -> Result<Arc<Self>> {
        if two_l_max < 0 {
            return Err(LgtError::InvalidArgument("cutoff must be >= 0".into()));
        }
        let mut states = Vec::new();
        match variant {
            GroupVariant::U1 => {
                if two_l_max % 2 != 0 {
                    return Err(LgtError::InvalidArgument(
                        "U(1) cutoff must be an even doubled integer".into(),
                    ));
                }
                let mut two_n = -two_l_max;
                while two_n <= two_l_max {
                    states.push((two_n, 0, 0));
                    two_n += 2;
                }
            }
            GroupVariant::Su2 => {
                for two_l in 0..=two_l_max {
                    let mut two_j = -two_l;
                    while two_j <= two_l {
                        let mut two_k = -two_l;
                        while two_k <= two_l {
                            states.push((two_l, two_j, two_k));
                            two_k += 2;
                        }
                        two_j += 2;
                    }
                }
            }
        }
        let index = states
            .iter()
            .enumerate()
            .map(|(i, s)| (*s, i))
            .collect();
        Ok(Arc::new(TruncatedLinkBasis {
            variant,
            two_l_max,
            states,
            index,
        }))
    }

    /// Total dimension: sum of d_l^2 (U(1): 2 n_max + 1).
    pub fn dim(&self) -> usize {
        self.states.len()
    }

    /// Index of the basis label (2l, 2j, 2k), if within the cutoff.
    pub fn index_of(&self, two_l: i64, two_j: i64, two_k: i64) -> Option<usize> {
        self.index.get(&(two_l, two_j, two_k)).copied()
    }

    /// Irrep dimension for a doubled label in this variant.
    pub fn irrep_dim(&self, two_l: i64) -> usize {
        match self.variant {
            GroupVariant::U1 => 1,
            GroupVariant::Su2 => (two_l + 1) as usize,
        }
    }
}

/// A vector in one truncated link space.
#[derive(Clone, Debug)]
pub struct LinkVector {
    /// Basis the coefficients refer to.
    pub basis: Arc<TruncatedLinkBasis>,
    /// Coefficients in basis enumeration order.
    pub coeffs: DVector<Complex64>,
}

impl LinkVector {
    /// Zero vector.
    pub fn zeros(basis: &Arc<TruncatedLinkBasis>) -> Self {
        LinkVector {
            basis: basis.clone(),
            coeffs: DVector::zeros(basis.dim()),
        }
    }

    /// Hermitian inner product <self|other>.
    pub fn inner(&self, other: &LinkVector) -> Result<Complex64> {
        if !Arc::ptr_eq(&self.basis, &other.basis) && self.basis.states != other.basis.states {
            return Err(LgtError::Incompatible("link bases differ".into()));
        }
        Ok(self.coeffs.dotc(&other.coeffs))
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        self.coeffs.norm()
    }

    /// Return a normalized copy.
    pub fn normalized(&self) -> Self {
        let n = self.norm();
        LinkVector {
            basis: self.basis.clone(),
            coeffs: &self.coeffs / Complex64::new(n, 0.0),
        }
    }
}

/// A matrix on one truncated link space.
#[derive(Clone, Debug)]
pub struct LinkOperator {
    /// Basis the matrix is expressed in.
    pub basis: Arc<TruncatedLinkBasis>,
    /// Dense matrix in basis enumeration order.
    pub mat: DMatrix<Complex64>,
}

impl LinkOperator {
    /// Apply to a vector.
    pub fn apply(&self, v: &LinkVector) -> LinkVector {
        LinkVector {
            basis: v.basis.clone(),
            coeffs: &self.mat * &v.coeffs,
        }
    }

    /// Frobenius norm of (A^dag A - 1): the truncation (isometry) defect.
    pub fn truncation_defect(&self) -> f64 {
        let d = self.basis.dim();
        let m = self.mat.adjoint() * &self.mat - DMatrix::identity(d, d);
        m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// The electric (Laplacian) operator: diagonal with eigenvalue d_l^2 - 1 on
/// irrep l for SU(2) and n^2 for U(1).
pub fn laplacian(basis: &Arc<TruncatedLinkBasis>) -> LinkOperator {
    let d = basis.dim();
    let mut mat = DMatrix::zeros(d, d);
    for (i, (two_l, _, _)) in basis.states.iter().enumerate() {
        let ev = match basis.variant {
            GroupVariant::U1 => {
                let n = *two_l as f64 / 2.0;
                n * n
            }
            GroupVariant::Su2 => {
                let dl = (*two_l + 1) as f64;
                dl * dl - 1.0
            }
        };
        mat[(i, i)] = Complex64::new(ev, 0.0);
    }
    LinkOperator {
        basis: basis.clone(),
        mat,
    }
}

/// Position observable: multiplication by the defining-representation matrix
/// element t^{1/2}_{ab} (SU(2); a, b doubled in {-1, +1}) or by e^{i theta}
/// (U(1); pass (0, 0)).  Couplings beyond the cutoff are dropped.
pub fn position_op(basis: &Arc<TruncatedLinkBasis>, two_a: i64, two_b: i64) -> Result<LinkOperator> {
    let d = basis.dim();
    let mut mat = DMatrix::zeros(d, d);
    match basis.variant {
        GroupVariant::U1 => {
            if two_a != 0 || two_b != 0 {
                return Err(LgtError::InvalidArgument(
                    "U(1) position operator takes no matrix indices (pass 0, 0)".into(),
                ));
            }
            // e^{i theta} |n> = |n+1>.
            for (i, (two_n, _, _)) in basis.states.iter().enumerate() {
                if let Some(ip) = basis.index_of(two_n + 2, 0, 0) {
                    mat[(ip, i)] = Complex64::new(1.0, 0.0);
                }
            }
        }
        GroupVariant::Su2 => {
            if two_a.abs() != 1 || two_b.abs() != 1 {
                return Err(LgtError::InvalidArgument(
                    "SU(2) position indices must be +-1/2 (doubled: +-1)".into(),
                ));
            }
            for (i, (two_l, two_j, two_k)) in basis.states.iter().enumerate() {
                let dl = (*two_l + 1) as f64;
                let mut targets = vec![two_l + 1];
                if *two_l > 0 {
                    targets.push(two_l - 1);
                }
                for two_cap in targets {
                    let (two_jj, two_kk) = (two_j + two_a, two_k + two_b);
                    if two_jj.abs() > two_cap || two_kk.abs() > two_cap {
                        continue;
                    }
                    if let Some(ip) = basis.index_of(two_cap, two_jj, two_kk) {
                        let dcap = (two_cap + 1) as f64;
                        let cj = clebsch_gordan(1, two_a, *two_l, *two_j, two_cap, two_jj)?;
                        let ck = clebsch_gordan(1, two_b, *two_l, *two_k, two_cap, two_kk)?;
                        mat[(ip, i)] += Complex64::new((dl / dcap).sqrt() * cj * ck, 0.0);
                    }
                }
            }
        }
    }
    Ok(LinkOperator {
        basis: basis.clone(),
        mat,
    })
}

/// Rotation operator: L_U |V> = |U V> (Left, acting on the j slot through
/// conj t^l(U)) or R_U |V> = |V U^dag> (Right, acting on the k slot through
/// t^l(U)).  Exactly unitary at any cutoff.
pub fn rotation_op(
    basis: &Arc<TruncatedLinkBasis>,
    side: Side,
    u: &GroupElement,
) -> Result<LinkOperator> {
    if u.variant() != basis.variant {
        return Err(LgtError::Incompatible(
            "rotation element variant differs from basis".into(),
        ));
    }
    let d = basis.dim();
    let mut mat = DMatrix::zeros(d, d);
    match basis.variant {
        GroupVariant::U1 => {
            for (i, (two_n, _, _)) in basis.states.iter().enumerate() {
                let n = *two_n as f64 / 2.0;
                let theta = match u {
                    GroupElement::U1(t) => *t,
                    _ => unreachable!(),
                };
                // L: e^{-i n theta}; R: e^{+i n theta} (from |V U^dag>).
                let sign = match side {
                    Side::Left => -1.0,
                    Side::Right => 1.0,
                };
                mat[(i, i)] = Complex64::new(0.0, sign * n * theta).exp();
            }
        }
        GroupVariant::Su2 => {
            for two_l in 0..=basis.two_l_max {
                let label = IrrepLabel {
                    variant: GroupVariant::Su2,
                    two_l,
                };
                let t = wigner(&label, u)?;
                let dl = (two_l + 1) as usize;
                // Row r of t corresponds to weight 2j = two_l - 2r.
                for r in 0..dl {
                    for c in 0..dl {
                        let (two_r, two_c) = (two_l - 2 * r as i64, two_l - 2 * c as i64);
                        match side {
                            Side::Left => {
                                // <m k|L_U|j k> = conj(t_{m j}).
                                let mut two_k = -two_l;
                                while two_k <= two_l {
                                    let row = basis.index_of(two_l, two_r, two_k).unwrap();
                                    let col = basis.index_of(two_l, two_c, two_k).unwrap();
                                    mat[(row, col)] = t[(r, c)].conj();
                                    two_k += 2;
                                }
                            }
                            Side::Right => {
                                // <j m|R_U|j k> = t_{m k}.
                                let mut two_j = -two_l;
                                while two_j <= two_l {
                                    let row = basis.index_of(two_l, two_j, two_r).unwrap();
                                    let col = basis.index_of(two_l, two_j, two_c).unwrap();
                                    mat[(row, col)] = t[(r, c)];
                                    two_j += 2;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(LinkOperator {
        basis: basis.clone(),
        mat,
    })
}

/// The Haar state |omega_0>: unit weight on the trivial irrep.
pub fn state_omega0(basis: &Arc<TruncatedLinkBasis>) -> LinkVector {
    let mut v = LinkVector::zeros(basis);
    let i = basis.index_of(0, 0, 0).expect("trivial irrep always present");
    v.coeffs[i] = Complex64::new(1.0, 0.0);
    v
}

/// The single-loop state |psi(lambda)> proportional to
/// sum_l e^{-lambda |l|} |1>_l with |1>_l = d_l^{-1/2} sum_j |j j>_l,
/// the l = l_max component set to zero (both +-n_max for U(1)), normalized.
pub fn state_psi_lambda(basis: &Arc<TruncatedLinkBasis>, lambda: f64) -> Result<LinkVector> {
    if lambda < 0.0 || lambda.is_nan() {
        return Err(LgtError::InvalidArgument("lambda must be >= 0".into()));
    }
    let mut v = LinkVector::zeros(basis);
    for (i, (two_l, two_j, two_k)) in basis.states.iter().enumerate() {
        if two_j != two_k {
            continue;
        }
        if two_l.abs() == basis.two_l_max && basis.two_l_max > 0 {
            continue;
        }
        let l_abs = two_l.abs() as f64 / 2.0;
        let weight = if *two_l == 0 { 1.0 } else { (-lambda * l_abs).exp() };
        let dl = basis.irrep_dim(two_l.abs()) as f64;
        v.coeffs[i] = Complex64::new(weight / dl.sqrt(), 0.0);
    }
    Ok(v.normalized())
}

/// Unnormalized quadrature representative of the position ket |U>: the
/// coefficient on (l, j, k) is sqrt(d_l) conj(t^l_{jk}(U)); pairing with a
/// LinkVector evaluates its wavefunction at U.
pub fn sample_position_projector(
    basis: &Arc<TruncatedLinkBasis>,
    u: &GroupElement,
) -> Result<LinkVector> {
    if u.variant() != basis.variant {
        return Err(LgtError::Incompatible(
            "element variant differs from basis".into(),
        ));
    }
    let mut v = LinkVector::zeros(basis);
    match basis.variant {
        GroupVariant::U1 => {
            let theta = match u {
                GroupElement::U1(t) => *t,
                _ => unreachable!(),
            };
            for (i, (two_n, _, _)) in basis.states.iter().enumerate() {
                let n = *two_n as f64 / 2.0;
                v.coeffs[i] = Complex64::new(0.0, -n * theta).exp();
            }
        }
        GroupVariant::Su2 => {
            for two_l in 0..=basis.two_l_max {
                let label = IrrepLabel {
                    variant: GroupVariant::Su2,
                    two_l,
                };
                let t = wigner(&label, u)?;
                let dl = (two_l + 1) as usize;
                let scale = (dl as f64).sqrt();
                for r in 0..dl {
                    for c in 0..dl {
                        let (two_j, two_k) = (two_l - 2 * r as i64, two_l - 2 * c as i64);
                        let i = basis.index_of(two_l, two_j, two_k).unwrap();
                        v.coeffs[i] = t[(r, c)].conj() * scale;
                    }
                }
            }
        }
    }
    Ok(v)
}

/// Default quadrature exactness degree sufficient for assembling controlled
/// gates on this basis (>= 2 * (2 l_max) + 1 per the gate-assembly contract).
pub fn gate_quadrature_degree(basis: &TruncatedLinkBasis) -> usize {
    (2 * basis.two_l_max + 1).max(1) as usize
}

/// Serialized form of a LinkVector: entries are (2l, 2j, 2k, re, im).
#[derive(serde::Serialize, serde::Deserialize)]
pub struct LinkVectorJson {
    /// Group variant.
    pub variant: GroupVariant,
    /// Doubled cutoff.
    pub two_l_max: i64,
    /// Nonzero coefficients as [2l, 2j, 2k, re, im].
    pub entries: Vec<(i64, i64, i64, f64, f64)>,
}

impl LinkVector {
    /// Serialize (nonzero entries only).
    pub fn to_json(&self) -> LinkVectorJson {
        let entries = self
            .basis
            .states
            .iter()
            .zip(self.coeffs.iter())
            .filter(|(_, z)| z.norm_sqr() > 0.0)
            .map(|((l, j, k), z)| (*l, *j, *k, z.re, z.im))
            .collect();
        LinkVectorJson {
            variant: self.basis.variant,
            two_l_max: self.basis.two_l_max,
            entries,
        }
    }

    /// Deserialize against a freshly built basis.
    pub fn from_json(j: &LinkVectorJson) -> Result<LinkVector> {
        let basis = TruncatedLinkBasis::new(j.variant, j.two_l_max)?;
        let mut v = LinkVector::zeros(&basis);
        for (l, jj, k, re, im) in &j.entries {
            let i = basis.index_of(*l, *jj, *k).ok_or_else(|| {
                LgtError::Serde(format!("label ({l}, {jj}, {k}) outside cutoff"))
            })?;
            v.coeffs[i] = Complex64::new(*re, *im);
        }
        Ok(v)
    }
}
