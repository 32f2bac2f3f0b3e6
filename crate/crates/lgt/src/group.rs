//! Group arithmetic, irreducible representations, Clebsch-Gordan data, and
//! Haar quadrature for U(1) and SU(2).
//!
//! SU(2) elements are stored as unit quaternions (a, b, c, d) with
//! U = [[a+ib, c+id], [-c+id, a-ib]].  In this parametrization (1, i, j, k)
//! correspond to (I, i sigma_3, i sigma_2, i sigma_1), the Hamilton product is
//! the matrix product, tr U = 2a, and the adjoint is quaternion conjugation.

use std::collections::HashMap;
use std::sync::Mutex;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{LgtError, Result};

/// Which compact gauge group a value belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum GroupVariant {
    /// The circle group; elements are angles.
    U1,
    /// SU(2); elements are unit quaternions.
    Su2,
}

/// Eigenphase threshold below which the principal root branch is degenerate.
pub const ROOT_DEGENERACY_TOL: f64 = 1e-8;

/// A point of U(1) or SU(2); the classical link variable.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub enum GroupElement {
    /// Angle in [0, 2pi).
    U1(f64),
    /// Unit quaternion (a, b, c, d).
    Su2([f64; 4]),
}

fn reduce_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(2.0 * std::f64::consts::PI);
    if t >= 2.0 * std::f64::consts::PI {
        0.0
    } else {
        t
    }
}

/// Map an angle to the principal branch (-pi, pi].
pub fn principal_angle(theta: f64) -> f64 {
    let t = reduce_angle(theta);
    if t > std::f64::consts::PI {
        t - 2.0 * std::f64::consts::PI
    } else {
        t
    }
}

impl GroupElement {
    /// Group variant tag.
    pub fn variant(&self) -> GroupVariant {
        match self {
            GroupElement::U1(_) => GroupVariant::U1,
            GroupElement::Su2(_) => GroupVariant::Su2,
        }
    }

    /// The identity element of the given variant.
    pub fn identity(variant: GroupVariant) -> Self {
        match variant {
            GroupVariant::U1 => GroupElement::U1(0.0),
            GroupVariant::Su2 => GroupElement::Su2([1.0, 0.0, 0.0, 0.0]),
        }
    }

    /// U(1) element from an angle (reduced mod 2pi).
    pub fn from_angle(theta: f64) -> Self {
        GroupElement::U1(reduce_angle(theta))
    }

    /// SU(2) element from a quaternion payload, renormalized to unit norm.
    pub fn from_quaternion(q: [f64; 4]) -> Self {
        let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
        GroupElement::Su2([q[0] / n, q[1] / n, q[2] / n, q[3] / n])
    }

    /// SU(2) element e^{phi (n . (i sigma_3, i sigma_2, i sigma_1))} for a unit
    /// axis n in payload coordinates; the diagonal subgroup is axis (1, 0, 0).
    pub fn from_axis_angle(axis: [f64; 3], phi: f64) -> Self {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        let (s, c) = (phi.sin(), phi.cos());
        if n == 0.0 {
            return GroupElement::Su2([c, s, 0.0, 0.0]);
        }
        GroupElement::Su2([c, s * axis[0] / n, s * axis[1] / n, s * axis[2] / n])
    }

    /// The diagonal SU(2) element diag(e^{i phi}, e^{-i phi}).
    pub fn su2_diagonal(phi: f64) -> Self {
        GroupElement::Su2([phi.cos(), phi.sin(), 0.0, 0.0])
    }

    /// Group product UV.
    pub fn multiply(&self, other: &GroupElement) -> Result<GroupElement> {
        match (self, other) {
            (GroupElement::U1(a), GroupElement::U1(b)) => Ok(GroupElement::from_angle(a + b)),
            (GroupElement::Su2(p), GroupElement::Su2(q)) => {
                let r = [
                    p[0] * q[0] - p[1] * q[1] - p[2] * q[2] - p[3] * q[3],
                    p[0] * q[1] + p[1] * q[0] + p[2] * q[3] - p[3] * q[2],
                    p[0] * q[2] - p[1] * q[3] + p[2] * q[0] + p[3] * q[1],
                    p[0] * q[3] + p[1] * q[2] - p[2] * q[1] + p[3] * q[0],
                ];
                Ok(GroupElement::from_quaternion(r))
            }
            _ => Err(LgtError::Incompatible(
                "cannot multiply U(1) and SU(2) elements".into(),
            )),
        }
    }

    /// Group inverse (= adjoint for unitary matrices).
    pub fn inverse(&self) -> GroupElement {
        match self {
            GroupElement::U1(t) => GroupElement::from_angle(-t),
            GroupElement::Su2(q) => GroupElement::Su2([q[0], -q[1], -q[2], -q[3]]),
        }
    }

    /// Trace of the defining representation: e^{i theta} for U(1), 2a for SU(2).
    pub fn trace(&self) -> Complex64 {
        match self {
            GroupElement::U1(t) => Complex64::new(t.cos(), t.sin()),
            GroupElement::Su2(q) => Complex64::new(2.0 * q[0], 0.0),
        }
    }

    /// Class angle: |principal angle| for U(1), arccos(tr/2) in [0, pi] for SU(2).
    pub fn flux(&self) -> f64 {
        match self {
            GroupElement::U1(t) => principal_angle(*t).abs(),
            GroupElement::Su2(q) => q[0].clamp(-1.0, 1.0).acos(),
        }
    }

    /// Signed principal log angle: principal angle for U(1), the eigenphase for
    /// SU(2) (nonnegative by convention, the sign living in the axis).
    pub fn log_angle(&self) -> f64 {
        match self {
            GroupElement::U1(t) => principal_angle(*t),
            GroupElement::Su2(q) => q[0].clamp(-1.0, 1.0).acos(),
        }
    }

    /// Whether the principal root/power branch is degenerate (eigenphase
    /// within [`ROOT_DEGENERACY_TOL`] of the cut at pi).
    pub fn root_degenerate(&self) -> bool {
        match self {
            GroupElement::U1(t) => {
                (principal_angle(*t).abs() - std::f64::consts::PI).abs() < ROOT_DEGENERACY_TOL
            }
            GroupElement::Su2(q) => 2.0 * q[0] <= -2.0 + ROOT_DEGENERACY_TOL,
        }
    }

    /// Principal fractional power U^t = exp(t log U) along the principal branch.
    ///
    /// On the branch cut (eigenphase pi) the result is the deterministic
    /// convention phi = pi with the numerically dominant axis; the root there
    /// is non-unique and [`Self::root_degenerate`] reports the condition.
    pub fn fract_pow(&self, t: f64) -> GroupElement {
        match self {
            GroupElement::U1(th) => GroupElement::from_angle(principal_angle(*th) * t),
            GroupElement::Su2(q) => {
                let phi = q[0].clamp(-1.0, 1.0).acos();
                let vn = (q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
                let axis = if vn > 1e-300 {
                    [q[1] / vn, q[2] / vn, q[3] / vn]
                } else {
                    // +-identity: pick the diagonal axis by convention.
                    [1.0, 0.0, 0.0]
                };
                GroupElement::from_axis_angle(axis, phi * t)
            }
        }
    }

    /// Principal n-th root: V with V^n = U and eigenphases phi/n, phi in [0, pi].
    pub fn principal_root(&self, n: u32) -> Result<GroupElement> {
        if n == 0 {
            return Err(LgtError::InvalidArgument("root order must be >= 1".into()));
        }
        Ok(self.fract_pow(1.0 / n as f64))
    }

    /// Frobenius distance between the defining-representation matrices.
    pub fn distance(&self, other: &GroupElement) -> f64 {
        match (self, other) {
            (GroupElement::U1(a), GroupElement::U1(b)) => {
                let d = Complex64::new(0.0, *a).exp() - Complex64::new(0.0, *b).exp();
                d.norm()
            }
            (GroupElement::Su2(p), GroupElement::Su2(q)) => {
                let s: f64 = (0..4).map(|i| (p[i] - q[i]) * (p[i] - q[i])).sum();
                (2.0 * s).sqrt()
            }
            _ => f64::INFINITY,
        }
    }

    /// Defining-representation matrix entries as a 2x2 (SU(2)) or 1x1 (U(1)).
    pub fn matrix(&self) -> DMatrix<Complex64> {
        match self {
            GroupElement::U1(t) => {
                DMatrix::from_element(1, 1, Complex64::new(0.0, *t).exp())
            }
            GroupElement::Su2(q) => {
                let (a, b, c, d) = (q[0], q[1], q[2], q[3]);
                DMatrix::from_row_slice(
                    2,
                    2,
                    &[
                        Complex64::new(a, b),
                        Complex64::new(c, d),
                        Complex64::new(-c, d),
                        Complex64::new(a, -b),
                    ],
                )
            }
        }
    }
}

/// Irrep label: integer n for U(1), half-integer l (stored doubled) for SU(2).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct IrrepLabel {
    /// Variant the label belongs to.
    pub variant: GroupVariant,
    /// U(1): the integer charge n (may be negative). SU(2): 2l >= 0.
    pub two_l: i64,
}

impl IrrepLabel {
    /// Representation dimension: 1 for U(1), 2l+1 for SU(2).
    pub fn dim(&self) -> usize {
        match self.variant {
            GroupVariant::U1 => 1,
            GroupVariant::Su2 => (self.two_l + 1) as usize,
        }
    }
}

/// Result of diagonalizing an SU(2) element.
#[derive(Clone, Copy, Debug)]
pub struct EigenphaseForm {
    /// Diagonalizer: eta^dag U eta = diag(e^{i phi}, e^{-i phi}).
    pub eta: GroupElement,
    /// Principal eigenphase in [0, pi].
    pub phi: f64,
    /// Whether U was within tolerance of +-identity (eta conventional).
    pub degenerate: bool,
}

/// Diagonalize an SU(2) element: returns (eta, phi) with
/// eta^dag U eta = diag(e^{i phi}, e^{-i phi}), phi = arccos(tr U / 2).
pub fn eigenphase_decompose(u: &GroupElement) -> Result<EigenphaseForm> {
    let q = match u {
        GroupElement::Su2(q) => q,
        GroupElement::U1(_) => {
            return Err(LgtError::InvalidArgument(
                "eigenphase_decompose requires an SU(2) element".into(),
            ))
        }
    };
    let phi = q[0].clamp(-1.0, 1.0).acos();
    let vn = (q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    if vn < 1e-12 {
        // U = +-identity: any diagonalizer works; pick eta = identity.
        return Ok(EigenphaseForm {
            eta: GroupElement::identity(GroupVariant::Su2),
            phi: if q[0] >= 0.0 { 0.0 } else { std::f64::consts::PI },
            degenerate: true,
        });
    }
    let n = [q[1] / vn, q[2] / vn, q[3] / vn];
    // eta rotates the diagonal axis x = (1,0,0) onto n under the adjoint
    // action; a unit quaternion with axis x cross n and half the angle between.
    let cos_t = n[0];
    let eta = if cos_t > 1.0 - 1e-14 {
        GroupElement::identity(GroupVariant::Su2)
    } else if cos_t < -1.0 + 1e-14 {
        // n = -x: rotate by pi about the y payload axis.
        GroupElement::Su2([0.0, 0.0, 1.0, 0.0])
    } else {
        let axis = [0.0, -n[2], n[1]]; // x cross n with x = (1,0,0)
        let half = 0.5 * cos_t.clamp(-1.0, 1.0).acos();
        GroupElement::from_axis_angle(axis, half)
    };
    Ok(EigenphaseForm {
        eta,
        phi,
        degenerate: false,
    })
}

/// Wigner matrix t^l(U): d_l x d_l unitary, rows/columns ordered by weight j
/// descending from +l to -l so that t^{1/2}(U) = U exactly.  For U(1) the 1x1
/// value e^{i n theta}.
pub fn wigner(l: &IrrepLabel, u: &GroupElement) -> Result<DMatrix<Complex64>> {
    match (l.variant, u) {
        (GroupVariant::U1, GroupElement::U1(t)) => Ok(DMatrix::from_element(
            1,
            1,
            Complex64::new(0.0, l.two_l as f64 * t).exp(),
        )),
        (GroupVariant::Su2, GroupElement::Su2(q)) => {
            if l.two_l < 0 {
                return Err(LgtError::InvalidArgument("SU(2) irrep label 2l < 0".into()));
            }
            Ok(wigner_su2(l.two_l as usize, q))
        }
        _ => Err(LgtError::Incompatible(
            "irrep label and group element variants differ".into(),
        )),
    }
}

/// SU(2) Wigner matrix via the polynomial (symmetric-power) action
/// pi(U) f(v) = f(vU) on monomials x^{l+j} y^{l-j} / sqrt((l+j)!(l-j)!).
fn wigner_su2(two_l: usize, q: &[f64; 4]) -> DMatrix<Complex64> {
    let d = two_l + 1;
    let u11 = Complex64::new(q[0], q[1]);
    let u12 = Complex64::new(q[2], q[3]);
    let u21 = Complex64::new(-q[2], q[3]);
    let u22 = Complex64::new(q[0], -q[1]);
    let lf = log_factorials(two_l + 1);
    let mut m = DMatrix::zeros(d, d);
    // Column c corresponds to weight k = l - c, i.e. l + k = two_l - c in
    // doubled units; expand (u11 x + u21 y)^{l+k} (u12 x + u22 y)^{l-k}.
    for c in 0..d {
        let p = two_l - c; // l + k
        let qq = c; // l - k
        // coeffs_a[i] multiplies x^i y^{p-i}; binomial expansion.
        let mut col = vec![Complex64::new(0.0, 0.0); two_l + 1];
        for i in 0..=p {
            let ba = binom(&lf, p, i) * u11.powu(i as u32) * u21.powu((p - i) as u32);
            for s in 0..=qq {
                let bb = binom(&lf, qq, s) * u12.powu(s as u32) * u22.powu((qq - s) as u32);
                // total x power = i + s = l + j  (doubled: row r = two_l - (i+s))
                col[i + s] += ba * bb;
            }
        }
        for r in 0..d {
            let xpow = two_l - r; // l + j
            let ypow = r; // l - j
            // matrix element = coeff * sqrt((l+j)!(l-j)!) / sqrt((l+k)!(l-k)!)
            let scale = (0.5 * (lf[xpow] + lf[ypow] - lf[p] - lf[qq])).exp();
            m[(r, c)] = col[xpow] * Complex64::new(scale, 0.0);
        }
    }
    m
}

fn log_factorials(n_max: usize) -> Vec<f64> {
    let mut v = vec![0.0; n_max + 1];
    for i in 1..=n_max {
        v[i] = v[i - 1] + (i as f64).ln();
    }
    v
}

fn binom(lf: &[f64], n: usize, k: usize) -> Complex64 {
    Complex64::new((lf[n] - lf[k] - lf[n - k]).exp(), 0.0)
}

/// Clebsch-Gordan coefficient <j1 m1 ; j2 m2 | J M> in the Condon-Shortley
/// convention.  All arguments are doubled half-integers.
pub fn clebsch_gordan(
    two_j1: i64,
    two_m1: i64,
    two_j2: i64,
    two_m2: i64,
    two_big_j: i64,
    two_big_m: i64,
) -> Result<f64> {
    for (j, m) in [
        (two_j1, two_m1),
        (two_j2, two_m2),
        (two_big_j, two_big_m),
    ] {
        if j < 0 || m.abs() > j || (j - m) % 2 != 0 {
            return Err(LgtError::InvalidArgument(format!(
                "inconsistent half-integers (2j, 2m) = ({j}, {m})"
            )));
        }
    }
    if two_big_m != two_m1 + two_m2 {
        return Ok(0.0);
    }
    if two_big_j < (two_j1 - two_j2).abs() || two_big_j > two_j1 + two_j2 {
        return Ok(0.0);
    }
    if (two_j1 + two_j2 + two_big_j) % 2 != 0 {
        return Ok(0.0);
    }
    let key = (two_j1, two_m1, two_j2, two_m2, two_big_j);
    {
        let cache = cg_cache().lock().unwrap();
        if let Some(v) = cache.get(&key) {
            return Ok(*v);
        }
    }
    let v = cg_racah(two_j1, two_m1, two_j2, two_m2, two_big_j, two_big_m);
    cg_cache().lock().unwrap().insert(key, v);
    Ok(v)
}

fn cg_cache() -> &'static Mutex<HashMap<(i64, i64, i64, i64, i64), f64>> {
    use std::sync::OnceLock;
    static CACHE: OnceLock<Mutex<HashMap<(i64, i64, i64, i64, i64), f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Racah's explicit factorial sum; all (two_x)/2 combinations entering the
/// factorials are integers by the selection rules checked by the caller.
fn cg_racah(two_j1: i64, two_m1: i64, two_j2: i64, two_m2: i64, two_j: i64, two_m: i64) -> f64 {
    let lf = log_factorials(((two_j1 + two_j2 + two_j) / 2 + 2) as usize);
    let f = |two_x: i64| -> f64 {
        debug_assert!(two_x >= 0 && two_x % 2 == 0);
        lf[(two_x / 2) as usize]
    };
    let log_delta = 0.5
        * (f(two_j1 + two_j2 - two_j) + f(two_j1 - two_j2 + two_j) + f(-two_j1 + two_j2 + two_j)
            - f(two_j1 + two_j2 + two_j + 2));
    let log_pref = 0.5
        * ((two_j as f64 + 1.0).ln()
            + f(two_j + two_m)
            + f(two_j - two_m)
            + f(two_j1 - two_m1)
            + f(two_j1 + two_m1)
            + f(two_j2 - two_m2)
            + f(two_j2 + two_m2));
    // Sum over integer k with all factorial arguments nonnegative.
    let lo = 0.max((two_j2 - two_j - two_m1) / 2).max((two_j1 + two_m2 - two_j) / 2);
    let hi = ((two_j1 + two_j2 - two_j) / 2)
        .min((two_j1 - two_m1) / 2)
        .min((two_j2 + two_m2) / 2);
    let mut sum = 0.0;
    for k in lo..=hi {
        let terms = f(two_j1 + two_j2 - two_j - 2 * k)
            + f(two_j1 - two_m1 - 2 * k)
            + f(two_j2 + two_m2 - 2 * k)
            + f(two_j - two_j2 + two_m1 + 2 * k)
            + f(two_j - two_j1 - two_m2 + 2 * k)
            + lf[k as usize];
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * (log_delta + log_pref - terms).exp();
    }
    sum
}

/// Quadrature rule over a group: nodes with positive weights summing to one.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    /// Quadrature nodes.
    pub nodes: Vec<GroupElement>,
    /// Positive weights summing to 1.
    pub weights: Vec<f64>,
    /// Declared polynomial exactness degree (in 2l / |n|).
    pub exactness_degree: usize,
}

/// Gauss-Legendre nodes and weights on [-1, 1] (Newton iteration on the
/// Legendre recurrence; accurate to machine precision for moderate n).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n {
        // Initial guess (Tricomi approximation).
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_eval(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_eval(n, x);
        xs[n - 1 - i] = x;
        ws[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (xs, ws)
}

fn legendre_eval(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Haar quadrature rule exact for all matrix elements t^l with
/// 2l <= exactness_degree (U(1): |n| <= exactness_degree).
///
/// U(1): 2d+1 equispaced angles, uniform weights.  SU(2): Euler-angle product
/// grid Rz(alpha) Ry(beta) Rz(gamma) with alpha, gamma uniform on [0, 4 pi)
/// (2d+1 points each) and Gauss-Legendre in cos(beta) (d+1 points).
pub fn haar_quadrature(variant: GroupVariant, exactness_degree: usize) -> Result<QuadratureRule> {
    if exactness_degree < 1 {
        return Err(LgtError::InvalidArgument(
            "exactness degree must be >= 1".into(),
        ));
    }
    let d = exactness_degree;
    match variant {
        GroupVariant::U1 => {
            let n = 2 * d + 1;
            let nodes = (0..n)
                .map(|m| GroupElement::from_angle(2.0 * std::f64::consts::PI * m as f64 / n as f64))
                .collect();
            Ok(QuadratureRule {
                nodes,
                weights: vec![1.0 / n as f64; n],
                exactness_degree: d,
            })
        }
        GroupVariant::Su2 => {
            let na = 2 * d + 1;
            let (xs, ws) = gauss_legendre(d + 1);
            let mut nodes = Vec::with_capacity(na * na * (d + 1));
            let mut weights = Vec::with_capacity(na * na * (d + 1));
            let wa = 1.0 / na as f64;
            for ia in 0..na {
                let alpha = 4.0 * std::f64::consts::PI * ia as f64 / na as f64;
                let ra = GroupElement::Su2([(alpha / 2.0).cos(), (alpha / 2.0).sin(), 0.0, 0.0]);
                for (x, wb) in xs.iter().zip(ws.iter()) {
                    let beta = x.clamp(-1.0, 1.0).acos();
                    let rb =
                        GroupElement::Su2([(beta / 2.0).cos(), 0.0, (beta / 2.0).sin(), 0.0]);
                    let rab = ra.multiply(&rb)?;
                    for ig in 0..na {
                        let gamma = 4.0 * std::f64::consts::PI * ig as f64 / na as f64;
                        let rg = GroupElement::Su2([
                            (gamma / 2.0).cos(),
                            (gamma / 2.0).sin(),
                            0.0,
                            0.0,
                        ]);
                        nodes.push(rab.multiply(&rg)?);
                        weights.push(wa * wa * wb / 2.0);
                    }
                }
            }
            Ok(QuadratureRule {
                nodes,
                weights,
                exactness_degree: d,
            })
        }
    }
}

/// Draw a Haar-distributed element: uniform angle for U(1), uniform point of
/// S^3 (ball-rejection sampling) for SU(2).
pub fn haar_sample(variant: GroupVariant, rng: &mut impl rand::Rng) -> GroupElement {
    match variant {
        GroupVariant::U1 => {
            GroupElement::from_angle(rng.gen::<f64>() * 2.0 * std::f64::consts::PI)
        }
        GroupVariant::Su2 => loop {
            let q = [
                rng.gen::<f64>() * 2.0 - 1.0,
                rng.gen::<f64>() * 2.0 - 1.0,
                rng.gen::<f64>() * 2.0 - 1.0,
                rng.gen::<f64>() * 2.0 - 1.0,
            ];
            let n2: f64 = q.iter().map(|x| x * x).sum();
            if n2 > 1e-12 && n2 <= 1.0 {
                return GroupElement::from_quaternion(q);
            }
        },
    }
}

/// One-dimensional quadrature for SU(2) class functions: nodes phi_q in
/// [0, pi] and weights for the measure (2/pi) sin^2(phi) dphi; exact for
/// smooth class functions at Gauss-Legendre accuracy.
pub fn su2_class_rule(n_points: usize) -> Vec<(f64, f64)> {
    let (xs, ws) = gauss_legendre(n_points);
    xs.iter()
        .zip(ws.iter())
        .map(|(x, w)| {
            // Map [-1,1] -> [0,pi].
            let phi = 0.5 * std::f64::consts::PI * (x + 1.0);
            let weight = w * 0.5 * std::f64::consts::PI * (2.0 / std::f64::consts::PI)
                * phi.sin()
                * phi.sin();
            (phi, weight)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn rng() -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(7)
    }

    pub(crate) fn random_su2(rng: &mut impl Rng) -> GroupElement {
        loop {
            let q: [f64; 4] = [
                rng.sample(rand::distributions::Standard),
                rng.sample::<f64, _>(rand::distributions::Standard),
                rng.sample::<f64, _>(rand::distributions::Standard),
                rng.sample::<f64, _>(rand::distributions::Standard),
            ];
            let q = [q[0] * 2.0 - 1.0, q[1] * 2.0 - 1.0, q[2] * 2.0 - 1.0, q[3] * 2.0 - 1.0];
            let n2: f64 = q.iter().map(|x| x * x).sum();
            if n2 > 1e-6 && n2 < 1.0 {
                return GroupElement::from_quaternion(q);
            }
        }
    }

    fn mat_norm(m: &DMatrix<Complex64>) -> f64 {
        m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    #[test]
    fn multiply_u1_angle_addition() {
        let u = GroupElement::from_angle(0.3);
        let v = GroupElement::from_angle(0.5);
        match u.multiply(&v).unwrap() {
            GroupElement::U1(t) => assert!((t - 0.8).abs() < 1e-14),
            _ => panic!(),
        }
    }

    #[test]
    fn multiply_su2_unitary_closure() {
        let mut r = rng();
        for _ in 0..20 {
            let u = random_su2(&mut r);
            let v = random_su2(&mut r);
            let uv = u.multiply(&v).unwrap();
            let prod = uv.matrix() * uv.matrix().adjoint();
            let id = DMatrix::identity(2, 2);
            assert!(mat_norm(&(prod - id)) < 1e-12);
            // Quaternion product equals matrix product.
            let direct = u.matrix() * v.matrix();
            assert!(mat_norm(&(uv.matrix() - direct)) < 1e-12);
        }
    }

    #[test]
    fn multiply_mixed_variant_rejected() {
        let u = GroupElement::from_angle(0.1);
        let v = GroupElement::identity(GroupVariant::Su2);
        assert!(u.multiply(&v).is_err());
    }

    #[test]
    fn principal_root_identity_and_half_angle() {
        for n in 1..5 {
            let id = GroupElement::identity(GroupVariant::Su2);
            assert!(id.principal_root(n).unwrap().distance(&id) < 1e-14);
        }
        let u = GroupElement::from_angle(std::f64::consts::FRAC_PI_2);
        match u.principal_root(2).unwrap() {
            GroupElement::U1(t) => assert!((t - std::f64::consts::FRAC_PI_4).abs() < 1e-14),
            _ => panic!(),
        }
    }

    #[test]
    fn principal_root_cube_self_consistency() {
        let mut r = rng();
        for _ in 0..20 {
            let u = random_su2(&mut r);
            let v = u.principal_root(3).unwrap();
            let v3 = v.multiply(&v).unwrap().multiply(&v).unwrap();
            assert!(v3.distance(&u) < 1e-10);
        }
    }

    #[test]
    fn wigner_trivial_and_defining() {
        let mut r = rng();
        let u = random_su2(&mut r);
        let l0 = IrrepLabel { variant: GroupVariant::Su2, two_l: 0 };
        let m0 = wigner(&l0, &u).unwrap();
        assert!((m0[(0, 0)] - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        let lh = IrrepLabel { variant: GroupVariant::Su2, two_l: 1 };
        let mh = wigner(&lh, &u).unwrap();
        assert!(mat_norm(&(mh - u.matrix())) < 1e-12);
    }

    #[test]
    fn wigner_spin1_diagonal() {
        let theta = 0.37;
        let u = GroupElement::su2_diagonal(theta);
        let l1 = IrrepLabel { variant: GroupVariant::Su2, two_l: 2 };
        let m = wigner(&l1, &u).unwrap();
        let expect = [
            Complex64::new(0.0, 2.0 * theta).exp(),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, -2.0 * theta).exp(),
        ];
        for (i, e) in expect.iter().enumerate() {
            assert!((m[(i, i)] - e).norm() < 1e-13);
        }
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!(m[(i, j)].norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn wigner_homomorphism_and_unitarity() {
        let mut r = rng();
        for two_l in 0..=6i64 {
            let l = IrrepLabel { variant: GroupVariant::Su2, two_l };
            let u = random_su2(&mut r);
            let v = random_su2(&mut r);
            let uv = u.multiply(&v).unwrap();
            let lhs = wigner(&l, &uv).unwrap();
            let rhs = wigner(&l, &u).unwrap() * wigner(&l, &v).unwrap();
            assert!(mat_norm(&(lhs - rhs)) < 1e-10, "2l = {two_l}");
            let m = wigner(&l, &u).unwrap();
            let d = l.dim();
            assert!(mat_norm(&(m.adjoint() * m - DMatrix::identity(d, d))) < 1e-11);
        }
    }

    #[test]
    fn clebsch_gordan_singlet_and_selection() {
        // <1/2 1/2 ; 1/2 -1/2 | 0 0> = 1/sqrt(2)
        let v = clebsch_gordan(1, 1, 1, -1, 0, 0).unwrap();
        assert!((v - 1.0 / 2.0_f64.sqrt()).abs() < 1e-14);
        // M != m1 + m2 selection rule
        assert_eq!(clebsch_gordan(1, 1, 1, 1, 0, 0).unwrap(), 0.0);
        // Unitarity: sum over (L, M) of squares = 1 per (m1, m2)
        for (two_m1, two_m2) in [(1i64, 1i64), (1, -1), (-1, 1)] {
            let mut s = 0.0;
            for two_big_j in [0, 2] {
                let two_big_m = two_m1 + two_m2;
                if two_big_m.abs() <= two_big_j {
                    let c = clebsch_gordan(1, two_m1, 1, two_m2, two_big_j, two_big_m).unwrap();
                    s += c * c;
                }
            }
            assert!((s - 1.0).abs() < 1e-13);
        }
        assert!(clebsch_gordan(1, 2, 1, 0, 0, 0).is_err());
    }

    #[test]
    fn clebsch_gordan_vs_wigner_product() {
        // t^{l1} (x) t^{l2} decomposes with CG coefficients:
        // t^{l1}_{j1 k1} t^{l2}_{j2 k2} = sum_L <l1 j1 l2 j2|L J><l1 k1 l2 k2|L K> t^L_{J K}
        let mut r = rng();
        let u = random_su2(&mut r);
        let l1 = IrrepLabel { variant: GroupVariant::Su2, two_l: 2 };
        let l2 = IrrepLabel { variant: GroupVariant::Su2, two_l: 1 };
        let m1 = wigner(&l1, &u).unwrap();
        let m2 = wigner(&l2, &u).unwrap();
        let (two_j1, two_k1) = (0i64, 2i64); // j1 = 0, k1 = 1 (doubled)
        let (two_j2, two_k2) = (1i64, -1i64);
        let lhs = m1[(((2 - two_j1) / 2) as usize, ((2 - two_k1) / 2) as usize)]
            * m2[(((1 - two_j2) / 2) as usize, ((1 - two_k2) / 2) as usize)];
        let mut rhs = Complex64::new(0.0, 0.0);
        for two_big_l in [1i64, 3] {
            let two_jj = two_j1 + two_j2;
            let two_kk = two_k1 + two_k2;
            if two_jj.abs() > two_big_l || two_kk.abs() > two_big_l {
                continue;
            }
            let cj = clebsch_gordan(2, two_j1, 1, two_j2, two_big_l, two_jj).unwrap();
            let ck = clebsch_gordan(2, two_k1, 1, two_k2, two_big_l, two_kk).unwrap();
            let ml = wigner(
                &IrrepLabel { variant: GroupVariant::Su2, two_l: two_big_l },
                &u,
            )
            .unwrap();
            rhs += Complex64::new(cj * ck, 0.0)
                * ml[(
                    ((two_big_l - two_jj) / 2) as usize,
                    ((two_big_l - two_kk) / 2) as usize,
                )];
        }
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn haar_quadrature_orthogonality() {
        for variant in [GroupVariant::U1, GroupVariant::Su2] {
            let deg = 4;
            let rule = haar_quadrature(variant, deg).unwrap();
            let wsum: f64 = rule.weights.iter().sum();
            assert!((wsum - 1.0).abs() < 1e-12);
            let labels: Vec<i64> = match variant {
                GroupVariant::U1 => (-(deg as i64)..=deg as i64).collect(),
                GroupVariant::Su2 => (0..=deg as i64).collect(),
            };
            for &la in &labels {
                for &lb in &labels {
                    let ia = IrrepLabel { variant, two_l: la };
                    let ib = IrrepLabel { variant, two_l: lb };
                    let (da, db) = (ia.dim(), ib.dim());
                    for ja in 0..da {
                        for ka in 0..da {
                            for jb in 0..db {
                                for kb in 0..db {
                                    let mut s = Complex64::new(0.0, 0.0);
                                    for (node, w) in rule.nodes.iter().zip(rule.weights.iter()) {
                                        let ta = wigner(&ia, node).unwrap();
                                        let tb = wigner(&ib, node).unwrap();
                                        s += ta[(ja, ka)] * tb[(jb, kb)].conj() * *w;
                                    }
                                    let expect = if la == lb && ja == jb && ka == kb {
                                        1.0 / da as f64
                                    } else {
                                        0.0
                                    };
                                    assert!(
                                        (s - Complex64::new(expect, 0.0)).norm() < 1e-9,
                                        "variant {variant:?} la {la} lb {lb}"
                                    );
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn haar_quadrature_character_moment() {
        let rule = haar_quadrature(GroupVariant::Su2, 3).unwrap();
        // integral of |tr U|^2 dU = 1 by character orthogonality.
        let s: f64 = rule
            .nodes
            .iter()
            .zip(rule.weights.iter())
            .map(|(u, w)| u.trace().norm_sqr() * w)
            .sum();
        assert!((s - 1.0).abs() < 1e-10);
    }

    #[test]
    fn eigenphase_round_trip() {
        let mut r = rng();
        for _ in 0..50 {
            let u = random_su2(&mut r);
            let e = eigenphase_decompose(&u).unwrap();
            assert!((0.0..=std::f64::consts::PI).contains(&e.phi));
            let diag = GroupElement::su2_diagonal(e.phi);
            let back = e
                .eta
                .multiply(&diag)
                .unwrap()
                .multiply(&e.eta.inverse())
                .unwrap();
            assert!(back.distance(&u) < 1e-10);
        }
        // Already-diagonal input: eta = identity.
        let u = GroupElement::su2_diagonal(std::f64::consts::FRAC_PI_2);
        let e = eigenphase_decompose(&u).unwrap();
        assert!((e.phi - std::f64::consts::FRAC_PI_2).abs() < 1e-14);
        assert!(e.eta.distance(&GroupElement::identity(GroupVariant::Su2)) < 1e-14);
        // Identity input.
        let e = eigenphase_decompose(&GroupElement::identity(GroupVariant::Su2)).unwrap();
        assert!(e.phi == 0.0 && e.degenerate);
    }

    #[test]
    fn class_rule_flux_moments() {
        let rule = su2_class_rule(64);
        let wsum: f64 = rule.iter().map(|(_, w)| w).sum();
        assert!((wsum - 1.0).abs() < 1e-12);
        let m1: f64 = rule.iter().map(|(p, w)| p * w).sum();
        let m2: f64 = rule.iter().map(|(p, w)| p * p * w).sum();
        assert!((m1 - std::f64::consts::PI / 2.0).abs() < 1e-12);
        assert!((m2 - (std::f64::consts::PI * std::f64::consts::PI / 3.0 - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn gauss_legendre_exactness() {
        let (xs, ws) = gauss_legendre(8);
        // Exact for polynomials up to degree 15: check x^14 moment.
        let s: f64 = xs.iter().zip(ws.iter()).map(|(x, w)| x.powi(14) * w).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-13);
    }
}
