//! Classical curvature interpolation: SLERP on edges, extremal plaquette
//! subdivision with branch selection, and 2D lattice refinement.
//!
//! Orientation convention (global, used by every module): the parallel
//! transporter for traversing an edge e from source to target is U_e^dag, and
//! U_e itself when traversing against the arrow; path transporters compose
//! right-to-left.  This matches the gauge action U_e -> x_{e-} U_e x_{e+}^dag
//! induced by the quantum rotations L_{x_{e-}} R_{x_{e+}}.

use crate::error::{LgtError, Result};
use crate::group::{eigenphase_decompose, principal_angle, GroupElement, GroupVariant};

/// Transporter carried by one traversal step: U^dag along the arrow, U against.
pub fn step_transporter(u: &GroupElement, along: bool) -> GroupElement {
    if along {
        u.inverse()
    } else {
        *u
    }
}

/// Holonomy of a closed traversal: right-to-left product of step transporters.
pub fn path_holonomy(steps: &[(GroupElement, bool)]) -> Result<GroupElement> {
    if steps.is_empty() {
        return Err(LgtError::InvalidArgument("empty path".into()));
    }
    let mut h = GroupElement::identity(steps[0].0.variant());
    for (u, along) in steps {
        h = step_transporter(u, *along).multiply(&h)?;
    }
    Ok(h)
}

/// Class angle of a loop holonomy: arccos(Re tr / 2) for SU(2), |principal
/// angle| for U(1).
pub fn plaquette_flux(steps: &[(GroupElement, bool)]) -> Result<f64> {
    Ok(path_holonomy(steps)?.flux())
}

/// Geodesic interpolation: the n-1 interior points of the minimal-curvature
/// chain from U_start to U_end, U_j = U_start (U_start^dag U_end)^{j/n}.
pub fn slerp_chain(
    u_start: &GroupElement,
    u_end: &GroupElement,
    n: usize,
) -> Result<Vec<GroupElement>> {
    if n < 2 {
        return Err(LgtError::InvalidArgument("slerp needs n >= 2".into()));
    }
    let step = u_start.inverse().multiply(u_end)?;
    let mut out = Vec::with_capacity(n - 1);
    for j in 1..n {
        out.push(u_start.multiply(&step.fract_pow(j as f64 / n as f64))?);
    }
    Ok(out)
}

/// Result of interpolating one plaquette into n subplaquettes.
#[derive(Clone, Debug)]
pub struct PlaquetteInterpolation {
    /// The side variables U_0..U_{n-1} (each directed along the traversal).
    pub inputs: Vec<GroupElement>,
    /// Winning branch index k in [0, n-1].
    pub branch_k: usize,
    /// Spoke-related extremal interpolants A_0..A_{n-1}.
    pub a_list: Vec<GroupElement>,
    /// Interpolated curvature E = 4n - 4n cos((phi - 2 pi k)/n) in the
    /// normalized-trace metric shared by both variants.
    pub energy: f64,
    /// Plaquette flux phi in [0, pi].
    pub flux: f64,
    /// Signed eigenphase entering the branch formula (U(1): signed principal
    /// angle of the holonomy; SU(2): phi >= 0).
    pub phi_signed: f64,
    /// Per-subplaquette signed flux psi = (phi - 2 pi k)/n.
    pub psi: f64,
}

impl PlaquetteInterpolation {
    /// Holonomy of subplaquette j (based at the added center vertex):
    /// A_j U_j^dag A_{(j-1) mod n}^dag; its flux is |psi| for every j.
    pub fn subplaquette_holonomy(&self, j: usize) -> Result<GroupElement> {
        let n = self.inputs.len();
        let prev = self.a_list[(j + n - 1) % n];
        self.a_list[j]
            .multiply(&self.inputs[j].inverse())?
            .multiply(&prev.inverse())
    }
}

/// Curvature contribution of a holonomy in the normalized-trace metric:
/// 4 - 4 cos(class angle), identical closed form for U(1) and SU(2).
pub fn holonomy_energy(h: &GroupElement) -> f64 {
    match h {
        GroupElement::U1(t) => 4.0 - 4.0 * t.cos(),
        GroupElement::Su2(q) => 4.0 - 4.0 * q[0],
    }
}

/// Interpolate a plaquette with sides U_0..U_{n-1} (traversal-directed) into n
/// subplaquettes of equal flux, evaluating all n branches k and keeping the
/// one of least energy (smallest k on ties).
pub fn plaquette_interpolate(inputs: &[GroupElement]) -> Result<PlaquetteInterpolation> {
    let n = inputs.len();
    if n < 2 {
        return Err(LgtError::InvalidArgument(
            "plaquette interpolation needs n >= 2 sides".into(),
        ));
    }
    let variant = inputs[0].variant();
    if inputs.iter().any(|u| u.variant() != variant) {
        return Err(LgtError::Incompatible("mixed variants in plaquette".into()));
    }
    // Holonomy M = U_{n-1}^dag ... U_0^dag (the loop traversed along its sides).
    let mut m = GroupElement::identity(variant);
    for u in inputs {
        m = u.inverse().multiply(&m)?;
    }
    let (eta, phi_signed, flux) = match variant {
        GroupVariant::U1 => {
            let th = match m {
                GroupElement::U1(t) => principal_angle(t),
                _ => unreachable!(),
            };
            (GroupElement::identity(GroupVariant::U1), th, th.abs())
        }
        GroupVariant::Su2 => {
            let e = eigenphase_decompose(&m)?;
            (e.eta, e.phi, e.phi)
        }
    };
    // Branch selection: E_k = 4n - 4n cos((phi - 2 pi k)/n), smallest k on ties.
    let nf = n as f64;
    let mut best_k = 0usize;
    let mut best_e = f64::INFINITY;
    for k in 0..n {
        let psi = (phi_signed - 2.0 * std::f64::consts::PI * k as f64) / nf;
        let e = 4.0 * nf - 4.0 * nf * psi.cos();
        if e < best_e - 1e-14 {
            best_e = e;
            best_k = k;
        }
    }
    let psi = (phi_signed - 2.0 * std::f64::consts::PI * best_k as f64) / nf;
    // A_j = diag(e^{i j psi}, e^{-i j psi}) eta^dag U_0 ... U_j.
    let mut a_list = Vec::with_capacity(n);
    let mut prefix = GroupElement::identity(variant);
    for (j, u) in inputs.iter().enumerate() {
        prefix = prefix.multiply(u)?;
        let d = match variant {
            GroupVariant::U1 => GroupElement::from_angle(j as f64 * psi),
            GroupVariant::Su2 => GroupElement::su2_diagonal(j as f64 * psi),
        };
        a_list.push(d.multiply(&eta.inverse())?.multiply(&prefix)?);
    }
    Ok(PlaquetteInterpolation {
        inputs: inputs.to_vec(),
        branch_k: best_k,
        a_list,
        energy: best_e,
        flux,
        phi_signed,
        psi,
    })
}

/// A rectangular 2D lattice gauge configuration.  Vertices are (i, j) with
/// 0 <= i < nx, 0 <= j < ny; horizontal edges run (i, j) -> (i+1, j), vertical
/// edges (i, j) -> (i, j+1) (wrapping when periodic).
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct LatticeConfig2d {
    /// Group variant of every edge.
    pub variant: GroupVariant,
    /// Vertex count in x.
    pub nx: usize,
    /// Vertex count in y.
    pub ny: usize,
    /// Periodic wrapping flag.
    pub periodic: bool,
    /// Horizontal edge variables, row-major by (i, j).
    pub hx: Vec<GroupElement>,
    /// Vertical edge variables, row-major by (i, j).
    pub vy: Vec<GroupElement>,
}

impl LatticeConfig2d {
    /// Flat (all-identity) configuration.
    pub fn flat(variant: GroupVariant, nx: usize, ny: usize, periodic: bool) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(LgtError::InvalidArgument("lattice needs nx, ny >= 2".into()));
        }
        let (nhx, nvy) = Self::edge_counts(nx, ny, periodic);
        Ok(LatticeConfig2d {
            variant,
            nx,
            ny,
            periodic,
            hx: vec![GroupElement::identity(variant); nhx],
            vy: vec![GroupElement::identity(variant); nvy],
        })
    }

    fn edge_counts(nx: usize, ny: usize, periodic: bool) -> (usize, usize) {
        if periodic {
            (nx * ny, nx * ny)
        } else {
            ((nx - 1) * ny, nx * (ny - 1))
        }
    }

    fn hx_index(&self, i: usize, j: usize) -> usize {
        if self.periodic {
            (i % self.nx) + self.nx * (j % self.ny)
        } else {
            i + (self.nx - 1) * j
        }
    }

    fn vy_index(&self, i: usize, j: usize) -> usize {
        if self.periodic {
            (i % self.nx) + self.nx * (j % self.ny)
        } else {
            i + self.nx * j
        }
    }

    /// Horizontal edge variable at (i, j).
    pub fn hx_at(&self, i: usize, j: usize) -> GroupElement {
        self.hx[self.hx_index(i, j)]
    }

    /// Vertical edge variable at (i, j).
    pub fn vy_at(&self, i: usize, j: usize) -> GroupElement {
        self.vy[self.vy_index(i, j)]
    }

    /// Set a horizontal edge variable.
    pub fn set_hx(&mut self, i: usize, j: usize, u: GroupElement) {
        let idx = self.hx_index(i, j);
        self.hx[idx] = u;
    }

    /// Set a vertical edge variable.
    pub fn set_vy(&mut self, i: usize, j: usize, u: GroupElement) {
        let idx = self.vy_index(i, j);
        self.vy[idx] = u;
    }

    /// Plaquette cell count in each direction.
    pub fn cells(&self) -> (usize, usize) {
        if self.periodic {
            (self.nx, self.ny)
        } else {
            (self.nx - 1, self.ny - 1)
        }
    }

    /// The four traversal-directed side variables of cell (i, j): left side
    /// up, top side right, right side down, bottom side left (the clockwise
    /// loop from the bottom-left corner, y up).
    pub fn plaquette_sides(&self, i: usize, j: usize) -> Result<[GroupElement; 4]> {
        let (cx, cy) = self.cells();
        if i >= cx || j >= cy {
            return Err(LgtError::InvalidArgument(format!(
                "cell ({i}, {j}) out of range"
            )));
        }
        Ok([
            self.vy_at(i, j),
            self.hx_at(i, j + 1),
            self.vy_at(i + 1, j).inverse(),
            self.hx_at(i, j).inverse(),
        ])
    }

    /// Flux of cell (i, j).
    pub fn cell_flux(&self, i: usize, j: usize) -> Result<f64> {
        let sides = self.plaquette_sides(i, j)?;
        let mut m = GroupElement::identity(self.variant);
        for u in &sides {
            m = u.inverse().multiply(&m)?;
        }
        Ok(m.flux())
    }

    /// All cell fluxes as (i, j, flux).
    pub fn flux_map(&self) -> Result<Vec<(usize, usize, f64)>> {
        let (cx, cy) = self.cells();
        let mut out = Vec::with_capacity(cx * cy);
        for j in 0..cy {
            for i in 0..cx {
                out.push((i, j, self.cell_flux(i, j)?));
            }
        }
        Ok(out)
    }

    /// Gauge transform: U_e -> x_{e-} U_e x_{e+}^dag for a vertex-indexed x.
    pub fn gauge_transform(
        &self,
        x: &dyn Fn(usize, usize) -> GroupElement,
    ) -> Result<LatticeConfig2d> {
        let mut out = self.clone();
        let hx_cols = if self.periodic { self.nx } else { self.nx - 1 };
        for j in 0..self.ny {
            for i in 0..hx_cols {
                let u = self.hx_at(i, j);
                let v = x(i, j)
                    .multiply(&u)?
                    .multiply(&x((i + 1) % self.nx, j).inverse())?;
                out.set_hx(i, j, v);
            }
        }
        let vy_rows = if self.periodic { self.ny } else { self.ny - 1 };
        for j in 0..vy_rows {
            for i in 0..self.nx {
                let u = self.vy_at(i, j);
                let v = x(i, j)
                    .multiply(&u)?
                    .multiply(&x(i, (j + 1) % self.ny).inverse())?;
                out.set_vy(i, j, v);
            }
        }
        Ok(out)
    }
}

/// Refine a 2D lattice configuration to half spacing: every edge is split
/// symmetrically into (U^{1/2}, U^{1/2}) and every cell gains a center vertex
/// whose four interior edges come from `plaquette_interpolate`, giving each of
/// the four subcells flux phi/4 for the winning branch.
pub fn subdivide_2d(config: &LatticeConfig2d) -> Result<LatticeConfig2d> {
    let (fnx, fny) = if config.periodic {
        (2 * config.nx, 2 * config.ny)
    } else {
        (2 * config.nx - 1, 2 * config.ny - 1)
    };
    let mut fine = LatticeConfig2d::flat(config.variant, fnx, fny, config.periodic)?;
    // Split edges: both halves carry the principal square root.
    let hx_cols = if config.periodic { config.nx } else { config.nx - 1 };
    for j in 0..config.ny {
        for i in 0..hx_cols {
            let h = config.hx_at(i, j).principal_root(2)?;
            fine.set_hx(2 * i, 2 * j, h);
            fine.set_hx(2 * i + 1, 2 * j, h);
        }
    }
    let vy_rows = if config.periodic { config.ny } else { config.ny - 1 };
    for j in 0..vy_rows {
        for i in 0..config.nx {
            let v = config.vy_at(i, j).principal_root(2)?;
            fine.set_vy(2 * i, 2 * j, v);
            fine.set_vy(2 * i, 2 * j + 1, v);
        }
    }
    // Interior edges per coarse cell from the extremal interpolants: the edge
    // directed center -> midpoint of side gamma_m carries c_m = A_m W_m^{-1/2}.
    let (cx, cy) = config.cells();
    for j in 0..cy {
        for i in 0..cx {
            let sides = config.plaquette_sides(i, j)?;
            let interp = plaquette_interpolate(&sides)?;
            let c: Vec<GroupElement> = (0..4)
                .map(|m| {
                    interp.a_list[m]
                        .multiply(&sides[m].principal_root(2).unwrap().inverse())
                        .unwrap()
                })
                .collect();
            // Lattice-directed interior edges of the fine cell block:
            // left mid -> center is +x: c_0^dag; center -> top mid is +y: c_1;
            // center -> right mid is +x: c_2; bottom mid -> center is +y: c_3^dag.
            fine.set_hx(2 * i, 2 * j + 1, c[0].inverse());
            fine.set_vy(2 * i + 1, 2 * j + 1, c[1]);
            fine.set_hx(2 * i + 1, 2 * j + 1, c[2]);
            fine.set_vy(2 * i + 1, 2 * j, c[3].inverse());
        }
    }
    Ok(fine)
}
