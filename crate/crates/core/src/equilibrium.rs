//! Equilibrium closures (nonlinear and linearized), relaxation and collision.

use nalgebra::DMatrix;

use crate::error::{LbmError, Result};
use crate::params::{ConservedState, ParameterSet, ReferenceState};
use crate::scheme::{MomentKind, SchemeDescriptor, SchemeName};

/// Divisor of `E` inside the `XXe`/`XYe` closures.
fn elastic_energy_divisor(name: SchemeName) -> f64 {
    match name {
        SchemeName::D2Q17 => 60.0,
        _ => 28.0,
    }
}

/// Constant linear coefficients `(∂/∂ρ, ∂/∂jx, ∂/∂jy, ∂/∂E)` of the moments whose
/// closure is linear in the conserved variables; `None` for the nonlinear rows.
fn linear_row(
    scheme: &SchemeDescriptor,
    p: &ParameterSet,
    kind: MomentKind,
) -> Option<[f64; 4]> {
    let l = scheme.lambda;
    let l2 = l * l;
    let l4 = l2 * l2;
    let l6 = l4 * l2;
    let l8 = l4 * l4;
    let rc = &p.r_coeffs;
    let tau_diag = |own: f64| (124.0 * own + 249.0 * p.c0 * p.c0 / l2 - 442.0) / 124.0;
    Some(match kind {
        MomentKind::Rho => [1.0, 0.0, 0.0, 0.0],
        MomentKind::Jx => [0.0, 1.0, 0.0, 0.0],
        MomentKind::Jy => [0.0, 0.0, 1.0, 0.0],
        MomentKind::Energy => [0.0, 0.0, 0.0, 1.0],
        MomentKind::XX | MomentKind::XY | MomentKind::Qx | MomentKind::Qy => return None,
        MomentKind::Rx | MomentKind::Ry if scheme.name == SchemeName::D2Q13 => {
            let c = p.c2 * l4;
            if kind == MomentKind::Rx {
                [0.0, c, 0.0, 0.0]
            } else {
                [0.0, 0.0, c, 0.0]
            }
        }
        MomentKind::Rx => {
            let l3 = l2 * l;
            [rc[0] * l3 * l2, rc[1] * l4, rc[2] * l4, rc[3] * l3]
        }
        MomentKind::Ry => {
            let l3 = l2 * l;
            [rc[4] * l3 * l2, rc[5] * l4, rc[6] * l4, rc[7] * l3]
        }
        MomentKind::TauX => {
            let f = -15.5 * l4 * l;
            [
                f * rc[0] * l2,
                f * tau_diag(rc[1]) * l,
                f * rc[2] * l,
                f * rc[3],
            ]
        }
        MomentKind::TauY => {
            let f = -15.5 * l4 * l;
            [
                f * rc[4] * l2,
                f * rc[5] * l,
                f * tau_diag(rc[6]) * l,
                f * rc[7],
            ]
        }
        MomentKind::XXe | MomentKind::XYe => {
            let xi = if kind == MomentKind::XXe { p.xi_x } else { p.xi_y };
            let d = elastic_energy_divisor(scheme.name);
            [xi * l4, 0.0, 0.0, xi * l2 / d]
        }
        MomentKind::E2 => [p.alpha2 * l4, 0.0, 0.0, p.beta2 * l2],
        MomentKind::E3 => [p.alpha3 * l6, 0.0, 0.0, p.beta3 * l4],
        MomentKind::E4 => [p.alpha4 * l8, 0.0, 0.0, p.beta4 * l6],
    })
}

/// Precomputed equilibrium evaluator: linear rows as a dense table, nonlinear rows by kind.
#[derive(Clone, Debug)]
pub struct EquilibriumModel {
    name: SchemeName,
    lambda: f64,
    kinds: Vec<MomentKind>,
    linear: Vec<Option<[f64; 4]>>,
    flux: (f64, f64, f64),
    quadratic: bool,
}

impl EquilibriumModel {
    pub fn new(scheme: &SchemeDescriptor, params: &ParameterSet) -> Self {
        EquilibriumModel {
            name: scheme.name,
            lambda: scheme.lambda,
            kinds: scheme.kinds.clone(),
            linear: scheme
                .kinds
                .iter()
                .map(|&k| linear_row(scheme, params, k))
                .collect(),
            flux: scheme.name.heat_flux_coefficients(),
            quadratic: params.include_velocity_square_in_heat_flux,
        }
    }

    /// Writes `m^eq(ρ, jx, jy, E)` into `out`.
    #[inline]
    pub fn eval(&self, w: [f64; 4], out: &mut [f64]) -> Result<()> {
        let [rho, jx, jy, e] = w;
        if !(rho > 0.0) {
            return Err(LbmError::NonPositiveDensity { rho });
        }
        let inv = 1.0 / rho;
        let (a, b, c) = self.flux;
        let mut g = a * self.lambda * self.lambda + c * e * inv;
        if self.quadratic {
            g += b * (jx * jx + jy * jy) * inv * inv;
        }
        for (i, kind) in self.kinds.iter().enumerate() {
            out[i] = match (kind, &self.linear[i]) {
                (_, Some(r)) => r[0] * rho + r[1] * jx + r[2] * jy + r[3] * e,
                (MomentKind::XX, None) => (jx * jx - jy * jy) * inv,
                (MomentKind::XY, None) => jx * jy * inv,
                (MomentKind::Qx, None) => g * jx,
                (MomentKind::Qy, None) => g * jy,
                _ => unreachable!("every other moment has a linear closure"),
            };
        }
        Ok(())
    }

    /// Analytic Jacobian `∂m^eq/∂(ρ, jx, jy, E)` at `w`, row-major `q × 4`.
    pub fn jacobian(&self, w: [f64; 4]) -> Result<Vec<[f64; 4]>> {
        let [rho, jx, jy, e] = w;
        if !(rho > 0.0) {
            return Err(LbmError::NonPositiveDensity { rho });
        }
        let inv = 1.0 / rho;
        let (a, b, c) = self.flux;
        let bq = if self.quadratic { b } else { 0.0 };
        let j2 = jx * jx + jy * jy;
        let g = a * self.lambda * self.lambda + bq * j2 * inv * inv + c * e * inv;
        let dg = [
            -2.0 * bq * j2 * inv * inv * inv - c * e * inv * inv,
            2.0 * bq * jx * inv * inv,
            2.0 * bq * jy * inv * inv,
            c * inv,
        ];
        let rows = self
            .kinds
            .iter()
            .enumerate()
            .map(|(i, kind)| match (kind, self.linear[i]) {
                (_, Some(r)) => r,
                (MomentKind::XX, None) => [
                    -(jx * jx - jy * jy) * inv * inv,
                    2.0 * jx * inv,
                    -2.0 * jy * inv,
                    0.0,
                ],
                (MomentKind::XY, None) => [-jx * jy * inv * inv, jy * inv, jx * inv, 0.0],
                (MomentKind::Qx, None) => [
                    jx * dg[0],
                    g + jx * dg[1],
                    jx * dg[2],
                    jx * dg[3],
                ],
                (MomentKind::Qy, None) => [
                    jy * dg[0],
                    jy * dg[1],
                    g + jy * dg[2],
                    jy * dg[3],
                ],
                _ => unreachable!("every other moment has a linear closure"),
            })
            .collect();
        Ok(rows)
    }

    pub fn scheme(&self) -> SchemeName {
        self.name
    }
}

/// Equilibrium moment vector of a conserved state.
pub fn equilibrium_nonlinear(
    scheme: &SchemeDescriptor,
    params: &ParameterSet,
    w: &ConservedState,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; scheme.q];
    EquilibriumModel::new(scheme, params).eval(w.to_numeric(scheme), &mut out)?;
    Ok(out)
}

/// `∂m^eq/∂(ρ, jx, jy, E)` at the reference state, as a `q × 4` matrix.
pub fn equilibrium_jacobian(
    scheme: &SchemeDescriptor,
    params: &ParameterSet,
    w0: &ReferenceState,
) -> Result<DMatrix<f64>> {
    let rows = EquilibriumModel::new(scheme, params).jacobian(w0.conserved().to_numeric(scheme))?;
    Ok(DMatrix::from_fn(scheme.q, 4, |i, j| rows[i][j]))
}

/// `m*_k = m_k + s_k (m^eq_k − m_k)`, leaving the conserved rows untouched.
pub fn relax_moments(m: &[f64], m_eq: &[f64], s: &[f64]) -> Vec<f64> {
    let mut out = m.to_vec();
    relax_in_place(&mut out, m_eq, s);
    out
}

#[inline]
fn relax_in_place(m: &mut [f64], m_eq: &[f64], s: &[f64]) {
    for k in 4..m.len() {
        m[k] += s[k] * (m_eq[k] - m[k]);
    }
}

/// Site-local collision operator with flattened moment matrices.
#[derive(Clone, Debug)]
pub struct Collider {
    q: usize,
    m: Vec<f64>,
    minv: Vec<f64>,
    s: Vec<f64>,
    /// Every rate zero: collision is the identity.
    frozen: bool,
    eq: EquilibriumModel,
}

impl Collider {
    pub fn new(scheme: &SchemeDescriptor, params: &ParameterSet) -> Self {
        let q = scheme.q;
        let flat = |a: &DMatrix<f64>| {
            let mut v = Vec::with_capacity(q * q);
            for i in 0..q {
                for j in 0..q {
                    v.push(a[(i, j)]);
                }
            }
            v
        };
        Collider {
            q,
            m: flat(&scheme.m),
            minv: flat(&scheme.minv),
            s: params.s.clone(),
            frozen: params.s.iter().all(|&s| s == 0.0),
            eq: EquilibriumModel::new(scheme, params),
        }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn equilibrium(&self) -> &EquilibriumModel {
        &self.eq
    }

    /// Moments of `f`, written to `m`.
    #[inline]
    pub fn moments(&self, f: &[f64], m: &mut [f64]) {
        let q = self.q;
        for (k, mk) in m.iter_mut().enumerate().take(q) {
            let row = &self.m[k * q..(k + 1) * q];
            *mk = row.iter().zip(f).map(|(a, b)| a * b).sum();
        }
    }

    /// Populations of `m`, written to `f`.
    #[inline]
    pub fn populations(&self, m: &[f64], f: &mut [f64]) {
        let q = self.q;
        for (j, fj) in f.iter_mut().enumerate().take(q) {
            let row = &self.minv[j * q..(j + 1) * q];
            *fj = row.iter().zip(m).map(|(a, b)| a * b).sum();
        }
    }

    /// Collides one site in place. Scratch buffers must hold `q` values each.
    #[inline]
    pub fn collide_in_place(&self, f: &mut [f64], m: &mut [f64], meq: &mut [f64]) -> Result<()> {
        if self.frozen {
            return Ok(());
        }
        self.moments(f, m);
        self.eq.eval([m[0], m[1], m[2], m[3]], meq)?;
        relax_in_place(m, meq, &self.s);
        self.populations(m, f);
        Ok(())
    }

    /// Equilibrium populations of numeric conserved variables `(ρ, jx, jy, E)`.
    pub fn equilibrium_populations(&self, w: [f64; 4]) -> Result<Vec<f64>> {
        let mut meq = vec![0.0; self.q];
        self.eq.eval(w, &mut meq)?;
        let mut f = vec![0.0; self.q];
        self.populations(&meq, &mut f);
        Ok(f)
    }
}

/// `f* = M⁻¹ relax(M f, m^eq(W(f)))`.
pub fn collide(scheme: &SchemeDescriptor, params: &ParameterSet, f: &[f64]) -> Result<Vec<f64>> {
    let c = Collider::new(scheme, params);
    let mut out = f.to_vec();
    let mut m = vec![0.0; scheme.q];
    let mut meq = vec![0.0; scheme.q];
    c.collide_in_place(&mut out, &mut m, &mut meq)?;
    Ok(out)
}
