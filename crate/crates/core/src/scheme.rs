//! Lattice schemes: discrete velocities, moment polynomials and the moment matrix.
//!
//! Every polynomial is homogeneous once the scale velocity λ is restored, so a row
//! of degree `d` evaluated at `λ ξ_j` equals `λ^d` times its λ = 1 value. The
//! families below are stored in the λ = 1 form as an angular factor times a
//! polynomial in `s = X² + Y²` with exact rational coefficients.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{LbmError, Result};

/// The three supported velocity sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeName {
    D2Q9,
    D2Q13,
    D2Q17,
}

impl SchemeName {
    pub const ALL: [SchemeName; 3] = [SchemeName::D2Q9, SchemeName::D2Q13, SchemeName::D2Q17];

    /// Number of discrete velocities.
    pub fn q(self) -> usize {
        match self {
            SchemeName::D2Q9 => 9,
            SchemeName::D2Q13 => 13,
            SchemeName::D2Q17 => 17,
        }
    }

    /// `(b, a)` in `E = b ε − a λ² ρ`.
    pub fn energy_coefficients(self) -> (f64, f64) {
        match self {
            SchemeName::D2Q9 => (6.0, 4.0),
            SchemeName::D2Q13 => (26.0, 28.0),
            SchemeName::D2Q17 => (34.0, 60.0),
        }
    }

    /// `(a, b, c)` in the heat-flux law `q = (a λ² + b |u|² + c E/ρ) j`.
    pub fn heat_flux_coefficients(self) -> (f64, f64, f64) {
        match self {
            SchemeName::D2Q9 => (3.0, -3.0, 2.0),
            SchemeName::D2Q13 => (17.0 / 13.0, -1.0, 2.0 / 13.0),
            SchemeName::D2Q17 => (71.0 / 17.0, -3.0, 6.0 / 17.0),
        }
    }
}

impl fmt::Display for SchemeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SchemeName::D2Q9 => "D2Q9",
            SchemeName::D2Q13 => "D2Q13",
            SchemeName::D2Q17 => "D2Q17",
        };
        f.write_str(s)
    }
}

impl FromStr for SchemeName {
    type Err = LbmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "D2Q9" => Ok(SchemeName::D2Q9),
            "D2Q13" => Ok(SchemeName::D2Q13),
            "D2Q17" => Ok(SchemeName::D2Q17),
            _ => Err(LbmError::UnknownScheme(s.to_string())),
        }
    }
}

/// Physical meaning of a moment row; drives the equilibrium closure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MomentKind {
    Rho,
    Jx,
    Jy,
    Energy,
    XX,
    XY,
    Qx,
    Qy,
    Rx,
    Ry,
    TauX,
    TauY,
    XXe,
    XYe,
    E2,
    E3,
    E4,
}

impl MomentKind {
    pub fn label(self) -> &'static str {
        match self {
            MomentKind::Rho => "rho",
            MomentKind::Jx => "jx",
            MomentKind::Jy => "jy",
            MomentKind::Energy => "E",
            MomentKind::XX => "XX",
            MomentKind::XY => "XY",
            MomentKind::Qx => "qx",
            MomentKind::Qy => "qy",
            MomentKind::Rx => "rx",
            MomentKind::Ry => "ry",
            MomentKind::TauX => "tau_x",
            MomentKind::TauY => "tau_y",
            MomentKind::XXe => "XXe",
            MomentKind::XYe => "XYe",
            MomentKind::E2 => "E2",
            MomentKind::E3 => "E3",
            MomentKind::E4 => "E4",
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Angular {
    One,
    X,
    Y,
    XxMinusYy,
    Xy,
}

impl Angular {
    fn degree(self) -> u32 {
        match self {
            Angular::One => 0,
            Angular::X | Angular::Y => 1,
            Angular::XxMinusYy | Angular::Xy => 2,
        }
    }

    fn eval(self, x: f64, y: f64) -> f64 {
        match self {
            Angular::One => 1.0,
            Angular::X => x,
            Angular::Y => y,
            Angular::XxMinusYy => x * x - y * y,
            Angular::Xy => x * y,
        }
    }
}

/// One moment polynomial: `angular(X, Y) · Σ_m radial[m] s^m` with rational coefficients.
struct Poly {
    kind: MomentKind,
    angular: Angular,
    radial: &'static [(i64, i64)],
}

impl Poly {
    fn degree(&self) -> u32 {
        self.angular.degree() + 2 * (self.radial.len() as u32 - 1)
    }

    fn eval_unit(&self, x: f64, y: f64) -> f64 {
        let s = x * x + y * y;
        let mut acc = 0.0;
        for &(num, den) in self.radial.iter().rev() {
            acc = acc * s + num as f64 / den as f64;
        }
        self.angular.eval(x, y) * acc
    }
}

const ONE: &[(i64, i64)] = &[(1, 1)];

macro_rules! poly {
    ($kind:ident, $ang:ident, $rad:expr) => {
        Poly {
            kind: MomentKind::$kind,
            angular: Angular::$ang,
            radial: $rad,
        }
    };
}

const D2Q9_POLYS: [Poly; 9] = [
    poly!(Rho, One, ONE),
    poly!(Jx, X, ONE),
    poly!(Jy, Y, ONE),
    poly!(Energy, One, &[(-4, 1), (3, 1)]),
    poly!(XX, XxMinusYy, ONE),
    poly!(XY, Xy, ONE),
    poly!(Qx, X, &[(-5, 1), (3, 1)]),
    poly!(Qy, Y, &[(-5, 1), (3, 1)]),
    poly!(E2, One, &[(4, 1), (-21, 2), (9, 2)]),
];

const Q13_R: &[(i64, i64)] = &[(101, 6), (-63, 4), (35, 12)];
const XXE_RADIAL: &[(i64, i64)] = &[(-65, 12), (17, 12)];

const D2Q13_POLYS: [Poly; 13] = [
    poly!(Rho, One, ONE),
    poly!(Jx, X, ONE),
    poly!(Jy, Y, ONE),
    poly!(Energy, One, &[(-28, 1), (13, 1)]),
    poly!(XX, XxMinusYy, ONE),
    poly!(XY, Xy, ONE),
    poly!(Qx, X, &[(-3, 1), (1, 1)]),
    poly!(Qy, Y, &[(-3, 1), (1, 1)]),
    poly!(Rx, X, Q13_R),
    poly!(Ry, Y, Q13_R),
    poly!(E2, One, &[(140, 1), (-361, 2), (77, 2)]),
    poly!(E3, One, &[(-12, 1), (581, 12), (-273, 8), (137, 24)]),
    poly!(XXe, XxMinusYy, XXE_RADIAL),
];

const Q17_R: &[(i64, i64)] = &[(47, 6), (-17, 4), (5, 12)];
const Q17_TAU: &[(i64, i64)] = &[(-7429, 42), (1565, 8), (-2635, 48), (465, 112)];

const D2Q17_POLYS: [Poly; 17] = [
    poly!(Rho, One, ONE),
    poly!(Jx, X, ONE),
    poly!(Jy, Y, ONE),
    poly!(Energy, One, &[(-60, 1), (17, 1)]),
    poly!(XX, XxMinusYy, ONE),
    poly!(XY, Xy, ONE),
    poly!(Qx, X, &[(-17, 1), (3, 1)]),
    poly!(Qy, Y, &[(-17, 1), (3, 1)]),
    poly!(Rx, X, Q17_R),
    poly!(Ry, Y, Q17_R),
    poly!(TauX, X, Q17_TAU),
    poly!(TauY, Y, Q17_TAU),
    poly!(XXe, XxMinusYy, XXE_RADIAL),
    poly!(XYe, Xy, &[(-65, 12), (17, 24)]),
    poly!(E2, One, &[(620, 1), (-969, 2), (109, 2)]),
    poly!(E3, One, &[(-16740, 1), (330361, 12), (-74485, 8), (18445, 24)]),
    poly!(
        E4,
        One,
        &[(84, 1), (-24055, 56), (35425, 96), (-6035, 64), (9193, 1344)]
    ),
];

const D2Q9_VELOCITIES: [[i32; 2]; 9] = [
    [0, 0],
    [1, 0],
    [0, 1],
    [-1, 0],
    [0, -1],
    [1, 1],
    [-1, 1],
    [-1, -1],
    [1, -1],
];
const AXIS_SPEED_TWO: [[i32; 2]; 4] = [[2, 0], [0, 2], [-2, 0], [0, -2]];
const DIAGONAL_SPEED_TWO: [[i32; 2]; 4] = [[2, 2], [-2, 2], [-2, -2], [2, -2]];

fn velocities(name: SchemeName) -> Vec<[i32; 2]> {
    let mut v = D2Q9_VELOCITIES.to_vec();
    if name != SchemeName::D2Q9 {
        v.extend_from_slice(&AXIS_SPEED_TWO);
    }
    if name == SchemeName::D2Q17 {
        v.extend_from_slice(&DIAGONAL_SPEED_TWO);
    }
    v
}

fn polys(name: SchemeName) -> &'static [Poly] {
    match name {
        SchemeName::D2Q9 => &D2Q9_POLYS,
        SchemeName::D2Q13 => &D2Q13_POLYS,
        SchemeName::D2Q17 => &D2Q17_POLYS,
    }
}

/// Full description of one lattice scheme at a given scale velocity.
#[derive(Clone, Debug)]
pub struct SchemeDescriptor {
    pub name: SchemeName,
    pub q: usize,
    /// Integer velocities in lattice units.
    pub xi: Vec<[i32; 2]>,
    pub lambda: f64,
    pub dx: f64,
    pub dt: f64,
    /// `M[k][j] = p_k(λ ξ_j)`.
    pub m: DMatrix<f64>,
    pub minv: DMatrix<f64>,
    pub moment_labels: Vec<&'static str>,
    pub kinds: Vec<MomentKind>,
    /// Homogeneous degree of each moment polynomial (power of λ).
    pub degrees: Vec<u32>,
    pub conserved_indices: [usize; 4],
    /// `opposite[j]` is the index of `−ξ_j`.
    pub opposite: Vec<usize>,
}

/// Builds the velocity set, polynomial family and moment matrix of `name`.
pub fn build_scheme(name: SchemeName, lambda: f64, dx: f64) -> Result<SchemeDescriptor> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(LbmError::InvalidArgument(format!(
            "scale velocity must be positive, got {lambda}"
        )));
    }
    if !(dx > 0.0 && dx.is_finite()) {
        return Err(LbmError::InvalidArgument(format!(
            "lattice spacing must be positive, got {dx}"
        )));
    }
    let xi = velocities(name);
    let family = polys(name);
    let q = xi.len();
    debug_assert_eq!(q, family.len());

    let m = DMatrix::from_fn(q, q, |k, j| {
        let p = &family[k];
        let [x, y] = xi[j];
        lambda.powi(p.degree() as i32) * p.eval_unit(x as f64, y as f64)
    });
    let minv = m
        .clone()
        .try_inverse()
        .ok_or_else(|| LbmError::InvalidArgument(format!("singular moment matrix for {name}")))?;

    let opposite = xi
        .iter()
        .map(|v| {
            xi.iter()
                .position(|w| w[0] == -v[0] && w[1] == -v[1])
                .expect("velocity sets are symmetric")
        })
        .collect();

    Ok(SchemeDescriptor {
        name,
        q,
        xi,
        lambda,
        dx,
        dt: dx / lambda,
        m,
        minv,
        moment_labels: family.iter().map(|p| p.kind.label()).collect(),
        kinds: family.iter().map(|p| p.kind).collect(),
        degrees: family.iter().map(|p| p.degree()).collect(),
        conserved_indices: [0, 1, 2, 3],
        opposite,
    })
}

impl SchemeDescriptor {
    /// Unit-scale scheme (λ = dx = dt = 1).
    pub fn unit(name: SchemeName) -> Self {
        build_scheme(name, 1.0, 1.0).expect("unit scheme is always valid")
    }

    /// Index of the first row with the given kind.
    pub fn index_of(&self, kind: MomentKind) -> Option<usize> {
        self.kinds.iter().position(|&k| k == kind)
    }

    /// Numerical energy `E` from the physical total energy density `ε`.
    pub fn energy_numeric_from_physical(&self, rho: f64, eps: f64) -> f64 {
        let (b, a) = self.name.energy_coefficients();
        b * eps - a * self.lambda * self.lambda * rho
    }

    /// Physical total energy density `ε` from the numerical energy `E`.
    pub fn energy_physical_from_numeric(&self, rho: f64, e: f64) -> f64 {
        let (b, a) = self.name.energy_coefficients();
        (e + a * self.lambda * self.lambda * rho) / b
    }

    /// Moments `M f` of a population vector.
    pub fn moments(&self, f: &[f64]) -> Vec<f64> {
        mat_vec(&self.m, f)
    }

    /// Populations `M⁻¹ m` of a moment vector.
    pub fn populations(&self, m: &[f64]) -> Vec<f64> {
        mat_vec(&self.minv, m)
    }
}

pub(crate) fn mat_vec(a: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    assert_eq!(a.ncols(), x.len(), "dimension mismatch");
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)] * x[j]).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gram_offdiag_max(s: &SchemeDescriptor) -> f64 {
        let g = &s.m * s.m.transpose();
        let mut worst = 0.0f64;
        for a in 0..s.q {
            for b in 0..s.q {
                if a != b {
                    worst = worst.max(g[(a, b)].abs() / (g[(a, a)] * g[(b, b)]).sqrt());
                }
            }
        }
        worst
    }

    #[test]
    fn sizes_and_velocity_inclusion() {
        let q9 = SchemeDescriptor::unit(SchemeName::D2Q9);
        let q13 = SchemeDescriptor::unit(SchemeName::D2Q13);
        let q17 = SchemeDescriptor::unit(SchemeName::D2Q17);
        assert_eq!((q9.q, q13.q, q17.q), (9, 13, 17));
        assert_eq!(&q13.xi[..9], &q9.xi[..]);
        assert_eq!(&q17.xi[..13], &q13.xi[..]);
        assert!(q13.xi[9..].iter().all(|v| v[0] * v[1] == 0 && v[0].abs() + v[1].abs() == 2));
        assert!(q17.xi[13..].iter().all(|v| v[0].abs() == 2 && v[1].abs() == 2));
    }

    #[test]
    fn example_matrix_entries() {
        let q9 = SchemeDescriptor::unit(SchemeName::D2Q9);
        assert_eq!(q9.m[(3, 0)], -4.0);
        assert_eq!(q9.m[(3, 5)], 2.0);
        let q17 = SchemeDescriptor::unit(SchemeName::D2Q17);
        assert_eq!(q17.m[(3, 13)], 76.0);
    }

    #[test]
    fn rows_are_mutually_orthogonal() {
        for name in SchemeName::ALL {
            let s = SchemeDescriptor::unit(name);
            assert!(gram_offdiag_max(&s) < 1e-14, "{name}: {}", gram_offdiag_max(&s));
        }
    }

    #[test]
    fn inverse_is_accurate_for_several_lambdas() {
        for name in SchemeName::ALL {
            for lambda in [0.5, 1.0, 3.0] {
                let s = build_scheme(name, lambda, 0.1).unwrap();
                let err = (&s.minv * &s.m - DMatrix::identity(s.q, s.q)).abs().max();
                assert!(err < 1e-12, "{name} λ={lambda}: {err}");
                assert!((s.dt * s.lambda - s.dx).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn first_rows_are_density_momentum_energy() {
        for name in SchemeName::ALL {
            let s = build_scheme(name, 2.0, 1.0).unwrap();
            let (b, a) = name.energy_coefficients();
            for (j, v) in s.xi.iter().enumerate() {
                assert_eq!(s.m[(0, j)], 1.0);
                assert_eq!(s.m[(1, j)], 2.0 * v[0] as f64);
                assert_eq!(s.m[(2, j)], 2.0 * v[1] as f64);
                // energy row is b·|v|²/2 − a λ², consistent with E = b ε − a λ² ρ
                let v2 = 4.0 * (v[0] * v[0] + v[1] * v[1]) as f64;
                assert!((s.m[(3, j)] - (b * v2 / 2.0 - a * 4.0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn labels_follow_annex_ordering() {
        let q9 = SchemeDescriptor::unit(SchemeName::D2Q9);
        assert_eq!(q9.moment_labels, ["rho", "jx", "jy", "E", "XX", "XY", "qx", "qy", "E2"]);
        let q13 = SchemeDescriptor::unit(SchemeName::D2Q13);
        assert_eq!(&q13.moment_labels[8..], ["rx", "ry", "E2", "E3", "XXe"]);
        let q17 = SchemeDescriptor::unit(SchemeName::D2Q17);
        assert_eq!(
            &q17.moment_labels[8..],
            ["rx", "ry", "tau_x", "tau_y", "XXe", "XYe", "E2", "E3", "E4"]
        );
    }

    #[test]
    fn energy_conversion_examples() {
        let q9 = SchemeDescriptor::unit(SchemeName::D2Q9);
        assert_eq!(q9.energy_numeric_from_physical(1.0, 2.0 / 3.0), 0.0);
        // uniform populations carry zero numerical energy
        let f = vec![1.0 / 9.0; 9];
        assert!(q9.moments(&f)[3].abs() < 1e-15);
        let q13 = SchemeDescriptor::unit(SchemeName::D2Q13);
        assert_eq!(q13.energy_numeric_from_physical(0.0, 1.0), 26.0);
        let q17 = SchemeDescriptor::unit(SchemeName::D2Q17);
        assert_eq!(q17.energy_numeric_from_physical(1.0, 0.0), -60.0);
        for s in [q9, q13, q17] {
            let e = s.energy_numeric_from_physical(1.3, 0.77);
            assert!((s.energy_physical_from_numeric(1.3, e) - 0.77).abs() <= 2.0 * f64::EPSILON);
        }
    }

    #[test]
    fn opposite_directions() {
        for name in SchemeName::ALL {
            let s = SchemeDescriptor::unit(name);
            for j in 0..s.q {
                let o = s.opposite[j];
                assert_eq!(s.xi[o][0], -s.xi[j][0]);
                assert_eq!(s.opposite[o], j);
            }
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(build_scheme(SchemeName::D2Q9, 0.0, 1.0).is_err());
        assert!(build_scheme(SchemeName::D2Q9, 1.0, -1.0).is_err());
        assert!("D2Q11".parse::<SchemeName>().is_err());
        assert_eq!("d2q13".parse::<SchemeName>().unwrap(), SchemeName::D2Q13);
    }
}
