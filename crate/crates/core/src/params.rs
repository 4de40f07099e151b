//! Parameter sets and conserved/reference states.

use crate::error::{LbmError, Result};
use crate::scheme::{MomentKind, SchemeDescriptor, SchemeName};

/// Dissipation coefficient `σ = 1/s − 1/2`.
pub fn sigma_from_rate(s: f64) -> f64 {
    1.0 / s - 0.5
}

/// Relaxation rate `s = 1/(σ + 1/2)`.
pub fn rate_from_sigma(sigma: f64) -> f64 {
    1.0 / (sigma + 0.5)
}

/// Groups of non-conserved moments that share one relaxation rate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RateGroup {
    /// `XX`, `XY`
    Shear,
    /// `qx`, `qy`
    HeatFlux,
    /// `rx`, `ry`
    R,
    /// `τx`, `τy`
    Tau,
    /// `XXe`, `XYe`
    Elastic,
    E2,
    E3,
    E4,
}

impl RateGroup {
    pub fn of(kind: MomentKind) -> Option<RateGroup> {
        use MomentKind::*;
        match kind {
            Rho | Jx | Jy | Energy => None,
            XX | XY => Some(RateGroup::Shear),
            Qx | Qy => Some(RateGroup::HeatFlux),
            Rx | Ry => Some(RateGroup::R),
            TauX | TauY => Some(RateGroup::Tau),
            XXe | XYe => Some(RateGroup::Elastic),
            MomentKind::E2 => Some(RateGroup::E2),
            MomentKind::E3 => Some(RateGroup::E3),
            MomentKind::E4 => Some(RateGroup::E4),
        }
    }

    /// Groups present in a scheme, in moment order.
    pub fn groups_of(scheme: SchemeName) -> Vec<RateGroup> {
        use RateGroup::*;
        match scheme {
            SchemeName::D2Q9 => vec![Shear, HeatFlux, E2],
            SchemeName::D2Q13 => vec![Shear, HeatFlux, R, E2, E3, Elastic],
            SchemeName::D2Q17 => vec![Shear, HeatFlux, R, Tau, Elastic, E2, E3, E4],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RateGroup::Shear => "shear (XX, XY)",
            RateGroup::HeatFlux => "heat flux (qx, qy)",
            RateGroup::R => "r vector (rx, ry)",
            RateGroup::Tau => "tau vector (tau_x, tau_y)",
            RateGroup::Elastic => "elastic (XXe, XYe)",
            RateGroup::E2 => "E2",
            RateGroup::E3 => "E3",
            RateGroup::E4 => "E4",
        }
    }
}

/// Every equilibrium coefficient and relaxation rate of one scheme.
///
/// Coefficients are dimensionless multiples of the relevant power of λ, except
/// `c0`, which is a velocity.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterSet {
    pub scheme: SchemeName,
    pub c0: f64,
    /// Heat-flux slope at rest, units of λ²; a consequence of `c0` and the heat-flux law.
    pub c1: f64,
    /// r-vector slope, units of λ⁴.
    pub c2: f64,
    /// τ-vector slope, units of λ⁶ (D2Q17).
    pub c3: f64,
    pub alpha2: f64,
    pub beta2: f64,
    pub alpha3: f64,
    pub beta3: f64,
    pub alpha4: f64,
    pub beta4: f64,
    pub xi_x: f64,
    pub xi_y: f64,
    /// `[c_x^ρ, c_x^x, c_x^y, c_x^ε, c_y^ρ, c_y^x, c_y^y, c_y^ε]` with
    /// `r_x = λ³(c_x^ρ λ² ρ + c_x^x λ jx + c_x^y λ jy + c_x^ε E)` and the same pattern
    /// for `r_y` (D2Q17 only).
    pub r_coeffs: [f64; 8],
    /// Relaxation rate per moment row; zero on conserved rows.
    pub s: Vec<f64>,
    pub include_velocity_square_in_heat_flux: bool,
}

impl ParameterSet {
    /// `σ_k` for row `k`.
    pub fn sigma(&self, k: usize) -> f64 {
        sigma_from_rate(self.s[k])
    }

    /// Rate of the first row belonging to `group`.
    pub fn rate(&self, scheme: &SchemeDescriptor, group: RateGroup) -> Option<f64> {
        scheme
            .kinds
            .iter()
            .position(|&k| RateGroup::of(k) == Some(group))
            .map(|i| self.s[i])
    }

    /// Sets the rate of every row in `group`.
    pub fn set_rate(&mut self, scheme: &SchemeDescriptor, group: RateGroup, value: f64) {
        for (i, &k) in scheme.kinds.iter().enumerate() {
            if RateGroup::of(k) == Some(group) {
                self.s[i] = value;
            }
        }
    }

    /// Copy with every relaxation rate set to zero (pure streaming).
    pub fn with_zero_rates(&self) -> ParameterSet {
        let mut p = self.clone();
        p.s.iter_mut().for_each(|s| *s = 0.0);
        p
    }

    /// Checks rates: zero on conserved rows, inside (0, 2) elsewhere.
    pub fn check_rates(&self, scheme: &SchemeDescriptor) -> Result<()> {
        if self.s.len() != scheme.q {
            return Err(LbmError::InvalidArgument(format!(
                "expected {} rates, got {}",
                scheme.q,
                self.s.len()
            )));
        }
        for (i, &s) in self.s.iter().enumerate() {
            if i < 4 {
                if s != 0.0 {
                    return Err(LbmError::violation(
                        scheme.moment_labels[i],
                        "conserved moments must not relax",
                    ));
                }
            } else if !(s > 0.0 && s < 2.0) {
                return Err(LbmError::violation(
                    format!("s_{}", scheme.moment_labels[i]),
                    format!("rate {s} outside (0,2)"),
                ));
            }
        }
        Ok(())
    }
}

/// Conserved variables with the physical total energy density `ε`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConservedState {
    pub rho: f64,
    pub jx: f64,
    pub jy: f64,
    pub eps: f64,
}

impl ConservedState {
    /// `(ρ, jx, jy, E)` with the scheme's numerical energy.
    pub fn to_numeric(&self, scheme: &SchemeDescriptor) -> [f64; 4] {
        [
            self.rho,
            self.jx,
            self.jy,
            scheme.energy_numeric_from_physical(self.rho, self.eps),
        ]
    }

    pub fn from_numeric(scheme: &SchemeDescriptor, w: [f64; 4]) -> Self {
        ConservedState {
            rho: w[0],
            jx: w[1],
            jy: w[2],
            eps: scheme.energy_physical_from_numeric(w[0], w[3]),
        }
    }
}

/// Linearization point: density, advection velocity and specific internal energy.
///
/// The gas has `p = ρ e`, so the sound speed satisfies `c0² = 2 e0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferenceState {
    pub rho0: f64,
    pub u0: f64,
    pub v0: f64,
    pub e0: f64,
}

impl ReferenceState {
    pub fn new(rho0: f64, u0: f64, v0: f64, e0: f64) -> Result<Self> {
        if !(rho0 > 0.0) {
            return Err(LbmError::NonPositiveDensity { rho: rho0 });
        }
        Ok(ReferenceState { rho0, u0, v0, e0 })
    }

    /// State whose internal energy matches sound speed `c0`.
    pub fn from_sound_speed(rho0: f64, u0: f64, v0: f64, c0: f64) -> Result<Self> {
        Self::new(rho0, u0, v0, 0.5 * c0 * c0)
    }

    /// Kinetic energy per unit mass `(u0² + v0²)/2`.
    pub fn k0(&self) -> f64 {
        0.5 * (self.u0 * self.u0 + self.v0 * self.v0)
    }

    pub fn sound_speed(&self) -> f64 {
        (2.0 * self.e0).sqrt()
    }

    /// Total specific energy `E0 = e0 + k0`.
    pub fn specific_total_energy(&self) -> f64 {
        self.e0 + self.k0()
    }

    pub fn conserved(&self) -> ConservedState {
        ConservedState {
            rho: self.rho0,
            jx: self.rho0 * self.u0,
            jy: self.rho0 * self.v0,
            eps: self.rho0 * self.specific_total_energy(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_rate_roundtrip() {
        for s in [0.1, 1.0, 1.5, 1.99] {
            assert!((rate_from_sigma(sigma_from_rate(s)) - s).abs() < 1e-15);
        }
        assert_eq!(sigma_from_rate(1.0), 0.5);
        assert!((rate_from_sigma(1.0 / 12.0) - 12.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn reference_state_energy() {
        let w = ReferenceState::from_sound_speed(2.0, 0.1, -0.2, 0.9).unwrap();
        assert!((w.sound_speed() - 0.9).abs() < 1e-15);
        assert!((w.k0() - 0.025).abs() < 1e-15);
        let c = w.conserved();
        assert!((c.eps - 2.0 * (0.405 + 0.025)).abs() < 1e-14);
        assert!(ReferenceState::new(0.0, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn rate_groups_cover_all_non_conserved_rows() {
        for name in SchemeName::ALL {
            let s = SchemeDescriptor::unit(name);
            let groups = RateGroup::groups_of(name);
            for (i, &k) in s.kinds.iter().enumerate() {
                match RateGroup::of(k) {
                    None => assert!(i < 4),
                    Some(g) => assert!(groups.contains(&g), "{name} {g:?}"),
                }
            }
        }
    }
}
