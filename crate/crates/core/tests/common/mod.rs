//! Parameter sets and helpers shared by the integration tests.
#![allow(dead_code)]

use lbm_core::params::{rate_from_sigma, sigma_from_rate, RateGroup};
use lbm_core::{derive_parameters, FreeParameters, ParameterSet, ReferenceState, SchemeDescriptor, SchemeName};

/// Small deterministic generator so the suites need no extra crates.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next_f64(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    pub fn int(&mut self, lo: i32, hi: i32) -> i32 {
        lo + (self.next_f64() * (hi - lo + 1) as f64).floor() as i32
    }
}

pub fn derived(fp: FreeParameters) -> (SchemeDescriptor, ParameterSet) {
    let s = SchemeDescriptor::unit(fp.scheme);
    let p = derive_parameters(&fp).expect("preset derives");
    (s, p)
}

pub fn rest(p: &ParameterSet) -> ReferenceState {
    ReferenceState::from_sound_speed(1.0, 0.0, 0.0, p.c0).unwrap()
}

/// D2Q9 with third-order acoustic isotropy, stable.
pub fn d2q9_decoupled() -> FreeParameters {
    FreeParameters::new(SchemeName::D2Q9, sigma_from_rate(1.8181), -1.0, 0.1).with_rate(RateGroup::E2, 1.1765)
}

/// D2Q13 fully constrained, stable, Prandtl 0.8.
pub fn d2q13_stable() -> FreeParameters {
    let sigma5 = sigma_from_rate(1.5);
    let beta2 = -4.0;
    let x = 739.2 * sigma5 * sigma5;
    FreeParameters::new(SchemeName::D2Q13, sigma5, 28.0 * beta2 + 140.0 - x, beta2)
        .with_rate(RateGroup::E2, 0.8)
        .with_rate(RateGroup::E3, 0.8)
}

/// D2Q13 fully constrained with ν = 0.006 and κ = 0.008236.
pub fn d2q13_low_viscosity() -> FreeParameters {
    let beta2 = -20.945;
    FreeParameters::new(SchemeName::D2Q13, 0.015, 28.0 * beta2 + 140.0 - 0.18264, beta2)
        .with_rate(RateGroup::E2, 1.0)
        .with_rate(RateGroup::E3, 1.25)
}

/// D2Q17 low-Prandtl set with c0² = 7/6 (linearly unstable at large k).
pub fn d2q17_low_prandtl() -> FreeParameters {
    FreeParameters::new(SchemeName::D2Q17, sigma_from_rate(1.81812), -619.0, -20.55)
        .with_rate(RateGroup::HeatFlux, 6.0 / 13.0)
        .with_rate(RateGroup::Tau, 1.923)
        .with_rate(RateGroup::E2, 1.111)
        .with_rate(RateGroup::E4, 1.111)
}

/// D2Q17 with σ_q = 1/(12 σ_shear) and a τ rate giving isotropic spectra at k = 0.2.
pub fn d2q17_isotropic() -> FreeParameters {
    let s5 = 1.35;
    FreeParameters::new(SchemeName::D2Q17, sigma_from_rate(s5), -619.0, -20.55)
        .with_rate(RateGroup::HeatFlux, rate_from_sigma(1.0 / (12.0 * sigma_from_rate(s5))))
        .with_rate(RateGroup::Tau, 1.18)
        .with_rate(RateGroup::E2, 1.111)
        .with_rate(RateGroup::E4, 1.111)
}

/// D2Q17 set whose spectral radius stays at or below one.
pub fn d2q17_stable() -> FreeParameters {
    FreeParameters::new(SchemeName::D2Q17, sigma_from_rate(1.22), -536.0, -18.2)
        .with_rate(RateGroup::HeatFlux, 0.80)
        .with_rate(RateGroup::Tau, 1.1)
        .with_rate(RateGroup::E2, 0.75)
        .with_rate(RateGroup::E4, 0.95)
}

pub fn stable_sets() -> Vec<(SchemeDescriptor, ParameterSet)> {
    vec![derived(d2q9_decoupled()), derived(d2q13_stable()), derived(d2q17_stable())]
}
