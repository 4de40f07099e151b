//! Property tests of invariants that hold for any admissible input.

mod common;

use common::*;
use lbm_core::constraints::{predicted_transport, validate, IsotropyLevel};
use lbm_core::linear::{LinearModel, WaveVector};
use lbm_core::params::{sigma_from_rate, RateGroup};
use lbm_core::simulator::{Grid, Simulator};
use lbm_core::{
    collide, derive_parameters, equilibrium_nonlinear, parse_config, Command, ConservedState, FreeParameters,
    ParameterSet, SchemeDescriptor, SchemeName,
};
use proptest::prelude::*;

fn scheme_strategy() -> impl Strategy<Value = SchemeName> {
    prop_oneof![Just(SchemeName::D2Q9), Just(SchemeName::D2Q13), Just(SchemeName::D2Q17)]
}

/// Fully constrained inputs with free rates drawn from `rates` in order.
fn full_parameters(scheme: SchemeName, s5: f64, dbeta: f64, rates: &[f64]) -> FreeParameters {
    let sigma5 = sigma_from_rate(s5);
    // keep the predicted diffusivity positive
    let (alpha2, beta2) = match scheme {
        SchemeName::D2Q9 => (-1.0, 0.1 + dbeta),
        SchemeName::D2Q13 => (-5.0, -4.0 + dbeta),
        SchemeName::D2Q17 => (-619.0, -20.55 + 0.1 * dbeta),
    };
    let tied = lbm_core::tied_groups(scheme, IsotropyLevel::Full);
    let mut fp = FreeParameters::new(scheme, sigma5, alpha2, beta2);
    let free = RateGroup::groups_of(scheme).into_iter().filter(|g| *g != RateGroup::Shear && !tied.contains(g));
    for (g, &r) in free.zip(rates.iter().cycle()) {
        fp = fp.with_rate(g, r);
    }
    fp
}

fn state(rho: f64, u: f64, v: f64, e: f64) -> ConservedState {
    ConservedState { rho, jx: rho * u, jy: rho * v, eps: rho * (e + 0.5 * (u * u + v * v)) }
}

fn conserved(s: &SchemeDescriptor, f: &[f64]) -> [f64; 4] {
    let m = s.moments(f);
    [m[0], m[1], m[2], m[3]]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn moments_and_populations_round_trip(scheme in scheme_strategy(), seed in any::<u64>()) {
        let s = SchemeDescriptor::unit(scheme);
        let mut rng = Lcg(seed);
        let f: Vec<f64> = (0..s.q).map(|_| rng.range(-1.0, 1.0)).collect();
        let back = s.populations(&s.moments(&f));
        for (a, b) in f.iter().zip(&back) {
            prop_assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn derived_sets_validate(scheme in scheme_strategy(), s5 in 0.3f64..1.95, dbeta in -1.0f64..1.0,
                             r1 in 0.2f64..1.9, r2 in 0.2f64..1.9) {
        let fp = full_parameters(scheme, s5, dbeta, &[r1, r2]);
        let p = derive_parameters(&fp).unwrap();
        let s = SchemeDescriptor::unit(scheme);
        let report = validate(&p, &s, IsotropyLevel::Full);
        prop_assert!(report.all_passed(), "{:?}", report.failures().collect::<Vec<_>>());
    }

    #[test]
    fn collision_conserves_and_fixes_equilibria(scheme in scheme_strategy(), seed in any::<u64>()) {
        let fp = full_parameters(scheme, 1.3, 0.0, &[1.1, 0.9]);
        let p = derive_parameters(&fp).unwrap();
        let s = SchemeDescriptor::unit(scheme);
        let mut rng = Lcg(seed);
        let w = state(rng.range(0.5, 2.0), rng.range(-0.2, 0.2), rng.range(-0.2, 0.2), 0.5 * p.c0 * p.c0 * rng.range(0.8, 1.2));
        let feq = s.populations(&equilibrium_nonlinear(&s, &p, &w).unwrap());
        let after = collide(&s, &p, &feq).unwrap();
        for (a, b) in feq.iter().zip(&after) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
        let f: Vec<f64> = feq.iter().map(|x| x + 0.01 * rng.range(-1.0, 1.0)).collect();
        let out = collide(&s, &p, &f).unwrap();
        let (c0, c1) = (conserved(&s, &f), conserved(&s, &out));
        for k in 0..4 {
            prop_assert!((c0[k] - c1[k]).abs() <= 1e-12 * c0[0].abs().max(c0[3].abs()));
        }
    }

    #[test]
    fn viscosity_grows_with_sigma(scheme in scheme_strategy(), s_a in 0.3f64..1.9, s_b in 0.3f64..1.9) {
        prop_assume!((s_a - s_b).abs() > 1e-3);
        let nu = |s5: f64| -> f64 {
            let fp = full_parameters(scheme, s5, 0.0, &[1.0]);
            let p = derive_parameters(&fp).unwrap();
            predicted_transport(&p, &SchemeDescriptor::unit(scheme)).unwrap().nu
        };
        // a smaller rate means a larger σ and a larger viscosity
        prop_assert_eq!(nu(s_a) > nu(s_b), s_a < s_b);
    }

    #[test]
    fn config_echo_round_trips(alpha2 in -3.0f64..0.0, beta2 in -0.5f64..0.5, s5 in 0.3f64..1.95, e2 in 0.2f64..1.9,
                               u0 in -0.1f64..0.1, k_points in 2usize..500) {
        let text = format!(
            "scheme = D2Q9\n[equilibrium]\nalpha2 = {alpha2}\nbeta2 = {beta2}\n[rates]\ns5 = {s5}\ns9 = {e2}\n\
             [reference]\nu0 = {u0}\n[zero-point]\nk_points = {k_points}\n"
        );
        let c = parse_config(&text).unwrap();
        let back = parse_config(&c.echo(Command::ZeroPoint).join("\n")).unwrap();
        prop_assert_eq!(back, c);
    }
}

fn periodic_sim(p: &ParameterSet, s: &SchemeDescriptor, n: usize) -> Simulator {
    Simulator::new(s, p, &Grid::periodic(n, n).unwrap()).unwrap()
}

/// Smooth random field on an `n × n` periodic grid.
fn field(seed: u64, c0: f64, n: usize) -> impl Fn(usize, usize) -> ConservedState {
    let mut rng = Lcg(seed);
    let a: Vec<f64> = (0..8).map(|_| rng.range(-1.0, 1.0)).collect();
    move |x, y| {
        let (tx, ty) = (
            2.0 * std::f64::consts::PI * x as f64 / n as f64,
            2.0 * std::f64::consts::PI * y as f64 / n as f64,
        );
        state(
            1.0 + 0.01 * (a[0] * tx.sin() + a[1] * (2.0 * ty).cos()),
            0.02 * (a[2] * ty.sin() + a[3] * (tx + ty).cos()),
            0.02 * (a[4] * tx.cos() + a[5] * (tx - 2.0 * ty).sin()),
            0.5 * c0 * c0 * (1.0 + 0.01 * (a[6] * (tx + ty).sin() + a[7] * ty.cos())),
        )
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn translation_commutes_with_evolution(set in 0usize..3, seed in any::<u64>(), sx in 0usize..12, sy in 0usize..12) {
        let (s, p) = stable_sets().swap_remove(set);
        let n = 12;
        let sim = periodic_sim(&p, &s, n);
        let g = field(seed, p.c0, n);
        let mut a = sim.init_from(&g).unwrap();
        let mut b = sim.init_from(|x, y| g((x + sx) % n, (y + sy) % n)).unwrap();
        sim.run(&mut a, 15).unwrap();
        sim.run(&mut b, 15).unwrap();
        for y in 0..n {
            for x in 0..n {
                prop_assert_eq!(b.site(x, y), a.site((x + sx) % n, (y + sy) % n));
            }
        }
    }

    #[test]
    fn transposition_commutes_with_evolution(set in 0usize..3, seed in any::<u64>()) {
        let (s, p) = stable_sets().swap_remove(set);
        let n = 12;
        let sim = periodic_sim(&p, &s, n);
        let g = field(seed, p.c0, n);
        let mut a = sim.init_from(&g).unwrap();
        let mut b = sim
            .init_from(|x, y| {
                let w = g(y, x);
                ConservedState { jx: w.jy, jy: w.jx, ..w }
            })
            .unwrap();
        sim.run(&mut a, 15).unwrap();
        sim.run(&mut b, 15).unwrap();
        let swap: Vec<usize> = s
            .xi
            .iter()
            .map(|&[cx, cy]| s.xi.iter().position(|&v| v == [cy, cx]).unwrap())
            .collect();
        for y in 0..n {
            for x in 0..n {
                let (fa, fb) = (a.site(y, x), b.site(x, y));
                for j in 0..s.q {
                    prop_assert!((fb[j] - fa[swap[j]]).abs() < 1e-13, "site ({x},{y}) j={j}");
                }
            }
        }
    }
}

#[test]
fn spectra_are_symmetric_under_lattice_reflections() {
    for (s, p) in stable_sets() {
        let model = LinearModel::new(&s, &p, &rest(&p)).unwrap();
        for (k, deg) in [(0.3, 10.0), (1.1, 33.0), (2.0, 71.0)] {
            let sorted = |d: f64| {
                let mut v: Vec<(f64, f64)> = model
                    .spectrum(WaveVector::from_degrees(k, d).unwrap(), false)
                    .unwrap()
                    .values
                    .iter()
                    .map(|z| (z.re, z.im.abs()))
                    .collect();
                v.sort_by(|a, b| a.partial_cmp(b).unwrap());
                v
            };
            let base = sorted(deg);
            for other in [90.0 - deg, -deg, 180.0 - deg] {
                for (a, b) in base.iter().zip(sorted(other)) {
                    assert!((a.0 - b.0).abs() < 1e-10 && (a.1 - b.1).abs() < 1e-10, "{} k={k} {deg} vs {other}", s.name);
                }
            }
        }
    }
}
