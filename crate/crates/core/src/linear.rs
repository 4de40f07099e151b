//! Plane-wave analysis of the linearized one-step operator.
//!
//! For a perturbation `f = f̂ e^{i k·x}` around the equilibrium of a reference
//! state, one collide-and-stream step multiplies `f̂` by
//! `A(k) = diag(e^{−i k·ξ_j dx}) M⁻¹ (I − S + S J P) M`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::constraints::{predicted_transport, TransportCoefficients};
use crate::eigen::{eig, Eigen};
use crate::equilibrium::equilibrium_jacobian;
use crate::error::{LbmError, Result};
use crate::params::{ParameterSet, ReferenceState};
use crate::scheme::SchemeDescriptor;

type C = Complex64;

/// Wave vector given by magnitude (1/length) and angle from the x axis (radians).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WaveVector {
    pub k: f64,
    pub theta: f64,
}

impl WaveVector {
    pub fn new(k: f64, theta: f64) -> Result<Self> {
        if !(k >= 0.0 && k.is_finite() && theta.is_finite()) {
            return Err(LbmError::InvalidArgument(format!(
                "wave vector needs finite k >= 0 and finite angle, got k={k}, theta={theta}"
            )));
        }
        Ok(WaveVector { k, theta })
    }

    pub fn from_degrees(k: f64, degrees: f64) -> Result<Self> {
        Self::new(k, degrees.to_radians())
    }

    /// Wave vector from Cartesian components.
    pub fn from_components(kx: f64, ky: f64) -> Self {
        WaveVector { k: kx.hypot(ky), theta: ky.atan2(kx) }
    }

    pub fn kx(&self) -> f64 {
        self.k * self.theta.cos()
    }

    pub fn ky(&self) -> f64 {
        self.k * self.theta.sin()
    }

    /// Unit direction; the x axis when `k = 0`.
    pub fn direction(&self) -> [f64; 2] {
        [self.theta.cos(), self.theta.sin()]
    }
}

/// Physical label of one eigenvalue.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModeLabel {
    Shear,
    Thermal,
    /// Sound travelling against the wave direction.
    AcousticMinus,
    /// Sound travelling along the wave direction.
    AcousticPlus,
    Kinetic,
}

impl ModeLabel {
    pub const PHYSICAL: [ModeLabel; 4] = [
        ModeLabel::Shear,
        ModeLabel::Thermal,
        ModeLabel::AcousticMinus,
        ModeLabel::AcousticPlus,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModeLabel::Shear => "shear",
            ModeLabel::Thermal => "thermal",
            ModeLabel::AcousticMinus => "acoustic-",
            ModeLabel::AcousticPlus => "acoustic+",
            ModeLabel::Kinetic => "kinetic",
        }
    }

    fn column(self) -> usize {
        match self {
            ModeLabel::Shear => 0,
            ModeLabel::Thermal => 1,
            ModeLabel::AcousticMinus => 2,
            ModeLabel::AcousticPlus => 3,
            ModeLabel::Kinetic => usize::MAX,
        }
    }

    pub fn is_acoustic(self) -> bool {
        matches!(self, ModeLabel::AcousticMinus | ModeLabel::AcousticPlus)
    }
}

impl std::fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModeLabel {
    type Err = LbmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "shear" => Ok(ModeLabel::Shear),
            "thermal" => Ok(ModeLabel::Thermal),
            "acoustic" | "acoustic+" | "acoustic_plus" => Ok(ModeLabel::AcousticPlus),
            "acoustic-" | "acoustic_minus" => Ok(ModeLabel::AcousticMinus),
            other => Err(LbmError::InvalidArgument(format!(
                "unknown mode `{other}` (shear, thermal, acoustic, acoustic-)"
            ))),
        }
    }
}

/// Eigenvalues at one wave vector, with labels once tracked.
#[derive(Clone, Debug)]
pub struct ModeSpectrum {
    pub wave: WaveVector,
    pub values: Vec<C>,
    pub labels: Vec<ModeLabel>,
    pub vectors: Option<DMatrix<C>>,
}

impl ModeSpectrum {
    pub fn value(&self, label: ModeLabel) -> Option<C> {
        self.labels.iter().position(|&l| l == label).map(|i| self.values[i])
    }

    pub fn spectral_radius(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Characteristic directions of the linearized Euler system in `(ρ, jx, jy, ε)`.
///
/// Columns: shear, thermal, backward acoustic, forward acoustic. Real and unit
/// norm; at `k = 0` the direction falls back to the x axis.
pub fn characteristic_directions(w0: &ReferenceState, c0: f64, n: [f64; 2]) -> DMatrix<f64> {
    let (u, v) = (w0.u0, w0.v0);
    let k0 = w0.k0();
    let un = u * n[0] + v * n[1];
    let cols = [
        [0.0, -n[1], n[0], -u * n[1] + v * n[0]],
        [1.0, u, v, k0],
        [1.0, u - c0 * n[0], v - c0 * n[1], c0 * c0 + k0 - c0 * un],
        [1.0, u + c0 * n[0], v + c0 * n[1], c0 * c0 + k0 + c0 * un],
    ];
    DMatrix::from_fn(4, 4, |i, j| {
        let c = &cols[j];
        let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        c[i] / norm
    })
}

/// Characteristic basis in the Fourier convention `∂ → −i k`, `√Δ → i |k|`.
///
/// Shear and acoustic columns carry the factor `i |k|`; at `k = 0` those factors
/// are dropped and the direction defaults to the x axis so the basis stays regular.
pub fn characteristic_basis(w0: &ReferenceState, c0: f64, wave: WaveVector) -> DMatrix<C> {
    let real = characteristic_directions(w0, c0, wave.direction());
    let ik = if wave.k > 0.0 { C::new(0.0, wave.k) } else { C::new(1.0, 0.0) };
    DMatrix::from_fn(4, 4, |i, j| if j == 1 { C::from(real[(i, j)]) } else { ik * real[(i, j)] })
}

/// Linearized operator of a scheme around a reference state.
#[derive(Clone, Debug)]
pub struct LinearModel {
    scheme: SchemeDescriptor,
    params: ParameterSet,
    w0: ReferenceState,
    /// `M⁻¹ (I − S + S J P) M`, the collision part of `A(k)`.
    collision: DMatrix<f64>,
    transport: Option<TransportCoefficients>,
}

impl LinearModel {
    pub fn new(scheme: &SchemeDescriptor, params: &ParameterSet, w0: &ReferenceState) -> Result<Self> {
        if params.s.len() != scheme.q || params.scheme != scheme.name {
            return Err(LbmError::InvalidArgument(format!(
                "parameter set for {} does not match scheme {}",
                params.scheme, scheme.name
            )));
        }
        let q = scheme.q;
        let jac = equilibrium_jacobian(scheme, params, w0)?;
        let mut c = DMatrix::<f64>::identity(q, q);
        for k in 4..q {
            let s = params.s[k];
            c[(k, k)] = 1.0 - s;
            for j in 0..4 {
                c[(k, j)] += s * jac[(k, j)];
            }
        }
        let collision = &scheme.minv * c * &scheme.m;
        Ok(LinearModel {
            scheme: scheme.clone(),
            params: params.clone(),
            w0: *w0,
            collision,
            transport: predicted_transport(params, scheme).ok(),
        })
    }

    pub fn scheme(&self) -> &SchemeDescriptor {
        &self.scheme
    }

    pub fn params(&self) -> &ParameterSet {
        &self.params
    }

    pub fn reference(&self) -> &ReferenceState {
        &self.w0
    }

    /// Predicted second-order transport, if the parameters give a positive diffusivity.
    pub fn transport(&self) -> Option<&TransportCoefficients> {
        self.transport.as_ref()
    }

    /// One-step amplification matrix at `wave`.
    pub fn matrix(&self, wave: WaveVector) -> DMatrix<C> {
        let q = self.scheme.q;
        let (kx, ky) = (wave.kx() * self.scheme.dx, wave.ky() * self.scheme.dx);
        let mut a = DMatrix::<C>::zeros(q, q);
        for (j, xi) in self.scheme.xi.iter().enumerate() {
            let phase = C::from_polar(1.0, -(kx * xi[0] as f64 + ky * xi[1] as f64));
            for l in 0..q {
                a[(j, l)] = phase * self.collision[(j, l)];
            }
        }
        a
    }

    /// Unlabelled eigen-decomposition at `wave`.
    pub fn spectrum(&self, wave: WaveVector, vectors: bool) -> Result<ModeSpectrum> {
        let a = self.matrix(wave);
        let Eigen { values, vectors } = eig(&a, vectors).map_err(|e| match e {
            LbmError::NoConvergence { iterations, context } => LbmError::NoConvergence {
                iterations,
                context: format!(
                    "{context}; {} at k={}, theta={} deg",
                    self.scheme.name,
                    wave.k,
                    wave.theta.to_degrees()
                ),
            },
            other => other,
        })?;
        let n = values.len();
        Ok(ModeSpectrum { wave, values, labels: vec![ModeLabel::Kinetic; n], vectors })
    }

    /// Advection phase `e^{−i k·u0 Δt}` carried by every hydrodynamic eigenvalue.
    pub fn advection_phase(&self, wave: WaveVector) -> C {
        let dt = self.scheme.dt;
        C::from_polar(1.0, -(wave.kx() * self.w0.u0 + wave.ky() * self.w0.v0) * dt)
    }

    /// Conserved part `(ρ, jx, jy, ε)` of a population-space vector.
    fn conserved_part(&self, v: &[C]) -> [C; 4] {
        let m = &self.scheme.m;
        let mut w = [C::new(0.0, 0.0); 4];
        for (r, wr) in w.iter_mut().enumerate() {
            *wr = (0..self.scheme.q).map(|j| v[j] * m[(r, j)]).sum();
        }
        let (b, a) = self.scheme.name.energy_coefficients();
        let l2 = self.scheme.lambda * self.scheme.lambda;
        w[3] = (w[3] + w[0] * (a * l2)) / b;
        w
    }

    /// Coefficients of each eigenvector's conserved part on the characteristic directions,
    /// normalized so each row sums to one in modulus.
    fn characteristic_weights(&self, spec: &ModeSpectrum, candidates: &[usize]) -> Vec<[f64; 4]> {
        let r0 = characteristic_directions(&self.w0, self.params.c0, spec.wave.direction());
        let r0c: DMatrix<C> = r0.map(C::from);
        let lu = r0c.lu();
        let vecs = spec.vectors.as_ref().expect("vectors requested");
        candidates
            .iter()
            .map(|&i| {
                let col: Vec<C> = vecs.column(i).iter().copied().collect();
                let w = self.conserved_part(&col);
                let rhs = nalgebra::DVector::from_column_slice(&w);
                let c = lu.solve(&rhs).unwrap_or_else(|| nalgebra::DVector::zeros(4));
                let tot: f64 = c.iter().map(|z| z.norm()).sum::<f64>().max(f64::MIN_POSITIVE);
                [c[0].norm() / tot, c[1].norm() / tot, c[2].norm() / tot, c[3].norm() / tot]
            })
            .collect()
    }

    /// Assigns physical labels at a small wave number from characteristic overlaps.
    fn label_initial(&self, spec: &mut ModeSpectrum) {
        let phase = self.advection_phase(spec.wave);
        let mut order: Vec<usize> = (0..spec.values.len()).collect();
        order.sort_by(|&a, &b| {
            let da = (spec.values[a] - phase).norm();
            let db = (spec.values[b] - phase).norm();
            da.total_cmp(&db).then(a.cmp(&b))
        });
        let cand: Vec<usize> = order.into_iter().take(4).collect();
        let w = self.characteristic_weights(spec, &cand);
        let mut best = (f64::NEG_INFINITY, [0usize; 4]);
        for perm in permutations4() {
            let score: f64 = (0..4).map(|m| w[perm[m]][m]).sum();
            if score > best.0 {
                best = (score, perm);
            }
        }
        for (m, &label) in ModeLabel::PHYSICAL.iter().enumerate() {
            debug_assert_eq!(label.column(), m);
            spec.labels[cand[best.1[m]]] = label;
        }
    }

    /// Labels the physical modes along a ray of wave numbers at angle `theta`.
    ///
    /// Labels are seeded from characteristic overlaps at a tiny wave number and
    /// continued by maximal eigenvector overlap `|v_prevᴴ v_new|` between
    /// consecutive points; near-ties fall back to the closest eigenvalue.
    pub fn track(&self, theta: f64, k_grid: &[f64]) -> Result<TrackedRay> {
        if k_grid.is_empty() {
            return Err(LbmError::InvalidArgument("empty wave-number grid".into()));
        }
        if k_grid.windows(2).any(|w| !(w[1] > w[0])) || !(k_grid[0] >= 0.0) {
            return Err(LbmError::InvalidArgument(
                "wave-number grid must be nonnegative and strictly increasing".into(),
            ));
        }
        let seed_k = (1e-3 / self.scheme.dx).min(k_grid[0].max(1e-6 / self.scheme.dx));
        let mut prev = self.spectrum(WaveVector::new(seed_k, theta)?, true)?;
        self.label_initial(&mut prev);

        let mut points = Vec::with_capacity(k_grid.len());
        let mut ambiguous = Vec::new();
        for &k in k_grid {
            let wave = WaveVector::new(k, theta)?;
            let mut cur = self.spectrum(wave, true)?;
            if k == seed_k {
                cur.labels = prev.labels.clone();
            } else if self.continue_labels(&prev, &mut cur) {
                ambiguous.push(k);
            }
            points.push(cur.clone());
            prev = cur;
        }
        let merge_k = points.iter().find(|p| self.is_merged(p)).map(|p| p.wave.k);
        Ok(TrackedRay { theta, points, merge_k, ambiguous })
    }

    /// Labeled spectrum at a single wave vector, reached by tracking along a ramp of
    /// `steps` evenly spaced wave numbers from near zero.
    pub fn track_to(&self, wave: WaveVector, steps: usize) -> Result<ModeSpectrum> {
        let n = steps.max(1);
        let grid: Vec<f64> = (1..=n).map(|i| wave.k * i as f64 / n as f64).collect();
        let mut ray = self.track(wave.theta, &grid)?;
        let mut last = ray.points.pop().expect("nonempty grid");
        last.wave = wave;
        Ok(last)
    }

    /// Copies labels from `prev` to `cur`; returns true when a tie had to be broken by value.
    fn continue_labels(&self, prev: &ModeSpectrum, cur: &mut ModeSpectrum) -> bool {
        let pv = prev.vectors.as_ref().expect("vectors");
        let cv = cur.vectors.as_ref().expect("vectors");
        let n = cur.values.len();
        let dphase = self.advection_phase(cur.wave) / self.advection_phase(prev.wave);
        let mut tie = false;
        let mut taken = vec![false; n];
        let mut assigned: Vec<(ModeLabel, usize)> = Vec::new();
        // candidate triples (overlap, label, index)
        let mut pairs = Vec::new();
        for (pi, &label) in prev.labels.iter().enumerate() {
            if label == ModeLabel::Kinetic {
                continue;
            }
            for ci in 0..n {
                let ov: C = (0..n).map(|r| pv[(r, pi)].conj() * cv[(r, ci)]).sum();
                pairs.push((ov.norm(), label, pi, ci));
            }
        }
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.3.cmp(&b.3)));
        let mut done: Vec<ModeLabel> = Vec::new();
        for &(ov, label, pi, ci) in &pairs {
            if done.contains(&label) || taken[ci] {
                continue;
            }
            // a competing free candidate with nearly the same overlap means the vectors
            // do not separate the branches; choose the nearer eigenvalue
            let expect = prev.values[pi] * dphase;
            let rival = pairs.iter().find(|&&(o2, l2, _, c2)| {
                l2 == label && c2 != ci && !taken[c2] && (ov - o2).abs() < 1e-3
            });
            let pick = match rival {
                Some(&(_, _, _, c2)) => {
                    tie = true;
                    if (cur.values[c2] - expect).norm() < (cur.values[ci] - expect).norm() {
                        c2
                    } else {
                        ci
                    }
                }
                None => ci,
            };
            taken[pick] = true;
            done.push(label);
            assigned.push((label, pick));
        }
        cur.labels = vec![ModeLabel::Kinetic; n];
        for (label, i) in assigned {
            cur.labels[i] = label;
        }
        tie
    }

    /// Shear and thermal eigenvalues forming a complex-conjugate pair in the advected frame.
    fn is_merged(&self, spec: &ModeSpectrum) -> bool {
        let phase = self.advection_phase(spec.wave).conj();
        let (Some(a), Some(b)) = (spec.value(ModeLabel::Shear), spec.value(ModeLabel::Thermal)) else {
            return false;
        };
        let (a, b) = (a * phase, b * phase);
        a.im.abs() > MERGE_TOL
            && b.im.abs() > MERGE_TOL
            && (a - b.conj()).norm() <= 1e-8 * a.norm().max(1.0)
    }

    /// Largest eigenvalue modulus over a set of wave vectors, with where it occurs.
    pub fn max_spectral_radius(&self, waves: &[WaveVector]) -> Result<(f64, WaveVector)> {
        let mut best = (0.0, WaveVector { k: 0.0, theta: 0.0 });
        for &w in waves {
            let r = self.spectrum(w, false)?.spectral_radius();
            if r > best.0 {
                best = (r, w);
            }
        }
        Ok(best)
    }
}

/// Imaginary part above which an eigenvalue counts as complex for merge detection.
pub const MERGE_TOL: f64 = 1e-10;

fn permutations4() -> Vec<[usize; 4]> {
    let mut out = Vec::with_capacity(24);
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    if a != b && a != c && a != d && b != c && b != d && c != d {
                        out.push([a, b, c, d]);
                    }
                }
            }
        }
    }
    out
}

/// Amplification matrix `A(k)` for one wave vector.
pub fn amplification_matrix(
    scheme: &SchemeDescriptor,
    params: &ParameterSet,
    w0: &ReferenceState,
    wave: WaveVector,
) -> Result<DMatrix<C>> {
    Ok(LinearModel::new(scheme, params, w0)?.matrix(wave))
}

/// Eigenvalues (and optionally eigenvectors) of an arbitrary square matrix.
pub fn spectrum(a: &DMatrix<C>, vectors: bool) -> Result<Eigen> {
    eig(a, vectors)
}

/// Labelled spectra along one ray.
#[derive(Clone, Debug)]
pub struct TrackedRay {
    pub theta: f64,
    pub points: Vec<ModeSpectrum>,
    /// First wave number where shear and thermal modes form a conjugate pair.
    pub merge_k: Option<f64>,
    /// Wave numbers where eigenvector overlap did not separate two branches.
    pub ambiguous: Vec<f64>,
}

impl TrackedRay {
    /// `(k, λ)` samples of one physical mode.
    pub fn series(&self, label: ModeLabel) -> Vec<(f64, C)> {
        self.points
            .iter()
            .filter_map(|p| p.value(label).map(|v| (p.wave.k, v)))
            .collect()
    }
}

/// Per-point effective quantities of one physical mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EffectivePoint {
    pub k: f64,
    pub value: C,
    /// `−ln|λ| / (k² Δt)`: viscosity, diffusivity or sound attenuation.
    pub damping: f64,
    /// Phase speed over `c0` in the advected frame (acoustic modes), else NaN.
    pub vsound_ratio: f64,
}

/// Effective transport curves for every physical mode of a tracked ray.
pub fn effective_coefficients(model: &LinearModel, ray: &TrackedRay) -> Vec<(ModeLabel, Vec<EffectivePoint>)> {
    let dt = model.scheme.dt;
    let c0 = model.params.c0;
    ModeLabel::PHYSICAL
        .iter()
        .map(|&label| {
            let pts = ray
                .points
                .iter()
                .filter_map(|p| {
                    let v = p.value(label)?;
                    let k = p.wave.k;
                    let damping = if k > 0.0 { -v.norm().ln() / (k * k * dt) } else { f64::NAN };
                    let vsound_ratio = if label.is_acoustic() && k > 0.0 {
                        let rel = v * model.advection_phase(p.wave).conj();
                        rel.arg().abs() / (k * dt) / c0
                    } else {
                        f64::NAN
                    };
                    Some(EffectivePoint { k, value: v, damping, vsound_ratio })
                })
                .collect();
            (label, pts)
        })
        .collect()
}

/// `k → 0` limit of samples behaving like `a + b k² + c k⁴`, from the three smallest k.
pub fn small_k_limit(samples: &[(f64, f64)]) -> Result<f64> {
    let mut s: Vec<(f64, f64)> = samples.iter().copied().filter(|p| p.0 > 0.0 && p.1.is_finite()).collect();
    s.sort_by(|a, b| a.0.total_cmp(&b.0));
    if s.len() < 3 {
        return Err(LbmError::InvalidArgument("need three positive wave numbers for the k -> 0 limit".into()));
    }
    // Lagrange extrapolation in x = k² to x = 0
    let x: Vec<f64> = s[..3].iter().map(|p| p.0 * p.0).collect();
    let y: Vec<f64> = s[..3].iter().map(|p| p.1).collect();
    let mut acc = 0.0;
    for i in 0..3 {
        let mut w = 1.0;
        for j in 0..3 {
            if i != j {
                w *= x[j] / (x[j] - x[i]);
            }
        }
        acc += w * y[i];
    }
    Ok(acc)
}

/// Least-squares fit `ln λ(k) / Δt ≈ Σ_{n=1..order} a_n kⁿ` of one mode.
#[derive(Clone, Debug)]
pub struct DispersionFit {
    pub label: ModeLabel,
    /// `a_1 .. a_order`, complex.
    pub coefficients: Vec<C>,
    /// Standard error of each coefficient (real and imaginary parts combined).
    pub std_errors: Vec<f64>,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
}

/// Fit window and polynomial order for [`fit_dispersion`].
///
/// With `parity` set, the real part of `ln λ` is fitted with even powers only and the
/// imaginary part with odd powers only. This is exact for a background at rest, where
/// `λ(-k) = conj λ(k)`, and removes half the unknowns.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitWindow {
    pub k_min: f64,
    pub k_max: f64,
    pub order: usize,
    pub parity: bool,
}

impl Default for FitWindow {
    fn default() -> Self {
        FitWindow { k_min: 0.01, k_max: 0.2, order: 4, parity: false }
    }
}

/// Least squares on the columns `powers` of the scaled monomial basis.
/// Returns `(coefficients, variances, residual sum of squares)` in scaled units.
fn least_squares(t: &[f64], y: &[f64], powers: &[usize]) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let (n, p) = (t.len(), powers.len());
    if p == 0 {
        return Ok((Vec::new(), Vec::new(), y.iter().map(|v| v * v).sum()));
    }
    let x = DMatrix::from_fn(n, p, |i, j| t[i].powi(powers[j] as i32));
    let svd = x.clone().svd(true, true);
    let (smax, smin) = (svd.singular_values.max(), svd.singular_values.min());
    if !(smin > 0.0) || smax / smin > 1e8 {
        return Err(LbmError::InvalidArgument(format!(
            "ill-conditioned dispersion fit (condition {:.3e}); narrow the order or widen the window",
            smax / smin
        )));
    }
    let yv = nalgebra::DVector::from_column_slice(y);
    let b = svd.solve(&yv, 1e-300).map_err(|e| LbmError::InvalidArgument(e.to_string()))?;
    let rss = (&yv - &x * &b).norm_squared();
    let xtx_inv = (x.transpose() * &x).try_inverse().unwrap_or_else(|| DMatrix::zeros(p, p));
    let dof = n.saturating_sub(p).max(1) as f64;
    let var = (0..p).map(|j| rss / dof * xtx_inv[(j, j)].abs()).collect();
    Ok((b.iter().copied().collect(), var, rss))
}

/// Fits every physical mode of `ray` over the window.
pub fn fit_dispersion(model: &LinearModel, ray: &TrackedRay, window: FitWindow) -> Result<Vec<DispersionFit>> {
    let dt = model.scheme.dt;
    let dx = model.scheme.dx;
    let p = window.order;
    let all: Vec<usize> = (1..=p).collect();
    let (re_pow, im_pow): (Vec<usize>, Vec<usize>) = if window.parity {
        (all.iter().copied().filter(|n| n % 2 == 0).collect(), all.iter().copied().filter(|n| n % 2 == 1).collect())
    } else {
        (all.clone(), all.clone())
    };
    let mut fits = Vec::new();
    for label in ModeLabel::PHYSICAL {
        let pts: Vec<(f64, C)> = ray
            .series(label)
            .into_iter()
            .filter(|&(k, _)| k * dx >= window.k_min - 1e-15 && k * dx <= window.k_max + 1e-15)
            .collect();
        let n = pts.len();
        if n < 8 || n <= p {
            return Err(LbmError::InvalidArgument(format!(
                "dispersion fit needs at least 8 points (and more than the order) in the window, got {n}"
            )));
        }
        let kmax = pts.iter().map(|x| x.0).fold(0.0, f64::max);
        let t: Vec<f64> = pts.iter().map(|x| x.0 / kmax).collect();
        // continuous branch of ln λ along the ray
        let mut logs = Vec::with_capacity(n);
        let mut last_arg = 0.0;
        for (i, &(_, v)) in pts.iter().enumerate() {
            let mut a = v.arg();
            if i > 0 {
                while a - last_arg > std::f64::consts::PI {
                    a -= 2.0 * std::f64::consts::PI;
                }
                while a - last_arg < -std::f64::consts::PI {
                    a += 2.0 * std::f64::consts::PI;
                }
            }
            last_arg = a;
            logs.push(C::new(v.norm().ln(), a) / dt);
        }
        let yr: Vec<f64> = logs.iter().map(|z| z.re).collect();
        let yi: Vec<f64> = logs.iter().map(|z| z.im).collect();
        let (br, vr, rr) = least_squares(&t, &yr, &re_pow)?;
        let (bi, vi, ri) = least_squares(&t, &yi, &im_pow)?;
        let mut coefficients = vec![C::new(0.0, 0.0); p];
        let mut var = vec![0.0; p];
        for (j, &pw) in re_pow.iter().enumerate() {
            coefficients[pw - 1].re = br[j] / kmax.powi(pw as i32);
            var[pw - 1] += vr[j] / kmax.powi(2 * pw as i32);
        }
        for (j, &pw) in im_pow.iter().enumerate() {
            coefficients[pw - 1].im = bi[j] / kmax.powi(pw as i32);
            var[pw - 1] += vi[j] / kmax.powi(2 * pw as i32);
        }
        fits.push(DispersionFit {
            label,
            coefficients,
            std_errors: var.iter().map(|v| v.sqrt()).collect(),
            residual: ((rr + ri) / n as f64).sqrt(),
        });
    }
    Ok(fits)
}

/// Largest difference of coefficient `power` (1-based) of `label` across rays.
pub fn coefficient_spread(fits: &[Vec<DispersionFit>], label: ModeLabel, power: usize) -> f64 {
    let vals: Vec<C> = fits
        .iter()
        .filter_map(|f| f.iter().find(|d| d.label == label).map(|d| d.coefficients[power - 1]))
        .collect();
    let mut worst = 0.0f64;
    for a in &vals {
        for b in &vals {
            worst = worst.max((a - b).norm());
        }
    }
    worst
}

/// Evenly spaced grid `k_min, …, k_max` with `n` points.
pub fn linspace(k_min: f64, k_max: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![k_min],
        _ => (0..n).map(|i| k_min + (k_max - k_min) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{derive_parameters, FreeParameters};
    use crate::params::RateGroup;
    use crate::scheme::SchemeName;

    fn d2q9_model(u0: f64) -> LinearModel {
        let fp = FreeParameters::new(SchemeName::D2Q9, 0.05, -1.0, 0.1)
            .with_rate(RateGroup::E2, 1.1765);
        let p = derive_parameters(&fp).unwrap();
        let s = SchemeDescriptor::unit(SchemeName::D2Q9);
        let w0 = ReferenceState::from_sound_speed(1.0, u0, 0.0, p.c0).unwrap();
        LinearModel::new(&s, &p, &w0).unwrap()
    }

    #[test]
    fn zero_wave_spectrum_is_one_and_one_minus_s() {
        let m = d2q9_model(0.0);
        let spec = m.spectrum(WaveVector::new(0.0, 0.0).unwrap(), false).unwrap();
        let mut expect: Vec<f64> = vec![1.0; 4];
        expect.extend(m.params().s[4..].iter().map(|s| 1.0 - s));
        let mut got: Vec<C> = spec.values.clone();
        for e in expect {
            let (i, d) = got
                .iter()
                .enumerate()
                .map(|(i, v)| (i, (v - C::from(e)).norm()))
                .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
            assert!(d < 1e-10, "{e}: {d}");
            got.remove(i);
        }
    }

    #[test]
    fn pure_streaming_is_unitary() {
        let m0 = d2q9_model(0.0);
        let p = m0.params().with_zero_rates();
        let m = LinearModel::new(m0.scheme(), &p, m0.reference()).unwrap();
        for (k, th) in [(0.3, 0.2), (1.7, 1.1), (3.0, -0.4)] {
            let spec = m.spectrum(WaveVector::new(k, th).unwrap(), false).unwrap();
            assert!(spec.values.iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn spectrum_at_minus_k_is_conjugate_at_rest() {
        let m = d2q9_model(0.0);
        let a = m.spectrum(WaveVector::from_components(0.4, 0.25), false).unwrap();
        let b = m.spectrum(WaveVector::from_components(-0.4, -0.25), false).unwrap();
        let mut rest: Vec<C> = b.values.clone();
        for v in a.values {
            let (i, d) = rest
                .iter()
                .enumerate()
                .map(|(i, w)| (i, (v.conj() - w).norm()))
                .fold((0, f64::INFINITY), |x, y| if y.1 < x.1 { y } else { x });
            assert!(d < 1e-10);
            rest.remove(i);
        }
    }

    #[test]
    fn characteristic_basis_examples() {
        let w0 = ReferenceState::from_sound_speed(1.0, 0.0, 0.0, 0.8).unwrap();
        let wave = WaveVector::new(0.5, 0.3).unwrap();
        let r = characteristic_basis(&w0, 0.8, wave);
        // shear column is proportional to (0, −i ky, i kx, 0)
        let (kx, ky) = (wave.kx(), wave.ky());
        let scale = r[(2, 0)] / C::new(0.0, kx);
        assert!((r[(1, 0)] - scale * C::new(0.0, -ky)).norm() < 1e-15);
        assert!(r[(0, 0)].norm() == 0.0 && r[(3, 0)].norm() == 0.0);
        // acoustic energy entries are c0² i|k| up to the common column scale
        for col in [2, 3] {
            let ratio = r[(3, col)] / r[(0, col)];
            assert!((ratio - C::from(0.64)).norm() < 1e-14);
        }
        let det = r.determinant();
        assert!(det.norm() > 1e-6);
    }

    #[test]
    fn characteristic_basis_has_full_rank_for_random_states() {
        let mut seed = 7u64;
        let mut rnd = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..50 {
            let w0 = ReferenceState::from_sound_speed(1.0, rnd() - 0.5, rnd() - 0.5, 0.9).unwrap();
            let wave = WaveVector::new(0.01 + rnd(), 6.0 * rnd()).unwrap();
            assert!(characteristic_basis(&w0, 0.9, wave).determinant().norm() > 1e-8);
        }
    }

    #[test]
    fn tracked_labels_follow_small_k_predictions() {
        let m = d2q9_model(0.0);
        let ray = m.track(0.4, &linspace(0.005, 0.1, 20)).unwrap();
        let t = m.transport().unwrap();
        let p = &ray.points[0];
        let k = p.wave.k;
        let shear = p.value(ModeLabel::Shear).unwrap();
        let thermal = p.value(ModeLabel::Thermal).unwrap();
        assert!((-shear.norm().ln() / (k * k) - t.nu).abs() / t.nu < 1e-2);
        assert!((-thermal.norm().ln() / (k * k) - t.kappa).abs() / t.kappa < 1e-2);
        let ap = p.value(ModeLabel::AcousticPlus).unwrap();
        assert!((ap.arg() + m.params().c0 * k).abs() < 1e-3 * k);
        assert!(ray.merge_k.is_none());
    }

    #[test]
    fn advected_labels_include_phase() {
        let m = d2q9_model(0.1);
        let ray = m.track(0.0, &linspace(0.01, 0.05, 5)).unwrap();
        let p = &ray.points[0];
        let shear = p.value(ModeLabel::Shear).unwrap();
        assert!((shear.arg() + 0.1 * p.wave.k).abs() < 1e-5);
    }

    #[test]
    fn effective_viscosity_vanishes_without_relaxation() {
        let m0 = d2q9_model(0.0);
        let p = m0.params().with_zero_rates();
        let m = LinearModel::new(m0.scheme(), &p, m0.reference()).unwrap();
        let ray = m.track(0.3, &linspace(0.05, 0.5, 6)).unwrap();
        for (_, pts) in effective_coefficients(&m, &ray) {
            for e in pts {
                assert!(e.damping.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn small_k_limit_is_exact_for_even_quartics() {
        let f = |k: f64| 0.3 - 2.0 * k * k + 5.0 * k.powi(4);
        let s: Vec<(f64, f64)> = [0.05, 0.1, 0.15, 0.3].iter().map(|&k| (k, f(k))).collect();
        assert!((small_k_limit(&s).unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn dispersion_fit_recovers_viscosity() {
        let m = d2q9_model(0.0);
        let ray = m.track(0.0, &linspace(0.01, 0.2, 20)).unwrap();
        let fits = fit_dispersion(&m, &ray, FitWindow { order: 6, ..Default::default() }).unwrap();
        let t = m.transport().unwrap();
        let shear = fits.iter().find(|f| f.label == ModeLabel::Shear).unwrap();
        assert!((shear.coefficients[1].re + t.nu).abs() / t.nu < 1e-3);
        let ac = fits.iter().find(|f| f.label == ModeLabel::AcousticPlus).unwrap();
        assert!((ac.coefficients[0].im + m.params().c0).abs() < 1e-6);
    }

    #[test]
    fn bad_grids_are_rejected() {
        let m = d2q9_model(0.0);
        assert!(m.track(0.0, &[]).is_err());
        assert!(m.track(0.0, &[0.2, 0.1]).is_err());
        assert!(WaveVector::new(-1.0, 0.0).is_err());
    }
}
