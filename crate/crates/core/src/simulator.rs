//! Time-domain evolution on periodic grids, with an optional disc of fluid
//! bounded by an isothermal anti-bounce-back wall.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::equilibrium::{equilibrium_jacobian, Collider};
use crate::error::{LbmError, Result};
use crate::linear::{characteristic_directions, LinearModel, ModeLabel, WaveVector};
use crate::params::{ConservedState, ParameterSet, ReferenceState};
use crate::scheme::SchemeDescriptor;

/// Ramp length used to continue mode labels out to a wave vector.
const TRACK_STEPS: usize = 64;

type C = Complex64;

/// Domain shape.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Topology {
    Periodic,
    /// Fluid inside the disc, solid outside; positions in site units.
    Disc { cx: f64, cy: f64, radius: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub topology: Topology,
}

impl Grid {
    pub fn periodic(nx: usize, ny: usize) -> Result<Self> {
        let g = Grid { nx, ny, dx: 1.0, topology: Topology::Periodic };
        g.check()?;
        Ok(g)
    }

    pub fn disc(nx: usize, ny: usize, cx: f64, cy: f64, radius: f64) -> Result<Self> {
        let g = Grid { nx, ny, dx: 1.0, topology: Topology::Disc { cx, cy, radius } };
        g.check()?;
        Ok(g)
    }

    pub fn check(&self) -> Result<()> {
        if self.nx < 4 || self.ny < 4 {
            return Err(LbmError::InvalidArgument(format!(
                "grid must be at least 4x4, got {}x{}",
                self.nx, self.ny
            )));
        }
        if !(self.dx > 0.0) {
            return Err(LbmError::InvalidArgument(format!("dx must be positive, got {}", self.dx)));
        }
        if let Topology::Disc { cx, cy, radius } = self.topology {
            // two solid layers keep speed-2 links from wrapping into fluid
            let margin = 2.0;
            if !(radius > 1.0
                && cx - radius >= margin
                && cy - radius >= margin
                && cx + radius <= self.nx as f64 - 1.0 - margin
                && cy + radius <= self.ny as f64 - 1.0 - margin)
            {
                return Err(LbmError::InvalidArgument(format!(
                    "disc (center ({cx}, {cy}), radius {radius}) must lie inside the {}x{} box with two sites to spare",
                    self.nx, self.ny
                )));
            }
        }
        Ok(())
    }

    pub fn sites(&self) -> usize {
        self.nx * self.ny
    }

    /// Whether site `(x, y)` holds fluid.
    pub fn is_fluid(&self, x: usize, y: usize) -> bool {
        match self.topology {
            Topology::Periodic => true,
            Topology::Disc { cx, cy, radius } => {
                let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                dx * dx + dy * dy <= radius * radius
            }
        }
    }
}

/// Populations of every site, `f[(y * nx + x) * q + j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldState {
    pub f: Vec<f64>,
    pub time: usize,
    pub nx: usize,
    pub ny: usize,
    pub q: usize,
}

impl FieldState {
    pub fn site(&self, x: usize, y: usize) -> &[f64] {
        let i = (y * self.nx + x) * self.q;
        &self.f[i..i + self.q]
    }
}

/// Plane wave with an integer number of periods across the box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WaveInit {
    pub nx_periods: i32,
    pub ny_periods: i32,
    pub mode: ModeLabel,
    /// Amplitude relative to the background density.
    pub amplitude: f64,
    pub background: ReferenceState,
}

impl WaveInit {
    pub fn wave_vector(&self, grid: &Grid) -> WaveVector {
        let two_pi = 2.0 * std::f64::consts::PI;
        WaveVector::from_components(
            two_pi * self.nx_periods as f64 / (grid.nx as f64 * grid.dx),
            two_pi * self.ny_periods as f64 / (grid.ny as f64 * grid.dx),
        )
    }
}

/// Global sums of `(ρ, jx, jy, ε)`.
pub type Totals = [f64; 4];

/// Stepper bound to one scheme, parameter set and grid.
#[derive(Clone, Debug)]
pub struct Simulator {
    scheme: SchemeDescriptor,
    params: ParameterSet,
    grid: Grid,
    collider: Collider,
    fluid: Vec<bool>,
    /// Wall energy per unit mass for the anti-bounce-back rule.
    wall_energy: f64,
    parallel: bool,
}

impl Simulator {
    pub fn new(scheme: &SchemeDescriptor, params: &ParameterSet, grid: &Grid) -> Result<Self> {
        grid.check()?;
        if params.s.len() != scheme.q {
            return Err(LbmError::InvalidArgument("rate count does not match the scheme".into()));
        }
        if (grid.dx - scheme.dx).abs() > 1e-15 * scheme.dx {
            return Err(LbmError::InvalidArgument(format!(
                "grid spacing {} differs from scheme spacing {}",
                grid.dx, scheme.dx
            )));
        }
        let fluid = (0..grid.ny)
            .flat_map(|y| (0..grid.nx).map(move |x| (x, y)))
            .map(|(x, y)| grid.is_fluid(x, y))
            .collect();
        Ok(Simulator {
            scheme: scheme.clone(),
            params: params.clone(),
            grid: *grid,
            collider: Collider::new(scheme, params),
            fluid,
            wall_energy: 0.5 * params.c0 * params.c0,
            parallel: true,
        })
    }

    /// Chooses between the rayon kernels and plain loops; results are identical.
    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    /// Specific internal energy imposed at the wall.
    pub fn with_wall_energy(mut self, e: f64) -> Self {
        self.wall_energy = e;
        self
    }

    pub fn scheme(&self) -> &SchemeDescriptor {
        &self.scheme
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn empty_state(&self) -> FieldState {
        FieldState {
            f: vec![0.0; self.grid.sites() * self.scheme.q],
            time: 0,
            nx: self.grid.nx,
            ny: self.grid.ny,
            q: self.scheme.q,
        }
    }

    /// Equilibrium field of a conserved-variable function of the site position.
    pub fn init_from<F>(&self, mut w: F) -> Result<FieldState>
    where
        F: FnMut(usize, usize) -> ConservedState,
    {
        let mut st = self.empty_state();
        let q = self.scheme.q;
        let mut meq = vec![0.0; q];
        for y in 0..self.grid.ny {
            for x in 0..self.grid.nx {
                let i = y * self.grid.nx + x;
                let state = w(x, y);
                self.collider
                    .equilibrium()
                    .eval(state.to_numeric(&self.scheme), &mut meq)
                    .map_err(|e| at_site(e, x, y, 0))?;
                self.collider.populations(&meq, &mut st.f[i * q..(i + 1) * q]);
            }
        }
        Ok(st)
    }

    /// Uniform equilibrium of a reference state.
    pub fn init_uniform(&self, w0: &ReferenceState) -> Result<FieldState> {
        let c = w0.conserved();
        self.init_from(|_, _| c)
    }

    /// Plane wave along one characteristic direction, lifted through the equilibrium Jacobian.
    pub fn init_plane_wave(&self, w: &WaveInit) -> Result<FieldState> {
        let wave = w.wave_vector(&self.grid);
        if wave.k == 0.0 && w.amplitude != 0.0 {
            return Err(LbmError::InvalidArgument("plane wave needs a nonzero wave vector".into()));
        }
        if w.mode == ModeLabel::Kinetic {
            return Err(LbmError::InvalidArgument("kinetic modes cannot be initialized".into()));
        }
        let r0 = characteristic_directions(&w.background, self.params.c0, wave.direction());
        let col = mode_column(w.mode);
        let shape: Vec<f64> = (0..4).map(|i| r0[(i, col)]).collect();
        let jac = equilibrium_jacobian(&self.scheme, &self.params, &w.background)?;
        let base = w.background.conserved().to_numeric(&self.scheme);
        let mut meq0 = vec![0.0; self.scheme.q];
        self.collider.equilibrium().eval(base, &mut meq0)?;
        let (b, _) = self.scheme.name.energy_coefficients();
        let q = self.scheme.q;
        let amp = w.amplitude * w.background.rho0;
        let mut st = self.empty_state();
        let mut m = vec![0.0; q];
        for y in 0..self.grid.ny {
            for x in 0..self.grid.nx {
                let phase = wave.kx() * x as f64 * self.grid.dx + wave.ky() * y as f64 * self.grid.dx;
                let c = amp * phase.cos();
                // (ρ, jx, jy, ε) → (ρ, jx, jy, E): δE = b δε − a λ² δρ
                let l2 = self.scheme.lambda * self.scheme.lambda;
                let (_, a) = self.scheme.name.energy_coefficients();
                let dw = [
                    c * shape[0],
                    c * shape[1],
                    c * shape[2],
                    b * c * shape[3] - a * l2 * c * shape[0],
                ];
                for k in 0..q {
                    m[k] = meq0[k] + (0..4).map(|j| jac[(k, j)] * dw[j]).sum::<f64>();
                }
                let i = (y * self.grid.nx + x) * q;
                self.collider.populations(&m, &mut st.f[i..i + q]);
            }
        }
        Ok(st)
    }

    /// Real part of `amplitude · ρ0 · v e^{i k·x}` added to the uniform equilibrium, where `v`
    /// is the eigenvector of the amplification matrix for `mode`; the conserved part of `v`
    /// is scaled to unit projection on the mode's characteristic direction.
    pub fn init_eigenmode(&self, w: &WaveInit) -> Result<FieldState> {
        let wave = w.wave_vector(&self.grid);
        let model = LinearModel::new(&self.scheme, &self.params, &w.background)?;
        let spec = &model.track_to(wave, TRACK_STEPS)?;
        let idx = spec
            .labels
            .iter()
            .position(|&l| l == w.mode)
            .ok_or_else(|| LbmError::InvalidArgument(format!("mode {} not found", w.mode)))?;
        let vecs = spec.vectors.as_ref().expect("tracked spectra carry vectors");
        let v: Vec<C> = vecs.column(idx).iter().copied().collect();
        // normalize so that the measured projection equals the requested amplitude
        let cons = conserved_numeric_to_physical(&self.scheme, &moments_c(&self.scheme, &v));
        let proj = project(&characteristic_directions(&w.background, self.params.c0, wave.direction()), &cons)
            [mode_column(w.mode)];
        let scale = C::from(w.amplitude * w.background.rho0) / proj;
        let base = self.init_uniform(&w.background)?;
        let mut st = base;
        let q = self.scheme.q;
        for y in 0..self.grid.ny {
            for x in 0..self.grid.nx {
                let phase = wave.kx() * x as f64 * self.grid.dx + wave.ky() * y as f64 * self.grid.dx;
                let e = C::from_polar(1.0, phase) * scale;
                let i = (y * self.grid.nx + x) * q;
                for (fj, vj) in st.f[i..i + q].iter_mut().zip(&v) {
                    *fj += (e * vj).re;
                }
            }
        }
        Ok(st)
    }

    /// One collide-and-stream step.
    pub fn step(&self, state: &mut FieldState, scratch: &mut Vec<f64>) -> Result<()> {
        self.collide_all(state)?;
        scratch.resize(state.f.len(), 0.0);
        self.stream(&state.f, scratch)?;
        std::mem::swap(&mut state.f, scratch);
        state.time += 1;
        Ok(())
    }

    /// Runs `n` steps.
    pub fn run(&self, state: &mut FieldState, n: usize) -> Result<()> {
        let mut scratch = vec![0.0; state.f.len()];
        for _ in 0..n {
            self.step(state, &mut scratch)?;
        }
        Ok(())
    }

    fn collide_all(&self, state: &mut FieldState) -> Result<()> {
        let q = self.scheme.q;
        let nx = self.grid.nx;
        let row_len = nx * q;
        let time = state.time;
        let fluid = &self.fluid;
        let collider = &self.collider;
        let work = |(y, row): (usize, &mut [f64])| -> Result<()> {
            let mut m = vec![0.0; q];
            let mut meq = vec![0.0; q];
            for x in 0..nx {
                if !fluid[y * nx + x] {
                    continue;
                }
                let f = &mut row[x * q..(x + 1) * q];
                collider
                    .collide_in_place(f, &mut m, &mut meq)
                    .map_err(|e| at_site(e, x, y, time))?;
                if f.iter().any(|v| !v.is_finite()) {
                    return Err(LbmError::Instability {
                        step: time,
                        detail: format!("non-finite populations at site ({x}, {y})"),
                    });
                }
            }
            Ok(())
        };
        if self.parallel {
            state.f.par_chunks_mut(row_len).enumerate().try_for_each(work)
        } else {
            state.f.chunks_mut(row_len).enumerate().try_for_each(work)
        }
    }

    /// Pull streaming with periodic wraparound and, on disc grids, anti-bounce-back.
    fn stream(&self, src: &[f64], dst: &mut [f64]) -> Result<()> {
        let q = self.scheme.q;
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let xi = &self.scheme.xi;
        let opp = &self.scheme.opposite;
        let fluid = &self.fluid;
        let disc = !matches!(self.grid.topology, Topology::Periodic);
        let eq = self.collider.equilibrium();
        let collider = &self.collider;
        let wall_e = self.wall_energy;
        let scheme = &self.scheme;
        let work = |(y, row): (usize, &mut [f64])| -> Result<()> {
            let mut wall_f = vec![0.0; q];
            let mut meq = vec![0.0; q];
            for x in 0..nx {
                let here = y * nx + x;
                let out = &mut row[x * q..(x + 1) * q];
                if disc && !fluid[here] {
                    out.copy_from_slice(&src[here * q..(here + 1) * q]);
                    continue;
                }
                let mut wall_ready = false;
                for j in 0..q {
                    let sx = (x as i64 - xi[j][0] as i64).rem_euclid(nx as i64) as usize;
                    let sy = (y as i64 - xi[j][1] as i64).rem_euclid(ny as i64) as usize;
                    let from = sy * nx + sx;
                    if disc && !fluid[from] {
                        // the population leaving along ξ_{j̄} hits the wall and comes back along ξ_j
                        if !wall_ready {
                            let rho: f64 = (0..q)
                                .map(|l| src[here * q + l])
                                .sum();
                            let w = ConservedState { rho, jx: 0.0, jy: 0.0, eps: rho * wall_e };
                            eq.eval(w.to_numeric(scheme), &mut meq)
                                .map_err(|e| at_site(e, x, y, 0))?;
                            collider.populations(&meq, &mut wall_f);
                            wall_ready = true;
                        }
                        out[j] = -src[here * q + opp[j]] + 2.0 * wall_f[j];
                    } else {
                        out[j] = src[from * q + j];
                    }
                }
            }
            Ok(())
        };
        if self.parallel {
            dst.par_chunks_mut(nx * q).enumerate().try_for_each(work)
        } else {
            dst.chunks_mut(nx * q).enumerate().try_for_each(work)
        }
    }

    /// Conserved variables `(ρ, jx, jy, ε)` at one site.
    pub fn conserved_at(&self, state: &FieldState, x: usize, y: usize) -> ConservedState {
        let f = state.site(x, y);
        let q = self.scheme.q;
        let mut w = [0.0; 4];
        for (r, wr) in w.iter_mut().enumerate() {
            *wr = (0..q).map(|j| self.scheme.m[(r, j)] * f[j]).sum();
        }
        ConservedState::from_numeric(&self.scheme, w)
    }

    /// Sums of `(ρ, jx, jy, ε)` over fluid sites.
    pub fn totals(&self, state: &FieldState) -> Totals {
        let mut t = [0.0; 4];
        for y in 0..self.grid.ny {
            for x in 0..self.grid.nx {
                if !self.fluid[y * self.grid.nx + x] {
                    continue;
                }
                let c = self.conserved_at(state, x, y);
                t[0] += c.rho;
                t[1] += c.jx;
                t[2] += c.jy;
                t[3] += c.eps;
            }
        }
        t
    }

    /// Fourier projection of the conserved fields on `e^{i k·x}`, decomposed on the
    /// characteristic directions; returns the coefficient of `mode` relative to `ρ0`.
    ///
    /// Each mode is picked out by the corresponding row of the inverse basis, which is
    /// the left vector orthogonal to the other three directions.
    pub fn measure_amplitude(&self, state: &FieldState, wave: WaveVector, mode: ModeLabel, w0: &ReferenceState) -> C {
        let mut acc = [C::new(0.0, 0.0); 4];
        let n = (self.grid.nx * self.grid.ny) as f64;
        for y in 0..self.grid.ny {
            for x in 0..self.grid.nx {
                let c = self.conserved_at(state, x, y);
                let phase = wave.kx() * x as f64 * self.grid.dx + wave.ky() * y as f64 * self.grid.dx;
                let e = C::from_polar(1.0, -phase);
                acc[0] += e * c.rho;
                acc[1] += e * c.jx;
                acc[2] += e * c.jy;
                acc[3] += e * c.eps;
            }
        }
        let acc = acc.map(|z| z / n);
        let r0 = characteristic_directions(w0, self.params.c0, wave.direction());
        project(&r0, &acc)[mode_column(mode)] * 2.0 / w0.rho0
    }
}

fn at_site(e: LbmError, x: usize, y: usize, step: usize) -> LbmError {
    match e {
        LbmError::NonPositiveDensity { rho } => LbmError::Instability {
            step,
            detail: format!("nonpositive density {rho} at site ({x}, {y})"),
        },
        other => other,
    }
}

fn mode_column(mode: ModeLabel) -> usize {
    match mode {
        ModeLabel::Shear => 0,
        ModeLabel::Thermal => 1,
        ModeLabel::AcousticMinus => 2,
        ModeLabel::AcousticPlus | ModeLabel::Kinetic => 3,
    }
}

fn moments_c(scheme: &SchemeDescriptor, v: &[C]) -> [C; 4] {
    let mut w = [C::new(0.0, 0.0); 4];
    for (r, wr) in w.iter_mut().enumerate() {
        *wr = (0..scheme.q).map(|j| v[j] * scheme.m[(r, j)]).sum();
    }
    w
}

fn conserved_numeric_to_physical(scheme: &SchemeDescriptor, w: &[C; 4]) -> [C; 4] {
    let (b, a) = scheme.name.energy_coefficients();
    let l2 = scheme.lambda * scheme.lambda;
    [w[0], w[1], w[2], (w[3] + w[0] * (a * l2)) / b]
}

fn project(r0: &DMatrix<f64>, w: &[C; 4]) -> [C; 4] {
    let r: DMatrix<C> = r0.map(C::from);
    let rhs = nalgebra::DVector::from_column_slice(w);
    let c = r.lu().solve(&rhs).expect("characteristic basis is regular for c0 > 0");
    [c[0], c[1], c[2], c[3]]
}

/// One sample of a relaxation run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelaxSample {
    pub step: usize,
    pub t: f64,
    pub amplitude: C,
    pub totals: Totals,
}

/// How the initial wave is built.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum InitKind {
    /// Characteristic direction lifted by the equilibrium Jacobian.
    #[default]
    Characteristic,
    /// Exact eigenvector of the amplification matrix.
    Eigenmode,
}

/// Evolves a plane wave and samples its modal amplitude.
///
/// Aborts with an instability error when the amplitude grows by more than 10⁶.
pub fn run_relaxation(
    sim: &Simulator,
    w: &WaveInit,
    init: InitKind,
    n_steps: usize,
    sample_every: usize,
) -> Result<Vec<RelaxSample>> {
    let every = sample_every.max(1);
    let mut st = match init {
        InitKind::Characteristic => sim.init_plane_wave(w)?,
        InitKind::Eigenmode => sim.init_eigenmode(w)?,
    };
    let wave = w.wave_vector(sim.grid());
    let dt = sim.scheme().dt;
    let mut out = Vec::with_capacity(n_steps / every + 2);
    let a0 = sim.measure_amplitude(&st, wave, w.mode, &w.background);
    out.push(RelaxSample { step: 0, t: 0.0, amplitude: a0, totals: sim.totals(&st) });
    let limit = 1e6 * a0.norm().max(1e-300);
    let mut scratch = vec![0.0; st.f.len()];
    for n in 1..=n_steps {
        sim.step(&mut st, &mut scratch)?;
        if n % every == 0 || n == n_steps {
            let a = sim.measure_amplitude(&st, wave, w.mode, &w.background);
            if !(a.norm() <= limit) {
                return Err(LbmError::Instability {
                    step: n,
                    detail: format!("modal amplitude grew to {:.3e} from {:.3e}", a.norm(), a0.norm()),
                });
            }
            out.push(RelaxSample { step: n, t: n as f64 * dt, amplitude: a, totals: sim.totals(&st) });
        }
    }
    Ok(out)
}

/// Gaussian isentropic pressure pulse used as the disc source.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulseSource {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    /// Peak density perturbation relative to `ρ0`.
    pub amplitude: f64,
}

/// Field snapshot at one time: `(x, y, ρ, jx, jy, ε)` per fluid site.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub rows: Vec<[f64; 6]>,
}

/// Output of [`run_disc_acoustics`].
#[derive(Clone, Debug, PartialEq)]
pub struct DiscRun {
    pub snapshots: Vec<Snapshot>,
    /// Fluid mass at every step, including step 0.
    pub mass: Vec<f64>,
    /// `ρ − ρ0` at the source point at every step.
    pub center_signal: Vec<f64>,
}

/// Emits a density pulse inside the disc and records snapshots every `snapshot_every` steps.
pub fn run_disc_acoustics(
    sim: &Simulator,
    w0: &ReferenceState,
    source: &PulseSource,
    n_steps: usize,
    snapshot_every: usize,
) -> Result<DiscRun> {
    if matches!(sim.grid().topology, Topology::Periodic) {
        return Err(LbmError::InvalidArgument("disc acoustics needs a disc grid".into()));
    }
    let e0 = w0.e0;
    let mut st = sim.init_from(|x, y| {
        let (dx, dy) = (x as f64 - source.x, y as f64 - source.y);
        let g = (-(dx * dx + dy * dy) / (2.0 * source.width * source.width)).exp();
        let rho = w0.rho0 * (1.0 + source.amplitude * g);
        // isentropic for p = ρe (γ = 2): e ∝ ρ, so no entropy spot is left at the source
        let e = e0 * rho / w0.rho0;
        ConservedState { rho, jx: rho * w0.u0, jy: rho * w0.v0, eps: rho * (e + w0.k0()) }
    })?;
    let every = snapshot_every.max(1);
    let (sx, sy) = (source.x.round() as usize, source.y.round() as usize);
    let snap = |st: &FieldState| -> Snapshot {
        let mut rows = Vec::new();
        for y in 0..sim.grid().ny {
            for x in 0..sim.grid().nx {
                if sim.grid().is_fluid(x, y) {
                    let c = sim.conserved_at(st, x, y);
                    rows.push([x as f64, y as f64, c.rho, c.jx, c.jy, c.eps]);
                }
            }
        }
        Snapshot { step: st.time, rows }
    };
    let mut run = DiscRun {
        snapshots: vec![snap(&st)],
        mass: vec![sim.totals(&st)[0]],
        center_signal: vec![sim.conserved_at(&st, sx, sy).rho - w0.rho0],
    };
    let mut scratch = vec![0.0; st.f.len()];
    for n in 1..=n_steps {
        sim.step(&mut st, &mut scratch)?;
        run.mass.push(sim.totals(&st)[0]);
        run.center_signal.push(sim.conserved_at(&st, sx, sy).rho - w0.rho0);
        if n % every == 0 {
            run.snapshots.push(snap(&st));
        }
    }
    Ok(run)
}

/// Radius of the outermost local maximum of `|ρ − ρ0|` around `(cx, cy)`, from radial
/// bins of one site. Maxima below a tenth of the largest bin are ignored, so the slowly
/// diffusing remnant at the source does not hide the acoustic front.
pub fn front_radius(snapshot: &Snapshot, cx: f64, cy: f64, rho0: f64) -> f64 {
    let mut bins: Vec<(f64, usize)> = Vec::new();
    for r in &snapshot.rows {
        let d = (r[0] - cx).hypot(r[1] - cy);
        let b = d.round() as usize;
        if bins.len() <= b {
            bins.resize(b + 1, (0.0, 0));
        }
        bins[b].0 += (r[2] - rho0).abs();
        bins[b].1 += 1;
    }
    let prof: Vec<f64> = bins.iter().map(|&(s, n)| if n > 0 { s / n as f64 } else { 0.0 }).collect();
    let peak = prof.iter().copied().fold(0.0, f64::max);
    let at = |i: isize| if i < 0 || i as usize >= prof.len() { 0.0 } else { prof[i as usize] };
    let imax = (0..prof.len())
        .rev()
        .find(|&i| prof[i] >= 0.1 * peak && prof[i] >= at(i as isize - 1) && prof[i] >= at(i as isize + 1))
        .unwrap_or(0);
    // sub-bin peak by a parabola through the neighbours
    if imax == 0 || imax + 1 >= prof.len() {
        return imax as f64;
    }
    let (a, b, c) = (prof[imax - 1], prof[imax], prof[imax + 1]);
    let den = a - 2.0 * b + c;
    if den.abs() < f64::MIN_POSITIVE {
        imax as f64
    } else {
        imax as f64 + 0.5 * (a - c) / den
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{derive_parameters, FreeParameters};
    use crate::params::RateGroup;
    use crate::scheme::SchemeName;

    fn d2q9() -> (SchemeDescriptor, ParameterSet) {
        let fp = FreeParameters::new(SchemeName::D2Q9, 0.05, -1.0, 0.1).with_rate(RateGroup::E2, 1.1765);
        (SchemeDescriptor::unit(SchemeName::D2Q9), derive_parameters(&fp).unwrap())
    }

    fn rest(p: &ParameterSet) -> ReferenceState {
        ReferenceState::from_sound_speed(1.0, 0.0, 0.0, p.c0).unwrap()
    }

    #[test]
    fn uniform_equilibrium_is_steady() {
        let (s, p) = d2q9();
        let sim = Simulator::new(&s, &p, &Grid::periodic(8, 6).unwrap()).unwrap();
        let w0 = ReferenceState::from_sound_speed(1.1, 0.05, -0.02, p.c0).unwrap();
        let mut st = sim.init_uniform(&w0).unwrap();
        let before = st.f.clone();
        sim.run(&mut st, 5).unwrap();
        for (a, b) in st.f.iter().zip(&before) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn pure_streaming_moves_a_pulse() {
        let (s, p) = d2q9();
        let p = p.with_zero_rates();
        let sim = Simulator::new(&s, &p, &Grid::periodic(6, 5).unwrap()).unwrap();
        let mut st = sim.init_uniform(&rest(&p)).unwrap();
        let bg = st.site(0, 0).to_vec();
        let i = (2 * 6 + 3) * 9;
        for j in 0..9 {
            st.f[i + j] += (j + 1) as f64;
        }
        let before = st.clone();
        sim.run(&mut st, 1).unwrap();
        for y in 0..5 {
            for x in 0..6 {
                for j in 0..9 {
                    let sx = (x as i32 - s.xi[j][0]).rem_euclid(6) as usize;
                    let sy = (y as i32 - s.xi[j][1]).rem_euclid(5) as usize;
                    assert_eq!(st.site(x, y)[j], before.site(sx, sy)[j]);
                }
            }
        }
        let x = (3 + s.xi[5][0]) as usize;
        let y = (2 + s.xi[5][1]) as usize;
        assert_eq!(st.site(x, y)[5], bg[5] + 6.0);
    }

    #[test]
    fn plane_wave_measures_its_amplitude() {
        let (s, p) = d2q9();
        let sim = Simulator::new(&s, &p, &Grid::periodic(16, 12).unwrap()).unwrap();
        for mode in [ModeLabel::Shear, ModeLabel::Thermal, ModeLabel::AcousticPlus, ModeLabel::AcousticMinus] {
            let w = WaveInit { nx_periods: 1, ny_periods: 2, mode, amplitude: 1e-3, background: rest(&p) };
            let st = sim.init_plane_wave(&w).unwrap();
            let a = sim.measure_amplitude(&st, w.wave_vector(sim.grid()), mode, &w.background);
            assert!((a - C::from(1e-3)).norm() < 1e-12 * 1e3 * 1e-3, "{mode}: {a}");
        }
    }

    #[test]
    fn shear_init_perturbs_only_transverse_momentum() {
        let (s, p) = d2q9();
        let sim = Simulator::new(&s, &p, &Grid::periodic(16, 8).unwrap()).unwrap();
        let w = WaveInit { nx_periods: 2, ny_periods: 0, mode: ModeLabel::Shear, amplitude: 1e-3, background: rest(&p) };
        let st = sim.init_plane_wave(&w).unwrap();
        let base = rest(&p).conserved();
        for x in 0..16 {
            let c = sim.conserved_at(&st, x, 3);
            assert!((c.rho - base.rho).abs() < 1e-15);
            assert!(c.jx.abs() < 1e-15);
            assert!((c.eps - base.eps).abs() < 1e-14);
        }
        assert!(sim.conserved_at(&st, 0, 0).jy > 9e-4);
    }

    #[test]
    fn parallel_matches_serial_bitwise() {
        let (s, p) = d2q9();
        let g = Grid::periodic(20, 14).unwrap();
        let w = WaveInit { nx_periods: 1, ny_periods: 1, mode: ModeLabel::AcousticPlus, amplitude: 1e-2, background: rest(&p) };
        let a = Simulator::new(&s, &p, &g).unwrap();
        let b = a.clone().with_parallel(false);
        let mut sa = a.init_plane_wave(&w).unwrap();
        let mut sb = b.init_plane_wave(&w).unwrap();
        a.run(&mut sa, 7).unwrap();
        b.run(&mut sb, 7).unwrap();
        assert_eq!(sa.f, sb.f);
    }

    #[test]
    fn nonpositive_density_aborts_with_site() {
        let (s, p) = d2q9();
        let sim = Simulator::new(&s, &p, &Grid::periodic(5, 5).unwrap()).unwrap();
        let mut st = sim.init_uniform(&rest(&p)).unwrap();
        let i = (5 + 2) * 9;
        for j in 0..9 {
            st.f[i + j] = -0.1;
        }
        let err = sim.run(&mut st, 1).unwrap_err();
        assert!(matches!(err, LbmError::Instability { .. }));
        assert!(err.to_string().contains("(2, 1)"));
    }

    #[test]
    fn disc_without_source_stays_uniform() {
        let (s, p) = d2q9();
        let g = Grid::disc(20, 20, 9.5, 9.5, 7.0).unwrap();
        let sim = Simulator::new(&s, &p, &g).unwrap();
        let w0 = rest(&p);
        let src = PulseSource { x: 9.5, y: 9.5, width: 2.0, amplitude: 0.0 };
        let run = run_disc_acoustics(&sim, &w0, &src, 20, 10).unwrap();
        assert!(run.center_signal.iter().all(|v| v.abs() < 1e-13));
        assert!((run.mass[20] - run.mass[0]).abs() < 1e-12 * run.mass[0]);
    }

    #[test]
    fn disc_must_fit_inside_box() {
        assert!(Grid::disc(20, 20, 10.0, 10.0, 9.0).is_err());
        assert!(Grid::periodic(3, 10).is_err());
    }
}
