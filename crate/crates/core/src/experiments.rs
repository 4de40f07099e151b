//! Experiment drivers that turn a configuration into CSV.
//!
//! Every output starts with a `#` block: the resolved configuration (strip the
//! leading `# ` to get a config file that reproduces the run) followed by derived
//! quantities. Numbers are printed with 17 significant digits. Output depends only
//! on the configuration, so repeated and parallel runs are byte-identical.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::config::{Command, ExperimentConfig};
use crate::constraints::{predicted_transport, validate};
use crate::error::{LbmError, Result};
use crate::linear::{linspace, LinearModel, ModeLabel, TrackedRay};
use crate::params::{sigma_from_rate, ParameterSet};
use crate::scheme::SchemeDescriptor;
use crate::simulator::{front_radius, run_disc_acoustics, run_relaxation, Grid, PulseSource, Simulator, WaveInit};

/// Eigenvalue modulus above which a zero-point ray is flagged unstable.
const UNSTABLE_MODULUS: f64 = 1.0 + 1e-10;

/// A double with 17 significant digits.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// Runs `command`, writing the main CSV to `out`.
///
/// `snapshot_dir` receives the per-snapshot files of the `disc` experiment.
pub fn run_command(command: Command, cfg: &ExperimentConfig, out: &mut dyn Write, snapshot_dir: &Path) -> Result<()> {
    match command {
        Command::Constraints => cmd_constraints(cfg, out),
        Command::ZeroPoint => cmd_zero_point(cfg, out),
        Command::RelaxWave => cmd_relax_wave(cfg, out),
        Command::Disc => cmd_disc(cfg, out, snapshot_dir),
    }
}

fn write_header(out: &mut dyn Write, command: Command, cfg: &ExperimentConfig, derived: Option<(&SchemeDescriptor, &ParameterSet)>) -> Result<()> {
    writeln!(out, "# lbm {command}")?;
    writeln!(out, "# resolved configuration:")?;
    for line in cfg.echo(command) {
        writeln!(out, "# {line}")?;
    }
    if let Some((s, p)) = derived {
        writeln!(out, "# derived:")?;
        for (k, v) in parameter_rows(p) {
            writeln!(out, "#   {k} = {}", num(v))?;
        }
        for i in 4..s.q {
            writeln!(out, "#   s_{} = {}", s.moment_labels[i], num(p.s[i]))?;
        }
        if let (false, Ok(t)) = (p.s.iter().all(|&x| x == 0.0), predicted_transport(p, s)) {
            writeln!(out, "#   nu = {}", num(t.nu))?;
            writeln!(out, "#   kappa = {}", num(t.kappa))?;
            writeln!(out, "#   prandtl = {}", num(t.prandtl))?;
        }
    }
    Ok(())
}

fn parameter_rows(p: &ParameterSet) -> Vec<(String, f64)> {
    let mut rows: Vec<(String, f64)> = [
        ("c0", p.c0),
        ("c1", p.c1),
        ("c2", p.c2),
        ("c3", p.c3),
        ("alpha2", p.alpha2),
        ("beta2", p.beta2),
        ("alpha3", p.alpha3),
        ("beta3", p.beta3),
        ("alpha4", p.alpha4),
        ("beta4", p.beta4),
        ("xi_x", p.xi_x),
        ("xi_y", p.xi_y),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    const R: [&str; 8] = ["rx_rho", "rx_jx", "rx_jy", "rx_e", "ry_rho", "ry_jx", "ry_jy", "ry_e"];
    rows.extend(R.iter().zip(p.r_coeffs).map(|(k, v)| (k.to_string(), v)));
    rows
}

/// CSV field without separators or line breaks.
fn field(s: &str) -> String {
    s.replace([',', '\n'], ";")
}

/// Derived parameter set, predicted transport and validation report.
///
/// Fails with a constraint violation after writing when any check fails.
pub fn cmd_constraints(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<()> {
    let (s, p) = cfg.derive()?;
    write_header(out, Command::Constraints, cfg, None)?;
    writeln!(out, "kind,name,value,passed")?;
    for (k, v) in parameter_rows(&p) {
        writeln!(out, "parameter,{k},{},", num(v))?;
    }
    for i in 4..s.q {
        writeln!(out, "rate,{},{},", s.moment_labels[i], num(p.s[i]))?;
    }
    for i in 4..s.q {
        writeln!(out, "sigma,{},{},", s.moment_labels[i], num(sigma_from_rate(p.s[i])))?;
    }
    let transport = predicted_transport(&p, &s);
    if let Ok(t) = &transport {
        writeln!(out, "transport,nu,{},", num(t.nu))?;
        writeln!(out, "transport,kappa,{},", num(t.kappa))?;
        writeln!(out, "transport,prandtl,{},", num(t.prandtl))?;
    }
    let report = validate(&p, &s, cfg.free.isotropy_level);
    for c in &report.checks {
        writeln!(out, "check,{},{},{}", field(&c.name), num(c.residual), c.passed)?;
    }
    out.flush()?;
    transport?;
    if let Some(bad) = report.failures().next() {
        return Err(LbmError::ConstraintViolation {
            name: bad.name.clone(),
            detail: format!("residual {:e}", bad.residual),
        });
    }
    Ok(())
}

/// Eigenvalues of the amplification matrix along rays of wave vectors.
///
/// Rows list the four physical modes first, then the kinetic ones. Merge events,
/// ambiguous continuations and eigenvalues outside the unit disc are reported as
/// trailing `#` lines.
pub fn cmd_zero_point(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<()> {
    let (s, p) = cfg.derive()?;
    let w0 = cfg.reference_state(&p)?;
    let model = LinearModel::new(&s, &p, &w0)?;
    let z = &cfg.zero_point;
    let ks = linspace(z.k_min, z.k_max, z.k_points);
    let rays: Vec<TrackedRay> = z
        .angles_deg
        .par_iter()
        .map(|&d| model.track(d.to_radians(), &ks))
        .collect::<Result<_>>()?;

    write_header(out, Command::ZeroPoint, cfg, Some((&s, &p)))?;
    let transport = if cfg.pure_streaming { None } else { model.transport().copied() };
    writeln!(out, "theta_deg,k,mode_label,re,im,modulus,arg,nu_eff_or_kappa_eff,vsound_ratio,eff_over_prediction")?;
    let dt = s.dt;
    let mut unstable = Vec::new();
    for (ray, &deg) in rays.iter().zip(&z.angles_deg) {
        let mut flagged = false;
        for pt in &ray.points {
            let k = pt.wave.k;
            let mut order: Vec<usize> = Vec::with_capacity(s.q);
            for label in ModeLabel::PHYSICAL {
                order.extend(pt.labels.iter().position(|&l| l == label));
            }
            order.extend((0..s.q).filter(|&j| pt.labels[j] == ModeLabel::Kinetic));
            for j in order {
                let v = pt.values[j];
                let label = pt.labels[j];
                let eff = -v.norm().ln() / (k * k * dt);
                let vs = if label.is_acoustic() {
                    (v * model.advection_phase(pt.wave).conj()).arg().abs() / (k * dt) / p.c0
                } else {
                    f64::NAN
                };
                let ratio = match (label, &transport) {
                    (ModeLabel::Shear, Some(t)) => eff / t.nu,
                    (ModeLabel::Thermal, Some(t)) => eff / t.kappa,
                    _ => f64::NAN,
                };
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{}",
                    num(deg),
                    num(k),
                    label,
                    num(v.re),
                    num(v.im),
                    num(v.norm()),
                    num(v.arg()),
                    num(eff),
                    num(vs),
                    num(ratio)
                )?;
            }
            let r = pt.spectral_radius();
            if r > UNSTABLE_MODULUS && !flagged {
                flagged = true;
                unstable.push((deg, k, r));
            }
        }
    }
    for (ray, &deg) in rays.iter().zip(&z.angles_deg) {
        if let Some(k) = ray.merge_k {
            writeln!(out, "# merge-event theta_deg={} k={}", num(deg), num(k))?;
        }
        for &k in &ray.ambiguous {
            writeln!(out, "# ambiguous theta_deg={} k={}", num(deg), num(k))?;
        }
    }
    for &(deg, k, r) in &unstable {
        writeln!(out, "# instability theta_deg={} k={} modulus={}", num(deg), num(k), num(r))?;
    }
    out.flush()?;
    if z.fail_on_instability {
        if let Some(&(deg, k, r)) = unstable.first() {
            return Err(LbmError::LinearInstability(format!(
                "eigenvalue modulus {r} at k = {k}, theta = {deg} degrees"
            )));
        }
    }
    Ok(())
}

/// Relaxation of a plane wave on a periodic grid, sampled every `sample_every` steps.
pub fn cmd_relax_wave(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<()> {
    let (s, p) = cfg.derive()?;
    let w0 = cfg.reference_state(&p)?;
    let r = &cfg.relax;
    let grid = Grid::periodic(r.nx, r.ny)?;
    let sim = Simulator::new(&s, &p, &grid)?.with_parallel(r.parallel);
    let w = WaveInit {
        nx_periods: r.nx_periods,
        ny_periods: r.ny_periods,
        mode: r.mode,
        amplitude: r.amplitude,
        background: w0,
    };
    let wave = w.wave_vector(&grid);
    let predicted = LinearModel::new(&s, &p, &w0)?.track_to(wave, 64)?.value(r.mode);

    write_header(out, Command::RelaxWave, cfg, Some((&s, &p)))?;
    writeln!(out, "# wave k = {}, theta_deg = {}", num(wave.k), num(wave.theta.to_degrees()))?;
    if let Some(v) = predicted {
        writeln!(out, "# linear per-step modulus of the {} mode = {}", r.mode, num(v.norm()))?;
    }
    let series = run_relaxation(&sim, &w, r.init, r.steps, r.sample_every)?;
    writeln!(out, "step,t,amp_re,amp_im,amp_mod,rho_total,eps_total")?;
    for x in &series {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            x.step,
            num(x.t),
            num(x.amplitude.re),
            num(x.amplitude.im),
            num(x.amplitude.norm()),
            num(x.totals[0]),
            num(x.totals[3])
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Acoustic pulse in a disc. The main CSV holds the mass and the density at the
/// source for every step; each snapshot goes to `<snapshot_prefix>_<step>.csv` in
/// `snapshot_dir`.
pub fn cmd_disc(cfg: &ExperimentConfig, out: &mut dyn Write, snapshot_dir: &Path) -> Result<()> {
    let (s, p) = cfg.derive()?;
    let w0 = cfg.reference_state(&p)?;
    let d = &cfg.disc;
    let grid = Grid::disc(d.nx, d.ny, d.cx, d.cy, d.radius)?;
    let wall_e = d.wall_e.unwrap_or(0.5 * p.c0 * p.c0);
    let sim = Simulator::new(&s, &p, &grid)?.with_parallel(d.parallel).with_wall_energy(wall_e);
    let source = PulseSource { x: d.source_x, y: d.source_y, width: d.width, amplitude: d.amplitude };
    if !grid.is_fluid(source.x.round() as usize, source.y.round() as usize) {
        return Err(LbmError::InvalidArgument("the pulse source must lie inside the disc".into()));
    }
    let run = run_disc_acoustics(&sim, &w0, &source, d.steps, d.snapshot_every)?;

    write_header(out, Command::Disc, cfg, Some((&s, &p)))?;
    writeln!(out, "step,t,mass,center_drho")?;
    for (n, (m, c)) in run.mass.iter().zip(&run.center_signal).enumerate() {
        writeln!(out, "{n},{},{},{}", num(n as f64 * s.dt), num(*m), num(*c))?;
    }
    for snap in &run.snapshots {
        let name = format!("{}_{:06}.csv", d.snapshot_prefix, snap.step);
        let mut f = BufWriter::new(File::create(snapshot_dir.join(&name))?);
        writeln!(f, "# lbm disc snapshot step {}", snap.step)?;
        writeln!(f, "x,y,rho,jx,jy,eps")?;
        for r in &snap.rows {
            writeln!(f, "{},{},{},{},{},{}", r[0] as usize, r[1] as usize, num(r[2]), num(r[3]), num(r[4]), num(r[5]))?;
        }
        f.flush()?;
        let front = front_radius(snap, d.source_x, d.source_y, w0.rho0);
        writeln!(out, "# snapshot step={} file={name} front_radius={}", snap.step, num(front))?;
    }
    out.flush()?;
    Ok(())
}
