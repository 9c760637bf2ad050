use crate::plot::render_file;
use crate::{Failure, Globals, PlotKind};
use kinswarm::checks::run_suite;
use kinswarm::config::{ExperimentConfig, MinimizerSection};
use kinswarm::experiments::{run_sweep, write_com_csv, write_sweep_csv, SweepSettings};
use kinswarm::kernels::{KernelSpec, PerturbationSpec};
use kinswarm::minimizers::{
    ellipsoid_shape_from_lambda, explicit_radial_minimizer, frostman_1d_check, frostman_check, gradient_flow_with,
    minimizer_1d_profile, potential, potential_1d, FrostmanReport, GradientFlowOptions, MinimizerProfile, ProbeGrid,
    ProfileShape,
};
use kinswarm::simulator::{
    default_delta, observables, well_prepared_initial_data, write_snapshot, write_trajectory_csv, ExternalFieldSpec,
    Integrator, SimConfig,
};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

fn load(g: &Globals) -> Result<ExperimentConfig, Failure> {
    let path = g.config.as_ref().ok_or_else(|| Failure::new(1, "--config is required"))?;
    Ok(ExperimentConfig::load(path)?)
}

fn out_dir(g: &Globals, cfg: &ExperimentConfig) -> Result<PathBuf, Failure> {
    let dir = g.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.directory));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn create(dir: &std::path::Path, name: &str) -> Result<BufWriter<File>, Failure> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn svg(cfg: &ExperimentConfig, csv: &std::path::Path, kind: PlotKind) -> Result<(), Failure> {
    if cfg.output.wants("svg") {
        render_file(csv, kind, &csv.with_extension("svg"))?;
    }
    Ok(())
}

fn unperturbed(spec: &KernelSpec) -> KernelSpec {
    KernelSpec { perturbation: PerturbationSpec::None, regularization_delta: 0.0, ..spec.clone() }
}

/// Closed-form or semi-analytic minimizer of the unperturbed kernel.
fn analytic_profile(spec: &KernelSpec, mass: f64) -> Result<MinimizerProfile, Failure> {
    let base = unperturbed(spec);
    if base.is_isotropic() {
        Ok(explicit_radial_minimizer(&base, mass)?)
    } else if base.dim == 2 {
        Ok(ellipsoid_shape_from_lambda(&base, mass)?)
    } else {
        Err(Failure::new(1, "no closed-form minimizer for an anisotropic kernel outside N = 2"))
    }
}

/// Profile chosen by `[minimizer] method`, with the kernel it minimizes.
fn choose_profile(
    g: &Globals,
    spec: &KernelSpec,
    ms: &MinimizerSection,
) -> Result<(MinimizerProfile, KernelSpec), Failure> {
    let method = match ms.method.as_str() {
        "auto" if ms.s_1d.is_some() => "one_dim",
        "auto" if spec.perturbation != PerturbationSpec::None => "gradient_flow",
        "auto" if spec.is_isotropic() => "explicit",
        "auto" => "ellipse",
        m => m,
    };
    match method {
        "one_dim" => {
            let w = minimizer_1d_profile(ms.s_1d.unwrap_or(spec.s))?;
            for msg in &w.warnings {
                eprintln!("warning: {msg}");
            }
            Ok((w.value, spec.clone()))
        }
        "explicit" => Ok((explicit_radial_minimizer(spec, ms.mass)?, spec.clone())),
        "ellipse" => Ok((ellipsoid_shape_from_lambda(spec, ms.mass)?, spec.clone())),
        _ => {
            let mut s = spec.clone();
            if s.regularization_delta == 0.0 {
                let r = analytic_profile(spec, ms.mass)?.semi_axes().into_iter().fold(0.0, f64::max);
                s.regularization_delta = default_delta(r, ms.n, s.dim);
            }
            let opts = GradientFlowOptions { n: ms.n, steps: ms.steps, seed: g.seed.unwrap_or(1), ..Default::default() };
            let (p, trace) = gradient_flow_with(&s, ms.mass, &opts)?;
            g.say(&format!(
                "gradient flow: {} steps, final rms speed {:.3e}, δ = {:.3e}",
                trace.energies.len(),
                trace.final_rms_speed,
                s.regularization_delta
            ));
            Ok((p, s))
        }
    }
}

fn elliptic_radius(x: &[f64], axes: &[f64], center: &[f64]) -> f64 {
    x.iter().zip(axes).zip(center).map(|((v, a), c)| ((v - c) / a).powi(2)).sum::<f64>().sqrt()
}

fn fmt_row(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.17e}")).collect::<Vec<_>>().join(",")
}

pub fn minimize(g: &Globals) -> Result<(), Failure> {
    let cfg = load(g)?;
    let spec = cfg.spec()?;
    let ms = cfg.minimizer.clone().unwrap_or_default();
    let dir = out_dir(g, &cfg)?;
    let (profile, spec) = choose_profile(g, &spec, &ms)?;
    let json = cfg.output.wants("json");
    if json {
        fs::write(dir.join("profile.json"), profile.to_json())?;
    }
    let dim = profile.dim;
    let analytic = profile.n_particles().is_none();
    let axes = profile.semi_axes();

    let reduced = matches!(profile.shape, ProfileShape::OneDim { .. });
    let (report, points): (FrostmanReport, Vec<(&str, Vec<f64>)>) = match dim {
        1 if reduced => {
            let r = axes[0];
            let pts = (0..41)
                .map(|k| ("interior", vec![-r + 2.0 * r * (k as f64 + 0.5) / 41.0]))
                .chain((1..=20).map(|k| ("exterior", vec![r * (1.0 + 0.05 * k as f64)])))
                .collect();
            (frostman_1d_check(&profile)?, pts)
        }
        2 => {
            let probe = if analytic {
                ProbeGrid::for_profile(&profile)?
            } else {
                let rmax = 1.5 * axes.iter().cloned().fold(0.0, f64::max);
                let ring = (0..64)
                    .map(|k| {
                        let t = std::f64::consts::TAU * k as f64 / 64.0;
                        vec![profile.center[0] + rmax * t.cos(), profile.center[1] + rmax * t.sin()]
                    })
                    .collect();
                ProbeGrid { interior: vec![], exterior: ring, collar: vec![] }
            };
            let rep = frostman_check(&profile, &spec, &probe)?;
            let pts = probe
                .interior
                .iter()
                .map(|x| ("interior", x.clone()))
                .chain(probe.exterior.iter().map(|x| ("exterior", x.clone())))
                .collect();
            (rep, pts)
        }
        _ => {
            g.say("profile written; Frostman certification covers the 1-D reduced problem and N = 2");
            return Ok(());
        }
    };
    let mut w = create(&dir, "frostman.csv")?;
    let coords: Vec<String> = (1..=dim).map(|j| format!("x{j}")).collect();
    writeln!(w, "kind,r,{},potential,excess", coords.join(","))?;
    for (kind, x) in &points {
        let phi = if reduced { potential_1d(&profile, x[0])? } else { potential(&profile, &spec, x)? };
        let mut row = vec![elliptic_radius(x, &axes, &profile.center)];
        row.extend(x);
        row.extend([phi, phi - report.a0]);
        writeln!(w, "{kind},{}", fmt_row(&row))?;
    }
    w.flush()?;
    let mut w = create(&dir, "profile.csv")?;
    writeln!(w, "r,density")?;
    if analytic {
        for k in 0..=200 {
            let r = 1.5 * axes[0] * k as f64 / 200.0;
            let mut x = profile.center.clone();
            x[0] += r;
            writeln!(w, "{}", fmt_row(&[r, profile.density(&x)]))?;
        }
    }
    w.flush()?;
    if json {
        fs::write(dir.join("frostman.json"), serde_json::to_string_pretty(&report).unwrap())?;
    }
    svg(&cfg, &dir.join("frostman.csv"), PlotKind::Frostman)?;
    let certified = report.certified(ms.tolerance);
    let mut w = create(&dir, "frostman_report.csv")?;
    writeln!(w, "a0,max_interior_deviation,relative_interior_deviation,min_exterior_slack,boundary_exponent_fit,certified")?;
    writeln!(
        w,
        "{},{certified}",
        fmt_row(&[
            report.a0,
            report.max_interior_deviation,
            report.relative_interior_deviation(),
            report.min_exterior_slack,
            report.boundary_exponent_fit
        ])
    )?;
    w.flush()?;
    g.say(&format!("semi-axes {:?}", axes));
    g.say(&format!(
        "A0 = {:.12e}, interior deviation {:.3e}·|A0|, exterior slack {:.3e}, certified: {certified}",
        report.a0,
        report.relative_interior_deviation(),
        report.min_exterior_slack
    ));
    if certified {
        Ok(())
    } else {
        Err(Failure::new(2, "Frostman certification failed"))
    }
}

pub fn simulate(g: &Globals) -> Result<(), Failure> {
    let cfg = load(g)?;
    let sim = cfg.simulation.clone().ok_or_else(|| Failure::new(1, "[simulation] section missing"))?;
    let mut spec = cfg.spec()?;
    let mass = cfg.minimizer.as_ref().map(|m| m.mass).unwrap_or(1.0);
    let profile = analytic_profile(&spec, mass)?;
    if spec.regularization_delta == 0.0 {
        let r = profile.semi_axes().into_iter().fold(0.0, f64::max);
        spec.regularization_delta = default_delta(r, sim.n, spec.dim);
    }
    let dim = spec.dim;
    let seed = g.seed.unwrap_or(0);
    let x_init = sim.x_init.clone().unwrap_or_else(|| vec![0.0; dim]);
    let v_field = ExternalFieldSpec::Constant { b: sim.v_init.clone().unwrap_or_else(|| vec![0.0; dim]) };
    let mut state = well_prepared_initial_data(&profile, &x_init, &v_field, sim.n, sim.thermal, seed)?;
    let sc = SimConfig {
        epsilon: sim.epsilon,
        lambda_drag: sim.lambda_drag,
        dt: sim.dt.unwrap_or_else(|| {
            let target = 0.02 * sim.epsilon.sqrt();
            if sim.t_final > 0.0 {
                sim.t_final / (sim.t_final / target).ceil()
            } else {
                target
            }
        }),
        t_final: sim.t_final,
        kernel: spec,
        external_field: cfg.field()?,
        seed,
    };
    let dir = out_dir(g, &cfg)?;
    let mut it = Integrator::new(&sc, &state)?;
    let e0 = observables(&state, &sc, 0.0).interaction_energy;
    let mut records = vec![observables(&state, &sc, e0)];
    let mut stream = if cfg.output.wants("json") { Some(create(&dir, "observables.jsonl")?) } else { None };
    if let Some(s) = stream.as_mut() {
        writeln!(s, "{}", serde_json::to_string(&records[0]).unwrap())?;
    }
    let steps = sc.n_steps();
    for k in 1..=steps {
        it.step(&mut state)?;
        if k % sim.record_every == 0 || k == steps {
            let r = observables(&state, &sc, e0);
            if let Some(s) = stream.as_mut() {
                writeln!(s, "{}", serde_json::to_string(&r).unwrap())?;
            }
            records.push(r);
        }
        if sim.snapshot_every > 0 && k % sim.snapshot_every == 0 {
            write_snapshot(create(&dir, &format!("snapshot_{k:07}.bin"))?, &state)?;
        }
    }
    if let Some(mut s) = stream {
        s.flush()?;
    }
    write_snapshot(create(&dir, "snapshot_final.bin")?, &state)?;
    write_trajectory_csv(create(&dir, "trajectory.csv")?, &records)?;
    svg(&cfg, &dir.join("trajectory.csv"), PlotKind::Trajectory)?;
    let last = records.last().unwrap();
    g.say(&format!(
        "{steps} steps, dt = {:.3e}; final X = {:?}, V = {:?}, H_eps = {:.6e}",
        sc.dt, last.x_eps, last.v_eps, last.total_energy_h
    ));
    Ok(())
}

pub fn sweep(g: &Globals) -> Result<(), Failure> {
    let cfg = load(g)?;
    let spec = cfg.spec()?;
    let mut s: SweepSettings = cfg.sweep.clone().ok_or_else(|| Failure::new(1, "[sweep] section missing"))?;
    if let Some(seed) = g.seed {
        s.seeds = vec![seed];
    }
    let field = cfg.field()?;
    let dir = out_dir(g, &cfg)?;
    let out = run_sweep(&spec, &field, &s)?;
    write_sweep_csv(create(&dir, "diagnostics.csv")?, &out.runs)?;
    for (k, r) in out.runs.iter().enumerate() {
        let name = format!("com_{k:02}_eps{}_seed{}.csv", r.epsilon, r.seed);
        write_com_csv(create(&dir, &name)?, r, &out.strong)?;
        svg(&cfg, &dir.join(&name), PlotKind::Trajectory)?;
    }
    out.strong.trajectory.write_csv(create(&dir, "limit_trajectory.csv")?)?;
    let sm = &out.summary;
    let mut w = create(&dir, "slopes.csv")?;
    writeln!(w, "epsilon,max_energy_gap,max_dx,max_dv,final_modulated,c_fit,integral_r")?;
    for i in 0..sm.epsilons.len() {
        writeln!(
            w,
            "{}",
            fmt_row(&[
                sm.epsilons[i],
                sm.max_energy_gap[i],
                sm.max_dx[i],
                sm.max_dv[i],
                sm.final_modulated[i],
                sm.c_fit[i],
                sm.integral_r[i]
            ])
        )?;
    }
    w.flush()?;
    svg(&cfg, &dir.join("slopes.csv"), PlotKind::Slope)?;
    if cfg.output.wants("json") {
        fs::write(dir.join("summary.json"), serde_json::to_string_pretty(sm).unwrap())?;
    }
    g.say(&format!(
        "energy-gap slope {:.3}, |ΔX| slope {:.3}, 𝓗 slope {:.3}, C_fit spread {:.3}",
        sm.energy_gap_slope, sm.dx_slope, sm.modulated_slope, sm.c_spread
    ));
    g.say(&format!("{:#?}", sm.checks));
    Ok(())
}

pub fn check(g: &Globals, suite: &str) -> Result<(), Failure> {
    let results = run_suite(suite).ok_or_else(|| Failure::new(1, format!("unknown suite {suite:?}")))?;
    let width = results.iter().map(|r| r.name.chars().count()).max().unwrap_or(0);
    for r in &results {
        let pad = width - r.name.chars().count();
        g.say(&format!(
            "{}  {}{}  {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            " ".repeat(pad),
            r.detail
        ));
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::new(4, format!("{failed} of {} checks failed", results.len())))
    }
}
