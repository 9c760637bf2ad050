use kinswarm::asymptotic::integrate_xv;
use kinswarm::config::ExperimentConfig;
use kinswarm::diagnostics::{hminus_s_norm, HmsMethod};
use kinswarm::grid::BoxGrid;
use kinswarm::minimizers::{ellipsoid_shape_from_lambda, frostman_check, MinimizerProfile, ProbeGrid};
use kinswarm::simulator::{
    coarse_grain, default_delta, read_snapshot, well_prepared_initial_data, write_snapshot, ExternalFieldSpec,
    Integrator, SimConfig,
};

const CONFIG: &str = r#"
[kernel]
dim = 2
s = 0.75
alpha = 1.0
beta = 1.0
lambda = [1.0, 2.0]

[minimizer]
method = "ellipse"

[simulation]
n = 600
epsilon = 0.02
t_final = 0.5
v_init = [0.4, -0.2]

[external_field]
variant = "linear"
a = [[-0.5, 0.2], [0.2, -0.3]]
b = [0.3, 0.1]
"#;

fn setup() -> (ExperimentConfig, MinimizerProfile) {
    let cfg = ExperimentConfig::from_toml(CONFIG).unwrap();
    let profile = ellipsoid_shape_from_lambda(&cfg.spec().unwrap(), 1.0).unwrap();
    (cfg, profile)
}

#[test]
fn config_to_certified_ellipse() {
    let (cfg, profile) = setup();
    let spec = cfg.spec().unwrap();
    let report = frostman_check(&profile, &spec, &ProbeGrid::for_profile(&profile).unwrap()).unwrap();
    assert!(report.certified(1e-3), "{report:?}");
    let axes = profile.semi_axes();
    assert!(axes[1] > axes[0]);
    let back = MinimizerProfile::from_json(&profile.to_json()).unwrap();
    assert_eq!(back, profile);
}

#[test]
fn particle_centre_of_mass_follows_the_limit_ode_for_linear_fields() {
    // For affine u the mean field acting on the centre of mass is u(X),
    // and pair forces cancel, so only the splitting error remains.
    let (cfg, profile) = setup();
    let sim = cfg.simulation.clone().unwrap();
    let r = profile.semi_axes().into_iter().fold(0.0, f64::max);
    let spec = cfg.spec().unwrap().with_delta(default_delta(r, sim.n, 2));
    let field = cfg.field().unwrap();
    let v0 = ExternalFieldSpec::Constant { b: sim.v_init.clone().unwrap() };
    let mut state = well_prepared_initial_data(&profile, &[0.0, 0.0], &v0, sim.n, 0.0, 11).unwrap();
    let sc = SimConfig {
        epsilon: sim.epsilon,
        lambda_drag: 1.0,
        dt: 2.5e-3,
        t_final: sim.t_final,
        kernel: spec,
        external_field: field.clone(),
        seed: 11,
    };
    let x0 = state.center_of_mass();
    let limit = integrate_xv(&profile.translated(&x0), &field, 1.0, &x0, &state.mean_velocity(), sim.t_final, 1e-3).unwrap();
    let mut it = Integrator::new(&sc, &state).unwrap();
    for _ in 0..sc.n_steps() {
        it.step(&mut state).unwrap();
    }
    let xe = state.center_of_mass();
    let xl = limit.x.last().unwrap();
    for j in 0..2 {
        assert!((xe[j] - xl[j]).abs() < 1e-5, "{xe:?} vs {xl:?}");
    }
    assert!((state.time - 0.5).abs() < 1e-12);
}

#[test]
fn snapshots_round_trip_and_coarse_graining_keeps_mass() {
    let (_, profile) = setup();
    let state = well_prepared_initial_data(&profile, &[0.1, -0.1], &ExternalFieldSpec::Zero, 500, 0.3, 5).unwrap();
    let mut buf = Vec::new();
    write_snapshot(&mut buf, &state).unwrap();
    assert_eq!(buf.len(), 16 + 8 * 4 * 500);
    let back = read_snapshot(buf.as_slice(), 1.0).unwrap();
    assert_eq!(back.positions, state.positions);
    assert_eq!(back.velocities, state.velocities);

    let r = profile.semi_axes().into_iter().fold(0.0, f64::max);
    let grid = BoxGrid::centered(&[0.1, -0.1], 1.5 * r + 0.3, 64).unwrap();
    let fields = coarse_grain(&state, &grid, 0.1).unwrap();
    assert!((fields.density.integral() - 1.0).abs() < 1e-5, "{}", fields.density.integral());
}

#[test]
fn hms_routes_agree_on_a_coarse_grained_difference() {
    let (_, profile) = setup();
    let r = profile.semi_axes().into_iter().fold(0.0, f64::max);
    let grid = BoxGrid::centered(&[0.0, 0.0], 2.0 * r, 48).unwrap();
    let a = well_prepared_initial_data(&profile, &[0.0, 0.0], &ExternalFieldSpec::Zero, 800, 0.0, 1).unwrap();
    let b = well_prepared_initial_data(&profile, &[0.05, 0.0], &ExternalFieldSpec::Zero, 800, 0.0, 2).unwrap();
    let fa = coarse_grain(&a, &grid, 0.08).unwrap().density;
    let fb = coarse_grain(&b, &grid, 0.08).unwrap().density;
    let mu = fa.sub(&fb).unwrap();
    let k = hminus_s_norm(&mu, 0.75, HmsMethod::KernelDoubleIntegral).unwrap().value.squared;
    let f = hminus_s_norm(&mu, 0.75, HmsMethod::FourierQuadrature).unwrap().value.squared;
    assert!(k > 0.0);
    assert!((k - f).abs() < 0.05 * k, "kernel {k:.4e} vs Fourier {f:.4e}");
}

#[test]
fn shipped_configs_load() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            let text = cfg.to_toml().unwrap();
            assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
            seen += 1;
        }
    }
    assert!(seen >= 5);
}
