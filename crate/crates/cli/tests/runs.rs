use std::path::Path;

use entangle_cli::config::{Axis, ExperimentConfig};
use entangle_cli::run::{boundary, montecarlo};

fn parse(src: &str) -> ExperimentConfig {
    ExperimentConfig::from_str_at(src, Path::new("inline.toml")).unwrap()
}

const PARAMS: &str = r#"
[params]
g0 = 0.2
g1 = 0.17
omega_mod = 2.7
gamma_ba = 0.05
gamma_th = 0.0025
eta = 0.5
q = 0.1

[solver]
n_steps = 256
"#;

#[test]
fn ensemble_error_scales_as_inverse_root_n() {
    let cfg = |n: usize| {
        parse(&format!("mode = \"montecarlo\"\nseed = 3\n{PARAMS}\n[montecarlo]\ntrajectories = {n}\nburn_in_periods = 10\n"))
    };
    let small = montecarlo::compute(&cfg(100), false).unwrap();
    let large = montecarlo::compute(&cfg(2500), false).unwrap();
    let mean_se = |r: &montecarlo::MonteCarloResult| {
        let all: Vec<f64> = r.phases.iter().flat_map(|p| p.entries.iter().map(|e| e.stderr)).collect();
        all.iter().sum::<f64>() / all.len() as f64
    };
    let ratio = mean_se(&small) / mean_se(&large);
    assert!((4.0..6.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn montecarlo_is_reproducible_from_seed() {
    let src = format!("mode = \"montecarlo\"\nseed = 8\n{PARAMS}\n[montecarlo]\ntrajectories = 50\nburn_in_periods = 2\n");
    let a = montecarlo::compute(&parse(&src), false).unwrap();
    let b = montecarlo::compute(&parse(&src), false).unwrap();
    assert_eq!(a.phases, b.phases);
    let c = montecarlo::compute(&parse(&src.replace("seed = 8", "seed = 9")), false).unwrap();
    assert_ne!(a.phases, c.phases);
}

#[test]
fn unmeasured_boundary_slice_is_separable() {
    let src = format!(
        "mode = \"boundary\"\n{PARAMS}\n[boundary]\nbranch = \"attractive\"\ng0 = {{ values = [0.1, 0.2] }}\ng1_ratio = 0.2\neta = [0.0]\nomega_points = 7\nconditional_only = true\n"
    )
    .replace("gamma_th = 0.0025", "gamma_th = 0.0025\ngamma = 0.01");
    let result = boundary::compute(&parse(&src)).unwrap();
    for p in &result.surface {
        assert_eq!(p.status, "converged");
        assert!(p.max(boundary::Quantity::Conditional).unwrap() < 0.0);
    }
    assert!(result.crossings.iter().all(|c| c.crossing.is_none() && c.g0_hi.is_none()));
}

#[test]
fn repulsive_branch_flags_unstable_region() {
    let mut cfg = parse(&format!(
        "mode = \"boundary\"\n{PARAMS}\n[boundary]\nbranch = \"repulsive\"\ng0 = {{ values = [-0.1] }}\ng1_ratio = 0.2\neta = [0.5]\nomega_points = 5\nconditional_only = true\n"
    ));
    cfg.boundary.as_mut().unwrap().g0 = Axis::values(vec![-0.3, -0.1]);
    let result = boundary::compute(&cfg).unwrap();
    assert_eq!(result.surface[0].status, "unstable");
    assert_eq!(result.surface[1].status, "converged");
}
