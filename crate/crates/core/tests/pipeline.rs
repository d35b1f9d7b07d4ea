use dnngpc::gpc::{
    assemble_surrogate, compute_coeffs, finite_dim_study, infinite_dim_study, surrogate_error, truncation_error, Backend,
    CoeffOptions, ErrorMethod, FiniteStudyConfig, InfiniteStudyConfig, TargetFunction,
};
use dnngpc::index_sets::{DownwardClosedSet, WeightSequence};
use dnngpc::pde::{pde_surrogate_study, KLExpansion, Pde1dConfig};
use dnngpc::relu_net::{deserialize, serialize};
use dnngpc::tensor::{build_tensor_hermite, TensorHermiteNet, TensorL2Method};
use dnngpc::Exec;

#[test]
fn surrogate_error_splits_into_truncation_and_emulation() {
    let f = TargetFunction::new("exp", 2, |y| (0.5 * (y[0] + y[1])).exp());
    let lambda = DownwardClosedSet::total_degree(2, 4);
    let coeffs = compute_coeffs(&f, &lambda, &CoeffOptions::default(), Exec::Parallel).unwrap();
    assert!(coeffs.all_converged());
    let trunc = truncation_error(&f, &coeffs, &ErrorMethod::GaussHermite { nodes: 64 }, Exec::Parallel).unwrap();
    let model = assemble_surrogate(&coeffs, 1e-2, Backend::Relu, Exec::Parallel).unwrap();
    let mc = ErrorMethod::MonteCarlo { samples: 4000, seed: 5, dim: 2 };
    let total = surrogate_error(&f, &model, &mc, Exec::Parallel).unwrap();
    assert!(total.estimate <= trunc.estimate + model.emulation_budget + 3.0 * total.error_bar);
    let repu = assemble_surrogate(&coeffs, 0.0, Backend::Repu, Exec::Parallel).unwrap();
    let r = surrogate_error(&f, &repu, &ErrorMethod::GaussHermite { nodes: 64 }, Exec::Parallel).unwrap();
    assert!((r.estimate - trunc.estimate).abs() <= 1e-8);
}

#[test]
fn tensor_net_survives_a_file_round_trip() {
    let lambda = DownwardClosedSet::tensor_box(&[1, 2]);
    let t = build_tensor_hermite(&lambda, 1e-2, Exec::Parallel).unwrap();
    let back = TensorHermiteNet::from_parts(deserialize(&serialize(&t.net)).unwrap(), &t.sidecar_json()).unwrap();
    let y = [0.3, -1.1];
    assert_eq!(t.evaluate(&y).unwrap(), back.evaluate(&y).unwrap());
    let errs = back.l2_errors(&TensorL2Method::MonteCarlo { samples: 3000, seed: 1 }, Exec::Parallel).unwrap();
    assert!(errs.iter().all(|e| e.estimate <= 1e-2));
}

#[test]
fn studies_are_deterministic_across_exec_modes() {
    let f = TargetFunction::univariate("runge", |x| 1.0 / (1.0 + x * x)).with_strip(vec![0.9]);
    let cfg = FiniteStudyConfig { budgets: vec![1398, 19683], with_repu: false, ..Default::default() };
    let a = finite_dim_study(&f, &[0.9], &cfg, Exec::Parallel).unwrap();
    let b = finite_dim_study(&f, &[0.9], &cfg, Exec::Sequential).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());

    let toy = TargetFunction::separable("toy", 32, |j, y| 1.0 / (1.0 + (y / (j as f64).powi(3)).powi(2)));
    let w = WeightSequence::algebraic(1.0, 3.0, 0.5, 10.0, 4.0).unwrap();
    let icfg = InfiniteStudyConfig { budgets: vec![8, 32], mc_samples: 2000, ..Default::default() };
    let a = infinite_dim_study(&toy, &w, &icfg, Exec::Parallel).unwrap();
    let b = infinite_dim_study(&toy, &w, &icfg, Exec::Sequential).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    assert!(a.rows[1].error < a.rows[0].error);
}

#[test]
fn small_pde_study() {
    let cfg = Pde1dConfig::new(32).unwrap();
    let kl = KLExpansion::sine(3.0, 64).unwrap();
    let w = WeightSequence::algebraic(1.0, 3.0, 0.5, 10.0, 4.0).unwrap();
    let study = InfiniteStudyConfig { budgets: vec![8, 32], mc_samples: 1000, ..Default::default() };
    let r = pde_surrogate_study(&cfg, &kl, &w, &study, Exec::Parallel).unwrap();
    assert_eq!(r.rows.len(), 2);
    assert!(r.rows[1].error < r.rows[0].error);
    assert!(r.notes.iter().any(|n| n.starts_with("reference truncation")));
    let again = pde_surrogate_study(&cfg, &kl, &w, &study, Exec::Parallel).unwrap();
    assert_eq!(r.to_csv(), again.to_csv());
}
