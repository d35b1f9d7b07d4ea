use dnngpc::emulation::{hermite_net_auto, product2_net};
use dnngpc::hermite::{gauss_hermite_rule, hermite_eval, hermite_eval_all, monomial_coeffs};
use dnngpc::index_sets::{cnu_weight, lambda_eps_finite, lambda_eps_weighted, DownwardClosedSet, MultiIndex, WeightSequence};
use dnngpc::pde::{KLExpansion, Pde1dConfig, PdeSolver};
use dnngpc::relu_net::{
    compose, deserialize, from_piecewise_linear, juxtapose, serialize, sum_networks, Breakpoints, InputMode, SparseNetwork,
};
use dnngpc::tensor::repu_exact_poly;
use dnngpc::Exec;
use proptest::prelude::*;

fn pwl() -> impl Strategy<Value = Breakpoints> {
    (prop::collection::btree_set(-400i32..400, 1..8), -2.0f64..2.0, -2.0f64..2.0).prop_flat_map(|(pts, l, r)| {
        let pts: Vec<f64> = pts.into_iter().map(|p| p as f64 / 100.0).collect();
        let n = pts.len();
        prop::collection::vec(-3.0f64..3.0, n).prop_map(move |v| Breakpoints::new(pts.clone(), v, l, r).unwrap())
    })
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pwl_realization_is_exact(bp in pwl(), x in -6.0f64..6.0) {
        let net = from_piecewise_linear(&bp).unwrap();
        prop_assert!(close(net.eval1(x), bp.eval(x), 1e-12));
    }

    #[test]
    fn composition_and_sums(f in pwl(), g in pwl(), c in -2.0f64..2.0, x in -5.0f64..5.0) {
        let nf = from_piecewise_linear(&f).unwrap();
        let ng = from_piecewise_linear(&g).unwrap();
        let fg = compose(&nf, &ng).unwrap();
        prop_assert!(close(fg.eval1(x), f.eval(g.eval(x)), 1e-10));
        prop_assert_eq!(fg.depth(), nf.depth() + ng.depth());
        let s = sum_networks(&[nf.clone(), ng.clone()], &[1.0, c]).unwrap();
        prop_assert!(close(s.eval1(x), f.eval(x) + c * g.eval(x), 1e-10));
        if nf.depth() == ng.depth() {
            let j = juxtapose(&[nf, ng], InputMode::Disjoint).unwrap();
            let out = j.evaluate(&[x, -x]).unwrap();
            prop_assert!(close(out[0], f.eval(x), 1e-12) && close(out[1], g.eval(-x), 1e-12));
        }
    }

    #[test]
    fn serialization_round_trip(bp in pwl()) {
        let net = from_piecewise_linear(&bp).unwrap();
        let back: SparseNetwork = deserialize(&serialize(&net)).unwrap();
        prop_assert_eq!(back, net);
    }

    #[test]
    fn corrupted_bytes_never_panic(bp in pwl(), cut in 0usize..400, byte in any::<u8>()) {
        let mut bytes = serialize(&from_piecewise_linear(&bp).unwrap());
        let i = cut % bytes.len();
        bytes[i] = byte;
        let _ = deserialize(&bytes);
        let _ = deserialize(&bytes[..i]);
    }

    #[test]
    fn product_net_error_and_zero_factors(a in -4.0f64..4.0, b in -4.0f64..4.0) {
        let net = product2_net(4.0, 1e-3).unwrap();
        prop_assert!((net.evaluate(&[a, b]).unwrap()[0] - a * b).abs() <= 1e-3);
        prop_assert_eq!(net.evaluate(&[a, 0.0]).unwrap()[0], 0.0);
        prop_assert_eq!(net.evaluate(&[0.0, b]).unwrap()[0], 0.0);
    }

    #[test]
    fn recurrence_matches_monomials(n in 0usize..30, x in -6.0f64..6.0) {
        let mut all = vec![0.0; n + 1];
        hermite_eval_all(n, x, &mut all);
        prop_assert_eq!(all[n], hermite_eval(n, x));
        let c = monomial_coeffs(n);
        prop_assert!(close(c.eval(x), all[n], 1e-9 * (1.0 + x.abs()).powi(n as i32)));
    }

    #[test]
    fn gauss_hermite_exact_for_low_degree(nodes in 1usize..40, k in 0usize..30) {
        prop_assume!(2 * k < 2 * nodes);
        // E[x^{2k}] = (2k-1)!!
        let rule = gauss_hermite_rule(nodes);
        let exact: f64 = (1..=k).map(|j| (2 * j - 1) as f64).product();
        prop_assert!(close(rule.integrate(|x| x.powi(2 * k as i32)), exact, 1e-9));
    }

    #[test]
    fn finite_sets_are_closed_and_nested(beta in prop::collection::vec(0.5f64..2.0, 1..4), e1 in 1e-6f64..0.3, e2 in 1e-6f64..0.3) {
        let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
        prop_assume!(hi < (-beta.iter().cloned().fold(0.0, f64::max)).exp());
        let big = lambda_eps_finite(&beta, lo).unwrap();
        let small = lambda_eps_finite(&beta, hi).unwrap();
        prop_assert!(big.is_downward_closed() && small.is_subset(&big));
    }

    #[test]
    fn weighted_sets_threshold(decay in 2.0f64..4.0, e in 1e-4f64..0.3) {
        let w = WeightSequence::algebraic(1.0, decay, 0.5, 1.0, 4.0).unwrap();
        let set = lambda_eps_weighted(&w, e, None).unwrap();
        prop_assert!(set.is_downward_closed());
        for nu in set.iter() {
            prop_assert!((-cnu_weight(nu, &w)).exp() >= e);
            for j in 1..=set.support().last().copied().unwrap_or(0) + 1 {
                let next = nu.plus_unit(j);
                if !set.contains(&next) {
                    prop_assert!((-cnu_weight(&next, &w)).exp() < e);
                }
            }
        }
    }

    #[test]
    fn repu_polynomials_are_exact(c in prop::collection::vec(-2.0f64..2.0, 1..6), x in -3.0f64..3.0, y in -3.0f64..3.0) {
        let terms: Vec<(MultiIndex, f64)> = c
            .iter()
            .enumerate()
            .map(|(i, &v)| (MultiIndex::from_dense(&[i as u32, (c.len() - 1 - i) as u32]), v))
            .collect();
        let net = repu_exact_poly(&terms, 2).unwrap();
        let exact: f64 = terms
            .iter()
            .map(|(nu, v)| v * x.powi(nu.get(1) as i32) * y.powi(nu.get(2) as i32))
            .sum();
        let inputs = [x, y];
        let got = net.evaluate(&inputs[..net.input_dim()]).unwrap()[0];
        prop_assert!(close(got, exact, 1e-9));
    }

    #[test]
    fn fem_solution_positive_and_scaled(y in prop::collection::vec(-2.0f64..2.0, 1..8), c in -1.0f64..1.0) {
        let cfg = Pde1dConfig::new(32).unwrap();
        let kl = KLExpansion::sine(3.0, 8).unwrap();
        let s = PdeSolver::new(&cfg, &kl);
        let u = s.solve(&y).unwrap();
        prop_assert!(u[1..32].iter().all(|&v| v > 0.0));
        let (e, l) = s.energy_and_load(&y, &u);
        prop_assert!(close(e, l, 1e-10));
        let a: Vec<f64> = s.coefficient(&y).iter().map(|v| v * c.exp()).collect();
        let uc = s.solve_with(&a).unwrap();
        for (p, q) in uc.iter().zip(&u) {
            prop_assert!(close(*p, q * (-c).exp(), 1e-12));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn emulator_vanishes_outside_cutoff(n in 0usize..7, x in 0.0f64..50.0) {
        let h = hermite_net_auto(n, 1e-2).unwrap();
        let m = h.meta.m;
        prop_assert_eq!(h.eval(m + 1.0 + x), 0.0);
        prop_assert_eq!(h.eval(-m - 1.0 - x), 0.0);
        prop_assert!(h.eval(x.min(m + 1.0)).abs() <= h.meta.sup_bound);
    }

    #[test]
    fn exec_modes_agree(bp in pwl()) {
        let net = from_piecewise_linear(&bp).unwrap();
        let xs: Vec<f64> = (0..5000).map(|i| -5.0 + i as f64 * 2e-3).collect();
        let a = net.evaluate_batch(&xs, Exec::Parallel).unwrap();
        let b = net.evaluate_batch(&xs, Exec::Sequential).unwrap();
        prop_assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
}

#[test]
fn tensor_box_is_closed() {
    let b = DownwardClosedSet::tensor_box(&[2, 0, 3]);
    assert_eq!(b.len(), 12);
    assert!(b.is_downward_closed());
    assert!(DownwardClosedSet::new([MultiIndex::unit(2).plus_unit(2)]).is_err());
}
