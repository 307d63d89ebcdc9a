//! Randomized invariants of the certificate searches, the solver and the applications.

mod common;

use matcube::apps::{maxcut_bound, stability_radius, CutMethod, UncertainLinearSystem, WeightedGraph};
use matcube::cube::{bental_test, quad_test, verify_certificate, vertex_oracle, MatrixCubeInstance, Relaxation};
use matcube::numerics::{min_eig, SymMatrix};
use matcube::sdp::{solve, LmiSystem, SdpProblem, SolveOptions, Verdict};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{normal, random_instance, random_psd, random_sym};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        rng_seed: proptest::test_runner::RngSeed::Fixed(20251014),
        ..ProptestConfig::default()
    }
}

fn instance_from_seed(seed: u64, max_n: usize, max_m: usize) -> MatrixCubeInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=max_n);
    let m = rng.random_range(1..=max_m);
    let psd = rng.random_bool(0.3);
    random_instance(&mut rng, n, m, psd)
}

fn verdict_of(inst: &MatrixCubeInstance, kind: Relaxation) -> Verdict {
    match kind {
        Relaxation::Quadratic => quad_test(inst).unwrap().verdict,
        _ => bental_test(inst).unwrap().verdict,
    }
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn certificates_are_sound(seed in any::<u64>()) {
        let inst = instance_from_seed(seed, 6, 8);
        let lam = vertex_oracle(&inst).unwrap().min_lambda;
        let scale = inst.coeff_scale().max(1.0);
        for r in [quad_test(&inst).unwrap(), bental_test(&inst).unwrap()] {
            if let Some(cert) = &r.certificate {
                prop_assert!(verify_certificate(&inst, cert).unwrap().valid);
                prop_assert!(lam >= -1e-6 * scale, "certified but vertex min {lam}");
            }
        }
    }

    #[test]
    fn hierarchy_holds(seed in any::<u64>()) {
        let inst = instance_from_seed(seed, 5, 6);
        let b = bental_test(&inst).unwrap().certified();
        let q = quad_test(&inst).unwrap().certified();
        let lam = vertex_oracle(&inst).unwrap().min_lambda;
        prop_assert!(!b || q, "Ben-Tal certified but quadratic not");
        prop_assert!(!q || lam >= -1e-6 * inst.coeff_scale().max(1.0));
    }

    #[test]
    fn verdicts_are_scale_invariant(seed in any::<u64>(), log_l in -2.0f64..2.0) {
        let inst = instance_from_seed(seed, 4, 4);
        let scaled = inst.scaled(10f64.powf(log_l));
        for kind in [Relaxation::Quadratic, Relaxation::BenTal] {
            prop_assert_eq!(verdict_of(&inst, kind), verdict_of(&scaled, kind));
        }
    }

    #[test]
    fn radius_folding_is_verdict_equivalent(seed in any::<u64>(), r in 0.1f64..3.0) {
        let base = instance_from_seed(seed, 4, 3);
        let with_r = MatrixCubeInstance::new(base.raw().to_vec(), r).unwrap();
        let folded = MatrixCubeInstance::unit(with_r.normalized()).unwrap();
        let (a, b) = (vertex_oracle(&with_r).unwrap(), vertex_oracle(&folded).unwrap());
        prop_assert!((a.min_lambda - b.min_lambda).abs() <= 1e-12 * (1.0 + a.min_lambda.abs()));
        prop_assert_eq!(verdict_of(&with_r, Relaxation::Quadratic), verdict_of(&folded, Relaxation::Quadratic));
    }
}

/// Strictly feasible SDP built from `X0 ≻ 0`, `Z0 ≻ 0`.
fn constructed_sdp(rng: &mut ChaCha8Rng) -> SdpProblem {
    let nb = rng.random_range(1..=3);
    let dims: Vec<usize> = (0..nb).map(|_| rng.random_range(1..=6)).collect();
    let x0: Vec<SymMatrix> = dims.iter().map(|&d| &random_psd(rng, d) + &SymMatrix::identity(d).scale(0.5)).collect();
    let mut c: Vec<SymMatrix> = dims.iter().map(|&d| &random_psd(rng, d) + &SymMatrix::identity(d).scale(0.5)).collect();
    let mut p = SdpProblem::new(dims.clone());
    for _ in 0..rng.random_range(0..=20) {
        let y = normal(rng);
        let parts: Vec<(usize, SymMatrix)> = (0..nb).map(|b| (b, random_sym(rng, dims[b]))).collect();
        let rhs: f64 = parts.iter().map(|(b, a)| a.dot(&x0[*b])).sum();
        for (b, a) in &parts {
            c[*b] = &c[*b] + &a.scale(y);
        }
        p.add_dense_constraint(parts, rhs);
    }
    p.objective = c;
    p
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn weak_duality_at_every_iterate(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = constructed_sdp(&mut rng);
        let sol = solve(&p, &SolveOptions::default()).unwrap();
        prop_assert!(sol.is_optimal(), "{:?}", sol.status);
        for it in &sol.trace {
            let scale = 1.0 + it.primal_obj.abs() + it.dual_obj.abs();
            // The gap splits into complementarity plus residual terms.
            let split = it.complementarity - it.residual_y + it.residual_x;
            prop_assert!((it.primal_obj - it.dual_obj - split).abs() <= 1e-8 * scale.max(it.complementarity));
            prop_assert!(it.complementarity >= 0.0);
            // Infeasible iterates carry no duality guarantee beyond the split above.
            if it.primal_infeas <= 1e-9 && it.dual_infeas <= 1e-9 {
                prop_assert!(it.primal_obj >= it.dual_obj - 1e-9 * scale, "iterate {}: {} < {}", it.iteration, it.primal_obj, it.dual_obj);
            }
        }
    }

    #[test]
    fn margin_sign_is_scale_invariant(seed in any::<u64>(), log_l in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = rng.random_range(1..=4);
        let f0 = random_sym(&mut rng, d);
        let fk: Vec<SymMatrix> = (0..rng.random_range(1..=4)).map(|_| random_sym(&mut rng, d)).collect();
        let build = |s: f64| {
            let mut sys = LmiSystem::new();
            let vars: Vec<usize> = fk.iter().map(|_| sys.add_var()).collect();
            let b = sys.add_block(d, true);
            sys.block_mut(b).add_constant_block(0, 0, &(f0.as_matrix() * s));
            for (v, f) in vars.iter().zip(&fk) {
                sys.block_mut(b).add_var_block(*v, 0, 0, &(f.as_matrix() * s));
            }
            // Keep the variables bounded.
            let cap = sys.add_block(2 * fk.len(), false);
            for (k, v) in vars.iter().enumerate() {
                sys.block_mut(cap).add_constant(2 * k, 2 * k, 1.0);
                sys.block_mut(cap).add_var(*v, 2 * k, 2 * k, 1.0);
                sys.block_mut(cap).add_constant(2 * k + 1, 2 * k + 1, 1.0);
                sys.block_mut(cap).add_var(*v, 2 * k + 1, 2 * k + 1, -1.0);
            }
            sys.solve_margin(&SolveOptions::default()).unwrap()
        };
        let a = build(1.0);
        let b = build(10f64.powf(log_l));
        prop_assume!(a.t_star.abs() > 1e-5 && b.t_star.abs() > 1e-5);
        prop_assert_eq!(a.t_star > 0.0, b.t_star > 0.0);
    }
}

fn random_graph(rng: &mut ChaCha8Rng) -> WeightedGraph {
    let n = rng.random_range(2..=7);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random_bool(0.6) {
                edges.push((i, j, rng.random_range(0.5..2.0)));
            }
        }
    }
    if edges.is_empty() {
        edges.push((0, 1, 1.0));
    }
    WeightedGraph::new(n, edges).unwrap()
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn cut_bounds_are_sound(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng);
        let exact = maxcut_bound(&g, CutMethod::Exact, 0).unwrap().capacity_bound;
        let tol = 1e-5 * g.total_weight();
        for m in [CutMethod::Quad, CutMethod::Bental, CutMethod::GwSdp] {
            let b = maxcut_bound(&g, m, seed).unwrap();
            prop_assert!(exact <= b.capacity_bound + tol, "{m:?}: {} < {exact}", b.capacity_bound);
            for (cut, v) in b.cuts.iter().zip(&b.cut_values) {
                prop_assert!((g.cut_value(cut) - v).abs() < 1e-12);
                prop_assert!(*v <= exact + 1e-6);
            }
            if !b.cuts.is_empty() && b.diagnostic.is_none() {
                // Rank condition held: the extracted cuts are optimal.
                prop_assert!(b.cut_values.iter().all(|v| (v - exact).abs() <= 1e-6), "{:?} vs {exact}", b.cut_values);
            }
        }
    }
}

proptest! {
    #![proptest_config(config(8))]

    #[test]
    fn stability_radii_are_ordered(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..=3);
        let m = rng.random_range(1..=3);
        let mut a = vec![DMatrix::identity(n, n) * -2.0 + DMatrix::from_fn(n, n, |_, _| 0.3 * normal(&mut rng))];
        a.extend((0..m).map(|_| DMatrix::from_fn(n, n, |_, _| normal(&mut rng))));
        let sys = UncertainLinearSystem::new(a).unwrap();
        let tol = 1e-3;
        let re = stability_radius(&sys, Relaxation::Vertex, tol).unwrap();
        let rs = stability_radius(&sys, Relaxation::Quadratic, tol).unwrap();
        let rt = stability_radius(&sys, Relaxation::BenTal, tol).unwrap();
        prop_assert!(rt.radius <= rs.radius + tol && rs.radius <= re.radius + tol, "{} {} {}", rt.radius, rs.radius, re.radius);
        if let Some(p) = &re.lyapunov {
            prop_assert!(min_eig(p).unwrap() > 0.0);
            prop_assert!((p.trace() - n as f64).abs() < 1e-6);
        }
    }
}
