//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p matcube --test acceptance`. A criterion name can be
//! given to run only that one, e.g. `cargo test --test acceptance -- 6`.

mod common;

use std::time::{Duration, Instant};

use matcube::apps::{bqp_brute_force, bqp_lower_bound, maxcut_bound, stability_radius, CutMethod, UncertainLinearSystem, WeightedGraph};
use matcube::cube::dual::DEFAULT_RANK_TOL;
use matcube::cube::{
    bental_test, construct_full_certificate, dual_solve, quad_test, rank_one_extract, verify_certificate, vertex_oracle, Certificate,
    MatrixCubeInstance, Relaxation,
};
use matcube::numerics::{min_eig, SymMatrix};
use matcube::sdp::{solve, LmiSystem, SdpProblem, SolveOptions};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{normal, random_instance, random_psd, random_sym, with_vertex_min};

// Pinned tolerances.
const K5_EXACT: f64 = 6.0;
const K5_QUAD: f64 = 6.25;
const K5_QUAD_TOL: f64 = 0.02;
const NON_MARGINAL: f64 = 1e-5;
const FULL_RESIDUAL: f64 = 1e-8;
const TOL_R: f64 = 1e-3;
const RATIO_MEAN_MIN: f64 = 0.9;
const ATOM_EIG_TOL: f64 = 1e-4;
const RECON_TOL: f64 = 1e-5;
const KKT_TOL: f64 = 1e-6;
const INFEASIBLE_MARGIN: f64 = -1e-6;
const BQP_TOL: f64 = 1e-6;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn c1_k5() -> Outcome {
    let g = WeightedGraph::complete(5);
    let exact = maxcut_bound(&g, CutMethod::Exact, 0).unwrap().capacity_bound;
    let quad = maxcut_bound(&g, CutMethod::Quad, 0).unwrap().capacity_bound;
    let gap = quad - exact;
    let pass = (exact - K5_EXACT).abs() < 1e-12 && (quad - K5_QUAD).abs() <= K5_QUAD_TOL && gap > K5_QUAD_TOL;
    outcome(pass, format!("exact={exact:.6} quad={quad:.6} gap={gap:.6}"))
}

/// Criterion 2 instances, reused by criterion 8.
fn m2_instances() -> Vec<MatrixCubeInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    (0..200)
        .map(|_| {
            let n = rng.random_range(1..=5);
            let m = rng.random_range(1..=2);
            random_instance(&mut rng, n, m, false)
        })
        .collect()
}

fn exactness(instances: &[MatrixCubeInstance]) -> Outcome {
    let mut checked = 0;
    let mut feasible = 0;
    let mut mismatches = Vec::new();
    for (k, inst) in instances.iter().enumerate() {
        let lam = vertex_oracle(inst).unwrap().min_lambda;
        if lam.abs() <= NON_MARGINAL {
            continue;
        }
        checked += 1;
        let r = quad_test(inst).unwrap();
        let certified = r.certificate.is_some();
        if lam > 0.0 {
            feasible += 1;
        }
        if certified != (lam > 0.0) {
            mismatches.push(format!("#{k} (min eig {lam:.3e}, margin {:.3e})", r.margin));
        }
    }
    outcome(
        mismatches.is_empty(),
        format!("{checked} non-marginal, {feasible} PSD, {} mismatches {}", mismatches.len(), mismatches.join(", ")),
    )
}

fn c2_m2() -> Outcome {
    exactness(&m2_instances())
}

fn c3_definite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let inst: Vec<_> = (0..200)
        .map(|_| {
            let n = rng.random_range(1..=5);
            let m = rng.random_range(1..=6);
            random_instance(&mut rng, n, m, true)
        })
        .collect();
    exactness(&inst)
}

fn c4_hierarchy() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut bental_ok = 0;
    let mut quad_ok = 0;
    let mut violations = Vec::new();
    for k in 0..500 {
        let n = rng.random_range(1..=5);
        let m = rng.random_range(1..=6);
        let inst = random_instance(&mut rng, n, m, false);
        let b = bental_test(&inst).unwrap().certificate.is_some();
        let q = quad_test(&inst).unwrap().certificate.is_some();
        bental_ok += b as usize;
        quad_ok += q as usize;
        if b && !q {
            violations.push(k);
        }
    }
    outcome(
        violations.is_empty(),
        format!("bental certified {bental_ok}, quad certified {quad_ok}, violations {violations:?}"),
    )
}

fn c5_full() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut bad = Vec::new();
    let mut closed = 0;
    let mut worst = 0.0f64;
    for k in 0..100 {
        let n = rng.random_range(1..=4);
        let m = rng.random_range(1..=4);
        let mut h = vec![random_sym(&mut rng, n)];
        h.extend((0..m).map(|_| random_sym(&mut rng, n)));
        let inst = with_vertex_min(&MatrixCubeInstance::unit(h).unwrap(), 0.5 * normal(&mut rng).abs());
        let cert = match construct_full_certificate(&inst) {
            Ok(c) => c,
            Err(e) => {
                bad.push(format!("#{k}: {e}"));
                continue;
            }
        };
        let r = verify_certificate(&inst, &cert).unwrap();
        let Certificate::Full { s0, s, path } = &cert else { unreachable!() };
        closed += (*path == matcube::cube::FullPath::ClosedForm) as usize;
        let scale = matcube::cube::g_poly(&inst).max_coeff_norm().max(1.0);
        worst = worst.max(r.residual / scale);
        let degree_ok = s.iter().all(|p| p.in_q1() && p.total_degree() as usize <= 2 * m);
        if !(r.valid && r.residual <= FULL_RESIDUAL * scale && s0.psd_margin().unwrap() >= -1e-8 && degree_ok) {
            bad.push(format!("#{k}: {r:?}"));
        }
    }
    outcome(
        bad.is_empty(),
        format!("100 instances, {closed} closed form, worst relative residual {worst:.2e}, failures {bad:?}"),
    )
}

fn c6_benchmark() -> Outcome {
    let sys = UncertainLinearSystem::benchmark();
    let re = stability_radius(&sys, Relaxation::Vertex, TOL_R).unwrap().radius;
    let rs = stability_radius(&sys, Relaxation::Quadratic, TOL_R).unwrap().radius;
    let rt = stability_radius(&sys, Relaxation::BenTal, TOL_R).unwrap().radius;
    let pass = rt <= rs + TOL_R && (rs - re).abs() <= 2.0 * TOL_R && rt < rs - TOL_R;
    outcome(pass, format!("R_e={re:.6} R_s={rs:.6} R_t={rt:.6}"))
}

fn c7_ratios() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut violations = Vec::new();
    let mut summary = Vec::new();
    let mut all_ratios = Vec::new();
    for m in 3..=6 {
        let mut ratios_s = Vec::new();
        let mut ratios_t = Vec::new();
        for k in 0..20 {
            let mut a = vec![DMatrix::identity(5, 5) * -4.0];
            a.extend((0..m).map(|_| DMatrix::from_fn(5, 5, |_, _| normal(&mut rng))));
            let sys = UncertainLinearSystem::new(a).unwrap();
            let re = stability_radius(&sys, Relaxation::Vertex, TOL_R).unwrap().radius;
            let rs = stability_radius(&sys, Relaxation::Quadratic, TOL_R).unwrap().radius;
            let rt = stability_radius(&sys, Relaxation::BenTal, TOL_R).unwrap().radius;
            if !(rt <= rs + TOL_R && rs <= re + TOL_R) {
                violations.push(format!("m={m} #{k}: {rt:.4} {rs:.4} {re:.4}"));
            }
            ratios_s.push(rs / re);
            ratios_t.push(rt / re);
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
        summary.push(format!(
            "m={m}: mean R_s/R_e={:.4} mean R_t/R_e={:.4} min R_t/R_e={:.4}",
            mean(&ratios_s),
            mean(&ratios_t),
            min(&ratios_t)
        ));
        all_ratios.extend(ratios_s);
    }
    let mean = all_ratios.iter().sum::<f64>() / all_ratios.len() as f64;
    outcome(
        violations.is_empty() && mean >= RATIO_MEAN_MIN,
        format!("mean R_s/R_e={mean:.4}; {}; ordering violations {violations:?}", summary.join("; ")),
    )
}

fn c8_extraction() -> Outcome {
    let mut infeasible = 0;
    let mut rank_ok = 0;
    let mut bad = Vec::new();
    for (k, inst) in m2_instances().iter().enumerate() {
        let v = vertex_oracle(inst).unwrap();
        if v.min_lambda >= -NON_MARGINAL {
            continue;
        }
        infeasible += 1;
        let d = dual_solve(inst).unwrap();
        let ex = rank_one_extract(&d, DEFAULT_RANK_TOL, 0).unwrap();
        if ex.rank != ex.rank_l00 {
            continue;
        }
        rank_ok += 1;
        if ex.atoms.is_empty() || ex.reconstruction_error > RECON_TOL {
            bad.push(format!("#{k}: {} atoms, error {:.2e}, {:?}", ex.atoms.len(), ex.reconstruction_error, ex.diagnostic));
            continue;
        }
        for a in &ex.atoms {
            let lam = min_eig(&inst.eval(&a.delta).unwrap()).unwrap();
            if (lam - v.min_lambda).abs() > ATOM_EIG_TOL {
                bad.push(format!("#{k}: atom {:?} gives {lam:.6} vs {:.6}", a.delta, v.min_lambda));
            }
        }
    }
    outcome(
        bad.is_empty() && rank_ok > 0,
        format!("{infeasible} infeasible, rank condition held on {rank_ok}, failures {bad:?}"),
    )
}

fn c9_solver() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let opts = SolveOptions::default();
    let mut worst = 0.0f64;
    let mut bad = Vec::new();
    for k in 0..200 {
        let nb = rng.random_range(1..=3);
        let dims: Vec<usize> = (0..nb).map(|_| rng.random_range(1..=6)).collect();
        let ncons = rng.random_range(0..=20);
        let x0: Vec<SymMatrix> = dims.iter().map(|&d| &random_psd(&mut rng, d) + &SymMatrix::identity(d).scale(0.5)).collect();
        let z0: Vec<SymMatrix> = dims.iter().map(|&d| &random_psd(&mut rng, d) + &SymMatrix::identity(d).scale(0.5)).collect();
        let mut p = SdpProblem::new(dims.clone());
        let mut c: Vec<SymMatrix> = z0.clone();
        for _ in 0..ncons {
            let y: f64 = normal(&mut rng);
            let parts: Vec<(usize, SymMatrix)> = (0..nb).map(|b| (b, random_sym(&mut rng, dims[b]))).collect();
            let rhs: f64 = parts.iter().map(|(b, a)| a.dot(&x0[*b])).sum();
            for (b, a) in &parts {
                c[*b] = &c[*b] + &a.scale(y);
            }
            p.add_dense_constraint(parts, rhs);
        }
        p.objective = c.clone();
        let sol = solve(&p, &opts).unwrap();
        // KKT residuals recomputed from the returned iterate.
        let bnorm = p.constraints.iter().map(|c| c.rhs.abs()).fold(0.0, f64::max);
        let mut pinf = 0.0f64;
        for con in &p.constraints {
            let ax: f64 = con.parts.iter().map(|(b, a)| a.dot(sol.x[*b].as_matrix())).sum();
            pinf = pinf.max((ax - con.rhs).abs());
        }
        pinf /= 1.0 + bnorm;
        let mut dres = 0.0;
        let mut cnorm = 0.0;
        for b in 0..nb {
            let mut r = c[b].as_matrix() - sol.z[b].as_matrix();
            for (k, con) in p.constraints.iter().enumerate() {
                for (bb, a) in &con.parts {
                    if *bb == b {
                        a.add_scaled_to(&mut r, -sol.y[k]);
                    }
                }
            }
            dres += r.norm_squared();
            cnorm += c[b].frobenius_norm().powi(2);
        }
        let dinf = dres.sqrt() / (1.0 + cnorm.sqrt());
        let gap = (sol.primal_obj - sol.dual_obj).abs() / (1.0 + sol.primal_obj.abs() + sol.dual_obj.abs());
        let psd = sol.x.iter().chain(&sol.z).all(|m| min_eig(m).unwrap() >= -1e-8 * m.frobenius_norm().max(1.0));
        let r = pinf.max(dinf).max(gap);
        worst = worst.max(r);
        if !sol.is_optimal() || r > KKT_TOL || !psd {
            bad.push(format!("#{k}: {:?} residual {r:.2e}", sol.status));
        }
    }

    let mut false_optimal = Vec::new();
    for k in 0..20 {
        // F(y) ⪰ 0 and −F(y) − cI ⪰ 0 cannot both hold.
        let d = rng.random_range(1..=5);
        let nv = rng.random_range(1..=6);
        let cshift = rng.random_range(0.1..1.0);
        let f0 = random_sym(&mut rng, d);
        let fk: Vec<SymMatrix> = (0..nv).map(|_| random_sym(&mut rng, d)).collect();
        let mut sys = LmiSystem::new();
        let vars: Vec<usize> = (0..nv).map(|_| sys.add_var()).collect();
        let b1 = sys.add_block(d, true);
        let b2 = sys.add_block(d, true);
        sys.block_mut(b1).add_constant_block(0, 0, f0.as_matrix());
        sys.block_mut(b2).add_constant_block(0, 0, &(-f0.as_matrix() - DMatrix::identity(d, d) * cshift));
        for (v, f) in vars.iter().zip(&fk) {
            sys.block_mut(b1).add_var_block(*v, 0, 0, f.as_matrix());
            sys.block_mut(b2).add_var_block(*v, 0, 0, &-f.as_matrix());
        }
        match sys.solve_margin(&opts) {
            Ok(r) if r.t_star <= INFEASIBLE_MARGIN => {}
            Ok(r) => false_optimal.push(format!("#{k}: t*={:.3e}", r.t_star)),
            Err(_) => {}
        }
    }
    outcome(
        bad.is_empty() && false_optimal.is_empty(),
        format!("worst KKT residual {worst:.2e}, failures {bad:?}; infeasible systems misreported {false_optimal:?}"),
    )
}

fn c10_bqp() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = 0.0f64;
    let mut bad = Vec::new();
    for k in 0..50 {
        let n = rng.random_range(1..=10);
        let b = DMatrix::from_fn(n, n, |_, _| normal(&mut rng));
        let a = SymMatrix::symmetrize(&(&b * b.transpose() + DMatrix::identity(n, n) * 0.1));
        let (brute, _) = bqp_brute_force(&a).unwrap();
        let got = bqp_lower_bound(&a, Relaxation::Vertex).unwrap().lower_bound;
        let err = (got - brute).abs();
        worst = worst.max(err);
        if err > BQP_TOL {
            bad.push(format!("#{k}: {got} vs {brute}"));
        }
    }
    outcome(bad.is_empty(), format!("worst |difference| {worst:.2e}, failures {bad:?}"))
}

type Criterion = (&'static str, &'static str, fn() -> Outcome, Duration);

fn main() {
    let criteria: [Criterion; 10] = [
        ("1", "K5 MAXCUT anchor", c1_k5, Duration::from_secs(10)),
        ("2", "quadratic exactness for m <= 2", c2_m2, Duration::from_secs(120)),
        ("3", "quadratic exactness for definite coefficients", c3_definite, Duration::from_secs(600)),
        ("4", "Ben-Tal certificates embed into quadratic ones", c4_hierarchy, Duration::from_secs(1800)),
        ("5", "degree-2m full certificates", c5_full, Duration::from_secs(300)),
        ("6", "two-parameter stability benchmark", c6_benchmark, Duration::from_secs(600)),
        ("7", "random stability ratio study", c7_ratios, Duration::from_secs(3600)),
        ("8", "rank-one dual extraction", c8_extraction, Duration::from_secs(600)),
        ("9", "SDP solver soundness", c9_solver, Duration::from_secs(600)),
        ("10", "BQP vertex equivalence", c10_bqp, Duration::from_secs(600)),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (id, name, run, budget) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == id) {
            continue;
        }
        let start = Instant::now();
        let out = run();
        let took = start.elapsed();
        let pass = out.pass && took <= budget;
        failed += (!pass) as usize;
        let timing = if took <= budget { String::new() } else { format!(" [over budget {budget:?}]") };
        println!(
            "criterion {id:>2} {}: {name} ({:.1}s){timing} {}",
            if pass { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            out.detail
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
