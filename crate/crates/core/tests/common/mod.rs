#![allow(dead_code)]

use matcube::cube::{vertex_oracle, MatrixCubeInstance};
use matcube::numerics::SymMatrix;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn random_sym(rng: &mut impl Rng, n: usize) -> SymMatrix {
    let mut a = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let v = normal(rng);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    SymMatrix::symmetrize(&a)
}

/// `B Bᵀ / k` with `B` an `n x k` Gaussian matrix, `1 ≤ k ≤ n`.
pub fn random_psd(rng: &mut impl Rng, n: usize) -> SymMatrix {
    let k = rng.random_range(1..=n);
    let b = DMatrix::from_fn(n, k, |_, _| normal(rng));
    SymMatrix::symmetrize(&(&b * b.transpose() / k as f64))
}

/// Shifts `H_0` so that the smallest vertex eigenvalue becomes `target`.
pub fn with_vertex_min(inst: &MatrixCubeInstance, target: f64) -> MatrixCubeInstance {
    let lam = vertex_oracle(inst).unwrap().min_lambda;
    inst.shifted(lam - target)
}

/// Random instance; `H_0` is shifted so the vertex minimum is `N(0, 1/4)`
/// (about half are PSD on the cube).
pub fn random_instance(rng: &mut impl Rng, n: usize, m: usize, psd_coeffs: bool) -> MatrixCubeInstance {
    let mut h = vec![random_sym(rng, n)];
    for _ in 0..m {
        h.push(if psd_coeffs { random_psd(rng, n) } else { random_sym(rng, n) });
    }
    let inst = MatrixCubeInstance::unit(h).unwrap();
    let target = 0.5 * normal(rng);
    with_vertex_min(&inst, target)
}
