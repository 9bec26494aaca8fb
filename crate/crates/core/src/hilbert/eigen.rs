//! Hermitian eigen-decomposition by cyclic Jacobi sweeps.

use super::matrix::{ComplexMatrix, C64};

const MAX_SWEEPS: usize = 64;

/// Eigenvalues in ascending order with unit eigenvectors stored as matrix columns.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    /// V diag(values) V†
    pub fn reconstruct(&self, values: &[f64]) -> ComplexMatrix {
        let n = self.vectors.dim();
        ComplexMatrix::from_fn(n, |i, j| {
            (0..n)
                .map(|k| self.vectors.get(i, k) * values[k] * self.vectors.get(j, k).conj())
                .sum()
        })
    }
}

/// Decomposes the Hermitian part of `a`. Only the upper triangle is trusted.
pub fn hermitian_eigen(a: &ComplexMatrix) -> HermitianEigen {
    let n = a.dim();
    let mut m = a.hermitian_part();
    let mut v = ComplexMatrix::identity(n);

    let total: f64 = m.as_slice().iter().map(|z| z.norm_sqr()).sum();
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m.get(i, j).norm_sqr())
            .sum();
        if off <= 1e-32 * total || off < 1e-300 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut m, &mut v, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| m.get(i, i).re).collect();
    order.sort_by(|&x, &y| diag[x].total_cmp(&diag[y]));
    let values = order.iter().map(|&k| diag[k]).collect();
    let vectors = ComplexMatrix::from_fn(n, |i, j| v.get(i, order[j]));
    HermitianEigen { values, vectors }
}

fn rotate(m: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let apq = m.get(p, q);
    let r = apq.norm();
    if r < 1e-300 {
        return;
    }
    let phase = apq / r;
    let app = m.get(p, p).re;
    let aqq = m.get(q, q).re;
    let theta = (aqq - app) / (2.0 * r);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    // U = diag(1, conj(phase)) · [[c, s], [-s, c]]
    let u_pp = C64::new(c, 0.0);
    let u_pq = C64::new(s, 0.0);
    let u_qp = -phase.conj() * s;
    let u_qq = phase.conj() * c;

    let n = m.dim();
    for k in 0..n {
        let (mp, mq) = (m.get(k, p), m.get(k, q));
        m.set(k, p, mp * u_pp + mq * u_qp);
        m.set(k, q, mp * u_pq + mq * u_qq);
        let (vp, vq) = (v.get(k, p), v.get(k, q));
        v.set(k, p, vp * u_pp + vq * u_qp);
        v.set(k, q, vp * u_pq + vq * u_qq);
    }
    for k in 0..n {
        let (mp, mq) = (m.get(p, k), m.get(q, k));
        m.set(p, k, u_pp.conj() * mp + u_qp.conj() * mq);
        m.set(q, k, u_pq.conj() * mp + u_qq.conj() * mq);
    }
    m.set(p, q, C64::new(0.0, 0.0));
    m.set(q, p, C64::new(0.0, 0.0));
    m.set(p, p, C64::new(app - t * r, 0.0));
    m.set(q, q, C64::new(aqq + t * r, 0.0));
}

/// Smallest eigenvalue of the Hermitian part of `a`; closed form for dimensions 1 and 2.
pub fn min_eigenvalue(a: &ComplexMatrix) -> f64 {
    match a.dim() {
        1 => a.get(0, 0).re,
        2 => {
            let x = a.get(0, 0).re;
            let y = a.get(1, 1).re;
            let b = (a.get(0, 1) + a.get(1, 0).conj()) * 0.5;
            let half_gap = (0.25 * (x - y) * (x - y) + b.norm_sqr()).sqrt();
            0.5 * (x + y) - half_gap
        }
        _ => hermitian_eigen(a).values[0],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::pauli;

    fn random_hermitian(n: usize, seed: u64) -> ComplexMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let raw = ComplexMatrix::from_fn(n, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        raw.hermitian_part()
    }

    #[test]
    fn pauli_spectra() {
        for s in [pauli::sigma_x(), pauli::sigma_y(), pauli::sigma_z()] {
            let e = hermitian_eigen(&s);
            assert!((e.values[0] + 1.0).abs() < 1e-14);
            assert!((e.values[1] - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn reconstruction_and_orthonormality() {
        for n in 1..=6 {
            for seed in 0..5 {
                let a = random_hermitian(n, seed * 31 + n as u64);
                let e = hermitian_eigen(&a);
                let back = e.reconstruct(&e.values);
                assert!((&back - &a).max_abs() < 1e-12, "n={n}");
                let gram = &e.vectors.adjoint() * &e.vectors;
                assert!((&gram - &ComplexMatrix::identity(n)).max_abs() < 1e-12);
                assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
                assert!((min_eigenvalue(&a) - e.values[0]).abs() < 1e-12);
            }
        }
    }
}
