//! Seeded samplers for unitaries and density matrices.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::matrix::{Operator, C64};

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn ginibre<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<C64> {
    DMatrix::from_fn(n, n, |_, _| C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)))
}

/// Haar-distributed unitary: QR of a complex Gaussian matrix with the phases of R's
/// diagonal moved into Q.
pub fn unitary<R: Rng + ?Sized>(dims: Vec<usize>, rng: &mut R) -> Operator {
    let n = dims.iter().product();
    let qr = ginibre(n, rng).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for z in q.column_mut(j).iter_mut() {
            *z *= phase;
        }
    }
    Operator::new(dims, q).expect("square by construction")
}

/// Full-rank density matrix `G G^dag / Tr(G G^dag)` with `G` complex Gaussian.
pub fn density<R: Rng + ?Sized>(dims: Vec<usize>, rng: &mut R) -> Operator {
    let n = dims.iter().product();
    let g = ginibre(n, rng);
    let mut rho = &g * g.adjoint();
    let tr = rho.trace();
    rho /= tr;
    let rho = Operator::new(dims, rho).expect("square by construction");
    // exact Hermiticity
    Operator::new(rho.dims().to_vec(), (rho.data() + rho.data().adjoint()) * C64::new(0.5, 0.0)).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{is_psd, HERMITIAN_TOL};

    #[test]
    fn samples_are_valid_and_reproducible() {
        let mut rng = seeded(3);
        let u = unitary(vec![2, 3], &mut rng);
        assert!(u.unitarity_error() < 1e-12);
        let rho = density(vec![4], &mut rng);
        assert!(rho.is_hermitian(HERMITIAN_TOL));
        assert!((rho.trace().re - 1.0).abs() < 1e-14);
        assert!(is_psd(&rho, 1e-14).unwrap());
        assert_eq!(unitary(vec![3], &mut seeded(9)), unitary(vec![3], &mut seeded(9)));
    }
}
