// Copyright 2026 Diad Contributors
// SPDX-License-Identifier: Apache-2.0

//! Hermitian eigendecomposition with ascending energies and a fixed gauge.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::models::HermitianMatrix;

/// Eigenvalues (ascending) and gauge-fixed eigenvectors of one Hamiltonian.
///
/// Column `k` of `states` belongs to `energies[k]`. In every column the entry
/// of largest magnitude is real and nonnegative (lowest row index wins ties).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    energies: Vec<f64>,
    states: DMatrix<Complex64>,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn energy(&self, k: usize) -> f64 {
        self.energies[k]
    }

    pub fn states(&self) -> &DMatrix<Complex64> {
        &self.states
    }

    /// Eigenvector `k` as an owned column.
    pub fn state(&self, k: usize) -> DVector<Complex64> {
        self.states.column(k).into_owned()
    }

    /// Largest absolute eigenvalue; the reference scale for degeneracy tests.
    pub fn energy_scale(&self) -> f64 {
        self.energies.iter().fold(0.0, |acc, e| acc.max(e.abs()))
    }

    /// Builds a spectrum from explicit parts without re-fixing the gauge.
    /// Intended for tests that probe gauge independence.
    pub fn from_parts_unchecked(energies: Vec<f64>, states: DMatrix<Complex64>) -> Self {
        Spectrum { energies, states }
    }
}

/// Raw decomposition, ascending but without gauge fixing.
pub(crate) fn eigh_sorted(h: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let eig = SymmetricEigen::new(h.clone());
    let d = h.nrows();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let energies = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let states = DMatrix::from_fn(d, d, |i, j| eig.eigenvectors[(i, order[j])]);
    (energies, states)
}

/// Relative margin under which two magnitudes count as tied.
const GAUGE_TIE: f64 = 1e-10;

/// Row of the gauge-defining entry: largest magnitude, lowest index on ties.
pub(crate) fn gauge_row<'a>(col: impl IntoIterator<Item = &'a Complex64>) -> usize {
    let mut best = 0;
    let mut best_mag = -1.0;
    for (i, z) in col.into_iter().enumerate() {
        let mag = z.norm();
        if mag > best_mag * (1.0 + GAUGE_TIE) {
            best = i;
            best_mag = mag;
        }
    }
    best
}

fn fix_gauge(states: &mut DMatrix<Complex64>) {
    for mut col in states.column_iter_mut() {
        let best = gauge_row(col.iter());
        let best_mag = col[best].norm();
        if best_mag > 0.0 {
            let phase = col[best].conj() / best_mag;
            for z in col.iter_mut() {
                *z *= phase;
            }
            col[best] = Complex64::new(col[best].re, 0.0);
        }
    }
}

/// Eigendecomposition with ascending energies and gauge-fixed eigenvectors.
///
/// Deterministic: identical input gives bitwise-identical output.
pub fn eigendecompose(h: &HermitianMatrix) -> Spectrum {
    let (energies, mut states) = eigh_sorted(h.as_matrix());
    fix_gauge(&mut states);
    Spectrum { energies, states }
}

/// Greedy level matching between consecutive spectra.
///
/// Returns `perm` with `perm[k]` the column of `cur` assigned to column `k`
/// of `prev`, chosen by descending overlap `|⟨prev_k|cur_j⟩|²` with each
/// column used once.
pub fn match_levels(prev: &Spectrum, cur: &Spectrum) -> Vec<usize> {
    let d = prev.dim();
    assert_eq!(d, cur.dim(), "match_levels: dimension mismatch");
    let overlaps = prev.states.adjoint() * &cur.states;
    let mut pairs: Vec<(f64, usize, usize)> = (0..d)
        .flat_map(|k| (0..d).map(move |j| (k, j)))
        .map(|(k, j)| (overlaps[(k, j)].norm_sqr(), k, j))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut perm = vec![usize::MAX; d];
    let mut used = vec![false; d];
    for (_, k, j) in pairs {
        if perm[k] == usize::MAX && !used[j] {
            perm[k] = j;
            used[j] = true;
        }
    }
    perm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelSpec;
    use proptest::prelude::*;

    fn random_hermitian(d: usize, entries: &[f64]) -> HermitianMatrix {
        let mut m = DMatrix::<Complex64>::zeros(d, d);
        let mut it = entries.iter().copied();
        for i in 0..d {
            m[(i, i)] = Complex64::new(it.next().unwrap(), 0.0);
            for j in (i + 1)..d {
                let z = Complex64::new(it.next().unwrap(), it.next().unwrap());
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        HermitianMatrix::new(m).unwrap()
    }

    fn check_invariants(h: &HermitianMatrix, s: &Spectrum) {
        let d = h.dim();
        let scale = h.max_abs().max(1.0);
        for w in s.energies().windows(2) {
            assert!(w[0] <= w[1]);
        }
        for k in 0..d {
            let v = s.state(k);
            let r = h.as_matrix() * &v - &v * Complex64::new(s.energy(k), 0.0);
            assert!(
                r.norm() <= 1e-10 * scale * d as f64,
                "residual {}",
                r.norm()
            );
            let imax = gauge_row(v.iter());
            assert_eq!(v[imax].im, 0.0);
            assert!(v[imax].re >= 0.0);
        }
        let gram = s.states().adjoint() * s.states();
        for i in 0..d {
            for j in 0..d {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - Complex64::new(target, 0.0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn sigma_x() {
        let h = HermitianMatrix::from_real_rows(2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        let s = eigendecompose(&h);
        assert!((s.energy(0) + 1.0).abs() < 1e-14);
        assert!((s.energy(1) - 1.0).abs() < 1e-14);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let v0 = s.state(0);
        let v1 = s.state(1);
        // Both entries have equal magnitude; the tie goes to row 0.
        assert!((v0[0] - Complex64::new(r, 0.0)).norm() < 1e-14);
        assert!((v0[1] - Complex64::new(-r, 0.0)).norm() < 1e-14);
        assert!((v1[0] - Complex64::new(r, 0.0)).norm() < 1e-14);
        assert!((v1[1] - Complex64::new(r, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn landau_zener_energies() {
        let m = ModelSpec::landau_zener(4.0, [-1.0, 1.0]).unwrap();
        let s = eigendecompose(&m.hamiltonian(3.0));
        assert!((s.energy(0) + 5.0).abs() < 1e-13);
        assert!((s.energy(1) - 5.0).abs() < 1e-13);
    }

    #[test]
    fn degenerate_identity() {
        let h = HermitianMatrix::diagonal(&[1.0, 1.0, 1.0]);
        let s = eigendecompose(&h);
        assert_eq!(s.energies(), &[1.0, 1.0, 1.0]);
        check_invariants(&h, &s);
    }

    #[test]
    fn match_identity_and_swap() {
        let h = HermitianMatrix::from_real_rows(3, &[1.0, 0.2, 0.0, 0.2, 2.0, 0.1, 0.0, 0.1, 4.0])
            .unwrap();
        let s = eigendecompose(&h);
        assert_eq!(match_levels(&s, &s), vec![0, 1, 2]);

        let mut swapped = s.states().clone();
        swapped.swap_columns(0, 1);
        let mut e = s.energies().to_vec();
        e.swap(0, 1);
        let t = Spectrum::from_parts_unchecked(e, swapped);
        assert_eq!(match_levels(&s, &t), vec![1, 0, 2]);
    }

    #[test]
    fn match_across_landau_zener_crossing() {
        let x = 0.01;
        let m = ModelSpec::landau_zener(x, [-1.0, 1.0]).unwrap();
        let before = eigendecompose(&m.hamiltonian(-5.0 * x));
        let after = eigendecompose(&m.hamiltonian(5.0 * x));
        assert_eq!(match_levels(&before, &after), vec![1, 0]);
    }

    #[test]
    fn deterministic_bitwise() {
        let h = random_hermitian(
            5,
            &(0..25)
                .map(|k| (k as f64 * 0.731).sin())
                .collect::<Vec<_>>(),
        );
        let a = eigendecompose(&h);
        let b = eigendecompose(&h);
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn reconstruction_and_invariants(d in 2usize..=5, entries in prop::collection::vec(-3.0f64..3.0, 25)) {
            let h = random_hermitian(d, &entries);
            let s = eigendecompose(&h);
            check_invariants(&h, &s);
            let diag = DMatrix::from_diagonal(&DVector::from_iterator(
                d, s.energies().iter().map(|&e| Complex64::new(e, 0.0))));
            let rec = s.states() * diag * s.states().adjoint();
            let err = (rec - h.as_matrix()).iter().fold(0.0f64, |a, z| a.max(z.norm()));
            prop_assert!(err <= 1e-9 * h.max_abs().max(1.0));
        }
    }
}
