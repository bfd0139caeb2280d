// Copyright 2026 Diad Contributors
// SPDX-License-Identifier: Apache-2.0

//! Model Hamiltonian families parameterized by a single swept control.
//!
//! Three families are provided:
//!
//! * Landau-Zener: `H(z) = z σ_z + x σ_x`, control `z`, unit `x`.
//! * Double-quantum-dot spin-to-charge conversion: the 5×5 projected
//!   Fermi-Hubbard-Zeeman matrix in the basis
//!   `{|↑↓,·⟩, |↑,↑⟩, |↑,↓⟩, |↓,↑⟩, |↓,↓⟩}`, control `ε`, unit `t_c`.
//! * Bucket-brigade shuttling between two silicon dots with valley
//!   degrees of freedom (4×4), control `ε`, unit `|Δ_L|`.
//!
//! Every family is affine in its control, so the gradient `∂H/∂control`
//! is a constant matrix.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{DiadError, Result};

/// Absolute tolerance for the Hermiticity check.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Dense Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(DMatrix<Complex64>);

impl HermitianMatrix {
    /// Wraps `m` after checking it is square and Hermitian to [`HERMITIAN_TOL`].
    pub fn new(m: DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(DiadError::Validation(format!(
                "matrix is {}x{}, expected square",
                m.nrows(),
                m.ncols()
            )));
        }
        let d = m.nrows();
        for i in 0..d {
            for j in i..d {
                let a = m[(i, j)];
                let b = m[(j, i)].conj();
                if !a.re.is_finite() || !a.im.is_finite() {
                    return Err(DiadError::Validation(format!(
                        "non-finite entry at ({i},{j})"
                    )));
                }
                if (a - b).norm() > HERMITIAN_TOL {
                    return Err(DiadError::Validation(format!(
                        "matrix is not Hermitian: entry ({i},{j}) = {a} but conj(({j},{i})) = {b}"
                    )));
                }
            }
        }
        Ok(HermitianMatrix(m))
    }

    /// Real symmetric matrix from row-major entries.
    pub fn from_real_rows(d: usize, rows: &[f64]) -> Result<Self> {
        if rows.len() != d * d {
            return Err(DiadError::Validation(format!(
                "expected {} entries, got {}",
                d * d,
                rows.len()
            )));
        }
        Self::new(DMatrix::from_row_iterator(
            d,
            d,
            rows.iter().map(|&v| Complex64::new(v, 0.0)),
        ))
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let d = values.len();
        let mut m = DMatrix::zeros(d, d);
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = Complex64::new(v, 0.0);
        }
        HermitianMatrix(m)
    }

    pub fn zeros(d: usize) -> Self {
        HermitianMatrix(DMatrix::zeros(d, d))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.0
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.0[(i, j)]
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    /// Multiplies by a real scalar (stays Hermitian).
    pub fn scaled(&self, c: f64) -> Self {
        HermitianMatrix(self.0.map(|z| z * c))
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, other: &HermitianMatrix, c: f64) -> Self {
        HermitianMatrix(&self.0 + other.0.map(|z| z * c))
    }

    /// Conjugates by a unitary: `U H U†`.
    pub fn conjugated_by(&self, u: &DMatrix<Complex64>) -> Self {
        HermitianMatrix(u * &self.0 * u.adjoint())
    }

    /// Entrywise maximum distance to `other`.
    pub fn max_abs_diff(&self, other: &HermitianMatrix) -> f64 {
        (&self.0 - &other.0)
            .iter()
            .fold(0.0, |acc, z| acc.max(z.norm()))
    }
}

/// Variant tag of a model family, as it appears in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelTag {
    LandauZener,
    DqdInit,
    BucketBrigade,
}

impl ModelTag {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelTag::LandauZener => "landau_zener",
            ModelTag::DqdInit => "dqd_init",
            ModelTag::BucketBrigade => "bucket_brigade",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            ModelTag::LandauZener => 2,
            ModelTag::DqdInit => 5,
            ModelTag::BucketBrigade => 4,
        }
    }
}

impl fmt::Display for ModelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelTag {
    type Err = DiadError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "landau_zener" => Ok(ModelTag::LandauZener),
            "dqd_init" => Ok(ModelTag::DqdInit),
            "bucket_brigade" => Ok(ModelTag::BucketBrigade),
            other => Err(DiadError::Config(format!(
                "unknown model variant `{other}` (expected landau_zener, dqd_init or bucket_brigade)"
            ))),
        }
    }
}

/// Constants of the 5×5 double-dot initialization model.
#[derive(Debug, Clone, Copy, PartialEq, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DqdParams {
    /// Tunnel coupling.
    pub t_c: f64,
    /// Effective Coulomb repulsion Ũ.
    pub u_tilde: f64,
    /// Total Zeeman energy.
    pub e_z: f64,
    /// Zeeman energy difference.
    pub delta_e_z: f64,
    /// Spin-flip coupling.
    pub delta_e_x: f64,
}

impl DqdParams {
    /// Initialization constants of the reference study, in units of `t_c`.
    pub fn reference() -> Self {
        DqdParams {
            t_c: 1.0,
            u_tilde: 10.0,
            e_z: 0.9,
            delta_e_z: 0.1,
            delta_e_x: 0.01,
        }
    }
}

/// Constants of the 4×4 bucket-brigade shuttling model.
#[derive(Debug, Clone, Copy, PartialEq, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BucketBrigadeParams {
    pub t_c: f64,
    /// Valley coupling magnitude |Δ_L| in the left dot.
    pub delta_l: f64,
    /// Valley coupling magnitude |Δ_R| in the right dot.
    pub delta_r: f64,
    /// Valley phase of the left dot (radians).
    pub phi_l: f64,
    /// Valley phase of the right dot (radians).
    pub phi_r: f64,
}

impl Default for DqdParams {
    fn default() -> Self {
        Self::reference()
    }
}

impl Default for BucketBrigadeParams {
    fn default() -> Self {
        Self::reference()
    }
}

impl BucketBrigadeParams {
    /// Shuttling constants of the reference study, in units of |Δ_L|.
    pub fn reference() -> Self {
        BucketBrigadeParams {
            t_c: 0.1,
            delta_l: 1.0,
            delta_r: 5.0,
            phi_l: 0.1,
            phi_r: std::f64::consts::FRAC_PI_2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelKind {
    /// Transverse coupling `x`.
    LandauZener {
        x: f64,
    },
    DqdInit(DqdParams),
    BucketBrigade(BucketBrigadeParams),
}

impl ModelKind {
    pub fn tag(&self) -> ModelTag {
        match self {
            ModelKind::LandauZener { .. } => ModelTag::LandauZener,
            ModelKind::DqdInit(_) => ModelTag::DqdInit,
            ModelKind::BucketBrigade(_) => ModelTag::BucketBrigade,
        }
    }
}

/// A model family with its constants and the swept control range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    kind: ModelKind,
    control_range: [f64; 2],
}

impl ModelSpec {
    pub fn new(kind: ModelKind, control_range: [f64; 2]) -> Result<Self> {
        let spec = ModelSpec {
            kind,
            control_range,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn landau_zener(x: f64, control_range: [f64; 2]) -> Result<Self> {
        Self::new(ModelKind::LandauZener { x }, control_range)
    }

    pub fn dqd_init(params: DqdParams, control_range: [f64; 2]) -> Result<Self> {
        Self::new(ModelKind::DqdInit(params), control_range)
    }

    pub fn bucket_brigade(params: BucketBrigadeParams, control_range: [f64; 2]) -> Result<Self> {
        Self::new(ModelKind::BucketBrigade(params), control_range)
    }

    fn validate(&self) -> Result<()> {
        let [a, b] = self.control_range;
        if !a.is_finite() || !b.is_finite() {
            return Err(DiadError::Config("control_range must be finite".into()));
        }
        if a == b {
            return Err(DiadError::Config(
                "control_range endpoints must be distinct".into(),
            ));
        }
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(DiadError::Config(format!("model.{name} must be finite")))
            }
        };
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(DiadError::Config(format!(
                    "model.{name} must be positive (it sets the energy unit)"
                )))
            }
        };
        match self.kind {
            ModelKind::LandauZener { x } => positive("x", x),
            ModelKind::DqdInit(p) => {
                positive("t_c", p.t_c)?;
                finite("u_tilde", p.u_tilde)?;
                finite("e_z", p.e_z)?;
                finite("delta_e_z", p.delta_e_z)?;
                finite("delta_e_x", p.delta_e_x)
            }
            ModelKind::BucketBrigade(p) => {
                positive("delta_l", p.delta_l)?;
                finite("t_c", p.t_c)?;
                finite("phi_l", p.phi_l)?;
                finite("phi_r", p.phi_r)?;
                if !(p.delta_r >= 0.0 && p.delta_r.is_finite()) {
                    return Err(DiadError::Config(
                        "model.delta_r must be a nonnegative magnitude".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn tag(&self) -> ModelTag {
        self.kind.tag()
    }

    pub fn dim(&self) -> usize {
        self.tag().dim()
    }

    pub fn control_range(&self) -> [f64; 2] {
        self.control_range
    }

    pub fn control_start(&self) -> f64 {
        self.control_range[0]
    }

    pub fn control_end(&self) -> f64 {
        self.control_range[1]
    }

    /// Same model swept over a different range.
    pub fn with_control_range(&self, control_range: [f64; 2]) -> Result<Self> {
        Self::new(self.kind, control_range)
    }

    /// The family's normalization constant: `x`, `t_c` or `|Δ_L|`.
    pub fn energy_unit(&self) -> f64 {
        match self.kind {
            ModelKind::LandauZener { x } => x,
            ModelKind::DqdInit(p) => p.t_c,
            ModelKind::BucketBrigade(p) => p.delta_l,
        }
    }

    /// Hamiltonian at the given control value.
    pub fn hamiltonian(&self, control: f64) -> HermitianMatrix {
        let c = |re: f64| Complex64::new(re, 0.0);
        let m = match self.kind {
            ModelKind::LandauZener { x } => {
                DMatrix::from_row_slice(2, 2, &[c(control), c(x), c(x), c(-control)])
            }
            ModelKind::DqdInit(p) => {
                let (tc, ex) = (p.t_c, p.delta_e_x);
                #[rustfmt::skip]
                let rows = [
                    p.u_tilde - control, 0.0, -tc, tc, 0.0,
                    0.0, p.e_z, ex, -ex, 0.0,
                    -tc, ex, p.delta_e_z, 0.0, ex,
                    tc, -ex, 0.0, -p.delta_e_z, -ex,
                    0.0, 0.0, ex, -ex, -p.e_z,
                ];
                DMatrix::from_row_iterator(5, 5, rows.iter().map(|&v| c(v)))
            }
            ModelKind::BucketBrigade(p) => {
                let t = valley_tunnelings(p.t_c, p.phi_l, p.phi_r);
                let z = Complex64::new(0.0, 0.0);
                #[rustfmt::skip]
                let rows = [
                    c(control + p.delta_l), z, t.ee, t.eg,
                    z, c(control - p.delta_l), t.ge, t.gg,
                    t.ee.conj(), t.ge.conj(), c(p.delta_r), z,
                    t.eg.conj(), t.gg.conj(), z, c(-p.delta_r),
                ];
                DMatrix::from_row_slice(4, 4, &rows)
            }
        };
        HermitianMatrix(m)
    }

    /// Exact derivative of [`ModelSpec::hamiltonian`] with respect to the control.
    pub fn hamiltonian_gradient(&self, _control: f64) -> HermitianMatrix {
        match self.kind {
            ModelKind::LandauZener { .. } => HermitianMatrix::diagonal(&[1.0, -1.0]),
            ModelKind::DqdInit(_) => HermitianMatrix::diagonal(&[-1.0, 0.0, 0.0, 0.0, 0.0]),
            ModelKind::BucketBrigade(_) => HermitianMatrix::diagonal(&[1.0, 1.0, 0.0, 0.0]),
        }
    }
}

/// Interdot tunnel elements between valley eigenstates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValleyTunnelings {
    pub ee: Complex64,
    pub eg: Complex64,
    pub ge: Complex64,
    pub gg: Complex64,
}

/// Tunnel couplings modified by the valley phases:
/// `t_ee = t_gg* = (t_c/2)(1 + e^{i(φ_L−φ_R)})`,
/// `t_eg = −t_ge* = (t_c/2)(e^{iφ_L} − e^{iφ_R})`.
pub fn valley_tunnelings(t_c: f64, phi_l: f64, phi_r: f64) -> ValleyTunnelings {
    let half = t_c / 2.0;
    let ee = (Complex64::new(1.0, 0.0) + Complex64::from_polar(1.0, phi_l - phi_r)) * half;
    let eg = (Complex64::from_polar(1.0, phi_l) - Complex64::from_polar(1.0, phi_r)) * half;
    ValleyTunnelings {
        ee,
        eg,
        ge: -eg.conj(),
        gg: ee.conj(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn assert_hermitian(h: &HermitianMatrix) {
        let m = h.as_matrix();
        let d = m.nrows();
        for i in 0..d {
            for j in 0..d {
                assert!((m[(i, j)] - m[(j, i)].conj()).norm() <= HERMITIAN_TOL);
            }
        }
    }

    fn random_model(rng: &mut ChaCha8Rng, tag: ModelTag) -> ModelSpec {
        let range = [rng.random_range(-20.0..0.0), rng.random_range(0.1..20.0)];
        match tag {
            ModelTag::LandauZener => ModelSpec::landau_zener(rng.random_range(0.01..5.0), range),
            ModelTag::DqdInit => ModelSpec::dqd_init(
                DqdParams {
                    t_c: rng.random_range(0.1..2.0),
                    u_tilde: rng.random_range(-20.0..20.0),
                    e_z: rng.random_range(-2.0..2.0),
                    delta_e_z: rng.random_range(-1.0..1.0),
                    delta_e_x: rng.random_range(-0.5..0.5),
                },
                range,
            ),
            ModelTag::BucketBrigade => ModelSpec::bucket_brigade(
                BucketBrigadeParams {
                    t_c: rng.random_range(0.0..2.0),
                    delta_l: rng.random_range(0.1..5.0),
                    delta_r: rng.random_range(0.0..5.0),
                    phi_l: rng.random_range(-PI..PI),
                    phi_r: rng.random_range(-PI..PI),
                },
                range,
            ),
        }
        .unwrap()
    }

    const TAGS: [ModelTag; 3] = [
        ModelTag::LandauZener,
        ModelTag::DqdInit,
        ModelTag::BucketBrigade,
    ];

    #[test]
    fn landau_zener_at_crossing_is_sigma_x() {
        let m = ModelSpec::landau_zener(1.0, [-10.0, 10.0]).unwrap();
        let expected = HermitianMatrix::from_real_rows(2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(m.hamiltonian(0.0), expected);
    }

    #[test]
    fn dqd_entries_at_far_detuning() {
        let m = ModelSpec::dqd_init(DqdParams::reference(), [15.0, 0.0]).unwrap();
        let h = m.hamiltonian(15.0);
        assert_eq!(h.entry(0, 0).re, -5.0);
        assert_eq!(h.entry(0, 2).re, -1.0);
        assert_eq!(h.entry(0, 3).re, 1.0);
        assert_eq!(h.dim(), 5);
    }

    #[test]
    fn bucket_brigade_equal_phases() {
        let t = valley_tunnelings(0.37, 0.8, 0.8);
        assert!(t.eg.norm() < 1e-15);
        assert!((t.ee - Complex64::new(0.37, 0.0)).norm() < 1e-15);

        let p = BucketBrigadeParams {
            t_c: 0.37,
            delta_l: 1.0,
            delta_r: 2.0,
            phi_l: 0.8,
            phi_r: 0.8,
        };
        let h = ModelSpec::bucket_brigade(p, [-1.0, 1.0])
            .unwrap()
            .hamiltonian(0.3);
        assert!(h.entry(0, 3).norm() < 1e-15);
        assert!((h.entry(0, 2).re - 0.37).abs() < 1e-15);
    }

    #[test]
    fn valley_tunnelings_limits() {
        let t = valley_tunnelings(1.0, 0.0, 0.0);
        assert!((t.ee - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(t.eg.norm() < 1e-15);

        let t = valley_tunnelings(1.0, 0.0, PI);
        assert!(t.ee.norm() < 1e-15);
        assert!((t.eg - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn valley_tunnelings_shuttling_parameters() {
        // Direct evaluation of the two closed forms with t_c = 0.1, φ_L = 0.1, φ_R = π/2:
        //   t_ee = 0.05 (1 + cos(0.1 − π/2) + i sin(0.1 − π/2))
        //   t_eg = 0.05 (cos 0.1 − cos π/2 + i (sin 0.1 − sin π/2))
        let t = valley_tunnelings(0.1, 0.1, PI / 2.0);
        let ee = Complex64::new(0.054_991_670_832_341_41, -0.049_750_208_263_901_29);
        let eg = Complex64::new(0.049_750_208_263_901_29, -0.045_008_329_167_658_59);
        assert!((t.ee - ee).norm() < 1e-15, "{}", t.ee);
        assert!((t.eg - eg).norm() < 1e-15, "{}", t.eg);
        assert_eq!(t.gg, t.ee.conj());
        assert_eq!(t.ge, -t.eg.conj());
    }

    #[test]
    fn gradients_are_constant_diagonals() {
        let lz = ModelSpec::landau_zener(1.0, [-1.0, 1.0]).unwrap();
        assert_eq!(
            lz.hamiltonian_gradient(3.0),
            HermitianMatrix::diagonal(&[1.0, -1.0])
        );
        let dqd = ModelSpec::dqd_init(DqdParams::reference(), [15.0, 0.0]).unwrap();
        assert_eq!(
            dqd.hamiltonian_gradient(7.0),
            HermitianMatrix::diagonal(&[-1.0, 0.0, 0.0, 0.0, 0.0])
        );
        let bb =
            ModelSpec::bucket_brigade(BucketBrigadeParams::reference(), [-10.0, 10.0]).unwrap();
        assert_eq!(
            bb.hamiltonian_gradient(-2.0),
            HermitianMatrix::diagonal(&[1.0, 1.0, 0.0, 0.0])
        );
    }

    #[test]
    fn hermitian_for_random_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for tag in TAGS {
            for _ in 0..1000 {
                let m = random_model(&mut rng, tag);
                let eps = rng.random_range(-30.0..30.0);
                let h = m.hamiltonian(eps);
                assert_eq!(h.dim(), tag.dim());
                assert_hermitian(&h);
            }
        }
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let h = 1e-5;
        for tag in TAGS {
            for _ in 0..50 {
                let m = random_model(&mut rng, tag);
                let [a, b] = m.control_range();
                for k in 0..=20 {
                    let eps = a + (b - a) * k as f64 / 20.0;
                    let fd = m
                        .hamiltonian(eps + h)
                        .add_scaled(&m.hamiltonian(eps - h), -1.0)
                        .scaled(0.5 / h);
                    let err = fd.max_abs_diff(&m.hamiltonian_gradient(eps));
                    assert!(err <= 1e-8, "{tag}: err {err} at {eps}");
                }
            }
        }
    }

    #[test]
    fn rejects_bad_models() {
        assert!(ModelSpec::landau_zener(1.0, [1.0, 1.0]).is_err());
        assert!(ModelSpec::landau_zener(f64::NAN, [0.0, 1.0]).is_err());
        let mut p = DqdParams::reference();
        p.t_c = 0.0;
        assert!(ModelSpec::dqd_init(p, [15.0, 0.0]).is_err());
        assert!(matches!(
            "ising".parse::<ModelTag>(),
            Err(DiadError::Config(_))
        ));
        assert_eq!("dqd_init".parse::<ModelTag>().unwrap(), ModelTag::DqdInit);
    }

    #[test]
    fn non_hermitian_rejected() {
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(0.5, 0.0),
                Complex64::new(0.0, 0.0),
            ],
        );
        assert!(matches!(
            HermitianMatrix::new(m),
            Err(DiadError::Validation(_))
        ));
    }
}
