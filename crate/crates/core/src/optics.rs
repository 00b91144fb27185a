//! Passive linear-optical elements as unitary transforms on creation
//! operators, and their action on Fock states.
//!
//! A [`ModeTransform`] with matrix `U` maps `a†_k → Σ_j U[j][k] b†_j`.
//! Composition follows operator order: `compose(first, second)` is the
//! matrix product `second · first`.

use std::f64::consts::FRAC_PI_4;

use nalgebra::SMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::fock::{
    DensityMixture, FockBasisState, ModeLabel, Polarization, Port, StateVector, MODE_COUNT,
};

/// Tolerance of the unitarity guard on construction and application.
pub const UNITARITY_TOLERANCE: f64 = 1e-9;

pub type ModeMatrix = SMatrix<Complex64, MODE_COUNT, MODE_COUNT>;

/// Phase convention of the beam splitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BsConvention {
    /// `x† → cos t·u† + i sin t·v†`, `y† → i sin t·u† + cos t·v†`.
    #[default]
    Symmetric,
    /// Drops the `i` on the cross terms. Not unitary; exists only as a
    /// negative control for the validation battery.
    NoCrossPhase,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeTransform {
    labels: [ModeLabel; MODE_COUNT],
    matrix: ModeMatrix,
}

fn cplx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

impl ModeTransform {
    pub fn identity() -> Self {
        ModeTransform {
            labels: ModeLabel::all(),
            matrix: ModeMatrix::identity(),
        }
    }

    /// Builds a transform from a matrix in canonical label order, checking
    /// unitarity.
    pub fn from_matrix(matrix: ModeMatrix) -> Result<Self> {
        let t = ModeTransform {
            labels: ModeLabel::all(),
            matrix,
        };
        t.check_unitary()?;
        Ok(t)
    }

    /// Like [`from_matrix`](Self::from_matrix) without the unitarity check.
    pub fn from_matrix_unchecked(matrix: ModeMatrix) -> Self {
        ModeTransform {
            labels: ModeLabel::all(),
            matrix,
        }
    }

    pub fn labels(&self) -> &[ModeLabel; MODE_COUNT] {
        &self.labels
    }

    pub fn matrix(&self) -> &ModeMatrix {
        &self.matrix
    }

    /// `U[to][from]` in terms of mode labels.
    pub fn entry(&self, to: ModeLabel, from: ModeLabel) -> Complex64 {
        let row = self.position(to);
        let col = self.position(from);
        self.matrix[(row, col)]
    }

    fn position(&self, mode: ModeLabel) -> usize {
        self.labels
            .iter()
            .position(|&m| m == mode)
            .expect("mode universe always holds every label")
    }

    /// Two-port beam splitter. `inputs` are mixed onto `outputs` with
    /// transmissivity angle `angle` (`π/4` is balanced). When
    /// `outputs == inputs` the element acts in place; otherwise all four
    /// ports must be distinct and the output ports are routed back onto the
    /// inputs by the adjoint block so the full transform stays unitary.
    /// Both polarizations are treated identically.
    pub fn beam_splitter(inputs: (Port, Port), outputs: (Port, Port), angle: f64) -> Result<Self> {
        Self::beam_splitter_with(BsConvention::Symmetric, inputs, outputs, angle)
    }

    pub fn beam_splitter_with(
        convention: BsConvention,
        inputs: (Port, Port),
        outputs: (Port, Port),
        angle: f64,
    ) -> Result<Self> {
        let (x, y) = inputs;
        let (u, v) = outputs;
        if x == y {
            return Err(Error::IdenticalPorts(format!("inputs {x}, {y}")));
        }
        if u == v {
            return Err(Error::IdenticalPorts(format!("outputs {u}, {v}")));
        }
        let in_place = inputs == outputs;
        if !in_place && [u, v].iter().any(|p| *p == x || *p == y) {
            return Err(Error::IdenticalPorts(format!(
                "outputs ({u}, {v}) partially overlap inputs ({x}, {y})"
            )));
        }
        let (cos, sin) = (angle.cos(), angle.sin());
        let cross = match convention {
            BsConvention::Symmetric => cplx(0.0, sin),
            BsConvention::NoCrossPhase => cplx(sin, 0.0),
        };
        // block[out][in] on the (u, v) x (x, y) pair
        let block = [[cplx(cos, 0.0), cross], [cross, cplx(cos, 0.0)]];

        let mut m = ModeMatrix::identity();
        for pol in Polarization::ALL {
            let ins = [ModeLabel::new(x, pol).index(), ModeLabel::new(y, pol).index()];
            let outs = [ModeLabel::new(u, pol).index(), ModeLabel::new(v, pol).index()];
            for idx in ins.iter().chain(outs.iter()) {
                m[(*idx, *idx)] = Complex64::new(0.0, 0.0);
            }
            for (r, &row) in outs.iter().enumerate() {
                for (c, &col) in ins.iter().enumerate() {
                    m[(row, col)] = block[r][c];
                    if !in_place {
                        m[(col, row)] = block[r][c].conj();
                    }
                }
            }
        }
        Ok(ModeTransform {
            labels: ModeLabel::all(),
            matrix: m,
        })
    }

    /// Balanced beam splitter mixing ports a and b onto c and d.
    pub fn secondary_beam_splitter() -> Self {
        Self::beam_splitter((Port::A, Port::B), (Port::C, Port::D), FRAC_PI_4)
            .expect("distinct ports")
    }

    /// `H† → cos θ·H† + sin θ·V†`, `V† → −sin θ·H† + cos θ·V†` within `port`.
    pub fn polarization_rotator(port: Port, angle: f64) -> Self {
        let h = ModeLabel::new(port, Polarization::H).index();
        let v = ModeLabel::new(port, Polarization::V).index();
        let (cos, sin) = (angle.cos(), angle.sin());
        let mut m = ModeMatrix::identity();
        m[(h, h)] = cplx(cos, 0.0);
        m[(v, h)] = cplx(sin, 0.0);
        m[(h, v)] = cplx(-sin, 0.0);
        m[(v, v)] = cplx(cos, 0.0);
        ModeTransform {
            labels: ModeLabel::all(),
            matrix: m,
        }
    }

    /// Multiplies both polarization modes of `port` by `e^{i·phase}`.
    pub fn phase_shift(port: Port, phase: f64) -> Self {
        let mut m = ModeMatrix::identity();
        let factor = Complex64::from_polar(1.0, phase);
        for pol in Polarization::ALL {
            let i = ModeLabel::new(port, pol).index();
            m[(i, i)] = factor;
        }
        ModeTransform {
            labels: ModeLabel::all(),
            matrix: m,
        }
    }

    pub fn adjoint(&self) -> Self {
        ModeTransform {
            labels: self.labels,
            matrix: self.matrix.adjoint(),
        }
    }

    /// Applies `first`, then `second`.
    pub fn compose(first: &ModeTransform, second: &ModeTransform) -> Result<Self> {
        if first.labels != second.labels {
            return Err(Error::MismatchedUniverse);
        }
        Ok(ModeTransform {
            labels: first.labels,
            matrix: second.matrix * first.matrix,
        })
    }

    /// Largest entry of `|U†U − I|`.
    pub fn unitarity_deviation(&self) -> f64 {
        let prod = self.matrix.adjoint() * self.matrix - ModeMatrix::identity();
        prod.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn check_unitary(&self) -> Result<()> {
        let deviation = self.unitarity_deviation();
        if deviation > UNITARITY_TOLERANCE || !deviation.is_finite() {
            return Err(Error::NonUnitary { deviation });
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &ModeTransform) -> f64 {
        (self.matrix - other.matrix)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Propagates a pure state.
    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        self.check_unitary()?;
        Ok(self.apply_unchecked(state))
    }

    /// Same as [`apply`](Self::apply) without the unitarity guard.
    pub fn apply_unchecked(&self, state: &StateVector) -> StateVector {
        let mut out = StateVector::new();
        for (basis, amp) in state.iter() {
            for (b, a) in self.expand_basis(basis) {
                out.add_amplitude(b, a * amp);
            }
        }
        out.prune();
        out
    }

    pub fn apply_mixture(&self, mixture: &DensityMixture) -> Result<DensityMixture> {
        self.check_unitary()?;
        DensityMixture::from_components(
            mixture
                .components()
                .iter()
                .map(|c| (c.weight, self.apply_unchecked(&c.state))),
        )
    }

    /// Expands `∏_k (Σ_j U[j][k] b†_j)^{n_k} / √(n_k!)` acting on vacuum by
    /// multiplying in one linear factor at a time, then converts monomial
    /// coefficients to normalized Fock amplitudes.
    fn expand_basis(&self, basis: &FockBasisState) -> Vec<(FockBasisState, Complex64)> {
        // monomials are keyed by occupation in canonical mode index
        let mut poly: Vec<([u32; MODE_COUNT], Complex64)> =
            vec![([0; MODE_COUNT], Complex64::new(1.0, 0.0))];
        let mut input_norm = 1.0;
        for (col, label) in self.labels.iter().enumerate() {
            let n = basis.get(*label);
            if n == 0 {
                continue;
            }
            input_norm *= factorial(n);
            let column: Vec<(usize, Complex64)> = (0..MODE_COUNT)
                .filter(|&row| self.matrix[(row, col)].norm() > 0.0)
                .map(|row| (self.labels[row].index(), self.matrix[(row, col)]))
                .collect();
            for _ in 0..n {
                let mut next: std::collections::BTreeMap<[u32; MODE_COUNT], Complex64> =
                    std::collections::BTreeMap::new();
                for (mono, coeff) in &poly {
                    for &(mode, u) in &column {
                        let mut m = *mono;
                        m[mode] += 1;
                        *next.entry(m).or_default() += coeff * u;
                    }
                }
                poly = next.into_iter().collect();
            }
        }
        let input_norm = input_norm.sqrt();
        poly.into_iter()
            .map(|(mono, coeff)| {
                let out_norm: f64 = mono.iter().map(|&m| factorial(m)).product::<f64>().sqrt();
                (
                    FockBasisState::from_occupations(mono),
                    coeff * (out_norm / input_norm),
                )
            })
            .collect()
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

#[derive(Serialize, Deserialize)]
struct TransformRepr {
    labels: Vec<String>,
    matrix: Vec<Vec<[f64; 2]>>,
}

impl Serialize for ModeTransform {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = TransformRepr {
            labels: self.labels.iter().map(|l| l.to_string()).collect(),
            matrix: (0..MODE_COUNT)
                .map(|r| {
                    (0..MODE_COUNT)
                        .map(|c| [self.matrix[(r, c)].re, self.matrix[(r, c)].im])
                        .collect()
                })
                .collect(),
        };
        repr.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ModeTransform {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = TransformRepr::deserialize(deserializer)?;
        if repr.labels.len() != MODE_COUNT || repr.matrix.len() != MODE_COUNT {
            return Err(D::Error::custom("transform must be 8x8"));
        }
        let mut labels = ModeLabel::all();
        for (slot, s) in labels.iter_mut().zip(&repr.labels) {
            *slot = s.parse().map_err(D::Error::custom)?;
        }
        let mut sorted = labels;
        sorted.sort();
        if sorted != ModeLabel::all() {
            return Err(D::Error::custom("labels must be a permutation of the mode universe"));
        }
        let mut matrix = ModeMatrix::zeros();
        for (r, row) in repr.matrix.iter().enumerate() {
            if row.len() != MODE_COUNT {
                return Err(D::Error::custom("transform must be 8x8"));
            }
            for (c, [re, im]) in row.iter().enumerate() {
                matrix[(r, c)] = Complex64::new(*re, *im);
            }
        }
        Ok(ModeTransform { labels, matrix })
    }
}
