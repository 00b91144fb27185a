//! Sparse multimode Fock-state algebra over the fixed eight-mode universe
//! (ports a, b, c, d with H and V polarization each).
//!
//! A [`StateVector`] maps occupation-number basis states to complex
//! amplitudes. Terms are kept in a `BTreeMap`, so iteration (and therefore
//! serialized output) follows the total order on [`FockBasisState`].
//! A [`DensityMixture`] is an incoherent ensemble of pure states.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Amplitudes below this magnitude are dropped after every linear operation.
pub const PRUNE_THRESHOLD: f64 = 1e-15;

/// Number of modes in the canonical experiment.
pub const MODE_COUNT: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Port {
    A,
    B,
    C,
    D,
}

impl Port {
    pub const ALL: [Port; 4] = [Port::A, Port::B, Port::C, Port::D];

    fn index(self) -> usize {
        self as usize
    }

    pub fn symbol(self) -> char {
        match self {
            Port::A => 'a',
            Port::B => 'b',
            Port::C => 'c',
            Port::D => 'd',
        }
    }
}

impl fmt::Display for Port {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
}

impl Polarization {
    pub const ALL: [Polarization; 2] = [Polarization::H, Polarization::V];
}

/// A (port, polarization) pair. Labels are totally ordered by port first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeLabel {
    pub port: Port,
    pub polarization: Polarization,
}

impl ModeLabel {
    pub const fn new(port: Port, polarization: Polarization) -> Self {
        ModeLabel { port, polarization }
    }

    /// All eight labels in canonical order.
    pub fn all() -> [ModeLabel; MODE_COUNT] {
        let mut out = [ModeLabel::new(Port::A, Polarization::H); MODE_COUNT];
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = ModeLabel::from_index(i);
        }
        out
    }

    pub fn index(self) -> usize {
        self.port.index() * 2 + self.polarization as usize
    }

    pub fn from_index(index: usize) -> Self {
        assert!(index < MODE_COUNT, "mode index {index} out of range");
        let port = Port::ALL[index / 2];
        let polarization = Polarization::ALL[index % 2];
        ModeLabel { port, polarization }
    }
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pol = match self.polarization {
            Polarization::H => 'H',
            Polarization::V => 'V',
        };
        write!(f, "{}{}", self.port.symbol(), pol)
    }
}

impl FromStr for ModeLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut chars = s.chars();
        let (Some(p), Some(q), None) = (chars.next(), chars.next(), chars.next()) else {
            return Err(Error::InvalidArgument(format!("bad mode label {s:?}")));
        };
        let port = match p {
            'a' => Port::A,
            'b' => Port::B,
            'c' => Port::C,
            'd' => Port::D,
            _ => return Err(Error::InvalidArgument(format!("bad port in {s:?}"))),
        };
        let polarization = match q {
            'H' => Polarization::H,
            'V' => Polarization::V,
            _ => return Err(Error::InvalidArgument(format!("bad polarization in {s:?}"))),
        };
        Ok(ModeLabel { port, polarization })
    }
}

/// Occupation numbers over the mode universe. Absent modes are zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct FockBasisState {
    occupations: [u32; MODE_COUNT],
}

impl FockBasisState {
    pub fn vacuum() -> Self {
        Self::default()
    }

    pub fn from_occupations(occupations: [u32; MODE_COUNT]) -> Self {
        FockBasisState { occupations }
    }

    /// Builds a basis state from `(mode, count)` pairs; repeated modes add.
    pub fn from_modes<I>(modes: I) -> Self
    where
        I: IntoIterator<Item = (ModeLabel, u32)>,
    {
        let mut occupations = [0; MODE_COUNT];
        for (mode, n) in modes {
            occupations[mode.index()] += n;
        }
        FockBasisState { occupations }
    }

    pub fn occupations(&self) -> &[u32; MODE_COUNT] {
        &self.occupations
    }

    pub fn get(&self, mode: ModeLabel) -> u32 {
        self.occupations[mode.index()]
    }

    pub fn total_photons(&self) -> u32 {
        self.occupations.iter().sum()
    }

    pub fn occupied_modes(&self) -> impl Iterator<Item = (ModeLabel, u32)> + '_ {
        self.occupations
            .iter()
            .enumerate()
            .filter(|(_, &n)| n > 0)
            .map(|(i, &n)| (ModeLabel::from_index(i), n))
    }

    pub fn is_on_ports(&self, ports: &[Port]) -> bool {
        self.occupied_modes().all(|(m, _)| ports.contains(&m.port))
    }
}

impl fmt::Display for FockBasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        let mut first = true;
        for (mode, n) in self.occupied_modes() {
            if !first {
                write!(f, ",")?;
            }
            write!(f, "{n}_{mode}")?;
            first = false;
        }
        if first {
            write!(f, "vac")?;
        }
        write!(f, ">")
    }
}

/// Sparse pure state.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StateVector {
    terms: BTreeMap<FockBasisState, Complex64>,
}

impl StateVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn basis(state: FockBasisState) -> Self {
        Self::from_terms([(state, Complex64::new(1.0, 0.0))])
    }

    pub fn vacuum() -> Self {
        Self::basis(FockBasisState::vacuum())
    }

    /// Single-mode Fock state `|n>` on `mode`.
    pub fn fock(mode: ModeLabel, n: u32) -> Self {
        Self::basis(FockBasisState::from_modes([(mode, n)]))
    }

    /// Collects terms, summing amplitudes of repeated basis states.
    pub fn from_terms<I>(terms: I) -> Self
    where
        I: IntoIterator<Item = (FockBasisState, Complex64)>,
    {
        let mut out = StateVector::new();
        for (b, amp) in terms {
            out.add_amplitude(b, amp);
        }
        out.prune();
        out
    }

    pub(crate) fn add_amplitude(&mut self, state: FockBasisState, amp: Complex64) {
        *self.terms.entry(state).or_insert(Complex64::new(0.0, 0.0)) += amp;
    }

    pub(crate) fn prune(&mut self) {
        self.terms.retain(|_, a| a.norm() >= PRUNE_THRESHOLD);
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn amplitude(&self, state: &FockBasisState) -> Complex64 {
        self.terms.get(state).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FockBasisState, &Complex64)> {
        self.terms.iter()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalize(&self) -> Result<StateVector> {
        let norm = self.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::DegenerateState);
        }
        Ok(self.scale(Complex64::new(1.0 / norm, 0.0)))
    }

    pub fn scale(&self, factor: Complex64) -> StateVector {
        let mut out = StateVector {
            terms: self.terms.iter().map(|(b, a)| (*b, a * factor)).collect(),
        };
        out.prune();
        out
    }

    pub fn add(&self, other: &StateVector) -> StateVector {
        let mut out = self.clone();
        for (b, a) in &other.terms {
            out.add_amplitude(*b, *a);
        }
        out.prune();
        out
    }

    /// `<self|other>`, conjugate-linear in `self`.
    pub fn inner_product(&self, other: &StateVector) -> Complex64 {
        let (small, large, conj_small) = if self.len() <= other.len() {
            (self, other, true)
        } else {
            (other, self, false)
        };
        small
            .terms
            .iter()
            .filter_map(|(b, a)| large.terms.get(b).map(|c| (a, c)))
            .map(|(a, c)| if conj_small { a.conj() * c } else { c.conj() * a })
            .sum()
    }

    /// Modes with nonzero occupation in any term.
    pub fn occupied_modes(&self) -> BTreeSet<ModeLabel> {
        self.terms
            .keys()
            .flat_map(|b| b.occupied_modes().map(|(m, _)| m).collect::<Vec<_>>())
            .collect()
    }

    pub fn tensor(&self, other: &StateVector) -> Result<StateVector> {
        let lhs_modes = self.occupied_modes();
        if let Some(m) = other.occupied_modes().intersection(&lhs_modes).next() {
            return Err(Error::OverlappingModes(*m));
        }
        let mut out = StateVector::new();
        for (b1, a1) in &self.terms {
            for (b2, a2) in &other.terms {
                let mut occ = *b1.occupations();
                for (o, n) in occ.iter_mut().zip(b2.occupations()) {
                    *o += n;
                }
                out.add_amplitude(FockBasisState::from_occupations(occ), a1 * a2);
            }
        }
        out.prune();
        Ok(out)
    }

    /// Keeps terms with at most `n_max` photons, renormalized. Returns the
    /// state together with the discarded fraction of the squared norm.
    /// `u32::MAX` is the "no cutoff" sentinel.
    pub fn truncate(&self, n_max: u32) -> Result<(StateVector, f64)> {
        let total = self.norm_sqr();
        if total == 0.0 {
            return Err(Error::DegenerateState);
        }
        let kept = StateVector {
            terms: self
                .terms
                .iter()
                .filter(|(b, _)| b.total_photons() <= n_max)
                .map(|(b, a)| (*b, *a))
                .collect(),
        };
        if kept.is_empty() {
            return Err(Error::FullyTruncated { n_max });
        }
        let discarded = 1.0 - kept.norm_sqr() / total;
        Ok((kept.normalize()?, discarded.max(0.0)))
    }

    /// Projection onto the sector with exactly `n` photons, unnormalized.
    pub fn photon_sector(&self, n: u32) -> StateVector {
        StateVector {
            terms: self
                .terms
                .iter()
                .filter(|(b, _)| b.total_photons() == n)
                .map(|(b, a)| (*b, *a))
                .collect(),
        }
    }

    pub fn photon_numbers(&self) -> BTreeSet<u32> {
        self.terms.keys().map(|b| b.total_photons()).collect()
    }
}

impl fmt::Display for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (b, a)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({:.6}{:+.6}i){}", a.re, a.im, b)?;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct TermRepr {
    occupations: BTreeMap<String, u32>,
    re: f64,
    im: f64,
}

impl Serialize for StateVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let terms: Vec<TermRepr> = self
            .terms
            .iter()
            .map(|(b, a)| TermRepr {
                occupations: b.occupied_modes().map(|(m, n)| (m.to_string(), n)).collect(),
                re: a.re,
                im: a.im,
            })
            .collect();
        terms.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for StateVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let terms = Vec::<TermRepr>::deserialize(deserializer)?;
        let mut out = StateVector::new();
        for t in terms {
            let mut modes = Vec::with_capacity(t.occupations.len());
            for (label, n) in t.occupations {
                let mode = label.parse::<ModeLabel>().map_err(serde::de::Error::custom)?;
                modes.push((mode, n));
            }
            out.add_amplitude(FockBasisState::from_modes(modes), Complex64::new(t.re, t.im));
        }
        out.prune();
        Ok(out)
    }
}

/// Weighted ensemble of pure states.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DensityMixture {
    components: Vec<MixtureComponent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    #[serde(rename = "terms")]
    pub state: StateVector,
}

/// Result of truncating a mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct Truncation {
    pub mixture: DensityMixture,
    pub discarded_weight: f64,
    /// Number of components that lost all their terms and were dropped.
    pub dropped_components: usize,
}

impl DensityMixture {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn pure(state: StateVector) -> Self {
        DensityMixture {
            components: vec![MixtureComponent { weight: 1.0, state }],
        }
    }

    /// Components with zero weight are skipped.
    pub fn from_components<I>(components: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, StateVector)>,
    {
        let mut out = DensityMixture::new();
        for (weight, state) in components {
            if !weight.is_finite() || weight < 0.0 {
                return Err(Error::InvalidArgument(format!("mixture weight {weight}")));
            }
            if weight > 0.0 {
                out.components.push(MixtureComponent { weight, state });
            }
        }
        Ok(out)
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum()
    }

    /// Rescales weights to sum to one and normalizes each component.
    pub fn normalize(&self) -> Result<DensityMixture> {
        let total = self.total_weight();
        if total <= 0.0 {
            return Err(Error::DegenerateState);
        }
        let components = self
            .components
            .iter()
            .map(|c| {
                Ok(MixtureComponent {
                    weight: c.weight / total,
                    state: c.state.normalize()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DensityMixture { components })
    }

    /// Drops every basis state with more than `n_max` photons and
    /// renormalizes. Components left empty are dropped with a warning.
    pub fn truncate(&self, n_max: u32) -> Result<Truncation> {
        let total = self.total_weight();
        if total <= 0.0 {
            return Err(Error::DegenerateState);
        }
        if n_max == u32::MAX {
            return Ok(Truncation {
                mixture: self.clone(),
                discarded_weight: 0.0,
                dropped_components: 0,
            });
        }
        let mut kept = Vec::with_capacity(self.components.len());
        let mut dropped = 0;
        for c in &self.components {
            let norm_sqr = c.state.norm_sqr();
            match c.state.truncate(n_max) {
                Ok((state, fraction)) => kept.push(MixtureComponent {
                    weight: c.weight * (1.0 - fraction),
                    state,
                }),
                Err(Error::FullyTruncated { .. }) if norm_sqr > 0.0 => dropped += 1,
                Err(e) => return Err(e),
            }
        }
        if dropped > 0 {
            log::warn!("truncation at n_max = {n_max} dropped {dropped} mixture component(s)");
        }
        let kept_weight: f64 = kept.iter().map(|c| c.weight).sum();
        if kept.is_empty() || kept_weight <= 0.0 {
            return Err(Error::FullyTruncated { n_max });
        }
        for c in &mut kept {
            c.weight /= kept_weight;
        }
        Ok(Truncation {
            mixture: DensityMixture { components: kept },
            discarded_weight: (1.0 - kept_weight / total).max(0.0),
            dropped_components: dropped,
        })
    }

    /// Dense density matrix over the sorted union of basis states appearing
    /// in any component.
    pub fn density_matrix(&self) -> (Vec<FockBasisState>, DMatrix<Complex64>) {
        let basis: Vec<FockBasisState> = self
            .components
            .iter()
            .flat_map(|c| c.state.terms.keys().copied())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let rho = self.density_matrix_in(&basis);
        (basis, rho)
    }

    /// Density matrix restricted to the given basis (terms outside it are ignored).
    pub fn density_matrix_in(&self, basis: &[FockBasisState]) -> DMatrix<Complex64> {
        let index: BTreeMap<&FockBasisState, usize> =
            basis.iter().enumerate().map(|(i, b)| (b, i)).collect();
        let dim = basis.len();
        let mut rho = DMatrix::<Complex64>::zeros(dim, dim);
        for c in &self.components {
            let entries: Vec<(usize, Complex64)> = c
                .state
                .terms
                .iter()
                .filter_map(|(b, a)| index.get(b).map(|&i| (i, *a)))
                .collect();
            for &(i, ai) in &entries {
                for &(j, aj) in &entries {
                    rho[(i, j)] += ai * aj.conj() * c.weight;
                }
            }
        }
        rho
    }
}

/// Trace distance `½ Tr|ρ − σ|` between two mixtures.
pub fn trace_distance(lhs: &DensityMixture, rhs: &DensityMixture) -> f64 {
    let basis: Vec<FockBasisState> = lhs
        .components
        .iter()
        .chain(rhs.components.iter())
        .flat_map(|c| c.state.terms.keys().copied())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if basis.is_empty() {
        return 0.0;
    }
    let diff = lhs.density_matrix_in(&basis) - rhs.density_matrix_in(&basis);
    let eig = nalgebra::SymmetricEigen::new(diff);
    0.5 * eig.eigenvalues.iter().map(|l| l.abs()).sum::<f64>()
}
