//! Brute-force reference implementations. Slow on purpose and kept out of
//! the library.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

use bellsim_core::{FockBasisState, ModeLabel, Polarization, Port, StateVector};
use num_complex::Complex64;

pub const MAX_PHOTONS: u32 = 4;

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Images of an input creation operator under the balanced beam splitter:
/// `a† → (c† + i d†)/√2`, `b† → (i c† + d†)/√2`, polarization untouched.
fn image(mode: ModeLabel) -> [(ModeLabel, Complex64); 2] {
    let pol = mode.polarization;
    let c = ModeLabel::new(Port::C, pol);
    let d = ModeLabel::new(Port::D, pol);
    let real = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let imag = Complex64::new(0.0, FRAC_1_SQRT_2);
    match mode.port {
        Port::A => [(c, real), (d, imag)],
        Port::B => [(c, imag), (d, real)],
        _ => unreachable!("checked by caller"),
    }
}

/// Expands `Π_k (a†_k)^{n_k} / √(n_k!) |0>` by enumerating every choice of
/// output term for every operator in the product.
pub fn oracle_bs_expand(input: &FockBasisState) -> Result<StateVector, String> {
    if input.total_photons() > MAX_PHOTONS {
        return Err(format!("{} photons exceeds the oracle bound of {MAX_PHOTONS}", input.total_photons()));
    }
    if !input.is_on_ports(&[Port::A, Port::B]) {
        return Err(format!("{input} is not on ports a and b"));
    }
    let ops: Vec<ModeLabel> = input
        .occupied_modes()
        .flat_map(|(m, n)| std::iter::repeat_n(m, n as usize))
        .collect();
    let mut terms: BTreeMap<[u32; 8], Complex64> = BTreeMap::new();
    for choice in 0..(1usize << ops.len()) {
        let mut occ = [0u32; 8];
        let mut coeff = Complex64::new(1.0, 0.0);
        for (k, m) in ops.iter().enumerate() {
            let (out, c) = image(*m)[(choice >> k) & 1];
            occ[out.index()] += 1;
            coeff *= c;
        }
        // (b†)^m |0> = √(m!) |m>
        let bosonic = occ.iter().map(|&m| factorial(m)).product::<f64>().sqrt();
        *terms.entry(occ).or_default() += coeff * bosonic;
    }
    let input_norm = input.occupations().iter().map(|&n| factorial(n)).product::<f64>().sqrt();
    Ok(StateVector::from_terms(
        terms
            .into_iter()
            .map(|(occ, a)| (FockBasisState::from_occupations(occ), a / input_norm)),
    ))
}

/// `<s_θ|p>` for analyzer outcome `s` (0 = +, 1 = −) at angle `θ`, with
/// `|+_θ> = cos θ|H> + sin θ|V>` and `|−_θ> = −sin θ|H> + cos θ|V>`.
fn projection(theta: f64, s: usize, pol: Polarization) -> f64 {
    match (s, pol) {
        (0, Polarization::H) => theta.cos(),
        (0, Polarization::V) => theta.sin(),
        (_, Polarization::H) => -theta.sin(),
        (_, Polarization::V) => theta.cos(),
    }
}

/// Ideal exactly-one-photon-per-port coincidence probabilities in the order
/// `++, +−, −+, −−` for a state on ports c and d.
pub fn oracle_coincidences(state: &StateVector, alpha: f64, beta: f64) -> [f64; 4] {
    let mut amps = [Complex64::new(0.0, 0.0); 4];
    for (b, a) in state.iter() {
        let modes: Vec<(ModeLabel, u32)> = b.occupied_modes().collect();
        let in_c = modes.iter().filter(|(m, _)| m.port == Port::C).map(|(_, n)| n).sum::<u32>();
        let in_d = modes.iter().filter(|(m, _)| m.port == Port::D).map(|(_, n)| n).sum::<u32>();
        if b.total_photons() != 2 || in_c != 1 || in_d != 1 {
            continue;
        }
        let pc = modes.iter().find(|(m, _)| m.port == Port::C).unwrap().0.polarization;
        let pd = modes.iter().find(|(m, _)| m.port == Port::D).unwrap().0.polarization;
        for s in 0..2 {
            for t in 0..2 {
                amps[2 * s + t] += a * projection(alpha, s, pc) * projection(beta, t, pd);
            }
        }
    }
    amps.map(|a| a.norm_sqr())
}

/// Source-mixture coincidence rates normalized to the vacuum weight:
/// `Σ_{i+j≤4} (μ_a^i/i!)(μ_b^j/j!) P(·|i,j)`. Inputs with more photons cannot
/// give exactly one photon per port, so the bound loses nothing.
pub fn oracle_rates(mu_a: f64, mu_b: f64, alpha: f64, beta: f64) -> [f64; 4] {
    let a_h = ModeLabel::new(Port::A, Polarization::H);
    let b_v = ModeLabel::new(Port::B, Polarization::V);
    let mut rates = [0.0; 4];
    for i in 0..=MAX_PHOTONS {
        for j in 0..=(MAX_PHOTONS - i) {
            let w = mu_a.powi(i as i32) / factorial(i) * mu_b.powi(j as i32) / factorial(j);
            if w == 0.0 {
                continue;
            }
            let input = FockBasisState::from_modes([(a_h, i), (b_v, j)]);
            let p = oracle_coincidences(&oracle_bs_expand(&input).unwrap(), alpha, beta);
            for k in 0..4 {
                rates[k] += w * p[k];
            }
        }
    }
    rates
}

pub fn oracle_correlation(rates: &[f64; 4]) -> f64 {
    (rates[0] - rates[1] - rates[2] + rates[3]) / rates.iter().sum::<f64>()
}

/// `−cos 2(α − β)`, from projecting the singlet onto the analyzer bases.
pub fn oracle_singlet_e(alpha: f64, beta: f64) -> f64 {
    -(2.0 * (alpha - beta)).cos()
}

/// Every basis state on ports a, b with at most [`MAX_PHOTONS`] photons.
pub fn two_port_basis() -> Vec<FockBasisState> {
    let modes = [Port::A, Port::B].map(|p| Polarization::ALL.map(|q| ModeLabel::new(p, q)));
    let modes: Vec<ModeLabel> = modes.iter().flatten().copied().collect();
    let mut out = Vec::new();
    for n0 in 0..=MAX_PHOTONS {
        for n1 in 0..=(MAX_PHOTONS - n0) {
            for n2 in 0..=(MAX_PHOTONS - n0 - n1) {
                for n3 in 0..=(MAX_PHOTONS - n0 - n1 - n2) {
                    out.push(FockBasisState::from_modes(modes.iter().copied().zip([n0, n1, n2, n3])));
                }
            }
        }
    }
    out
}

/// Largest amplitude difference over the union of both supports.
pub fn max_state_diff(lhs: &StateVector, rhs: &StateVector) -> f64 {
    let keys: std::collections::BTreeSet<FockBasisState> = lhs.iter().chain(rhs.iter()).map(|(b, _)| *b).collect();
    keys.iter()
        .map(|b| (lhs.amplitude(b) - rhs.amplitude(b)).norm())
        .fold(0.0, f64::max)
}
