//! Sparse multimode pure states in a truncated Fock space.
//!
//! A state is a finite map from photon-occupation vectors to complex
//! amplitudes, normalised at construction. All phase evolutions in this
//! crate are diagonal in the number basis, so expectation values of number
//! operators are exact sums over the stored support: there is no sampling
//! and no matrix representation of the state.
//!
//! Amplitude maps are ordered (`BTreeMap`), so every reduction runs in a
//! fixed key order and results are bit-for-bit reproducible regardless of
//! how a state was assembled.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;

use crate::limits::{
    DEGENERACY_TOL, MAX_MODES, MAX_OCCUPATION, NORM_TOL, PRUNE_THRESHOLD, SUPPORT_CAP,
};
use crate::{Error, Result};

/// Neumaier-compensated accumulator. Norms and moments are sums over up to
/// [`SUPPORT_CAP`] terms; naive summation drifts past the 1e-12
/// normalisation tolerance at a few million amplitudes, compensation keeps
/// the error at machine level independent of the term count.
#[derive(Clone, Copy, Default)]
pub(crate) struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub(crate) fn kahan_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut acc = KahanSum::default();
    values.for_each(|x| acc.add(x));
    acc.value()
}

/// Photon counts per mode: the label of a multimode Fock basis element.
///
/// Counts are stored inline; at most [`MAX_MODES`] modes and
/// [`MAX_OCCUPATION`] photons per mode. Entries beyond `len` are kept at
/// zero so the derived ordering and equality act on the logical contents.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OccupationVector {
    len: u8,
    counts: [u16; MAX_MODES],
}

impl OccupationVector {
    pub fn new(counts: &[u16]) -> Result<Self> {
        if counts.is_empty() || counts.len() > MAX_MODES {
            return Err(Error::ModeCountUnsupported {
                got: counts.len(),
                max: MAX_MODES,
            });
        }
        let mut inline = [0u16; MAX_MODES];
        inline[..counts.len()].copy_from_slice(counts);
        Ok(Self {
            len: counts.len() as u8,
            counts: inline,
        })
    }

    pub fn counts(&self) -> &[u16] {
        &self.counts[..self.len as usize]
    }

    pub fn mode_count(&self) -> usize {
        self.len as usize
    }

    /// Total photon number of the basis element.
    pub fn total(&self) -> u32 {
        self.counts().iter().map(|&n| n as u32).sum()
    }

    fn concat(&self, other: &Self) -> Result<Self> {
        let len = self.mode_count() + other.mode_count();
        if len > MAX_MODES {
            return Err(Error::ModeCountUnsupported {
                got: len,
                max: MAX_MODES,
            });
        }
        let mut inline = [0u16; MAX_MODES];
        inline[..self.mode_count()].copy_from_slice(self.counts());
        inline[self.mode_count()..len].copy_from_slice(other.counts());
        Ok(Self {
            len: len as u8,
            counts: inline,
        })
    }
}

impl fmt::Debug for OccupationVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        for (i, n) in self.counts().iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{n}")?;
        }
        write!(f, ">")
    }
}

impl fmt::Display for OccupationVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Truncation record for a constructor that had to cut a Poisson tail.
#[derive(Clone, Copy, Debug)]
pub struct TruncationReport {
    /// Probability mass discarded by the cutoff, before renormalisation.
    pub tail_mass: f64,
    /// Per-mode cutoff actually used.
    pub cutoff_used: u16,
}

/// Normalised multimode pure state as a sparse amplitude map.
///
/// Invariants, enforced at construction:
/// - every key has exactly `mode_count` modes and entries `<= cutoff`;
/// - the squared-amplitude sum is 1 within [`NORM_TOL`];
/// - no stored amplitude has magnitude below [`PRUNE_THRESHOLD`];
/// - the support holds at most [`SUPPORT_CAP`] amplitudes.
///
/// States are immutable after construction; all operations are pure
/// functions and safe to evaluate concurrently.
#[derive(Clone, Debug)]
pub struct SparseState {
    mode_count: usize,
    cutoff: u16,
    amplitudes: BTreeMap<OccupationVector, Complex64>,
}

impl SparseState {
    fn from_map(
        mode_count: usize,
        cutoff: u16,
        mut amplitudes: BTreeMap<OccupationVector, Complex64>,
        renormalize: bool,
    ) -> Result<Self> {
        if mode_count == 0 || mode_count > MAX_MODES {
            return Err(Error::ModeCountUnsupported {
                got: mode_count,
                max: MAX_MODES,
            });
        }
        for (occ, amp) in &amplitudes {
            if occ.mode_count() != mode_count {
                return Err(Error::ModeCountMismatch {
                    left: occ.mode_count(),
                    right: mode_count,
                });
            }
            for &n in occ.counts() {
                if n > cutoff {
                    return Err(Error::CutoffExceeded {
                        occupation: n,
                        cutoff,
                    });
                }
            }
            if !amp.re.is_finite() || !amp.im.is_finite() {
                return Err(Error::NonFinite { name: "amplitude" });
            }
        }
        if renormalize {
            let norm = kahan_sum(amplitudes.values().map(|a| a.norm_sqr())).sqrt();
            if norm <= DEGENERACY_TOL {
                return Err(Error::DegenerateSuperposition { norm });
            }
            let scale = 1.0 / norm;
            amplitudes.values_mut().for_each(|a| *a *= scale);
        }
        amplitudes.retain(|_, a| a.norm() >= PRUNE_THRESHOLD);
        if amplitudes.len() as u64 > SUPPORT_CAP {
            return Err(Error::SupportCapExceeded {
                needed: amplitudes.len() as u64,
                cap: SUPPORT_CAP,
            });
        }
        let norm_sqr = kahan_sum(amplitudes.values().map(|a| a.norm_sqr()));
        let error = (norm_sqr - 1.0).abs();
        if error > NORM_TOL {
            return Err(Error::NotNormalized { error });
        }
        Ok(Self {
            mode_count,
            cutoff,
            amplitudes,
        })
    }

    pub fn mode_count(&self) -> usize {
        self.mode_count
    }

    pub fn cutoff(&self) -> u16 {
        self.cutoff
    }

    /// Number of stored amplitudes.
    pub fn support_len(&self) -> usize {
        self.amplitudes.len()
    }

    /// Amplitude at a basis element, zero if not stored.
    pub fn amplitude(&self, occ: &OccupationVector) -> Complex64 {
        self.amplitudes
            .get(occ)
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    /// Iterate over the stored support in ascending key order.
    pub fn iter(&self) -> impl Iterator<Item = (&OccupationVector, &Complex64)> {
        self.amplitudes.iter()
    }

    pub fn norm_sqr(&self) -> f64 {
        kahan_sum(self.amplitudes.values().map(|a| a.norm_sqr()))
    }

    /// Photon-number distribution of a single mode, indexed by count.
    pub fn mode_marginal(&self, mode: usize) -> Result<Vec<f64>> {
        if mode >= self.mode_count {
            return Err(Error::ModeIndexOutOfRange {
                index: mode,
                mode_count: self.mode_count,
            });
        }
        let mut marginal = vec![0.0; self.cutoff as usize + 1];
        for (occ, amp) in &self.amplitudes {
            marginal[occ.counts()[mode] as usize] += amp.norm_sqr();
        }
        Ok(marginal)
    }

    pub(crate) fn map(&self) -> &BTreeMap<OccupationVector, Complex64> {
        &self.amplitudes
    }
}

/// Basis state with amplitude 1 at `occ`.
pub fn fock_basis(occ: &OccupationVector, cutoff: u16) -> Result<SparseState> {
    let mut map = BTreeMap::new();
    map.insert(*occ, Complex64::new(1.0, 0.0));
    SparseState::from_map(occ.mode_count(), cutoff, map, false)
}

/// Single-mode coherent state `|alpha>` with Poissonian amplitudes
/// `e^{-|alpha|^2/2} alpha^n / sqrt(n!)`, truncated at the smallest cutoff
/// whose tail mass is at most `epsilon` and renormalised.
///
/// Masses are built relative to the modal term and normalised by their own
/// sum, so large `|alpha|` neither overflows `alpha^n` nor underflows
/// `e^{-|alpha|^2/2}`.
pub fn coherent_mode(alpha: Complex64, epsilon: f64) -> Result<(SparseState, TruncationReport)> {
    if !alpha.re.is_finite() || !alpha.im.is_finite() {
        return Err(Error::NonFinite { name: "alpha" });
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            reason: format!("{epsilon} outside (0, 1)"),
        });
    }
    let lambda = alpha.norm_sqr();
    if lambda == 0.0 {
        let vacuum = fock_basis(&OccupationVector::new(&[0])?, 0)?;
        return Ok((
            vacuum,
            TruncationReport {
                tail_mass: 0.0,
                cutoff_used: 0,
            },
        ));
    }
    if lambda >= MAX_OCCUPATION as f64 {
        // The Poisson bulk sits at n ~ lambda, beyond any admissible cutoff.
        return Err(Error::CutoffCapExceeded {
            needed: lambda as u64,
            cap: MAX_OCCUPATION as u64,
        });
    }

    // Poisson masses relative to the modal mass, via the exact recurrence
    // p_{n+1}/p_n = lambda/(n+1) anchored at the mode. This keeps every
    // ratio O(1)-accurate for arbitrarily large lambda, where both
    // e^{-lambda} and lambda^n overflow the double range.
    let mode = lambda.floor() as usize;
    let mut rel = vec![0.0f64; mode + 1];
    rel[mode] = 1.0;
    for n in (0..mode).rev() {
        rel[n] = rel[n + 1] * (n + 1) as f64 / lambda;
    }
    let negligible = epsilon * 1e-6;
    loop {
        let n = rel.len();
        let next = rel[n - 1] * lambda / n as f64;
        rel.push(next);
        if n >= mode && next < negligible {
            break;
        }
        if n as u64 > MAX_OCCUPATION as u64 {
            return Err(Error::CutoffCapExceeded {
                needed: n as u64,
                cap: MAX_OCCUPATION as u64,
            });
        }
    }
    // Suffix masses accumulated from the small end for accuracy near the
    // truncation target.
    let mut suffix = vec![0.0f64; rel.len() + 1];
    for n in (0..rel.len()).rev() {
        suffix[n] = suffix[n + 1] + rel[n];
    }
    let total = suffix[0];
    let cutoff = match (0..rel.len()).find(|&c| suffix[c + 1] / total <= epsilon) {
        Some(c) if c <= MAX_OCCUPATION as usize => c as u16,
        Some(c) => {
            return Err(Error::CutoffCapExceeded {
                needed: c as u64,
                cap: MAX_OCCUPATION as u64,
            })
        }
        None => unreachable!("suffix of the last kept mass is below epsilon by construction"),
    };
    let tail_mass = suffix[cutoff as usize + 1] / total;

    let phase = alpha.arg();
    let mut map = BTreeMap::new();
    for (n, r) in rel.iter().enumerate().take(cutoff as usize + 1) {
        let magnitude = (r / total).sqrt();
        if magnitude == 0.0 {
            continue;
        }
        let amp = Complex64::from_polar(magnitude, n as f64 * phase);
        map.insert(OccupationVector::new(&[n as u16])?, amp);
    }
    let state = SparseState::from_map(1, cutoff, map, true)?;
    Ok((
        state,
        TruncationReport {
            tail_mass,
            cutoff_used: cutoff,
        },
    ))
}

/// Normalised superposition of states sharing mode count and cutoff.
///
/// Returns the state together with the norm of the unnormalised sum, which
/// carries the overlap information needed for closed-form normalisation
/// constants. A norm at or below [`DEGENERACY_TOL`] is a cancellation to
/// zero and is rejected.
pub fn superpose(terms: &[(Complex64, &SparseState)]) -> Result<(SparseState, f64)> {
    let Some(((_, first), rest)) = terms.split_first() else {
        return Err(Error::InvalidParameter {
            name: "terms",
            reason: "empty superposition".into(),
        });
    };
    for (_, s) in rest {
        if s.mode_count() != first.mode_count() {
            return Err(Error::ModeCountMismatch {
                left: first.mode_count(),
                right: s.mode_count(),
            });
        }
        if s.cutoff() != first.cutoff() {
            return Err(Error::CutoffMismatch {
                left: first.cutoff(),
                right: s.cutoff(),
            });
        }
    }
    let mut sum: BTreeMap<OccupationVector, Complex64> = BTreeMap::new();
    for (coeff, state) in terms {
        if !coeff.re.is_finite() || !coeff.im.is_finite() {
            return Err(Error::NonFinite {
                name: "coefficient",
            });
        }
        for (occ, amp) in state.iter() {
            *sum.entry(*occ).or_insert(Complex64::new(0.0, 0.0)) += coeff * amp;
        }
    }
    let norm = kahan_sum(sum.values().map(|a| a.norm_sqr())).sqrt();
    if norm <= DEGENERACY_TOL {
        return Err(Error::DegenerateSuperposition { norm });
    }
    let scale = 1.0 / norm;
    sum.values_mut().for_each(|a| *a *= scale);
    let state = SparseState::from_map(first.mode_count(), first.cutoff(), sum, false)?;
    Ok((state, norm))
}

/// Tensor product of normalised factors, modes concatenated left to right.
///
/// The post-prune support size of each pairwise product is counted before
/// any amplitude is materialised, so exceeding [`SUPPORT_CAP`] fails fast
/// instead of exhausting memory.
pub fn tensor(factors: &[SparseState]) -> Result<SparseState> {
    let Some((first, rest)) = factors.split_first() else {
        return Err(Error::InvalidParameter {
            name: "factors",
            reason: "empty tensor product".into(),
        });
    };
    let mut total_modes = 0usize;
    let mut cutoff = 0u16;
    for f in factors {
        let err = (f.norm_sqr() - 1.0).abs();
        if err > NORM_TOL {
            return Err(Error::NotNormalized { error: err });
        }
        total_modes += f.mode_count();
        cutoff = cutoff.max(f.cutoff());
    }
    if total_modes > MAX_MODES {
        return Err(Error::ModeCountUnsupported {
            got: total_modes,
            max: MAX_MODES,
        });
    }

    // Sorted-by-key pair lists; keys stay sorted through each merge because
    // concatenation orders lexicographically by (left, right).
    let mut acc: Vec<(OccupationVector, Complex64)> =
        first.iter().map(|(k, v)| (*k, *v)).collect();
    for factor in rest {
        let fac: Vec<(OccupationVector, Complex64)> =
            factor.iter().map(|(k, v)| (*k, *v)).collect();
        let needed = pruned_pair_count(&acc, &fac);
        if needed > SUPPORT_CAP {
            return Err(Error::SupportCapExceeded {
                needed,
                cap: SUPPORT_CAP,
            });
        }
        let fac_max = fac
            .iter()
            .map(|(_, a)| a.norm())
            .fold(0.0f64, f64::max);
        let mut next = Vec::with_capacity(needed as usize);
        for (ka, aa) in &acc {
            let na = aa.norm();
            if na * fac_max < PRUNE_THRESHOLD {
                continue;
            }
            for (kb, ab) in &fac {
                if na * ab.norm() < PRUNE_THRESHOLD {
                    continue;
                }
                next.push((ka.concat(kb)?, aa * ab));
            }
        }
        acc = next;
    }
    let map: BTreeMap<_, _> = acc.into_iter().collect();
    SparseState::from_map(total_modes, cutoff, map, false)
}

/// Exact count of pairwise products with magnitude at or above the pruning
/// threshold, without materialising them.
fn pruned_pair_count(
    a: &[(OccupationVector, Complex64)],
    b: &[(OccupationVector, Complex64)],
) -> u64 {
    let mut na: Vec<f64> = a.iter().map(|(_, amp)| amp.norm()).collect();
    let mut nb: Vec<f64> = b.iter().map(|(_, amp)| amp.norm()).collect();
    na.sort_unstable_by(|x, y| y.total_cmp(x));
    nb.sort_unstable_by(|x, y| y.total_cmp(x));
    let mut count = 0u64;
    let mut j = nb.len();
    for &x in &na {
        while j > 0 && x * nb[j - 1] < PRUNE_THRESHOLD {
            j -= 1;
        }
        if j == 0 {
            break;
        }
        count += j as u64;
    }
    count
}

/// Inner product `<a|b>` over the shared support.
pub fn overlap(a: &SparseState, b: &SparseState) -> Result<Complex64> {
    if a.mode_count() != b.mode_count() {
        return Err(Error::ModeCountMismatch {
            left: a.mode_count(),
            right: b.mode_count(),
        });
    }
    Ok(raw_overlap(a.map(), b.map()))
}

/// `<a|b>` for raw amplitude maps. Merge-join over the sorted keys.
pub(crate) fn raw_overlap(
    a: &BTreeMap<OccupationVector, Complex64>,
    b: &BTreeMap<OccupationVector, Complex64>,
) -> Complex64 {
    let mut ia = a.iter().peekable();
    let mut ib = b.iter().peekable();
    let mut sum = Complex64::new(0.0, 0.0);
    while let (Some(&(ka, va)), Some(&(kb, vb))) = (ia.peek(), ib.peek()) {
        match ka.cmp(kb) {
            std::cmp::Ordering::Less => {
                ia.next();
            }
            std::cmp::Ordering::Greater => {
                ib.next();
            }
            std::cmp::Ordering::Equal => {
                sum += va.conj() * vb;
                ia.next();
                ib.next();
            }
        }
    }
    sum
}

/// First and second moments of the number operators of two modes.
#[derive(Clone, Copy, Debug)]
pub struct NumberMoments {
    pub mean_i: f64,
    pub mean_j: f64,
    /// `<n_i n_j>`; the second moment `<n_i^2>` when `i == j`.
    pub product_mean: f64,
    /// `Cov(n_i, n_j)`; the variance of mode `i` when `i == j`.
    pub cov: f64,
}

/// Exact means, product mean and covariance of `n_i` and `n_j`.
pub fn number_moments(state: &SparseState, i: usize, j: usize) -> Result<NumberMoments> {
    let m = state.mode_count();
    for index in [i, j] {
        if index >= m {
            return Err(Error::ModeIndexOutOfRange {
                index,
                mode_count: m,
            });
        }
    }
    let mut mean_i = KahanSum::default();
    let mut mean_j = KahanSum::default();
    let mut product_mean = KahanSum::default();
    for (occ, amp) in state.iter() {
        let p = amp.norm_sqr();
        let ni = occ.counts()[i] as f64;
        let nj = occ.counts()[j] as f64;
        mean_i.add(p * ni);
        mean_j.add(p * nj);
        product_mean.add(p * ni * nj);
    }
    let (mean_i, mean_j, product_mean) = (mean_i.value(), mean_j.value(), product_mean.value());
    Ok(NumberMoments {
        mean_i,
        mean_j,
        product_mean,
        cov: product_mean - mean_i * mean_j,
    })
}

/// All mode means and the full number-covariance matrix in one pass.
///
/// Returns `(means, cov)` with `cov` row-major `M x M`; the matrix is
/// symmetric by construction.
pub fn number_covariances(state: &SparseState) -> (Vec<f64>, Vec<f64>) {
    let m = state.mode_count();
    let mut means = vec![KahanSum::default(); m];
    let mut second = vec![KahanSum::default(); m * m];
    for (occ, amp) in state.iter() {
        let p = amp.norm_sqr();
        let counts = occ.counts();
        for i in 0..m {
            let ni = counts[i] as f64;
            means[i].add(p * ni);
            for j in i..m {
                second[i * m + j].add(p * ni * counts[j] as f64);
            }
        }
    }
    let means: Vec<f64> = means.iter().map(KahanSum::value).collect();
    let mut cov = vec![0.0; m * m];
    for i in 0..m {
        for j in i..m {
            let c = second[i * m + j].value() - means[i] * means[j];
            cov[i * m + j] = c;
            cov[j * m + i] = c;
        }
    }
    (means, cov)
}

/// Apply the diagonal phase unitary `exp(i sum_j theta_j n_j)`.
///
/// Amplitude magnitudes are untouched, so the norm is preserved and no
/// renormalisation check is needed.
pub fn apply_phase(state: &SparseState, theta: &[f64]) -> Result<SparseState> {
    if theta.len() != state.mode_count() {
        return Err(Error::PhaseLengthMismatch {
            got: theta.len(),
            expected: state.mode_count(),
        });
    }
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite { name: "theta" });
    }
    let amplitudes = state
        .iter()
        .map(|(occ, amp)| {
            let phase: f64 = occ
                .counts()
                .iter()
                .zip(theta)
                .map(|(&n, t)| n as f64 * t)
                .sum();
            (*occ, amp * Complex64::from_polar(1.0, phase))
        })
        .collect();
    Ok(SparseState {
        mode_count: state.mode_count(),
        cutoff: state.cutoff(),
        amplitudes,
    })
}

/// Seeded random-state construction shared by tests across modules.
#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use rand::rngs::StdRng;
    use rand::Rng;

    /// Random normalised sparse state over `modes` modes with occupations
    /// up to `cutoff`, built through the public constructors.
    pub(crate) fn random_state(
        rng: &mut StdRng,
        modes: usize,
        cutoff: u16,
        terms: usize,
    ) -> (SparseState, Vec<OccupationVector>) {
        loop {
            let mut basis: Vec<OccupationVector> = Vec::new();
            let mut pairs: Vec<(Complex64, SparseState)> = Vec::new();
            for _ in 0..terms {
                let counts: Vec<u16> = (0..modes).map(|_| rng.gen_range(0..=cutoff)).collect();
                let o = OccupationVector::new(&counts).unwrap();
                if basis.contains(&o) {
                    continue;
                }
                basis.push(o);
                let coeff = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                pairs.push((coeff, fock_basis(&o, cutoff).unwrap()));
            }
            let refs: Vec<(Complex64, &SparseState)> =
                pairs.iter().map(|(cf, s)| (*cf, s)).collect();
            match superpose(&refs) {
                Ok((state, _)) => return (state, basis),
                Err(_) => continue,
            }
        }
    }
}
