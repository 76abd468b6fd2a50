//! Probability measures on finite-depth ρ-trees, represented by exact
//! cylinder masses, together with the local-entropy machinery: conditional
//! symbol distributions, the information function, per-node child entropies,
//! and the Monte-Carlo lower dimension estimate obtained from local entropy
//! averages along sampled paths.

use std::collections::HashMap;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::Rng;

use crate::error::{word_string, Error, Result};
use crate::rng::{rng_from_seed, split_seed};

/// A finite word over the tree alphabet; symbols are `0..alphabet_size`.
pub type Word = Vec<u8>;

/// Tolerance for float-mode mass conservation and normalization checks.
pub const MASS_TOL: f64 = 1e-12;

/// Scalar type a tree measure stores masses in. Two instances are provided:
/// `f64` and exact `BigRational`.
pub trait Mass: Clone + PartialEq + PartialOrd + Send + Sync + 'static {
    const EXACT: bool;
    fn zero() -> Self;
    fn one() -> Self;
    fn add(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn div(&self, other: &Self) -> Self;
    fn to_f64(&self) -> f64;
    /// Exact embedding: every finite f64 is a rational number.
    fn from_f64(x: f64) -> Self;
    fn is_zero(&self) -> bool;
    fn render(&self) -> String;
}

impl Mass for f64 {
    const EXACT: bool = false;
    fn zero() -> Self { 0.0 }
    fn one() -> Self { 1.0 }
    fn add(&self, other: &Self) -> Self { self + other }
    fn mul(&self, other: &Self) -> Self { self * other }
    fn div(&self, other: &Self) -> Self { self / other }
    fn to_f64(&self) -> f64 { *self }
    fn from_f64(x: f64) -> Self { x }
    fn is_zero(&self) -> bool { *self == 0.0 }
    fn render(&self) -> String { format!("{self:.17e}") }
}

impl Mass for BigRational {
    const EXACT: bool = true;
    fn zero() -> Self { <BigRational as Zero>::zero() }
    fn one() -> Self { <BigRational as One>::one() }
    fn add(&self, other: &Self) -> Self { self + other }
    fn mul(&self, other: &Self) -> Self { self * other }
    fn div(&self, other: &Self) -> Self { self / other }
    fn to_f64(&self) -> f64 {
        // numer/denom may exceed f64 range individually; scale down together
        let numer = self.numer();
        let denom = self.denom();
        let nb = numer.bits() as i64;
        let db = denom.bits() as i64;
        let shift = (nb.max(db) - 900).max(0) as u64;
        let n = (numer >> shift).to_string().parse::<f64>().unwrap_or(f64::NAN);
        let d = (denom >> shift).to_string().parse::<f64>().unwrap_or(f64::NAN);
        n / d
    }
    fn from_f64(x: f64) -> Self {
        BigRational::from_float(x).unwrap_or_else(<BigRational as Zero>::zero)
    }
    fn is_zero(&self) -> bool { Zero::is_zero(self) }
    fn render(&self) -> String { format!("{}/{}", self.numer(), self.denom()) }
}

/// Conditional distribution over the symbol set at some node.
#[derive(Debug, Clone, PartialEq)]
pub struct ChildDistribution {
    pub probs: Vec<f64>,
}

impl ChildDistribution {
    pub fn new(probs: Vec<f64>) -> Self {
        ChildDistribution { probs }
    }

    /// Shannon entropy in nats, with 0 log 0 = 0.
    pub fn entropy(&self) -> f64 {
        shannon_entropy(&self.probs)
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> u8 {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut last_positive = 0u8;
        for (i, p) in self.probs.iter().enumerate() {
            if *p > 0.0 {
                last_positive = i as u8;
                acc += p;
                if u < acc {
                    return i as u8;
                }
            }
        }
        // rounding pushed the cumulative sum below 1; fall back to the last
        // positive symbol
        last_positive
    }
}

pub fn shannon_entropy(probs: &[f64]) -> f64 {
    -probs.iter().filter(|p| **p > 0.0).map(|p| p * p.ln()).sum::<f64>()
}

/// Interface shared by explicit tree measures and generative digit measures:
/// everything the local-entropy estimators need is the conditional symbol
/// distribution at a node.
pub trait CylinderMeasure: Send + Sync {
    fn alphabet_size(&self) -> usize;

    /// Maximum usable word length; `None` for generative measures.
    fn max_depth(&self) -> Option<usize>;

    /// Conditional distribution over the next symbol given the word so far.
    /// Errors when the word has zero mass or exceeds the depth.
    fn child_probs(&self, word: &[u8]) -> Result<Vec<f64>>;

    /// The conditional measure past `word`, renormalized, as a fresh measure.
    fn restrict_dyn(&self, word: &[u8]) -> Result<Box<dyn CylinderMeasure>>;

    /// Stable identifier of the measure's internal state, when the measure
    /// has finitely many restriction states (memoryless or Markov). Used for
    /// caching; `None` disables caching.
    fn state_key(&self) -> Option<u64> {
        None
    }
}

/// Exact measure on a finite-depth ρ-tree given by its cylinder masses.
/// Only positive-mass words are stored.
#[derive(Debug, Clone)]
pub struct TreeMeasure<M: Mass> {
    alphabet_size: usize,
    depth: usize,
    rho: f64,
    masses: HashMap<Word, M>,
}

pub type ExactTree = TreeMeasure<BigRational>;
pub type FloatTree = TreeMeasure<f64>;

impl<M: Mass> TreeMeasure<M> {
    /// Build from a full table of positive cylinder masses, validating the
    /// normalization and mass-conservation invariants (exactly in rational
    /// mode, within `MASS_TOL` in float mode).
    pub fn from_masses(
        alphabet_size: usize,
        depth: usize,
        rho: f64,
        masses: HashMap<Word, M>,
    ) -> Result<Self> {
        if alphabet_size == 0 {
            return Err(Error::invalid("alphabet must be nonempty"));
        }
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::invalid(format!("rho = {rho} outside (0,1)")));
        }
        let tm = TreeMeasure { alphabet_size, depth, rho, masses };
        tm.validate()?;
        Ok(tm)
    }

    fn validate(&self) -> Result<()> {
        let root = self
            .masses
            .get(&Vec::new())
            .ok_or_else(|| Error::invalid("missing root mass"))?;
        Self::check_eq(root, &M::one(), "root mass != 1")?;
        for (word, mass) in &self.masses {
            if word.len() > self.depth {
                return Err(Error::DepthExceeded { len: word.len(), depth: self.depth });
            }
            if mass.to_f64() < 0.0 {
                return Err(Error::invalid(format!(
                    "negative mass at `{}`",
                    word_string(word)
                )));
            }
            if word.len() < self.depth {
                let mut sum = M::zero();
                let mut child = word.clone();
                child.push(0);
                for b in 0..self.alphabet_size {
                    *child.last_mut().unwrap() = b as u8;
                    if let Some(m) = self.masses.get(&child) {
                        sum = sum.add(m);
                    }
                }
                Self::check_eq(&sum, mass, "mass not conserved")?;
            }
        }
        Ok(())
    }

    fn check_eq(a: &M, b: &M, what: &str) -> Result<()> {
        let ok = if M::EXACT {
            a == b
        } else {
            (a.to_f64() - b.to_f64()).abs() <= MASS_TOL
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("{what}: {} vs {}", a.render(), b.render())))
        }
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn positive_words(&self) -> impl Iterator<Item = (&Word, &M)> {
        self.masses.iter()
    }

    /// μ[a]; zero for positive-length words outside the support.
    pub fn cylinder_mass(&self, word: &[u8]) -> Result<f64> {
        Ok(self.cylinder_mass_exact(word)?.map_or(0.0, |m| m.to_f64()))
    }

    pub fn cylinder_mass_exact(&self, word: &[u8]) -> Result<Option<&M>> {
        if word.len() > self.depth {
            return Err(Error::DepthExceeded { len: word.len(), depth: self.depth });
        }
        Ok(self.masses.get(word))
    }

    /// μ(·|a): probs[b] = μ[ab]/μ[a].
    pub fn child_distribution(&self, word: &[u8]) -> Result<ChildDistribution> {
        Ok(ChildDistribution::new(self.child_probs(word)?))
    }

    fn child_probs_inner(&self, word: &[u8]) -> Result<Vec<f64>> {
        if word.len() >= self.depth {
            return Err(Error::DepthExceeded { len: word.len() + 1, depth: self.depth });
        }
        let parent = self
            .masses
            .get(word)
            .ok_or_else(|| Error::UndefinedConditional { word: word_string(word) })?;
        if parent.is_zero() {
            return Err(Error::UndefinedConditional { word: word_string(word) });
        }
        let mut probs = vec![0.0; self.alphabet_size];
        let mut child = word.to_vec();
        child.push(0);
        for (b, slot) in probs.iter_mut().enumerate() {
            *child.last_mut().unwrap() = b as u8;
            if let Some(m) = self.masses.get(&child) {
                *slot = m.div(parent).to_f64();
            }
        }
        Ok(probs)
    }

    /// I_n(a) = −log μ(a_n | a_1..a_{n−1}), natural log, 1-indexed `n`.
    pub fn information(&self, word: &[u8], n: usize) -> Result<f64> {
        information_of(self, word, n)
    }

    /// H(X_{n+1} | a) — entropy of the conditional symbol distribution.
    pub fn child_entropy(&self, word: &[u8]) -> Result<f64> {
        Ok(self.child_distribution(word)?.entropy())
    }

    /// (1/N) Σ_{n=1..N} H(X_n | a_1..a_{n−1}) along `word`.
    pub fn local_entropy_average(&self, word: &[u8]) -> Result<LocalEntropyAverage> {
        local_entropy_average_of(self, word)
    }

    pub fn sample_path(&self, seed: u64, n: usize) -> Result<Word> {
        if n > self.depth {
            return Err(Error::DepthExceeded { len: n, depth: self.depth });
        }
        sample_path_of(self, &mut rng_from_seed(seed), n)
    }

    /// Monte-Carlo lower bound for the dimension of the measure in the d_ρ
    /// metric (tree morphism = identity).
    pub fn dim_lower_estimate(
        &self,
        n_samples: usize,
        n_depth: usize,
        seed: u64,
    ) -> Result<DimEstimate> {
        if n_depth > self.depth {
            return Err(Error::DepthExceeded { len: n_depth, depth: self.depth });
        }
        dim_lower_estimate_of(self, self.rho, n_samples, n_depth, seed)
    }

    /// Conditional measure on the subtree rooted at `word`, renormalized,
    /// with depth reduced by |word|.
    pub fn restrict(&self, word: &[u8]) -> Result<TreeMeasure<M>> {
        let root = self
            .masses
            .get(word)
            .filter(|m| !m.is_zero())
            .ok_or_else(|| Error::UndefinedConditional { word: word_string(word) })?;
        if word.len() > self.depth {
            return Err(Error::DepthExceeded { len: word.len(), depth: self.depth });
        }
        let mut masses = HashMap::new();
        for (w, m) in &self.masses {
            if w.len() >= word.len() && w.starts_with(word) {
                masses.insert(w[word.len()..].to_vec(), m.div(root));
            }
        }
        TreeMeasure::from_masses(self.alphabet_size, self.depth - word.len(), self.rho, masses)
    }

    /// Plain-text dump, one `word<TAB>mass` line per positive-mass word,
    /// sorted by (length, word).
    pub fn to_text(&self) -> String {
        let mut words: Vec<&Word> = self.masses.keys().collect();
        words.sort_by(|a, b| (a.len(), *a).cmp(&(b.len(), *b)));
        let mut out = String::new();
        for w in words {
            let _ = writeln!(out, "{}\t{}", word_string(w), self.masses[w].render());
        }
        out
    }
}

impl<M: Mass> CylinderMeasure for TreeMeasure<M> {
    fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    fn max_depth(&self) -> Option<usize> {
        Some(self.depth)
    }

    fn child_probs(&self, word: &[u8]) -> Result<Vec<f64>> {
        self.child_probs_inner(word)
    }

    fn restrict_dyn(&self, word: &[u8]) -> Result<Box<dyn CylinderMeasure>> {
        Ok(Box::new(self.restrict(word)?))
    }
}

/// Result of a local entropy average; `empty` flags the length-zero word.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalEntropyAverage {
    pub value: f64,
    pub empty: bool,
}

/// Monte-Carlo dimension estimate with its standard error and the
/// martingale-LLN diagnostic max |(−log μ[x_1^N] − Σ H)/N| over samples.
#[derive(Debug, Clone, Copy)]
pub struct DimEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub martingale_diagnostic: f64,
    pub n_samples: usize,
    pub n_depth: usize,
}

pub fn information_of(m: &(impl CylinderMeasure + ?Sized), word: &[u8], n: usize) -> Result<f64> {
    if n == 0 || n > word.len() {
        return Err(Error::invalid(format!("information index {n} outside 1..={}", word.len())));
    }
    let probs = m.child_probs(&word[..n - 1])?;
    let p = probs[word[n - 1] as usize];
    if p <= 0.0 {
        return Err(Error::InfiniteInformation {
            word: word_string(&word[..n - 1]),
            symbol: word[n - 1],
        });
    }
    Ok(-p.ln())
}

pub fn local_entropy_average_of(
    m: &(impl CylinderMeasure + ?Sized),
    word: &[u8],
) -> Result<LocalEntropyAverage> {
    if word.is_empty() {
        return Ok(LocalEntropyAverage { value: 0.0, empty: true });
    }
    let mut sum = 0.0;
    for n in 0..word.len() {
        sum += shannon_entropy(&m.child_probs(&word[..n])?);
    }
    Ok(LocalEntropyAverage { value: sum / word.len() as f64, empty: false })
}

pub fn sample_path_of<R: Rng>(
    m: &(impl CylinderMeasure + ?Sized),
    rng: &mut R,
    n: usize,
) -> Result<Word> {
    let mut word = Vec::with_capacity(n);
    for _ in 0..n {
        let dist = ChildDistribution::new(m.child_probs(&word)?);
        word.push(dist.sample(rng));
    }
    Ok(word)
}

/// Sample `n_samples` paths of length `n_depth`, average the per-path local
/// entropy means, and divide by log(1/ρ). Also reports the martingale-LLN
/// diagnostic.
pub fn dim_lower_estimate_of(
    m: &(impl CylinderMeasure + ?Sized),
    rho: f64,
    n_samples: usize,
    n_depth: usize,
    seed: u64,
) -> Result<DimEstimate> {
    if n_samples == 0 {
        return Err(Error::invalid("n_samples must be positive"));
    }
    if n_depth == 0 {
        return Err(Error::invalid("n_depth must be positive"));
    }
    let log_inv_rho = -rho.ln();
    let mut values = Vec::with_capacity(n_samples);
    let mut diagnostic = 0.0f64;
    for i in 0..n_samples {
        let mut rng = rng_from_seed(split_seed(seed, i as u64));
        let mut word: Word = Vec::with_capacity(n_depth);
        let mut info_sum = 0.0;
        let mut entropy_sum = 0.0;
        for _ in 0..n_depth {
            let probs = m.child_probs(&word)?;
            entropy_sum += shannon_entropy(&probs);
            let dist = ChildDistribution::new(probs);
            let sym = dist.sample(&mut rng);
            let p = dist.probs[sym as usize];
            info_sum += -p.ln();
            word.push(sym);
        }
        let n = n_depth as f64;
        diagnostic = diagnostic.max(((info_sum - entropy_sum) / n).abs());
        values.push(entropy_sum / n / log_inv_rho);
    }
    let (mean, stderr) = mean_stderr(&values);
    Ok(DimEstimate { mean, stderr, martingale_diagnostic: diagnostic, n_samples, n_depth })
}

pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Depth-first traversal of the positive-mass words of length `depth`,
/// with backtracking (no per-node allocation of words).
pub fn for_each_positive_leaf<M, F>(m: &M, depth: usize, leaf: &mut F) -> Result<()>
where
    M: CylinderMeasure + ?Sized,
    F: FnMut(&[u8], f64),
{
    fn rec<M, F>(m: &M, depth: usize, word: &mut Word, mass: f64, leaf: &mut F) -> Result<()>
    where
        M: CylinderMeasure + ?Sized,
        F: FnMut(&[u8], f64),
    {
        if word.len() == depth {
            leaf(word, mass);
            return Ok(());
        }
        let probs = m.child_probs(word)?;
        for (sym, p) in probs.iter().enumerate() {
            if *p <= 0.0 {
                continue;
            }
            word.push(sym as u8);
            rec(m, depth, word, mass * p, leaf)?;
            word.pop();
        }
        Ok(())
    }
    let mut word = Vec::with_capacity(depth);
    rec(m, depth, &mut word, 1.0, leaf)
}

/// Exact rational from small integers; convenience for tests and builders.
pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn big_rational_abs_diff(a: &BigRational, b: &BigRational) -> BigRational {
    (a - b).abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_binary(depth: usize) -> ExactTree {
        let mut masses = HashMap::new();
        for len in 0..=depth {
            for idx in 0..(1u32 << len) {
                let word: Word = (0..len).map(|i| ((idx >> (len - 1 - i)) & 1) as u8).collect();
                masses.insert(word, ratio(1, 1 << len));
            }
        }
        TreeMeasure::from_masses(2, depth, 0.5, masses).unwrap()
    }

    fn bernoulli_float(p: f64, depth: usize) -> FloatTree {
        let mut masses = HashMap::new();
        masses.insert(Vec::new(), 1.0);
        for len in 1..=depth {
            for idx in 0..(1u32 << len) {
                let word: Word = (0..len).map(|i| ((idx >> (len - 1 - i)) & 1) as u8).collect();
                let ones = word.iter().filter(|d| **d == 1).count();
                masses.insert(word, p.powi((len - ones) as i32) * (1.0 - p).powi(ones as i32));
            }
        }
        TreeMeasure::from_masses(2, depth, 0.5, masses).unwrap()
    }

    fn point_mass(path: &[u8], alphabet: usize, depth: usize) -> ExactTree {
        let mut masses = HashMap::new();
        for len in 0..=depth {
            masses.insert(path[..len].to_vec(), ratio(1, 1));
        }
        TreeMeasure::from_masses(alphabet, depth, 0.5, masses).unwrap()
    }

    #[test]
    fn cylinder_mass_uniform_binary() {
        let tm = uniform_binary(4);
        assert_eq!(tm.cylinder_mass(&[0, 1]).unwrap(), 0.25);
        assert_eq!(tm.cylinder_mass(&[]).unwrap(), 1.0);
    }

    #[test]
    fn cylinder_mass_bernoulli_09() {
        // 0.9 * 0.9 = 0.81 exactly in f64 arithmetic up to rounding
        let tm = bernoulli_float(0.9, 4);
        assert!((tm.cylinder_mass(&[0, 0]).unwrap() - 0.81).abs() < 1e-15);
    }

    #[test]
    fn cylinder_mass_depth_error() {
        let tm = uniform_binary(2);
        assert!(matches!(
            tm.cylinder_mass(&[0, 0, 0]),
            Err(Error::DepthExceeded { .. })
        ));
    }

    #[test]
    fn child_distribution_memoryless_and_point() {
        let tm = bernoulli_float(0.9, 5);
        for word in [vec![], vec![0], vec![1, 1], vec![0, 1, 0]] {
            let d = tm.child_distribution(&word).unwrap();
            assert!((d.probs[0] - 0.9).abs() < 1e-12);
            assert!((d.probs[1] - 0.1).abs() < 1e-12);
        }
        let pm = point_mass(&[0, 0, 0], 2, 3);
        assert_eq!(pm.child_distribution(&[0, 0]).unwrap().probs, vec![1.0, 0.0]);
        assert!(matches!(
            pm.child_distribution(&[1]),
            Err(Error::UndefinedConditional { .. })
        ));
    }

    #[test]
    fn information_values() {
        let tm = uniform_binary(6);
        assert!((tm.information(&[0, 1, 1], 2).unwrap() - 2f64.ln()).abs() < 1e-12);
        let pm = point_mass(&[1, 1, 1], 2, 3);
        assert_eq!(pm.information(&[1, 1, 1], 3).unwrap(), 0.0);
        let b = bernoulli_float(0.9, 5);
        assert!((b.information(&[0, 1], 2).unwrap() - (-(0.1f64.ln()))).abs() < 1e-12);
        // -log 0.1
        assert!((b.information(&[0, 1], 2).unwrap() + 0.1f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn information_additivity() {
        // -log mass(a) = sum of informations, within 1e-9
        let tm = bernoulli_float(0.7, 8);
        let word = [0u8, 1, 0, 0, 1, 0, 1, 1];
        let total: f64 = (1..=8).map(|n| tm.information(&word, n).unwrap()).sum();
        let mass = tm.cylinder_mass(&word).unwrap();
        assert!(((-mass.ln()) - total).abs() < 1e-9);
    }

    #[test]
    fn infinite_information_is_typed() {
        let pm = point_mass(&[0, 0], 2, 2);
        assert!(matches!(
            pm.information(&[0, 1], 2),
            Err(Error::InfiniteInformation { .. })
        ));
    }

    #[test]
    fn child_entropy_values() {
        let u = uniform_binary(3);
        assert!((u.child_entropy(&[0]).unwrap() - 2f64.ln()).abs() < 1e-12);
        let pm = point_mass(&[0, 0], 2, 2);
        assert_eq!(pm.child_entropy(&[0]).unwrap(), 0.0);
        // oracle: -0.9 ln 0.9 - 0.1 ln 0.1
        let oracle = -(0.9f64 * 0.9f64.ln() + 0.1 * 0.1f64.ln());
        let b = bernoulli_float(0.9, 3);
        assert!((b.child_entropy(&[]).unwrap() - oracle).abs() < 1e-12);
        assert!((oracle - 0.325083).abs() < 1e-6);
    }

    #[test]
    fn local_entropy_average_cases() {
        let u = uniform_binary(5);
        let avg = u.local_entropy_average(&[0, 1, 1, 0]).unwrap();
        assert!(!avg.empty);
        assert!((avg.value - 2f64.ln()).abs() < 1e-12);
        let empty = u.local_entropy_average(&[]).unwrap();
        assert!(empty.empty);
        assert_eq!(empty.value, 0.0);
        let b = bernoulli_float(0.9, 5);
        let oracle = -(0.9f64 * 0.9f64.ln() + 0.1 * 0.1f64.ln());
        assert!((b.local_entropy_average(&[1, 0, 1]).unwrap().value - oracle).abs() < 1e-12);
    }

    #[test]
    fn sample_path_point_mass_and_degenerate() {
        let pm = point_mass(&[1, 1, 1, 1], 2, 4);
        assert_eq!(pm.sample_path(7, 4).unwrap(), vec![1, 1, 1, 1]);
        let b = bernoulli_float(1.0, 4);
        assert_eq!(b.sample_path(3, 4).unwrap(), vec![0, 0, 0, 0]);
    }

    #[test]
    fn sample_path_golden_fixture() {
        // recorded once from the seeded generator; guards reproducibility
        let u = uniform_binary(8);
        let got = u.sample_path(42, 8).unwrap();
        let again = u.sample_path(42, 8).unwrap();
        assert_eq!(got, again);
        assert_eq!(got, vec![0, 0, 1, 1, 1, 0, 0, 1]);
    }

    #[test]
    fn dim_lower_estimate_uniform_binary() {
        let u = uniform_binary(10);
        let est = u.dim_lower_estimate(50, 10, 1).unwrap();
        assert!((est.mean - 1.0).abs() < 1e-9, "constant entropy path");
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn dim_lower_estimate_bernoulli() {
        let b = bernoulli_float(0.9, 10);
        let est = b.dim_lower_estimate(100, 10, 2).unwrap();
        // oracle: H(0.9,0.1)/log 2
        let oracle = -(0.9f64 * 0.9f64.ln() + 0.1 * 0.1f64.ln()) / 2f64.ln();
        assert!((est.mean - oracle).abs() < 1e-12);
        assert!(est.martingale_diagnostic > 0.0);
    }

    #[test]
    fn dim_lower_estimate_zero_samples_errors() {
        let u = uniform_binary(4);
        assert!(u.dim_lower_estimate(0, 4, 1).is_err());
    }

    #[test]
    fn restrict_product_and_point() {
        let b = bernoulli_float(0.9, 6);
        let r = b.restrict(&[0, 1]).unwrap();
        assert_eq!(r.depth(), 4);
        assert!((r.cylinder_mass(&[0, 0]).unwrap() - 0.81).abs() < 1e-12);
        let pm = point_mass(&[1, 1, 1], 2, 3);
        let rp = pm.restrict(&[1]).unwrap();
        assert_eq!(rp.cylinder_mass(&[1, 1]).unwrap(), 1.0);
        assert!(matches!(pm.restrict(&[0]), Err(Error::UndefinedConditional { .. })));
    }

    #[test]
    fn mass_conservation_is_checked() {
        let mut masses: HashMap<Word, f64> = HashMap::new();
        masses.insert(vec![], 1.0);
        masses.insert(vec![0], 0.6);
        masses.insert(vec![1], 0.3); // deficit
        assert!(TreeMeasure::from_masses(2, 1, 0.5, masses).is_err());
    }

    #[test]
    fn text_export_format() {
        let u = uniform_binary(1);
        let text = u.to_text();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "\t1/1");
        assert_eq!(lines[1], "0\t1/2");
        assert_eq!(lines[2], "1\t1/2");
    }
}
