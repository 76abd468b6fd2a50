//! Generative measure descriptions and their realizations: exact tree
//! measures for digit-aligned systems, lazy conditional-distribution measures
//! for deep sampling, and point samplers for linear IFSs and Bernoulli
//! convolutions.

use std::collections::HashMap;
use std::sync::Arc;

use num_rational::BigRational;
use rand::Rng;

use crate::error::{Error, Result};
use crate::tree::{
    shannon_entropy, ChildDistribution, CylinderMeasure, Mass, TreeMeasure, Word,
};

pub const PROB_TOL: f64 = 1e-12;

/// A contracting similarity f(x) = r · O · x + t on R^d, d ≤ 2. The
/// orthogonal part is a rotation by `rotation` radians, optionally composed
/// with a reflection (x-axis flip); both are ignored for d = 1 except that
/// `reflect` flips the sign.
#[derive(Debug, Clone, PartialEq)]
pub struct Similarity {
    pub ratio: f64,
    pub rotation: f64,
    pub reflect: bool,
    pub translation: Vec<f64>,
}

impl Similarity {
    pub fn dim(&self) -> usize {
        self.translation.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self.dim() {
            1 => {
                let sign = if self.reflect { -1.0 } else { 1.0 };
                vec![self.ratio * sign * x[0] + self.translation[0]]
            }
            2 => {
                let (sin, cos) = self.rotation.sin_cos();
                let (mut u, v) = (x[0], x[1]);
                if self.reflect {
                    u = -u;
                }
                vec![
                    self.ratio * (cos * u - sin * v) + self.translation[0],
                    self.ratio * (sin * u + cos * v) + self.translation[1],
                ]
            }
            d => panic!("similarity dimension {d} unsupported"),
        }
    }

    /// Compose self ∘ other as an affine map (matrix, offset).
    fn compose(m: &[[f64; 2]; 2], v: &[f64; 2], f: &Similarity) -> ([[f64; 2]; 2], [f64; 2]) {
        let (sin, cos) = f.rotation.sin_cos();
        let refl = if f.reflect { -1.0 } else { 1.0 };
        // f as matrix form, padded to 2x2 for d=1
        let fm = if f.dim() == 1 {
            [[f.ratio * refl, 0.0], [0.0, 1.0]]
        } else {
            [
                [f.ratio * cos * refl, -f.ratio * sin],
                [f.ratio * sin * refl, f.ratio * cos],
            ]
        };
        let ft = [f.translation[0], *f.translation.get(1).unwrap_or(&0.0)];
        let mut nm = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                nm[i][j] = m[i][0] * fm[0][j] + m[i][1] * fm[1][j];
            }
        }
        let nv = [
            m[0][0] * ft[0] + m[0][1] * ft[1] + v[0],
            m[1][0] * ft[0] + m[1][1] * ft[1] + v[1],
        ];
        (nm, nv)
    }
}

/// Generative description of a measure.
#[derive(Debug, Clone, PartialEq)]
pub enum MeasureSpec {
    /// Product measure on base-`base` digit words; digits are points of
    /// {0..base−1}^d with d ∈ {1,2}.
    BernoulliDigits {
        base: u32,
        digits: Vec<Vec<u8>>,
        probs: Vec<f64>,
    },
    /// Markov chain on a one-dimensional digit set with a row-stochastic
    /// transition matrix.
    MarkovDigits {
        base: u32,
        digits: Vec<u8>,
        transition: Vec<Vec<f64>>,
        initial: Vec<f64>,
    },
    LinearIfs {
        maps: Vec<Similarity>,
        weights: Vec<f64>,
    },
    Product {
        left: Box<MeasureSpec>,
        right: Box<MeasureSpec>,
    },
    /// Law of Σ ±t^n with i.i.d. signs, P(+) = weight; signs are grouped in
    /// blocks of `block_len` for entropy computations.
    BernoulliConvolution {
        contraction: f64,
        weight: f64,
        block_len: usize,
    },
}

/// Closed-form entropy rate (nats per symbol) and dimension of a digit
/// measure. `componentwise_sum` flags values obtained by summing product
/// components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DigitMeasureSummary {
    pub shannon_entropy_per_symbol: f64,
    pub analytic_dimension: f64,
    pub componentwise_sum: bool,
}

fn check_prob_vector(p: &[f64], what: &str) -> Result<()> {
    if p.is_empty() {
        return Err(Error::invalid(format!("{what}: empty probability vector")));
    }
    if p.iter().any(|x| *x < 0.0 || !x.is_finite()) {
        return Err(Error::invalid(format!("{what}: negative or non-finite entry")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > PROB_TOL {
        return Err(Error::invalid(format!("{what}: sums to {sum}, not 1")));
    }
    Ok(())
}

impl MeasureSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            MeasureSpec::BernoulliDigits { base, digits, probs } => {
                if *base < 2 {
                    return Err(Error::invalid("base must be >= 2"));
                }
                if digits.is_empty() || digits.len() != probs.len() {
                    return Err(Error::invalid("digit set and probability vector lengths differ"));
                }
                let d = digits[0].len();
                if d == 0 || d > 2 {
                    return Err(Error::invalid("digit dimension must be 1 or 2"));
                }
                let mut seen = std::collections::HashSet::new();
                for dig in digits {
                    if dig.len() != d {
                        return Err(Error::invalid("digits have mixed dimensions"));
                    }
                    if dig.iter().any(|c| u32::from(*c) >= *base) {
                        return Err(Error::invalid("digit coordinate outside 0..base"));
                    }
                    if !seen.insert(dig.clone()) {
                        return Err(Error::invalid("duplicate digit"));
                    }
                }
                check_prob_vector(probs, "digit probabilities")
            }
            MeasureSpec::MarkovDigits { base, digits, transition, initial } => {
                if *base < 2 {
                    return Err(Error::invalid("base must be >= 2"));
                }
                let n = digits.len();
                if n == 0 || transition.len() != n || initial.len() != n {
                    return Err(Error::invalid("transition/initial sizes must match digit count"));
                }
                if digits.iter().any(|c| u32::from(*c) >= *base) {
                    return Err(Error::invalid("digit outside 0..base"));
                }
                for row in transition {
                    if row.len() != n {
                        return Err(Error::invalid("transition matrix is not square"));
                    }
                    check_prob_vector(row, "transition row")?;
                }
                check_prob_vector(initial, "initial distribution")
            }
            MeasureSpec::LinearIfs { maps, weights } => {
                if maps.is_empty() || maps.len() != weights.len() {
                    return Err(Error::invalid("need one weight per map"));
                }
                let d = maps[0].dim();
                if d == 0 || d > 2 {
                    return Err(Error::invalid("IFS dimension must be 1 or 2"));
                }
                for f in maps {
                    if f.dim() != d {
                        return Err(Error::invalid("IFS maps have mixed dimensions"));
                    }
                    if !(f.ratio > 0.0 && f.ratio < 1.0) {
                        return Err(Error::invalid("contraction ratios must lie in (0,1)"));
                    }
                }
                check_prob_vector(weights, "IFS weights")
            }
            MeasureSpec::Product { left, right } => {
                left.validate()?;
                right.validate()?;
                if left.dim()? + right.dim()? > 2 {
                    return Err(Error::invalid("product dimension exceeds 2"));
                }
                Ok(())
            }
            MeasureSpec::BernoulliConvolution { contraction, weight, block_len } => {
                if !(*contraction > 0.0 && *contraction < 1.0) {
                    return Err(Error::invalid("contraction must lie in (0,1)"));
                }
                if !(*weight > 0.0 && *weight < 1.0) {
                    return Err(Error::invalid("weight must lie in (0,1)"));
                }
                if *block_len == 0 {
                    return Err(Error::invalid("block length must be positive"));
                }
                Ok(())
            }
        }
    }

    pub fn dim(&self) -> Result<usize> {
        Ok(match self {
            MeasureSpec::BernoulliDigits { digits, .. } => digits[0].len(),
            MeasureSpec::MarkovDigits { .. } => 1,
            MeasureSpec::LinearIfs { maps, .. } => maps[0].dim(),
            MeasureSpec::Product { left, right } => left.dim()? + right.dim()?,
            MeasureSpec::BernoulliConvolution { .. } => 1,
        })
    }
}

// ---------------------------------------------------------------------------
// Lazy digit measures
// ---------------------------------------------------------------------------

/// Memoryless digit measure; `child_probs` is the same at every node.
#[derive(Debug, Clone)]
pub struct BernoulliDigitMeasure {
    pub probs: Vec<f64>,
}

impl CylinderMeasure for BernoulliDigitMeasure {
    fn alphabet_size(&self) -> usize {
        self.probs.len()
    }
    fn max_depth(&self) -> Option<usize> {
        None
    }
    fn child_probs(&self, _word: &[u8]) -> Result<Vec<f64>> {
        Ok(self.probs.clone())
    }
    fn restrict_dyn(&self, _word: &[u8]) -> Result<Box<dyn CylinderMeasure>> {
        Ok(Box::new(self.clone()))
    }
    fn state_key(&self) -> Option<u64> {
        Some(0)
    }
}

/// Markov digit measure, conditioned on a start state (`None` = initial
/// distribution).
#[derive(Debug, Clone)]
pub struct MarkovDigitMeasure {
    pub transition: Vec<Vec<f64>>,
    pub initial: Vec<f64>,
    pub start: Option<usize>,
}

impl MarkovDigitMeasure {
    fn probs_from_state(&self, state: Option<usize>) -> Vec<f64> {
        match state {
            None => self.initial.clone(),
            Some(i) => self.transition[i].clone(),
        }
    }

    fn state_after(&self, word: &[u8]) -> Option<usize> {
        word.last().map(|s| *s as usize).or(self.start)
    }

    /// Stationary distribution by power iteration from the initial vector.
    pub fn stationary(&self) -> Vec<f64> {
        let n = self.transition.len();
        let mut pi = self.initial.clone();
        for _ in 0..10_000 {
            let mut next = vec![0.0; n];
            for (i, p) in pi.iter().enumerate() {
                for (j, t) in self.transition[i].iter().enumerate() {
                    next[j] += p * t;
                }
            }
            let delta: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
            pi = next;
            if delta < 1e-15 {
                break;
            }
        }
        pi
    }

    /// Entropy rate Σ_i π_i Σ_j T_ij (−log T_ij) in nats.
    pub fn entropy_rate(&self) -> f64 {
        let pi = self.stationary();
        pi.iter()
            .zip(&self.transition)
            .map(|(p, row)| p * shannon_entropy(row))
            .sum()
    }

    /// Verify the word has positive probability under the chain.
    fn check_word(&self, word: &[u8]) -> Result<()> {
        let mut state = self.start;
        for (k, s) in word.iter().enumerate() {
            let probs = self.probs_from_state(state);
            if probs[*s as usize] <= 0.0 {
                return Err(Error::UndefinedConditional {
                    word: crate::error::word_string(&word[..=k]),
                });
            }
            state = Some(*s as usize);
        }
        Ok(())
    }
}

impl CylinderMeasure for MarkovDigitMeasure {
    fn alphabet_size(&self) -> usize {
        self.transition.len()
    }
    fn max_depth(&self) -> Option<usize> {
        None
    }
    fn child_probs(&self, word: &[u8]) -> Result<Vec<f64>> {
        self.check_word(word)?;
        Ok(self.probs_from_state(self.state_after(word)))
    }
    fn restrict_dyn(&self, word: &[u8]) -> Result<Box<dyn CylinderMeasure>> {
        self.check_word(word)?;
        Ok(Box::new(MarkovDigitMeasure {
            transition: self.transition.clone(),
            initial: self.initial.clone(),
            start: self.state_after(word),
        }))
    }
    fn state_key(&self) -> Option<u64> {
        Some(match self.start {
            None => 0,
            Some(i) => 1 + i as u64,
        })
    }
}

/// Product of two digit measures over the paired alphabet; symbol
/// `i * right_size + j` denotes the pair (i, j).
#[derive(Clone)]
pub struct ProductDigitMeasure {
    pub left: Arc<dyn CylinderMeasure>,
    pub right: Arc<dyn CylinderMeasure>,
}

impl CylinderMeasure for ProductDigitMeasure {
    fn alphabet_size(&self) -> usize {
        self.left.alphabet_size() * self.right.alphabet_size()
    }
    fn max_depth(&self) -> Option<usize> {
        match (self.left.max_depth(), self.right.max_depth()) {
            (None, None) => None,
            (a, b) => Some(a.unwrap_or(usize::MAX).min(b.unwrap_or(usize::MAX))),
        }
    }
    fn child_probs(&self, word: &[u8]) -> Result<Vec<f64>> {
        let rs = self.right.alphabet_size() as u8;
        let lw: Word = word.iter().map(|s| s / rs).collect();
        let rw: Word = word.iter().map(|s| s % rs).collect();
        let lp = self.left.child_probs(&lw)?;
        let rp = self.right.child_probs(&rw)?;
        let mut probs = Vec::with_capacity(lp.len() * rp.len());
        for a in &lp {
            for b in &rp {
                probs.push(a * b);
            }
        }
        Ok(probs)
    }
    fn restrict_dyn(&self, word: &[u8]) -> Result<Box<dyn CylinderMeasure>> {
        let rs = self.right.alphabet_size() as u8;
        let lw: Word = word.iter().map(|s| s / rs).collect();
        let rw: Word = word.iter().map(|s| s % rs).collect();
        Ok(Box::new(ProductDigitMeasure {
            left: Arc::from(self.left.restrict_dyn(&lw)?),
            right: Arc::from(self.right.restrict_dyn(&rw)?),
        }))
    }
    fn state_key(&self) -> Option<u64> {
        let l = self.left.state_key()?;
        let r = self.right.state_key()?;
        Some(l.wrapping_mul(0x1_0000).wrapping_add(r))
    }
}

/// Geometric realization of a digit measure: symbols carry per-axis digit
/// coordinates in base `base`, so words denote b-adic cells of [0,1]^dim.
#[derive(Clone)]
pub struct GeoDigitMeasure {
    pub measure: Arc<dyn CylinderMeasure>,
    pub base: u32,
    pub dim: usize,
    /// Coordinates of each alphabet symbol; second entry unused for dim = 1.
    pub digit_coords: Vec<[u8; 2]>,
}

impl GeoDigitMeasure {
    /// Lower-left corner of the cell addressed by `word`.
    pub fn cell_corner(&self, word: &[u8]) -> [f64; 2] {
        let mut corner = [0.0f64; 2];
        let b = f64::from(self.base);
        let mut scale = 1.0;
        for s in word {
            scale /= b;
            let c = self.digit_coords[*s as usize];
            for axis in 0..self.dim {
                corner[axis] += f64::from(c[axis]) * scale;
            }
        }
        corner
    }

    pub fn cell_side(&self, level: usize) -> f64 {
        f64::from(self.base).powi(-(level as i32))
    }

    pub fn restrict(&self, word: &[u8]) -> Result<GeoDigitMeasure> {
        Ok(GeoDigitMeasure {
            measure: Arc::from(self.measure.restrict_dyn(word)?),
            base: self.base,
            dim: self.dim,
            digit_coords: self.digit_coords.clone(),
        })
    }
}

// ---------------------------------------------------------------------------
// Spec realizations
// ---------------------------------------------------------------------------

/// Digit-aligned view of a spec: base, per-symbol coordinates, and the lazy
/// measure. Errors for sampler-only specs.
pub fn geo_digit_measure(spec: &MeasureSpec) -> Result<GeoDigitMeasure> {
    spec.validate()?;
    match spec {
        MeasureSpec::BernoulliDigits { base, digits, probs } => Ok(GeoDigitMeasure {
            measure: Arc::new(BernoulliDigitMeasure { probs: probs.clone() }),
            base: *base,
            dim: digits[0].len(),
            digit_coords: digits
                .iter()
                .map(|d| [d[0], *d.get(1).unwrap_or(&0)])
                .collect(),
        }),
        MeasureSpec::MarkovDigits { base, digits, transition, initial } => Ok(GeoDigitMeasure {
            measure: Arc::new(MarkovDigitMeasure {
                transition: transition.clone(),
                initial: initial.clone(),
                start: None,
            }),
            base: *base,
            dim: 1,
            digit_coords: digits.iter().map(|d| [*d, 0]).collect(),
        }),
        MeasureSpec::LinearIfs { .. } => {
            let digit = digit_aligned_ifs(spec)?;
            geo_digit_measure(&digit)
        }
        MeasureSpec::Product { left, right } => {
            let l = geo_digit_measure(left)?;
            let r = geo_digit_measure(right)?;
            if l.base != r.base {
                return Err(Error::UnsupportedExact {
                    reason: format!(
                        "product components use bases {} and {}; a common base is required \
                         for a digit-aligned tree",
                        l.base, r.base
                    ),
                });
            }
            if l.dim + r.dim > 2 {
                return Err(Error::invalid("product dimension exceeds 2"));
            }
            let mut coords = Vec::with_capacity(l.digit_coords.len() * r.digit_coords.len());
            for cl in &l.digit_coords {
                for cr in &r.digit_coords {
                    // left occupies the leading axes, right the trailing one
                    coords.push([cl[0], cr[0]]);
                }
            }
            Ok(GeoDigitMeasure {
                measure: Arc::new(ProductDigitMeasure { left: l.measure, right: r.measure }),
                base: l.base,
                dim: l.dim + r.dim,
                digit_coords: coords,
            })
        }
        MeasureSpec::BernoulliConvolution { .. } => Err(Error::UnsupportedExact {
            reason: "Bernoulli convolutions are sampler-only".into(),
        }),
    }
}

/// Rewrite a digit-aligned linear IFS (all ratios 1/b, translations k/b,
/// no rotation) as a Bernoulli digit spec; errors otherwise.
fn digit_aligned_ifs(spec: &MeasureSpec) -> Result<MeasureSpec> {
    let MeasureSpec::LinearIfs { maps, weights } = spec else {
        return Err(Error::invalid("not an IFS spec"));
    };
    let d = maps[0].dim();
    let inv = 1.0 / maps[0].ratio;
    let base = inv.round();
    if (inv - base).abs() > 1e-9 || base < 2.0 {
        return Err(Error::UnsupportedExact {
            reason: format!("ratio {} is not 1/b for an integer base", maps[0].ratio),
        });
    }
    let base = base as u32;
    let mut digits = Vec::new();
    for f in maps {
        if (f.ratio - maps[0].ratio).abs() > 1e-12 || f.rotation != 0.0 || f.reflect {
            return Err(Error::UnsupportedExact {
                reason: "digit alignment requires equal ratios and trivial rotations".into(),
            });
        }
        let mut digit = Vec::with_capacity(d);
        for axis in 0..d {
            let k = f.translation[axis] * f64::from(base);
            let ki = k.round();
            if (k - ki).abs() > 1e-9 || ki < 0.0 || ki >= f64::from(base) {
                return Err(Error::UnsupportedExact {
                    reason: format!("translation {} is not a multiple of 1/{base}", f.translation[axis]),
                });
            }
            digit.push(ki as u8);
        }
        digits.push(digit);
    }
    Ok(MeasureSpec::BernoulliDigits { base, digits, probs: weights.clone() })
}

/// Materialize the digit-aligned spec as an explicit tree measure at the
/// given depth. `M` selects the arithmetic (exact rationals or floats).
pub fn build_tree<M: Mass>(spec: &MeasureSpec, depth: usize) -> Result<TreeMeasure<M>> {
    const MAX_NODES: u64 = 8_000_000;
    let geo = geo_digit_measure(spec)?;
    let alphabet = geo.measure.alphabet_size();

    // exact per-symbol conditionals, rebuilt from the spec so rational mode
    // does not round through f64 twice
    let exact_probs = exact_conditionals::<M>(spec)?;

    let mut masses: HashMap<Word, M> = HashMap::new();
    masses.insert(Vec::new(), M::one());
    let mut frontier: Vec<(Word, M)> = vec![(Vec::new(), M::one())];
    let mut nodes: u64 = 1;
    for _ in 0..depth {
        let mut next = Vec::with_capacity(frontier.len() * alphabet);
        for (word, mass) in frontier {
            let probs = exact_probs.conditional(&word);
            for (sym, p) in probs.iter().enumerate() {
                if p.is_zero() {
                    continue;
                }
                nodes += 1;
                if nodes > MAX_NODES {
                    return Err(Error::invalid(format!(
                        "tree would exceed {MAX_NODES} nodes; lower the depth"
                    )));
                }
                let mut w = word.clone();
                w.push(sym as u8);
                let m = mass.mul(p);
                masses.insert(w.clone(), m.clone());
                next.push((w, m));
            }
        }
        frontier = next;
    }
    TreeMeasure::from_masses(alphabet, depth, 1.0 / f64::from(geo.base), masses)
}

/// Conditional distributions in the target arithmetic.
struct ExactConditionals<M: Mass> {
    kind: ExactKind<M>,
}

enum ExactKind<M: Mass> {
    Bernoulli(Vec<M>),
    Markov { initial: Vec<M>, transition: Vec<Vec<M>> },
    Product { left: Box<ExactConditionals<M>>, right: Box<ExactConditionals<M>>, right_size: u8 },
}

impl<M: Mass> ExactConditionals<M> {
    fn conditional(&self, word: &[u8]) -> Vec<M> {
        match &self.kind {
            ExactKind::Bernoulli(p) => p.clone(),
            ExactKind::Markov { initial, transition } => match word.last() {
                None => initial.clone(),
                Some(s) => transition[*s as usize].clone(),
            },
            ExactKind::Product { left, right, right_size } => {
                let lw: Word = word.iter().map(|s| s / right_size).collect();
                let rw: Word = word.iter().map(|s| s % right_size).collect();
                let lp = left.conditional(&lw);
                let rp = right.conditional(&rw);
                let mut out = Vec::with_capacity(lp.len() * rp.len());
                for a in &lp {
                    for b in &rp {
                        out.push(a.mul(b));
                    }
                }
                out
            }
        }
    }
}

fn exact_conditionals<M: Mass>(spec: &MeasureSpec) -> Result<ExactConditionals<M>> {
    Ok(ExactConditionals {
        kind: match spec {
            MeasureSpec::BernoulliDigits { probs, .. } => {
                ExactKind::Bernoulli(probs.iter().map(|p| M::from_f64(*p)).collect())
            }
            MeasureSpec::MarkovDigits { transition, initial, .. } => ExactKind::Markov {
                initial: initial.iter().map(|p| M::from_f64(*p)).collect(),
                transition: transition
                    .iter()
                    .map(|row| row.iter().map(|p| M::from_f64(*p)).collect())
                    .collect(),
            },
            MeasureSpec::LinearIfs { .. } => {
                return exact_conditionals(&digit_aligned_ifs(spec)?);
            }
            MeasureSpec::Product { left, right } => {
                let r = geo_digit_measure(right)?;
                ExactKind::Product {
                    left: Box::new(exact_conditionals(left)?),
                    right: Box::new(exact_conditionals(right)?),
                    right_size: r.measure.alphabet_size() as u8,
                }
            }
            MeasureSpec::BernoulliConvolution { .. } => {
                return Err(Error::UnsupportedExact {
                    reason: "Bernoulli convolutions are sampler-only".into(),
                });
            }
        },
    })
}

pub fn build_tree_exact(spec: &MeasureSpec, depth: usize) -> Result<TreeMeasure<BigRational>> {
    build_tree(spec, depth)
}

pub fn build_tree_float(spec: &MeasureSpec, depth: usize) -> Result<TreeMeasure<f64>> {
    build_tree(spec, depth)
}

// ---------------------------------------------------------------------------
// Point sampling
// ---------------------------------------------------------------------------

/// Blocks-of-signs polynomial P_t(u) = Σ u_i t^i with u_i ∈ {−1, +1}.
pub fn sign_block_value(signs: &[i8], t: f64) -> f64 {
    let mut acc = 0.0;
    let mut tn = 1.0;
    for s in signs {
        acc += f64::from(*s) * tn;
        tn *= t;
    }
    acc
}

/// Draw one point of the measure, accurate to `precision_digits` decimal
/// digits; deterministic given the generator state.
pub fn sample_point<R: Rng>(
    spec: &MeasureSpec,
    rng: &mut R,
    precision_digits: u32,
) -> Result<Vec<f64>> {
    spec.validate()?;
    let eps = 10f64.powi(-(precision_digits as i32));
    match spec {
        MeasureSpec::BernoulliDigits { base, digits, probs } => {
            let d = digits[0].len();
            let n = depth_for(eps, 1.0 / f64::from(*base));
            let dist = ChildDistribution::new(probs.clone());
            let b = f64::from(*base);
            let mut point = vec![0.0; d];
            let mut scale = 1.0;
            for _ in 0..n {
                scale /= b;
                let digit = &digits[dist.sample(rng) as usize];
                for axis in 0..d {
                    point[axis] += f64::from(digit[axis]) * scale;
                }
            }
            Ok(point)
        }
        MeasureSpec::MarkovDigits { base, digits, transition, initial } => {
            let n = depth_for(eps, 1.0 / f64::from(*base));
            let b = f64::from(*base);
            let mut point = 0.0;
            let mut scale = 1.0;
            let mut probs = initial.clone();
            for _ in 0..n {
                scale /= b;
                let s = ChildDistribution::new(probs).sample(rng) as usize;
                point += f64::from(digits[s]) * scale;
                probs = transition[s].clone();
            }
            Ok(vec![point])
        }
        MeasureSpec::LinearIfs { maps, weights } => {
            let r_max = maps.iter().map(|f| f.ratio).fold(0.0, f64::max);
            let n = depth_for(eps, r_max);
            let dist = ChildDistribution::new(weights.clone());
            let mut m = [[1.0, 0.0], [0.0, 1.0]];
            let mut v = [0.0, 0.0];
            for _ in 0..n {
                let f = &maps[dist.sample(rng) as usize];
                let (nm, nv) = Similarity::compose(&m, &v, f);
                m = nm;
                v = nv;
            }
            // accumulated contraction <= r_max^n, so the dependence on the
            // start point is below eps
            Ok(match maps[0].dim() {
                1 => vec![v[0]],
                _ => vec![v[0], v[1]],
            })
        }
        MeasureSpec::Product { left, right } => {
            let mut p = sample_point(left, rng, precision_digits)?;
            p.extend(sample_point(right, rng, precision_digits)?);
            Ok(p)
        }
        MeasureSpec::BernoulliConvolution { contraction, weight, .. } => {
            let t = *contraction;
            let n = depth_for(eps * (1.0 - t), t);
            let mut acc = 0.0;
            let mut tn = 1.0;
            for _ in 0..n {
                let sign = if rng.gen::<f64>() < *weight { 1.0 } else { -1.0 };
                acc += sign * tn;
                tn *= t;
            }
            Ok(vec![acc])
        }
    }
}

fn depth_for(eps: f64, ratio: f64) -> usize {
    // smallest n with ratio^n <= eps
    ((eps.ln() / ratio.ln()).ceil().max(1.0)) as usize
}

// ---------------------------------------------------------------------------
// Analytic summaries and separation
// ---------------------------------------------------------------------------

pub fn analytic_summary(spec: &MeasureSpec) -> Result<DigitMeasureSummary> {
    spec.validate()?;
    match spec {
        MeasureSpec::BernoulliDigits { base, probs, .. } => {
            let h = shannon_entropy(probs);
            Ok(DigitMeasureSummary {
                shannon_entropy_per_symbol: h,
                analytic_dimension: h / f64::from(*base).ln(),
                componentwise_sum: false,
            })
        }
        MeasureSpec::MarkovDigits { base, digits, transition, initial } => {
            let m = MarkovDigitMeasure {
                transition: transition.clone(),
                initial: initial.clone(),
                start: None,
            };
            let _ = digits;
            let h = m.entropy_rate();
            Ok(DigitMeasureSummary {
                shannon_entropy_per_symbol: h,
                analytic_dimension: h / f64::from(*base).ln(),
                componentwise_sum: false,
            })
        }
        MeasureSpec::LinearIfs { maps, weights } => {
            check_strong_separation(spec)?;
            let h = shannon_entropy(weights);
            let lyap: f64 = -weights
                .iter()
                .zip(maps)
                .map(|(p, f)| if *p > 0.0 { p * f.ratio.ln() } else { 0.0 })
                .sum::<f64>();
            Ok(DigitMeasureSummary {
                shannon_entropy_per_symbol: h,
                analytic_dimension: h / lyap,
                componentwise_sum: false,
            })
        }
        MeasureSpec::Product { left, right } => {
            let l = analytic_summary(left)?;
            let r = analytic_summary(right)?;
            Ok(DigitMeasureSummary {
                shannon_entropy_per_symbol: l.shannon_entropy_per_symbol
                    + r.shannon_entropy_per_symbol,
                analytic_dimension: l.analytic_dimension + r.analytic_dimension,
                componentwise_sum: true,
            })
        }
        MeasureSpec::BernoulliConvolution { .. } => Err(Error::invalid(
            "no closed-form summary for Bernoulli convolutions",
        )),
    }
}

/// Bounding box of the attractor, by iterating H ↦ bbox(∪ f_i(H)) from the
/// unit cube.
pub fn attractor_hull(maps: &[Similarity]) -> ([f64; 2], [f64; 2]) {
    let d = maps[0].dim();
    let mut lo = [0.0f64; 2];
    let mut hi = [1.0f64; 2];
    for _ in 0..60 {
        let mut nlo = [f64::INFINITY; 2];
        let mut nhi = [f64::NEG_INFINITY; 2];
        for f in maps {
            // image of an axis box under a similarity: map the corners
            let corners: Vec<Vec<f64>> = match d {
                1 => vec![vec![lo[0]], vec![hi[0]]],
                _ => vec![
                    vec![lo[0], lo[1]],
                    vec![lo[0], hi[1]],
                    vec![hi[0], lo[1]],
                    vec![hi[0], hi[1]],
                ],
            };
            for c in corners {
                let y = f.apply(&c);
                for axis in 0..d {
                    nlo[axis] = nlo[axis].min(y[axis]);
                    nhi[axis] = nhi[axis].max(y[axis]);
                }
            }
        }
        lo = nlo;
        hi = nhi;
    }
    (lo, hi)
}

/// Check that the hull images f_i(hull) are pairwise disjoint (closed boxes,
/// so touching counts as overlap).
pub fn check_strong_separation(spec: &MeasureSpec) -> Result<()> {
    let MeasureSpec::LinearIfs { maps, .. } = spec else {
        return Err(Error::invalid("separation check applies to IFS specs"));
    };
    let d = maps[0].dim();
    let (lo, hi) = attractor_hull(maps);
    let boxes: Vec<([f64; 2], [f64; 2])> = maps
        .iter()
        .map(|f| {
            let corners: Vec<Vec<f64>> = match d {
                1 => vec![vec![lo[0]], vec![hi[0]]],
                _ => vec![
                    vec![lo[0], lo[1]],
                    vec![lo[0], hi[1]],
                    vec![hi[0], lo[1]],
                    vec![hi[0], hi[1]],
                ],
            };
            let mut blo = [f64::INFINITY; 2];
            let mut bhi = [f64::NEG_INFINITY; 2];
            for c in corners {
                let y = f.apply(&c);
                for axis in 0..d {
                    blo[axis] = blo[axis].min(y[axis]);
                    bhi[axis] = bhi[axis].max(y[axis]);
                }
            }
            (blo, bhi)
        })
        .collect();
    for i in 0..boxes.len() {
        for j in (i + 1)..boxes.len() {
            let (alo, ahi) = boxes[i];
            let (blo, bhi) = boxes[j];
            let overlap = (0..d).all(|axis| ahi[axis] >= blo[axis] && bhi[axis] >= alo[axis]);
            if overlap {
                return Err(Error::SeparationViolated { a: i, b: j });
            }
        }
    }
    Ok(())
}

/// Exact partition entropy of the Bernoulli convolution at cell width
/// `width`: sign cylinders are refined until their value interval is small
/// against the cell, then midpoint-assigned. Only valid without overlaps,
/// i.e. t <= 1/2, where cylinder intervals are disjoint.
pub fn bc_entropy_at_width(t: f64, p: f64, width: f64) -> Result<f64> {
    if !(t > 0.0 && t <= 0.5) {
        return Err(Error::invalid("exact enumeration needs t in (0, 1/2]"));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid("weight must lie in (0,1)"));
    }
    if !(width > 0.0) {
        return Err(Error::invalid("width must be positive"));
    }
    let mut bins: std::collections::HashMap<i64, f64> = std::collections::HashMap::new();
    // tail of the sign series after n terms spans 2 t^n / (1 - t)
    let tail = |n: u32| 2.0 * t.powi(n as i32) / (1.0 - t);
    let mut depth = 0u32;
    while tail(depth) > width / 8.0 {
        depth += 1;
        if depth > 120 {
            return Err(Error::invalid("enumeration too deep"));
        }
    }
    // iterative DFS over sign words
    let mut stack: Vec<(u32, f64, f64)> = vec![(0, 0.0, 1.0)];
    while let Some((n, value, mass)) = stack.pop() {
        if n == depth {
            let mid = value; // remaining tail is symmetric around the partial sum
            *bins.entry((mid / width).floor() as i64).or_insert(0.0) += mass;
            continue;
        }
        let tn = t.powi(n as i32);
        stack.push((n + 1, value + tn, mass * p));
        stack.push((n + 1, value - tn, mass * (1.0 - p)));
    }
    Ok(-bins.values().filter(|m| **m > 0.0).map(|m| m * m.ln()).sum::<f64>())
}

/// H_{t^N}(nu_t^p): the block-scale entropy of the Bernoulli convolution.
pub fn bc_block_entropy(t: f64, p: f64, n_block: usize) -> Result<f64> {
    bc_entropy_at_width(t, p, t.powi(n_block as i32))
}

/// Entropy-slope dimension estimate between scales t^N and t^{N+span}:
/// (H_{t^{N+span}} - H_{t^N}) / (span log(1/t)). Scale-free constants cancel,
/// so the uniform endpoint t = 1/2 lands at exactly 1.
pub fn bc_dimension_slope(t: f64, p: f64, n_block: usize, span: usize) -> Result<f64> {
    let h1 = bc_block_entropy(t, p, n_block)?;
    let h2 = bc_block_entropy(t, p, n_block + span)?;
    Ok((h2 - h1) / (span as f64 * (1.0 / t).ln()))
}

/// Two-sided Kolmogorov–Smirnov statistic of `samples` against the uniform
/// law on [lo, hi].
pub fn ks_statistic_vs_uniform(samples: &mut [f64], lo: f64, hi: f64) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len() as f64;
    let mut d = 0.0f64;
    for (i, x) in samples.iter().enumerate() {
        let cdf = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
        let hi_emp = (i as f64 + 1.0) / n;
        let lo_emp = i as f64 / n;
        d = d.max((cdf - lo_emp).abs()).max((hi_emp - cdf).abs());
    }
    d
}
