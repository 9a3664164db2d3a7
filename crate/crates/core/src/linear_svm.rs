//! One-vs-rest linear SVMs over sparse vectors.
//!
//! Each per-class separator minimizes the L2-regularized hinge loss
//!
//! ```text
//! 0.5 * (|w|^2 + b^2) + C * sum_i max(0, 1 - y_i (w . x_i + b))
//! ```
//!
//! with the bias folded in as a constant unit feature, solved by dual
//! coordinate descent with shrinking.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Label, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::features::SparseVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvmParams {
    pub c: f64,
    /// Stop when the projected-gradient spread drops below this.
    pub tol: f64,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            tol: 1e-4,
            max_epochs: 1000,
            seed: 42,
        }
    }
}

/// How decision values become class supports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbMap {
    #[default]
    Softmax,
    /// `(s - min) / sum(s - min)`, uniform when all scores are equal.
    MinMax,
}

/// Per-class non-negative supports summing to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassSupport(pub [f64; NUM_CLASSES]);

impl ClassSupport {
    pub fn uniform() -> Self {
        ClassSupport([1.0 / NUM_CLASSES as f64; NUM_CLASSES])
    }

    pub fn from_scores(scores: &[f64; NUM_CLASSES], map: ProbMap) -> Self {
        match map {
            ProbMap::Softmax => softmax(scores),
            ProbMap::MinMax => min_max(scores),
        }
    }

    pub fn values(&self) -> &[f64; NUM_CLASSES] {
        &self.0
    }

    pub fn argmax(&self) -> Label {
        Label::ALL[argmax(&self.0)]
    }
}

pub fn softmax(scores: &[f64; NUM_CLASSES]) -> ClassSupport {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps = scores.map(|s| (s - max).exp());
    let total: f64 = exps.iter().sum();
    ClassSupport(exps.map(|e| e / total))
}

fn min_max(scores: &[f64; NUM_CLASSES]) -> ClassSupport {
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let shifted = scores.map(|s| s - min);
    let total: f64 = shifted.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return ClassSupport::uniform();
    }
    ClassSupport(shifted.map(|s| s / total))
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Trained one-vs-rest separators, one per class in [`Label::ALL`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    dim: usize,
    c: f64,
    weights: Vec<Vec<f64>>,
    biases: [f64; NUM_CLASSES],
}

impl LinearModel {
    pub fn from_parts(dim: usize, c: f64, weights: Vec<Vec<f64>>, biases: [f64; NUM_CLASSES]) -> Result<Self> {
        if weights.len() != NUM_CLASSES {
            return Err(Error::LengthMismatch(format!(
                "{} weight vectors for {NUM_CLASSES} classes",
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| w.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: w.len(),
            });
        }
        Ok(LinearModel {
            dim,
            c,
            weights,
            biases,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn classes(&self) -> [Label; NUM_CLASSES] {
        Label::ALL
    }

    pub fn weights(&self, class: Label) -> &[f64] {
        &self.weights[class.index()]
    }

    pub fn bias(&self, class: Label) -> f64 {
        self.biases[class.index()]
    }

    fn check_dim(&self, x: &SparseVector) -> Result<()> {
        if x.min_dimension() > self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.min_dimension(),
            });
        }
        Ok(())
    }

    /// `w_c . x + b_c` for every class.
    pub fn decision_values(&self, x: &SparseVector) -> Result<[f64; NUM_CLASSES]> {
        self.check_dim(x)?;
        let mut out = self.biases;
        for (class, score) in out.iter_mut().enumerate() {
            *score += x.dot_dense(&self.weights[class]);
        }
        Ok(out)
    }

    pub fn class_probabilities(&self, x: &SparseVector, map: ProbMap) -> Result<ClassSupport> {
        Ok(ClassSupport::from_scores(&self.decision_values(x)?, map))
    }

    pub fn predict(&self, x: &SparseVector) -> Result<Label> {
        Ok(Label::ALL[argmax(&self.decision_values(x)?)])
    }

    /// Serializes to the versioned text format read by [`LinearModel::load`].
    pub fn save(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        writeln!(out, "{MODEL_MAGIC} {MODEL_VERSION}").unwrap();
        writeln!(out, "kind linear").unwrap();
        writeln!(out, "classes {}", class_line()).unwrap();
        writeln!(out, "dim {}", self.dim).unwrap();
        writeln!(out, "c {:?}", self.c).unwrap();
        for label in Label::ALL {
            let w = &self.weights[label.index()];
            let nnz = w.iter().filter(|&&v| v != 0.0).count();
            writeln!(out, "class {} bias {:?} nnz {nnz}", label, self.biases[label.index()]).unwrap();
            for (i, &v) in w.iter().enumerate().filter(|&(_, &v)| v != 0.0) {
                writeln!(out, "{i} {v:?}").unwrap();
            }
        }
        out
    }

    pub fn load(text: &str) -> Result<Self> {
        let mut lines = ModelLines::new(text);
        lines.header("linear")?;
        let dim: usize = lines.keyed("dim")?;
        let c: f64 = lines.keyed("c")?;
        let mut weights = Vec::with_capacity(NUM_CLASSES);
        let mut biases = [0.0; NUM_CLASSES];
        for label in Label::ALL {
            let fields = lines.fields()?;
            let [tag, name, bias_tag, bias, nnz_tag, nnz] = fields.as_slice() else {
                return Err(Error::ModelFormat(format!("bad class line {:?}", fields.join(" "))));
            };
            if *tag != "class" || *bias_tag != "bias" || *nnz_tag != "nnz" || *name != label.name() {
                return Err(Error::ModelFormat(format!("bad class line for {label}")));
            }
            biases[label.index()] = parse_num(bias)?;
            let nnz: usize = parse_num(nnz)?;
            let mut w = vec![0.0; dim];
            for _ in 0..nnz {
                let f = lines.fields()?;
                let [i, v] = f.as_slice() else {
                    return Err(Error::ModelFormat("bad weight line".into()));
                };
                let i: usize = parse_num(i)?;
                *w.get_mut(i)
                    .ok_or_else(|| Error::ModelFormat(format!("weight index {i} >= dim {dim}")))? = parse_num(v)?;
            }
            weights.push(w);
        }
        LinearModel::from_parts(dim, c, weights, biases)
    }
}

pub(crate) const MODEL_MAGIC: &str = "hateclass-model";
pub(crate) const MODEL_VERSION: &str = "v1";

pub(crate) fn class_line() -> String {
    Label::ALL.map(|l| l.name()).join(" ")
}

pub(crate) fn parse_num<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::ModelFormat(format!("cannot parse {s:?}")))
}

/// Line reader shared by the model text formats.
pub(crate) struct ModelLines<'a> {
    lines: std::str::Lines<'a>,
}

impl<'a> ModelLines<'a> {
    pub(crate) fn new(text: &'a str) -> Self {
        ModelLines { lines: text.lines() }
    }

    pub(crate) fn fields(&mut self) -> Result<Vec<&'a str>> {
        self.lines
            .next()
            .map(|l| l.split_whitespace().collect())
            .ok_or_else(|| Error::ModelFormat("unexpected end of model".into()))
    }

    pub(crate) fn header(&mut self, kind: &str) -> Result<()> {
        if self.fields()? != [MODEL_MAGIC, MODEL_VERSION] {
            return Err(Error::ModelFormat("missing or unsupported header".into()));
        }
        let k = self.fields()?;
        if k != ["kind", kind] {
            return Err(Error::ModelFormat(format!("expected kind {kind}, found {}", k.join(" "))));
        }
        let classes = self.fields()?;
        if classes.first() != Some(&"classes") || classes[1..].join(" ") != class_line() {
            return Err(Error::ModelFormat("class order mismatch".into()));
        }
        Ok(())
    }

    pub(crate) fn keyed<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        match self.fields()?.as_slice() {
            [k, v] if *k == key => parse_num(v),
            other => Err(Error::ModelFormat(format!("expected {key}, found {:?}", other.join(" ")))),
        }
    }
}

fn validate(x: &[SparseVector], y: &[Label], dim: usize, c: f64) -> Result<()> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidHyperparameter { name: "C", value: c });
    }
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(format!("{} vectors, {} labels", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::EmptySelection("fewer than two training instances"));
    }
    if y.iter().all(|&l| l == y[0]) {
        return Err(Error::SingleClass);
    }
    if let Some(v) = x.iter().find(|v| v.min_dimension() > dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: v.min_dimension(),
        });
    }
    Ok(())
}

/// Trains one separator per class (classes absent from `y` get an
/// all-negative separator).
pub fn train(x: &[SparseVector], y: &[Label], dim: usize, params: &SvmParams) -> Result<LinearModel> {
    validate(x, y, dim, params.c)?;
    let mut weights = Vec::with_capacity(NUM_CLASSES);
    let mut biases = [0.0; NUM_CLASSES];
    for label in Label::ALL {
        let signs: Vec<f64> = y.iter().map(|&l| if l == label { 1.0 } else { -1.0 }).collect();
        let seed = params.seed ^ (label.index() as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let (w, b) = solve_binary(x, &signs, dim, params, seed);
        weights.push(w);
        biases[label.index()] = b;
    }
    LinearModel::from_parts(dim, params.c, weights, biases)
}

/// Dual coordinate descent for the L1-loss SVM with a unit bias feature.
/// Returns `(w, b)`.
fn solve_binary(x: &[SparseVector], y: &[f64], dim: usize, params: &SvmParams, seed: u64) -> (Vec<f64>, f64) {
    let n = x.len();
    let upper = params.c;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut alpha = vec![0.0; n];
    let qd: Vec<f64> = x.iter().map(|v| v.squared_norm() + 1.0).collect();
    let mut index: Vec<usize> = (0..n).collect();
    let mut active = n;
    let mut pg_max_old = f64::INFINITY;
    let mut pg_min_old = f64::NEG_INFINITY;

    for _ in 0..params.max_epochs {
        let mut pg_max_new = f64::NEG_INFINITY;
        let mut pg_min_new = f64::INFINITY;
        index[..active].shuffle(&mut rng);

        let mut s = 0;
        while s < active {
            let i = index[s];
            let yi = y[i];
            let g = yi * (x[i].dot_dense(&w) + b) - 1.0;
            let mut pg = 0.0;
            if alpha[i] == 0.0 {
                if g > pg_max_old {
                    active -= 1;
                    index.swap(s, active);
                    continue;
                }
                if g < 0.0 {
                    pg = g;
                }
            } else if alpha[i] == upper {
                if g < pg_min_old {
                    active -= 1;
                    index.swap(s, active);
                    continue;
                }
                if g > 0.0 {
                    pg = g;
                }
            } else {
                pg = g;
            }
            pg_max_new = pg_max_new.max(pg);
            pg_min_new = pg_min_new.min(pg);

            if pg.abs() > 1e-12 {
                let old = alpha[i];
                alpha[i] = (old - g / qd[i]).clamp(0.0, upper);
                let step = (alpha[i] - old) * yi;
                for &(j, v) in x[i].entries() {
                    w[j] += step * v;
                }
                b += step;
            }
            s += 1;
        }

        if pg_max_new - pg_min_new <= params.tol {
            if active == n {
                break;
            }
            active = n;
            pg_max_old = f64::INFINITY;
            pg_min_old = f64::NEG_INFINITY;
            continue;
        }
        pg_max_old = if pg_max_new <= 0.0 { f64::INFINITY } else { pg_max_new };
        pg_min_old = if pg_min_new >= 0.0 { f64::NEG_INFINITY } else { pg_min_new };
    }
    (w, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn sv(pairs: &[(usize, f64)]) -> SparseVector {
        SparseVector::from_pairs(pairs.to_vec())
    }

    #[test]
    fn separable_1d_reaches_full_training_accuracy() {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..20 {
            if i % 2 == 0 {
                x.push(SparseVector::new());
                y.push(Label::Hate);
            } else {
                x.push(sv(&[(0, 1.0)]));
                y.push(Label::Offensive);
            }
        }
        let model = train(&x, &y, 1, &SvmParams { c: 100.0, ..Default::default() }).unwrap();
        for (xi, &yi) in x.iter().zip(&y) {
            assert_eq!(model.predict(xi).unwrap(), yi);
        }
    }

    #[test]
    fn preconditions() {
        let x = vec![sv(&[(0, 1.0)]), sv(&[(1, 1.0)])];
        let p = SvmParams::default();
        assert!(matches!(
            train(&x, &[Label::Ok, Label::Ok], 2, &p),
            Err(Error::SingleClass)
        ));
        assert!(matches!(
            train(&x, &[Label::Ok, Label::Hate], 1, &p),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            train(&x, &[Label::Ok, Label::Hate], 2, &SvmParams { c: 0.0, ..p }),
            Err(Error::InvalidHyperparameter { .. })
        ));
        assert!(matches!(
            train(&x, &[Label::Ok], 2, &p),
            Err(Error::LengthMismatch(_))
        ));
    }

    #[test]
    fn decision_value_basics() {
        let model = LinearModel::from_parts(
            3,
            1.0,
            vec![vec![1.0, 0.0, -1.0], vec![0.5, 0.5, 0.5], vec![0.0, 2.0, 0.0]],
            [0.1, -0.2, 0.3],
        )
        .unwrap();
        assert_eq!(model.decision_values(&SparseVector::new()).unwrap(), [0.1, -0.2, 0.3]);
        let x = sv(&[(0, 1.0), (2, 3.0)]);
        let s1 = model.decision_values(&x).unwrap();
        let s2 = model.decision_values(&x.scaled(2.0)).unwrap();
        for c in 0..3 {
            let b = model.biases[c];
            assert!(((s2[c] - b) - 2.0 * (s1[c] - b)).abs() < 1e-12);
        }
        assert!(matches!(
            model.decision_values(&sv(&[(3, 1.0)])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn zero_model_predicts_first_class() {
        let model = LinearModel::from_parts(2, 1.0, vec![vec![0.0; 2]; 3], [0.0; 3]).unwrap();
        assert_eq!(model.predict(&sv(&[(1, 4.0)])).unwrap(), Label::Hate);
    }

    #[test]
    fn softmax_examples() {
        let u = softmax(&[2.0, 2.0, 2.0]);
        for v in u.0 {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        // e / (e + 2), 1 / (e + 2)
        let p = softmax(&[1.0, 0.0, 0.0]);
        let e = std::f64::consts::E;
        assert!((p.0[0] - e / (e + 2.0)).abs() < 1e-15);
        assert!((p.0[1] - 1.0 / (e + 2.0)).abs() < 1e-15);
        assert!((p.0[0] - 0.5761).abs() < 5e-5);
        assert!((p.0[2] - 0.2119).abs() < 5e-5);
        let shifted = softmax(&[1001.0, 1000.0, 1000.0]);
        for c in 0..3 {
            assert!((shifted.0[c] - p.0[c]).abs() < 1e-12);
        }
    }

    #[test]
    fn min_max_map() {
        let p = ClassSupport::from_scores(&[1.0, 0.0, 3.0], ProbMap::MinMax);
        assert_eq!(p.0, [0.25, 0.0, 0.75]);
        assert_eq!(
            ClassSupport::from_scores(&[5.0; 3], ProbMap::MinMax),
            ClassSupport::uniform()
        );
    }

    #[test]
    fn training_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<SparseVector> = (0..40)
            .map(|_| SparseVector::from_pairs((0..4).map(|_| (rng.gen_range(0..10), 1.0)).collect()))
            .collect();
        let y: Vec<Label> = (0..40).map(|i| Label::ALL[i % 3]).collect();
        let p = SvmParams::default();
        assert_eq!(train(&x, &y, 10, &p).unwrap(), train(&x, &y, 10, &p).unwrap());
    }

    #[test]
    fn save_load_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<SparseVector> = (0..30)
            .map(|_| SparseVector::from_pairs((0..3).map(|_| (rng.gen_range(0..8), rng.gen_range(0.1..2.0))).collect()))
            .collect();
        let y: Vec<Label> = (0..30).map(|i| Label::ALL[(i * 7) % 3]).collect();
        let model = train(&x, &y, 12, &SvmParams::default()).unwrap();
        let text = model.save();
        assert_eq!(LinearModel::load(&text).unwrap(), model);
        assert!(LinearModel::load(&text.replace("kind linear", "kind rbf")).is_err());
        assert!(LinearModel::load("garbage").is_err());
    }

    fn dense_oracle(model: &LinearModel, x: &SparseVector) -> [f64; 3] {
        let mut dense = vec![0.0; model.dim()];
        for &(i, v) in x.entries() {
            dense[i] = v;
        }
        let mut out = [0.0; 3];
        for (c, o) in out.iter_mut().enumerate() {
            let mut s = model.biases[c];
            for j in 0..model.dim() {
                s += model.weights[c][j] * dense[j];
            }
            *o = s;
        }
        out
    }

    proptest! {
        #[test]
        fn decision_matches_dense_oracle(
            w in prop::collection::vec(-5.0f64..5.0, 18),
            b in prop::array::uniform3(-2.0f64..2.0),
            pairs in prop::collection::vec((0usize..6, 0.1f64..3.0), 0..8),
        ) {
            let model = LinearModel::from_parts(6, 1.0, w.chunks(6).map(<[f64]>::to_vec).collect(), b).unwrap();
            let x = SparseVector::from_pairs(pairs);
            let got = model.decision_values(&x).unwrap();
            let want = dense_oracle(&model, &x);
            for c in 0..3 {
                prop_assert!((got[c] - want[c]).abs() < 1e-9);
            }
            let probs = model.class_probabilities(&x, ProbMap::Softmax).unwrap();
            prop_assert!((probs.0.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(probs.0.iter().all(|&p| p >= 0.0));
            prop_assert_eq!(model.predict(&x).unwrap(), probs.argmax());
            let mm = model.class_probabilities(&x, ProbMap::MinMax).unwrap();
            prop_assert!((mm.0.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn softmax_shift_invariant(s in prop::array::uniform3(-50.0f64..50.0), shift in -100.0f64..100.0) {
            let a = softmax(&s);
            let b = softmax(&s.map(|v| v + shift));
            for c in 0..3 {
                prop_assert!((a.0[c] - b.0[c]).abs() < 1e-9);
            }
        }
    }
}
