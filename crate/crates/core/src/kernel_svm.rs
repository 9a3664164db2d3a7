//! One-vs-rest RBF-kernel SVMs trained with SMO, used as a meta-learner
//! over dense meta-feature vectors.

use std::collections::HashMap;
use std::rc::Rc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Label, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::linear_svm::{argmax, class_line, parse_num, ClassSupport, ModelLines, ProbMap, MODEL_MAGIC, MODEL_VERSION};

const TAU: f64 = 1e-12;
const PARALLEL_ROW_THRESHOLD: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RbfParams {
    pub c: f64,
    /// Kernel width; `None` means `1 / dimension`.
    pub gamma: Option<f64>,
    pub tol: f64,
    /// Upper bound on SMO iterations; `None` means `max(10^7, 100 n)`.
    pub max_iter: Option<usize>,
    /// Kernel row cache budget in megabytes.
    pub cache_mb: usize,
}

impl Default for RbfParams {
    fn default() -> Self {
        RbfParams {
            c: 1.0,
            gamma: None,
            tol: 1e-3,
            max_iter: None,
            cache_mb: 512,
        }
    }
}

/// `exp(-gamma * |a - b|^2)`
pub fn rbf_kernel(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelModel {
    dim: usize,
    gamma: f64,
    c: f64,
    support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` for each support vector and class.
    coefficients: Vec<[f64; NUM_CLASSES]>,
    biases: [f64; NUM_CLASSES],
}

impl KernelModel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn support_vectors(&self) -> &[Vec<f64>] {
        &self.support_vectors
    }

    pub fn coefficients(&self) -> &[[f64; NUM_CLASSES]] {
        &self.coefficients
    }

    pub fn biases(&self) -> [f64; NUM_CLASSES] {
        self.biases
    }

    pub fn decision_values(&self, x: &[f64]) -> Result<[f64; NUM_CLASSES]> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        let mut out = [0.0; NUM_CLASSES];
        for (sv, coef) in self.support_vectors.iter().zip(&self.coefficients) {
            let k = rbf_kernel(sv, x, self.gamma);
            for c in 0..NUM_CLASSES {
                out[c] += coef[c] * k;
            }
        }
        for c in 0..NUM_CLASSES {
            out[c] += self.biases[c];
        }
        Ok(out)
    }

    /// Arg-max label (lowest index on ties) and the mapped class support.
    pub fn predict(&self, x: &[f64], map: ProbMap) -> Result<(Label, ClassSupport)> {
        let scores = self.decision_values(x)?;
        Ok((Label::ALL[argmax(&scores)], ClassSupport::from_scores(&scores, map)))
    }

    pub fn save(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        writeln!(out, "{MODEL_MAGIC} {MODEL_VERSION}").unwrap();
        writeln!(out, "kind rbf").unwrap();
        writeln!(out, "classes {}", class_line()).unwrap();
        writeln!(out, "dim {}", self.dim).unwrap();
        writeln!(out, "c {:?}", self.c).unwrap();
        writeln!(out, "gamma {:?}", self.gamma).unwrap();
        writeln!(out, "biases {:?} {:?} {:?}", self.biases[0], self.biases[1], self.biases[2]).unwrap();
        writeln!(out, "sv {}", self.support_vectors.len()).unwrap();
        for (sv, coef) in self.support_vectors.iter().zip(&self.coefficients) {
            let nums: Vec<String> = coef.iter().chain(sv).map(|v| format!("{v:?}")).collect();
            writeln!(out, "{}", nums.join(" ")).unwrap();
        }
        out
    }

    pub fn load(text: &str) -> Result<Self> {
        let mut lines = ModelLines::new(text);
        lines.header("rbf")?;
        let dim: usize = lines.keyed("dim")?;
        let c: f64 = lines.keyed("c")?;
        let gamma: f64 = lines.keyed("gamma")?;
        let b = lines.fields()?;
        let biases = match b.as_slice() {
            ["biases", b0, b1, b2] => [parse_num(b0)?, parse_num(b1)?, parse_num(b2)?],
            _ => return Err(Error::ModelFormat("bad biases line".into())),
        };
        let count: usize = lines.keyed("sv")?;
        let mut support_vectors = Vec::with_capacity(count);
        let mut coefficients = Vec::with_capacity(count);
        for _ in 0..count {
            let f = lines.fields()?;
            if f.len() != NUM_CLASSES + dim {
                return Err(Error::ModelFormat(format!(
                    "support vector line has {} fields, expected {}",
                    f.len(),
                    NUM_CLASSES + dim
                )));
            }
            let nums = f.iter().map(|s| parse_num::<f64>(s)).collect::<Result<Vec<_>>>()?;
            coefficients.push([nums[0], nums[1], nums[2]]);
            support_vectors.push(nums[NUM_CLASSES..].to_vec());
        }
        Ok(KernelModel {
            dim,
            gamma,
            c,
            support_vectors,
            coefficients,
            biases,
        })
    }
}

/// Kernel rows computed on demand with a least-recently-used cache.
struct KernelRows<'a> {
    x: &'a [Vec<f64>],
    gamma: f64,
    capacity: usize,
    clock: u64,
    rows: HashMap<usize, (Rc<Vec<f64>>, u64)>,
}

impl<'a> KernelRows<'a> {
    fn new(x: &'a [Vec<f64>], gamma: f64, cache_mb: usize) -> Self {
        let row_bytes = (x.len() * std::mem::size_of::<f64>()).max(1);
        let capacity = ((cache_mb << 20) / row_bytes).max(2);
        KernelRows {
            x,
            gamma,
            capacity,
            clock: 0,
            rows: HashMap::new(),
        }
    }

    fn row(&mut self, i: usize) -> Rc<Vec<f64>> {
        self.clock += 1;
        if let Some((row, stamp)) = self.rows.get_mut(&i) {
            *stamp = self.clock;
            return Rc::clone(row);
        }
        if self.rows.len() >= self.capacity {
            let oldest = self
                .rows
                .iter()
                .min_by_key(|(_, (_, stamp))| *stamp)
                .map(|(&k, _)| k)
                .expect("cache is non-empty");
            self.rows.remove(&oldest);
        }
        let xi = &self.x[i];
        let gamma = self.gamma;
        let row: Vec<f64> = if self.x.len() >= PARALLEL_ROW_THRESHOLD {
            self.x.par_iter().map(|xj| rbf_kernel(xi, xj, gamma)).collect()
        } else {
            self.x.iter().map(|xj| rbf_kernel(xi, xj, gamma)).collect()
        };
        let row = Rc::new(row);
        self.rows.insert(i, (Rc::clone(&row), self.clock));
        row
    }
}

/// Trains three one-vs-rest RBF separators.
pub fn train_rbf(x: &[Vec<f64>], y: &[Label], params: &RbfParams) -> Result<KernelModel> {
    if !(params.c > 0.0) || !params.c.is_finite() {
        return Err(Error::InvalidHyperparameter {
            name: "C",
            value: params.c,
        });
    }
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(format!("{} vectors, {} labels", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::EmptySelection("fewer than two training instances"));
    }
    let dim = x[0].len();
    if let Some(v) = x.iter().find(|v| v.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: v.len(),
        });
    }
    let gamma = params.gamma.unwrap_or(1.0 / dim.max(1) as f64);
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidHyperparameter {
            name: "gamma",
            value: gamma,
        });
    }
    if y.iter().all(|&l| l == y[0]) {
        return Err(Error::SingleClass);
    }

    let n = x.len();
    let max_iter = params.max_iter.unwrap_or_else(|| 10_000_000usize.max(100 * n));
    let mut kernel = KernelRows::new(x, gamma, params.cache_mb);
    let mut alphas = Vec::with_capacity(NUM_CLASSES);
    let mut biases = [0.0; NUM_CLASSES];
    for label in Label::ALL {
        let signs: Vec<f64> = y.iter().map(|&l| if l == label { 1.0 } else { -1.0 }).collect();
        let (alpha, rho) = smo(&mut kernel, &signs, params.c, params.tol, max_iter);
        alphas.push((alpha, signs));
        biases[label.index()] = -rho;
    }

    let mut support_vectors = Vec::new();
    let mut coefficients = Vec::new();
    for i in 0..n {
        if alphas.iter().any(|(a, _)| a[i] > 0.0) {
            support_vectors.push(x[i].clone());
            let mut coef = [0.0; NUM_CLASSES];
            for (c, (a, s)) in alphas.iter().enumerate() {
                coef[c] = a[i] * s[i];
            }
            coefficients.push(coef);
        }
    }
    Ok(KernelModel {
        dim,
        gamma,
        c: params.c,
        support_vectors,
        coefficients,
        biases,
    })
}

/// SMO with second-order working-set selection on
/// `min 0.5 a'Qa - e'a  s.t.  y'a = 0, 0 <= a <= C`, `Q_ij = y_i y_j K_ij`.
/// Returns `(alpha, rho)`; the decision function is `sum a_i y_i K(x_i, x) - rho`.
fn smo(kernel: &mut KernelRows<'_>, y: &[f64], c: f64, tol: f64, max_iter: usize) -> (Vec<f64>, f64) {
    let n = y.len();
    if y.iter().all(|&s| s == y[0]) {
        // Degenerate one-sided problem: constant decision equal to the label.
        return (vec![0.0; n], -y[0]);
    }
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let is_upper = |a: f64| a >= c;
    let is_lower = |a: f64| a <= 0.0;

    for _ in 0..max_iter {
        // i: maximal violator in I_up.
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            let v = -y[t] * grad[t];
            let in_up = if y[t] > 0.0 { !is_upper(alpha[t]) } else { !is_lower(alpha[t]) };
            if in_up && v >= gmax {
                gmax = v;
                i_sel = Some(t);
            }
        }
        let Some(i) = i_sel else { break };
        let row_i = kernel.row(i);

        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut best = f64::INFINITY;
        for t in 0..n {
            let in_low = if y[t] > 0.0 { !is_lower(alpha[t]) } else { !is_upper(alpha[t]) };
            if !in_low {
                continue;
            }
            let v = y[t] * grad[t];
            if v >= gmax2 {
                gmax2 = v;
            }
            let diff = gmax + v;
            if diff > 0.0 {
                let quad = 2.0 - 2.0 * row_i[t];
                let quad = if quad > 0.0 { quad } else { TAU };
                let obj = -(diff * diff) / quad;
                if obj <= best {
                    best = obj;
                    j_sel = Some(t);
                }
            }
        }
        let Some(j) = j_sel else { break };
        if gmax + gmax2 < tol {
            break;
        }
        let row_j = kernel.row(j);

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let q_ij = y[i] * y[j] * row_i[j];
        if y[i] != y[j] {
            let quad = (2.0 + 2.0 * q_ij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (2.0 - 2.0 * q_ij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let di = alpha[i] - old_i;
        let dj = alpha[j] - old_j;
        for t in 0..n {
            grad[t] += y[t] * (y[i] * row_i[t] * di + y[j] * row_j[t] * dj);
        }
    }

    // Offset from free vectors, or the midpoint of the feasible interval.
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum_free) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if is_upper(alpha[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if is_lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    let rho = if free > 0 { sum_free / free as f64 } else { (ub + lb) / 2.0 };
    (alpha, rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn xor() -> (Vec<Vec<f64>>, Vec<Label>) {
        (
            vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]],
            vec![Label::Hate, Label::Hate, Label::Ok, Label::Ok],
        )
    }

    #[test]
    fn xor_is_interpolated() {
        let (x, y) = xor();
        let params = RbfParams {
            c: 1000.0,
            gamma: Some(2.0),
            ..Default::default()
        };
        let model = train_rbf(&x, &y, &params).unwrap();
        for (xi, &yi) in x.iter().zip(&y) {
            assert_eq!(model.predict(xi, ProbMap::Softmax).unwrap().0, yi);
        }
    }

    #[test]
    fn hyperparameter_errors() {
        let (x, y) = xor();
        let bad_gamma = RbfParams {
            gamma: Some(0.0),
            ..Default::default()
        };
        assert!(matches!(
            train_rbf(&x, &y, &bad_gamma),
            Err(Error::InvalidHyperparameter { name: "gamma", .. })
        ));
        let bad_c = RbfParams {
            c: -1.0,
            ..Default::default()
        };
        assert!(train_rbf(&x, &y, &bad_c).is_err());
        assert!(matches!(
            train_rbf(&x, &[Label::Ok; 4], &RbfParams::default()),
            Err(Error::SingleClass)
        ));
        let ragged = vec![vec![0.0, 1.0], vec![1.0]];
        assert!(matches!(
            train_rbf(&ragged, &[Label::Ok, Label::Hate], &RbfParams::default()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn default_gamma_is_inverse_dimension() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 / 6.0; 48]).collect();
        let y: Vec<Label> = (0..6).map(|i| Label::ALL[i % 3]).collect();
        let model = train_rbf(&x, &y, &RbfParams::default()).unwrap();
        assert_eq!(model.gamma(), 1.0 / 48.0);
        assert!(model.predict(&[0.0; 47], ProbMap::Softmax).is_err());
    }

    #[test]
    fn duplicated_point_keeps_own_label() {
        let x = vec![vec![0.2, 0.8], vec![0.2, 0.8], vec![0.9, 0.1], vec![0.5, 0.5]];
        let y = vec![Label::Offensive, Label::Offensive, Label::Ok, Label::Hate];
        let params = RbfParams {
            c: 1e4,
            gamma: Some(10.0),
            ..Default::default()
        };
        let model = train_rbf(&x, &y, &params).unwrap();
        assert_eq!(model.predict(&x[0], ProbMap::Softmax).unwrap().0, Label::Offensive);
    }

    #[test]
    fn equal_scores_pick_first_class() {
        let model = KernelModel {
            dim: 1,
            gamma: 1.0,
            c: 1.0,
            support_vectors: vec![],
            coefficients: vec![],
            biases: [0.5; 3],
        };
        let (label, support) = model.predict(&[3.0], ProbMap::Softmax).unwrap();
        assert_eq!(label, Label::Hate);
        assert_eq!(support, ClassSupport::uniform());
    }

    fn random_problem(seed: u64, n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<Label>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = (0..n).map(|_| (0..d).map(|_| rng.gen::<f64>()).collect()).collect();
        let y = (0..n).map(|i| Label::ALL[i % 3]).collect();
        (x, y)
    }

    #[test]
    fn decision_values_match_naive_kernel_sums() {
        let (x, y) = random_problem(5, 40, 6);
        let model = train_rbf(&x, &y, &RbfParams { gamma: Some(0.7), ..Default::default() }).unwrap();
        let (probe, _) = random_problem(6, 10, 6);
        for p in &probe {
            let got = model.decision_values(p).unwrap();
            for c in 0..3 {
                let mut s = model.biases[c];
                for (sv, coef) in model.support_vectors.iter().zip(&model.coefficients) {
                    let mut d2 = 0.0;
                    for k in 0..6 {
                        d2 += (sv[k] - p[k]).powi(2);
                    }
                    s += coef[c] * (-0.7 * d2).exp();
                }
                assert!((got[c] - s).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn dual_solution_is_feasible() {
        let (x, y) = random_problem(8, 30, 3);
        let params = RbfParams { c: 2.0, gamma: Some(1.5), ..Default::default() };
        let model = train_rbf(&x, &y, &params).unwrap();
        for c in 0..3 {
            let sum: f64 = model.coefficients.iter().map(|coef| coef[c]).sum();
            assert!(sum.abs() < 1e-9, "sum y_i a_i = {sum}");
            assert!(model.coefficients.iter().all(|coef| coef[c].abs() <= 2.0 + 1e-12));
        }
    }

    #[test]
    fn tiny_gamma_gives_near_constant_decisions() {
        let (x, y) = random_problem(11, 30, 4);
        let model = train_rbf(&x, &y, &RbfParams { gamma: Some(1e-9), ..Default::default() }).unwrap();
        let (probe, _) = random_problem(12, 20, 4);
        let first = model.decision_values(&probe[0]).unwrap();
        for p in &probe[1..] {
            let d = model.decision_values(p).unwrap();
            for c in 0..3 {
                assert!((d[c] - first[c]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn training_order_does_not_change_predictions() {
        let (x, y) = random_problem(21, 45, 3);
        let params = RbfParams { gamma: Some(2.0), c: 5.0, tol: 1e-6, ..Default::default() };
        let model = train_rbf(&x, &y, &params).unwrap();
        let mut order: Vec<usize> = (0..x.len()).collect();
        order.reverse();
        order.rotate_left(7);
        let xp: Vec<Vec<f64>> = order.iter().map(|&i| x[i].clone()).collect();
        let yp: Vec<Label> = order.iter().map(|&i| y[i]).collect();
        let permuted = train_rbf(&xp, &yp, &params).unwrap();
        let (probe, _) = random_problem(22, 50, 3);
        for p in &probe {
            let a = model.decision_values(p).unwrap();
            let b = permuted.decision_values(p).unwrap();
            for c in 0..3 {
                assert!((a[c] - b[c]).abs() < 1e-3);
            }
            let (la, lb) = (argmax(&a), argmax(&b));
            let mut sorted = a;
            sorted.sort_by(|p, q| q.partial_cmp(p).unwrap());
            if sorted[0] - sorted[1] > 1e-2 {
                assert_eq!(la, lb);
            }
        }
    }

    #[test]
    fn save_load_round_trip() {
        let (x, y) = random_problem(30, 20, 5);
        let model = train_rbf(&x, &y, &RbfParams::default()).unwrap();
        assert_eq!(KernelModel::load(&model.save()).unwrap(), model);
        assert!(KernelModel::load(&model.save().replace("kind rbf", "kind linear")).is_err());
    }

    #[test]
    fn small_cache_gives_same_model() {
        let (x, y) = random_problem(31, 60, 4);
        let big = train_rbf(&x, &y, &RbfParams::default()).unwrap();
        let mut kernel = KernelRows::new(&x, 0.25, 0);
        assert_eq!(kernel.capacity, 2);
        let _ = kernel.row(0);
        let tiny = train_rbf(&x, &y, &RbfParams { cache_mb: 0, ..Default::default() }).unwrap();
        assert_eq!(big, tiny);
    }

    proptest! {
        #[test]
        fn kernel_range(a in prop::collection::vec(-3.0f64..3.0, 5), b in prop::collection::vec(-3.0f64..3.0, 5), gamma in 1e-3f64..5.0) {
            prop_assert_eq!(rbf_kernel(&a, &a, gamma), 1.0);
            let k = rbf_kernel(&a, &b, gamma);
            prop_assert!(k > 0.0 && k <= 1.0);
        }
    }
}
