//! Deterministic dataset generators for the synthetic experiments plus a
//! plain-text loader for pre-extracted feature datasets.
//!
//! Every generator is a pure function of its parameters and seed.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::loss::{Label, LabeledPoint, Mat, UncertainLsSystem};
use crate::rng::{tag, RngStream};

/// A labeled dataset: features row-per-point plus labels and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
    /// Human-readable generation note (name, params, seed).
    pub meta: String,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn point(&self, i: usize) -> LabeledPoint {
        LabeledPoint::new(self.features[i].clone(), self.labels[i])
    }

    /// Number of distinct class labels required to cover the label range.
    pub fn class_count(&self) -> usize {
        self.labels
            .iter()
            .map(|l| match l {
                Label::None => 0,
                Label::Binary(_) => 2,
                Label::Class(c) => c + 1,
            })
            .max()
            .unwrap_or(0)
    }
}

const CIRCLE_RADIUS_SQ: f64 = 2.0;
const CIRCLE_MARGIN: f64 = 1.3;
/// Oversampling cap for the circle rejection loop.
const MAX_OVERSAMPLE: usize = 100;

/// Circle classification data: features `N(0, I_2)`, label
/// `sign(||x|| - sqrt(2))` stored as {0, 1} (negative class is 0). Points in
/// the margin ring `||x|| in (sqrt(2)/1.3, 1.3 sqrt(2))` are rejected, and,
/// when `exclude_first_quadrant` is set, so is the whole first quadrant.
pub fn gen_circle(n: usize, seed: u64, exclude_first_quadrant: bool) -> Result<LabeledDataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("circle dataset needs n >= 1".into()));
    }
    let mut rng = RngStream::new(seed).rng(&[tag::DATASET, 0xC1]);
    let radius = CIRCLE_RADIUS_SQ.sqrt();
    let (lo, hi) = (radius / CIRCLE_MARGIN, radius * CIRCLE_MARGIN);
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while features.len() < n {
        attempts += 1;
        if attempts > MAX_OVERSAMPLE * n {
            return Err(Error::InvalidArgument(format!(
                "circle rejection sampling exceeded {MAX_OVERSAMPLE}x oversampling"
            )));
        }
        let x: f64 = rng.sample(StandardNormal);
        let y: f64 = rng.sample(StandardNormal);
        let r = (x * x + y * y).sqrt();
        if r > lo && r < hi {
            continue;
        }
        if exclude_first_quadrant && x > 0.0 && y > 0.0 {
            continue;
        }
        labels.push(if r - radius > 0.0 { Label::Binary(1) } else { Label::Binary(0) });
        features.push(vec![x, y]);
    }
    Ok(LabeledDataset {
        features,
        labels,
        meta: format!(
            "circle n={n} seed={seed} biased={exclude_first_quadrant} (label +1 -> 1, -1 -> 0)"
        ),
    })
}

/// The biased circle training set: first quadrant removed.
pub fn gen_biased_circle(n_raw: usize, seed: u64) -> Result<LabeledDataset> {
    gen_circle(n_raw, seed, true)
}

/// Two interleaved half-moons with Gaussian noise. The lower moon is the
/// positive class (label 1) and receives `round(n * positive_fraction)`
/// points; the upper moon gets the remainder.
///
/// Upper moon: `(cos t, sin t)`; lower moon: `(1 - cos t, 0.5 - sin t)`,
/// `t ~ U[0, pi]`.
pub fn gen_two_moons(
    n: usize,
    noise_sigma: f64,
    positive_fraction: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if n < 2 {
        return Err(Error::InvalidArgument("two moons needs n >= 2".into()));
    }
    if !(positive_fraction > 0.0 && positive_fraction < 1.0) {
        return Err(Error::InvalidArgument(
            "positive_fraction must lie in (0, 1)".into(),
        ));
    }
    let n_pos = (n as f64 * positive_fraction).round() as usize;
    let n_neg = n - n_pos;
    let mut rng = RngStream::new(seed).rng(&[tag::DATASET, 0x22]);
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let push = |rng: &mut ChaCha8Rng,
                positive: bool,
                out_f: &mut Vec<Vec<f64>>,
                out_l: &mut Vec<Label>| {
        let t: f64 = rng.random::<f64>() * std::f64::consts::PI;
        let (mut x, mut y) = if positive {
            (1.0 - t.cos(), 0.5 - t.sin())
        } else {
            (t.cos(), t.sin())
        };
        if noise_sigma > 0.0 {
            x += noise_sigma * rng.sample::<f64, _>(StandardNormal);
            y += noise_sigma * rng.sample::<f64, _>(StandardNormal);
        }
        out_f.push(vec![x, y]);
        out_l.push(Label::Binary(u8::from(positive)));
    };
    for _ in 0..n_pos {
        push(&mut rng, true, &mut features, &mut labels);
    }
    for _ in 0..n_neg {
        push(&mut rng, false, &mut features, &mut labels);
    }
    Ok(LabeledDataset {
        features,
        labels,
        meta: format!(
            "two-moons n={n} noise={noise_sigma} positive_fraction={positive_fraction} seed={seed}"
        ),
    })
}

/// An uncertain least-squares instance: `A(xi) = A0 + xi A1` with `A0`, `A1`
/// 10x10 and `b` length 10, all entries standard normal; `N = 10` training
/// draws `xi ~ U[-0.5, 0.5]`; test draws shift to `U[-0.5(1+d), 0.5(1+d)]`
/// for each `d` in the shift grid.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertainLsInstance {
    pub system: UncertainLsSystem,
    pub train_xi: Vec<f64>,
    pub delta_grid: Vec<f64>,
    pub seed: u64,
}

pub const UNCERTAIN_LS_DIM: usize = 10;
pub const UNCERTAIN_LS_TRAIN_N: usize = 10;

pub fn gen_uncertain_ls(seed: u64) -> UncertainLsInstance {
    let stream = RngStream::new(seed);
    let mut rng = stream.rng(&[tag::DATASET, 0xA2]);
    let n = UNCERTAIN_LS_DIM;
    let mut draw = |k: usize| -> Vec<f64> {
        (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
    };
    let a0 = Mat::new(n, n, draw(n * n)).expect("square matrix");
    let a1 = Mat::new(n, n, draw(n * n)).expect("square matrix");
    let b = draw(n);
    let mut xi_rng = stream.rng(&[tag::DATASET, 0xA3]);
    let train_xi: Vec<f64> = (0..UNCERTAIN_LS_TRAIN_N)
        .map(|_| xi_rng.random::<f64>() - 0.5)
        .collect();
    UncertainLsInstance {
        system: UncertainLsSystem::new(a0, a1, b).expect("consistent shapes"),
        train_xi,
        delta_grid: (0..=10).map(|d| d as f64).collect(),
        seed,
    }
}

impl UncertainLsInstance {
    /// Training set as 1-d unlabeled points.
    pub fn train_dataset(&self) -> LabeledDataset {
        LabeledDataset {
            features: self.train_xi.iter().map(|&xi| vec![xi]).collect(),
            labels: vec![Label::None; self.train_xi.len()],
            meta: format!("uncertain-ls train seed={}", self.seed),
        }
    }

    /// Test draws `xi ~ U[-0.5 (1 + delta), 0.5 (1 + delta)]`.
    pub fn test_xi(&self, delta: f64, n_test: usize, seed: u64) -> Vec<f64> {
        let mut rng = RngStream::new(seed).rng(&[tag::DATASET, 0xA4, delta.to_bits()]);
        let half = 0.5 * (1.0 + delta);
        (0..n_test)
            .map(|_| (2.0 * rng.random::<f64>() - 1.0) * half)
            .collect()
    }
}

/// Separable multi-class Gaussian clouds: class `c < classes <= d` has mean
/// `margin / sqrt(2)` on axis `c` (pairwise mean distance is exactly
/// `margin`), unit isotropic noise, and class sizes balanced within one.
pub fn gen_synthetic_features(
    n: usize,
    d: usize,
    classes: usize,
    margin: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if classes < 2 {
        return Err(Error::InvalidArgument("need at least 2 classes".into()));
    }
    if d < classes {
        return Err(Error::InvalidArgument(format!(
            "simplex construction needs d >= classes ({d} < {classes})"
        )));
    }
    if n < classes {
        return Err(Error::InvalidArgument("need at least one point per class".into()));
    }
    let scale = margin / std::f64::consts::SQRT_2;
    let base = n / classes;
    let extra = n % classes;
    let mut rng = RngStream::new(seed).rng(&[tag::DATASET, 0x5F]);
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for c in 0..classes {
        let count = base + usize::from(c < extra);
        for _ in 0..count {
            let mut x: Vec<f64> =
                (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            x[c] += scale;
            features.push(x);
            labels.push(Label::Class(c));
        }
    }
    Ok(LabeledDataset {
        features,
        labels,
        meta: format!(
            "synthetic-features n={n} d={d} classes={classes} margin={margin} seed={seed}"
        ),
    })
}

const FEATURE_MAGIC: &str = "gfsdro-features";
const FEATURE_VERSION: &str = "v1";

/// Serialize a class-labeled dataset in the plain-text feature format:
/// header `gfsdro-features v1 n=<int> d=<int> classes=<int>`, then one line
/// per point with `d` floats and an integer label in `[0, classes)`. Floats
/// use the shortest decimal representation that round-trips bit-exactly.
pub fn format_features(data: &LabeledDataset) -> Result<String> {
    let classes = data.class_count();
    if classes < 1 {
        return Err(Error::InvalidArgument(
            "feature files need class or binary labels".into(),
        ));
    }
    let mut out = String::new();
    out.push_str(&format!(
        "{FEATURE_MAGIC} {FEATURE_VERSION} n={} d={} classes={}\n",
        data.len(),
        data.dim(),
        classes
    ));
    for i in 0..data.len() {
        let label = match data.labels[i] {
            Label::Binary(v) => v as usize,
            Label::Class(c) => c,
            Label::None => unreachable!("class_count >= 1 above"),
        };
        for v in &data.features[i] {
            out.push_str(&format!("{v} "));
        }
        out.push_str(&format!("{label}\n"));
    }
    Ok(out)
}

pub fn save_features(data: &LabeledDataset, path: &std::path::Path) -> Result<()> {
    std::fs::write(path, format_features(data)?)?;
    Ok(())
}

/// Parse the feature-file format; errors carry the 1-based offending line.
pub fn parse_features(text: &str) -> Result<LabeledDataset> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse { line: 1, message: "empty file".into() })?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let bad_header = |message: &str| Error::Parse { line: 1, message: message.into() };
    if fields.len() != 5 || fields[0] != FEATURE_MAGIC || fields[1] != FEATURE_VERSION {
        return Err(bad_header(&format!(
            "expected header '{FEATURE_MAGIC} {FEATURE_VERSION} n=<int> d=<int> classes=<int>'"
        )));
    }
    let parse_kv = |field: &str, key: &str| -> Result<usize> {
        let rest = field
            .strip_prefix(key)
            .and_then(|r| r.strip_prefix('='))
            .ok_or_else(|| bad_header(&format!("expected '{key}=<int>', got '{field}'")))?;
        rest.parse::<usize>()
            .map_err(|_| bad_header(&format!("'{field}' is not an integer field")))
    };
    let n = parse_kv(fields[2], "n")?;
    let d = parse_kv(fields[3], "d")?;
    let classes = parse_kv(fields[4], "classes")?;
    if n == 0 {
        return Err(bad_header("empty data section (n = 0)"));
    }
    if d == 0 || classes == 0 {
        return Err(bad_header("d and classes must be >= 1"));
    }
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let (idx, line) = lines.next().ok_or_else(|| Error::Parse {
            line: n + 1,
            message: format!("expected {n} data rows, file ended early"),
        })?;
        let lineno = idx + 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != d + 1 {
            return Err(Error::Parse {
                line: lineno,
                message: format!(
                    "expected {} fields ({} floats + label), got {}",
                    d + 1,
                    d,
                    toks.len()
                ),
            });
        }
        let mut row = Vec::with_capacity(d);
        for t in &toks[..d] {
            row.push(t.parse::<f64>().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("'{t}' is not a float"),
            })?);
        }
        let label: usize = toks[d].parse().map_err(|_| Error::Parse {
            line: lineno,
            message: format!("label '{}' is not an integer", toks[d]),
        })?;
        if label >= classes {
            return Err(Error::Parse {
                line: lineno,
                message: format!("label {label} out of range [0, {classes})"),
            });
        }
        features.push(row);
        labels.push(Label::Class(label));
    }
    for (idx, line) in lines {
        if !line.trim().is_empty() {
            return Err(Error::Parse {
                line: idx + 1,
                message: "trailing data beyond the declared row count".into(),
            });
        }
    }
    Ok(LabeledDataset {
        features,
        labels,
        meta: format!("loaded n={n} d={d} classes={classes}"),
    })
}

/// Load a feature file from disk.
pub fn load_features(path: &std::path::Path) -> Result<LabeledDataset> {
    let text = std::fs::read_to_string(path)?;
    parse_features(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_respects_margin_and_quadrant() {
        let data = gen_biased_circle(500, 3).unwrap();
        assert_eq!(data.len(), 500);
        let radius = CIRCLE_RADIUS_SQ.sqrt();
        for f in &data.features {
            let r = (f[0] * f[0] + f[1] * f[1]).sqrt();
            assert!(r <= radius / CIRCLE_MARGIN + 1e-12 || r >= radius * CIRCLE_MARGIN - 1e-12);
            assert!(!(f[0] > 0.0 && f[1] > 0.0), "point in first quadrant: {f:?}");
        }
    }

    #[test]
    fn circle_label_rule() {
        // ||(2, -2)|| = 2 sqrt(2) > sqrt(2): positive class
        let r = (2.0f64 * 2.0 + 2.0 * 2.0).sqrt();
        assert!(r - CIRCLE_RADIUS_SQ.sqrt() > 0.0);
        let data = gen_circle(2000, 5, false).unwrap();
        for i in 0..data.len() {
            let f = &data.features[i];
            let positive = (f[0] * f[0] + f[1] * f[1]).sqrt() > CIRCLE_RADIUS_SQ.sqrt();
            assert_eq!(data.labels[i], Label::Binary(u8::from(positive)));
        }
    }

    #[test]
    fn circle_negative_class_is_majority() {
        // ||X||^2 is chi-squared with 2 dof; its median 2 ln 2 < 2 puts more
        // mass inside the circle.
        let data = gen_circle(10_000, 11, false).unwrap();
        let neg = data.labels.iter().filter(|l| **l == Label::Binary(0)).count();
        let frac = neg as f64 / data.len() as f64;
        assert!(frac > 0.5 && frac < 0.75, "negative fraction {frac}");
    }

    #[test]
    fn moons_class_counts_and_geometry() {
        let data = gen_two_moons(200, 0.0, 0.9, 1).unwrap();
        let pos = data.labels.iter().filter(|l| **l == Label::Binary(1)).count();
        assert_eq!(pos, 180);
        assert_eq!(data.len() - pos, 20);
        // noiseless upper moon points sit on the unit half-circle
        for i in 0..data.len() {
            if data.labels[i] == Label::Binary(0) {
                let f = &data.features[i];
                let r = (f[0] * f[0] + f[1] * f[1]).sqrt();
                assert!((r - 1.0).abs() < 1e-12);
                assert!(f[1] >= -1e-12);
            }
        }
    }

    #[test]
    fn moons_lower_parametrization_at_t0() {
        // t = 0 on the lower moon is (1 - 1, 0.5 - 0) = (0, 0.5)
        let t = 0.0f64;
        let p = (1.0 - t.cos(), 0.5 - t.sin());
        assert_eq!(p, (0.0, 0.5));
    }

    #[test]
    fn uncertain_ls_invariants() {
        let inst = gen_uncertain_ls(9);
        assert_eq!(inst.train_xi.len(), UNCERTAIN_LS_TRAIN_N);
        assert!(inst.train_xi.iter().all(|&x| (-0.5..=0.5).contains(&x)));
        assert_eq!(inst.system.param_count(), UNCERTAIN_LS_DIM);
        // delta = 0 test draws live in the training range
        let xs = inst.test_xi(0.0, 100, 4);
        assert!(xs.iter().all(|&x| (-0.5..=0.5).contains(&x)));
        let wide = inst.test_xi(9.0, 100, 4);
        assert!(wide.iter().any(|&x| x.abs() > 0.5));
        assert_eq!(inst, gen_uncertain_ls(9));
    }

    #[test]
    fn synthetic_features_balanced_and_separable() {
        let data = gen_synthetic_features(101, 8, 4, 40.0, 7).unwrap();
        let mut counts = [0usize; 4];
        for l in &data.labels {
            if let Label::Class(c) = l {
                counts[*c] += 1;
            }
        }
        assert_eq!(counts.iter().sum::<usize>(), 101);
        assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
        // margin 40 >> noise: nearest class mean classifies perfectly
        let scale = 40.0 / std::f64::consts::SQRT_2;
        for i in 0..data.len() {
            let f = &data.features[i];
            let mut best = (f64::INFINITY, 0usize);
            for c in 0..4 {
                let mut d2 = 0.0;
                for k in 0..8 {
                    let mean = if k == c { scale } else { 0.0 };
                    d2 += (f[k] - mean).powi(2);
                }
                if d2 < best.0 {
                    best = (d2, c);
                }
            }
            assert_eq!(Label::Class(best.1), data.labels[i]);
        }
        assert_eq!(data, gen_synthetic_features(101, 8, 4, 40.0, 7).unwrap());
    }

    #[test]
    fn feature_file_round_trip_is_bit_exact() {
        let data = gen_synthetic_features(37, 5, 3, 4.0, 13).unwrap();
        let text = format_features(&data).unwrap();
        let back = parse_features(&text).unwrap();
        assert_eq!(back.features, data.features);
        for i in 0..data.len() {
            let expect = match data.labels[i] {
                Label::Class(c) => c,
                _ => unreachable!(),
            };
            assert_eq!(back.labels[i], Label::Class(expect));
        }
    }

    #[test]
    fn feature_file_rejects_bad_inputs() {
        // label out of range
        let text = "gfsdro-features v1 n=1 d=2 classes=10\n0.5 1.5 10\n";
        match parse_features(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        // empty data section
        let text = "gfsdro-features v1 n=0 d=2 classes=2\n";
        assert!(matches!(parse_features(text), Err(Error::Parse { line: 1, .. })));
        // ragged row
        let text = "gfsdro-features v1 n=1 d=3 classes=2\n0.5 1.5 1\n";
        match parse_features(text) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("expected 4 fields"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        // truncated file
        let text = "gfsdro-features v1 n=2 d=1 classes=2\n0.5 1\n";
        assert!(parse_features(text).is_err());
    }
}
