//! Value-of-time (VOT) distributions with bounded support, in $/hour.
//!
//! Uniform and triangular densities are stored as piecewise-linear ones, so a
//! single closed-form code path serves cdf, quantile and interval moments for
//! every continuous kind. The empirical kind keeps the sorted sample and uses
//! the step ECDF.

use serde::Deserialize;
use thiserror::Error;

use crate::scalar::{from_usize, lit, Real};

/// Class count used when the VOT file does not set `M`.
pub const DEFAULT_CLASSES: usize = 100;

/// Classes lighter than this get the interval midpoint as their mean.
const EMPTY_CLASS_MASS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum VotError {
    #[error("malformed VOT JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("support must satisfy 0 <= min < max, got [{0}, {1}]")]
    BadSupport(f64, f64),
    #[error("unknown VOT distribution kind `{0}`")]
    UnknownKind(String),
    #[error("invalid distribution parameters: {0}")]
    BadParams(String),
    #[error("probability {0} outside [0, 1]")]
    ProbabilityOutOfRange(f64),
    #[error("class count must be at least 1")]
    NoClasses,
    #[error("subscriber demand must be non-negative, got {0}")]
    NegativeDemand(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VotKind {
    Uniform,
    Triangular,
    PiecewiseLinear,
    Empirical,
}

impl VotKind {
    pub fn name(self) -> &'static str {
        match self {
            VotKind::Uniform => "uniform",
            VotKind::Triangular => "triangular",
            VotKind::PiecewiseLinear => "piecewise_linear",
            VotKind::Empirical => "empirical",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Shape<T> {
    /// Normalized density at each knot, linear in between; `cum` and
    /// `moment` hold the cdf and first moment accumulated up to each knot.
    Linear { knots: Vec<T>, density: Vec<T>, cum: Vec<T>, moment: Vec<T> },
    Empirical { samples: Vec<T> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct VotDistribution<T> {
    kind: VotKind,
    min: T,
    max: T,
    shape: Shape<T>,
}

fn check_support<T: Real>(min: T, max: T) -> Result<(), VotError> {
    if !(min >= T::zero() && min < max && max.is_finite()) {
        return Err(VotError::BadSupport(min.to_f64_lossy(), max.to_f64_lossy()));
    }
    Ok(())
}

impl<T: Real> VotDistribution<T> {
    pub fn uniform(min: T, max: T) -> Result<Self, VotError> {
        check_support(min, max)?;
        let h = T::one() / (max - min);
        Self::linear(VotKind::Uniform, vec![min, max], vec![h, h])
    }

    pub fn triangular(min: T, mode: T, max: T) -> Result<Self, VotError> {
        check_support(min, max)?;
        if !(mode >= min && mode <= max) {
            return Err(VotError::BadParams(format!("mode {mode} outside support")));
        }
        let peak = lit::<T>(2.0) / (max - min);
        let (knots, density) = if mode == min {
            (vec![min, max], vec![peak, T::zero()])
        } else if mode == max {
            (vec![min, max], vec![T::zero(), peak])
        } else {
            (vec![min, mode, max], vec![T::zero(), peak, T::zero()])
        };
        Self::linear(VotKind::Triangular, knots, density)
    }

    /// Density given by its values at `knots`; the first and last knots are the
    /// support bounds. Heights are rescaled to integrate to one.
    pub fn piecewise_linear(knots: Vec<T>, density: Vec<T>) -> Result<Self, VotError> {
        if knots.len() < 2 || knots.len() != density.len() {
            return Err(VotError::BadParams("need at least two knots and one density value per knot".into()));
        }
        check_support(knots[0], knots[knots.len() - 1])?;
        Self::linear(VotKind::PiecewiseLinear, knots, density)
    }

    pub fn empirical(min: T, max: T, mut samples: Vec<T>) -> Result<Self, VotError> {
        check_support(min, max)?;
        if samples.is_empty() {
            return Err(VotError::BadParams("empirical distribution needs samples".into()));
        }
        if samples.iter().any(|s| !(*s >= min && *s <= max)) {
            return Err(VotError::BadParams("samples must lie inside the support".into()));
        }
        samples.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
        Ok(VotDistribution { kind: VotKind::Empirical, min, max, shape: Shape::Empirical { samples } })
    }

    fn linear(kind: VotKind, knots: Vec<T>, density: Vec<T>) -> Result<Self, VotError> {
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(VotError::BadParams("knots must be strictly increasing".into()));
        }
        if density.iter().any(|h| !(*h >= T::zero() && h.is_finite())) {
            return Err(VotError::BadParams("density values must be finite and >= 0".into()));
        }
        let half = lit::<T>(0.5);
        let area = knots
            .windows(2)
            .zip(density.windows(2))
            .fold(T::zero(), |acc, (x, h)| acc + (x[1] - x[0]) * (h[0] + h[1]) * half);
        if !(area > T::zero()) {
            return Err(VotError::BadParams("density has zero mass".into()));
        }
        let density: Vec<T> = density.into_iter().map(|h| h / area).collect();
        let mut cum = vec![T::zero()];
        let mut moment = vec![T::zero()];
        for k in 0..knots.len() - 1 {
            let (m, mom) = segment_partial(knots[k], knots[k + 1], density[k], density[k + 1], knots[k + 1]);
            cum.push(cum[k] + m);
            moment.push(moment[k] + mom);
        }
        let last = cum.len() - 1;
        cum[last] = T::one();
        let (min, max) = (knots[0], knots[knots.len() - 1]);
        Ok(VotDistribution { kind, min, max, shape: Shape::Linear { knots, density, cum, moment } })
    }

    pub fn kind(&self) -> VotKind {
        self.kind
    }

    pub fn support(&self) -> (T, T) {
        (self.min, self.max)
    }

    /// Probability density; `None` for the empirical kind.
    pub fn pdf(&self, b: T) -> Option<T> {
        match &self.shape {
            Shape::Linear { knots, density, .. } => {
                if b < self.min || b > self.max {
                    return Some(T::zero());
                }
                let k = segment_of(knots, b);
                let t = (b - knots[k]) / (knots[k + 1] - knots[k]);
                Some(density[k] + (density[k + 1] - density[k]) * t)
            }
            Shape::Empirical { .. } => None,
        }
    }

    /// `P(β <= b)`.
    pub fn cdf(&self, b: T) -> T {
        self.partial(b).0
    }

    /// `(P(β <= b), E[β; β <= b])`.
    fn partial(&self, b: T) -> (T, T) {
        if b < self.min {
            return (T::zero(), T::zero());
        }
        match &self.shape {
            Shape::Linear { knots, density, cum, moment } => {
                if b >= self.max {
                    return (T::one(), moment[moment.len() - 1]);
                }
                let k = segment_of(knots, b);
                let (m, mom) = segment_partial(knots[k], knots[k + 1], density[k], density[k + 1], b);
                ((cum[k] + m).min(T::one()), moment[k] + mom)
            }
            Shape::Empirical { samples } => {
                let n = samples.partition_point(|s| *s <= b);
                let total = samples[..n].iter().fold(T::zero(), |acc, s| acc + *s);
                let len = from_usize::<T>(samples.len());
                (from_usize::<T>(n) / len, total / len)
            }
        }
    }

    /// Smallest `b` with `cdf(b) >= u`, pinned to the support bounds at 0 and 1.
    pub fn inverse_cdf(&self, u: T) -> Result<T, VotError> {
        if !(u >= T::zero() && u <= T::one()) {
            return Err(VotError::ProbabilityOutOfRange(u.to_f64_lossy()));
        }
        if u == T::zero() {
            return Ok(self.min);
        }
        if u == T::one() {
            return Ok(self.max);
        }
        Ok(match &self.shape {
            Shape::Linear { knots, density, cum, .. } => {
                let k = cum.partition_point(|c| *c < u).max(1) - 1;
                let (x0, x1) = (knots[k], knots[k + 1]);
                let len = x1 - x0;
                let h0 = density[k];
                let slope = (density[k + 1] - h0) / len;
                let v = u - cum[k];
                // Solve h0 t + slope t^2 / 2 = v for the smallest t >= 0.
                let disc = (h0 * h0 + lit::<T>(2.0) * slope * v).max(T::zero());
                let denom = h0 + disc.sqrt();
                let t = if denom > T::zero() { lit::<T>(2.0) * v / denom } else { T::zero() };
                (x0 + t.max(T::zero()).min(len)).min(self.max)
            }
            Shape::Empirical { samples } => {
                let n = samples.len();
                let rank = (u * from_usize::<T>(n) - lit(1e-9)).ceil().to_usize().unwrap_or(1).clamp(1, n);
                samples[rank - 1]
            }
        })
    }

    pub fn mean(&self) -> T {
        self.partial(self.max).1
    }

    /// Probability mass and first moment on `(lo, hi]`.
    pub fn interval(&self, lo: T, hi: T) -> (T, T) {
        let (m0, e0) = self.partial(lo);
        let (m1, e1) = self.partial(hi);
        ((m1 - m0).max(T::zero()), e1 - e0)
    }

    /// Splits the support into `classes` equal-width VOT classes and
    /// apportions `subscribers` among them.
    pub fn discretize(&self, subscribers: T, classes: usize) -> Result<VotClassTable<T>, VotError> {
        if classes == 0 {
            return Err(VotError::NoClasses);
        }
        if !(subscribers >= T::zero()) {
            return Err(VotError::NegativeDemand(subscribers.to_f64_lossy()));
        }
        let width = (self.max - self.min) / from_usize(classes);
        let mut boundaries: Vec<T> = (0..=classes).map(|k| self.min + width * from_usize(k)).collect();
        boundaries[classes] = self.max;

        let mut demand = Vec::with_capacity(classes);
        let mut mean = Vec::with_capacity(classes);
        let mut prev = (T::zero(), T::zero());
        for m in 0..classes {
            let (lo, hi) = (boundaries[m], boundaries[m + 1]);
            let cur = self.partial(hi);
            let mass = (cur.0 - prev.0).max(T::zero());
            let moment = cur.1 - prev.1;
            prev = cur;
            demand.push(subscribers * mass);
            mean.push(if mass < lit(EMPTY_CLASS_MASS) {
                (lo + hi) / lit(2.0)
            } else {
                (moment / mass).max(lo).min(hi)
            });
        }
        Ok(VotClassTable { boundaries, demand, mean })
    }
}

/// Index `k` of the segment `[knots[k], knots[k+1]]` containing `b`.
fn segment_of<T: Real>(knots: &[T], b: T) -> usize {
    knots.partition_point(|x| *x <= b).clamp(1, knots.len() - 1) - 1
}

/// Mass and first moment of a linear density segment from `x0` up to `x`.
fn segment_partial<T: Real>(x0: T, x1: T, h0: T, h1: T, x: T) -> (T, T) {
    let t = x - x0;
    let s = (h1 - h0) / (x1 - x0);
    let half = lit::<T>(0.5);
    let mass = h0 * t + s * t * t * half;
    let moment = x0 * mass + h0 * t * t * half + s * t * t * t / lit(3.0);
    (mass, moment)
}

/// Discretized subscriber VOT classes.
#[derive(Debug, Clone, PartialEq)]
pub struct VotClassTable<T> {
    /// `M + 1` equally spaced class boundaries.
    pub boundaries: Vec<T>,
    /// Subscribers per class `d̃^m`.
    pub demand: Vec<T>,
    /// Mean VOT per class `β^m`.
    pub mean: Vec<T>,
}

impl<T: Real> VotClassTable<T> {
    pub fn len(&self) -> usize {
        self.demand.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demand.is_empty()
    }

    pub fn total_demand(&self) -> T {
        self.demand.iter().fold(T::zero(), |acc, x| acc + *x)
    }
}

/// A parsed VOT file: the distribution plus the optional class count.
#[derive(Debug, Clone)]
pub struct VotSpec<T> {
    pub distribution: VotDistribution<T>,
    pub classes: Option<usize>,
}

#[derive(Deserialize)]
struct RawVot {
    kind: String,
    support: [f64; 2],
    #[serde(default)]
    params: serde_json::Value,
    #[serde(rename = "M")]
    classes: Option<usize>,
}

#[derive(Deserialize)]
struct TriangularParams {
    mode: f64,
}

#[derive(Deserialize)]
struct PiecewiseParams {
    knots: Vec<f64>,
    density: Vec<f64>,
}

#[derive(Deserialize)]
struct EmpiricalParams {
    samples: Vec<f64>,
}

impl<T: Real> VotSpec<T> {
    pub fn from_json(text: &str) -> Result<Self, VotError> {
        let raw: RawVot = serde_json::from_str(text)?;
        let [lo, hi] = raw.support;
        if !lo.is_finite() || !hi.is_finite() {
            return Err(VotError::BadSupport(lo, hi));
        }
        let (min, max) = (lit::<T>(lo), lit::<T>(hi));
        let distribution = match raw.kind.as_str() {
            "uniform" => VotDistribution::uniform(min, max)?,
            "triangular" => {
                let p: TriangularParams = serde_json::from_value(raw.params)?;
                VotDistribution::triangular(min, lit(p.mode), max)?
            }
            "piecewise_linear" => {
                let p: PiecewiseParams = serde_json::from_value(raw.params)?;
                if p.knots.first() != Some(&lo) || p.knots.last() != Some(&hi) {
                    return Err(VotError::BadParams("knots must start and end at the support bounds".into()));
                }
                VotDistribution::piecewise_linear(
                    p.knots.into_iter().map(lit).collect(),
                    p.density.into_iter().map(lit).collect(),
                )?
            }
            "empirical" => {
                let p: EmpiricalParams = serde_json::from_value(raw.params)?;
                VotDistribution::empirical(min, max, p.samples.into_iter().map(lit).collect())?
            }
            other => return Err(VotError::UnknownKind(other.to_string())),
        };
        if raw.classes == Some(0) {
            return Err(VotError::NoClasses);
        }
        Ok(VotSpec { distribution, classes: raw.classes })
    }

    pub fn classes_or_default(&self) -> usize {
        self.classes.unwrap_or(DEFAULT_CLASSES)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type D = VotDistribution<f64>;

    #[test]
    fn uniform_identities() {
        let u = D::uniform(0.0, 1.0).unwrap();
        assert!((u.cdf(0.25) - 0.25).abs() < 1e-15);
        assert_eq!(u.cdf(-1.0), 0.0);
        assert_eq!(u.cdf(2.0), 1.0);
        let w = D::uniform(5.0, 45.0).unwrap();
        assert!((w.inverse_cdf(0.5).unwrap() - 25.0).abs() < 1e-12);
        assert_eq!(w.inverse_cdf(0.0).unwrap(), 5.0);
        assert_eq!(w.inverse_cdf(1.0).unwrap(), 45.0);
        assert!((w.mean() - 25.0).abs() < 1e-12);
    }

    #[test]
    fn triangular_endpoints() {
        for mode in [5.0, 20.0, 45.0] {
            let t = D::triangular(5.0, mode, 45.0).unwrap();
            assert_eq!(t.cdf(5.0), 0.0);
            assert_eq!(t.cdf(45.0), 1.0);
            assert!((t.mean() - (5.0 + mode + 45.0) / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_cdf_rejects_out_of_range() {
        let u = D::uniform(0.0, 1.0).unwrap();
        assert!(matches!(u.inverse_cdf(1.5), Err(VotError::ProbabilityOutOfRange(_))));
        assert!(u.inverse_cdf(-0.1).is_err());
    }

    #[test]
    fn discretize_uniform_halves() {
        let u = D::uniform(0.0, 10.0).unwrap();
        let t = u.discretize(100.0, 2).unwrap();
        assert_eq!(t.boundaries, vec![0.0, 5.0, 10.0]);
        assert!((t.demand[0] - 50.0).abs() < 1e-12 && (t.demand[1] - 50.0).abs() < 1e-12);
        assert!((t.mean[0] - 2.5).abs() < 1e-12 && (t.mean[1] - 7.5).abs() < 1e-12);
    }

    #[test]
    fn single_class_mean_is_distribution_mean() {
        let t = D::triangular(5.0, 12.0, 45.0).unwrap();
        let c = t.discretize(800.0, 1).unwrap();
        assert!((c.mean[0] - t.mean()).abs() < 1e-12);
        assert!((c.demand[0] - 800.0).abs() < 1e-9);
        assert!(matches!(t.discretize(800.0, 0), Err(VotError::NoClasses)));
    }

    #[test]
    fn empty_classes_use_midpoint() {
        let d = D::piecewise_linear(vec![0.0, 4.0, 5.0, 10.0], vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let c = d.discretize(10.0, 10).unwrap();
        assert_eq!(c.demand[1], 0.0);
        assert_eq!(c.mean[1], 1.5);
        assert!(c.mean.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn empirical_step_cdf() {
        let e = D::empirical(0.0, 10.0, vec![4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(e.cdf(2.5), 0.5);
        assert_eq!(e.inverse_cdf(0.5).unwrap(), 2.0);
        assert_eq!(e.inverse_cdf(0.51).unwrap(), 3.0);
        assert_eq!(e.inverse_cdf(1.0).unwrap(), 10.0);
        assert_eq!(e.pdf(1.0), None);
        assert_eq!(e.mean(), 2.5);
        let c = e.discretize(8.0, 2).unwrap();
        assert_eq!(c.demand, vec![8.0, 0.0]);
        assert_eq!(c.mean, vec![2.5, 7.5]);
    }

    #[test]
    fn parse_kinds() {
        let s: VotSpec<f64> =
            VotSpec::from_json(r#"{"kind": "triangular", "support": [5, 45], "params": {"mode": 15}, "M": 40}"#)
                .unwrap();
        assert_eq!(s.classes, Some(40));
        assert_eq!(s.distribution.kind(), VotKind::Triangular);
        let u: VotSpec<f64> = VotSpec::from_json(r#"{"kind": "uniform", "support": [0, 1]}"#).unwrap();
        assert_eq!(u.classes_or_default(), DEFAULT_CLASSES);
        assert!(matches!(
            VotSpec::<f64>::from_json(r#"{"kind": "lognormal", "support": [0, 1]}"#),
            Err(VotError::UnknownKind(_))
        ));
        assert!(matches!(
            VotSpec::<f64>::from_json(r#"{"kind": "uniform", "support": [3, 1]}"#),
            Err(VotError::BadSupport(..))
        ));
        assert!(VotSpec::<f64>::from_json(
            r#"{"kind": "piecewise_linear", "support": [0, 2], "params": {"knots": [0, 1], "density": [1, 1]}}"#
        )
        .is_err());
    }
}
