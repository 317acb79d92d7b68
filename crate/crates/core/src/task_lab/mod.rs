//! Target-selection geometry: the two-layer sphere layout, pairwise
//! distance classes and balanced task sequences.

mod synth;

pub use synth::{min_jerk, synth_reach, synth_task_suite, HandModel, HandShape, SuiteConfig, SynthTraceSpec};

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::Vec3;
use crate::Error;

#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target {
    pub id: usize,
    pub position: Vec3,
    pub radius: f64,
}

impl Target {
    pub fn contains(&self, p: Vec3) -> bool {
        p.distance(self.position) <= self.radius + 1e-9
    }
}

#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayoutConfig {
    pub target_radius: f64,
    /// Gives the wide spread to the far layer instead of the near one.
    pub swap_layer_spreads: bool,
    /// Reads "rows x columns" as columns x height rows.
    pub transpose_grid: bool,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        LayoutConfig {
            target_radius: 0.03,
            swap_layer_spreads: false,
            transpose_grid: false,
        }
    }
}

#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[derive(Debug, Clone, PartialEq)]
pub struct TargetLayout {
    pub arm_span: f64,
    pub config: LayoutConfig,
    pub targets: Vec<Target>,
}

impl TargetLayout {
    pub fn target(&self, id: usize) -> Option<&Target> {
        self.targets.iter().find(|t| t.id == id)
    }
}

pub const NEAR_DEPTH: f64 = 0.22;
pub const FAR_DEPTH: f64 = 0.44;
pub const HEIGHT_LOW: f64 = 0.4;
pub const HEIGHT_HIGH: f64 = 0.8;
const NEAR_WIDTH: f64 = 0.76;
const FAR_WIDTH: f64 = 0.25;

/// Eighteen targets on two depth layers, all scaled by arm span `A`:
/// 3 x 4 spread over 0.76A at depth 0.22A and 3 x 2 over 0.25A at 0.44A,
/// heights 0.4A..0.8A above the floor, centered on the midline.
pub fn generate_layout(arm_span: f64, config: LayoutConfig) -> Result<TargetLayout, Error> {
    if !(arm_span > 0.0) || !arm_span.is_finite() {
        return Err(Error::InvalidParameter("arm span must be positive"));
    }
    if !(config.target_radius > 0.0) {
        return Err(Error::InvalidParameter("target radius must be positive"));
    }
    let (near_width, far_width) = if config.swap_layer_spreads {
        (FAR_WIDTH, NEAR_WIDTH)
    } else {
        (NEAR_WIDTH, FAR_WIDTH)
    };
    let layers = [(NEAR_DEPTH, near_width, 3, 4), (FAR_DEPTH, far_width, 3, 2)];
    let mut targets = Vec::with_capacity(18);
    for (depth, width, rows, cols) in layers {
        let (rows, cols) = if config.transpose_grid {
            (cols, rows)
        } else {
            (rows, cols)
        };
        for row in 0..rows {
            let height = HEIGHT_LOW + (HEIGHT_HIGH - HEIGHT_LOW) * row as f64 / (rows - 1) as f64;
            for col in 0..cols {
                let x = width * (col as f64 / (cols - 1) as f64 - 0.5);
                targets.push(Target {
                    id: targets.len(),
                    position: Vec3::new(x * arm_span, height * arm_span, depth * arm_span),
                    radius: config.target_radius,
                });
            }
        }
    }
    Ok(TargetLayout {
        arm_span,
        config,
        targets,
    })
}

#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DistanceClass {
    Short,
    Medium,
    Long,
}

impl DistanceClass {
    pub const ALL: [DistanceClass; 3] = [DistanceClass::Short, DistanceClass::Medium, DistanceClass::Long];

    pub fn name(self) -> &'static str {
        match self {
            DistanceClass::Short => "short",
            DistanceClass::Medium => "medium",
            DistanceClass::Long => "long",
        }
    }

    pub fn from_name(s: &str) -> Option<DistanceClass> {
        DistanceClass::ALL.into_iter().find(|c| c.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetPair {
    pub a: usize,
    pub b: usize,
    pub distance: f64,
    pub class: DistanceClass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceClasses {
    pub q25: f64,
    pub q50: f64,
    /// Every unordered pair, `a < b`.
    pub pairs: Vec<TargetPair>,
}

impl DistanceClasses {
    pub fn classify(&self, distance: f64) -> DistanceClass {
        if distance <= self.q25 {
            DistanceClass::Short
        } else if distance <= self.q50 {
            DistanceClass::Medium
        } else {
            DistanceClass::Long
        }
    }

    pub fn pair(&self, a: usize, b: usize) -> Option<&TargetPair> {
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        self.pairs.iter().find(|p| p.a == a && p.b == b)
    }
}

/// Linear-interpolation quantile of sorted data (`(n-1) * q` rank).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * q;
    let lo = crate::math::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Splits all target pairs at the 25th and 50th distance percentiles.
pub fn classify_distances(layout: &TargetLayout) -> DistanceClasses {
    let ts = &layout.targets;
    let mut raw = Vec::with_capacity(ts.len() * ts.len().saturating_sub(1) / 2);
    for (i, a) in ts.iter().enumerate() {
        for b in &ts[i + 1..] {
            raw.push((a.id, b.id, a.position.distance(b.position)));
        }
    }
    let mut sorted: Vec<f64> = raw.iter().map(|p| p.2).collect();
    sorted.sort_by(f64::total_cmp);
    let (q25, q50) = if sorted.is_empty() {
        (0.0, 0.0)
    } else {
        (quantile_sorted(&sorted, 0.25), quantile_sorted(&sorted, 0.5))
    };
    let mut classes = DistanceClasses {
        q25,
        q50,
        pairs: Vec::new(),
    };
    classes.pairs = raw
        .into_iter()
        .map(|(a, b, distance)| TargetPair {
            a,
            b,
            distance,
            class: classes.classify(distance),
        })
        .collect();
    classes
}

#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaskSpec {
    pub start_id: usize,
    pub end_id: usize,
    #[cfg_attr(feature = "serde", serde(rename = "distance_class"))]
    pub class: DistanceClass,
}

/// `n_tasks / 3` tasks per distance class in seeded random order. Pairs are
/// drawn without repetition while the class has unused pairs.
pub fn make_task_sequence(layout: &TargetLayout, n_tasks: usize, seed: u64) -> Result<Vec<TaskSpec>, Error> {
    if !n_tasks.is_multiple_of(3) {
        return Err(Error::TaskCountNotDivisible(n_tasks));
    }
    let classes = classify_distances(layout);
    let per_class = n_tasks / 3;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tasks = Vec::with_capacity(n_tasks);
    for class in DistanceClass::ALL {
        let mut pool: Vec<&TargetPair> = classes.pairs.iter().filter(|p| p.class == class).collect();
        if pool.is_empty() {
            if per_class == 0 {
                continue;
            }
            return Err(Error::InfeasibleClass(class));
        }
        let mut drawn = 0;
        while drawn < per_class {
            pool.shuffle(&mut rng);
            for pair in pool.iter().take(per_class - drawn) {
                let (start_id, end_id) = if rng.gen_bool(0.5) {
                    (pair.a, pair.b)
                } else {
                    (pair.b, pair.a)
                };
                tasks.push(TaskSpec {
                    start_id,
                    end_id,
                    class,
                });
                drawn += 1;
            }
        }
    }
    tasks.shuffle(&mut rng);
    Ok(tasks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_shape() {
        let l = generate_layout(1.7, LayoutConfig::default()).unwrap();
        assert_eq!(l.targets.len(), 18);
        let near = l.targets.iter().filter(|t| (t.position.z - 0.374).abs() < 1e-9).count();
        let far = l.targets.iter().filter(|t| (t.position.z - 0.748).abs() < 1e-9).count();
        assert_eq!((near, far), (12, 6));
    }

    #[test]
    fn unit_span_row_heights() {
        let l = generate_layout(1.0, LayoutConfig::default()).unwrap();
        let mut hs: Vec<f64> = l.targets.iter().map(|t| t.position.y).collect();
        hs.sort_by(f64::total_cmp);
        hs.dedup();
        assert_eq!(hs, [0.4, 0.6000000000000001, 0.8]);
    }

    #[test]
    fn layout_is_centered_and_spread() {
        let l = generate_layout(1.0, LayoutConfig::default()).unwrap();
        let near_x: Vec<f64> = l.targets[..4].iter().map(|t| t.position.x).collect();
        assert!((near_x[0] + 0.38).abs() < 1e-12 && (near_x[3] - 0.38).abs() < 1e-12);
        let far_x: Vec<f64> = l.targets[12..14].iter().map(|t| t.position.x).collect();
        assert!((far_x[0] + 0.125).abs() < 1e-12 && (far_x[1] - 0.125).abs() < 1e-12);
    }

    #[test]
    fn swap_and_transpose_flags() {
        let cfg = LayoutConfig {
            swap_layer_spreads: true,
            transpose_grid: true,
            ..Default::default()
        };
        let l = generate_layout(1.0, cfg).unwrap();
        assert_eq!(l.targets.len(), 18);
        let near_xmax = l.targets[..12].iter().map(|t| t.position.x).fold(f64::MIN, f64::max);
        assert!((near_xmax - 0.125).abs() < 1e-12);
        let near_heights = l.targets[..12].iter().filter(|t| t.position.x == near_xmax).count();
        assert_eq!(near_heights, 4);
    }

    #[test]
    fn pair_count_and_scale_invariance() {
        let a = classify_distances(&generate_layout(1.7, LayoutConfig::default()).unwrap());
        let b = classify_distances(&generate_layout(3.4, LayoutConfig::default()).unwrap());
        assert_eq!(a.pairs.len(), 153);
        assert!((b.q25 - 2.0 * a.q25).abs() < 1e-12);
        assert!((b.q50 - 2.0 * a.q50).abs() < 1e-12);
        for (pa, pb) in a.pairs.iter().zip(&b.pairs) {
            assert_eq!(pa.class, pb.class);
        }
    }

    #[test]
    fn quantile_interpolates() {
        let d = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&d, 0.25), 2.0);
        assert_eq!(quantile_sorted(&[0.0, 10.0], 0.25), 2.5);
    }

    #[test]
    fn sequence_quota_and_determinism() {
        let l = generate_layout(1.7, LayoutConfig::default()).unwrap();
        let s = make_task_sequence(&l, 30, 7).unwrap();
        for c in DistanceClass::ALL {
            assert_eq!(s.iter().filter(|t| t.class == c).count(), 10);
        }
        assert_eq!(s, make_task_sequence(&l, 30, 7).unwrap());
        assert_ne!(s, make_task_sequence(&l, 30, 8).unwrap());
        assert!(s.iter().all(|t| t.start_id != t.end_id));
        assert_eq!(make_task_sequence(&l, 3, 1).unwrap().len(), 3);
        assert_eq!(make_task_sequence(&l, 31, 1), Err(Error::TaskCountNotDivisible(31)));
    }

    #[test]
    fn infeasible_class() {
        let mut l = generate_layout(1.0, LayoutConfig::default()).unwrap();
        l.targets.truncate(2);
        // A single pair lands in the short bucket.
        assert_eq!(
            make_task_sequence(&l, 3, 0),
            Err(Error::InfeasibleClass(DistanceClass::Medium))
        );
    }
}
