//! QAM/PAM point sets, minimum-distance detection, closed-form symbol error
//! rates and the rim model of detection-error power.
//!
//! Points sit on a grid of odd integers (…, -3, -1, 1, 3, …) scaled so the
//! average symbol power equals the requested value. Square QAM uses an
//! `m × m` grid, odd-bit QAM a rectangular grid (2, 8 points) or a cross
//! (32 points and up), PAM a single column on the imaginary axis.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::numerics::{qfunc, Complex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstellationKind {
    Qam,
    /// Purely imaginary amplitude levels.
    Pam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shape {
    Rect,
    /// Square grid of side `side` with `corner × corner` blocks removed.
    Cross { corner: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Grid {
    cols: usize,
    rows: usize,
    shape: Shape,
}

impl Grid {
    fn for_qam(order: usize) -> Grid {
        let bits = order.trailing_zeros();
        if bits % 2 == 0 {
            let m = 1usize << (bits / 2);
            return Grid { cols: m, rows: m, shape: Shape::Rect };
        }
        match bits {
            1 => Grid { cols: 2, rows: 1, shape: Shape::Rect },
            3 => Grid { cols: 4, rows: 2, shape: Shape::Rect },
            _ => {
                let side = 3usize << ((bits - 3) / 2);
                let corner = 1usize << ((bits - 5) / 2);
                Grid { cols: side, rows: side, shape: Shape::Cross { corner } }
            }
        }
    }

    fn for_pam(order: usize) -> Grid {
        Grid { cols: 1, rows: order, shape: Shape::Rect }
    }

    fn contains(&self, i: isize, q: isize) -> bool {
        if i < 0 || q < 0 || i >= self.cols as isize || q >= self.rows as isize {
            return false;
        }
        match self.shape {
            Shape::Rect => true,
            Shape::Cross { corner } => {
                let c = corner as isize;
                let hi = self.cols as isize - c;
                let edge_i = i < c || i >= hi;
                let edge_q = q < c || q >= hi;
                !(edge_i && edge_q)
            }
        }
    }

    /// Valid cells in index order (row-major over the in-phase coordinate).
    fn cells(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.cols {
            for q in 0..self.rows {
                if self.contains(i as isize, q as isize) {
                    out.push((i, q));
                }
            }
        }
        out
    }

    fn coord(len: usize, idx: usize) -> f64 {
        (2 * idx) as f64 - (len - 1) as f64
    }

    /// Average power of the unscaled (odd-integer) grid.
    fn unit_power(&self) -> f64 {
        let cells = self.cells();
        let total: f64 = cells
            .iter()
            .map(|&(i, q)| Self::coord(self.cols, i).powi(2) + Self::coord(self.rows, q).powi(2))
            .sum();
        total / cells.len() as f64
    }
}

fn check_order(order: usize) -> Result<()> {
    if order < 2 || !order.is_power_of_two() {
        return domain(format!("constellation order must be a power of two >= 2, got {order}"));
    }
    Ok(())
}

fn check_power(power: f64) -> Result<()> {
    if !(power > 0.0 && power.is_finite()) {
        return domain(format!("symbol power must be positive and finite, got {power}"));
    }
    Ok(())
}

/// Immutable point set with a grid-based nearest-point detector.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    kind: ConstellationKind,
    order: usize,
    power: f64,
    scale: f64,
    grid: Grid,
    /// Cell `(i, q)` → point index; only populated for cross shapes.
    cell_index: Option<Vec<u32>>,
    points: Vec<Complex>,
}

impl Constellation {
    pub fn qam(order: usize, power: f64) -> Result<Self> {
        check_order(order)?;
        check_power(power)?;
        Ok(Self::build(ConstellationKind::Qam, order, power, Grid::for_qam(order)))
    }

    pub fn pam(order: usize, power: f64) -> Result<Self> {
        check_order(order)?;
        check_power(power)?;
        Ok(Self::build(ConstellationKind::Pam, order, power, Grid::for_pam(order)))
    }

    pub fn new(kind: ConstellationKind, order: usize, power: f64) -> Result<Self> {
        match kind {
            ConstellationKind::Qam => Self::qam(order, power),
            ConstellationKind::Pam => Self::pam(order, power),
        }
    }

    fn build(kind: ConstellationKind, order: usize, power: f64, grid: Grid) -> Self {
        let scale = (power / grid.unit_power()).sqrt();
        let cells = grid.cells();
        debug_assert_eq!(cells.len(), order);
        let points = cells
            .iter()
            .map(|&(i, q)| {
                Complex::new(Grid::coord(grid.cols, i) * scale, Grid::coord(grid.rows, q) * scale)
            })
            .collect();
        let cell_index = match grid.shape {
            Shape::Rect => None,
            Shape::Cross { .. } => {
                let mut map = vec![u32::MAX; grid.cols * grid.rows];
                for (idx, &(i, q)) in cells.iter().enumerate() {
                    map[i * grid.rows + q] = idx as u32;
                }
                Some(map)
            }
        };
        Self { kind, order, power, scale, grid, cell_index, points }
    }

    pub fn kind(&self) -> ConstellationKind {
        self.kind
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn points(&self) -> &[Complex] {
        &self.points
    }

    pub fn point(&self, index: usize) -> Complex {
        self.points[index]
    }

    /// True for square QAM and for PAM, where the closed-form SER is exact.
    pub fn is_square(&self) -> bool {
        match self.kind {
            ConstellationKind::Pam => true,
            ConstellationKind::Qam => self.grid.cols == self.grid.rows && self.grid.shape == Shape::Rect,
        }
    }

    /// Grid spacing, i.e. the smallest distance between two points.
    pub fn min_distance(&self) -> f64 {
        2.0 * self.scale
    }

    /// Same geometry at a different average power.
    pub fn rescaled(&self, power: f64) -> Result<Self> {
        Self::new(self.kind, self.order, power)
    }

    fn axis_index(value: f64, scale: f64, len: usize) -> usize {
        if len == 1 {
            return 0;
        }
        let u = (value / scale + (len - 1) as f64) / 2.0;
        // Half-way values round down so ties go to the lower index.
        let idx = (u - 0.5).ceil();
        idx.clamp(0.0, (len - 1) as f64) as usize
    }

    /// Nearest point index; ties resolve to the lower index.
    pub fn detect(&self, observation: Complex) -> usize {
        let i = Self::axis_index(observation.re, self.scale, self.grid.cols);
        let q = Self::axis_index(observation.im, self.scale, self.grid.rows);
        match &self.cell_index {
            None => i * self.grid.rows + q,
            Some(map) => {
                let idx = map[i * self.grid.rows + q];
                if idx == u32::MAX {
                    ml_detect(observation, self).0
                } else {
                    idx as usize
                }
            }
        }
    }

    /// Gray label for rectangular grids and PAM; cross shapes have none.
    pub fn gray_label(&self, index: usize) -> Option<u32> {
        if self.cell_index.is_some() {
            return None;
        }
        let gray = |v: usize| (v ^ (v >> 1)) as u32;
        let i = index / self.grid.rows;
        let q = index % self.grid.rows;
        let q_bits = self.grid.rows.trailing_zeros();
        Some((gray(i) << q_bits) | gray(q))
    }
}

/// Exhaustive minimum-distance detection; ties go to the lowest index.
pub fn ml_detect(observation: Complex, constellation: &Constellation) -> (usize, Complex) {
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (idx, p) in constellation.points.iter().enumerate() {
        let dist = (observation - p).norm_sqr();
        if dist < best_dist {
            best = idx;
            best_dist = dist;
        }
    }
    (best, constellation.points[best])
}

/// `sqrt(6ε/(M−1))`, the square-QAM spacing at average power `ε`.
pub fn min_distance(order: usize, power: f64) -> Result<f64> {
    if order < 2 {
        return domain(format!("constellation order must be >= 2, got {order}"));
    }
    Ok((6.0 * power / (order as f64 - 1.0)).sqrt())
}

/// Spacing of the QAM grid actually generated for `order`: the closed form
/// for square orders, enumeration of the rectangular/cross grid otherwise.
pub fn qam_min_distance(order: usize, power: f64) -> Result<f64> {
    check_order(order)?;
    if order.trailing_zeros() % 2 == 0 {
        return min_distance(order, power);
    }
    Ok(2.0 * (power / Grid::for_qam(order).unit_power()).sqrt())
}

fn snr_ratio(power: f64, noise: f64) -> f64 {
    if noise == 0.0 {
        f64::INFINITY
    } else {
        power / noise
    }
}

/// Square-QAM symbol error rate at symbol power `power` and complex noise
/// power `noise`.
pub fn ser_qam(order: usize, power: f64, noise: f64) -> Result<f64> {
    if order < 2 {
        return domain(format!("constellation order must be >= 2, got {order}"));
    }
    let m = order as f64;
    let a = (m.sqrt() - 1.0) / m.sqrt();
    let q = qfunc((3.0 * snr_ratio(power, noise) / (m - 1.0)).sqrt());
    Ok((4.0 * a * q * (1.0 - a * q)).clamp(0.0, 1.0))
}

/// PAM symbol error rate `2(M−1)/M · Q(sqrt(6ε/((M²−1)σ²)))` for levels on
/// one axis and complex noise power `σ²`.
pub fn ser_pam(order: usize, power: f64, noise: f64) -> Result<f64> {
    if order < 2 {
        return domain(format!("constellation order must be >= 2, got {order}"));
    }
    let m = order as f64;
    let coeff = 2.0 * (m - 1.0) / m;
    let q = qfunc((6.0 * snr_ratio(power, noise) / (m * m - 1.0)).sqrt());
    Ok((coeff * q).clamp(0.0, 1.0))
}

/// Neighbor classes, ordered as `1, 2, 10, 11, 12, 100, 101, 102, 103`.
pub const RIM_LABELS: [u32; 9] = [1, 2, 10, 11, 12, 100, 101, 102, 103];

/// Squared neighbor distance of each class in units of `d_min²`.
pub const RIM_SQUARED_DISTANCE: [f64; 9] = [1.0, 2.0, 4.0, 5.0, 8.0, 9.0, 10.0, 13.0, 18.0];

/// Grid offset `(a, b)` of each class; swaps and sign flips are implied.
const RIM_OFFSETS: [(isize, isize); 9] =
    [(1, 0), (1, 1), (2, 0), (2, 1), (2, 2), (3, 0), (3, 1), (3, 2), (3, 3)];

/// Tail probabilities of the three rims and the per-class error probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RimProbabilities {
    pub pa: f64,
    pub pb: f64,
    pub pc: f64,
    pub classes: [f64; 9],
}

fn check_rims(rims: u8) -> Result<()> {
    if !(1..=3).contains(&rims) {
        return domain(format!("rim count must be 1, 2 or 3, got {rims}"));
    }
    Ok(())
}

pub fn rim_probabilities(d_min: f64, noise: f64, rims: u8) -> Result<RimProbabilities> {
    check_rims(rims)?;
    if !(noise > 0.0) {
        return domain(format!("noise power must be positive, got {noise}"));
    }
    let arg = d_min / (std::f64::consts::SQRT_2 * noise.sqrt());
    let pa = qfunc(arg);
    let pb = if rims >= 2 { qfunc(3.0 * arg) } else { 0.0 };
    let pc = if rims >= 3 { qfunc(5.0 * arg) } else { 0.0 };
    let stay = 1.0 - 2.0 * pa;
    let one = pa - pb;
    let two = pb - pc;
    Ok(RimProbabilities {
        pa,
        pb,
        pc,
        classes: [
            one * stay,
            one * one,
            two * stay,
            two * one,
            two * two,
            pc * stay,
            pc * one,
            pc * two,
            pc * pc,
        ],
    })
}

/// Average neighbor counts per class for one QAM order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RimModel {
    pub order: usize,
    pub counts: [f64; 9],
}

impl RimModel {
    pub fn distances(&self, d_min: f64) -> [f64; 9] {
        RIM_SQUARED_DISTANCE.map(|s| s.sqrt() * d_min)
    }
}

/// Mean number of in-constellation grid neighbors per class, averaged over
/// every point of the QAM grid used for `order`.
pub fn avg_neighbor_counts(order: usize) -> Result<RimModel> {
    check_order(order)?;
    let grid = Grid::for_qam(order);
    let cells = grid.cells();
    let mut counts = [0.0; 9];
    for (slot, &(a, b)) in RIM_OFFSETS.iter().enumerate() {
        let mut offsets = Vec::with_capacity(8);
        for (x, y) in [(a, b), (b, a)] {
            for sx in [1, -1] {
                for sy in [1, -1] {
                    let o = (sx * x, sy * y);
                    if !offsets.contains(&o) {
                        offsets.push(o);
                    }
                }
            }
        }
        let mut hits = 0usize;
        for &(i, q) in &cells {
            for &(dx, dy) in &offsets {
                if grid.contains(i as isize + dx, q as isize + dy) {
                    hits += 1;
                }
            }
        }
        counts[slot] = hits as f64 / cells.len() as f64;
    }
    Ok(RimModel { order, counts })
}

/// Rim-model power of detection errors, `Σ d_i² p_i n̄_i`.
///
/// A noiseless channel (`noise == 0`) gives zero.
pub fn detection_error_power(d_min: f64, noise: f64, order: usize, rims: u8) -> Result<f64> {
    let model = avg_neighbor_counts(order)?;
    detection_error_power_with(&model, d_min, noise, rims)
}

/// As [`detection_error_power`] with precomputed neighbor counts.
pub fn detection_error_power_with(model: &RimModel, d_min: f64, noise: f64, rims: u8) -> Result<f64> {
    check_rims(rims)?;
    if noise == 0.0 {
        return Ok(0.0);
    }
    let probs = rim_probabilities(d_min, noise, rims)?;
    let d2 = d_min * d_min;
    Ok((0..9)
        .map(|i| RIM_SQUARED_DISTANCE[i] * d2 * probs.classes[i] * model.counts[i])
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{gaussian_samples, stream_rng};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pairwise_min(c: &Constellation) -> f64 {
        let pts = c.points();
        let mut best = f64::INFINITY;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                best = best.min((pts[i] - pts[j]).norm());
            }
        }
        best
    }

    #[test]
    fn mean_and_power_invariants() {
        for order in [2, 4, 8, 16, 32, 64, 128, 256] {
            for power in [0.5, 1.0, 37.0] {
                let c = Constellation::qam(order, power).unwrap();
                assert_eq!(c.points().len(), order);
                let mean: Complex = c.points().iter().sum::<Complex>() / order as f64;
                assert!(mean.norm() < 1e-12 * power.sqrt().max(1.0));
                let p: f64 = c.points().iter().map(|x| x.norm_sqr()).sum::<f64>() / order as f64;
                assert_relative_eq!(p, power, max_relative = 1e-12);
                assert_relative_eq!(pairwise_min(&c), c.min_distance(), max_relative = 1e-12);
            }
        }
        let pam = Constellation::pam(16, 3.0).unwrap();
        assert!(pam.points().iter().all(|p| p.re == 0.0));
        let p: f64 = pam.points().iter().map(|x| x.norm_sqr()).sum::<f64>() / 16.0;
        assert_relative_eq!(p, 3.0, max_relative = 1e-12);
    }

    #[test]
    fn min_distance_examples() {
        assert_relative_eq!(min_distance(4, 1.0).unwrap(), 2f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(min_distance(16, 10.0).unwrap(), 2.0, max_relative = 1e-15);
        assert!(min_distance(1, 1.0).is_err());
        let c = Constellation::qam(16, 10.0).unwrap();
        assert_relative_eq!(pairwise_min(&c), min_distance(16, 10.0).unwrap(), max_relative = 1e-12);
        for order in [2, 8, 32, 128] {
            let c = Constellation::qam(order, 5.0).unwrap();
            assert!(!c.is_square());
            assert_relative_eq!(pairwise_min(&c), qam_min_distance(order, 5.0).unwrap(), max_relative = 1e-12);
        }
    }

    #[test]
    fn cross_shapes() {
        let c = Constellation::qam(32, 20.0).unwrap();
        // 6×6 grid without its four corners: unit power 20.
        assert_relative_eq!(c.min_distance(), 2.0, max_relative = 1e-12);
        let c = Constellation::qam(128, 1.0).unwrap();
        assert_eq!(c.points().len(), 128);
    }

    #[test]
    fn detection_on_points_and_ties() {
        let c = Constellation::qam(16, 10.0).unwrap();
        for (idx, p) in c.points().iter().enumerate() {
            assert_eq!(c.detect(*p), idx);
            assert_eq!(ml_detect(*p, &c).0, idx);
        }
        // Spacing 2 and coordinates {-3,-1,1,3}: midpoints are exact.
        let mid = (c.point(0) + c.point(1)) / 2.0;
        assert_eq!(ml_detect(mid, &c).0, 0);
        assert_eq!(c.detect(mid), 0);
        let mid = (c.point(5) + c.point(9)) / 2.0;
        assert_eq!(ml_detect(mid, &c).0, 5);
        assert_eq!(c.detect(mid), 5);
    }

    #[test]
    fn fast_detector_matches_exhaustive() {
        let mut rng = stream_rng(21, 0);
        for (order, kind) in [
            (2, ConstellationKind::Qam),
            (4, ConstellationKind::Qam),
            (8, ConstellationKind::Qam),
            (32, ConstellationKind::Qam),
            (64, ConstellationKind::Qam),
            (128, ConstellationKind::Qam),
            (16, ConstellationKind::Pam),
        ] {
            let c = Constellation::new(kind, order, 1.0).unwrap();
            let noise = gaussian_samples(&mut rng, 1.0, 4000);
            for pair in noise.chunks(2) {
                let obs = Complex::new(pair[0], pair[1]);
                assert_eq!(c.detect(obs), ml_detect(obs, &c).0, "order {order} at {obs}");
            }
        }
    }

    #[test]
    fn gray_labels_differ_by_one_bit_between_neighbors() {
        let c = Constellation::qam(64, 1.0).unwrap();
        let d = c.min_distance();
        let labels: Vec<u32> = (0..64).map(|i| c.gray_label(i).unwrap()).collect();
        let mut seen = labels.clone();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 64);
        for i in 0..64 {
            for j in 0..64 {
                if ((c.point(i) - c.point(j)).norm() - d).abs() < 1e-9 {
                    assert_eq!((labels[i] ^ labels[j]).count_ones(), 1);
                }
            }
        }
        assert!(Constellation::qam(32, 1.0).unwrap().gray_label(0).is_none());
    }

    #[test]
    fn ser_formula_reductions() {
        assert_eq!(ser_qam(16, 1.0, 0.0).unwrap(), 0.0);
        assert_eq!(ser_pam(16, 1.0, 0.0).unwrap(), 0.0);
        for snr in [0.5f64, 2.0, 9.0] {
            let q = qfunc(snr.sqrt());
            assert_relative_eq!(ser_qam(4, snr, 1.0).unwrap(), 2.0 * q * (1.0 - 0.5 * q), max_relative = 1e-14);
            let expect = qfunc((2.0 * snr).sqrt());
            assert_relative_eq!(ser_pam(2, snr, 1.0).unwrap(), expect, max_relative = 1e-14);
        }
    }

    fn complex_noise(rng: &mut crate::numerics::SimRng, noise: f64) -> Complex {
        let v = gaussian_samples(rng, noise / 2.0, 2);
        Complex::new(v[0], v[1])
    }

    /// Returns (symbol error rate, mean squared error) of ML detection.
    fn monte_carlo(c: &Constellation, noise: f64, trials: usize, seed: u64, imag_only: bool) -> (f64, f64) {
        let mut rng = stream_rng(seed, 0);
        let mut errors = 0usize;
        let mut sq = 0.0;
        for t in 0..trials {
            let idx = t % c.order();
            let mut n = complex_noise(&mut rng, noise);
            if imag_only {
                n.re = 0.0;
            }
            let got = c.detect(c.point(idx) + n);
            if got != idx {
                errors += 1;
                sq += (c.point(got) - c.point(idx)).norm_sqr();
            }
        }
        (errors as f64 / trials as f64, sq / trials as f64)
    }

    fn within_three_se(measured: f64, predicted: f64, trials: usize) -> bool {
        let se = (predicted * (1.0 - predicted) / trials as f64).sqrt();
        (measured - predicted).abs() <= 3.0 * se
    }

    #[test]
    fn ser_qam_matches_monte_carlo() {
        let trials = 100_000;
        let c = Constellation::qam(16, 10.0).unwrap();
        let (ser, _) = monte_carlo(&c, 1.0, trials, 3, false);
        let predicted = ser_qam(16, 10.0, 1.0).unwrap();
        assert!(within_three_se(ser, predicted, trials), "{ser} vs {predicted}");

        let trials = 1_000_000;
        let (ser, _) = monte_carlo(&c, 0.1, trials, 4, false);
        let predicted = ser_qam(16, 10.0, 0.1).unwrap();
        assert!(within_three_se(ser, predicted, trials), "{ser} vs {predicted}");
    }

    #[test]
    fn ser_pam_matches_monte_carlo() {
        let trials = 400_000;
        for (order, snr) in [(4usize, 200.0 / 40.0), (16, 150.0)] {
            let c = Constellation::pam(order, 200.0).unwrap();
            let noise = 200.0 / snr;
            let (ser, _) = monte_carlo(&c, noise, trials, 5, false);
            let predicted = ser_pam(order, 200.0, noise).unwrap();
            assert!(predicted > 1e-3);
            assert!(within_three_se(ser, predicted, trials), "M={order}: {ser} vs {predicted}");
        }
    }

    #[test]
    fn rim_probability_limits() {
        let p = rim_probabilities(1.0, 1e-6, 3).unwrap();
        assert!(p.classes.iter().all(|&x| x < 1e-300));
        let p = rim_probabilities(0.0, 1.0, 3).unwrap();
        assert_eq!((p.pa, p.pb, p.pc), (0.5, 0.5, 0.5));
        assert_eq!(p.classes[0], 0.0);
        let p = rim_probabilities(1.0, 1.0, 1).unwrap();
        assert_eq!((p.pb, p.pc), (0.0, 0.0));
        let p = rim_probabilities(1.0, 1.0, 2).unwrap();
        assert_eq!(p.pc, 0.0);
        assert!(rim_probabilities(1.0, 0.0, 3).is_err());
        assert!(rim_probabilities(1.0, 1.0, 4).is_err());
    }

    #[test]
    fn neighbor_count_tables() {
        let m4 = avg_neighbor_counts(4).unwrap();
        assert_eq!(m4.counts, [2.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let m16 = avg_neighbor_counts(16).unwrap();
        assert_eq!(m16.counts, [3.0, 2.25, 2.0, 3.0, 1.0, 1.0, 1.5, 1.0, 0.25]);
        let big = avg_neighbor_counts(1 << 16).unwrap();
        assert!((big.counts[0] - 4.0).abs() < 0.02);
        assert!((big.counts[1] - 4.0).abs() < 0.04);
        assert!((big.counts[3] - 8.0).abs() < 0.1);
    }

    #[test]
    fn neighbor_counts_match_distance_enumeration() {
        for order in [16, 32, 64] {
            let c = Constellation::qam(order, 1.0).unwrap();
            let d = c.min_distance();
            let model = avg_neighbor_counts(order).unwrap();
            for (slot, &sq) in RIM_SQUARED_DISTANCE.iter().enumerate() {
                let mut hits = 0usize;
                for p in c.points() {
                    for r in c.points() {
                        if ((p - r).norm_sqr() / (d * d) - sq).abs() < 1e-9 {
                            hits += 1;
                        }
                    }
                }
                assert_relative_eq!(model.counts[slot], hits as f64 / order as f64, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn detection_error_power_matches_monte_carlo_16qam() {
        let power = 10.0;
        let c = Constellation::qam(16, power).unwrap();
        let noise = power / 10.0;
        let (_, mse) = monte_carlo(&c, noise, 1_000_000, 8, false);
        let model = detection_error_power(c.min_distance(), noise, 16, 3).unwrap();
        assert!((model - mse).abs() <= 0.05 * mse, "model {model} vs {mse}");
        let one = detection_error_power(c.min_distance(), noise, 16, 1).unwrap();
        assert!(mse >= one && mse <= 1.1 * model);
    }

    #[test]
    fn four_qam_outer_rims_are_empty() {
        let f1 = detection_error_power(1.0, 0.2, 4, 1).unwrap();
        let f3 = detection_error_power(1.0, 0.2, 4, 3).unwrap();
        assert!(f3 <= f1 && f3 > 0.99 * f1);
    }

    #[test]
    fn detection_error_power_noiseless() {
        assert_eq!(detection_error_power(1.0, 0.0, 16, 3).unwrap(), 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn ser_bounded_and_monotone(bits in 1u32..9, snr in 1e-3f64..1e4, step in 1.0001f64..3.0) {
            let order = 1usize << bits;
            let a = ser_qam(order, snr, 1.0).unwrap();
            let b = ser_qam(order, snr * step, 1.0).unwrap();
            prop_assert!((0.0..=1.0).contains(&a) && b <= a);
            let a = ser_pam(order, snr, 1.0).unwrap();
            let b = ser_pam(order, snr * step, 1.0).unwrap();
            prop_assert!((0.0..=1.0).contains(&a) && b <= a);
        }

        #[test]
        fn error_power_monotone(
            bits in prop::sample::select(vec![4u32, 6, 8]),
            noise in 1e-3f64..0.25,
            grow in 1.001f64..4.0,
        ) {
            // Operating regime d_min/σ >= 1. For 4-QAM the outer rims hold no
            // points, so enabling them only shrinks the first-rim terms.
            let order = 1usize << bits;
            let d = 1.0;
            let f1 = detection_error_power(d, noise, order, 1).unwrap();
            let f2 = detection_error_power(d, noise, order, 2).unwrap();
            let f3 = detection_error_power(d, noise, order, 3).unwrap();
            prop_assert!(f1 <= f2 + 1e-15 && f2 <= f3 + 1e-15);
            let more = detection_error_power(d, noise * grow, order, 3).unwrap();
            prop_assert!(more >= f3);
        }
    }
}
