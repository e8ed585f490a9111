//! The decision stack on top of the component networks: per-image
//! heatmaps, data-estimated thresholds, per-network decisions and the
//! final vote aggregation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::PartKind;
use crate::nn::Network;
use crate::patch::{extract_rescale, patch_grid, PatchGrid, WindowSpec};
use crate::tensor::Tensor;

/// Per-pixel count of positively classified windows covering that pixel,
/// for one image and one component network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Heatmap {
    counts: Vec<u32>,
    width: usize,
    height: usize,
}

impl Heatmap {
    pub fn zeros(width: usize, height: usize) -> Heatmap {
        Heatmap {
            counts: vec![0; width * height],
            width,
            height,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn at(&self, x: usize, y: usize) -> u32 {
        self.counts[y * self.width + x]
    }

    /// Increment every pixel inside one window.
    pub fn add_rect(&mut self, rect: &crate::patch::Rect) {
        for y in rect.y..rect.y + rect.side {
            let row = y * self.width;
            for x in rect.x..rect.x + rect.side {
                self.counts[row + x] += 1;
            }
        }
    }

    /// Gray PNG with counts linearly mapped so the maximum is white.
    pub fn to_png_bytes(&self) -> Result<Vec<u8>> {
        let max = self.counts.iter().copied().max().unwrap_or(0).max(1);
        let pixels: Vec<u8> = self
            .counts
            .iter()
            .map(|&v| ((v as f64 / max as f64) * 255.0).round() as u8)
            .collect();
        let img = image::GrayImage::from_raw(self.width as u32, self.height as u32, pixels)
            .expect("pixel buffer sized from dimensions");
        let mut out = Vec::new();
        img.write_to(
            &mut std::io::Cursor::new(&mut out),
            image::ImageFormat::Png,
        )?;
        Ok(out)
    }

    /// Row-major JSON matrix of raw counts.
    pub fn to_json(&self) -> String {
        let rows: Vec<Vec<u32>> = (0..self.height)
            .map(|y| self.counts[y * self.width..(y + 1) * self.width].to_vec())
            .collect();
        serde_json::to_string(&rows).expect("u32 matrix always serializes")
    }
}

/// Classify every window of `grid`, accumulating positively classified
/// windows into a heatmap. Patches are rescaled to the network's input
/// side before classification; class 1 is "part present".
pub fn heatmap(image: &Tensor, network: &Network, grid: &PatchGrid) -> Result<Heatmap> {
    let mut map = Heatmap::zeros(grid.width, grid.height);
    for rect in &grid.rects {
        let patch = extract_rescale(image, *rect, network.input_side)?;
        if network.classify(&patch)? == 1 {
            map.add_rect(rect);
        }
    }
    Ok(map)
}

/// How many grid windows cover each pixel: the attainable upper bound of
/// any heatmap over the same grid.
pub fn coverage_counts(grid: &PatchGrid) -> Heatmap {
    let mut map = Heatmap::zeros(grid.width, grid.height);
    for rect in &grid.rects {
        map.add_rect(rect);
    }
    map
}

/// Scalar summary of a heatmap compared against thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticMode {
    Max,
    Mean,
}

impl StatisticMode {
    pub fn parse(s: &str) -> Option<StatisticMode> {
        match s.to_ascii_lowercase().as_str() {
            "max" => Some(StatisticMode::Max),
            "mean" => Some(StatisticMode::Mean),
            _ => None,
        }
    }
}

impl std::fmt::Display for StatisticMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StatisticMode::Max => f.write_str("max"),
            StatisticMode::Mean => f.write_str("mean"),
        }
    }
}

pub fn image_statistic(map: &Heatmap, mode: StatisticMode) -> f64 {
    match mode {
        StatisticMode::Max => map.counts.iter().copied().max().unwrap_or(0) as f64,
        StatisticMode::Mean => {
            if map.counts.is_empty() {
                0.0
            } else {
                map.counts.iter().map(|&v| v as f64).sum::<f64>() / map.counts.len() as f64
            }
        }
    }
}

/// Calibrated decision thresholds for one component network. The mode the
/// thresholds were estimated with travels with them so decisions can never
/// mix a max-estimated threshold with a mean statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSet {
    pub theta_p: f64,
    pub theta_n: f64,
    pub theta_i: f64,
    pub mode: StatisticMode,
}

/// Which threshold a decision uses. `Zero` is the dedicated
/// any-patch-fired mode: positive iff the statistic is strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaChoice {
    Zero,
    Negative,
    Intermediate,
    Positive,
}

impl ThetaChoice {
    pub const ALL: [ThetaChoice; 4] = [
        ThetaChoice::Zero,
        ThetaChoice::Negative,
        ThetaChoice::Intermediate,
        ThetaChoice::Positive,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ThetaChoice::Zero => "theta=0",
            ThetaChoice::Negative => "theta_n",
            ThetaChoice::Intermediate => "theta_i",
            ThetaChoice::Positive => "theta_p",
        }
    }

    pub fn parse(s: &str) -> Option<ThetaChoice> {
        match s.to_ascii_lowercase().as_str() {
            "zero" | "0" | "theta=0" => Some(ThetaChoice::Zero),
            "n" | "negative" | "theta_n" => Some(ThetaChoice::Negative),
            "i" | "intermediate" | "theta_i" => Some(ThetaChoice::Intermediate),
            "p" | "positive" | "theta_p" => Some(ThetaChoice::Positive),
            _ => None,
        }
    }
}

impl ThresholdSet {
    pub fn value(&self, choice: ThetaChoice) -> Option<f64> {
        match choice {
            ThetaChoice::Zero => None,
            ThetaChoice::Negative => Some(self.theta_n),
            ThetaChoice::Intermediate => Some(self.theta_i),
            ThetaChoice::Positive => Some(self.theta_p),
        }
    }

    pub fn statistic(&self, map: &Heatmap) -> f64 {
        image_statistic(map, self.mode)
    }

    /// Per-network decision for a heatmap under the chosen threshold.
    pub fn decide(&self, map: &Heatmap, choice: ThetaChoice) -> bool {
        let stat = self.statistic(map);
        match self.value(choice) {
            None => stat > 0.0,
            Some(theta) => network_decision(stat, theta),
        }
    }

    /// Statistic strictly between the negative and positive thresholds:
    /// the band a human supervisor could be asked about. Reported as a
    /// flag only, never a third decision class.
    pub fn uncertain(&self, statistic: f64) -> bool {
        let lo = self.theta_n.min(self.theta_p);
        let hi = self.theta_n.max(self.theta_p);
        statistic > lo && statistic < hi
    }
}

/// Positive iff the statistic reaches the threshold (inclusive).
pub fn network_decision(statistic: f64, theta: f64) -> bool {
    statistic >= theta
}

/// Mean image statistic over positive images, negative images, and their
/// union. On balanced sets the union mean is the midpoint of the other two.
pub fn thresholds_from_statistics(
    positive_stats: &[f64],
    negative_stats: &[f64],
    mode: StatisticMode,
) -> Result<ThresholdSet> {
    if positive_stats.is_empty() || negative_stats.is_empty() {
        return Err(Error::EmptyInput(
            "threshold estimation needs non-empty positive and negative sets".into(),
        ));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let theta_p = mean(positive_stats);
    let theta_n = mean(negative_stats);
    let all: f64 = positive_stats.iter().chain(negative_stats).sum();
    let theta_i = all / (positive_stats.len() + negative_stats.len()) as f64;
    Ok(ThresholdSet {
        theta_p,
        theta_n,
        theta_i,
        mode,
    })
}

/// Estimate thresholds for one network from whole labelled images. The
/// sliding-window grid is rebuilt per image so mixed image sizes are fine.
pub fn estimate_thresholds(
    network: &Network,
    positives: &[Tensor],
    negatives: &[Tensor],
    window: &WindowSpec,
    mode: StatisticMode,
) -> Result<ThresholdSet> {
    let stats_for = |images: &[Tensor]| -> Result<Vec<f64>> {
        images
            .iter()
            .map(|img| {
                let &[_, h, w] = img.shape() else {
                    return Err(Error::ShapeMismatch {
                        context: "estimate_thresholds image".into(),
                        expected: vec![3],
                        actual: img.shape().to_vec(),
                    });
                };
                let grid = patch_grid(w, h, window)?;
                Ok(image_statistic(&heatmap(img, network, &grid)?, mode))
            })
            .collect()
    };
    thresholds_from_statistics(&stats_for(positives)?, &stats_for(negatives)?, mode)
}

/// Final-output aggregation rule over the four per-network decisions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum VoteRule {
    /// Positive iff at least `k` of the four networks decided positive.
    KOfFour { k: usize },
    /// Positive iff the weight of positive deciders reaches `threshold`.
    Weighted { weights: [f64; 4], threshold: f64 },
}

impl VoteRule {
    pub fn k_of_four(k: usize) -> Result<VoteRule> {
        if !(1..=4).contains(&k) {
            return Err(Error::InvalidParameter(format!(
                "k-of-4 rule needs k in 1..=4, got {k}"
            )));
        }
        Ok(VoteRule::KOfFour { k })
    }

    pub fn weighted(weights: [f64; 4], threshold: f64) -> Result<VoteRule> {
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|&w| w < 0.0) || sum <= 0.0 {
            return Err(Error::InvalidParameter(
                "weighted vote needs nonnegative weights with positive sum".into(),
            ));
        }
        // store normalized so the threshold lives on a [0,1] scale
        let weights = weights.map(|w| w / sum);
        Ok(VoteRule::Weighted { weights, threshold })
    }

    pub fn label(&self) -> String {
        match self {
            VoteRule::KOfFour { k } => format!("{k} out of 4"),
            VoteRule::Weighted { .. } => "weighted".into(),
        }
    }
}

/// Combine the four per-network decisions, ordered
/// [barrel, magazine, receiver, stock], into the final verdict.
pub fn aggregate(decisions: [bool; 4], rule: &VoteRule) -> bool {
    match rule {
        VoteRule::KOfFour { k } => decisions.iter().filter(|&&d| d).count() >= *k,
        VoteRule::Weighted { weights, threshold } => {
            let score: f64 = decisions
                .iter()
                .zip(weights)
                .filter(|(&d, _)| d)
                .map(|(_, &w)| w)
                .sum();
            score >= *threshold
        }
    }
}

/// Normalized validation accuracies as vote weights, ordered like
/// [`PartKind::ALL`].
pub fn accuracy_weights(validation_accuracies: [f64; 4]) -> Result<[f64; 4]> {
    for (part, &a) in PartKind::ALL.iter().zip(&validation_accuracies) {
        if !(a > 0.0 && a <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "validation accuracy for {part} must be in (0,1], got {a}"
            )));
        }
    }
    let sum: f64 = validation_accuracies.iter().sum();
    Ok(validation_accuracies.map(|a| a / sum))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::dense::DenseLayer;
    use crate::nn::Layer;
    use crate::patch::Rect;

    /// A network whose decision is fixed regardless of input.
    fn constant_network(input_side: usize, positive: bool) -> Network {
        let d = 3 * input_side * input_side;
        let bias = if positive {
            vec![0.0, 1.0]
        } else {
            vec![1.0, 0.0]
        };
        Network {
            layers: vec![
                Layer::Dense(
                    DenseLayer::new(
                        Tensor::zeros(&[2, d]),
                        Tensor::from_vec(&[2], bias).unwrap(),
                    )
                    .unwrap(),
                ),
                Layer::Softmax,
            ],
            conv_blocks: 0,
            dense_layers: 1,
            input_side,
            input_channels: 3,
        }
    }

    fn grid_64() -> PatchGrid {
        patch_grid(64, 64, &WindowSpec::new(0.5, 0.5).unwrap()).unwrap()
    }

    #[test]
    fn rejecting_network_gives_zero_heatmap() {
        let img = Tensor::filled(&[3, 64, 64], 0.5);
        let net = constant_network(32, false);
        let map = heatmap(&img, &net, &grid_64()).unwrap();
        assert!(map.counts().iter().all(|&v| v == 0));
    }

    #[test]
    fn accepting_network_attains_coverage_counts() {
        let img = Tensor::filled(&[3, 64, 64], 0.5);
        let net = constant_network(32, true);
        let grid = grid_64();
        let map = heatmap(&img, &net, &grid).unwrap();
        let cover = coverage_counts(&grid);
        assert_eq!(map, cover);
        assert!(map.counts().iter().any(|&v| v > 1));
    }

    #[test]
    fn single_window_heatmap() {
        let img = Tensor::filled(&[3, 64, 64], 0.5);
        let net = constant_network(32, true);
        let grid = PatchGrid {
            rects: vec![Rect { x: 0, y: 0, side: 32 }],
            width: 64,
            height: 64,
            side: 32,
            stride: 32,
        };
        let map = heatmap(&img, &net, &grid).unwrap();
        assert_eq!(map.at(0, 0), 1);
        assert_eq!(map.at(31, 31), 1);
        assert_eq!(map.at(32, 31), 0);
        assert_eq!(map.at(0, 32), 0);
    }

    #[test]
    fn statistics_on_fixtures() {
        let zero = Heatmap::zeros(10, 10);
        assert_eq!(image_statistic(&zero, StatisticMode::Max), 0.0);
        assert_eq!(image_statistic(&zero, StatisticMode::Mean), 0.0);

        let mut one_hot = Heatmap::zeros(10, 10);
        one_hot.counts[37] = 7;
        assert_eq!(image_statistic(&one_hot, StatisticMode::Max), 7.0);
        assert!((image_statistic(&one_hot, StatisticMode::Mean) - 0.07).abs() < 1e-12);

        let mut constant = Heatmap::zeros(5, 4);
        constant.counts.iter_mut().for_each(|v| *v = 3);
        assert_eq!(image_statistic(&constant, StatisticMode::Max), 3.0);
        assert_eq!(image_statistic(&constant, StatisticMode::Mean), 3.0);
    }

    #[test]
    fn threshold_midpoint_on_balanced_sets() {
        let pos = [30.0, 35.0, 32.0, 33.0];
        let neg = [10.0, 11.0, 9.0, 12.0];
        let t = thresholds_from_statistics(&pos, &neg, StatisticMode::Max).unwrap();
        assert!((t.theta_i - (t.theta_p + t.theta_n) / 2.0).abs() < 1e-9);
        assert!(t.theta_n <= t.theta_i && t.theta_i <= t.theta_p);
    }

    #[test]
    fn identical_sets_collapse_thresholds() {
        let stats = [4.0, 6.0, 5.0];
        let t = thresholds_from_statistics(&stats, &stats, StatisticMode::Max).unwrap();
        assert_eq!(t.theta_p, t.theta_n);
        assert_eq!(t.theta_p, t.theta_i);
    }

    #[test]
    fn empty_set_is_error() {
        assert!(thresholds_from_statistics(&[], &[1.0], StatisticMode::Max).is_err());
        assert!(thresholds_from_statistics(&[1.0], &[], StatisticMode::Max).is_err());
    }

    #[test]
    fn decision_boundary_is_inclusive() {
        assert!(network_decision(21.396, 21.396));
        assert!(network_decision(0.0, 0.0));
        assert!(!network_decision(3.0, 3.903));
    }

    #[test]
    fn zero_mode_requires_strictly_positive() {
        let t = ThresholdSet {
            theta_p: 5.0,
            theta_n: 1.0,
            theta_i: 3.0,
            mode: StatisticMode::Max,
        };
        let zero = Heatmap::zeros(4, 4);
        assert!(!t.decide(&zero, ThetaChoice::Zero));
        let mut one = Heatmap::zeros(4, 4);
        one.counts[0] = 1;
        assert!(t.decide(&one, ThetaChoice::Zero));
    }

    #[test]
    fn uncertainty_band_is_strict_interior() {
        let t = ThresholdSet {
            theta_p: 30.0,
            theta_n: 10.0,
            theta_i: 20.0,
            mode: StatisticMode::Max,
        };
        assert!(!t.uncertain(10.0));
        assert!(t.uncertain(10.1));
        assert!(t.uncertain(29.9));
        assert!(!t.uncertain(30.0));
        assert!(!t.uncertain(35.0));
    }

    #[test]
    fn k_of_four_rules() {
        let d = [true, true, false, false];
        assert!(aggregate(d, &VoteRule::k_of_four(2).unwrap()));
        assert!(!aggregate(d, &VoteRule::k_of_four(3).unwrap()));
        assert!(!aggregate(
            [true, true, true, false],
            &VoteRule::k_of_four(4).unwrap()
        ));
        assert!(aggregate(
            [false, false, false, true],
            &VoteRule::k_of_four(1).unwrap()
        ));
        assert!(VoteRule::k_of_four(0).is_err());
        assert!(VoteRule::k_of_four(5).is_err());
    }

    #[test]
    fn quarter_probability_reading() {
        // one positive network at 25% weight misses a 0.5 bar
        let rule = VoteRule::weighted([0.25; 4], 0.5).unwrap();
        assert!(!aggregate([true, false, false, false], &rule));
        assert!(aggregate([true, true, false, false], &rule));
    }

    #[test]
    fn weighted_needs_valid_weights() {
        assert!(VoteRule::weighted([0.0; 4], 0.5).is_err());
        assert!(VoteRule::weighted([-0.1, 0.5, 0.3, 0.3], 0.5).is_err());
    }

    #[test]
    fn accuracy_weights_normalize() {
        let w = accuracy_weights([0.5, 0.5, 0.5, 0.5]).unwrap();
        assert_eq!(w, [0.25; 4]);

        // published validation accuracies give near-uniform weights
        let w = accuracy_weights([0.952, 0.941, 0.977, 0.948]).unwrap();
        let expect = [0.2493, 0.2464, 0.2559, 0.2483];
        for (got, want) in w.iter().zip(expect) {
            assert!((got - want).abs() < 5e-4, "{got} vs {want}");
        }
        let sum: f64 = w.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn accuracy_weights_limit_case() {
        let eps = 1e-9;
        let w = accuracy_weights([1.0, eps, eps, eps]).unwrap();
        assert!(w[0] > 0.999_999);
        assert!(accuracy_weights([0.0, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn heatmap_png_and_json_exports() {
        let mut map = Heatmap::zeros(3, 2);
        map.counts[0] = 2;
        map.counts[5] = 4;
        let png = map.to_png_bytes().unwrap();
        assert_eq!(&png[1..4], b"PNG");
        assert_eq!(map.to_json(), "[[2,0,0],[0,0,4]]");
    }
}
