//! Pixel-level segmentation scores and the reference combined loss.
//!
//! Conventions:
//! - binarization keeps pixels with probability `>= threshold`;
//! - an image without ground-truth foreground scores recall = Dice = 1 and is
//!   flagged degenerate; dataset aggregates skip degenerate images by default;
//! - precision with no predicted foreground is 1 when the ground truth is
//!   also empty and 0 otherwise;
//! - dataset scores are unweighted means of per-image scores.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Image, Mask};

pub const DEFAULT_THRESHOLD: f64 = 0.5;
/// Probability clipping used inside the cross-entropy term.
pub const BCE_EPSILON: f64 = 1e-7;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// A ratio together with a flag for the 0/0 case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ratio {
    pub value: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentationScores {
    pub recall: f64,
    pub precision: f64,
    pub dice: f64,
    /// Ground truth had no foreground.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    beta: f64,
    smooth: f64,
}

impl LossConfig {
    pub fn new(beta: f64, smooth: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::InvalidArgument(format!("beta {beta} outside [0, 1]")));
        }
        if !(smooth > 0.0) {
            return Err(Error::InvalidArgument(format!("smooth {smooth} must be positive")));
        }
        Ok(LossConfig { beta, smooth })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn smooth(&self) -> f64 {
        self.smooth
    }
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            beta: 0.5,
            smooth: 1.0,
        }
    }
}

pub fn binarize(prob: &Image, threshold: f64) -> Result<Mask> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold {threshold} outside (0, 1)"
        )));
    }
    Mask::new(
        prob.width(),
        prob.height(),
        prob.values().iter().map(|&v| u8::from(v >= threshold)).collect(),
    )
}

fn check_dims(a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.0, a.1, b.0, b.1
        )));
    }
    Ok(())
}

pub fn confusion(pred: &Mask, gt: &Mask) -> Result<ConfusionCounts> {
    check_dims((pred.width(), pred.height()), (gt.width(), gt.height()))?;
    Ok(confusion_slices(pred.values(), gt.values()))
}

pub(crate) fn confusion_slices(pred: &[u8], gt: &[u8]) -> ConfusionCounts {
    let mut c = ConfusionCounts::default();
    for (&p, &g) in pred.iter().zip(gt) {
        match (p != 0, g != 0) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    c
}

pub fn recall(c: &ConfusionCounts) -> Ratio {
    let denom = c.tp + c.fn_;
    if denom == 0 {
        return Ratio {
            value: 1.0,
            degenerate: true,
        };
    }
    Ratio {
        value: c.tp as f64 / denom as f64,
        degenerate: false,
    }
}

pub fn precision(c: &ConfusionCounts) -> Ratio {
    let denom = c.tp + c.fp;
    if denom == 0 {
        return Ratio {
            value: if c.fn_ == 0 { 1.0 } else { 0.0 },
            degenerate: true,
        };
    }
    Ratio {
        value: c.tp as f64 / denom as f64,
        degenerate: false,
    }
}

pub fn dice_from_counts(c: &ConfusionCounts) -> f64 {
    let denom = 2 * c.tp + c.fp + c.fn_;
    if denom == 0 {
        1.0
    } else {
        (2 * c.tp) as f64 / denom as f64
    }
}

pub fn dice(pred: &Mask, gt: &Mask) -> Result<f64> {
    confusion(pred, gt).map(|c| dice_from_counts(&c))
}

pub fn scores_from_counts(c: &ConfusionCounts) -> SegmentationScores {
    let r = recall(c);
    SegmentationScores {
        recall: r.value,
        precision: precision(c).value,
        dice: dice_from_counts(c),
        degenerate: r.degenerate,
    }
}

pub fn image_scores(pred: &Mask, gt: &Mask) -> Result<SegmentationScores> {
    confusion(pred, gt).map(|c| scores_from_counts(&c))
}

/// `β · soft_dice_loss + (1 − β) · mean_bce`.
pub fn combined_loss(prob: &Image, gt: &Mask, cfg: &LossConfig) -> Result<f64> {
    check_dims((prob.width(), prob.height()), (gt.width(), gt.height()))?;
    combined_loss_slices(prob.values(), gt.values(), cfg)
}

/// Slice form of [`combined_loss`]; `prob` values must lie in `[0, 1]` and
/// `gt` values in `{0, 1}`.
pub fn combined_loss_slices(prob: &[f64], gt: &[u8], cfg: &LossConfig) -> Result<f64> {
    if prob.len() != gt.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} probabilities vs {} labels",
            prob.len(),
            gt.len()
        )));
    }
    if prob.is_empty() {
        return Err(Error::InvalidArgument("empty input".into()));
    }
    if prob.iter().any(|p| !(0.0..=1.0).contains(p)) || gt.iter().any(|&g| g > 1) {
        return Err(Error::InvalidArgument("probabilities must lie in [0, 1] and labels in {0, 1}".into()));
    }
    let (mut inter, mut sum_p, mut sum_g, mut bce) = (0.0, 0.0, 0.0, 0.0);
    for (&p, &g) in prob.iter().zip(gt) {
        let g = f64::from(g);
        inter += p * g;
        sum_p += p;
        sum_g += g;
        let pc = p.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
        bce -= g * pc.ln() + (1.0 - g) * (1.0 - pc).ln();
    }
    let soft_dice = 1.0 - (2.0 * inter + cfg.smooth) / (sum_p + sum_g + cfg.smooth);
    let bce = bce / prob.len() as f64;
    Ok(cfg.beta * soft_dice + (1.0 - cfg.beta) * bce)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Degenerate {
    Exclude,
    Include,
}

/// Unweighted mean of per-image scores.
pub fn dataset_scores(pairs: &[(Mask, Mask)], degenerate: Degenerate) -> Result<SegmentationScores> {
    let per_image = pairs
        .iter()
        .map(|(p, g)| image_scores(p, g))
        .collect::<Result<Vec<_>>>()?;
    aggregate(&per_image, degenerate)
}

pub fn aggregate(per_image: &[SegmentationScores], degenerate: Degenerate) -> Result<SegmentationScores> {
    let kept: Vec<&SegmentationScores> = per_image
        .iter()
        .filter(|s| degenerate == Degenerate::Include || !s.degenerate)
        .collect();
    if kept.is_empty() {
        return Err(Error::InvalidArgument(
            "no scorable images (empty list or only empty ground truth)".into(),
        ));
    }
    let n = kept.len() as f64;
    Ok(SegmentationScores {
        recall: kept.iter().map(|s| s.recall).sum::<f64>() / n,
        precision: kept.iter().map(|s| s.precision).sum::<f64>() / n,
        dice: kept.iter().map(|s| s.dice).sum::<f64>() / n,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(w: usize, h: usize, on: &[(usize, usize)]) -> Mask {
        let mut v = vec![0u8; w * h];
        for &(r, c) in on {
            v[r * w + c] = 1;
        }
        Mask::new(w, h, v).unwrap()
    }

    #[test]
    fn binarize_tie_goes_up() {
        let p = Image::new(3, 1, vec![0.49, 0.5, 0.51]).unwrap();
        assert_eq!(binarize(&p, 0.5).unwrap().values(), &[0, 1, 1]);
        assert!(binarize(&Image::filled(2, 2, 0.0).unwrap(), 0.5).unwrap().is_empty());
        assert!(binarize(&p, 1.5).is_err());
        assert!(binarize(&p, 0.0).is_err());
    }

    #[test]
    fn confusion_cases() {
        let gt = mask(4, 4, &[(0, 0), (1, 1), (2, 2), (3, 3), (0, 3)]);
        assert_eq!(
            confusion(&gt, &gt).unwrap(),
            ConfusionCounts { tp: 5, fp: 0, fn_: 0, tn: 11 }
        );
        let gt4 = mask(4, 4, &[(0, 0), (1, 1), (2, 2), (3, 3)]);
        let c = confusion(&Mask::empty(4, 4), &gt4).unwrap();
        assert_eq!((c.tp, c.fp, c.fn_), (0, 0, 4));

        let pred = mask(2, 2, &[(0, 0), (0, 1)]);
        let gt = mask(2, 2, &[(0, 1), (1, 1)]);
        let c = confusion(&pred, &gt).unwrap();
        assert_eq!(c, ConfusionCounts { tp: 1, fp: 1, fn_: 1, tn: 1 });
        assert_eq!(dice(&pred, &gt).unwrap(), 0.5);

        assert!(confusion(&Mask::empty(2, 2), &Mask::empty(4, 1)).is_err());
    }

    #[test]
    fn recall_cases() {
        let c = |tp, fn_| ConfusionCounts { tp, fp: 0, fn_, tn: 0 };
        assert_eq!(recall(&c(3, 1)).value, 0.75);
        assert_eq!(recall(&c(0, 0)), Ratio { value: 1.0, degenerate: true });
        assert_eq!(recall(&c(0, 7)).value, 0.0);
    }

    #[test]
    fn dice_cases() {
        let a = mask(3, 3, &[(0, 0), (1, 1)]);
        let b = mask(3, 3, &[(2, 2)]);
        assert_eq!(dice(&a, &a).unwrap(), 1.0);
        assert_eq!(dice(&a, &b).unwrap(), 0.0);
        assert_eq!(dice(&Mask::empty(3, 3), &Mask::empty(3, 3)).unwrap(), 1.0);
    }

    #[test]
    fn loss_documented_case() {
        // soft Dice = 2*1/(2+2) -> loss 0.5; BCE at p = 0.5 is ln 2.
        let prob = Image::filled(2, 2, 0.5).unwrap();
        let gt = Mask::new(2, 2, vec![1, 1, 0, 0]).unwrap();
        let cfg = LossConfig::new(0.5, 1e-12).unwrap();
        let got = combined_loss(&prob, &gt, &cfg).unwrap();
        let want = 0.5 * 0.5 + 0.5 * std::f64::consts::LN_2;
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }

    #[test]
    fn loss_endpoints_and_perfect_prediction() {
        let gt = Mask::new(2, 2, vec![1, 0, 1, 1]).unwrap();
        let perfect = gt.to_image();
        let l = combined_loss(&perfect, &gt, &LossConfig::default()).unwrap();
        assert!((0.0..=1e-5).contains(&l), "{l}");

        let prob = Image::new(2, 2, vec![0.9, 0.2, 0.6, 0.3]).unwrap();
        let bce_only = combined_loss(&prob, &gt, &LossConfig::new(0.0, 1.0).unwrap()).unwrap();
        let dice_only = combined_loss(&prob, &gt, &LossConfig::new(1.0, 1.0).unwrap()).unwrap();
        let half = combined_loss(&prob, &gt, &LossConfig::new(0.5, 1.0).unwrap()).unwrap();
        assert!((half - 0.5 * (bce_only + dice_only)).abs() < 1e-15);
        let manual_bce = -[(0.9f64, 1.0), (0.2, 0.0), (0.6, 1.0), (0.3, 1.0)]
            .iter()
            .map(|&(p, g): &(f64, f64)| g * p.ln() + (1.0 - g) * (1.0 - p).ln())
            .sum::<f64>()
            / 4.0;
        assert!((bce_only - manual_bce).abs() < 1e-12);
        let manual_dice = 1.0 - (2.0 * (0.9 + 0.6 + 0.3) + 1.0) / (2.0 + 3.0 + 1.0);
        assert!((dice_only - manual_dice).abs() < 1e-12);
    }

    #[test]
    fn loss_config_validation() {
        assert!(LossConfig::new(1.2, 1.0).is_err());
        assert!(LossConfig::new(0.5, 0.0).is_err());
        let prob = Image::filled(2, 2, 0.5).unwrap();
        assert!(combined_loss(&prob, &Mask::empty(1, 4), &LossConfig::default()).is_err());
    }

    #[test]
    fn dataset_means() {
        let gt = mask(2, 2, &[(0, 0), (0, 1)]);
        let half = mask(2, 2, &[(0, 0)]);
        let s = dataset_scores(&[(gt.clone(), gt.clone()), (half, gt.clone())], Degenerate::Exclude).unwrap();
        assert_eq!(s.recall, 0.75);
        let all = dataset_scores(&[(gt.clone(), gt.clone())], Degenerate::Exclude).unwrap();
        assert_eq!((all.recall, all.precision, all.dice), (1.0, 1.0, 1.0));
        assert!(dataset_scores(&[], Degenerate::Exclude).is_err());

        let empty = Mask::empty(2, 2);
        let only_degenerate = [(empty.clone(), empty.clone())];
        assert!(dataset_scores(&only_degenerate, Degenerate::Exclude).is_err());
        assert_eq!(dataset_scores(&only_degenerate, Degenerate::Include).unwrap().recall, 1.0);
    }
}
