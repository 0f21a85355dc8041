//! Post-harvest statistics: paired t-test and treatment group ratios.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Treatment {
    #[serde(rename = "SSWC")]
    Sswc,
    #[serde(rename = "no-SSWC")]
    NoSswc,
}

impl fmt::Display for Treatment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Treatment::Sswc => "SSWC",
            Treatment::NoSswc => "no-SSWC",
        })
    }
}

impl FromStr for Treatment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['_', ' '], "-");
        match norm.as_str() {
            "sswc" => Ok(Treatment::Sswc),
            "no-sswc" | "nosswc" => Ok(Treatment::NoSswc),
            _ => Err(Error::InvalidInput(format!("unknown treatment label {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotObservation {
    pub plot_id: String,
    pub treatment: Treatment,
    pub weed_area_m2: f64,
}

impl PlotObservation {
    pub fn new(plot_id: impl Into<String>, treatment: Treatment, weed_area_m2: f64) -> Result<Self> {
        if !(weed_area_m2 >= 0.0 && weed_area_m2.is_finite()) {
            return Err(Error::InvalidInput(format!("weed area must be non-negative, got {weed_area_m2}")));
        }
        Ok(PlotObservation {
            plot_id: plot_id.into(),
            treatment,
            weed_area_m2,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TTestResult {
    pub t: f64,
    pub df: usize,
    pub p: f64,
    pub alpha: f64,
    pub significant: bool,
    pub mean_diff: f64,
    pub sd_diff: f64,
    /// Differences had zero spread but a nonzero mean; `p` is set to 0 by convention.
    pub degenerate: bool,
}

impl TTestResult {
    pub fn to_report(&self) -> String {
        format!(
            "test=paired_t\nn={}\nmean_diff={}\nsd_diff={}\nt={}\ndf={}\np={}\nalpha={}\nsignificant={}\ndegenerate={}\n",
            self.df + 1,
            self.mean_diff,
            self.sd_diff,
            self.t,
            self.df,
            self.p,
            self.alpha,
            self.significant,
            self.degenerate
        )
    }
}

/// Two-sided paired t-test on the differences `a - b`.
pub fn paired_t_test(pairs: &[(f64, f64)], alpha: f64) -> Result<TTestResult> {
    if pairs.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "paired t-test needs at least 2 pairs, got {}",
            pairs.len()
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if pairs.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
        return Err(Error::InvalidInput("paired observations must be finite".into()));
    }
    let n = pairs.len();
    let d: Vec<f64> = pairs.iter().map(|(a, b)| a - b).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let ss: f64 = d.iter().map(|x| (x - mean) * (x - mean)).sum();
    let sd = (ss / (n - 1) as f64).sqrt();
    let df = n - 1;

    // rounding noise in the mean can leave a tiny spread on constant differences
    let scale = d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let constant = sd <= 1e-13 * scale || sd == 0.0;
    let (t, p, degenerate) = if constant {
        if d.iter().all(|&x| x == 0.0) || mean.abs() <= 1e-13 * scale {
            (0.0, 1.0, false)
        } else {
            (mean.signum() * f64::INFINITY, 0.0, true)
        }
    } else {
        let t = mean / (sd / (n as f64).sqrt());
        (t, student_t_two_sided_p(t, df as f64), false)
    };
    Ok(TTestResult {
        t,
        df,
        p,
        alpha,
        significant: p < alpha,
        mean_diff: mean,
        sd_diff: sd,
        degenerate,
    })
}

/// Two-sided tail probability `P(|T| >= |t|)` for Student's t with `df` degrees of freedom.
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    regularized_incomplete_beta(0.5 * df, 0.5, x).clamp(0.0, 1.0)
}

/// `I_x(a, b)` by Lentz's continued fraction, using the symmetry relation
/// where the fraction converges slowly.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=500 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Lanczos approximation (g = 7, 9 terms).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Pairs the i-th SSWC plot with the i-th no-SSWC plot, in order of appearance.
pub fn pair_observations(obs: &[PlotObservation]) -> Result<Vec<(f64, f64)>> {
    let (a, b) = split_groups(obs);
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!(
            "unbalanced groups: {} SSWC plots vs {} no-SSWC plots",
            a.len(),
            b.len()
        )));
    }
    Ok(a.into_iter().zip(b).collect())
}

fn split_groups(obs: &[PlotObservation]) -> (Vec<f64>, Vec<f64>) {
    let pick = |t: Treatment| obs.iter().filter(|o| o.treatment == t).map(|o| o.weed_area_m2).collect();
    (pick(Treatment::Sswc), pick(Treatment::NoSswc))
}

/// Mean weed area of the SSWC group over the no-SSWC group; `None` when the
/// no-SSWC mean is zero.
pub fn group_ratio(obs: &[PlotObservation]) -> Result<Option<f64>> {
    let (a, b) = split_groups(obs);
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientData(format!(
            "group ratio needs both groups, got {} SSWC and {} no-SSWC plots",
            a.len(),
            b.len()
        )));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let den = mean(&b);
    Ok((den != 0.0).then(|| mean(&a) / den))
}

#[derive(Debug, Deserialize)]
struct ObsRecord {
    plot_id: String,
    treatment: String,
    weed_area_m2: f64,
}

pub fn read_observations(path: &Path) -> Result<Vec<PlotObservation>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| crate::rowdetect::csv_err(path, e))?;
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize::<ObsRecord>().enumerate() {
        let ctx = || format!("{} (record {})", path.display(), i + 1);
        let rec = rec.map_err(|e| Error::parse(ctx(), e))?;
        let treatment = rec.treatment.parse().map_err(|e: Error| Error::parse(ctx(), e))?;
        out.push(PlotObservation::new(rec.plot_id, treatment, rec.weed_area_m2).map_err(|e| Error::parse(ctx(), e))?);
    }
    Ok(out)
}

pub fn write_observations(obs: &[PlotObservation], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| crate::rowdetect::csv_err(path, e))?;
    w.write_record(["plot_id", "treatment", "weed_area_m2"])
        .map_err(|e| crate::rowdetect::csv_err(path, e))?;
    for o in obs {
        w.write_record([o.plot_id.clone(), o.treatment.to_string(), o.weed_area_m2.to_string()])
            .map_err(|e| crate::rowdetect::csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Key-value report over a set of plot observations.
pub fn observation_report(obs: &[PlotObservation], alpha: f64) -> Result<String> {
    let mut out = String::new();
    let (a, b) = split_groups(obs);
    out.push_str(&format!("n_sswc={}\nn_no_sswc={}\n", a.len(), b.len()));
    let ratio = group_ratio(obs)?;
    out.push_str(&format!(
        "group_ratio={}\n",
        ratio.map_or_else(|| "undefined".to_string(), |r| r.to_string())
    ));
    let test = paired_t_test(&pair_observations(obs)?, alpha)?;
    out.push_str(&test.to_report());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use statrs::distribution::{ContinuousCDF, StudentsT};
    use statrs::function::beta::beta_reg;

    fn pairs_from_diffs(d: &[f64]) -> Vec<(f64, f64)> {
        d.iter().map(|&x| (x, 0.0)).collect()
    }

    #[test]
    fn five_point_fixture() {
        let r = paired_t_test(&pairs_from_diffs(&[1.0, 2.0, 3.0, 4.0, 5.0]), DEFAULT_ALPHA).unwrap();
        assert_abs_diff_eq!(r.mean_diff, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.sd_diff, 1.581_138_830_084_19, epsilon = 1e-12);
        assert_abs_diff_eq!(r.t, 4.242_640_687_119_285, epsilon = 1e-12);
        assert_eq!(r.df, 4);
        let oracle = 2.0 * (1.0 - StudentsT::new(0.0, 1.0, 4.0).unwrap().cdf(r.t));
        assert_abs_diff_eq!(r.p, oracle, epsilon = 1e-10);
        assert_abs_diff_eq!(r.p, 0.01324, epsilon = 1e-5);
        assert!(r.significant);
    }

    #[test]
    fn equal_pairs_and_degenerate_differences() {
        let r = paired_t_test(&[(1.0, 1.0), (2.5, 2.5), (7.0, 7.0)], DEFAULT_ALPHA).unwrap();
        assert_eq!((r.t, r.p, r.significant, r.degenerate), (0.0, 1.0, false, false));
        let r = paired_t_test(&[(3.0, 1.0), (4.0, 2.0), (9.0, 7.0)], DEFAULT_ALPHA).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.p, 0.0);
        assert!(r.t.is_infinite() && r.t > 0.0);
    }

    #[test]
    fn too_few_pairs() {
        assert!(matches!(paired_t_test(&[(1.0, 2.0)], 0.05), Err(Error::InsufficientData(_))));
        assert!(matches!(paired_t_test(&[], 0.05), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn incomplete_beta_against_oracle() {
        for &(a, b) in &[(0.5, 0.5), (2.0, 0.5), (10.0, 0.5), (3.5, 7.25), (50.0, 0.5), (0.75, 20.0)] {
            for i in 1..100 {
                let x = i as f64 / 100.0;
                assert_abs_diff_eq!(regularized_incomplete_beta(a, b, x), beta_reg(a, b, x), epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn ln_gamma_known_values() {
        assert_abs_diff_eq!(ln_gamma(1.0), 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(ln_gamma(0.5), std::f64::consts::PI.sqrt().ln(), epsilon = 1e-13);
        assert_abs_diff_eq!(ln_gamma(10.0), 362_880f64.ln(), epsilon = 1e-11);
    }

    fn obs(specs: &[(Treatment, f64)]) -> Vec<PlotObservation> {
        specs
            .iter()
            .enumerate()
            .map(|(i, &(t, a))| PlotObservation::new(format!("p{i}"), t, a).unwrap())
            .collect()
    }

    #[test]
    fn group_ratio_examples() {
        use Treatment::*;
        let r = group_ratio(&obs(&[(Sswc, 3.0), (Sswc, 3.8), (NoSswc, 1.0), (NoSswc, 1.0)])).unwrap();
        assert_abs_diff_eq!(r.unwrap(), 3.4, epsilon = 1e-12);
        assert_eq!(group_ratio(&obs(&[(Sswc, 2.0), (NoSswc, 2.0)])).unwrap(), Some(1.0));
        let r = group_ratio(&obs(&[(Sswc, 16.0), (NoSswc, 4.0), (Sswc, 18.0), (NoSswc, 6.0)])).unwrap();
        assert_abs_diff_eq!(r.unwrap(), 3.4, epsilon = 1e-12);
        assert_eq!(group_ratio(&obs(&[(Sswc, 2.0), (NoSswc, 0.0)])).unwrap(), None);
        assert!(group_ratio(&obs(&[(Sswc, 2.0)])).is_err());
    }

    #[test]
    fn labels_and_validation() {
        assert_eq!("SSWC".parse::<Treatment>().unwrap(), Treatment::Sswc);
        assert_eq!("no-SSWC".parse::<Treatment>().unwrap(), Treatment::NoSswc);
        assert_eq!("No SSWC".parse::<Treatment>().unwrap(), Treatment::NoSswc);
        assert!("control".parse::<Treatment>().is_err());
        assert!(PlotObservation::new("a", Treatment::Sswc, -1.0).is_err());
    }

    #[test]
    fn observation_csv_round_trip() {
        use Treatment::*;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("obs.csv");
        let data = obs(&[(Sswc, 16.5), (NoSswc, 4.25), (Sswc, 18.0), (NoSswc, 6.0), (Sswc, 12.0), (NoSswc, 3.0)]);
        write_observations(&data, &path).unwrap();
        assert_eq!(read_observations(&path).unwrap(), data);
        let report = observation_report(&data, 0.05).unwrap();
        assert!(report.contains("n_sswc=3"));
        assert!(report.contains("test=paired_t"));

        std::fs::write(&path, "plot_id,treatment,weed_area_m2\na,SSWC,-2\n").unwrap();
        assert!(matches!(read_observations(&path), Err(Error::Parse { .. })));
    }

    fn sample() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((0.0f64..100.0, 0.0f64..100.0), 2..20)
    }

    proptest! {
        #[test]
        fn antisymmetry(pairs in sample()) {
            let fwd = paired_t_test(&pairs, 0.05).unwrap();
            let swapped: Vec<_> = pairs.iter().map(|&(a, b)| (b, a)).collect();
            let rev = paired_t_test(&swapped, 0.05).unwrap();
            prop_assert!((fwd.t + rev.t).abs() <= 1e-9 * (1.0 + fwd.t.abs()));
            prop_assert!((fwd.p - rev.p).abs() <= 1e-12);
        }

        #[test]
        fn shift_invariance(pairs in sample(), c in -1000.0f64..1000.0) {
            let base = paired_t_test(&pairs, 0.05).unwrap();
            let shifted: Vec<_> = pairs.iter().map(|&(a, b)| (a + c, b + c)).collect();
            let moved = paired_t_test(&shifted, 0.05).unwrap();
            prop_assert!((base.t - moved.t).abs() <= 1e-7 * (1.0 + base.t.abs()));
            prop_assert!((base.p - moved.p).abs() <= 1e-8);
        }

        #[test]
        fn scale_invariance(pairs in sample(), k in 0.01f64..100.0) {
            let base = paired_t_test(&pairs, 0.05).unwrap();
            let scaled: Vec<_> = pairs.iter().map(|&(a, b)| (a * k, b * k)).collect();
            let moved = paired_t_test(&scaled, 0.05).unwrap();
            prop_assert!((base.t - moved.t).abs() <= 1e-9 * (1.0 + base.t.abs()));
            prop_assert!((base.p - moved.p).abs() <= 1e-9);
        }

        #[test]
        fn p_in_unit_interval_and_matches_oracle(pairs in sample()) {
            let r = paired_t_test(&pairs, 0.05).unwrap();
            prop_assert!((0.0..=1.0).contains(&r.p));
            if !r.degenerate && r.t != 0.0 {
                let dist = StudentsT::new(0.0, 1.0, r.df as f64).unwrap();
                let oracle = 2.0 * dist.cdf(-r.t.abs());
                prop_assert!((r.p - oracle).abs() <= 1e-8);
            }
        }
    }
}
