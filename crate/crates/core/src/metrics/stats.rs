//! Inter-rater agreement and two-sample tests for the human-rating analysis.

use serde::Serialize;

use crate::error::{Error, Result};

/// Raters × items table of ordinal ratings in `1..=levels`; `None` is missing.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingMatrix {
    levels: u32,
    rows: Vec<Vec<Option<u32>>>,
}

impl RatingMatrix {
    pub fn new(rows: Vec<Vec<Option<u32>>>, levels: u32) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::invalid("a rating matrix needs at least two raters"));
        }
        let items = rows[0].len();
        if items == 0 {
            return Err(Error::invalid("a rating matrix needs at least one item"));
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != items {
                return Err(Error::invalid(format!("rater {r} has {} ratings, expected {items}", row.len())));
            }
            if let Some(v) = row.iter().flatten().find(|v| !(1..=levels).contains(*v)) {
                return Err(Error::invalid(format!("rater {r} gave {v}, outside 1..={levels}")));
            }
        }
        Ok(RatingMatrix { levels, rows })
    }

    /// Rows are raters, columns are items, blank cells are missing.
    pub fn from_csv(text: &str, levels: u32) -> Result<Self> {
        let rows = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(r, line)| {
                line.split(',')
                    .map(|cell| {
                        let cell = cell.trim();
                        if cell.is_empty() {
                            Ok(None)
                        } else {
                            cell.parse::<u32>().map(Some).map_err(|_| Error::Format {
                                what: "rating CSV",
                                detail: format!("row {r}: '{cell}' is not a rating"),
                            })
                        }
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        RatingMatrix::new(rows, levels)
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    pub fn raters(&self) -> usize {
        self.rows.len()
    }

    pub fn items(&self) -> usize {
        self.rows[0].len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Nominal,
    Ordinal,
    Interval,
}

/// Krippendorff's α from the coincidence matrix of pairable values.
pub fn krippendorff_alpha(ratings: &RatingMatrix, level: Level) -> Result<f64> {
    let q = ratings.levels as usize;
    let mut o = vec![vec![0.0f64; q]; q];
    for item in 0..ratings.items() {
        let vals: Vec<usize> = ratings.rows.iter().filter_map(|row| row[item]).map(|v| v as usize - 1).collect();
        let m = vals.len();
        if m < 2 {
            continue;
        }
        let w = 1.0 / (m - 1) as f64;
        for (i, &a) in vals.iter().enumerate() {
            for (j, &b) in vals.iter().enumerate() {
                if i != j {
                    o[a][b] += w;
                }
            }
        }
    }
    let marg: Vec<f64> = o.iter().map(|r| r.iter().sum()).collect();
    let n: f64 = marg.iter().sum();
    if n < 2.0 {
        return Err(Error::UndefinedStatistic("fewer than two pairable ratings".into()));
    }
    let delta = |c: usize, k: usize| -> f64 {
        match level {
            Level::Nominal => f64::from(u8::from(c != k)),
            Level::Interval => {
                let d = c as f64 - k as f64;
                d * d
            }
            Level::Ordinal => {
                let (lo, hi) = (c.min(k), c.max(k));
                let span: f64 = marg[lo..=hi].iter().sum();
                let d = span - (marg[c] + marg[k]) / 2.0;
                d * d
            }
        }
    };
    let mut observed = 0.0;
    let mut expected = 0.0;
    for c in 0..q {
        for k in 0..q {
            let d = delta(c, k);
            observed += o[c][k] * d;
            expected += marg[c] * marg[k] * d;
        }
    }
    if expected == 0.0 {
        // Only one value was ever used: no disagreement is possible or observed.
        return Ok(1.0);
    }
    Ok(1.0 - (n - 1.0) * observed / expected)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WelchResult {
    pub t: f64,
    pub dof: f64,
    /// Two-sided.
    pub p: f64,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let ss: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, ss / (n - 1.0))
}

/// Welch's unequal-variance t-test with Welch–Satterthwaite degrees of freedom.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<WelchResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::invalid("Welch's t-test needs at least two samples per group"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::invalid("samples must be finite"));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (va / na, vb / nb);
    let se2 = sa + sb;
    let diff = ma - mb;
    if se2 == 0.0 {
        // Both groups constant.
        return Ok(if diff == 0.0 {
            WelchResult { t: 0.0, dof: na + nb - 2.0, p: 1.0 }
        } else {
            WelchResult { t: diff.signum() * f64::INFINITY, dof: na + nb - 2.0, p: 0.0 }
        });
    }
    let t = diff / se2.sqrt();
    let dof = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    Ok(WelchResult { t, dof, p: student_t_two_sided(t, dof) })
}

/// P(|T| ≥ |t|) for Student's t with `dof` degrees of freedom.
pub fn student_t_two_sided(t: f64, dof: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    regularized_incomplete_beta(dof / 2.0, 0.5, dof / (dof + t * t))
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
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

pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// I_x(a, b) by Lentz's continued fraction, using the symmetry relation where
/// the fraction converges slowly.
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
        front * beta_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_fraction(b, a, 1.0 - x) / b
    }
}

fn beta_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let clamp = |v: f64| if v.abs() < TINY { TINY } else { v };
    let mut c = 1.0;
    let mut d = 1.0 / clamp(1.0 - qab * x / qap);
    let mut h = d;
    for m in 1..10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 / clamp(1.0 + aa * d);
        c = clamp(1.0 + aa / c);
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 / clamp(1.0 + aa * d);
        c = clamp(1.0 + aa / c);
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[u32]]) -> RatingMatrix {
        RatingMatrix::new(
            rows.iter().map(|r| r.iter().map(|&v| if v == 0 { None } else { Some(v) }).collect()).collect(),
            5,
        )
        .unwrap()
    }

    #[test]
    fn perfect_agreement_is_one() {
        let r = m(&[&[1, 2, 3, 4, 5], &[1, 2, 3, 4, 5], &[1, 2, 3, 4, 5]]);
        for level in [Level::Nominal, Level::Ordinal, Level::Interval] {
            assert_eq!(krippendorff_alpha(&r, level).unwrap(), 1.0);
        }
    }

    #[test]
    fn single_pair_closed_forms() {
        // One equal pair: no variation at all.
        assert_eq!(krippendorff_alpha(&m(&[&[3], &[3]]), Level::Ordinal).unwrap(), 1.0);
        // One extreme disagreement: D_o = D_e = δ², so α = 0 exactly.
        assert_eq!(krippendorff_alpha(&m(&[&[1], &[5]]), Level::Ordinal).unwrap(), 0.0);
        // Two identical disagreeing units: n = 4, δ² = (4 − 2)² = 4,
        // D_o = 2·2·4/4 = 4, D_e = 2·2·2·4/12 = 8/3, α = 1 − 3/2.
        let a = krippendorff_alpha(&m(&[&[1, 1], &[5, 5]]), Level::Ordinal).unwrap();
        assert!((a + 0.5).abs() < 1e-15);
    }

    #[test]
    fn undefined_without_pairs() {
        let r = m(&[&[1, 0], &[0, 2]]);
        assert!(matches!(krippendorff_alpha(&r, Level::Ordinal), Err(Error::UndefinedStatistic(_))));
    }

    #[test]
    fn matrix_validation() {
        assert!(RatingMatrix::new(vec![vec![Some(1)]], 5).is_err());
        assert!(RatingMatrix::new(vec![vec![Some(1)], vec![Some(6)]], 5).is_err());
        assert!(RatingMatrix::new(vec![vec![Some(1)], vec![]], 5).is_err());
        let r = RatingMatrix::from_csv("1,,3\n2,2,\n", 5).unwrap();
        assert_eq!((r.raters(), r.items()), (2, 3));
        assert!(RatingMatrix::from_csv("1,x\n1,2\n", 5).is_err());
    }

    #[test]
    fn welch_basic_properties() {
        let a = [1.0, 2.0, 3.0, 4.5];
        let r = welch_t(&a, &a).unwrap();
        assert_eq!((r.t, r.p), (0.0, 1.0));
        let b = [2.0, 2.5, 7.0];
        assert_eq!(welch_t(&a, &b).unwrap().t, -welch_t(&b, &a).unwrap().t);
        assert!(welch_t(&[1.0], &b).is_err());
        let c = welch_t(&[1.0, 1.0], &[2.0, 2.0]).unwrap();
        assert_eq!(c.p, 0.0);
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!((ln_gamma(1.0)).abs() < 1e-14);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
        assert!((ln_gamma(10.0) - 362_880f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn incomplete_beta_closed_forms() {
        // I_x(1, 1) = x and I_x(a, 1) = x^a.
        for &x in &[0.1, 0.5, 0.93] {
            assert!((regularized_incomplete_beta(1.0, 1.0, x) - x).abs() < 1e-14);
            assert!((regularized_incomplete_beta(3.0, 1.0, x) - x.powi(3)).abs() < 1e-14);
        }
        // Student t with one dof is Cauchy: P(|T| ≥ 1) = 1/2.
        assert!((student_t_two_sided(1.0, 1.0) - 0.5).abs() < 1e-14);
    }
}
