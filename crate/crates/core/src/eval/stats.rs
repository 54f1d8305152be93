use statrs::distribution::{ContinuousCDF, StudentsT};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standard error of the mean with the `n - 1` variance; NaN below two
/// values.
pub fn stderr(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

/// One-sided paired t-test of `mean(a - b) > 0`; returns the p-value.
pub fn paired_t_test_greater(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "paired samples differ in length");
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if d.len() < 2 {
        return f64::NAN;
    }
    let m = mean(&d);
    let se = stderr(&d);
    if se == 0.0 {
        return if m > 0.0 {
            0.0
        } else if m < 0.0 {
            1.0
        } else {
            0.5
        };
    }
    let t = m / se;
    let dist = StudentsT::new(0.0, 1.0, (d.len() - 1) as f64).expect("valid degrees of freedom");
    1.0 - dist.cdf(t)
}
