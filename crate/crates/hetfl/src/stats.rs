//! Summary statistics over seeds.

use statrs::distribution::{ContinuousCDF, Normal};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (`n - 1` denominator); 0 for a single value.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// One-sided Wilcoxon signed-rank test of `x` tending to be smaller than `y`
/// on paired samples. Zero differences are dropped. Exact null distribution
/// when there are no ties and at most 50 pairs, otherwise the normal
/// approximation with tie and continuity corrections.
///
/// Returns `(W+, p)`; `p` is 1 when every pair is tied.
pub fn wilcoxon_less(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len(), "paired samples");
    let mut d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return (0.0, 1.0);
    }
    d.sort_by(|a, b| a.abs().total_cmp(&b.abs()));

    // average ranks over runs of equal |d|
    let mut ranks = vec![0.0; n];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && d[j + 1].abs() == d[i].abs() {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        ranks[i..=j].fill(r);
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();

    if tie_term == 0.0 && n <= 50 {
        return (w_plus, exact_lower_tail(n, w_plus as usize));
    }
    let nf = n as f64;
    let mu = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let z = (w_plus - mu + 0.5) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    (w_plus, normal.cdf(z))
}

/// `P(W+ <= w)` under the null for `n` untied pairs: count subsets of
/// `{1..n}` by sum.
fn exact_lower_tail(n: usize, w: usize) -> f64 {
    let max = n * (n + 1) / 2;
    let mut ways = vec![0.0f64; max + 1];
    ways[0] = 1.0;
    for r in 1..=n {
        for s in (r..=max).rev() {
            ways[s] += ways[s - r];
        }
    }
    let total = 2f64.powi(n as i32);
    ways[..=w.min(max)].iter().sum::<f64>() / total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_std() {
        assert_eq!(mean(&[1.0, 2.0, 3.0]), 2.0);
        assert!((std_dev(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]) - 2.138089935299395).abs() < 1e-12);
        assert_eq!(std_dev(&[3.0]), 0.0);
        assert!(mean(&[]).is_nan());
    }

    // reference p-values from an independent statistics package
    #[test]
    fn exact_small_sample() {
        let x = [1.83, 0.50, 1.62, 2.48, 1.68, 1.88, 1.55, 3.06, 1.30];
        let y = [0.878, 0.647, 0.598, 2.05, 1.06, 1.29, 1.06, 3.14, 1.29];
        let (w, p) = wilcoxon_less(&y, &x);
        assert_eq!(w, 5.0);
        assert!((p - 0.01953125).abs() < 1e-12);
    }

    #[test]
    fn exact_thirty_pairs() {
        let a = [
            2.040919, -2.555665, 0.418099, -0.56777, -0.452649, -0.215597, -2.019986, -0.231932, -0.865213,
            3.323, 0.225787, -0.352631, -0.281287, -0.668046, -1.055151, -0.390801, 0.481945, -0.238554,
            0.957759, -0.199802, 0.02426, 1.545821, 0.545106, -0.505229, -0.182839, 0.540525, 1.935088,
            -0.26962, -0.243559, 1.002314,
        ];
        let b = [
            1.554459, -2.447385, 1.700638, 0.41258, 0.038867, 0.854507, -4.448148, 1.189374, -1.424858,
            2.05438, 0.902232, 0.747914, -0.326055, -1.344452, -0.629026, -0.043548, 2.287544, 0.908854,
            1.551574, 1.311831, 0.218737, 1.019921, 1.529164, 0.47731, 0.002332, 0.157717, 2.564242,
            -2.363515, 0.846566, 1.893682,
        ];
        let (w, p) = wilcoxon_less(&a, &b);
        assert_eq!(w, 133.0);
        assert!((p - 0.020244861021637917).abs() < 1e-12);
    }

    #[test]
    fn ties_and_zeros_use_the_normal_approximation() {
        let c: Vec<f64> = (1..=12).map(f64::from).collect();
        let d = [2.0, 3.0, 5.0, 5.0, 7.0, 6.0, 9.0, 9.0, 9.0, 13.0, 12.0, 15.0];
        let (w, p) = wilcoxon_less(&c, &d);
        assert_eq!(w, 0.0);
        assert!((p - 0.0025718821125574926).abs() < 1e-9);
    }

    #[test]
    fn all_tied_is_uninformative() {
        assert_eq!(wilcoxon_less(&[1.0, 2.0], &[1.0, 2.0]), (0.0, 1.0));
    }

    #[test]
    fn exact_tail_endpoints() {
        assert!((exact_lower_tail(5, 0) - 1.0 / 32.0).abs() < 1e-15);
        assert!((exact_lower_tail(5, 15) - 1.0).abs() < 1e-15);
    }
}
