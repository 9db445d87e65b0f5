//! Goodness-of-fit and summary statistics used by the validation suites.

use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Normal, Poisson};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; zero for fewer than two samples.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn standard_error(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Mean and symmetric normal-approximation interval at `level`.
pub fn normal_ci(xs: &[f64], level: f64) -> (f64, f64, f64) {
    let m = mean(xs);
    let z = Normal::standard().inverse_cdf(0.5 + level / 2.0);
    let half = z * standard_error(xs);
    (m, m - half, m + half)
}

/// Asymptotic Kolmogorov survival function `P(K > x)`.
fn kolmogorov_sf(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov-Smirnov p-value against a continuous CDF.
pub fn ks_one_sample_p(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    let sn = n.sqrt();
    kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)
}

/// Two-sample Kolmogorov-Smirnov p-value.
pub fn ks_two_sample_p(a: &[f64], b: &[f64]) -> f64 {
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < xs.len() && j < ys.len() {
        let v = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= v {
            i += 1;
        }
        while j < ys.len() && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let ne = (n * m / (n + m)).sqrt();
    kolmogorov_sf((ne + 0.12 + 0.11 / ne) * d)
}

/// Chi-square goodness-of-fit p-value of integer counts against
/// Poisson(`rate`). Cells are merged until each expects at least five.
pub fn poisson_chi_square_p(counts: &[usize], rate: f64) -> f64 {
    let n = counts.len() as f64;
    let law = Poisson::new(rate).expect("positive rate");
    let max = counts.iter().copied().max().unwrap_or(0);
    let mut observed = vec![0.0; max + 1];
    for &c in counts {
        observed[c] += 1.0;
    }
    // (observed, expected) per merged cell; last cell absorbs the upper tail
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    let mut cumulative = 0.0;
    for (k, &obs) in observed.iter().enumerate() {
        let pk = law.pmf(k as u64);
        cumulative += pk;
        o += obs;
        e += n * pk;
        if e >= 5.0 {
            cells.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    e += n * (1.0 - cumulative).max(0.0);
    match cells.last_mut() {
        Some(last) if e < 5.0 => {
            last.0 += o;
            last.1 += e;
        }
        _ => cells.push((o, e)),
    }
    if cells.len() < 2 {
        return 1.0;
    }
    let stat: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = (cells.len() - 1) as f64;
    1.0 - ChiSquared::new(dof).expect("positive dof").cdf(stat)
}

/// Two-sided p-value of a two-sample z test on means.
pub fn two_sample_z_p(a: &[f64], b: &[f64]) -> f64 {
    let se = (variance(a) / a.len() as f64 + variance(b) / b.len() as f64).sqrt();
    let diff = mean(a) - mean(b);
    if se == 0.0 {
        return if diff == 0.0 { 1.0 } else { 0.0 };
    }
    2.0 * (1.0 - Normal::standard().cdf((diff / se).abs()))
}
