//! Numerical oracles shared by integration tests: quadrature, a reference
//! log-gamma and a small deterministic generator. Nothing here calls into the
//! library's own density code.
#![allow(dead_code)]

use std::f64::consts::PI;

/// splitmix64; enough for drawing test cases.
pub struct CaseRng(u64);

impl CaseRng {
    pub fn new(seed: u64) -> Self {
        Self(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * ((self.next_u64() >> 11) as f64 / (1u64 << 53) as f64)
    }

    pub fn int(&mut self, lo: usize, hi_inclusive: usize) -> usize {
        lo + (self.next_u64() % (hi_inclusive - lo + 1) as u64) as usize
    }

    /// Box-Muller.
    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform(f64::MIN_POSITIVE, 1.0);
        let u2 = self.uniform(0.0, 1.0);
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    }
}

/// Lanczos approximation (g = 7, n = 9), ~1e-15 relative accuracy.
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
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
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Composite Simpson weights for `n` (odd) equally spaced nodes.
pub fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    assert!(n >= 3 && n % 2 == 1, "Simpson needs an odd node count");
    (0..n)
        .map(|i| {
            let w = if i == 0 || i == n - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * h / 3.0
        })
        .collect()
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> (Vec<f64>, f64) {
    let h = (hi - lo) / (n - 1) as f64;
    ((0..n).map(|i| lo + i as f64 * h).collect(), h)
}

/// log N(y | mu, s2) summed over `ys`.
pub fn gaussian_loglik(ys: &[f64], mu: f64, s2: f64) -> f64 {
    ys.iter()
        .map(|y| -0.5 * (2.0 * PI * s2).ln() - (y - mu).powi(2) / (2.0 * s2))
        .sum()
}

/// log of N(mu | m, s2 / lambda) * InvGamma(s2 | alpha, beta).
pub fn nig_ln_pdf(mu: f64, s2: f64, m: f64, lambda: f64, alpha: f64, beta: f64) -> f64 {
    let normal = -0.5 * (2.0 * PI * s2 / lambda).ln() - lambda * (mu - m).powi(2) / (2.0 * s2);
    let inv_gamma = alpha * beta.ln() - ln_gamma(alpha) - (alpha + 1.0) * s2.ln() - beta / s2;
    normal + inv_gamma
}

/// Max abs error between the normalised posterior prior x likelihood
/// (integrated on a 2-D grid) and `candidate(mu, s2)`, checked on every
/// `stride`-th node.
///
/// Integration runs over `(z, ln s2)` with `mu = centre + sqrt(s2) z`, so the
/// grid follows the conditional spread of `mu` at every variance.
pub fn nig_posterior_grid_error(
    ys: &[f64],
    prior: (f64, f64, f64, f64),
    candidate: impl Fn(f64, f64) -> f64,
    stride: usize,
) -> f64 {
    let (m0, l0, a0, b0) = prior;
    let n = ys.len() as f64;
    let centre = (l0 * m0 + ys.iter().sum::<f64>()) / (l0 + n);
    let (zs, hz) = linspace(-12.0, 12.0, 961);
    let (ss, hs) = linspace(-12.0, 16.0, 2801);
    let wz = simpson_weights(zs.len(), hz);
    let ws = simpson_weights(ss.len(), hs);

    let ln_f = |mu: f64, s2: f64| nig_ln_pdf(mu, s2, m0, l0, a0, b0) + gaussian_loglik(ys, mu, s2);
    let mut grid = vec![0.0; zs.len() * ss.len()];
    let mut peak = f64::NEG_INFINITY;
    for (j, &s) in ss.iter().enumerate() {
        let s2 = s.exp();
        for (i, &z) in zs.iter().enumerate() {
            let v = ln_f(centre + s2.sqrt() * z, s2);
            grid[j * zs.len() + i] = v;
            peak = peak.max(v);
        }
    }
    let mut z_norm = 0.0;
    for (j, &s) in ss.iter().enumerate() {
        let s2 = s.exp();
        // d mu d s2 = sqrt(s2) dz * s2 ds
        let jac = s2.sqrt() * s2;
        for i in 0..zs.len() {
            z_norm += wz[i] * ws[j] * jac * (grid[j * zs.len() + i] - peak).exp();
        }
    }
    let mut worst: f64 = 0.0;
    for (j, &s) in ss.iter().enumerate().step_by(stride) {
        let s2 = s.exp();
        for (i, &z) in zs.iter().enumerate().step_by(stride) {
            let oracle = (grid[j * zs.len() + i] - peak).exp() / z_norm;
            let got = candidate(centre + s2.sqrt() * z, s2);
            worst = worst.max((oracle - got).abs());
        }
    }
    worst
}

/// `int p(mu, s2) d s2` for a joint NIG density, by quadrature in `ln s2`.
pub fn nig_marginal_by_quadrature(mu: f64, post: (f64, f64, f64, f64)) -> f64 {
    let (m, l, a, b) = post;
    let (ss, h) = linspace(-40.0, 40.0, 16_001);
    let w = simpson_weights(ss.len(), h);
    ss.iter()
        .zip(&w)
        .map(|(&s, &wi)| wi * (nig_ln_pdf(mu, s.exp(), m, l, a, b) + s).exp())
        .sum()
}
