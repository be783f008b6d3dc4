//! Policy heads: independent Bernoulli bit vectors, diagonal Gaussians and
//! categoricals, with sampling, log-densities, entropies and KL divergences.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bernoulli probabilities are clamped to `[P_MIN, 1 - P_MIN]`.
pub const P_MIN: f64 = 1e-6;
pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Action {
    Bits(Vec<u8>),
    Real(Vec<f64>),
    Index(usize),
}

impl Action {
    /// Dense feature encoding; categorical indices become one-hot vectors.
    pub fn features(&self, width: usize) -> Vec<f64> {
        match self {
            Action::Bits(b) => b.iter().map(|&x| f64::from(x)).collect(),
            Action::Real(v) => v.clone(),
            Action::Index(i) => {
                let mut v = vec![0.0; width];
                v[*i] = 1.0;
                v
            }
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliVector {
    probs: Vec<f64>,
    /// Whether each probability sits on a clamp boundary (zero gradient).
    clamped: Vec<bool>,
}

impl BernoulliVector {
    pub fn from_probs(probs: &[f64]) -> Self {
        let clamped = probs.iter().map(|&p| !(P_MIN..=1.0 - P_MIN).contains(&p)).collect();
        Self {
            probs: probs.iter().map(|&p| p.clamp(P_MIN, 1.0 - P_MIN)).collect(),
            clamped,
        }
    }

    pub fn from_logits(logits: &[f64]) -> Self {
        let p: Vec<f64> = logits.iter().map(|&z| sigmoid(z)).collect();
        Self::from_probs(&p)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn width(&self) -> usize {
        self.probs.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagGaussian {
    mean: Vec<f64>,
    log_std: Vec<f64>,
    clamped: Vec<bool>,
}

impl DiagGaussian {
    pub fn new(mean: &[f64], log_std: &[f64]) -> Result<Self> {
        if mean.len() != log_std.len() {
            return Err(Error::dim("DiagGaussian", &[mean.len()], &[log_std.len()]));
        }
        Ok(Self {
            mean: mean.to_vec(),
            log_std: log_std.iter().map(|&s| s.clamp(LOG_STD_MIN, LOG_STD_MAX)).collect(),
            clamped: log_std
                .iter()
                .map(|s| !(LOG_STD_MIN..=LOG_STD_MAX).contains(s))
                .collect(),
        })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn log_std(&self) -> &[f64] {
        &self.log_std
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Categorical {
    log_probs: Vec<f64>,
}

impl Categorical {
    pub fn from_logits(logits: &[f64]) -> Result<Self> {
        if logits.len() < 2 {
            return Err(Error::Domain("categorical needs at least two choices".into()));
        }
        if logits.iter().any(|l| !l.is_finite()) {
            return Err(Error::NonFinite("categorical logits".into()));
        }
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        Ok(Self {
            log_probs: logits.iter().map(|l| l - lse).collect(),
        })
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }

    pub fn probs(&self) -> Vec<f64> {
        self.log_probs.iter().map(|l| l.exp()).collect()
    }

    pub fn num_choices(&self) -> usize {
        self.log_probs.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Distribution {
    Bernoulli(BernoulliVector),
    Gaussian(DiagGaussian),
    Categorical(Categorical),
}

impl Distribution {
    fn family(&self) -> &'static str {
        match self {
            Distribution::Bernoulli(_) => "bernoulli",
            Distribution::Gaussian(_) => "gaussian",
            Distribution::Categorical(_) => "categorical",
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Action {
        match self {
            Distribution::Bernoulli(b) => Action::Bits(
                b.probs
                    .iter()
                    .map(|&p| u8::from(rng.random::<f64>() < p))
                    .collect(),
            ),
            Distribution::Gaussian(g) => Action::Real(
                g.mean
                    .iter()
                    .zip(&g.log_std)
                    .map(|(m, s)| m + s.exp() * rng.sample::<f64, _>(StandardNormal))
                    .collect(),
            ),
            Distribution::Categorical(c) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (i, lp) in c.log_probs.iter().enumerate() {
                    acc += lp.exp();
                    if u < acc {
                        return Action::Index(i);
                    }
                }
                Action::Index(c.log_probs.len() - 1)
            }
        }
    }

    /// Most likely action (bits thresholded at 0.5, Gaussian mean, argmax).
    pub fn mode(&self) -> Action {
        match self {
            Distribution::Bernoulli(b) => {
                Action::Bits(b.probs.iter().map(|&p| u8::from(p > 0.5)).collect())
            }
            Distribution::Gaussian(g) => Action::Real(g.mean.clone()),
            Distribution::Categorical(c) => Action::Index(
                c.log_probs
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(i, _)| i)
                    .unwrap_or(0),
            ),
        }
    }

    pub fn log_prob(&self, action: &Action) -> Result<f64> {
        match (self, action) {
            (Distribution::Bernoulli(b), Action::Bits(bits)) => {
                if bits.len() != b.probs.len() {
                    return Err(Error::dim("bernoulli log_prob", &[b.probs.len()], &[bits.len()]));
                }
                let mut lp = 0.0;
                for (&bit, &p) in bits.iter().zip(&b.probs) {
                    lp += match bit {
                        1 => p.ln(),
                        0 => (1.0 - p).ln(),
                        other => return Err(Error::Domain(format!("bit value {other}"))),
                    };
                }
                Ok(lp)
            }
            (Distribution::Gaussian(g), Action::Real(x)) => {
                if x.len() != g.mean.len() {
                    return Err(Error::dim("gaussian log_prob", &[g.mean.len()], &[x.len()]));
                }
                Ok(x.iter()
                    .zip(&g.mean)
                    .zip(&g.log_std)
                    .map(|((x, m), s)| {
                        let z = (x - m) / s.exp();
                        -0.5 * z * z - s - 0.5 * (2.0 * PI).ln()
                    })
                    .sum())
            }
            (Distribution::Categorical(c), Action::Index(i)) => c
                .log_probs
                .get(*i)
                .copied()
                .ok_or_else(|| Error::Domain(format!("index {i} out of {}", c.log_probs.len()))),
            (d, a) => Err(Error::Domain(format!(
                "action {a:?} is not in the support of a {} distribution",
                d.family()
            ))),
        }
    }

    /// Gradient of `log_prob(action)` with respect to the raw head outputs
    /// (logits or means), and with respect to the Gaussian log-std vector
    /// (empty for the other families).
    pub fn log_prob_grad(&self, action: &Action) -> Result<(Vec<f64>, Vec<f64>)> {
        match (self, action) {
            (Distribution::Bernoulli(b), Action::Bits(bits)) => Ok((
                bits.iter()
                    .zip(&b.probs)
                    .zip(&b.clamped)
                    .map(|((&bit, &p), &c)| if c { 0.0 } else { f64::from(bit) - p })
                    .collect(),
                Vec::new(),
            )),
            (Distribution::Gaussian(g), Action::Real(x)) => {
                let mut dm = Vec::with_capacity(x.len());
                let mut ds = Vec::with_capacity(x.len());
                for i in 0..x.len() {
                    let var = (2.0 * g.log_std[i]).exp();
                    let d = x[i] - g.mean[i];
                    dm.push(d / var);
                    ds.push(if g.clamped[i] { 0.0 } else { d * d / var - 1.0 });
                }
                Ok((dm, ds))
            }
            (Distribution::Categorical(c), Action::Index(i)) => Ok((
                c.log_probs
                    .iter()
                    .enumerate()
                    .map(|(j, lp)| f64::from(u8::from(j == *i)) - lp.exp())
                    .collect(),
                Vec::new(),
            )),
            (d, a) => Err(Error::Domain(format!(
                "action {a:?} is not in the support of a {} distribution",
                d.family()
            ))),
        }
    }

    pub fn entropy(&self) -> f64 {
        match self {
            Distribution::Bernoulli(b) => b
                .probs
                .iter()
                .map(|&p| -(p * p.ln() + (1.0 - p) * (1.0 - p).ln()))
                .sum(),
            Distribution::Gaussian(g) => g
                .log_std
                .iter()
                .map(|s| s + 0.5 * (2.0 * PI * std::f64::consts::E).ln())
                .sum(),
            Distribution::Categorical(c) => -c.log_probs.iter().map(|lp| lp.exp() * lp).sum::<f64>(),
        }
    }

    /// `KL(self ‖ other)` in closed form.
    pub fn kl(&self, other: &Distribution) -> Result<f64> {
        let v = match (self, other) {
            (Distribution::Bernoulli(p), Distribution::Bernoulli(q)) => {
                if p.width() != q.width() {
                    return Err(Error::dim("bernoulli kl", &[p.width()], &[q.width()]));
                }
                p.probs
                    .iter()
                    .zip(&q.probs)
                    .map(|(&a, &b)| a * (a / b).ln() + (1.0 - a) * ((1.0 - a) / (1.0 - b)).ln())
                    .sum::<f64>()
            }
            (Distribution::Gaussian(p), Distribution::Gaussian(q)) => {
                if p.mean.len() != q.mean.len() {
                    return Err(Error::dim("gaussian kl", &[p.mean.len()], &[q.mean.len()]));
                }
                (0..p.mean.len())
                    .map(|i| {
                        let vp = (2.0 * p.log_std[i]).exp();
                        let vq = (2.0 * q.log_std[i]).exp();
                        let d = p.mean[i] - q.mean[i];
                        q.log_std[i] - p.log_std[i] + (vp + d * d) / (2.0 * vq) - 0.5
                    })
                    .sum::<f64>()
            }
            (Distribution::Categorical(p), Distribution::Categorical(q)) => {
                if p.num_choices() != q.num_choices() {
                    return Err(Error::dim("categorical kl", &[p.num_choices()], &[q.num_choices()]));
                }
                p.log_probs
                    .iter()
                    .zip(&q.log_probs)
                    .map(|(a, b)| a.exp() * (a - b))
                    .sum::<f64>()
            }
            (a, b) => {
                return Err(Error::Domain(format!(
                    "kl between {} and {}",
                    a.family(),
                    b.family()
                )))
            }
        };
        Ok(v.max(0.0))
    }

    /// Exact total-variation distance for the discrete families. The
    /// Bernoulli vector is treated as a product distribution over `2^m`
    /// outcomes.
    pub fn total_variation(&self, other: &Distribution) -> Result<f64> {
        match (self, other) {
            (Distribution::Categorical(p), Distribution::Categorical(q)) => {
                if p.num_choices() != q.num_choices() {
                    return Err(Error::dim("categorical tv", &[p.num_choices()], &[q.num_choices()]));
                }
                Ok(0.5
                    * p.log_probs
                        .iter()
                        .zip(&q.log_probs)
                        .map(|(a, b)| (a.exp() - b.exp()).abs())
                        .sum::<f64>())
            }
            (Distribution::Bernoulli(p), Distribution::Bernoulli(q)) => {
                let m = p.width();
                if m != q.width() {
                    return Err(Error::dim("bernoulli tv", &[m], &[q.width()]));
                }
                if m > 20 {
                    return Err(Error::Domain(format!("tv enumeration over 2^{m} outcomes")));
                }
                let mut tv = 0.0;
                for mask in 0u32..(1 << m) {
                    let (mut a, mut b) = (1.0, 1.0);
                    for i in 0..m {
                        if mask >> i & 1 == 1 {
                            a *= p.probs[i];
                            b *= q.probs[i];
                        } else {
                            a *= 1.0 - p.probs[i];
                            b *= 1.0 - q.probs[i];
                        }
                    }
                    tv += (a - b).abs();
                }
                Ok(0.5 * tv)
            }
            (a, b) => Err(Error::Domain(format!(
                "total variation between {} and {}",
                a.family(),
                b.family()
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bern(p: &[f64]) -> Distribution {
        Distribution::Bernoulli(BernoulliVector::from_probs(p))
    }

    #[test]
    fn near_degenerate_bernoulli_samples() {
        let d = bern(&[1.0 - P_MIN, P_MIN, 1.0 - P_MIN]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            assert_eq!(d.sample(&mut rng), Action::Bits(vec![1, 0, 1]));
        }
    }

    #[test]
    fn gaussian_log_std_is_clamped() {
        let g = DiagGaussian::new(&[0.0], &[-20.0]).unwrap();
        assert_eq!(g.log_std(), &[LOG_STD_MIN]);
        let d = Distribution::Gaussian(g);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let Action::Real(x) = d.sample(&mut rng) else { panic!() };
            assert!(x[0].abs() < 6.0 * LOG_STD_MIN.exp());
        }
    }

    #[test]
    fn fair_bits_empirical_mean() {
        let d = bern(&[0.5; 3]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut counts = [0usize; 3];
        let n = 100_000;
        for _ in 0..n {
            let Action::Bits(b) = d.sample(&mut rng) else { panic!() };
            for i in 0..3 {
                counts[i] += b[i] as usize;
            }
        }
        for c in counts {
            let m = c as f64 / n as f64;
            assert!((0.49..=0.51).contains(&m), "{m}");
        }
    }

    #[test]
    fn log_prob_values() {
        let lp = bern(&[0.5, 0.5]).log_prob(&Action::Bits(vec![1, 0])).unwrap();
        assert!((lp - 0.25f64.ln()).abs() < 1e-12);
        let c = Distribution::Categorical(Categorical::from_logits(&[0.3; 3]).unwrap());
        assert!((c.log_prob(&Action::Index(2)).unwrap() + 1.0986123).abs() < 1e-7);
    }

    #[test]
    fn bad_bit_is_domain_error() {
        assert!(matches!(
            bern(&[0.5, 0.5]).log_prob(&Action::Bits(vec![1, 2])),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            bern(&[0.5]).log_prob(&Action::Index(0)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn entropies() {
        assert!((bern(&[0.5; 3]).entropy() - 2.0794415).abs() < 1e-7);
        let c = Distribution::Categorical(Categorical::from_logits(&[50.0, 0.0, 0.0]).unwrap());
        assert!(c.entropy() < 1e-15);
        let g = Distribution::Gaussian(DiagGaussian::new(&[0.0], &[0.0]).unwrap());
        assert!((g.entropy() - 1.4189385).abs() < 1e-7);
    }

    #[test]
    fn bernoulli_kl_value() {
        let kl = bern(&[0.5]).kl(&bern(&[0.25])).unwrap();
        assert!((kl - 0.1438410).abs() < 1e-7);
    }

    #[test]
    fn kl_self_is_exactly_zero() {
        let b = bern(&[0.3, 1e-9, 0.99]);
        assert_eq!(b.kl(&b).unwrap(), 0.0);
        let g = Distribution::Gaussian(DiagGaussian::new(&[0.2, -1.0], &[0.4, -3.0]).unwrap());
        assert_eq!(g.kl(&g).unwrap(), 0.0);
        let c = Distribution::Categorical(Categorical::from_logits(&[1.0, -2.0, 0.5]).unwrap());
        assert_eq!(c.kl(&c).unwrap(), 0.0);
    }

    #[test]
    fn kl_family_mismatch() {
        let c = Distribution::Categorical(Categorical::from_logits(&[1.0, 0.0]).unwrap());
        assert!(bern(&[0.5]).kl(&c).is_err());
    }

    #[test]
    fn categorical_needs_two_choices() {
        assert!(Categorical::from_logits(&[1.0]).is_err());
    }

    #[test]
    fn log_prob_grad_matches_finite_differences() {
        let h = 1e-6;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let logits: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mk_b = |z: &[f64]| Distribution::Bernoulli(BernoulliVector::from_logits(z));
        let mk_c = |z: &[f64]| Distribution::Categorical(Categorical::from_logits(z).unwrap());
        let a_b = Action::Bits(vec![1, 0, 0, 1]);
        let a_c = Action::Index(2);
        for (mk, a) in [(&mk_b as &dyn Fn(&[f64]) -> Distribution, &a_b), (&mk_c, &a_c)] {
            let (g, _) = mk(&logits).log_prob_grad(a).unwrap();
            for i in 0..4 {
                let mut zp = logits.clone();
                zp[i] += h;
                let mut zm = logits.clone();
                zm[i] -= h;
                let num = (mk(&zp).log_prob(a).unwrap() - mk(&zm).log_prob(a).unwrap()) / (2.0 * h);
                assert!((g[i] - num).abs() < 1e-7);
            }
        }
        let mean = [0.3, -0.2];
        let ls = [0.1, -0.7];
        let x = Action::Real(vec![1.0, 0.5]);
        let lp = |m: &[f64], s: &[f64]| {
            Distribution::Gaussian(DiagGaussian::new(m, s).unwrap()).log_prob(&x).unwrap()
        };
        let (dm, ds) = Distribution::Gaussian(DiagGaussian::new(&mean, &ls).unwrap())
            .log_prob_grad(&x)
            .unwrap();
        for i in 0..2 {
            let mut mp = mean;
            mp[i] += h;
            let mut mm = mean;
            mm[i] -= h;
            assert!((dm[i] - (lp(&mp, &ls) - lp(&mm, &ls)) / (2.0 * h)).abs() < 1e-7);
            let mut sp = ls;
            sp[i] += h;
            let mut sm = ls;
            sm[i] -= h;
            assert!((ds[i] - (lp(&mean, &sp) - lp(&mean, &sm)) / (2.0 * h)).abs() < 1e-7);
        }
    }

    #[test]
    fn gaussian_density_integrates_to_one() {
        let d = Distribution::Gaussian(DiagGaussian::new(&[0.4], &[-0.3]).unwrap());
        let (lo, hi, n) = (-8.0, 8.0, 20_000);
        let dx = (hi - lo) / n as f64;
        let total: f64 = (0..n)
            .map(|i| {
                let x = lo + (i as f64 + 0.5) * dx;
                d.log_prob(&Action::Real(vec![x])).unwrap().exp() * dx
            })
            .sum();
        assert!((total - 1.0).abs() < 1e-3);
    }
}
