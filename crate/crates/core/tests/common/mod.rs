//! Independent oracles shared by the integration and acceptance suites.
#![allow(dead_code)]

use distrl_core::diagnostics::{self, DiscreteLaw};
use distrl_core::learner;
use distrl_core::seed;
use distrl_core::{FeatureMap, PathState};
use rand::Rng;
use rand_distr::{Distribution, Exp};

/// Minimum-cost perfect matching between two equally weighted atom sets,
/// by enumerating every permutation (Heap's algorithm).
pub fn brute_force_w1(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let cost = |p: &[usize]| a.iter().zip(p).map(|(x, &j)| (x - b[j]).abs()).sum::<f64>() / n as f64;
    let mut best = cost(&perm);
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(cost(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best
}

/// Largest gap between sorted-pairing W₁ and brute-force matching over
/// `instances` random pairs with `1 ≤ N ≤ 6`.
pub fn w1_brute_force_gap(instances: usize, base_seed: u64) -> f64 {
    let mut rng = seed::stream(base_seed, "w1-oracle", 0);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let n = rng.random_range(1..=6);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let mut b: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        b.sort_by(f64::total_cmp);
        let fast = diagnostics::wasserstein1_quantile(&a, &b).unwrap();
        worst = worst.max((fast - brute_force_w1(&a, &b)).abs());
    }
    worst
}

fn random_law<R: Rng>(rng: &mut R, max_atoms: usize) -> DiscreteLaw {
    let n = rng.random_range(1..=max_atoms);
    let atoms: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    DiscreteLaw::new(atoms, raw.iter().map(|p| p / total).collect()).unwrap()
}

/// Exact distributional Bellman operator on a chain with deterministic
/// transitions `next[s]` and independent reward laws `reward[s]`:
/// `(T Z)(s) = law of R(s) + γ Z(next(s))`.
pub fn bellman(z: &[DiscreteLaw], next: &[usize], reward: &[DiscreteLaw], gamma: f64) -> Vec<DiscreteLaw> {
    next.iter()
        .zip(reward)
        .map(|(&s2, r)| r.convolve(&z[s2].affine(0.0, gamma)))
        .collect()
}

pub fn sup_w1(a: &[DiscreteLaw], b: &[DiscreteLaw]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.wasserstein1(y)).fold(0.0, f64::max)
}

/// Checks `sup W₁(TZ₁, TZ₂) ≤ γ sup W₁(Z₁, Z₂) + 1e-12` on random 3-state
/// chains; returns the number of instances that violate it and the worst
/// observed ratio.
pub fn contraction_violations(instances: usize, gamma: f64, base_seed: u64) -> (usize, f64) {
    let mut violations = 0;
    let mut worst_ratio: f64 = 0.0;
    for k in 0..instances {
        let mut rng = seed::stream(base_seed, "contraction", k as u64);
        let next: Vec<usize> = (0..3).map(|_| rng.random_range(0..3)).collect();
        let reward: Vec<DiscreteLaw> = (0..3).map(|_| random_law(&mut rng, 3)).collect();
        let z1: Vec<DiscreteLaw> = (0..3).map(|_| random_law(&mut rng, 5)).collect();
        let z2: Vec<DiscreteLaw> = (0..3).map(|_| random_law(&mut rng, 5)).collect();
        let before = sup_w1(&z1, &z2);
        let after = sup_w1(&bellman(&z1, &next, &reward, gamma), &bellman(&z2, &next, &reward, gamma));
        if after > gamma * before + 1e-12 {
            violations += 1;
        }
        if before > 0.0 {
            worst_ratio = worst_ratio.max(after / before);
        }
    }
    (violations, worst_ratio)
}

/// Robbins–Monro quantile regression with a single constant feature on
/// Uniform(0,1) targets, step `1 / (k + 10)`.
pub fn quantile_sgd_uniform(tau: f64, iterations: usize, base_seed: u64) -> f64 {
    let mut rng = seed::stream(base_seed, "quantile-sgd", (tau * 1e6) as u64);
    let mut w = [0.0];
    for k in 0..iterations {
        let y: f64 = rng.random();
        learner::semi_gradient_step(&mut w, &[1.0], 1.0, tau, y, 1.0 / (k as f64 + 10.0), f64::INFINITY);
    }
    w[0]
}

/// Largest gap between the averaged stochastic subgradient `τ - 1{y<θ}`
/// and its population value `τ - F(θ)` for Exp(1) targets.
pub fn subgradient_bias(samples: usize, base_seed: u64) -> f64 {
    let exp = Exp::new(1.0).unwrap();
    let mut worst: f64 = 0.0;
    for (j, (tau, theta)) in [(0.1, 0.05), (0.5, 0.69), (0.9, 1.5), (0.3, 3.0)].into_iter().enumerate() {
        let mut rng = seed::stream(base_seed, "unbiased", j as u64);
        let mean = (0..samples)
            .map(|_| learner::quantile_subgradient(tau, exp.sample(&mut rng) - theta))
            .sum::<f64>()
            / samples as f64;
        let population = tau - (1.0 - (-theta).exp());
        worst = worst.max((mean - population).abs());
    }
    worst
}

/// Worst relative disagreement between central finite differences of the
/// pinball TD loss and the analytic full gradient, over random transitions
/// whose residual stays away from the kink. Returns `(worst, checked)`.
pub fn td_gradient_fd_error(instances: usize, base_seed: u64) -> (f64, usize) {
    let mut rng = seed::stream(base_seed, "fd", 0);
    let fm = FeatureMap::sampled(6, 0.5, 200.0, 252, &mut rng).unwrap();
    // the loss is piecewise linear, so a wide step is exact away from the kink
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    while checked < instances {
        let s = PathState {
            spot: rng.random_range(60.0..160.0),
            running_avg: rng.random_range(60.0..160.0),
            step_index: rng.random_range(0..252),
        };
        let s2 = PathState {
            spot: s.spot * rng.random_range(0.97..1.03),
            running_avg: s.running_avg,
            step_index: s.step_index + 1,
        };
        let phi = fm.features(&s).unwrap();
        let phi2 = fm.features(&s2).unwrap();
        let w: Vec<f64> = (0..fm.dim()).map(|_| rng.random_range(-3.0..3.0)).collect();
        let tau: f64 = rng.random_range(0.01..0.99);
        let gamma = 0.999;
        let reward = rng.random_range(-2.0..2.0);
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let delta = reward + gamma * dot(&w, &phi2) - dot(&w, &phi);
        // a coordinate perturbation moves Δ by at most h·max_j |γφ'_j - φ_j| ≤ h
        if delta.abs() <= 1e-3 {
            continue;
        }
        let grad = learner::full_td_gradient(tau, delta, gamma, &phi, &phi2);
        for j in 0..w.len() {
            let mut up = w.clone();
            let mut dn = w.clone();
            up[j] += h;
            dn[j] -= h;
            let fd = (learner::td_loss(&up, reward, gamma, &phi, &phi2, tau)
                - learner::td_loss(&dn, reward, gamma, &phi, &phi2, tau))
                / (2.0 * h);
            let rel = (fd - grad[j]).abs() / grad[j].abs().max(1e-3);
            worst = worst.max(rel);
        }
        checked += 1;
    }
    (worst, checked)
}
