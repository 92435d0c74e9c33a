use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Seeded spectral probes in the box |Re|, |Im| ≤ `radius`, kept at least
/// `min_distance` away from every point of `avoid`.
pub fn probe_lambdas(
    seed: u64,
    count: usize,
    radius: f64,
    avoid: &[Complex64],
    min_distance: f64,
) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count {
        attempts += 1;
        let z = Complex64::new(rng.gen_range(-radius..radius), rng.gen_range(-radius..radius));
        let spacing = if attempts > 10_000 { 0.0 } else { min_distance };
        if avoid.iter().all(|a| (a - z).norm() >= spacing) {
            out.push(z);
        }
    }
    out
}

/// Probes restricted to Re λ ≥ `re_min`.
pub fn probe_lambdas_right(seed: u64, count: usize, re_min: f64, radius: f64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| Complex64::new(rng.gen_range(re_min..re_min + radius), rng.gen_range(-radius..radius)))
        .collect()
}

pub fn probe_nodes(seed: u64, count: usize, n_nodes: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    (0..count).map(|_| rng.gen_range(0..n_nodes)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probes_are_reproducible_and_avoid_points() {
        let avoid = [Complex64::new(0.0, 0.0)];
        let a = probe_lambdas(7, 50, 2.0, &avoid, 0.3);
        let b = probe_lambdas(7, 50, 2.0, &avoid, 0.3);
        assert_eq!(a, b);
        assert!(a.iter().all(|z| z.norm() >= 0.3));
        assert_ne!(a, probe_lambdas(8, 50, 2.0, &avoid, 0.3));
    }
}
